"""Tests for benchmark documents and presets"""

import numpy as np
import pytest

from src.config_parser import DocumentParser, parse_config, preset_config
from src.errors import ConfigurationError, SchemaError, UnitsError

FULL_DOCUMENT = """
# clamped ribbon, sheared towards -y
model=audoly
L=10 cm
W_over_L=1/12
L_over_b=100
Y=2 GPa
nu=0.4
density=1.2 g/cm^3
mesh=63
compression=0.25
direction=neg
sweep_time=5 s
h=2 ms
delta_F=1e-7 N
"""


class TestDocumentParser:

    @pytest.mark.parametrize('text, expected', [('0.25', 0.25), ('1/12', 1.0 / 12.0), (' 2e-3 ', 2e-3)])
    def test_numbers(self, text, expected):
        assert DocumentParser.parse_number('x', text) == pytest.approx(expected)

    @pytest.mark.parametrize('text', ['abc', '1/0'])
    def test_bad_numbers(self, text):
        with pytest.raises(SchemaError):
            DocumentParser.parse_number('x', text)

    @pytest.mark.parametrize('text, family, expected', [
        ('10 cm', 'length', 0.1),
        ('10GPa', 'pressure', 1e10),
        ('180 deg', 'angle', np.pi),
        ('1e-3 m', 'length', 1e-3),
    ])
    def test_quantities(self, text, family, expected):
        assert DocumentParser.parse_quantity('x', text, family) == pytest.approx(expected)

    def test_missing_unit(self):
        with pytest.raises(UnitsError) as info:
            DocumentParser.parse_quantity('L', '0.1', 'length')
        assert info.value.field == 'L'

    def test_unit_from_wrong_family(self):
        with pytest.raises(UnitsError):
            DocumentParser.parse_quantity('L', '0.1 s', 'length')

    def test_direction(self):
        assert DocumentParser.parse_value('direction', 'NEG', 'direction') == -1
        with pytest.raises(SchemaError):
            DocumentParser.parse_value('direction', 'up', 'direction')


class TestParseConfig:

    def test_minimal_document_takes_defaults(self):
        config = parse_config("model=sano\n")
        assert config.model == 'sano'
        assert config.length == pytest.approx(0.1)
        assert config.youngs_modulus == pytest.approx(1e10)
        assert config.poisson_ratio == 0.5
        assert config.n_nodes == 45
        assert config.inplane_ratio == pytest.approx(64.0)

    def test_inplane_ratio(self):
        config = parse_config("inplane_ratio=100\n")
        assert config.section().inertia_1 == pytest.approx(100.0 * config.section().inertia_2)
        with pytest.raises(SchemaError):
            parse_config("inplane_ratio=0.5\n")

    def test_full_document(self):
        config = parse_config(FULL_DOCUMENT)
        assert config.model == 'audoly'
        assert config.length == pytest.approx(0.1)
        assert config.width_ratio == pytest.approx(1.0 / 12.0)
        assert config.youngs_modulus == pytest.approx(2e9)
        assert config.poisson_ratio == pytest.approx(0.4)
        assert config.density == pytest.approx(1200.0)
        assert config.n_nodes == 63
        assert config.direction == -1
        assert config.sweep_time == pytest.approx(5.0)
        assert config.solver.h == pytest.approx(2e-3)
        assert config.solver.delta_F == pytest.approx(1e-7)

    def test_missing_unit_in_document(self):
        with pytest.raises(UnitsError):
            parse_config("L=0.1\n")

    def test_unknown_field(self):
        with pytest.raises(SchemaError) as info:
            parse_config("colour=red\n")
        assert info.value.field == 'colour'

    def test_empty_value(self):
        with pytest.raises(SchemaError):
            parse_config("mesh=\n")

    def test_unknown_model(self):
        with pytest.raises(SchemaError) as info:
            parse_config("model=bernoulli\n")
        assert info.value.field == 'model'

    def test_invalid_solver_settings(self):
        with pytest.raises(ConfigurationError):
            parse_config("h=1 s\n")

    def test_preset_then_document_then_overrides(self):
        config = parse_config("preset=homotopy\nmesh=63\n", overrides={'model': 'audoly', 'seed': None})
        assert config.sweep == 'homotopy'
        assert config.homotopy_target == pytest.approx(1.0 / 3.0)
        assert config.model == 'audoly'
        assert config.n_nodes == 63
        assert config.seed == 0

    def test_unknown_preset(self):
        with pytest.raises(SchemaError):
            parse_config("preset=stretch\n")

    def test_twist_range_is_an_angle(self):
        config = parse_config("sweep=twist\nsweep_max=90 deg\n")
        assert config.sweep_max == pytest.approx(np.pi / 2.0)

    def test_shear_range_is_a_ratio(self):
        assert parse_config("sweep_max=0.3\n").sweep_max == pytest.approx(0.3)

    def test_reads_files(self, tmp_path):
        path = tmp_path / 'bench.env'
        path.write_text(FULL_DOCUMENT)
        assert parse_config(path).n_nodes == 63
        assert parse_config(str(path)).model == 'audoly'

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigurationError):
            parse_config(tmp_path / 'absent.env')


class TestPresets:

    def test_twist_preset(self):
        config = preset_config('twist', width_ratio=None, model='wunderlich')
        assert config.sweep == 'twist'
        assert config.width_ratio == pytest.approx(1.0 / 12.0)
        assert config.model == 'wunderlich'
        assert config.sweep_max == pytest.approx(4.0)

    def test_unknown(self):
        with pytest.raises(SchemaError):
            preset_config('stretch')
