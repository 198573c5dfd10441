"""Tests for shift comparison and efficiency reports"""

from types import SimpleNamespace

import pytest

from src.config_parser import preset_config
from src.reports import BENCH_COLUMNS, bench_perf, compare_runs, format_table, perf_row
from src.scenarios import BenchmarkConfig

BASELINE_PEAK = 0.28


def fake_result(model='kirchhoff', n_nodes=45, width_ratio=1.0 / 40.0, wall=1.58, steps=285, iterations=1456):
    phases = {
        'compression': {'steps': 100, 'iterations': 300, 'wall_time': 0.7, 'simulated_time': 2.0},
        'shear': {'steps': steps, 'iterations': iterations, 'wall_time': wall, 'simulated_time': 4.95,
                  'rejected': 7},
    }
    config = BenchmarkConfig(model=model, n_nodes=n_nodes, width_ratio=width_ratio)
    return SimpleNamespace(config=config, phases=phases)


class TestCompareRuns:

    def test_identical_runs(self, transition_trace):
        trace = transition_trace(BASELINE_PEAK)
        report = compare_runs(trace, trace, model='kirchhoff', width_ratio=1.0 / 20.0)
        for entry in report['transitions'].values():
            assert entry['shift_percent'] == pytest.approx(0.0, abs=1e-12)
            assert entry['notes'] == []

    def test_sano_narrow_ribbon(self, transition_trace):
        baseline = transition_trace(BASELINE_PEAK)
        candidate = transition_trace(0.2551)
        candidate.metadata.update(model='sano', width_ratio=1.0 / 12.0)
        report = compare_runs(baseline, candidate)
        assert report['width'] == '1/12'
        entry = report['transitions']['U_US']
        assert entry['shift_percent'] == pytest.approx(8.9, abs=0.1)
        assert entry['published_shift'] == 8.9
        assert entry['abs_error'] == pytest.approx(0.0151, abs=1e-3)

    def test_kirchhoff_absolute_error(self, transition_trace):
        baseline = transition_trace(BASELINE_PEAK)
        report = compare_runs(baseline, transition_trace(BASELINE_PEAK), model='kirchhoff', width_ratio=1.0 / 6.0)
        assert report['transitions']['U_US']['abs_error'] == pytest.approx(0.10, abs=1e-3)
        assert report['transitions']['U_US']['published_shift'] == 0.0

    def test_missing_transition_is_annotated(self, transition_trace, trace_factory):
        baseline = transition_trace(BASELINE_PEAK)
        flat = trace_factory([0.0, 0.1, 0.2, 0.3], [0.0, 1.0, 2.0, 3.0])
        report = compare_runs(baseline, flat, model='sano', width_ratio=1.0 / 6.0)
        entry = report['transitions']['U_US']
        assert entry['shift_percent'] is None
        assert entry['abs_error'] is None
        assert 'NoTransition in candidate' in entry['notes']

    def test_unpublished_width(self, transition_trace):
        trace = transition_trace(BASELINE_PEAK)
        report = compare_runs(trace, trace, model='sano', width_ratio=1.0 / 7.0)
        assert report['transitions']['U_US']['published_shift'] is None
        assert report['transitions']['U_US']['abs_error'] is None


class TestEfficiency:

    def test_perf_row_uses_sweep_phase(self):
        row = perf_row(fake_result())
        assert row['width'] == '1/40'
        assert row['realtime_ratio'] == pytest.approx(1.58 / 4.95)
        assert row['iterations_per_step'] == pytest.approx(1456 / 285)
        assert row['per_iteration'] == pytest.approx(1.58 / 1456)
        assert row['rejected_steps'] == 7
        assert row['total_wall_clock'] == pytest.approx(0.7 + 1.58)

    def test_perf_row_without_sweep_phase(self):
        result = fake_result()
        del result.phases['shear']
        row = perf_row(result)
        assert row['steps'] == 100
        assert row['realtime_ratio'] == pytest.approx(0.35)

    def test_bench_pairs_meshes_and_models(self):
        results = {
            ('kirchhoff', 45): fake_result('kirchhoff', 45, wall=1.0, iterations=1000),
            ('kirchhoff', 63): fake_result('kirchhoff', 63, wall=3.0, iterations=1000),
            ('sano', 45): fake_result('sano', 45, wall=1.1, iterations=1000),
        }
        configs = [r.config for r in results.values()]
        report = bench_perf(configs, runner=lambda c: results[(c.model, c.n_nodes)])
        assert len(report['rows']) == 3
        assert len(report['mesh_ratios']) == 1
        assert report['mesh_ratios'][0]['per_iteration_ratio'] == pytest.approx(3.0)
        assert report['mesh_ratios'][0]['n_nodes'] == (45, 63)
        assert len(report['model_overhead']) == 1
        assert report['model_overhead'][0]['overhead_percent'] == pytest.approx(10.0)

    def test_format_table(self):
        rows = [perf_row(fake_result()), {'model': 'sano', 'width': '1/6'}]
        lines = format_table(rows).splitlines()
        assert len(lines) == 3
        assert lines[0].split() == list(BENCH_COLUMNS)
        assert lines[1].split()[3] == '0.3192'
        assert lines[2].split()[2] == '-'

    def test_format_empty_table(self):
        assert format_table([], columns=('model', 'width')).split() == ['model', 'width']


@pytest.mark.slow
class TestMeasuredEfficiency:
    """Shear benchmark at W/L = 1/6 timed end to end"""

    def test_per_iteration_cost_is_linear_in_mesh_size(self):
        configs = [preset_config('bench', n_nodes=n, perturbation_sign=1) for n in (45, 63)]
        report = bench_perf(configs)
        assert len(report['mesh_ratios']) == 1
        assert report['mesh_ratios'][0]['per_iteration_ratio'] <= 1.3

    def test_model_overhead_per_iteration(self):
        configs = [preset_config('bench', model=m, perturbation_sign=1) for m in ('kirchhoff', 'sano', 'audoly')]
        report = bench_perf(configs)
        assert {entry['model'] for entry in report['model_overhead']} == {'sano', 'audoly'}
        for entry in report['model_overhead']:
            assert abs(entry['overhead_percent']) <= 20.0
        for row in report['rows']:
            assert row['rejected_steps'] is not None
            assert row['total_wall_clock'] >= row['wall_clock']
