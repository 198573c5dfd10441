"""Shared fixtures for the ribbon engine tests"""

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))

from src.energy_models import CrossSection, MaterialParams
from src.kinematics import StateVector, initialize_frames, rest_configuration
from src.scenarios import Trace, TraceRecord

# Unit-scale material and section keep energies O(1) in derivative checks
UNIT_MATERIAL = MaterialParams(youngs_modulus=1.0, poisson_ratio=0.5)
UNIT_SECTION = CrossSection(0.5, 0.1, 0.5)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def unit_material():
    return UNIT_MATERIAL


@pytest.fixture
def unit_section():
    return UNIT_SECTION


def straight_rod(n_nodes, length=1.0, thetas=None):
    positions = np.zeros((n_nodes, 3))
    positions[:, 0] = np.linspace(0.0, length, n_nodes)
    thetas = np.zeros(n_nodes - 1) if thetas is None else np.asarray(thetas, dtype=float)
    frames = initialize_frames(positions, thetas, d1_hint=(0.0, 1.0, 0.0))
    return StateVector.from_positions(positions, thetas), rest_configuration(positions), frames


def planar_arc(n_nodes, bend=1.2, length=1.0):
    """Circular arc in the x-z plane, width direction along y"""
    angle = bend * (np.linspace(0.0, 1.0, n_nodes) - 0.5)
    radius = length / bend
    positions = np.column_stack([radius * np.sin(angle), np.zeros(n_nodes), radius * np.cos(angle)])
    thetas = np.zeros(n_nodes - 1)
    frames = initialize_frames(positions, thetas, d1_hint=(0.0, 1.0, 0.0))
    return StateVector.from_positions(positions, thetas), positions, frames


@pytest.fixture
def straight():
    return straight_rod


@pytest.fixture
def arc():
    return planar_arc


def make_trace(controls, forces, heights=None, control_name='shear'):
    heights = np.zeros(len(controls)) if heights is None else heights
    records = [TraceRecord(float(c), float(h), abs(float(h)), float(f), 0.0, i)
               for i, (c, f, h) in enumerate(zip(controls, forces, heights))]
    return Trace(control_name, records)


def two_transition_trace(peak, period=0.4, n=5001, span=0.5, noise=0.0, seed=0):
    """Shear force with a maximum at ``peak`` and a minimum half a period later"""
    x = np.linspace(0.0, span, n)
    force = np.cos(2.0 * np.pi * (x - peak) / period)
    if noise:
        force = force + noise * np.random.default_rng(seed).normal(size=n)
    return make_trace(x, force)


@pytest.fixture
def trace_factory():
    return make_trace


@pytest.fixture
def transition_trace():
    return two_transition_trace
