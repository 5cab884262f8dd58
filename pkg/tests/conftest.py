# this_file: tests/conftest.py
"""Shared fixtures for the collision_reflex test suite."""

import sys
from pathlib import Path

import pytest

from collision_reflex.reflex import CollisionParams1D, ForceThreshold, PositionErrorThreshold

FIXTURE_DIR = Path(__file__).parent / "fixtures"


@pytest.fixture
def default_params():
    """Desk-scale collision used throughout: total impulse 0.19799 N·s."""
    return CollisionParams1D(
        m_f=0.1, m_r=1.0, k_m=1000.0, k_s=100.0,
        sensing=ForceThreshold(3.0), v_0=0.5, F_a=10.0,
    )


@pytest.fixture
def position_params():
    return CollisionParams1D(
        m_f=0.1, m_r=1.0, k_m=1000.0, k_s=100.0,
        sensing=PositionErrorThreshold(0.03), v_0=0.5, F_a=10.0,
    )


@pytest.fixture
def soft_finger_params():
    """Soft-finger collision against a stiff force sensor (k_m = 2e7 N/m)."""
    return CollisionParams1D(
        m_f=0.1, m_r=1.0, k_m=2e7, k_s=440.0,
        sensing=ForceThreshold(3.0), v_0=0.1, F_a=10.0,
    )


@pytest.fixture
def fixture_dir():
    return FIXTURE_DIR


@pytest.fixture
def cli_command():
    return [sys.executable, "-m", "collision_reflex"]

