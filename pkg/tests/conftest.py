"""Shared fixtures: reference chains and the optimized dual-port field.

The boundary-field optimization is deterministic but not free, so it is
computed once per session and shared between the measurement tests and the
acceptance suite.
"""

import pytest

import spinlab as sl


@pytest.fixture(scope="session")
def p1_half():
    return sl.ChainSpec(N=7, protocol="P1", spin="1/2", Delta=10.0)


@pytest.fixture(scope="session")
def p2_half():
    return sl.ChainSpec(N=7, protocol="P2", spin="1/2", Delta=10.0)


@pytest.fixture(scope="session")
def p1_half_peak(p1_half):
    """Refined clean peak of the staggered protocol at s = 1/2."""
    return sl.clean_peak(p1_half)


@pytest.fixture(scope="session")
def optimized_field_half(p2_half):
    """(B*, PeakRecord) of the dual-port protocol at s = 1/2, Delta/delta = 10."""
    cfg = sl.SweepConfig(base=p2_half, axis="boundary_field", grid=(0.0, 6.0))
    return sl.optimize_boundary_field(cfg, (0.0, 6.0))
