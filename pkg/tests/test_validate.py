"""Self-validation suite and its negative control."""

import time

import pytest

import spinlab as sl
from spinlab.validate import CHECK_NAMES


def test_validation_all_pass_and_fast():
    t0 = time.monotonic()
    results = sl.run_validation()
    elapsed = time.monotonic() - t0
    assert [r.name for r in results] == list(CHECK_NAMES)
    failures = [(r.name, r.detail, r.measured) for r in results if not r.passed]
    assert not failures, failures
    assert all(r.measured < r.bound for r in results)
    assert elapsed < 30.0


def test_validation_fault_negative_control():
    results = sl.run_validation(inject_fault="dissipator-sign")
    by_name = {r.name: r for r in results}
    assert not by_name["dephasing_decay"].passed
    # checks with gamma = 0 dynamics or no dynamics at all stay green
    for name in (
        "rabi_transfer",
        "werner_negativity",
        "sector_vs_full",
        "trace_preservation",
        "lindblad_vs_unitary",
    ):
        assert by_name[name].passed, name
    # the fault context must not leak
    assert all(r.passed for r in sl.run_validation())


def test_validation_unknown_fault():
    with pytest.raises(ValueError):
        sl.run_validation(inject_fault="bogus")
