"""Acceptance criteria 1-10.

Each test runs one check from ``spikelab.verify`` (tolerances are pinned there
as module constants and re-asserted below), prints one PASS/FAIL line and
asserts that it passed.  The full-resolution growing-domain runs take over an
hour and only execute with SPIKELAB_FULL=1.
"""

import os

import pytest

from spikelab import verify


def _assert(check):
    if check.status == verify.SKIP:
        pytest.skip(check.line())
    assert check.passed, check.line()


def test_pinned_tolerances():
    assert verify.CHI_TOL == 1e-6
    assert verify.SHOOT_TOL == 1e-3
    assert verify.SMALL_REL == 0.15
    assert verify.DIMPLE_MIN == 0.99
    assert verify.EVENT_REL == 0.03
    assert verify.FOLD_REL == 0.05
    assert verify.FS_TOL == 1e-12


def test_criterion_1_schnakenberg_fold(record_check):
    _assert(record_check(verify.criterion_1()))


def test_criterion_2_brusselator_fold(record_check):
    _assert(record_check(verify.criterion_2()))


def test_criterion_3_critical_a(record_check):
    _assert(record_check(verify.criterion_3()))


def test_criterion_4_critical_f(record_check):
    _assert(record_check(verify.criterion_4()))


def test_criterion_5_thresholds(record_check):
    _assert(record_check(verify.criterion_5()))


def test_criterion_6_continuation_folds(record_check):
    _assert(record_check(verify.criterion_6()))


def test_criterion_7_growing_domain_fast(record_check):
    _assert(record_check(verify.criterion_7_fast()))


@pytest.mark.skipif(os.environ.get("SPIKELAB_FULL") != "1", reason="set SPIKELAB_FULL=1 (about 70 min)")
def test_criterion_7_growing_domain_full(record_check):
    _assert(record_check(verify.criterion_7_full()))


def test_criterion_8_no_instability(record_check):
    _assert(record_check(verify.criterion_8()))


def test_criterion_9_internal_consistency(record_check):
    _assert(record_check(verify.criterion_9()))


def test_criterion_10_independent_oracles(record_check):
    _assert(record_check(verify.criterion_10()))
