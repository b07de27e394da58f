"""Acceptance gate: the nine primary criteria at their stated sizes and tolerances.

Each test runs one verification battery, records a one-line verdict (shown
in the terminal summary and on stdout), and fails on any failing check.
"""

import time

import pytest

from vlgreedy import verification as vf
from vlgreedy.exponent_field import step_exponent

VERDICTS: dict[int, str] = {}

SIZES = vf.powers_of_two(1, 8)
EPSILONS = (0.25, 0.5)
SEED = 0


@pytest.fixture(scope="module")
def step12():
    return step_exponent(2, 4, J=12)


def verdict(number: int, title: str, log: vf.CheckLog, extra: str = "") -> None:
    ok = log.ok
    parts = [f"{c.check}={c.measured:.6g}{'' if c.passed else ' (FAIL)'}" for c in log.checks]
    line = f"criterion {number} [{'PASS' if ok else 'FAIL'}] {title}: " + ", ".join(parts) + extra
    VERDICTS[number] = line
    print(line)
    assert ok, f"failing checks: {log.failures()}"


def test_criterion_1_constant_exponent_exactness():
    log = vf.CheckLog()
    start = time.perf_counter()
    vf.constant_exactness(log, q=2.0, n=1, J=10, Ns=vf.powers_of_two(0, 8), families_per_N=500, greedy_instances=100, seed=SEED)
    elapsed = time.perf_counter() - start
    log.le("runtime-seconds", elapsed, 30.0)
    verdict(1, "constant exponent exactness", log)


def test_criterion_2_scaling_law(step12):
    log = vf.CheckLog()
    start = time.perf_counter()
    rec = vf.scaling_law(log, step12, SIZES, seed=SEED, slope_tol=0.05, min_r2=0.98)
    log.le("runtime-seconds", time.perf_counter() - start, 300.0)
    verdict(2, "democracy scaling law", log, f" (slope_r={rec.slope_r:.4f}, slope_l={rec.slope_l:.4f})")


def test_criterion_3_gamma2_upper_bound(step12):
    log = vf.CheckLog()
    vf.gamma_bounds(log, step12, EPSILONS, SIZES)
    check = log.get("gamma2-upper-ratio")
    log.checks = [check]
    log.le("gamma2-violations", check.detail["violations"], 0)
    log.ge("gamma2-families", check.detail["families"], 1)
    verdict(3, "explicit upper bound on the high-exponent family", log)


def test_criterion_4_gamma1_lower_bound(step12):
    log = vf.CheckLog()
    vf.gamma_bounds(log, step12, EPSILONS, SIZES)
    check = log.get("gamma1-lower-ratio")
    log.checks = [check]
    log.le("gamma1-violations", check.detail["violations"], 0)
    log.ge("gamma1-families", check.detail["families"], 1)
    verdict(4, "computable lower bound on the low-exponent family", log)


def test_criterion_5_two_sided_sandwich(step12):
    log = vf.CheckLog()
    vf.sandwich(log, step12, SIZES, families_per_N=200, seed=SEED, slope_tol=0.03)
    verdict(5, "two-sided sandwich constants trend-free", log)


def test_criterion_6_lebesgue_inequality():
    log = vf.CheckLog()
    p = step_exponent(2, 4, J=7)
    vf.lebesgue(log, p, functions=20, Ns=vf.powers_of_two(0, 6), seed=SEED, slope_margin=0.05)
    verdict(6, "Lebesgue-type inequality", log)


def test_criterion_7_lemma_suite():
    log = vf.CheckLog()
    vf.lemma_suite(log, vf.default_recipes(1), n=1, J=10, pairs=1000, seed=SEED, min_decay=0.05)
    verdict(7, "embedding, maximal, Hölder and decay lemmas", log)


def test_criterion_8_linearization(step12):
    log = vf.CheckLog()
    vf.linearization(log, step12, families=1000, Ns=vf.powers_of_two(1, 6), seed=SEED)
    verdict(8, "linearization identities", log)


def test_criterion_9_wavelet_layer():
    log = vf.CheckLog()
    vf.wavelet_layer(log, n=1, J=8, functions=100, seed=SEED, ratio_bounds=(1 / 20, 20))
    verdict(9, "Haar layer and square-function equivalence", log)
