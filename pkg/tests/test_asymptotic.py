import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import CLAMP, CORPUS, HALF, SLOPE2, profiles
from snu.asymptotic import (
    DEFAULT_EPS,
    counting_function,
    default_alpha_grid,
    estimate_profile,
    membership_report,
)
from snu.profile import Profile
from snu.treeseq import TreeSequence, random_sequence, spike_sequence, staircase_sequence


def count_oracle(x, alpha, eps, j):
    return sum(1 for k in range(1 << j) if x[j, k] != 0 and abs(x[j, k]) >= 2.0 ** (-(alpha + eps) * j))


def test_counting_zero():
    z = TreeSequence.zeros(5)
    assert all(counting_function(z, a, e, j) == 0 for a in (-1, 0, 2) for e in (0, 0.1) for j in range(6))


def test_counting_examples():
    assert counting_function(staircase_sequence(CLAMP, 10, 0.5), 0.5, 0.0, 8) == 16
    assert counting_function(spike_sequence(8, 5, 1.0), 1.0, 0.1, 5) == 1


def test_counting_rejects_bad_scale():
    with pytest.raises(ValueError):
        counting_function(TreeSequence.zeros(3), 0.0, 0.0, 4)


def test_counting_matches_loop_oracle():
    rng = np.random.default_rng(1)
    for i in range(20):
        x = random_sequence(CORPUS[sorted(CORPUS)[i % len(CORPUS)]], 7, seed=i)
        for _ in range(10):
            a, e, j = float(rng.uniform(-1, 2)), float(rng.uniform(0, 0.3)), int(rng.integers(0, 8))
            assert counting_function(x, a, e, j) == count_oracle(x, a, e, j)


@given(st.integers(0, 2**32), st.floats(-1, 2), st.floats(0, 0.5), st.floats(0, 0.5), st.integers(1, 8))
@settings(max_examples=100, deadline=None)
def test_counting_monotone(seed, alpha, d_alpha, eps, j):
    x = random_sequence(HALF, 8, seed)
    c = counting_function(x, alpha, eps, j)
    assert counting_function(x, alpha + d_alpha, eps, j) >= c
    assert counting_function(x, alpha, eps + d_alpha, j) >= c


def test_estimate_zero_is_neg_inf():
    est = estimate_profile(TreeSequence.zeros(8))
    assert np.all(est.values == -math.inf)


def test_estimate_staircase_value():
    est = estimate_profile(staircase_sequence(CLAMP, 16, 0.5), [0.5], DEFAULT_EPS, (8, 16))
    assert 0.45 <= est.limit_values[0] <= 0.55
    assert est.j_window == (8, 16)


@pytest.mark.parametrize("name", ["clamp", "half", "concave4", "jump", "lifted"])
@pytest.mark.parametrize("offset", [0.1, 0.37])
def test_estimate_converges_on_staircases(name, offset):
    nu = CORPUS[name]
    a0 = nu.alpha_min + offset
    J, lo = 16, 8
    est = estimate_profile(staircase_sequence(nu, J, a0), [a0], (0.01,), (lo, J))
    assert abs(est.limit_values[0] - nu(a0)) <= 2 / lo + 0.01


def test_estimate_is_nondecreasing_in_alpha():
    for i, name in enumerate(sorted(CORPUS)):
        x = random_sequence(CORPUS[name], 12, seed=i)
        est = estimate_profile(x, default_alpha_grid(CORPUS[name]))
        for row in est.values:
            assert np.all(row[1:] >= row[:-1])


def test_estimate_errors():
    x = TreeSequence.zeros(6)
    with pytest.raises(ValueError):
        estimate_profile(x, [], DEFAULT_EPS)
    with pytest.raises(ValueError):
        estimate_profile(x, [0.0], ())
    with pytest.raises(ValueError):
        estimate_profile(x, [0.0], DEFAULT_EPS, (0, 6))
    with pytest.raises(ValueError):
        estimate_profile(x, [0.0], DEFAULT_EPS, (2, 7))


def test_estimate_csv(tmp_path):
    est = estimate_profile(staircase_sequence(CLAMP, 10, 0.5), [0.0, 0.5], (0.1, 0.01))
    est.to_csv(tmp_path / "e.csv")
    rows = list(csv.DictReader(open(tmp_path / "e.csv")))
    assert len(rows) == 4
    assert [r["limit"] for r in rows] == ["0", "0", "1", "1"]
    assert float(rows[3]["nu_hat"]) == est.limit_values[1]


def test_estimate_is_deterministic():
    x = random_sequence(CLAMP, 12, 3)
    a, b = estimate_profile(x), estimate_profile(x)
    assert np.array_equal(a.values, b.values)


@pytest.mark.parametrize("name", sorted(CORPUS))
def test_generated_sequences_pass_membership(name):
    nu = CORPUS[name]
    assert membership_report(random_sequence(nu, 16, seed=0), nu, 0.1).passed
    a0 = nu.alpha_min + 0.25
    assert membership_report(staircase_sequence(nu, 16, a0), nu, 0.1).passed


def test_membership_fails_with_witness():
    # coefficients of size 2^{-0.2 j} are far too large for a profile starting at 1
    rep = membership_report(staircase_sequence(CLAMP, 12, 0.2), SLOPE2, 0.1, alpha_grid=[0.0, 0.2, 0.6, 1.2])
    assert not rep.passed
    (v0, v1, v2, v3) = rep.verdicts
    assert v0.passed and v3.passed
    assert not v1.passed and v1.alpha == 0.2 and v1.nu == -math.inf
    assert v1.scale is not None and v1.count >= 1 and v1.nu_hat >= 0


def test_membership_zero_sequence():
    for nu in CORPUS.values():
        assert membership_report(TreeSequence.zeros(10), nu).passed


def test_membership_rejects_bad_tol():
    with pytest.raises(ValueError):
        membership_report(TreeSequence.zeros(4), CLAMP, 0.0)


@given(profiles(), st.integers(0, 2**16), st.floats(0, 1))
@settings(max_examples=30, deadline=None)
def test_membership_is_monotone_in_profile(nu, seed, shift):
    x = random_sequence(nu, 12, seed)
    grid = default_alpha_grid(nu)
    top = Profile([(nu.alpha_min - shift, 1.0, 0.0)])
    assert np.all(top(grid) >= nu(grid))
    if membership_report(x, nu, 0.1, grid).passed:
        assert membership_report(x, top, 0.1, grid).passed
