import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spikedwigner import martingale
from spikedwigner.ensemble import replicate_seed, sample_wigner
from spikedwigner.model import affine_profile, constant_profile, constant_signal, cos_signal

from conftest import make_spec, random_symmetric


def brute_force(w, h):
    n = w.shape[0]
    m = a = b = 0.0
    for r in range(n):
        for p in range(r):
            for q in range(n):
                if q != p and q != r:
                    m += w[p, q] * w[q, r] * h[p] * h[r]
    for p in range(n):
        for r in range(n):
            if r != p:
                a += w[p, p] * w[p, r] * h[p] * h[r]
        for q in range(n):
            b += w[p, q] ** 2 * h[p] ** 2
    return m, a, b


def brute_vn(w, h, F):
    n = w.shape[0]
    total = 0.0
    for r in range(n):
        s = 0.0
        for q in range(r):
            sq = sum(w[p, q] * h[p] for p in range(r) if p != q)
            s += F[q, r] * sq ** 2
        for q in range(r + 1, n):
            s += sum(h[p] ** 2 * F[p, q] for p in range(r)) * F[q, r]
        total += h[r] ** 2 * s
    return total / n ** 3


def test_zero_matrix():
    d = martingale.decompose(np.zeros((5, 5)), constant_signal())
    assert d.t_n == d.m_n == d.a_n == d.b_n == 0.0


def test_handcrafted_n3():
    w = np.array([[1.0, 2.0, 3.0], [2.0, 4.0, 5.0], [3.0, 5.0, 6.0]])
    h = np.array([1.0, -2.0, 0.5])
    d = martingale.decompose(w, h)
    assert (d.m_n, d.a_n, d.b_n) == pytest.approx(brute_force(w, h), abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_brute_force_n6(seed):
    w = random_symmetric(6, seed)
    h = np.random.default_rng(seed + 1).standard_normal(6)
    d = martingale.decompose(w, h, affine_profile())
    m, a, b = brute_force(w, h)
    assert abs(d.m_n - m) <= 1e-12 * (1 + abs(m))
    assert abs(d.a_n - a) <= 1e-12 * (1 + abs(a))
    assert abs(d.b_n - b) <= 1e-12 * (1 + abs(b))
    assert d.increments.sum() == pytest.approx(d.m_n, abs=1e-12 * (1 + abs(m)))
    assert d.v_n == pytest.approx(brute_vn(w, h, affine_profile().grid(6)), rel=1e-12)
    assert d.identity_holds()


@pytest.mark.parametrize("n", [128, 512])
def test_identity_on_samples(n):
    spec = make_spec(n=n)
    for r in range(5):
        w = sample_wigner(spec, replicate_seed(n, r))
        d = martingale.decompose(w, cos_signal(1))
        assert d.identity_holds(1e-9)
        we = w @ (cos_signal(1)(np.arange(1, n + 1) / n) / math.sqrt(n))
        assert d.t_n == pytest.approx(we @ we, rel=1e-12)


def test_vn_zero_matrix_limit():
    vals = []
    for n in (50, 200, 800):
        vals.append(martingale.conditional_variance(np.zeros((n, n)), constant_signal(), constant_profile()))
        exact = sum((r - 1) * (n - r) for r in range(1, n + 1)) / n ** 3
        assert vals[-1] == pytest.approx(exact, rel=1e-12)
    assert abs(vals[-1] - 1 / 6) < abs(vals[0] - 1 / 6)
    assert vals[-1] == pytest.approx(1 / 6, abs=2e-3)


def test_vn_zero_profile():
    w = random_symmetric(10)
    assert martingale.conditional_variance(w, constant_signal(), constant_profile(0.0)) == 0.0


def test_block_matches_inline():
    n = 40
    w = random_symmetric(n, 5)
    prof = affine_profile()
    block = martingale.deterministic_block(cos_signal(2), prof, n)
    assert martingale.conditional_variance(w, cos_signal(2), prof, block) == pytest.approx(
        martingale.conditional_variance(w, cos_signal(2), prof), rel=1e-13)


def test_clt_statistic_zero_matrix():
    vecs = np.ones((16, 1)) / 4
    assert martingale.clt_statistic(np.zeros((16, 16)), vecs, 0, 16.0) == pytest.approx(-4.0)


def test_negligible_parts_scaling():
    ratios = {}
    for n in (128, 256, 512):
        spec = make_spec(n=n)
        a_vals, b_vals = [], []
        for r in range(80):
            d = martingale.decompose(sample_wigner(spec, replicate_seed(77 + n, r)), constant_signal())
            a_vals.append(d.a_n)
            b_vals.append(d.b_n)
        ratios[n] = (np.var(a_vals, ddof=1) / n ** 2, np.var(b_vals, ddof=1) / n ** 2)
    for idx in (0, 1):
        vals = [ratios[n][idx] for n in ratios]
        assert max(vals) / min(vals) <= 4.0
