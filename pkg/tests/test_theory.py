import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spikedwigner import theory
from spikedwigner.ensemble import build_spike_vectors
from spikedwigner.errors import IdenticalIndices
from spikedwigner.model import (SpikeSpec, affine_profile, constant_profile, constant_signal,
                                cos_signal, product_profile)

from conftest import make_spec

ONE = constant_signal()
C1 = cos_signal(1)
C2 = cos_signal(2)
FLAT = constant_profile()


def phi(j):
    return theory.dirichlet_mode(j)


def test_cov_eigen_examples():
    assert theory.cov_eigenvalues(0, 0, FLAT, [ONE]) == pytest.approx(2.0, abs=1e-12)
    assert theory.cov_eigenvalues(0, 1, FLAT, [ONE, C1]) == pytest.approx(0.0, abs=1e-12)
    assert theory.cov_eigenvalues(0, 0, product_profile(), [ONE]) == pytest.approx(0.5, abs=1e-12)


def test_cov_eigen_symmetric_psd():
    sig = [ONE, C1, C2]
    prof = affine_profile()
    C = np.array([[theory.cov_eigenvalues(i, j, prof, sig) for j in range(3)] for i in range(3)])
    assert np.allclose(C, C.T, atol=1e-14)
    assert np.linalg.eigvalsh(C).min() >= -1e-8
    # additive profiles leave h=1 and cos(pi x) uncorrelated since int cos(pi x) = 0
    assert abs(C[0, 1]) <= 1e-14


def test_product_profile_couples_modes():
    # f(x, y) = x y separates: 2 (int x h1 h2)^2
    expected = 2 * (math.sqrt(2) * -2 / math.pi ** 2) ** 2
    assert theory.cov_eigenvalues(0, 1, product_profile(), [ONE, C1]) == pytest.approx(expected, rel=1e-9)


def test_alignment_and_martingale_examples():
    assert theory.var_alignment(0, FLAT, [ONE]) == pytest.approx(0.5, abs=1e-12)
    assert theory.var_alignment(0, constant_profile(0.0), [ONE]) == 0.0
    assert theory.var_alignment(0, product_profile(), [ONE]) == pytest.approx(1 / 24, abs=1e-10)
    assert theory.var_martingale(0, FLAT, [ONE]) == pytest.approx(2.0, abs=1e-12)
    assert theory.var_martingale(0, product_profile(), [ONE]) == pytest.approx(1 / 6, abs=1e-10)


@pytest.mark.parametrize("prof", [FLAT, product_profile(), affine_profile()])
def test_alignment_is_quarter_of_martingale(prof):
    for sig in ([ONE], [C1], [C2]):
        a = theory.var_alignment(0, prof, sig)
        m = theory.var_martingale(0, prof, sig)
        assert abs(a - m / 4) <= 1e-10 * max(1.0, m)


def test_diagonal_consistency():
    # cov_eigen(i, i) equals 2 int int h^2(x) f h^2(y)
    prof = affine_profile()
    nd_x, w = theory.QuadratureGrid().nodes()
    h2 = C1(nd_x) ** 2
    direct = 2 * (h2 * w) @ prof.matrix(nd_x) @ (h2 * w)
    assert theory.cov_eigenvalues(0, 0, prof, [C1]) == pytest.approx(direct, rel=1e-12)


def test_orthogonal_examples():
    st, pe = theory.var_orthogonal(0, 1, (2.0, 1.0), FLAT, [ONE, C1])
    assert st == pytest.approx(2.0, abs=1e-10)
    assert pe == pytest.approx(2.0 * 1.0 / (16 * 1.0), abs=1e-10)
    assert theory.var_orthogonal(0, 1, (2.0, 1.0), constant_profile(0.0), [ONE, C1]) == (0.0, 0.0)
    with pytest.raises(IdenticalIndices):
        theory.var_orthogonal(1, 1, (2.0, 1.0), FLAT, [ONE, C1])
    assert theory.var_linear_form(0, 1, FLAT, [ONE, C1]) == pytest.approx(1.0, abs=1e-10)


def test_b_matrix_examples():
    n = 200
    sp = SpikeSpec(theta=float(n), alphas=(1.0,), signals=(ONE,))
    vecs = build_spike_vectors(sp, n)
    B, lam = theory.b_matrix(0, sp, vecs, FLAT, n)
    assert lam == pytest.approx(n + 1.0, rel=1e-12)
    assert np.array_equal(B, theory.b_matrix(0, sp, vecs, FLAT, n)[0])


def test_b_matrix_large_theta_limit():
    n = 100
    sp = SpikeSpec(theta=1e9, alphas=(2.0, 1.0), signals=(ONE, C1))
    vecs = build_spike_vectors(sp, n)
    B, _ = theory.b_matrix(0, sp, vecs, FLAT, n)
    s = np.sqrt(sp.alphas)
    assert np.allclose(B / sp.theta, np.outer(s, s) * (vecs.T @ vecs), atol=1e-8)


def test_b_matrix_warns_small_theta():
    n = 1000
    sp = SpikeSpec(theta=50.0, alphas=(1.0,), signals=(ONE,))
    with pytest.warns(RuntimeWarning):
        theory.b_matrix(0, sp, build_spike_vectors(sp, n), FLAT, n)


def test_field_covariance_homogeneous_examples():
    g = lambda x: x ** 2 - 0.3 * x
    val = theory.field_covariance(g, g, 0, (1.0,), FLAT, [ONE])
    assert val == pytest.approx(theory.homogeneous_variance(g), abs=1e-6)
    expected = 1 - 8 / math.pi ** 2
    assert theory.field_covariance(phi(1), phi(1), 0, (1.0,), FLAT, [ONE]) == pytest.approx(expected, abs=1e-9)
    assert theory.field_covariance(lambda x: 0 * x, phi(1), 0, (1.0,), FLAT, [ONE]) == 0.0


@settings(max_examples=15, deadline=None)
@given(a=st.floats(-3, 3), b=st.floats(-3, 3), j=st.integers(1, 5), m=st.integers(1, 5))
def test_field_covariance_bilinear_symmetric(a, b, j, m):
    args = (0, (2.0, 1.0), affine_profile(), [ONE, C1])
    gp, gq, gr = phi(j), phi(m), lambda x: x * (1 - x)
    lin = lambda x: a * gp(x) + b * gr(x)
    lhs = theory.field_covariance(lin, gq, *args)
    rhs = a * theory.field_covariance(gp, gq, *args) + b * theory.field_covariance(gr, gq, *args)
    assert lhs == pytest.approx(rhs, rel=1e-8, abs=1e-12)
    assert theory.field_covariance(gp, gq, *args) == pytest.approx(
        theory.field_covariance(gq, gp, *args), rel=1e-12, abs=1e-14)


def test_refinement_deltas_small():
    pred = theory.predict(make_spec(n=300, alphas=(2.0, 1.0), profile=affine_profile()),
                          test_functions=[phi(1), phi(3)])
    assert pred.refinement
    assert max(pred.refinement.values()) < 1e-4
    assert pred.flagged() == {}


def test_midpoint_used_for_tables():
    from spikedwigner.model import table_profile
    prof = table_profile([[1.0, 0.5], [0.5, 1.0]])
    assert theory.grid_for(prof, [ONE]).rule == "midpoint"
    assert theory.grid_for(FLAT, [ONE]).rule == "simpson"


def test_predict_to_dict_keys(spec_k2):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        d = theory.predict(spec_k2, check_refinement=False).to_dict()
    for key in ("cov_eigen", "var_align", "tau_sq_statement", "tau_sq_proof_end",
                "sigma2_martingale", "b_eigenvalue"):
        assert key in d
