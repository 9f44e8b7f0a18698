"""Quadrature values of the limiting variances and covariances.

Every predictor is a tensor-product quadrature on [0, 1]^2 or [0, 1]^3.
Because each integrand factorizes into one-dimensional weights against the
profile, an integral like  int int int a(x) f(x,y) f(y,z) b(z)  is computed
as  (a w)' F diag(w) F (b w)  with F the profile on the nodes.

Signal indices are 0-based here.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from . import quadrature
from .ensemble import expected_w2_form
from .errors import IdenticalIndices

REFINEMENT_TOL = 1e-4


@dataclass(frozen=True)
class QuadratureGrid:
    points_per_axis: int = 256
    points_3d: int = 128
    rule: str = "simpson"

    def nodes(self, dim=2):
        return quadrature.rule(self.rule, self.points_per_axis if dim == 2 else self.points_3d)

    def refined(self):
        return replace(self, points_per_axis=2 * self.points_per_axis, points_3d=2 * self.points_3d)

    def to_dict(self):
        return {"points_per_axis": self.points_per_axis, "points_3d": self.points_3d, "rule": self.rule}


def grid_for(profile, signals, grid=None):
    """Default grid; midpoint when any ingredient is only piecewise smooth."""
    if grid is not None:
        return grid
    smooth = profile.smooth and all(s.smooth for s in signals)
    return QuadratureGrid(rule="simpson" if smooth else "midpoint")


class _Nodes:
    """Profile and weights on one quadrature grid."""

    def __init__(self, profile, grid, dim):
        self.x, self.w = grid.nodes(dim)
        self.F = profile.matrix(self.x)

    def double(self, a, b):
        """int int a(x) b(y) f(x, y) dx dy for node values a, b."""
        return float((a * self.w) @ self.F @ (b * self.w))

    def single(self, a):
        return float(np.dot(a, self.w))

    def chain(self, a, b):
        """int int int a(x) f(x, y) f(y, z) b(z)."""
        return float(((a * self.w) @ self.F) @ (self.w * (self.F @ (b * self.w))))


def cov_eigenvalues(i, j, profile, signals, grid=None):
    """Limit Cov(G_i, G_j) = 2 int int h_i h_j (x) h_i h_j (y) f(x, y)."""
    nd = _Nodes(profile, grid_for(profile, signals, grid), 2)
    u = signals[i](nd.x) * signals[j](nd.x)
    return 2.0 * nd.double(u, u)


def _hffh(i, profile, signals, grid):
    nd = _Nodes(profile, grid_for(profile, signals, grid), 3)
    h2 = signals[i](nd.x) ** 2
    return nd.chain(h2, h2)


def var_alignment(i, profile, signals, grid=None):
    """sigma_i^2 = 1/2 int h_i^2(x) f(x,y) f(y,z) h_i^2(z)."""
    return 0.5 * _hffh(i, profile, signals, grid)


def var_martingale(i, profile, signals, grid=None):
    """sigma_2^2 = 2 int h_i^2(x) f(x,y) f(y,z) h_i^2(z)."""
    return 2.0 * _hffh(i, profile, signals, grid)


def _orthogonal_integral(i, j, profile, signals, grid):
    nd = _Nodes(profile, grid_for(profile, signals, grid), 2)
    hi, hj = signals[i](nd.x), signals[j](nd.x)
    # int int [h_j(x) h_i(y) + h_i(x) h_j(y)]^2 f, expanded into separable pieces
    return 2.0 * nd.double(hj * hj, hi * hi) + 2.0 * nd.double(hi * hj, hi * hj)


def var_orthogonal(i, j, alphas, profile, signals, grid=None):
    """Two candidate limits for the variance of theta (e_j'v_i - E e_j'v_i).

    Returns ``(statement, proof_end)``. The first uses the prefactor
    1/((a_i - a_j)^2 a_j); the second uses (a_i - a_j)^2 / (a_i^4 a_j),
    which follows from e_j'W e_i / (mu_0 Y_jj sqrt(a_j)) with
    mu_0 -> theta a_i and Y_jj -> a_i / (a_i - a_j).
    """
    if i == j:
        raise IdenticalIndices("var_orthogonal needs i != j")
    ai, aj = alphas[i], alphas[j]
    integral = _orthogonal_integral(i, j, profile, signals, grid)
    return integral / ((ai - aj) ** 2 * aj), integral * (ai - aj) ** 2 / (ai ** 4 * aj)


def var_linear_form(i, j, profile, signals, grid=None):
    """Limit of Var(e_j' W e_i) counting each off-diagonal entry once.

    Equals half the integral appearing in :func:`var_orthogonal`; used as a
    diagnostic next to the two candidate variants.
    """
    return 0.5 * _orthogonal_integral(i, j, profile, signals, grid)


def b_matrix(i_target, spike, vecs, profile, n):
    """Deterministic k x k matrix whose i-th eigenvalue approximates E lambda_i(A).

    B(j, l) = sqrt(a_j a_l) theta e_j'e_l + sqrt(a_j a_l) E(e_j' W^2 e_l) / (theta a_i^2),
    with a_i the strength of the target outlier, so there is one B per
    target index. Returns ``(B, lambda_i(B))``.
    """
    theta = spike.theta
    if theta <= n ** (2.0 / 3.0):
        warnings.warn(f"theta={theta:g} does not dominate N^(2/3)={n ** (2 / 3):.4g}", RuntimeWarning)
    a = np.asarray(spike.alphas)
    k = a.size
    s = np.sqrt(a)
    gram = vecs.T @ vecs
    ew2 = np.array([[expected_w2_form(vecs[:, j], vecs[:, l], profile, n) for l in range(k)]
                    for j in range(k)])
    B = np.outer(s, s) * (theta * gram + ew2 / (theta * a[i_target] ** 2))
    eig = np.sort(np.linalg.eigvalsh(B))[::-1]
    return B, float(eig[i_target])


def field_covariance(g_p: Callable, g_q: Callable, i, alphas, profile, signals, grid=None):
    """Limit covariance of the eigenvector field paired with g_p and g_q.

    Terms are summed in a fixed order: the five target-only terms, then
    the single sums over l != i, then the double sum over l1, l2 != i.
    """
    nd = _Nodes(profile, grid_for(profile, signals, grid), 2)
    x = nd.x
    H = [h(x) for h in signals]
    gp, gq = np.asarray(g_p(x), dtype=float), np.asarray(g_q(x), dtype=float)
    gp = np.broadcast_to(gp, x.shape)
    gq = np.broadcast_to(gq, x.shape)
    hi = H[i]
    ai = alphas[i]
    D, I = nd.double, nd.single
    hi2 = hi * hi
    Ip_i, Iq_i = I(gp * hi), I(gq * hi)

    total = 2 * ai ** 2 * Ip_i * Iq_i * D(hi2, hi2)
    total += ai ** 2 * D(gp * gq, hi2)
    total += ai ** 2 * D(gp * hi, gq * hi)
    total -= 2 * ai ** 2 * Iq_i * D(hi * gp, hi2)
    total -= 2 * ai ** 2 * Ip_i * D(hi * gq, hi2)

    others = [l for l in range(len(signals)) if l != i]
    for l in others:
        hl = H[l]
        c = ai ** 2 * math.sqrt(alphas[l]) / (ai - alphas[l])
        Iq_l, Ip_l = I(gq * hl), I(gp * hl)
        total += c * Iq_l * (D(gp * hl, hi2) + D(gp * hi, hi * hl))
        total -= 2 * c * Iq_l * Ip_i * D(hl * hi, hi2)
        total += c * Ip_l * (D(gq * hl, hi2) + D(gq * hi, hi * hl))
        total -= 2 * c * Ip_l * Iq_i * D(hl * hi, hi2)
    for l1 in others:
        for l2 in others:
            c = ai ** 2 * math.sqrt(alphas[l1] * alphas[l2]) / ((ai - alphas[l1]) * (ai - alphas[l2]))
            total += c * I(gp * H[l1]) * I(gq * H[l2]) * (
                D(H[l1] * H[l2], hi2) + D(H[l1] * hi, hi * H[l2]))
    return float(total)


def homogeneous_variance(g: Callable, n_intervals=1024, rule="simpson"):
    """Homogeneous single-spike field variance, int g^2 - (int g)^2."""
    x, w = quadrature.rule(rule, n_intervals)
    gx = np.broadcast_to(np.asarray(g(x), dtype=float), x.shape)
    return float(np.dot(w, gx * gx) - np.dot(w, gx) ** 2)


def dirichlet_mode(j):
    """phi_j(x) = sqrt(2) sin(j pi x)."""
    return lambda x: math.sqrt(2.0) * np.sin(j * np.pi * np.asarray(x, dtype=float))


@dataclass
class TheoryPredictions:
    cov_eigen: np.ndarray
    var_align: np.ndarray
    tau_sq_statement: np.ndarray
    tau_sq_proof_end: np.ndarray
    sigma2_martingale: np.ndarray
    b_eigenvalue: np.ndarray
    field_cov: Callable = field(repr=False)
    linear_form_var: np.ndarray = None
    vn_limit: np.ndarray = None
    refinement: dict = field(default_factory=dict)

    def flagged(self, tol=REFINEMENT_TOL):
        return {name: d for name, d in self.refinement.items() if d >= tol}

    def to_dict(self):
        out = {
            "cov_eigen": self.cov_eigen.tolist(),
            "var_align": self.var_align.tolist(),
            "tau_sq_statement": self.tau_sq_statement.tolist(),
            "tau_sq_proof_end": self.tau_sq_proof_end.tolist(),
            "tau_sq_linear_form": self.linear_form_var.tolist(),
            "sigma2_martingale": self.sigma2_martingale.tolist(),
            "vn_limit": self.vn_limit.tolist(),
            "b_eigenvalue": self.b_eigenvalue.tolist(),
        }
        out["refinement_delta"] = dict(self.refinement)
        return out


def _core(spec, vecs, grid):
    sp = spec.spike
    k = sp.k
    prof, sig, al = spec.profile, sp.signals, sp.alphas
    cov = np.array([[cov_eigenvalues(i, j, prof, sig, grid) for j in range(k)] for i in range(k)])
    va = np.array([var_alignment(i, prof, sig, grid) for i in range(k)])
    vm = np.array([var_martingale(i, prof, sig, grid) for i in range(k)])
    ts = np.zeros((k, k))
    tp = np.zeros((k, k))
    lf = np.zeros((k, k))
    for i in range(k):
        for j in range(k):
            if i != j:
                ts[i, j], tp[i, j] = var_orthogonal(i, j, al, prof, sig, grid)
                lf[i, j] = var_linear_form(i, j, prof, sig, grid) / (al[i] - al[j]) ** 2
    return {"cov_eigen": cov, "var_align": va, "sigma2_martingale": vm,
            "tau_sq_statement": ts, "tau_sq_proof_end": tp, "tau_sq_linear_form": lf}


def _rel_delta(a, b):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    denom = np.maximum(np.abs(b), 1e-10)
    return float(np.max(np.abs(a - b) / denom)) if a.size else 0.0


def predict(spec, grid=None, test_functions: Sequence[Callable] = (), check_refinement=True):
    """All predictors for an ensemble, with quadrature-refinement deltas."""
    from .ensemble import build_spike_vectors

    sp = spec.spike
    grid = grid_for(spec.profile, sp.signals, grid)
    vecs = build_spike_vectors(sp, spec.n)
    core = _core(spec, vecs, grid)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        beig = np.array([b_matrix(i, sp, vecs, spec.profile, spec.n)[1] for i in range(sp.k)])
    refinement = {}
    if check_refinement:
        fine = _core(spec, vecs, grid.refined())
        refinement = {name: _rel_delta(core[name], fine[name]) for name in core}
        for idx, g in enumerate(test_functions):
            for i in range(sp.k):
                c0 = field_covariance(g, g, i, sp.alphas, spec.profile, sp.signals, grid)
                c1 = field_covariance(g, g, i, sp.alphas, spec.profile, sp.signals, grid.refined())
                refinement[f"field_cov[g{idx},{i}]"] = _rel_delta(c0, c1)

    def field_cov(g_p, g_q, i):
        return field_covariance(g_p, g_q, i, sp.alphas, spec.profile, sp.signals, grid)

    return TheoryPredictions(
        cov_eigen=core["cov_eigen"], var_align=core["var_align"],
        tau_sq_statement=core["tau_sq_statement"], tau_sq_proof_end=core["tau_sq_proof_end"],
        sigma2_martingale=core["sigma2_martingale"], b_eigenvalue=beig, field_cov=field_cov,
        linear_form_var=core["tau_sq_linear_form"], vn_limit=core["var_align"].copy(),
        refinement=refinement)
