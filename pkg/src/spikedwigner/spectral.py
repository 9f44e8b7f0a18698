"""Outlier eigenpairs, the resolvent matrix K and delocalization metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg as sla

from .errors import EigenSolverFailure, OutlierSeparationError, SolveFailure

_TIE_TOL = 1e-12


@dataclass(frozen=True)
class OutlierSet:
    eigenvalues: np.ndarray       # descending, shape (k,)
    eigenvectors: np.ndarray      # unit columns, shape (n, k)
    alignments: Optional[np.ndarray]  # (j, i) entry is e_j' v_i
    sign_fixed: bool


@dataclass(frozen=True)
class ResolventK:
    mu: float
    matrix: np.ndarray
    valid: bool


def _fix_signs(vectors, spikes):
    v = vectors.copy()
    for i in range(v.shape[1]):
        ref = float(spikes[:, i] @ v[:, i]) if spikes is not None and i < spikes.shape[1] else 0.0
        if abs(ref) < _TIE_TOL:
            nz = np.flatnonzero(np.abs(v[:, i]) > _TIE_TOL)
            ref = v[nz[0], i] if nz.size else 1.0
        if ref < 0:
            v[:, i] = -v[:, i]
    return v


def top_eigenpairs(a, k, spikes=None, check_residual=True):
    """Top-k eigenpairs of a dense symmetric matrix, largest first.

    Signs are fixed so that e_i' v_i >= 0 when ``spikes`` (columns e_i) is
    given; near-ties, and the no-spike case, fall back to making the first
    non-negligible coordinate positive.
    """
    n = a.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k={k} must lie in [1, {n}]")
    try:
        vals, vecs = sla.eigh(a, subset_by_index=[n - k, n - 1], check_finite=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigenSolverFailure(f"symmetric eigensolve failed: {exc}") from exc
    vals = vals[::-1].copy()
    vecs = vecs[:, ::-1]
    vecs = _fix_signs(vecs, spikes)
    if check_residual:
        scale = np.abs(vals) + np.linalg.norm(a) / math.sqrt(n)
        resid = np.linalg.norm(a @ vecs - vecs * vals, axis=0)
        if np.any(resid > 1e-8 * scale):
            raise EigenSolverFailure(f"eigenpair residual {resid.max():.3g} exceeds tolerance")
    align = None if spikes is None else spikes.T @ vecs
    return OutlierSet(eigenvalues=vals, eigenvectors=vecs, alignments=align, sign_fixed=True)


def alignment_matrix(vecs, outliers: OutlierSet):
    """Entry (j, i) is e_j' v_i."""
    if vecs.shape[0] != outliers.eigenvectors.shape[0]:
        raise ValueError("spike vectors and eigenvectors differ in length")
    return vecs.T @ outliers.eigenvectors


def _cholesky_ok(m):
    try:
        return sla.cho_factor(m, lower=False, check_finite=False)
    except np.linalg.LinAlgError:
        return None


def resolvent_k_matrix(w, mu, spike, vecs) -> ResolventK:
    """K(j, l) = theta sqrt(alpha_j alpha_l) e_j' (I - W/mu)^{-1} e_l.

    Cholesky factorizations of mu I - W and mu I + W certify ||W|| < mu;
    if either fails the matrix is zero and ``valid`` is False.
    """
    if not mu > 0:
        raise ValueError("mu must be positive")
    n = w.shape[0]
    k = spike.k
    eye = np.eye(n)
    fac = _cholesky_ok(mu * eye - w)
    if fac is None or _cholesky_ok(mu * eye + w) is None:
        return ResolventK(mu=float(mu), matrix=np.zeros((k, k)), valid=False)
    x = sla.cho_solve(fac, mu * vecs, check_finite=False)
    if not np.all(np.isfinite(x)):
        raise SolveFailure("resolvent solve produced non-finite values")
    s = np.sqrt(np.asarray(spike.alphas))
    K = spike.theta * np.outer(s, s) * (vecs.T @ x)
    return ResolventK(mu=float(mu), matrix=K, valid=True)


def resolvent_oracle_error(rk: ResolventK):
    """min |lambda(K) - mu| / mu over the spectrum of K."""
    sym = 0.5 * (rk.matrix + rk.matrix.T)
    eig = np.linalg.eigvalsh(sym)
    return float(np.min(np.abs(eig - rk.mu)) / abs(rk.mu))


def delocalization_metric(v, e):
    """max_l |v(l) - e(l)|."""
    v = np.asarray(v, dtype=float)
    e = np.asarray(e, dtype=float)
    if v.shape != e.shape:
        raise ValueError("vectors must have equal length")
    return float(np.max(np.abs(v - e)))


def check_separation(spike, n, factor=10.0):
    """Reject spikes whose outliers cannot be matched by rank order."""
    a = np.asarray(spike.alphas)
    gaps = spike.theta * (a[:-1] - a[1:])
    if gaps.size and np.any(gaps <= factor * math.sqrt(n)):
        raise OutlierSeparationError(
            f"theta*(alpha_i - alpha_i+1) = {gaps.min():.4g} not above {factor:g}*sqrt(N) = {factor * math.sqrt(n):.4g}")
