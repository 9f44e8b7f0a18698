"""Martingale decomposition of e'W^2 e and its conditional variance.

With h_p = h(p/N) the quadratic form splits exactly as

    e'W^2 e = (2/N) M + (2/N) A + (1/N) B

where M collects the triples with distinct p < r and q outside {p, r}, A
the triples touching a diagonal entry and B the squared entries. M is a
sum of martingale differences indexed by r.

All sums are evaluated in O(N^2) through
    S[r, q] = sum_{p < r, p != q} W[p, q] h_p,
which is a shifted cumulative sum down the columns of W diag(h).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import unit_grid

IDENTITY_TOL = 1e-9


@dataclass(frozen=True)
class MartingaleDecomposition:
    t_n: float
    m_n: float
    a_n: float
    b_n: float
    increments: np.ndarray
    v_n: float = float("nan")

    def identity_residual(self):
        n = self.increments.size
        return abs(self.t_n - 2.0 * self.m_n / n - 2.0 * self.a_n / n - self.b_n / n)

    def identity_holds(self, tol=IDENTITY_TOL):
        return self.identity_residual() <= tol * (1.0 + abs(self.t_n))


def _signal_values(h, n):
    if callable(h):
        return np.asarray(h(unit_grid(n)), dtype=float) * np.ones(n)
    h = np.asarray(h, dtype=float)
    if h.shape != (n,):
        raise ValueError(f"signal values must have length {n}")
    return h


def _partial_sums(w, hv):
    """S[r, q] = sum_{p < r, p != q} W[p, q] h_p."""
    n = w.shape[0]
    weighted = w * hv[:, None]
    c = np.zeros_like(weighted)
    np.cumsum(weighted[:-1], axis=0, out=c[1:])
    diag = np.diag(weighted)
    # drop p == q, which only contributes when q < r
    c -= np.tril(np.ones((n, n)), -1) * diag[None, :]
    return c


def decompose(w, h, profile=None, block=None) -> MartingaleDecomposition:
    """Split e'W^2 e for e = h(./N)/sqrt(N) into its M, A and B parts.

    ``h`` is a signal function or its values on the grid. When ``profile``
    is given the normalized conditional variance is filled in as well.
    """
    n = w.shape[0]
    hv = _signal_values(h, n)
    s = _partial_sums(w, hv)
    d = np.diag(w)
    inc = hv * (np.einsum("rq,rq->r", w, s) - d * np.diag(s))
    m_n = float(inc.sum())
    wh = w @ hv
    a_n = float(np.dot(d * hv, wh - d * hv))
    b_n = float(np.dot(hv * hv, np.einsum("pq,pq->p", w, w)))
    t_n = float(np.dot(wh, wh)) / n
    v_n = float("nan")
    if profile is not None:
        v_n = _conditional_variance(s, hv, profile.grid(n), block)
    return MartingaleDecomposition(t_n=t_n, m_n=m_n, a_n=a_n, b_n=b_n, increments=inc, v_n=v_n)


def deterministic_block(h, profile, n):
    """b_r = sum_{p<r} h_p^2 sum_{q>r} f(p,q) f(q,r), the W-free part of V_N.

    Costs one N x N matrix product, so Monte Carlo runs compute it once.
    """
    hv = _signal_values(h, n)
    F = profile.grid(n)
    T = F @ np.tril(F, -1)
    return ((hv * hv)[:, None] * np.triu(T, 1)).sum(axis=0)


def _conditional_variance(s, hv, F, block):
    n = hv.size
    if block is None:
        T = F @ np.tril(F, -1)
        block = ((hv * hv)[:, None] * np.triu(T, 1)).sum(axis=0)
    # F[q, r] S[r, q]^2 summed over q < r
    random_part = np.sum(np.tril(F.T * s * s, -1), axis=1)
    return float(np.dot(hv * hv, random_part + block)) / n ** 3


def conditional_variance(w, h, profile, block=None):
    """V_N = N^-3 sum_r E[(M_r - M_{r-1})^2 | F_{r-1}].

    Entries with both indices below r are known at step r; the sum over
    q > r uses the profile in place of the unseen entries.
    """
    n = w.shape[0]
    hv = _signal_values(h, n)
    return _conditional_variance(_partial_sums(w, hv), hv, profile.grid(n), block)


def clt_statistic(w, vecs, i, expected):
    """(e_i'W^2 e_i - expected) / sqrt(N)."""
    n = w.shape[0]
    we = w @ vecs[:, i]
    return (float(np.dot(we, we)) - expected) / math.sqrt(n)
