"""Eigenvector fluctuation field: step embedding, pairings and H^{-d} norms."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import quadrature


@dataclass(frozen=True)
class DirichletBasis:
    """phi_j(x) = sqrt(2) sin(j pi x), lambda_j = (j pi)^2, for j = 1..max_mode."""

    max_mode: int = 32

    def __post_init__(self):
        if self.max_mode < 1:
            raise ValueError("max_mode must be >= 1")

    @property
    def modes(self):
        return np.arange(1, self.max_mode + 1)

    @property
    def eigenvalues(self):
        return (self.modes * np.pi) ** 2

    def function(self, j):
        if not 1 <= j <= self.max_mode:
            raise ValueError(f"mode {j} outside 1..{self.max_mode}")
        return lambda x: math.sqrt(2.0) * np.sin(j * np.pi * np.asarray(x, dtype=float))

    def evaluate(self, x):
        """Array of shape (len(x), max_mode)."""
        x = np.asarray(x, dtype=float)
        return math.sqrt(2.0) * np.sin(np.pi * np.outer(x, self.modes))

    def discretized(self, n):
        """Cell integrals of every mode, shape (n, max_mode).

        Uses the closed-form antiderivative, which agrees with the per-cell
        Simpson rule of :func:`discretize_test_function` to its accuracy.
        """
        edges = np.arange(n + 1) / n
        j = self.modes
        anti = -math.sqrt(2.0) * np.cos(np.pi * np.outer(edges, j)) / (np.pi * j)
        return np.diff(anti, axis=0)


@dataclass(frozen=True)
class StepFunction:
    """Piecewise constant on the cells ((l-1)/n, l/n]."""

    values: np.ndarray

    @property
    def n(self):
        return self.values.size

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        idx = np.clip(np.ceil(t * self.n).astype(int) - 1, 0, self.n - 1)
        return self.values[idx]

    def l2_norm_sq(self):
        return float(np.sum(self.values ** 2)) / self.n


def embed_step(v, n):
    """Step function equal to sqrt(n) v(l) on ((l-1)/n, l/n]."""
    v = np.asarray(v, dtype=float)
    if v.shape != (n,):
        raise ValueError(f"vector must have length {n}")
    return StepFunction(values=math.sqrt(n) * v)


def discretize_test_function(g, n, subpoints=8):
    """Cell integrals g_bar(j) over ((j-1)/n, j/n], by Simpson's rule per cell."""
    if subpoints < 2 or subpoints % 2:
        raise ValueError("subpoints must be even and >= 2")
    x, w = quadrature.simpson_rule(subpoints)
    left = np.arange(n)[:, None] / n
    pts = left + x[None, :] / n
    vals = np.broadcast_to(np.asarray(g(pts), dtype=float), pts.shape)
    return vals @ w / n


def pairing(v, center, g_disc, theta, n):
    """theta sqrt(n) g_disc'(v - center)."""
    v, center, g_disc = (np.asarray(a, dtype=float) for a in (v, center, g_disc))
    if not v.shape == center.shape == g_disc.shape[:1]:
        raise ValueError("v, center and g_disc must have matching lengths")
    return theta * math.sqrt(n) * (g_disc.T @ (v - center))


@dataclass(frozen=True)
class FieldSample:
    pairings: np.ndarray
    theta: float
    n: int


def hneg_norm(pairings, d):
    """sum_j a_j^2 lambda_j^{-d} with lambda_j = (j pi)^2."""
    if not d > 0:
        raise ValueError("d must be positive")
    a = np.asarray(pairings, dtype=float)
    lam = (np.arange(1, a.size + 1) * np.pi) ** 2
    return float(np.sum(a * a * lam ** (-d)))


def weighted_partial_sums(second_moments, d):
    """Cumulative sums of E<V, phi_j>^2 lambda_j^{-d} over j."""
    m = np.asarray(second_moments, dtype=float)
    lam = (np.arange(1, m.size + 1) * np.pi) ** 2
    return np.cumsum(m * lam ** (-d))


def tail_ratio(second_moments, d, tail_fraction=0.5):
    """Share of the weighted sum carried by the top ``tail_fraction`` of modes.

    The default compares the partial sums at J/2 and J.
    """
    s = weighted_partial_sums(second_moments, d)
    cut = int(round(s.size * (1.0 - tail_fraction)))
    return float((s[-1] - s[cut - 1]) / s[-1]) if cut >= 1 else 1.0
