"""Sampling of W, spike vectors, the perturbed matrix A and quadratic forms."""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch
from .model import EnsembleSpec, SpikeSpec, unit_grid

_DUMP_MAGIC = b"SWMAT001"


def replicate_seed(master_seed, index):
    """64-bit seed for replicate ``index``, hashed from the master seed.

    Independent of how replicates are scheduled across workers.
    """
    ss = np.random.SeedSequence([int(master_seed) & 0xFFFFFFFFFFFFFFFF, int(index)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def is_exactly_symmetric(m):
    return m.ndim == 2 and m.shape[0] == m.shape[1] and np.array_equal(m, m.T)


def _from_upper(values, n):
    m = np.zeros((n, n))
    m[np.triu_indices(n)] = values
    lower = np.tril_indices(n, -1)
    m[lower] = m.T[lower]
    return m


def sample_wigner(spec: EnsembleSpec, seed: int) -> np.ndarray:
    """Draw W with Var W(j, l) = f(j/N, l/N), diagonal included.

    Standardized entries are drawn in row-major order over the upper
    triangle and the lower triangle is a copy, so W is bit-exactly
    symmetric and a pure function of ``(spec, seed)``.
    """
    n = spec.n
    rng = np.random.default_rng(seed)
    iu = np.triu_indices(n)
    z = spec.law.sample(rng, iu[0].size)
    x = unit_grid(n)
    scale = np.sqrt(spec.profile(x[iu[0]], x[iu[1]]))
    return _from_upper(z * scale, n)


def build_spike_vectors(spike: SpikeSpec, n: int) -> np.ndarray:
    """Columns e_i(l) = h_i(l/n) / sqrt(n); shape (n, k)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    x = unit_grid(n)
    return np.column_stack([h(x) for h in spike.signals]) / math.sqrt(n)


def perturbation(spike: SpikeSpec, vecs: np.ndarray) -> np.ndarray:
    """sum_i alpha_i e_i e_i', symmetrized from its upper triangle."""
    p = (vecs * np.asarray(spike.alphas)) @ vecs.T
    return np.triu(p) + np.triu(p, 1).T


def assemble_perturbed(w: np.ndarray, spike: SpikeSpec, vecs: np.ndarray) -> np.ndarray:
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise DimensionMismatch(f"W must be square, got {w.shape}")
    if vecs.shape != (w.shape[0], spike.k):
        raise DimensionMismatch(f"spike vectors have shape {vecs.shape}, expected {(w.shape[0], spike.k)}")
    return w + spike.theta * perturbation(spike, vecs)


def truncation_level(n):
    """L = floor(log n), the series truncation used throughout."""
    return int(math.floor(math.log(n))) if n > 1 else 0


def quadratic_form(u, w, n_power, v, extended=False):
    """u' W^n v by repeated matrix-vector products.

    Powers are limited to floor(log N), or three times that with
    ``extended=True``.
    """
    n = w.shape[0]
    limit = truncation_level(n) * (3 if extended else 1)
    if n_power < 0 or n_power > max(limit, 0):
        raise ValueError(f"n_power={n_power} outside [0, {limit}] for N={n}")
    x = np.asarray(v, dtype=float)
    for _ in range(n_power):
        x = w @ x
    return float(np.dot(u, x))


def expected_w2_form(e_a, e_b, profile, n):
    """E[e_a' W^2 e_b]; E[W^2] is diagonal with row sums of the profile."""
    e_a = np.asarray(e_a, dtype=float)
    e_b = np.asarray(e_b, dtype=float)
    if e_a.shape != (n,) or e_b.shape != (n,):
        raise DimensionMismatch("vectors must have length n")
    rowsums = profile.grid(n).sum(axis=1)
    return float(np.sum(e_a * e_b * rowsums))


@dataclass(frozen=True)
class Realization:
    seed: int
    w: np.ndarray
    a: np.ndarray
    spikes: np.ndarray
    _forms: dict = field(default_factory=dict, repr=False, compare=False)

    def form(self, i, j, power):
        """Cached e_i' W^power e_j (0-based spike indices)."""
        key = (i, j, power)
        if key not in self._forms:
            self._forms[key] = quadratic_form(self.spikes[:, i], self.w, power,
                                              self.spikes[:, j], extended=True)
        return self._forms[key]


def realize(spec: EnsembleSpec, seed: int, vecs=None) -> Realization:
    w = sample_wigner(spec, seed)
    vecs = build_spike_vectors(spec.spike, spec.n) if vecs is None else vecs
    return Realization(seed=seed, w=w, a=assemble_perturbed(w, spec.spike, vecs), spikes=vecs)


def dump_matrix(path, m, seed):
    """Write the upper triangle of a symmetric matrix, row-major float64."""
    n = m.shape[0]
    with open(path, "wb") as fh:
        fh.write(_DUMP_MAGIC)
        fh.write(struct.pack("<qQ", n, int(seed) & 0xFFFFFFFFFFFFFFFF))
        fh.write(np.ascontiguousarray(m[np.triu_indices(n)], dtype="<f8").tobytes())


def load_matrix(path):
    with open(path, "rb") as fh:
        if fh.read(len(_DUMP_MAGIC)) != _DUMP_MAGIC:
            raise ValueError(f"{path}: not a matrix dump")
        n, seed = struct.unpack("<qQ", fh.read(16))
        values = np.frombuffer(fh.read(), dtype="<f8")
    if values.size != n * (n + 1) // 2:
        raise ValueError(f"{path}: truncated matrix dump")
    return _from_upper(values.astype(float), n), seed
