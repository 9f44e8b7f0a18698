"""Ensemble, spike and entry-law specifications.

Everything here is immutable after construction. Profiles and signals are
named built-ins (plus piecewise-linear tables) so that a specification can
round-trip through a plain JSON config and be rebuilt inside worker
processes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import special

from . import quadrature
from .errors import (
    NegativeProfile,
    NonDecreasingAlphas,
    NonOrthonormalSignals,
    SpecError,
)

# Simpson with 1024 intervals integrates the built-in signals to ~1e-12;
# the table families are only piecewise smooth, hence the looser figure.
QUADRATURE_TOL = 1e-6
ORTHONORMAL_TOL = 10 * QUADRATURE_TOL
_ORTHO_INTERVALS = 1024


def unit_grid(n):
    """The sampling grid 1/n, 2/n, ..., 1."""
    return np.arange(1, n + 1, dtype=float) / n


@dataclass(frozen=True)
class VarianceProfile:
    evaluator: Callable[[np.ndarray, np.ndarray], np.ndarray]
    sup_bound: float
    name: str = "custom"
    params: dict = field(default_factory=dict)
    smooth: bool = True

    def __call__(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return np.broadcast_to(self.evaluator(x, y), np.broadcast(x, y).shape).astype(float)

    def matrix(self, x, y=None):
        """Profile evaluated on the outer product of two node sets."""
        y = x if y is None else y
        return self(np.asarray(x)[:, None], np.asarray(y)[None, :])

    def grid(self, n):
        """f(j/n, l/n) for 1 <= j, l <= n."""
        return self.matrix(unit_grid(n))

    def to_dict(self):
        return {"family": self.name, **self.params}


@dataclass(frozen=True)
class SignalFunction:
    evaluator: Callable[[np.ndarray], np.ndarray]
    sup_norm: float
    lipschitz_constant: Optional[float] = None
    name: str = "custom"
    params: dict = field(default_factory=dict)
    smooth: bool = True

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(self.evaluator(x), x.shape).astype(float)

    def to_dict(self):
        return {"family": self.name, **self.params}


# -- built-in profiles --------------------------------------------------------

def constant_profile(c=1.0):
    c = float(c)
    return VarianceProfile(lambda x, y: np.full(np.broadcast(x, y).shape, c),
                           sup_bound=abs(c), name="constant", params={"c": c})


def product_profile():
    """f(x, y) = x y."""
    return VarianceProfile(lambda x, y: x * y, sup_bound=1.0, name="product")


def affine_profile():
    """f(x, y) = (1 + x + y) / 3."""
    return VarianceProfile(lambda x, y: (1.0 + (x + y)) / 3.0, sup_bound=1.0, name="affine")


def table_profile(values):
    """Bilinear interpolation of a symmetric table on a uniform grid of [0, 1]^2."""
    from scipy.interpolate import RegularGridInterpolator

    table = np.asarray(values, dtype=float)
    if table.ndim != 2 or table.shape[0] != table.shape[1] or table.shape[0] < 2:
        raise SpecError("profile table must be a square matrix with at least 2 rows")
    nodes = np.linspace(0.0, 1.0, table.shape[0])
    interp = RegularGridInterpolator((nodes, nodes), table)

    def evaluator(x, y):
        x, y = np.broadcast_arrays(x, y)
        pts = np.stack([np.clip(x, 0, 1).ravel(), np.clip(y, 0, 1).ravel()], axis=-1)
        return interp(pts).reshape(x.shape)

    return VarianceProfile(evaluator, sup_bound=float(np.max(np.abs(table))), name="table",
                           params={"values": table.tolist()}, smooth=False)


# -- built-in signals ---------------------------------------------------------

def constant_signal(c=1.0):
    c = float(c)
    return SignalFunction(lambda x: np.full(np.shape(x), c), sup_norm=abs(c),
                          lipschitz_constant=0.0, name="constant", params={"c": c})


def cos_signal(m):
    """sqrt(2) cos(m pi x), orthonormal for distinct m >= 1 and orthogonal to constants."""
    m = int(m)
    if m < 1:
        raise SpecError("cos signal needs m >= 1")
    return SignalFunction(lambda x: math.sqrt(2.0) * np.cos(m * np.pi * x),
                          sup_norm=math.sqrt(2.0), lipschitz_constant=math.sqrt(2.0) * m * math.pi,
                          name="cos", params={"m": m})


def table_signal(x, y):
    """Piecewise-linear interpolation through (x, y) knots covering [0, 1]."""
    xs = np.asarray(x, dtype=float)
    ys = np.asarray(y, dtype=float)
    if xs.shape != ys.shape or xs.ndim != 1 or xs.size < 2:
        raise SpecError("signal table needs matching 1-D knot arrays")
    if np.any(np.diff(xs) <= 0) or xs[0] > 0 or xs[-1] < 1:
        raise SpecError("signal table knots must increase and cover [0, 1]")
    lip = float(np.max(np.abs(np.diff(ys) / np.diff(xs))))
    return SignalFunction(lambda t: np.interp(t, xs, ys), sup_norm=float(np.max(np.abs(ys))),
                          lipschitz_constant=lip, name="table",
                          params={"x": xs.tolist(), "y": ys.tolist()}, smooth=False)


_PROFILES = {
    "constant": lambda p: constant_profile(p.get("c", 1.0)),
    "product": lambda p: product_profile(),
    "affine": lambda p: affine_profile(),
    "table": lambda p: table_profile(p["values"]),
}

_SIGNALS = {
    "constant": lambda p: constant_signal(p.get("c", 1.0)),
    "cos": lambda p: cos_signal(p["m"]),
    "table": lambda p: table_signal(p["x"], p["y"]),
}


def make_profile(desc):
    desc = dict(desc)
    family = desc.pop("family", None)
    if family not in _PROFILES:
        raise SpecError(f"unknown profile family {family!r}")
    return _PROFILES[family](desc)


def make_signal(desc):
    desc = dict(desc)
    family = desc.pop("family", None)
    if family not in _SIGNALS:
        raise SpecError(f"unknown signal family {family!r}")
    return _SIGNALS[family](desc)


# -- entry laws ---------------------------------------------------------------

ENTRY_KINDS = ("gaussian", "rademacher", "uniform")


@dataclass(frozen=True)
class EntryLaw:
    """Standardized (mean 0, variance 1) law of the matrix entries."""

    kind: str = "gaussian"
    moment_constant_B: float = 1.0

    def __post_init__(self):
        if self.kind not in ENTRY_KINDS:
            raise SpecError(f"unknown entry law {self.kind!r}")
        if not self.moment_constant_B > 0:
            raise SpecError("moment constant B must be positive")

    def sample(self, rng, size):
        if self.kind == "gaussian":
            return rng.standard_normal(size)
        if self.kind == "rademacher":
            return 2.0 * rng.integers(0, 2, size=size) - 1.0
        return math.sqrt(3.0) * rng.uniform(-1.0, 1.0, size=size)

    def abs_moment(self, m):
        """E|X|^m in closed form."""
        if self.kind == "gaussian":
            return 2.0 ** (m / 2) * special.gamma((m + 1) / 2) / math.sqrt(math.pi)
        if self.kind == "rademacher":
            return 1.0
        return 3.0 ** (m / 2) / (m + 1)

    def satisfies_moment_condition(self, m_max=8):
        return all(self.abs_moment(m) <= m ** (self.moment_constant_B * m) for m in range(1, m_max + 1))

    def to_dict(self):
        return {"kind": self.kind, "B": self.moment_constant_B}


# -- spikes and ensembles -----------------------------------------------------

@dataclass(frozen=True)
class SpikeSpec:
    theta: float
    alphas: tuple
    signals: tuple

    def __post_init__(self):
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))
        object.__setattr__(self, "signals", tuple(self.signals))
        if not self.theta > 0:
            raise SpecError("theta must be positive")
        if len(self.alphas) == 0 or len(self.alphas) != len(self.signals):
            raise SpecError("need one signal per alpha and at least one spike")
        a = np.asarray(self.alphas)
        if a[-1] <= 0 or np.any(np.diff(a) >= 0):
            raise NonDecreasingAlphas(f"alphas must be strictly decreasing and positive, got {self.alphas}")

    @property
    def k(self):
        return len(self.alphas)

    def to_dict(self):
        return {"theta": self.theta, "alphas": list(self.alphas),
                "signals": [s.to_dict() for s in self.signals]}


@dataclass(frozen=True)
class EnsembleSpec:
    n: int
    profile: VarianceProfile
    law: EntryLaw
    spike: SpikeSpec
    xi: float = 8.0
    theta_max_ratio: float = 4.0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise SpecError("n must be a positive integer")
        object.__setattr__(self, "n", int(self.n))

    @property
    def k(self):
        return self.spike.k

    def to_dict(self):
        return {"n": self.n, "profile": self.profile.to_dict(), "law": self.law.to_dict(),
                "spike": self.spike.to_dict(), "xi": self.xi,
                "theta_max_ratio": self.theta_max_ratio}


def spec_from_dict(d):
    """Build an :class:`EnsembleSpec` from its config dictionary.

    ``spike.theta`` may be given directly or as ``spike.theta_factor``
    (theta = factor * n).
    """
    try:
        n = int(d["n"])
        sp = d["spike"]
        if "theta" in sp:
            theta = float(sp["theta"])
        else:
            theta = float(sp.get("theta_factor", 1.0)) * n
        spike = SpikeSpec(theta=theta, alphas=tuple(sp.get("alphas", [1.0])),
                          signals=tuple(make_signal(s) for s in sp.get("signals", [{"family": "constant"}])))
        law = d.get("law", {})
        return EnsembleSpec(n=n, profile=make_profile(d.get("profile", {"family": "constant"})),
                            law=EntryLaw(law.get("kind", "gaussian"), float(law.get("B", 1.0))),
                            spike=spike, xi=float(d.get("xi", 8.0)),
                            theta_max_ratio=float(d.get("theta_max_ratio", 4.0)))
    except (KeyError, TypeError) as exc:
        raise SpecError(f"malformed ensemble config: {exc!r}") from exc


# -- validation ---------------------------------------------------------------

def grid_inner_product(h_a, h_b, n):
    """(1/n) sum_l h_a(l/n) h_b(l/n), i.e. e_a'e_b for the discretized spikes."""
    if n < 1:
        raise ValueError("n must be >= 1")
    x = unit_grid(n)
    return float(np.dot(h_a(x), h_b(x)) / n)


def l2_inner_product(h_a, h_b, n_intervals=_ORTHO_INTERVALS):
    return quadrature.integrate(lambda x: h_a(x) * h_b(x), n_intervals)


@dataclass(frozen=True)
class ValidationReport:
    checks: dict
    warnings: tuple = ()

    @property
    def a1_lower_waived(self):
        return self.checks.get("A1_lower") == "waived"

    @property
    def ok(self):
        return all(status != "violated" for status in self.checks.values())

    def to_dict(self):
        return {"checks": dict(self.checks), "warnings": list(self.warnings), "ok": self.ok}


def validate_spec(spec: EnsembleSpec, n_check=257) -> ValidationReport:
    """Check the growth, orthonormality and regularity assumptions.

    Raises for hard failures (signals not orthonormal, negative profile);
    everything else is reported with status ``satisfied``, ``violated`` or
    ``waived``. The lower growth bound on theta involves a power of log N
    far beyond desk-scale sizes, so it is waived rather than enforced and the
    report carries a warning if theta drops below sqrt(N).
    """
    checks = {}
    warnings = []
    n, k = spec.n, spec.k
    theta = spec.spike.theta
    signals = spec.spike.signals

    checks["size"] = "satisfied" if n >= 2 * k else "violated"

    checks["A1_upper"] = "satisfied" if theta <= spec.theta_max_ratio * n else "violated"
    lower = math.sqrt(n) * math.log(n) ** spec.xi if n > 1 else 0.0
    if theta >= lower:
        checks["A1_lower"] = "satisfied"
    else:
        checks["A1_lower"] = "waived"
        if theta < math.sqrt(n):
            warnings.append(f"theta={theta:g} below sqrt(N)={math.sqrt(n):g}; outliers may not separate")

    for i in range(k):
        for j in range(i, k):
            ip = l2_inner_product(signals[i], signals[j])
            target = 1.0 if i == j else 0.0
            if abs(ip - target) > ORTHONORMAL_TOL:
                raise NonOrthonormalSignals(
                    f"<h_{i + 1}, h_{j + 1}> = {ip:.6g}, expected {target:g}")
    checks["A2_orthonormal"] = "satisfied"

    x = np.linspace(0.0, 1.0, n_check)
    bounded = all(np.all(np.abs(s(x)) <= s.sup_norm * (1 + 1e-12)) for s in signals)
    checks["A2_bounded"] = "satisfied" if bounded else "violated"

    lip_status = "satisfied"
    for s in signals:
        if s.lipschitz_constant is None:
            lip_status = "waived"
            continue
        vals = s(x)
        slope = np.abs(np.diff(vals)) / np.diff(x)
        if np.any(slope > s.lipschitz_constant * (1 + 1e-9) + 1e-12):
            lip_status = "violated"
            break
    checks["A3_lipschitz"] = lip_status

    F = spec.profile.matrix(x)
    if np.any(F < 0):
        raise NegativeProfile(f"profile {spec.profile.name!r} takes negative values")
    checks["profile_symmetric"] = "satisfied" if np.allclose(F, F.T, rtol=0, atol=1e-14) else "violated"
    checks["profile_bounded"] = "satisfied" if np.all(F <= spec.profile.sup_bound * (1 + 1e-12)) else "violated"

    checks["moment_condition"] = "satisfied" if spec.law.satisfies_moment_condition() else "violated"

    return ValidationReport(checks=checks, warnings=tuple(warnings))
