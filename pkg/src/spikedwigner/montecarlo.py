"""Replication engine and statistical verdicts.

A run draws R independent realizations, records a fixed set of scalar
columns per replicate, and summarizes each enabled statistic against the
quadrature predictions of :mod:`spikedwigner.theory`.

Replicate r always uses ``replicate_seed(master_seed, r)`` and BLAS is
pinned to one thread, so each replicate's columns are bit-identical no
matter how replicates are split across worker processes. Summaries are
computed from the columns in replicate order.
"""

from __future__ import annotations

import json
import math
import multiprocessing as mp
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import stats
from threadpoolctl import threadpool_limits

from . import martingale, spectral, theory
from .ensemble import build_spike_vectors, expected_w2_form, replicate_seed, sample_wigner
from .errors import ConfigError, DegenerateSamples, EigenSolverFailure, SpikedWignerError
from .field import DirichletBasis, tail_ratio
from .model import EnsembleSpec, spec_from_dict, validate_spec

STATISTICS = ("eigenvalue_clt", "alignment_clt", "ortho_clt", "martingale_clt", "field_clt",
              "delocalization", "mean_expansion", "resolvent_oracle")
CLT_STATISTICS = ("eigenvalue_clt", "alignment_clt", "ortho_clt", "martingale_clt", "field_clt")
MIN_CLT_REPLICATES = 100

DEFAULT_THRESHOLDS = {
    "ks_min_p": 1e-3,
    "eigen_var_rel": 0.08,
    "eigen_cov_se": 4.0,
    "first_order_band": 0.02,
    "first_order_frac": 0.99,
    "mean_sigma_factor": 4.0,
    "mean_slack": 0.5,
    "align_var_rel": 0.12,
    "align_bound_factor": 5.0,
    "align_bound_frac": 0.95,
    "ortho_var_rel": 0.15,
    "mart_var_rel": 0.10,
    "identity_tol": 1e-9,
    "vn_rel": 0.06,
    "field_var_rel": 0.15,
    "field_checked_modes": 1,
    "tight_theory_factor": 4.0,
    "tight_spread_factor": 25.0,
    "hneg_d": 0.75,
    "hneg_tail_max": 0.05,
    "deloc_factor": 1.0,
    "deloc_frac": 0.95,
    "resolvent_tol": 1e-7,
    "k_structure_tol": 0.2,
    "k_structure_frac": 0.95,
}


@dataclass(frozen=True)
class ExperimentConfig:
    ensemble: EnsembleSpec
    replicates: int
    master_seed: int = 0
    statistics: tuple = ()
    grid: Optional[theory.QuadratureGrid] = None
    thresholds: dict = field(default_factory=dict)
    field_modes: int = 32
    field_target: int = 0
    workers: Optional[int] = None
    raw: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "statistics", tuple(self.statistics))
        unknown = set(self.statistics) - set(STATISTICS)
        if unknown:
            raise ConfigError(f"unknown statistics {sorted(unknown)}")
        unknown = set(self.thresholds) - set(DEFAULT_THRESHOLDS)
        if unknown:
            raise ConfigError(f"unknown thresholds {sorted(unknown)}")
        if self.replicates < 1:
            raise ConfigError("replicates must be >= 1")
        if self.replicates < MIN_CLT_REPLICATES and set(self.statistics) & set(CLT_STATISTICS):
            raise ConfigError(f"CLT statistics need at least {MIN_CLT_REPLICATES} replicates")
        if not 0 <= self.field_target < self.ensemble.k:
            raise ConfigError("field target index out of range")
        if self.workers is not None and self.workers < 1:
            raise ConfigError("workers must be >= 1")

    def threshold(self, name):
        return self.thresholds.get(name, DEFAULT_THRESHOLDS[name])

    def resolved(self):
        """Every setting with defaults filled in, as written to the manifest."""
        return {
            "ensemble": self.ensemble.to_dict(),
            "replicates": self.replicates,
            "master_seed": self.master_seed,
            "statistics": list(self.statistics),
            "grid": None if self.grid is None else self.grid.to_dict(),
            "thresholds": {k: self.threshold(k) for k in DEFAULT_THRESHOLDS},
            "field": {"modes": self.field_modes, "target": self.field_target},
            "workers": self.workers,
        }


def config_from_dict(d) -> ExperimentConfig:
    try:
        ens = spec_from_dict(d["ensemble"])
        g = d.get("grid")
        grid = None if g is None else theory.QuadratureGrid(
            int(g.get("points_per_axis", 256)), int(g.get("points_3d", 128)), g.get("rule", "simpson"))
        fld = d.get("field", {})
        return ExperimentConfig(
            ensemble=ens, replicates=int(d["replicates"]), master_seed=int(d.get("master_seed", 0)),
            statistics=tuple(d.get("statistics", ())), grid=grid,
            thresholds=dict(d.get("thresholds", {})), field_modes=int(fld.get("modes", 32)),
            field_target=int(fld.get("target", 0)),
            workers=None if d.get("workers") is None else int(d["workers"]), raw=d)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, SpikedWignerError):
            raise
        raise ConfigError(f"malformed experiment config: {exc!r}") from exc


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            d = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return config_from_dict(d)


# -- statistical helpers ------------------------------------------------------

def ks_gaussian(samples, sigma):
    """KS statistic and asymptotic p-value against N(0, sigma^2)."""
    x = np.asarray(samples, dtype=float)
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    if x.size < 2 or np.ptp(x) == 0:
        raise DegenerateSamples("samples have zero variance")
    res = stats.kstest(x, stats.norm(scale=sigma).cdf, method="asymp")
    return float(res.statistic), float(res.pvalue)


def variance_z(samples, theory_var):
    """(sample variance - theory) / (theory * sqrt(2 / (R - 1)))."""
    if not theory_var > 0:
        raise ValueError("theory variance must be positive")
    x = np.asarray(samples, dtype=float)
    r = x.size
    return float((np.var(x, ddof=1) - theory_var) / (theory_var * math.sqrt(2.0 / (r - 1))))


def _variance_check(samples, theory_var, rel_tol, ks_min_p):
    x = np.asarray(samples, dtype=float)
    centered = x - x.mean()
    var = float(np.var(x, ddof=1))
    out = {"mean": float(x.mean()), "variance": var, "theory": float(theory_var),
           "ratio": var / theory_var if theory_var > 0 else float("nan")}
    if theory_var > 0:
        out["z"] = variance_z(x, theory_var)
        out["ks_stat"], out["ks_p"] = ks_gaussian(centered, math.sqrt(theory_var))
        out["pass"] = bool(abs(out["ratio"] - 1.0) <= rel_tol and out["ks_p"] > ks_min_p)
    else:
        out.update(z=float("nan"), ks_stat=float("nan"), ks_p=float("nan"), **{"pass": False})
    return out


# -- per-replicate work -------------------------------------------------------

class _Context:
    """Everything a replicate needs that does not depend on the seed."""

    def __init__(self, cfg: ExperimentConfig):
        spec = cfg.ensemble
        self.cfg = cfg
        self.spec = spec
        self.n = spec.n
        self.k = spec.k
        self.theta = spec.spike.theta
        self.alphas = np.asarray(spec.spike.alphas)
        self.vecs = build_spike_vectors(spec.spike, spec.n)
        self.pert = self.theta * (self.vecs * self.alphas) @ self.vecs.T
        self.pert = np.triu(self.pert) + np.triu(self.pert, 1).T
        self.expected_w2 = np.array([expected_w2_form(self.vecs[:, i], self.vecs[:, i], spec.profile, spec.n)
                                     for i in range(self.k)])
        self.stats = set(cfg.statistics)
        self.hvals = self.vecs * math.sqrt(self.n)
        self.blocks = None
        if "martingale_clt" in self.stats:
            self.blocks = [martingale.deterministic_block(self.hvals[:, i], spec.profile, spec.n)
                           for i in range(self.k)]
        self.gdisc = None
        if "field_clt" in self.stats:
            self.gdisc = DirichletBasis(cfg.field_modes).discretized(spec.n)

    def columns(self):
        k = self.k
        cols = [f"lambda_{i}" for i in range(k)]
        cols += [f"align_{j}_{i}" for i in range(k) for j in range(k)]
        cols += [f"q{p}_{i}" for i in range(k) for p in (1, 2, 3)]
        cols += [f"deloc_{i}" for i in range(k)]
        if "martingale_clt" in self.stats:
            for i in range(k):
                cols += [f"mart_{name}_{i}" for name in ("m", "a", "b", "resid", "vn")]
        if "resolvent_oracle" in self.stats:
            cols += [f"kerr_{i}" for i in range(k)] + [f"kvalid_{i}" for i in range(k)] + ["kstruct"]
        if self.gdisc is not None:
            cols += [f"field_{j}" for j in range(1, self.cfg.field_modes + 1)]
        return cols

    def replicate(self, index):
        seed = replicate_seed(self.cfg.master_seed, index)
        w = sample_wigner(self.spec, seed)
        a = w + self.pert
        try:
            out = spectral.top_eigenpairs(a, self.k, spikes=self.vecs)
        except EigenSolverFailure as exc:
            raise EigenSolverFailure(str(exc), seed=seed) from exc
        v = out.eigenvectors
        row = list(out.eigenvalues)
        # entry (j, i) is e_j'v_i, flattened with j fastest
        row += list((self.vecs.T @ v).T.ravel())
        for i in range(self.k):
            e = self.vecs[:, i]
            we = w @ e
            w2e = w @ we
            row += [float(e @ we), float(we @ we), float(we @ w2e)]
        row += [spectral.delocalization_metric(v[:, i], self.vecs[:, i]) for i in range(self.k)]
        if "martingale_clt" in self.stats:
            for i in range(self.k):
                d = martingale.decompose(w, self.hvals[:, i], self.spec.profile, self.blocks[i])
                row += [d.m_n, d.a_n, d.b_n, d.identity_residual() / (1.0 + abs(d.t_n)), d.v_n]
        if "resolvent_oracle" in self.stats:
            errs, valid, struct = [], [], float("nan")
            for i in range(self.k):
                rk = spectral.resolvent_k_matrix(w, out.eigenvalues[i], self.spec.spike, self.vecs)
                valid.append(1.0 if rk.valid else 0.0)
                errs.append(spectral.resolvent_oracle_error(rk) if rk.valid else float("nan"))
                if i == 0 and rk.valid:
                    struct = float(np.max(np.abs(rk.matrix / self.theta - np.diag(self.alphas))))
            row += errs + valid + [struct]
        if self.gdisc is not None:
            row += list(self.gdisc.T @ v[:, self.cfg.field_target])
        return np.asarray(row, dtype=float)


_WORKER_CTX = None


def _init_worker(cfg):
    global _WORKER_CTX
    _WORKER_CTX = _Context(cfg)


def _run_chunk(bounds):
    lo, hi = bounds
    with threadpool_limits(limits=1):
        return lo, np.vstack([_WORKER_CTX.replicate(r) for r in range(lo, hi)])


def _chunks(total, parts):
    edges = np.linspace(0, total, parts + 1).round().astype(int)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def simulate(cfg: ExperimentConfig, workers=1):
    """Per-replicate columns as ``(names, R x C array)`` in replicate order."""
    ctx = _Context(cfg)
    names = ctx.columns()
    if not cfg.statistics:
        return names, np.zeros((0, len(names)))
    workers = max(1, int(workers))
    if workers == 1:
        with threadpool_limits(limits=1):
            rows = [ctx.replicate(r) for r in range(cfg.replicates)]
        return names, np.vstack(rows)
    pieces = {}
    chunk_count = min(cfg.replicates, 4 * workers)
    # fork keeps closures in the profile and signal objects usable in workers
    with ProcessPoolExecutor(max_workers=workers, mp_context=mp.get_context("fork"),
                             initializer=_init_worker, initargs=(cfg,)) as pool:
        for lo, block in pool.map(_run_chunk, _chunks(cfg.replicates, chunk_count)):
            pieces[lo] = block
    return names, np.vstack([pieces[lo] for lo in sorted(pieces)])


# -- summaries ----------------------------------------------------------------

@dataclass
class ExperimentSummary:
    statistics: dict
    metadata: dict
    columns: list = field(default_factory=list, repr=False)
    samples: Optional[np.ndarray] = field(default=None, repr=False)
    runtime_seconds: float = 0.0

    @property
    def all_pass(self):
        return all(s.get("pass", False) for s in self.statistics.values())

    def failed(self):
        return sorted(name for name, s in self.statistics.items() if not s.get("pass", False))

    def to_dict(self):
        # runtime is kept out so that reruns serialize identically
        return _jsonable({"metadata": self.metadata, "statistics": self.statistics,
                          "all_pass": self.all_pass})

    def column(self, name):
        return self.samples[:, self.columns.index(name)]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    return obj


def _summ_eigenvalue(cfg, col, pred):
    t = cfg.threshold
    k, R = cfg.ensemble.k, cfg.replicates
    theta, al = cfg.ensemble.spike.theta, cfg.ensemble.spike.alphas
    lam = np.column_stack([col(f"lambda_{i}") for i in range(k)])
    out = {"marginals": [], "covariances": [], "first_order": []}
    ok = True
    for i in range(k):
        chk = _variance_check(lam[:, i], pred.cov_eigen[i, i], t("eigen_var_rel"), t("ks_min_p"))
        out["marginals"].append(chk)
        ok &= chk["pass"]
        ratio = lam[:, i] / (theta * al[i])
        frac = float(np.mean(np.abs(ratio - 1.0) <= t("first_order_band")))
        fo = {"median_ratio": float(np.median(ratio)), "fraction_in_band": frac,
              "pass": frac >= t("first_order_frac")}
        out["first_order"].append(fo)
        ok &= fo["pass"]
    emp = np.cov(lam, rowvar=False, ddof=1).reshape(k, k)
    for i in range(k):
        for j in range(i + 1, k):
            th = pred.cov_eigen
            se = math.sqrt((th[i, i] * th[j, j] + th[i, j] ** 2) / (R - 1))
            entry = {"i": i, "j": j, "empirical": float(emp[i, j]), "theory": float(th[i, j]),
                     "se": se, "pass": bool(abs(emp[i, j] - th[i, j]) <= t("eigen_cov_se") * se)}
            out["covariances"].append(entry)
            ok &= entry["pass"]
    out["pass"] = bool(ok)
    return out


def _summ_mean(cfg, col, pred):
    t = cfg.threshold
    spec = cfg.ensemble
    R, n = cfg.replicates, spec.n
    theta, al = spec.spike.theta, spec.spike.alphas
    vecs = build_spike_vectors(spec.spike, n)
    out = {"entries": []}
    ok = True
    for i in range(spec.k):
        lam = col(f"lambda_{i}")
        b_val = float(pred.b_eigenvalue[i])
        gap = float(lam.mean() - b_val)
        var_th = float(pred.cov_eigen[i, i])
        bound = t("mean_sigma_factor") * math.sqrt(2.0 / R) * math.sqrt(var_th) + t("mean_slack")
        # control variates: e'We has mean 0 and e'W^2e has a known mean
        ew2 = expected_w2_form(vecs[:, i], vecs[:, i], spec.profile, n)
        cv = lam - col(f"q1_{i}") - (col(f"q2_{i}") - ew2) / (theta * al[i])
        entry = {"mc_mean": float(lam.mean()), "b_eigenvalue": b_val, "gap": gap, "bound": bound,
                 "cv_gap": float(cv.mean() - b_val), "cv_se": float(cv.std(ddof=1) / math.sqrt(R)),
                 "pass": bool(abs(gap) <= bound)}
        out["entries"].append(entry)
        ok &= entry["pass"]
    out["pass"] = bool(ok)
    return out


def _summ_alignment(cfg, col, pred):
    t = cfg.threshold
    spec = cfg.ensemble
    n, k, theta, al = spec.n, spec.k, spec.spike.theta, spec.spike.alphas
    out = {"entries": []}
    ok = True
    band = t("align_bound_factor") * math.sqrt(n) / theta
    inside = np.ones(cfg.replicates, dtype=bool)
    for i in range(k):
        a_ii = col(f"align_{i}_{i}")
        scaled = (theta * al[i]) ** 2 / math.sqrt(n) * a_ii
        chk = _variance_check(scaled, pred.var_align[i], t("align_var_rel"), t("ks_min_p"))
        chk["mean_alignment"] = float(a_ii.mean())
        out["entries"].append(chk)
        ok &= chk["pass"]
        inside &= (a_ii >= 1.0 - band) & (a_ii <= 1.0 + 1e-12)
        for j in range(k):
            if j != i:
                inside &= np.abs(col(f"align_{j}_{i}")) <= band
    frac = float(inside.mean())
    out["first_order"] = {"band": band, "fraction_in_band": frac, "pass": frac >= t("align_bound_frac")}
    ok &= out["first_order"]["pass"]
    out["pass"] = bool(ok)
    return out


def _summ_ortho(cfg, col, pred):
    t = cfg.threshold
    spec = cfg.ensemble
    k, theta = spec.k, spec.spike.theta
    out = {"entries": []}
    ok = True
    if k < 2:
        return {"entries": [], "pass": False, "error": "orthogonal alignment needs k >= 2"}
    for i in range(k):
        for j in range(k):
            if i == j:
                continue
            x = theta * col(f"align_{j}_{i}")
            var = float(np.var(x, ddof=1))
            variants = {"statement": float(pred.tau_sq_statement[i, j]),
                        "proof_end": float(pred.tau_sq_proof_end[i, j])}
            rel = {name: abs(var / v - 1.0) for name, v in variants.items()}
            best = min(rel, key=rel.get)
            entry = {"i": i, "j": j, "mean": float(x.mean()), "variance": var, "theory": variants,
                     "z": {name: variance_z(x, v) for name, v in variants.items()},
                     "relative_error": rel, "matched_variant": best,
                     "linear_form_diagnostic": float(pred.linear_form_var[i, j])}
            entry["ks_stat"], entry["ks_p"] = ks_gaussian(x - x.mean(), math.sqrt(variants[best]))
            entry["pass"] = bool(rel[best] <= t("ortho_var_rel") and entry["ks_p"] > t("ks_min_p"))
            out["entries"].append(entry)
            ok &= entry["pass"]
    out["pass"] = bool(ok)
    return out


def _summ_martingale(cfg, col, pred):
    t = cfg.threshold
    spec = cfg.ensemble
    n = spec.n
    vecs = build_spike_vectors(spec.spike, n)
    out = {"entries": []}
    ok = True
    for i in range(spec.k):
        ew2 = expected_w2_form(vecs[:, i], vecs[:, i], spec.profile, n)
        stat = (col(f"q2_{i}") - ew2) / math.sqrt(n)
        chk = _variance_check(stat, pred.sigma2_martingale[i], t("mart_var_rel"), t("ks_min_p"))
        chk["expected_w2"] = ew2
        resid = col(f"mart_resid_{i}")
        chk["max_identity_residual"] = float(resid.max())
        chk["identity_pass"] = bool(resid.max() <= t("identity_tol"))
        vn = col(f"mart_vn_{i}")
        vn_th = float(pred.vn_limit[i])
        chk["vn_mean"] = float(vn.mean())
        chk["vn_se"] = float(vn.std(ddof=1) / math.sqrt(vn.size))
        chk["vn_theory"] = vn_th
        chk["vn_pass"] = bool(abs(vn.mean() / vn_th - 1.0) <= t("vn_rel")) if vn_th > 0 else False
        chk["var_a_over_n2"] = float(np.var(col(f"mart_a_{i}"), ddof=1) / n ** 2)
        chk["var_b_over_n2"] = float(np.var(col(f"mart_b_{i}"), ddof=1) / n ** 2)
        chk["clt_pass"] = chk["pass"]
        chk["pass"] = bool(chk["clt_pass"] and chk["identity_pass"] and chk["vn_pass"])
        out["entries"].append(chk)
        ok &= chk["pass"]
    out["pass"] = bool(ok)
    return out


def _summ_field(cfg, col, pred):
    t = cfg.threshold
    spec = cfg.ensemble
    n, theta = spec.n, spec.spike.theta
    J = cfg.field_modes
    basis = DirichletBasis(J)
    target = cfg.field_target
    raw = np.column_stack([col(f"field_{j}") for j in range(1, J + 1)])
    # the pairing is linear in v, so centering g'v at its mean equals
    # centering v at the replicate-mean vector
    pair = theta * math.sqrt(n) * (raw - raw.mean(axis=0))
    second = pair.var(axis=0, ddof=1)
    th = np.array([pred.field_cov(basis.function(j), basis.function(j), target) for j in range(1, J + 1)])
    modes = []
    ok = True
    for j in range(min(int(t("field_checked_modes")), J)):
        chk = _variance_check(pair[:, j], th[j], t("field_var_rel"), t("ks_min_p"))
        chk["mode"] = j + 1
        modes.append(chk)
        ok &= chk["pass"]
    tight_max = float(second.max())
    spread = float(second.max() / second.min()) if second.min() > 0 else float("inf")
    tight = {"max_second_moment": tight_max, "max_theory": float(th.max()),
             "spread": spread,
             "pass": bool(tight_max <= t("tight_theory_factor") * th.max()
                          and spread <= t("tight_spread_factor"))}
    ok &= tight["pass"]
    tail = tail_ratio(second, t("hneg_d"))
    return {"modes": modes, "second_moments": second.tolist(), "theory": th.tolist(),
            "tightness": tight,
            "hneg_tail": {"d": t("hneg_d"), "ratio": tail, "threshold": t("hneg_tail_max"),
                          "within_threshold": bool(tail < t("hneg_tail_max"))},
            "pass": bool(ok)}


def _summ_deloc(cfg, col, pred):
    t = cfg.threshold
    spec = cfg.ensemble
    n, theta = spec.n, spec.spike.theta
    out = {"entries": []}
    ok = True
    rate = math.log(n) ** 2 / theta
    for i in range(spec.k):
        m = col(f"deloc_{i}")
        frac = float(np.mean(m <= t("deloc_factor") * rate))
        entry = {"median": float(np.median(m)), "median_scaled": float(np.median(m) / rate),
                 "fraction_within_rate": frac, "pass": frac >= t("deloc_frac")}
        out["entries"].append(entry)
        ok &= entry["pass"]
    out["pass"] = bool(ok)
    return out


def _summ_resolvent(cfg, col, pred):
    t = cfg.threshold
    out = {"entries": []}
    ok = True
    for i in range(cfg.ensemble.k):
        valid = col(f"kvalid_{i}") > 0
        err = col(f"kerr_{i}")[valid]
        entry = {"n_valid": int(valid.sum()), "n_total": int(valid.size),
                 "max_error": float(err.max()) if err.size else float("nan"),
                 "n_within_tol": int(np.sum(err <= t("resolvent_tol"))),
                 "pass": bool(err.size > 0 and np.all(err <= t("resolvent_tol")))}
        out["entries"].append(entry)
        ok &= entry["pass"]
    struct = col("kstruct")
    struct = struct[np.isfinite(struct)]
    frac = float(np.mean(struct <= t("k_structure_tol"))) if struct.size else 0.0
    out["k_structure"] = {"fraction_within": frac, "median_deviation": float(np.median(struct)) if struct.size else float("nan"),
                          "pass": frac >= t("k_structure_frac")}
    ok &= out["k_structure"]["pass"]
    out["pass"] = bool(ok)
    return out


_SUMMARIZERS = {
    "eigenvalue_clt": _summ_eigenvalue,
    "mean_expansion": _summ_mean,
    "alignment_clt": _summ_alignment,
    "ortho_clt": _summ_ortho,
    "martingale_clt": _summ_martingale,
    "field_clt": _summ_field,
    "delocalization": _summ_deloc,
    "resolvent_oracle": _summ_resolvent,
}


def _concentration(cfg, col):
    out = []
    for i in range(cfg.ensemble.k):
        row = {}
        for p in (1, 2, 3):
            q = col(f"q{p}_{i}")
            row[f"q{p}"] = {"mean": float(q.mean()), "std": float(q.std(ddof=1)) if q.size > 1 else 0.0}
        out.append(row)
    return out


def summarize(cfg: ExperimentConfig, names, samples, predictions=None) -> ExperimentSummary:
    spec = cfg.ensemble
    report = validate_spec(spec)
    meta = {"n": spec.n, "k": spec.k, "theta": spec.spike.theta, "alphas": list(spec.spike.alphas),
            "replicates": cfg.replicates, "master_seed": cfg.master_seed,
            "statistics": list(cfg.statistics), "validation": report.to_dict()}
    if not cfg.statistics:
        return ExperimentSummary(statistics={}, metadata=meta, columns=names, samples=samples)
    pred = predictions
    if pred is None:
        pred = theory.predict(spec, grid=cfg.grid, check_refinement=False)
    meta["theory"] = pred.to_dict()
    meta["concentration"] = _concentration(cfg, lambda c: samples[:, names.index(c)])

    def col(name):
        return samples[:, names.index(name)]

    results = {}
    for name in cfg.statistics:
        try:
            results[name] = _SUMMARIZERS[name](cfg, col, pred)
        except EigenSolverFailure:
            raise
        except (ValueError, ArithmeticError, SpikedWignerError) as exc:
            results[name] = {"pass": False, "error": f"{type(exc).__name__}: {exc}"}
    return ExperimentSummary(statistics=results, metadata=meta, columns=names, samples=samples)


def run(cfg: ExperimentConfig, workers=None) -> ExperimentSummary:
    """Simulate and summarize; deterministic in (config, master_seed)."""
    report = validate_spec(cfg.ensemble)
    if not report.ok:
        bad = [k for k, v in report.checks.items() if v == "violated"]
        raise ConfigError(f"ensemble violates {', '.join(bad)}")
    if cfg.ensemble.k > 1:
        spectral.check_separation(cfg.ensemble.spike, cfg.ensemble.n)
    workers = workers if workers is not None else (cfg.workers or 1)
    start = time.perf_counter()
    names, samples = simulate(cfg, workers=workers)
    summary = summarize(cfg, names, samples)
    summary.runtime_seconds = time.perf_counter() - start
    return summary
