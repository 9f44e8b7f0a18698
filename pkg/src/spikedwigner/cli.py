"""Command-line front end: ``spikedwigner run | theory | report``."""

from __future__ import annotations

import argparse
import csv
import datetime as dt
import hashlib
import io
import json
import os
import platform
import sys
from importlib import resources

import numpy as np
import scipy

from . import __version__, montecarlo, theory
from .errors import ConfigError, EigenSolverFailure, SpecError, SpikedWignerError

WORKERS_ENV = "SPIKEDWIGNER_WORKERS"

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3


def _err(msg):
    print(f"spikedwigner: {msg}", file=sys.stderr)


def bundled_configs():
    root = resources.files("spikedwigner") / "configs"
    return sorted(p.name for p in root.iterdir() if p.name.endswith(".cfg"))


def resolve_config_path(path):
    """A filesystem path, or the name of a bundled config."""
    if os.path.exists(path):
        return path
    candidate = resources.files("spikedwigner") / "configs" / os.path.basename(path)
    if candidate.is_file():
        return str(candidate)
    raise ConfigError(f"config file {path!r} not found")


def _read_config_dict(path):
    path = resolve_config_path(path)
    try:
        with open(path) as fh:
            return path, json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def resolve_workers(flag, config_workers, environ=None):
    """Worker count from the flag, else the environment, else the config.

    Setting the environment variable while the config also names a
    different count is rejected.
    """
    environ = os.environ if environ is None else environ
    if flag is not None:
        if flag < 1:
            raise ConfigError("--workers must be >= 1")
        return flag
    env = environ.get(WORKERS_ENV)
    if env is not None:
        try:
            env_workers = int(env)
        except ValueError as exc:
            raise ConfigError(f"{WORKERS_ENV}={env!r} is not an integer") from exc
        if env_workers < 1:
            raise ConfigError(f"{WORKERS_ENV} must be >= 1")
        if config_workers is not None and config_workers != env_workers:
            raise ConfigError(f"{WORKERS_ENV}={env_workers} conflicts with workers={config_workers} in the config")
        return env_workers
    return config_workers or 1


def config_hash(resolved):
    blob = json.dumps(resolved, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def _now():
    return dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds")


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_samples(path, summary: montecarlo.ExperimentSummary, master_seed):
    from .ensemble import replicate_seed

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["replicate", "seed"] + list(summary.columns))
        for r, row in enumerate(summary.samples):
            w.writerow([r, replicate_seed(master_seed, r)] + ["%.17g" % x for x in row])


def cmd_run(args):
    started = _now()
    try:
        path, d = _read_config_dict(args.config)
        if args.master_seed is not None:
            d = dict(d, master_seed=args.master_seed)
        cfg = montecarlo.config_from_dict(d)
        workers = resolve_workers(args.workers, cfg.workers)
    except SpecError as exc:
        _err(f"{type(exc).__name__}: {exc}")
        return EXIT_CONFIG
    try:
        os.makedirs(args.out, exist_ok=True)
        probe = os.path.join(args.out, ".write_probe")
        with open(probe, "w"):
            pass
        os.remove(probe)
    except OSError as exc:
        _err(f"output directory {args.out!r} is not writable: {exc}")
        return EXIT_CONFIG
    try:
        summary = montecarlo.run(cfg, workers=workers)
    except EigenSolverFailure as exc:
        _err(f"solver failure: {exc}")
        return EXIT_SOLVER
    except SpecError as exc:
        _err(f"{type(exc).__name__}: {exc}")
        return EXIT_CONFIG
    resolved = cfg.resolved()
    _write_json(os.path.join(args.out, "summary.json"), summary.to_dict())
    if args.samples:
        write_samples(os.path.join(args.out, "samples.csv"), summary, cfg.master_seed)
    manifest = {
        "config_path": os.path.abspath(path),
        "config_hash": config_hash(resolved),
        "resolved_config": resolved,
        "output_dir": os.path.abspath(args.out),
        "started": started,
        "finished": _now(),
        "workers": workers,
        "runtime_seconds": round(summary.runtime_seconds, 3),
        "versions": {"spikedwigner": __version__, "numpy": np.__version__,
                     "scipy": scipy.__version__, "python": platform.python_version()},
    }
    _write_json(os.path.join(args.out, "manifest.json"), manifest)
    for name in cfg.statistics:
        flag = "PASS" if summary.statistics[name].get("pass") else "FAIL"
        print(f"{flag} {name}")
    return EXIT_OK if summary.all_pass else EXIT_FAIL


def _fmt(x):
    if x is None:
        return "-"
    if isinstance(x, float):
        return f"{x:.6g}"
    return str(x)


def _theory_lines(cfg):
    spec = cfg.ensemble
    k = spec.k
    phi1 = theory.dirichlet_mode(1)
    pred = theory.predict(spec, grid=cfg.grid, test_functions=[phi1])
    delta = pred.refinement
    lines = [f"# N={spec.n} theta={spec.spike.theta:g} alphas={list(spec.spike.alphas)} "
             f"profile={spec.profile.name}"]
    lines.append(f"{'predictor':<32} {'value':>14} {'refine_delta':>14}")

    def add(name, value, dkey):
        lines.append(f"{name:<32} {_fmt(float(value)):>14} {_fmt(delta.get(dkey)):>14}")

    for i in range(k):
        for j in range(k):
            add(f"cov_eigen[{i},{j}]", pred.cov_eigen[i, j], "cov_eigen")
    for i in range(k):
        add(f"var_align[{i}]", pred.var_align[i], "var_align")
        add(f"sigma2_martingale[{i}]", pred.sigma2_martingale[i], "sigma2_martingale")
    for i in range(k):
        for j in range(k):
            if i != j:
                add(f"tau_sq_statement[{i},{j}]", pred.tau_sq_statement[i, j], "tau_sq_statement")
                add(f"tau_sq_proof_end[{i},{j}]", pred.tau_sq_proof_end[i, j], "tau_sq_proof_end")
                add(f"tau_sq_linear_form[{i},{j}]", pred.linear_form_var[i, j], "tau_sq_linear_form")
    for i in range(k):
        lines.append(f"{f'b_eigenvalue[{i}]':<32} {_fmt(float(pred.b_eigenvalue[i])):>14} {'exact':>14}")
    for i in range(k):
        add(f"field_cov[phi1,phi1,{i}]", pred.field_cov(phi1, phi1, i), f"field_cov[g0,{i}]")
    return lines, pred


def cmd_theory(args):
    try:
        _, d = _read_config_dict(args.config)
        cfg = montecarlo.config_from_dict(d)
        lines, _ = _theory_lines(cfg)
    except SpecError as exc:
        _err(f"{type(exc).__name__}: {exc}")
        return EXIT_CONFIG
    print("\n".join(lines))
    return EXIT_OK


REPORT_FIELDS = ("n", "theta", "replicates", "deloc_median", "deloc_median_scaled",
                 "q1_std", "q2_std_scaled", "q3_std_scaled", "vn_mean")


def _report_row(summary):
    meta = summary["metadata"]
    n = meta["n"]
    row = {"n": n, "theta": meta["theta"], "replicates": meta["replicates"]}
    stats = summary.get("statistics", {})
    deloc = stats.get("delocalization", {}).get("entries", [])
    if deloc:
        row["deloc_median"] = deloc[0]["median"]
        row["deloc_median_scaled"] = deloc[0]["median_scaled"]
    conc = meta.get("concentration")
    if conc:
        for p in (1, 2, 3):
            s = conc[0][f"q{p}"]["std"]
            key = "q1_std" if p == 1 else f"q{p}_std_scaled"
            row[key] = s / n ** ((p - 1) / 2.0)
    mart = stats.get("martingale_clt", {}).get("entries", [])
    if mart:
        row["vn_mean"] = mart[0].get("vn_mean")
    return row


def build_report(dirs):
    rows = []
    for d in dirs:
        path = os.path.join(d, "summary.json")
        try:
            with open(path) as fh:
                summary = json.load(fh)
            rows.append(_report_row(summary))
        except (OSError, json.JSONDecodeError, KeyError, TypeError, IndexError) as exc:
            raise ConfigError(f"{path}: missing or corrupt summary ({exc})") from exc
    rows.sort(key=lambda r: r["n"])
    ratio_keys = [k for k in REPORT_FIELDS[3:]]
    base = rows[0]
    for r in rows:
        for key in ratio_keys:
            if r.get(key) is not None and base.get(key):
                r[f"{key}_ratio"] = r[key] / base[key]
    header = list(REPORT_FIELDS) + [f"{k}_ratio" for k in ratio_keys]
    return header, rows


def cmd_report(args):
    try:
        header, rows = build_report(args.dirs)
    except ConfigError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow(["" if r.get(k) is None else ("%.17g" % r[k] if isinstance(r[k], float) else r[k])
                    for k in header])
    text = [" ".join(f"{h:>14}" for h in header[:9])]
    for r in rows:
        text.append(" ".join(f"{_fmt(r.get(h)):>14}" for h in header[:9]))
    if len(rows) > 1:
        text.append("ratios to smallest N:")
        for r in rows:
            text.append(f"{r['n']:>14} " + " ".join(f"{_fmt(r.get(h)):>14}" for h in header[9:]))
    if args.out:
        try:
            os.makedirs(args.out, exist_ok=True)
            with open(os.path.join(args.out, "report.csv"), "w") as fh:
                fh.write(buf.getvalue())
            with open(os.path.join(args.out, "report.txt"), "w") as fh:
                fh.write("\n".join(text) + "\n")
        except OSError as exc:
            _err(f"cannot write report: {exc}")
            return EXIT_CONFIG
    print("\n".join(text))
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="spikedwigner",
                                description="Monte Carlo checks for spiked generalized Wigner matrices.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="simulate and summarize an experiment")
    r.add_argument("--config", required=True, help="config file or bundled config name")
    r.add_argument("--out", required=True, help="output directory")
    r.add_argument("--workers", type=int, default=None)
    r.add_argument("--master-seed", type=int, default=None, help="overrides the config seed")
    r.add_argument("--samples", action="store_true", help="also write samples.csv")
    r.set_defaults(func=cmd_run)

    t = sub.add_parser("theory", help="print quadrature predictions")
    t.add_argument("--config", required=True)
    t.set_defaults(func=cmd_theory)

    rep = sub.add_parser("report", help="merge run directories into a scaling table")
    rep.add_argument("dirs", nargs="+")
    rep.add_argument("--out", default=None, help="directory for report.csv and report.txt")
    rep.set_defaults(func=cmd_report)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SpikedWignerError as exc:
        _err(f"{type(exc).__name__}: {exc}")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
