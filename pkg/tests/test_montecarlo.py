import json
import math

import numpy as np
import pytest

from spikedwigner import montecarlo
from spikedwigner.errors import ConfigError, DegenerateSamples, EigenSolverFailure

SMALL = {"n": 80, "spike": {"theta_factor": 1.0}}


def cfg(stats, R=100, seed=3, **kw):
    return montecarlo.config_from_dict({"ensemble": kw.pop("ensemble", SMALL), "replicates": R,
                                        "master_seed": seed, "statistics": stats, **kw})


def test_ks_gaussian_examples():
    rng = np.random.default_rng(0)
    x = rng.normal(0, 2.0, 10_000)
    _, p = montecarlo.ks_gaussian(x, 2.0)
    assert p > 1e-3
    _, p = montecarlo.ks_gaussian(x, 4.0)
    assert p < 1e-6
    with pytest.raises(DegenerateSamples):
        montecarlo.ks_gaussian(np.ones(200), 1.0)


def test_ks_calibration():
    rng = np.random.default_rng(1)
    rejects = sum(montecarlo.ks_gaussian(rng.standard_normal(10_000), 1.0)[1] < 0.01 for _ in range(100))
    assert rejects <= 6


def test_variance_z_examples():
    x = np.random.default_rng(2).normal(0, 3.0, 500)
    assert montecarlo.variance_z(x, float(np.var(x, ddof=1))) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        montecarlo.variance_z(x, 0.0)


def test_variance_z_calibration():
    rng = np.random.default_rng(3)
    z = [montecarlo.variance_z(rng.normal(0, 1.5, 2000), 2.25) for _ in range(400)]
    assert max(abs(v) for v in z) <= 4.5
    assert abs(np.mean(z)) < 0.2


def test_config_validation():
    with pytest.raises(ConfigError):
        cfg(["eigenvalue_clt"], R=50)
    with pytest.raises(ConfigError):
        cfg(["bogus"])
    with pytest.raises(ConfigError):
        cfg([], thresholds={"nope": 1})
    with pytest.raises(ConfigError):
        montecarlo.config_from_dict({"ensemble": SMALL})
    cfg(["resolvent_oracle"], R=10)


def test_empty_statistics_metadata_only():
    s = montecarlo.run(cfg([], R=5))
    assert s.statistics == {}
    assert "validation" in s.metadata
    assert s.all_pass


def test_resolvent_oracle_run():
    s = montecarlo.run(cfg(["resolvent_oracle"], R=100, ensemble={"n": 150, "spike": {"theta_factor": 1.0}}))
    entry = s.statistics["resolvent_oracle"]["entries"][0]
    assert entry["n_valid"] == 100
    assert entry["max_error"] <= 1e-7
    assert s.statistics["resolvent_oracle"]["pass"]


def test_scheduling_invariance():
    c = cfg(["eigenvalue_clt", "alignment_clt", "martingale_clt", "field_clt", "mean_expansion"],
            R=100, ensemble={"n": 60, "spike": {"theta_factor": 1.0}})
    dumps = {w: json.dumps(montecarlo.run(c, workers=w).to_dict(), sort_keys=True) for w in (1, 4, 8)}
    assert dumps[1] == dumps[4] == dumps[8]


def test_thresholds_are_configurable():
    base = cfg(["eigenvalue_clt"], R=100)
    loose = cfg(["eigenvalue_clt"], R=100, thresholds={"eigen_var_rel": 10.0, "ks_min_p": 0.0,
                                                        "first_order_band": 1.0})
    assert loose.threshold("eigen_var_rel") == 10.0
    assert montecarlo.run(loose).statistics["eigenvalue_clt"]["pass"]
    assert base.resolved()["thresholds"]["eigen_var_rel"] == 0.08


def test_partial_failure_isolated():
    # k=1 cannot provide an orthogonal direction; other statistics still run
    s = montecarlo.run(cfg(["ortho_clt", "delocalization"], R=100))
    assert not s.statistics["ortho_clt"]["pass"]
    assert "entries" in s.statistics["delocalization"]


def test_solver_failure_carries_seed(monkeypatch):
    from spikedwigner import spectral

    def boom(*a, **k):
        raise EigenSolverFailure("forced")

    monkeypatch.setattr(spectral, "top_eigenpairs", boom)
    with pytest.raises(EigenSolverFailure) as info:
        montecarlo.run(cfg(["delocalization"], R=3))
    assert info.value.seed is not None


def test_k2_summary_reports_both_variants():
    ens = {"n": 120, "spike": {"theta_factor": 1.0, "alphas": [2.0, 1.0],
                               "signals": [{"family": "constant"}, {"family": "cos", "m": 1}]}}
    s = montecarlo.run(cfg(["ortho_clt", "eigenvalue_clt"], R=100, ensemble=ens))
    entry = s.statistics["ortho_clt"]["entries"][0]
    assert set(entry["theory"]) == {"statement", "proof_end"}
    assert entry["matched_variant"] in entry["theory"]
    assert len(s.statistics["eigenvalue_clt"]["covariances"]) == 1


def test_samples_columns():
    s = montecarlo.run(cfg(["field_clt"], R=100, field={"modes": 4}))
    assert s.samples.shape == (100, len(s.columns))
    assert "field_4" in s.columns and "lambda_0" in s.columns
    assert "concentration" in s.metadata
