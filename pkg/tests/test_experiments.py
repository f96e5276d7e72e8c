from __future__ import annotations

import json

import numpy as np
import pytest

from svspectra.distributions import LawSpec
from svspectra.errors import ConfigError
from svspectra.experiments import (
    ExperimentConfig,
    convergence_study,
    figure2_stats,
    rank_sum_greater,
    regime_dichotomy,
    replicate_seed,
    run_experiment,
    stable_limit_check,
)
from svspectra.sv_simulator import ModelSpec
from svspectra.volatility_field import preset_field


def small_cfg(**kw):
    base = dict(spec="case1", p=3, n_grid=[200, 400], replicates=4, master_seed=1, mc_budget=10**4)
    base.update(kw)
    return ExperimentConfig.from_dict(base)


def test_config_validation():
    with pytest.raises(ConfigError, match="unknown config fields"):
        ExperimentConfig.from_dict({"bogus": 1})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"schema_version": 2})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"n_grid": [400, 200]})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"statistics": ["nope"]})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_json("[1, 2]")


def test_config_roundtrip():
    cfg = small_cfg()
    assert ExperimentConfig.from_json(json.dumps(cfg.to_dict())) == cfg


def test_convergence_independent_of_workers():
    a = convergence_study(small_cfg(workers=1))
    b = convergence_study(small_cfg(workers=3))
    assert a.records == b.records
    assert len(a.records) == 2 * 4 * len(a.config.statistics)
    assert all(r.value is not None for r in a.records)


def test_replicate_seeds_distinct():
    seeds = {replicate_seed(1, n, r) for n in (10, 20) for r in range(50)}
    assert len(seeds) == 100


def test_summaries_have_quartiles():
    res = convergence_study(small_cfg(statistics=["diag_error", "trace_ratio_dev"]))
    for s in res.summaries:
        assert s.q25 <= s.median <= s.q75
    assert len(res.medians("diag_error")) == 2


def test_stable_limit_small():
    spec = ModelSpec("case1_heavy_Z", LawSpec.pareto(1.5), LawSpec.constant(0.0), preset_field("single"), 2, 500, 3)
    res = stable_limit_check(spec, 500, replicates=500)
    assert res.target_index == 0.75
    assert res.normalized.shape == (500, 2)
    assert all(h is not None and 0.4 < h < 1.2 for h in res.hill)
    assert abs(res.spearman[0, 1]) < 4 * res.corr_se
    with pytest.raises(ConfigError):
        stable_limit_check(spec, 500, replicates=10)


def test_figure2_stats_sum_to_one():
    f = figure2_stats("case2_exp", seed=2, p=6, n=300)
    assert f.normalized_eigenvalues.sum() == pytest.approx(1.0)
    assert np.all(np.diff(f.normalized_eigenvalues) <= 0)
    assert len(f.rows()) == 6


def test_rank_sum_direction():
    a = np.arange(20, 40.0)
    b = np.arange(0, 20.0)
    assert rank_sum_greater(a, b) < 1e-6
    assert rank_sum_greater(b, a) > 0.99


def test_dichotomy_guard():
    with pytest.raises(ConfigError):
        regime_dichotomy(replicates=5)


def test_run_experiment_dispatch():
    res = run_experiment(small_cfg(experiment="figure2", n_grid=[300]))
    assert res.preset == "case1"
