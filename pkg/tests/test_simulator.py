from __future__ import annotations

import math
from dataclasses import replace

import numpy as np
import pytest
from scipy import integrate, stats

from svspectra.distributions import LawSpec
from svspectra.errors import BudgetError, ConfigError
from svspectra.sv_simulator import (
    MarginalPool,
    ModelSpec,
    norm_sequences,
    preset,
    simulate_panel,
    simulate_sigma,
    spec_from_config,
)
from svspectra.volatility_field import preset_field


def iid(law, p=1, n=1000, seed=0):
    return ModelSpec("case1_heavy_Z", law, LawSpec.constant(0.0), preset_field("single"), p, n, seed)


def test_presets():
    assert preset("case1").alpha == 3
    assert preset("case2_exp").alpha == 3
    assert preset("case2_convequiv").alpha == 3
    with pytest.raises(ConfigError):
        preset("case3")


def test_invalid_regime_lists_every_problem():
    with pytest.raises(ConfigError) as err:
        ModelSpec("case1_heavy_Z", LawSpec.gaussian(), LawSpec.exponential(3), preset_field("ma18"), 0, 5)
    msg = str(err.value)
    assert "p >= 1" in msg and "heavy-tailed z_law" in msg and "light-tailed eta_law" in msg


def test_case2_rejects_heavy_z():
    with pytest.raises(ConfigError):
        ModelSpec("case2_heavy_sigma", LawSpec.student_t(3), LawSpec.exponential(3), preset_field("ma18"))


def test_spec_roundtrip_and_overrides():
    spec = preset("case2_convequiv", 4, 50, 9)
    back = ModelSpec.from_dict(spec.to_dict())
    assert back == spec
    s2 = spec_from_config(spec.to_dict(), p=3, seed=11)
    assert (s2.p, s2.n, s2.master_seed) == (3, 50, 11)


def test_simulation_is_deterministic():
    spec = preset("case1", 5, 200, 3)
    a = simulate_panel(spec).values
    b = simulate_panel(spec).values
    assert np.array_equal(a, b)
    assert not np.array_equal(a, simulate_panel(spec.with_seed(4)).values)


def test_sigma_and_z_streams_are_separate():
    spec = preset("case1", 3, 100, 1)
    x1 = simulate_panel(spec).values
    x2 = simulate_panel(spec, z_stream=9).values
    sig = simulate_sigma(spec).values
    z1, z2 = x1 / sig, x2 / sig
    assert not np.allclose(z1, z2)
    assert np.allclose(np.abs(x1 / z1), sig)


def test_prefix_property_in_p():
    # rows share the eta window origin, so a larger panel extends a smaller one
    small = simulate_sigma(preset("case1", 3, 50, 2)).values
    big = simulate_sigma(preset("case1", 6, 50, 2)).values
    assert np.array_equal(small, big[:3])


def test_norm_sequences_analytic_pareto():
    spec = iid(LawSpec.pareto(1.5))
    ns = norm_sequences(spec, 10**5)
    assert ns.method == "analytic"
    assert ns.a_n == pytest.approx(1e5 ** (1 / 1.5), rel=1e-9)
    assert ns.c_n == 0.0


def test_norm_sequences_centering_between_2_and_4():
    ns = norm_sequences(iid(LawSpec.student_t(3)), 1000)
    assert ns.c_n == pytest.approx(1000 * 3.0)
    assert 2 * stats.t.sf(ns.a_n, 3) == pytest.approx(1e-3)


def _case1_tail(x):
    # P(|sigma Z| > x) with log sigma ~ N(0, 18), Z ~ t(3)
    f = lambda s: stats.norm.pdf(s, scale=math.sqrt(18)) * 2 * stats.t.sf(x * math.exp(-s), 3)
    return integrate.quad(f, -60, 60, limit=400)[0]


def test_case1_mc_a_n_against_quadrature():
    spec = preset("case1", 1, 1000, 5)
    ns = norm_sequences(spec, 1000, mc_budget=2 * 10**5)
    assert ns.method == "mc"
    # n P(|X| > a_n) ~ 1 with the pool's binomial error (~ 1/sqrt(200))
    assert 1000 * _case1_tail(ns.a_n) == pytest.approx(1.0, abs=0.3)


def test_pool_sharing_gives_monotone_a_n():
    spec = preset("case2_exp", 2, 100, 1)
    pool = MarginalPool(spec, 10**5)
    a = [norm_sequences(spec, n, pool=pool).a_n for n in (100, 1000, 10**4)]
    assert a[0] < a[1] < a[2]


def test_budget_errors():
    spec = preset("case1", 2, 100)
    with pytest.raises(BudgetError):
        norm_sequences(spec, 100, mc_budget=100)
    with pytest.raises(BudgetError):
        norm_sequences(spec, 10**5, mc_budget=5 * 10**4)
    with pytest.raises(BudgetError):
        MarginalPool(spec, 10)


def test_pair_norm_sequence():
    spec = preset("case2_convequiv", 4, 100, 2)
    ns = norm_sequences(spec, 1000, mc_budget=5 * 10**4, pair=(1, 2))
    assert ns.b_n > 0


def test_resized_keeps_everything_else():
    spec = preset("case1", 4, 100, 2)
    r = spec.resized(n=10)
    assert r == replace(spec, n=10)
