from __future__ import annotations

import math
import random

import numpy as np
import pytest

from _oracles import naive_peff, random_exponent_matrix
from svspectra.distributions import LawSpec, RngStream
from svspectra.errors import BudgetError, ParameterError, PreconditionError
from svspectra.product_tail_oracles import pareto_product_survival, peff, ratio_limit_mc, splitup_check
from svspectra.volatility_field import CoefficientField, preset_field, product_exponent_matrix


def test_pareto_product_closed_form_examples():
    assert pareto_product_survival(3, math.e) == pytest.approx(4 * math.exp(-3), rel=1e-14)
    assert pareto_product_survival(1, math.e**2) == pytest.approx(3 * math.exp(-2), rel=1e-14)
    assert pareto_product_survival(2, 1.0) == 1.0
    with pytest.raises(ParameterError):
        pareto_product_survival(2, 0.5)


def test_pareto_product_by_quadrature():
    from scipy import integrate

    # P(X1 X2 > x) = P(X1 > x) + int_1^x P(X2 > x/y) alpha y^-alpha-1 dy
    a, x = 2.5, 7.0
    body = integrate.quad(lambda y: (x / y) ** -a * a * y ** (-a - 1), 1, x)[0]
    assert pareto_product_survival(a, x) == pytest.approx(x**-a + body, rel=1e-10)


def test_ratio_bounded_y():
    res = ratio_limit_mc(LawSpec.pareto(3), LawSpec.uniform(), mc_budget=10**6, stream=RngStream(2, 0))
    for est, se in zip(res.estimates, res.ses):
        assert abs(est - 0.25) < 4 * se


def test_ratio_constant_y():
    res = ratio_limit_mc(LawSpec.pareto(3), LawSpec.constant(2.0), mc_budget=10**6, stream=RngStream(2, 0))
    assert all(abs(e - 8.0) < 4 * s for e, s in zip(res.estimates, res.ses))


def test_ratio_guards():
    with pytest.raises(BudgetError):
        ratio_limit_mc(LawSpec.pareto(3), LawSpec.uniform(), mc_budget=10)
    with pytest.raises(PreconditionError):
        ratio_limit_mc(LawSpec.gaussian(), LawSpec.uniform(), mc_budget=10**6)
    with pytest.raises(ParameterError):
        ratio_limit_mc(LawSpec.pareto(3), LawSpec.uniform(), levels=(0.99, 0.9), mc_budget=10**6)


def test_peff_examples():
    r = peff(np.ones((2, 3)))
    assert (r.a_max, r.p_eff, r.P_eff) == (1.0, 3, frozenset({frozenset({1, 2, 3})}))
    r = peff([[1, 0], [0, 1]])
    assert r.p_eff == 1 and r.P_eff == frozenset({frozenset({1}), frozenset({2})})


def test_peff_names_bad_column():
    with pytest.raises(PreconditionError, match="column 2"):
        peff([[1, 0.5], [1, 0.5]])
    with pytest.raises(ParameterError):
        peff([[-1.0]])


def test_peff_random_matches_bruteforce():
    rng = random.Random(0)
    for _ in range(200):
        a = random_exponent_matrix(rng)
        r = peff(a)
        assert (r.a_max, r.p_eff, r.P_eff) == naive_peff(a)
        for s in r.P_eff:
            assert len(s) == r.p_eff


def test_peff_temporal_ma_bruteforce():
    # small analogue of the MA(18) product vectors: 4 spatial lags, 3 time lags
    f = CoefficientField(tuple(((k, 0), 1.0) for k in range(1, 5)))
    a, cols = product_exponent_matrix(f, 1, 1, [0, 1, 2])
    assert a.shape == (3, 12)
    r = peff(a)
    assert (r.a_max, r.p_eff, r.P_eff) == naive_peff(a)
    assert r.p_eff == 4


def test_peff_ma18_structure():
    a, cols = product_exponent_matrix(preset_field("ma18"), 1, 1, [0, 1, 2])
    r = peff(a)
    assert r.a_max == 2.0 and r.p_eff == 18 and len(r.P_eff) == 3
    assert all(len({cols[c - 1][1] for c in s}) == 1 for s in r.P_eff)


def test_splitup_single_factor_is_one():
    res = splitup_check(LawSpec.pareto(3), [1.0], mc_budget=10**5, stream=RngStream(1, 0))
    assert all(row.left == 1.0 for row in res.rows)


def test_splitup_pareto_tracks_product_law():
    res = splitup_check(LawSpec.pareto(3), [1.0, 1.0], s_grid=(0.5,), levels=(0.99, 0.999),
                        mc_budget=10**6, stream=RngStream(3, 0))
    for row in res.rows:
        exact = pareto_product_survival(3, row.t) / row.t**-3
        assert abs(row.left - exact) < 4 * row.left_se
    assert res.conv_equivalent is False


def test_splitup_remainder_shrinks_with_s():
    res = splitup_check(LawSpec.conv_equiv_eta(), [1.0, 1.0], s_grid=(0.5, 0.25, 0.1), levels=(0.9999,),
                        mc_budget=10**6, stream=RngStream(4, 0), exponentiate=True)
    assert res.conv_equivalent and res.alpha == 3
    rems = [row.remainder for row in res.rows]
    assert rems[0] >= rems[1] >= rems[2]
    assert rems[2] < rems[0]


def test_splitup_guards():
    with pytest.raises(PreconditionError):
        splitup_check(LawSpec.gaussian(), [1.0])
    with pytest.raises(PreconditionError):
        splitup_check(LawSpec.pareto(3), [0.0, 0.0])
    with pytest.raises(BudgetError):
        splitup_check(LawSpec.pareto(3), [1.0], mc_budget=10)
