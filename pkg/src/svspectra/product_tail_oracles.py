"""Tail behaviour of products of independent variables: Monte Carlo ratio
estimators, the exact law of a product of two Paretos, the effective
multiplicity of an exponent matrix, and the single-big-factor decomposition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import distributions as dist
from .distributions import LawSpec, RngStream
from .errors import BudgetError, ParameterError, PreconditionError

CHUNK = 1 << 18


def _chunks(total: int, size: int = CHUNK):
    left = total
    while left > 0:
        m = min(left, size)
        yield m
        left -= m


@dataclass(frozen=True)
class RatioEstimate:
    levels: tuple[float, ...]
    thresholds: tuple[float, ...]
    estimates: tuple[float | None, ...]
    ses: tuple[float | None, ...]
    counts: tuple[int, ...]

    def rows(self) -> list[dict]:
        return [
            {"level": q, "threshold": x, "estimate": e, "se": s, "count": c}
            for q, x, e, s, c in zip(self.levels, self.thresholds, self.estimates, self.ses, self.counts)
        ]


def ratio_limit_mc(
    x_law: LawSpec,
    y_law: LawSpec,
    levels: Sequence[float] = (0.9, 0.99, 0.999),
    mc_budget: int = 10**7,
    stream: RngStream | None = None,
    min_budget: int = 10**6,
) -> RatioEstimate:
    """Estimate P(XY > x) / P(X > x) at the ``levels``-quantiles x of X.

    X and Y are drawn in pairs and both probabilities come from the same
    draws. The standard error is the delta-method one for a ratio of two
    correlated binomial proportions. Points with no exceedances are None.
    """
    if mc_budget < min_budget:
        raise BudgetError(f"mc_budget must be >= {min_budget}, got {mc_budget}")
    if not math.isfinite(dist.tail_index(x_law)):
        raise PreconditionError(f"x_law {x_law.kind} is not regularly varying")
    levels = tuple(float(q) for q in levels)
    if list(levels) != sorted(set(levels)):
        raise ParameterError("levels must be strictly increasing", "levels")
    xs = np.array([dist.quantile(x_law, q) for q in levels])
    gen = (stream or RngStream(0, 0)).generator
    n_a = np.zeros(len(xs), dtype=np.int64)
    n_b = np.zeros(len(xs), dtype=np.int64)
    n_ab = np.zeros(len(xs), dtype=np.int64)
    for m in _chunks(mc_budget):
        x = dist.draw(x_law, gen, m)
        xy = x * dist.draw(y_law, gen, m)
        a = xy[:, None] > xs
        b = x[:, None] > xs
        n_a += a.sum(axis=0)
        n_b += b.sum(axis=0)
        n_ab += (a & b).sum(axis=0)
    est, ses = [], []
    for ca, cb, cab in zip(n_a, n_b, n_ab):
        if ca == 0 or cb == 0:
            est.append(None)
            ses.append(None)
            continue
        pa, pb, pab = ca / mc_budget, cb / mc_budget, cab / mc_budget
        r = float(pa / pb)
        var = (pa * (1 - pa) - 2 * r * (pab - pa * pb) + r * r * pb * (1 - pb)) / (pb * pb * mc_budget)
        est.append(r)
        ses.append(math.sqrt(max(var, 0.0)))
    return RatioEstimate(levels, tuple(xs.tolist()), tuple(est), tuple(ses), tuple(int(c) for c in n_a))


def pareto_product_survival(alpha: float, x: float) -> float:
    """P(X1 X2 > x) for iid standard Paretos of index alpha: x^-alpha (1 + alpha log x)."""
    if not alpha > 0:
        raise ParameterError("alpha must be > 0", "alpha")
    if not x >= 1:
        raise ParameterError("x must be >= 1", "x")
    return x ** (-alpha) * (1.0 + alpha * math.log(x))


@dataclass(frozen=True)
class PeffResult:
    a_max: float
    p_eff: int
    P_eff: frozenset[frozenset[int]]

    def to_json(self) -> dict:
        return {"a_max": self.a_max, "p_eff": self.p_eff, "P_eff": sorted(sorted(s) for s in self.P_eff)}


def peff(a) -> PeffResult:
    """Effective multiplicity of the largest exponent in a rows x columns exponent matrix.

    Column indices in the result are 1-based.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.size == 0:
        raise ParameterError("exponent matrix must be a non-empty 2-D array", "a")
    if np.any(a < 0) or not np.all(np.isfinite(a)):
        raise ParameterError("exponents must be finite and non-negative", "a")
    a_max = float(a.max())
    if not a_max > 0:
        raise PreconditionError("largest exponent must be positive")
    top = a == a_max
    for k in range(a.shape[1]):
        if not top[:, k].any():
            raise PreconditionError(f"column {k + 1} never attains the largest exponent {a_max}")
    counts = top.sum(axis=1)
    p_eff = int(counts.max())
    sets = frozenset(
        frozenset(int(c) + 1 for c in np.nonzero(top[i])[0]) for i in range(a.shape[0]) if counts[i] == p_eff
    )
    return PeffResult(a_max, p_eff, sets)


@dataclass(frozen=True)
class SplitupRow:
    level: float
    t: float
    s: float
    left: float
    left_se: float
    big_factor_terms: tuple[float, ...]
    remainder: float
    remainder_se: float
    sparse: bool

    def to_dict(self) -> dict:
        d = {
            "level": self.level, "t": self.t, "s": self.s, "left": self.left, "left_se": self.left_se,
            "remainder": self.remainder, "remainder_se": self.remainder_se, "sparse": self.sparse,
        }
        for j, term in enumerate(self.big_factor_terms):
            d[f"term_{j + 1}"] = term
        return d


@dataclass(frozen=True)
class SplitupResult:
    alpha: float
    exponents: tuple[float, ...]
    v: float
    conv_equivalent: bool
    rows: tuple[SplitupRow, ...]


def _ratio_se(count_a: int, n_a: int, count_b: int, n_b: int) -> tuple[float, bool]:
    """Delta-method SE of (count_a/n_a)/(count_b/n_b), treating the two as independent.

    Sparse numerators (< 10 hits) use 3/n_a in place of the observed rate,
    widening the band instead of reporting a spuriously tight one.
    """
    sparse = count_a < 10
    pa = max(count_a, 3) / n_a if sparse else count_a / n_a
    pb = count_b / n_b
    r = pa / pb
    return r * math.sqrt((1 - pa) / (n_a * pa) + (1 - pb) / (n_b * pb)), sparse


def splitup_check(
    y_law: LawSpec,
    exponents: Sequence[float],
    v: float = 1.0,
    s_grid: Sequence[float] = (0.5, 0.25, 0.1),
    levels: Sequence[float] = (0.999, 0.9999),
    mc_budget: int = 10**6,
    stream: RngStream | None = None,
    exponentiate: bool = False,
) -> SplitupResult:
    """Split P(prod Y_j^a_j > v t) by which factor is large.

    Y_j are iid draws of ``y_law`` (or of exp(y_law) with ``exponentiate``).
    t runs over ``levels``-quantiles of Y^a_max. For every (t, s) this reports

    * left: P(prod > v t) / P(Y^a_max > t)
    * one term per maximal exponent j: P(prod > v t, Y_j^a_max > s t) / P(Y^a_max > t)
    * remainder: P(prod > v t, max_j Y_j^a_max <= s t) / P(Y^a_max > t)

    The denominator pools the exceedances of every factor. All s share the
    same draws, so the remainder is monotone in s by construction. The
    decomposition is only expected to close for convolution-equivalent Y;
    other laws are accepted and flagged via ``conv_equivalent=False``.
    Factors bounded below by 1 make the remainder vanish once s t < 1, so
    informative s values need deep levels.
    """
    a = np.asarray(exponents, dtype=float)
    if a.ndim != 1 or a.size == 0 or np.any(a < 0):
        raise ParameterError("exponents must be a non-empty list of non-negative numbers", "exponents")
    a_max = float(a.max())
    if not a_max > 0:
        raise PreconditionError("need max exponent > 0")
    if not v > 0:
        raise ParameterError("v must be > 0", "v")
    if mc_budget < 10**4:
        raise BudgetError("mc_budget must be >= 10^4")
    if exponentiate:
        alpha = dist.exp_tail_index(y_law)
        conv = y_law.kind == "conv_equiv_eta"
    else:
        if y_law.kind not in ("pareto",):
            raise PreconditionError(f"y_law {y_law.kind} is not a non-negative regularly varying law")
        alpha = dist.tail_index(y_law)
        conv = False
    if not math.isfinite(alpha):
        raise PreconditionError("y_law is not regularly varying")
    top = np.nonzero(a == a_max)[0]
    ts = [dist.quantile(y_law, q) for q in levels]
    # thresholds on the log scale: log t = a_max * log(quantile of Y)
    log_ts = [a_max * (q if exponentiate else math.log(q)) for q in ts]
    s_vals = [float(s) for s in s_grid]
    if any(not s > 0 for s in s_vals):
        raise ParameterError("s values must be > 0", "s_grid")

    gen = (stream or RngStream(0, 0)).generator
    nl, ns = len(log_ts), len(s_vals)
    c_left = np.zeros(nl, dtype=np.int64)
    c_den = np.zeros(nl, dtype=np.int64)
    c_terms = np.zeros((nl, ns, top.size), dtype=np.int64)
    c_rem = np.zeros((nl, ns), dtype=np.int64)
    log_v = math.log(v)
    for m in _chunks(mc_budget):
        draws = dist.draw(y_law, gen, (m, a.size))
        log_y = draws if exponentiate else np.log(draws)
        log_prod = log_y @ a
        log_big = a_max * log_y
        log_max = log_big.max(axis=1)
        for ti, lt in enumerate(log_ts):
            hit = log_prod > log_v + lt
            c_left[ti] += int(hit.sum())
            c_den[ti] += int((log_big > lt).sum())
            for si, s in enumerate(s_vals):
                ls = math.log(s) + lt
                c_rem[ti, si] += int((hit & (log_max <= ls)).sum())
                for jj, j in enumerate(top):
                    c_terms[ti, si, jj] += int((hit & (log_big[:, j] > ls)).sum())

    rows = []
    n_den = mc_budget * a.size
    for ti, (q, lt) in enumerate(zip(levels, log_ts)):
        den = c_den[ti] / n_den
        if c_den[ti] == 0:
            raise BudgetError(f"no factor exceeds the level-{q} threshold; raise mc_budget")
        left = c_left[ti] / mc_budget / den
        left_se, sparse_l = _ratio_se(int(c_left[ti]), mc_budget, int(c_den[ti]), n_den)
        for si, s in enumerate(s_vals):
            rem = c_rem[ti, si] / mc_budget / den
            rem_se, sparse_r = _ratio_se(int(c_rem[ti, si]), mc_budget, int(c_den[ti]), n_den)
            terms = tuple(float(c / mc_budget / den) for c in c_terms[ti, si])
            rows.append(
                SplitupRow(float(q), math.exp(lt), s, float(left), left_se, terms, float(rem), rem_se, sparse_l or sparse_r)
            )
    return SplitupResult(alpha, tuple(a.tolist()), float(v), conv, tuple(rows))
