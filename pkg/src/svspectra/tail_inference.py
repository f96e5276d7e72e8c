"""Empirical tail estimators and the mixture representation of the tail process.

Thresholds follow one rank convention everywhere: at quantile level ``q`` the
``k = ceil((1 - q) * n)`` largest observations are exceedances and the
threshold is the (k+1)-th largest value. That makes every estimator here
invariant under rescaling of the data.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import distributions as dist
from .distributions import LawSpec, RngStream
from .errors import InsufficientTailError, ParameterError, PreconditionError
from .panel import Panel
from .volatility_field import (
    CoefficientField,
    eta_window_shape,
    lambda_set,
    log_sigma_from_eta,
    psi_exponent,
)

DEFAULT_Q = 0.97


def n_exceedances(n: int, q: float) -> int:
    if not 0.0 < q < 1.0:
        raise ParameterError(f"threshold quantile must lie in (0, 1), got {q}", "threshold_quantile")
    # the epsilon keeps e.g. (1 - 0.97) * 100000 = 3000.0000000000027 at 3000
    return min(n - 1, max(0, math.ceil((1.0 - q) * n - 1e-9)))


@dataclass(frozen=True)
class TailReport:
    hill_index: float
    threshold: float
    k_exceedances: int
    balance: tuple[float, float] | None = None

    def to_dict(self) -> dict:
        return {
            "hill_index": self.hill_index,
            "threshold": self.threshold,
            "k_exceedances": self.k_exceedances,
            "p_plus": None if self.balance is None else self.balance[0],
            "p_minus": None if self.balance is None else self.balance[1],
        }


def hill(data, threshold_quantile: float = DEFAULT_Q, upper_tail: bool = False) -> TailReport:
    """Hill estimate k / sum_{i<=k} log(X_(i) / X_(k+1)) over the k largest values.

    By default the data must be non-negative. With ``upper_tail=True`` any
    real data is accepted as long as the threshold order statistic is positive.
    """
    x = np.asarray(data, dtype=float).ravel()
    if x.size and not np.all(np.isfinite(x)):
        raise ParameterError("Hill estimation needs finite data", "data")
    if not upper_tail and np.any(x < 0):
        raise ParameterError("Hill estimation needs non-negative data", "data")
    k = n_exceedances(x.size, threshold_quantile)
    if k < 2:
        raise InsufficientTailError(f"only {k} exceedances (need >= 2) from {x.size} observations")
    top = np.sort(x)[::-1][: k + 1]
    u = top[k]
    if not u > 0:
        raise InsufficientTailError("threshold order statistic is not positive")
    s = math.fsum(np.log(top[:k] / u).tolist())
    if not s > 0:
        raise InsufficientTailError("all exceedances tie with the threshold; tail is degenerate")
    return TailReport(hill_index=k / s, threshold=float(u), k_exceedances=k)


@dataclass(frozen=True)
class HillMatrix:
    """Symmetric p x p grid of Hill indices; entries that could not be estimated are None."""

    values: np.ndarray
    missing: np.ndarray
    threshold_quantile: float

    @property
    def p(self) -> int:
        return self.values.shape[0]

    def get(self, i: int, j: int) -> float | None:
        return None if self.missing[i, j] else float(self.values[i, j])

    def to_rows(self) -> list[list[float | None]]:
        return [[self.get(i, j) for j in range(self.p)] for i in range(self.p)]

    def to_json(self) -> dict:
        return {"threshold_quantile": self.threshold_quantile, "hill": self.to_rows()}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["series"] + [f"s{j + 1}" for j in range(self.p)])
        for i, row in enumerate(self.to_rows()):
            w.writerow([f"s{i + 1}"] + ["" if v is None else repr(v) for v in row])
        return buf.getvalue()


def hill_matrix(panel: Panel | np.ndarray, threshold_quantile: float = DEFAULT_Q) -> HillMatrix:
    x = panel.values if isinstance(panel, Panel) else np.asarray(panel, dtype=float)
    p = x.shape[0]
    vals = np.zeros((p, p))
    miss = np.zeros((p, p), dtype=bool)
    for i in range(p):
        for j in range(i, p):
            try:
                h = hill(np.abs(x[i] * x[j]), threshold_quantile).hill_index
            except InsufficientTailError:
                miss[i, j] = miss[j, i] = True
                continue
            vals[i, j] = vals[j, i] = h
    return HillMatrix(vals, miss, threshold_quantile)


def tail_balance(data, threshold_quantile: float = DEFAULT_Q) -> tuple[float, float]:
    """Shares of the largest |x| that come from the right and left tails."""
    x = np.asarray(data, dtype=float).ravel()
    k = n_exceedances(x.size, threshold_quantile)
    if k < 1:
        raise InsufficientTailError("no exceedances")
    order = np.argsort(-np.abs(x), kind="stable")
    u = abs(x[order[k]])
    top = x[order[:k]]
    top = top[np.abs(top) > u]
    if top.size == 0:
        raise InsufficientTailError("no observation strictly exceeds the threshold")
    p_plus = int(np.sum(top > 0)) / top.size
    return p_plus, 1.0 - p_plus


@dataclass(frozen=True)
class LagEstimate:
    lag: int
    estimate: float
    se: float
    count: int

    def to_dict(self) -> dict:
        return {"lag": self.lag, "estimate": self.estimate, "se": self.se, "count": self.count}


def rows_to_csv(rows: Sequence[dict]) -> str:
    if not rows:
        return ""
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})
    return buf.getvalue()


def _rank_threshold(a: np.ndarray, q: float) -> float:
    k = n_exceedances(a.size, q)
    if k < 1:
        raise InsufficientTailError("no exceedances")
    return float(np.partition(a, a.size - k - 1)[a.size - k - 1])


def extremogram(series, lags: Sequence[int], threshold_quantile: float = DEFAULT_Q, min_count: int = 20) -> list[LagEstimate]:
    """P(|X_{t+h}| > u | |X_t| > u) per lag, u the rank threshold of |X| (plug-in, no bias correction)."""
    a = np.abs(np.asarray(series, dtype=float).ravel())
    u = _rank_threshold(a, threshold_quantile)
    exc = a > u
    out = []
    for h in lags:
        h = int(h)
        if h < 0 or h >= a.size:
            raise ParameterError(f"lag {h} out of range for series of length {a.size}", "lags")
        base = exc[: a.size - h]
        k = int(base.sum())
        if k < min_count:
            raise InsufficientTailError(f"lag {h}: only {k} conditioning exceedances (need >= {min_count})")
        est = int(np.sum(base & exc[h:])) / k
        out.append(LagEstimate(h, est, math.sqrt(est * (1.0 - est) / k), k))
    return out


@dataclass(frozen=True)
class Proportion:
    estimate: float
    se: float
    count: int


def angular_concentration(
    panel: Panel | np.ndarray, threshold_quantile: float = DEFAULT_Q, axis_epsilon: float = 0.1, min_count: int = 20
) -> Proportion:
    """Share of extreme vectors X_t / |X_t|_max lying within epsilon of a signed basis vector.

    Max-norm throughout: a vector counts when all coordinates except the
    largest are below ``axis_epsilon`` in absolute value.
    """
    x = panel.values if isinstance(panel, Panel) else np.asarray(panel, dtype=float)
    norms = np.max(np.abs(x), axis=0)
    u = _rank_threshold(norms, threshold_quantile)
    sel = norms > u
    k = int(sel.sum())
    if k < min_count:
        raise InsufficientTailError(f"only {k} extreme vectors (need >= {min_count})")
    w = np.abs(x[:, sel]) / norms[sel]
    if w.shape[0] == 1:
        near = np.ones(k, dtype=bool)
    else:
        second = np.sort(w, axis=0)[-2]
        near = second < axis_epsilon
    est = float(near.mean())
    return Proportion(est, math.sqrt(est * (1.0 - est) / k), k)


# ---------------------------------------------------------------------------
# tail process of product series


@dataclass(frozen=True)
class LagInterval:
    """Constraint low < Theta_lag < high (on |Theta_lag| when ``absolute``)."""

    lag: int
    low: float = -math.inf
    high: float = math.inf
    absolute: bool = False

    def holds(self, values: np.ndarray) -> np.ndarray:
        v = np.abs(values) if self.absolute else values
        return (v > self.low) & (v < self.high)


@dataclass(frozen=True)
class MixtureResult:
    regime: str
    estimate: float
    band: tuple[float, float]
    empirical: float | None = None
    empirical_se: float | None = None
    empirical_count: int = 0
    lambda_size: int = 0

    def to_dict(self) -> dict:
        return {
            "regime": self.regime,
            "estimate": self.estimate,
            "band_low": self.band[0],
            "band_high": self.band[1],
            "empirical": self.empirical,
            "empirical_se": self.empirical_se,
            "empirical_count": self.empirical_count,
            "lambda_size": self.lambda_size,
        }


N_BLOCKS = 32


def median_of_means(values: np.ndarray, weights: np.ndarray | None = None, blocks: int = N_BLOCKS):
    """Median over blocks of block ratios sum(values*w)/sum(w), with a 95% band.

    The band uses the normal approximation for a sample median with the block
    spread estimated by the scaled median absolute deviation.
    """
    values = np.asarray(values, dtype=float)
    w = np.ones_like(values) if weights is None else np.asarray(weights, dtype=float)
    if values.size < blocks:
        raise ParameterError(f"need at least {blocks} draws for median-of-means", "mc_budget")
    parts_v = np.array_split(values * w, blocks)
    parts_w = np.array_split(w, blocks)
    est = np.array([math.fsum(v.tolist()) / math.fsum(ww.tolist()) for v, ww in zip(parts_v, parts_w)])
    med = float(np.median(est))
    mad = float(np.median(np.abs(est - med)))
    half = 1.96 * math.sqrt(math.pi / 2) * 1.4826 * mad / math.sqrt(blocks)
    return med, (med - half, med + half)


def _pair_paths(field, eta_law, z_law, i, j, lags_n, size, gen):
    """Joint draws of (X_it X_jt)_{t=0..lags_n} for ``size`` independent copies."""
    lo = min(i, j)
    rows = abs(i - j) + 1
    T = lags_n + 1
    noise = dist.draw(eta_law, gen, (size,) + eta_window_shape(field, rows, T))
    ls = log_sigma_from_eta(field, noise, rows, T)
    z = dist.draw(z_law, gen, (size, 2, T))
    if i == j:
        z[:, 1] = z[:, 0]
    xi = np.exp(ls[:, i - lo, :]) * z[:, 0]
    xj = np.exp(ls[:, j - lo, :]) * z[:, 1]
    return xi * xj


def _box_probability_infinite_moment(box, i, j, z_law, a, stream, budget):
    """Theta_t = 0 for t >= 1; Theta_0 = +-1 with Breiman weights on Z_i Z_j."""
    if i == j:
        p_plus = 1.0
    else:
        z = dist.draw(z_law, stream.generator, (budget, 2))
        prod = z[:, 0] * z[:, 1]
        wp = math.fsum((np.maximum(prod, 0.0) ** a).tolist())
        wm = math.fsum((np.maximum(-prod, 0.0) ** a).tolist())
        p_plus = wp / (wp + wm)
    prob = 0.0
    for sign, mass in ((1.0, p_plus), (-1.0, 1.0 - p_plus)):
        ok = True
        for c in box:
            val = sign if c.lag == 0 else 0.0
            ok &= bool(c.holds(np.array([val]))[0])
        prob += mass if ok else 0.0
    return prob


def tail_process_mixture(
    field: CoefficientField,
    i: int,
    j: int,
    eta_law: LawSpec,
    z_law: LawSpec,
    box: Sequence[LagInterval],
    mc_budget: int = 2**18,
    stream: RngStream | None = None,
    empirical_n: int | None = None,
    empirical_q: float = 0.999,
) -> MixtureResult:
    """Probability that the spectral tail process of (X_it X_jt) lies in ``box``.

    Convolution-equivalent noise: Monte Carlo evaluation of the weighted
    mixture over the Lambda-set, one component per noise location that can
    drive the product to an extreme. Each component reweights ordinary model
    draws by |X_i0 X_j0|^(alpha/psi). The weights have infinite variance, so
    the estimate is a median of 32 block means with a 95% band.

    Noise with E[exp(alpha eta)] = inf: the closed form (Theta_t = 0 for t >= 1)
    is used and the band is degenerate.

    With ``empirical_n`` set, the conditional frequency of the box given
    |X_i0 X_j0| above its ``empirical_q`` rank threshold is also computed from
    one long simulated path, with a binomial standard error.
    """
    if stream is None:
        stream = RngStream(0, 0)
    if not box:
        raise ParameterError("box needs at least one lag constraint", "box")
    if any(c.lag < 0 for c in box):
        raise ParameterError("box lags must be >= 0", "box")
    alpha = dist.exp_tail_index(eta_law)
    if eta_law.kind == "exponential":
        regime = "infinite_moment"
    elif eta_law.kind == "conv_equiv_eta":
        regime = "conv_equivalent"
    else:
        raise PreconditionError(f"eta law {eta_law.kind} gives no regularly varying volatility")
    if math.isfinite(dist.tail_index(z_law)):
        raise PreconditionError("z_law must be light-tailed for the volatility-driven regime")
    top_exp = psi_exponent(field, i - j)
    a = alpha / top_exp
    T = max(c.lag for c in box)
    lam0 = lambda_set(field, i, j, 0)

    if regime == "infinite_moment":
        est = _box_probability_infinite_moment(box, i, j, z_law, a, stream.child(0), mc_budget)
        band = (est, est)
    else:
        lam_t = [lambda_set(field, i, j, t).indices for t in range(T + 1)]
        comps = lam0.sorted()
        gen = stream.child(0).generator
        prods = _pair_paths(field, eta_law, z_law, i, j, T, mc_budget, gen)
        base = np.abs(prods[:, 0])
        ratios = prods / base[:, None]
        w = base**a
        hit = np.zeros(mc_budget)
        for u, v in comps:
            ok = np.ones(mc_budget, dtype=bool)
            for c in box:
                ind = 1.0 if (u, v) in lam_t[c.lag] else 0.0
                ok &= c.holds(ind * ratios[:, c.lag])
            hit += ok
        hit /= len(comps)
        est, band = median_of_means(hit, w)

    emp = emp_se = None
    emp_k = 0
    if empirical_n:
        gen = stream.child(1).generator
        rows = abs(i - j) + 1
        lo = min(i, j)
        n_tot = empirical_n + T
        noise = dist.draw(eta_law, gen, eta_window_shape(field, rows, n_tot))
        ls = log_sigma_from_eta(field, noise, rows, n_tot)
        z = dist.draw(z_law, gen, (rows, n_tot))
        x = np.exp(ls) * z
        y = x[i - lo] * x[j - lo]
        base = np.abs(y[:empirical_n])
        u = _rank_threshold(base, empirical_q)
        idx = np.nonzero(base > u)[0]
        ok = np.ones(idx.size, dtype=bool)
        for c in box:
            ok &= c.holds(y[idx + c.lag] / base[idx])
        emp_k = int(idx.size)
        if emp_k == 0:
            raise InsufficientTailError("no exceedances on the empirical path")
        emp = float(ok.mean())
        emp_se = math.sqrt(emp * (1.0 - emp) / emp_k)
    return MixtureResult(regime, float(est), (float(band[0]), float(band[1])), emp, emp_se, emp_k, len(lam0))
