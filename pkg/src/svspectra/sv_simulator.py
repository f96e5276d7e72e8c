"""Stochastic volatility panels X = sigma * Z and their normalising sequences."""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field, replace
from typing import Any, Mapping

import numpy as np

from . import distributions as dist
from .distributions import LawSpec, RngStream
from .errors import BudgetError, ConfigError, ParameterError
from .panel import Panel
from .volatility_field import (
    CoefficientField,
    eta_window_shape,
    field_from_config,
    log_sigma_from_eta,
    preset_field,
    simulate_sigma_panel,
)

REGIMES = ("case1_heavy_Z", "case2_heavy_sigma")
PRESETS = ("case1", "case2_exp", "case2_convequiv")

ETA_STREAM = 1
Z_STREAM = 2
MC_STREAM = 3


def _heavy_z(law: LawSpec) -> bool:
    return math.isfinite(dist.tail_index(law))


def _light_eta(law: LawSpec) -> bool:
    return law.kind in ("gaussian", "constant", "uniform")


def _rv_eta(law: LawSpec) -> bool:
    return law.kind in ("exponential", "conv_equiv_eta")


@dataclass(frozen=True)
class ModelSpec:
    regime: str
    z_law: LawSpec
    eta_law: LawSpec
    field: CoefficientField
    p: int = 18
    n: int = 1567
    master_seed: int = 0
    name: str | None = dc_field(default=None, compare=False)

    def __post_init__(self):
        problems = []
        if self.regime not in REGIMES:
            problems.append(f"regime must be one of {REGIMES}, got {self.regime!r}")
        if not isinstance(self.p, int) or self.p < 1:
            problems.append("p >= 1")
        if not isinstance(self.n, int) or self.n < 1:
            problems.append("n >= 1")
        if self.regime == "case1_heavy_Z":
            if not _heavy_z(self.z_law):
                problems.append(f"case1_heavy_Z needs a heavy-tailed z_law, got {self.z_law.kind}")
            if not _light_eta(self.eta_law):
                problems.append(f"case1_heavy_Z needs a light-tailed eta_law, got {self.eta_law.kind}")
        elif self.regime == "case2_heavy_sigma":
            if _heavy_z(self.z_law):
                problems.append(f"case2_heavy_sigma needs a light-tailed z_law, got {self.z_law.kind}")
            if not _rv_eta(self.eta_law):
                problems.append(
                    f"case2_heavy_sigma needs exp(eta) regularly varying, got eta_law {self.eta_law.kind}"
                )
        if problems:
            raise ConfigError("invalid model: " + "; ".join(problems))

    @property
    def alpha(self) -> float:
        """Tail index of the marginal |X|."""
        return marginal_tail_index(self)

    def with_seed(self, seed: int) -> "ModelSpec":
        return replace(self, master_seed=seed)

    def resized(self, p: int | None = None, n: int | None = None) -> "ModelSpec":
        return replace(self, p=self.p if p is None else p, n=self.n if n is None else n)

    def to_dict(self) -> dict[str, Any]:
        return {
            "regime": self.regime,
            "z_law": self.z_law.to_dict(),
            "eta_law": self.eta_law.to_dict(),
            "field": self.field.to_json(),
            "p": self.p,
            "n": self.n,
            "master_seed": self.master_seed,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "ModelSpec":
        missing = [k for k in ("regime", "z_law", "eta_law", "field") if k not in d]
        if missing:
            raise ConfigError(f"model spec missing fields: {', '.join(missing)}")
        return cls(
            regime=d["regime"],
            z_law=LawSpec.from_dict(d["z_law"]),
            eta_law=LawSpec.from_dict(d["eta_law"]),
            field=field_from_config(d["field"]),
            p=int(d.get("p", 18)),
            n=int(d.get("n", 1567)),
            master_seed=int(d.get("master_seed", 0)),
        )


def preset(name: str, p: int = 18, n: int = 1567, seed: int = 0) -> ModelSpec:
    ma18 = preset_field("ma18")
    if name == "case1":
        return ModelSpec("case1_heavy_Z", LawSpec.student_t(3), LawSpec.gaussian(0, 1), ma18, p, n, seed, name)
    if name == "case2_exp":
        return ModelSpec("case2_heavy_sigma", LawSpec.gaussian(0, 1), LawSpec.exponential(3), ma18, p, n, seed, name)
    if name == "case2_convequiv":
        return ModelSpec(
            "case2_heavy_sigma", LawSpec.gaussian(0, 1), LawSpec.conv_equiv_eta(), ma18, p, n, seed, name
        )
    raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")


def spec_from_config(value, **overrides) -> ModelSpec:
    """Accept a preset name or a model dict; apply p/n/seed overrides."""
    if isinstance(value, ModelSpec):
        spec = value
    elif isinstance(value, str):
        spec = preset(value)
    elif isinstance(value, Mapping):
        spec = ModelSpec.from_dict(value)
    else:
        raise ConfigError(f"cannot build a model from {type(value).__name__}")
    kw = {k: v for k, v in overrides.items() if v is not None}
    if "seed" in kw:
        kw["master_seed"] = kw.pop("seed")
    return replace(spec, **kw) if kw else spec


def marginal_tail_index(spec: ModelSpec) -> float:
    if spec.regime == "case1_heavy_Z":
        return dist.tail_index(spec.z_law)
    # exp(w * eta) has index rate / w; the max weight is 1
    return dist.exp_tail_index(spec.eta_law)


def simulate_sigma(spec: ModelSpec, eta_stream: int = ETA_STREAM) -> Panel:
    return simulate_sigma_panel(spec.field, spec.eta_law, spec.p, spec.n, RngStream(spec.master_seed, eta_stream))


def simulate_panel(spec: ModelSpec, eta_stream: int = ETA_STREAM, z_stream: int = Z_STREAM) -> Panel:
    """X[i, t] = sigma[i, t] * Z[i, t]; sigma and Z come from disjoint streams."""
    vol = simulate_sigma(spec, eta_stream)
    z = dist.sample(spec.z_law, RngStream(spec.master_seed, z_stream), spec.p * spec.n).reshape(spec.p, spec.n)
    return Panel(vol.values * z, role="X")


# ---------------------------------------------------------------------------
# normalising sequences


@dataclass(frozen=True)
class NormSeq:
    n: int
    a_n: float
    c_n: float
    b_n: float | None = None
    method: str = "mc"
    alpha: float = math.nan


class MarginalPool:
    """Pooled iid draws of |X| (and optionally |X_i0 X_j0|) for one model.

    Sharing one pool across several n makes the a_n sequence monotone in n.
    """

    CHUNK = 1 << 17

    def __init__(self, spec: ModelSpec, budget: int = 10**6, pair: tuple[int, int] | None = None, stream_id: int = MC_STREAM):
        if budget < 10**4:
            raise BudgetError(f"mc_budget must be >= 10^4, got {budget}")
        self.spec = spec
        self.budget = int(budget)
        stream = RngStream(spec.master_seed, stream_id)
        self.abs_x, self.x2_mean = self._marginal(stream.child(0))
        self.abs_pair = self._pair(stream.child(1), pair) if pair is not None else None
        self.pair = pair

    def _chunks(self):
        left = self.budget
        while left > 0:
            m = min(left, self.CHUNK)
            yield m
            left -= m

    def _marginal(self, stream: RngStream):
        spec = self.spec
        gen = stream.generator
        # one output cell needs one eta per field weight; the draws are iid
        w = np.array([wt for _, wt in spec.field.weights])
        out = np.empty(self.budget)
        pos = 0
        for m in self._chunks():
            noise = dist.draw(spec.eta_law, gen, (m, w.size))
            z = dist.draw(spec.z_law, gen, m)
            out[pos : pos + m] = np.exp(noise @ w) * z
            pos += m
        x2 = math.fsum((out * out).tolist()) / self.budget
        return np.sort(np.abs(out)), x2

    def _pair(self, stream: RngStream, pair: tuple[int, int]):
        spec = self.spec
        i, j = pair
        gen = stream.generator
        lo = min(i, j)
        rows = abs(i - j) + 1
        shape = eta_window_shape(spec.field, rows, 1)
        out = np.empty(self.budget)
        pos = 0
        for m in self._chunks():
            noise = dist.draw(spec.eta_law, gen, (m,) + shape)
            ls = log_sigma_from_eta(spec.field, noise, rows, 1)[..., 0]
            z = dist.draw(spec.z_law, gen, (m, 2))
            xi = np.exp(ls[:, i - lo]) * z[:, 0]
            xj = np.exp(ls[:, j - lo]) * z[:, 1]
            out[pos : pos + m] = np.abs(xi * xj)
            pos += m
        return np.sort(out)


def _upper_quantile(sorted_vals: np.ndarray, n: int) -> float:
    return float(np.quantile(sorted_vals, 1.0 - 1.0 / n, method="inverted_cdf"))


def norm_sequences(
    spec: ModelSpec,
    n: int | None = None,
    mc_budget: int = 10**6,
    pool: MarginalPool | None = None,
    pair: tuple[int, int] | None = None,
) -> NormSeq:
    """a_n with n P(|X| > a_n) ~ 1, centring c_n, and optionally b_n for a pair.

    a_n is analytic when volatility is constant (eta degenerate); otherwise
    it is an empirical quantile of pooled iid draws of the marginal.
    """
    n = spec.n if n is None else int(n)
    if n < 1:
        raise ParameterError("n must be >= 1", "n")
    alpha = marginal_tail_index(spec)
    if pool is None and (mc_budget < 10**4 or mc_budget < n):
        raise BudgetError(f"mc_budget={mc_budget} too small for n={n} (need >= max(10^4, n))")
    if pool is not None and pool.budget < n:
        raise BudgetError(f"pooled budget {pool.budget} < n={n}")

    need_pool = pair is not None or spec.eta_law.kind != "constant"
    if need_pool and pool is None:
        pool = MarginalPool(spec, mc_budget, pair)
    if pair is not None and (pool.abs_pair is None or pool.pair != pair):
        raise ParameterError("pool was built for a different pair", "pair")

    if spec.eta_law.kind == "constant":
        scale = math.exp(spec.eta_law["value"] * sum(w for _, w in spec.field.weights))
        a_n = scale * dist.abs_quantile(spec.z_law, 1.0 - 1.0 / n)
        x2 = scale**2 * dist.second_moment(spec.z_law)
        method = "analytic"
    else:
        a_n = _upper_quantile(pool.abs_x, n)
        x2 = pool.x2_mean
        method = "mc"
    c_n = n * x2 if 2 < alpha < 4 else 0.0
    b_n = _upper_quantile(pool.abs_pair, n) if pair is not None else None
    return NormSeq(n=n, a_n=a_n, c_n=c_n, b_n=b_n, method=method, alpha=alpha)
