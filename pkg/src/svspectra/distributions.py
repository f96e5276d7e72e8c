"""Seeded samplers and survival/quantile functions for the laws used by the models.

Random streams
--------------
An :class:`RngStream` is identified by ``(master_seed, stream_id)``. Its child
seed is::

    child = splitmix64(splitmix64(master_seed) ^ splitmix64(stream_id + GOLDEN))

with the standard SplitMix64 finalizer (increment ``0x9E3779B97F4A7C15``,
multipliers ``0xBF58476D1CE4E5B9`` and ``0x94D049BB133111EB``, shifts 30/27/31)
and ``GOLDEN = 0x632BE59BD9B4E019``. The child seed drives a numpy ``PCG64``
bit generator. Sequences are bit-identical for a fixed numpy version; numpy
reserves the right to change non-uniform samplers (e.g. ``standard_t``)
between releases.

Stable laws
-----------
``stable(alpha, beta, scale, location)`` uses the S1 parameterization
(Samorodnitsky-Taqqu), the same as ``scipy.stats.levy_stable``'s default.
For ``alpha < 1`` and ``beta = 1`` the support is ``[location, inf)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Mapping

import numpy as np
from scipy import stats

from .errors import NumericError, ParameterError

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x632BE59BD9B4E019


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def derive_seed(*keys: int) -> int:
    """Fold any number of integer keys into one 64-bit seed."""
    acc = splitmix64(0)
    for key in keys:
        acc = splitmix64(acc ^ splitmix64((int(key) + _GOLDEN) & _MASK64))
    return acc


class RngStream:
    """A reproducible random stream.

    The stream is stateful: successive draws continue the sequence. Two
    ``RngStream`` objects built from the same ``(master_seed, stream_id)``
    produce identical sequences. Do not share one stream between threads.
    """

    def __init__(self, master_seed: int, stream_id: int = 0):
        if not (0 <= int(master_seed) <= _MASK64):
            raise ParameterError("master_seed must fit in 64 bits", "master_seed")
        if not (0 <= int(stream_id) <= _MASK64):
            raise ParameterError("stream_id must fit in 64 bits", "stream_id")
        self.master_seed = int(master_seed)
        self.stream_id = int(stream_id)
        self.seed = splitmix64(
            splitmix64(self.master_seed) ^ splitmix64((self.stream_id + _GOLDEN) & _MASK64)
        )
        self._gen: np.random.Generator | None = None

    @property
    def generator(self) -> np.random.Generator:
        if self._gen is None:
            self._gen = np.random.Generator(np.random.PCG64(self.seed))
        return self._gen

    def child(self, stream_id: int) -> "RngStream":
        """An independent stream keyed off this stream's seed."""
        return RngStream(self.seed, stream_id)

    def fresh(self) -> "RngStream":
        return RngStream(self.master_seed, self.stream_id)

    def __repr__(self) -> str:
        return f"RngStream(master_seed={self.master_seed}, stream_id={self.stream_id})"


# kind -> (required params, defaults)
_KINDS: dict[str, tuple[tuple[str, ...], dict[str, float]]] = {
    "pareto": (("alpha",), {"x_min": 1.0}),
    "student_t": (("nu",), {}),
    "gaussian": ((), {"mean": 0.0, "sd": 1.0}),
    "exponential": (("rate",), {}),
    "conv_equiv_eta": ((), {"rate": 3.0, "power": 2.0}),
    "stable": (("alpha",), {"beta": 0.0, "scale": 1.0, "location": 0.0}),
    "uniform": ((), {"low": 0.0, "high": 1.0}),
    "constant": ((), {"value": 0.0}),
}


@dataclass(frozen=True)
class LawSpec:
    """A named distribution with validated parameters.

    ``conv_equiv_eta`` is the law with survival ``(1+x)^-power * exp(-rate*x)``
    on ``[0, inf)``; with the defaults its exponential has a regularly varying
    tail of index 3 and is convolution equivalent.
    """

    kind: str
    params: tuple[tuple[str, float], ...]

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ParameterError(f"unknown law kind {self.kind!r}", "kind")
        required, defaults = _KINDS[self.kind]
        given = dict(self.params)
        for name in given:
            if name not in required and name not in defaults:
                raise ParameterError(f"{self.kind}: unknown parameter {name!r}", name)
        for name in required:
            if name not in given:
                raise ParameterError(f"{self.kind}: missing parameter {name!r}", name)
        full = {**defaults, **given}
        for name, value in full.items():
            if not isinstance(value, (int, float)) or isinstance(value, bool) or not math.isfinite(value):
                raise ParameterError(f"{self.kind}: {name} must be a finite number", name)
        _validate(self.kind, full)
        object.__setattr__(self, "params", tuple(sorted((k, float(v)) for k, v in full.items())))

    def __getitem__(self, name: str) -> float:
        return dict(self.params)[name]

    @property
    def p(self) -> dict[str, float]:
        return dict(self.params)

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, **self.p}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "LawSpec":
        if "kind" not in d:
            raise ParameterError("law specification needs a 'kind'", "kind")
        d = dict(d)
        kind = d.pop("kind")
        return cls(kind, tuple(d.items()))

    @classmethod
    def make(cls, kind: str, **params: float) -> "LawSpec":
        return cls(kind, tuple(params.items()))

    # convenience constructors
    @classmethod
    def pareto(cls, alpha: float, x_min: float = 1.0) -> "LawSpec":
        return cls.make("pareto", alpha=alpha, x_min=x_min)

    @classmethod
    def student_t(cls, nu: float) -> "LawSpec":
        return cls.make("student_t", nu=nu)

    @classmethod
    def gaussian(cls, mean: float = 0.0, sd: float = 1.0) -> "LawSpec":
        return cls.make("gaussian", mean=mean, sd=sd)

    @classmethod
    def exponential(cls, rate: float) -> "LawSpec":
        return cls.make("exponential", rate=rate)

    @classmethod
    def conv_equiv_eta(cls, rate: float = 3.0, power: float = 2.0) -> "LawSpec":
        return cls.make("conv_equiv_eta", rate=rate, power=power)

    @classmethod
    def stable(cls, alpha: float, beta: float = 0.0, scale: float = 1.0, location: float = 0.0) -> "LawSpec":
        return cls.make("stable", alpha=alpha, beta=beta, scale=scale, location=location)

    @classmethod
    def uniform(cls, low: float = 0.0, high: float = 1.0) -> "LawSpec":
        return cls.make("uniform", low=low, high=high)

    @classmethod
    def constant(cls, value: float = 0.0) -> "LawSpec":
        return cls.make("constant", value=value)


def _validate(kind: str, p: dict[str, float]) -> None:
    def positive(name):
        if not p[name] > 0:
            raise ParameterError(f"{kind}: {name} must be > 0, got {p[name]}", name)

    if kind == "pareto":
        positive("alpha")
        positive("x_min")
    elif kind == "student_t":
        positive("nu")
    elif kind == "gaussian":
        positive("sd")
    elif kind == "exponential":
        positive("rate")
    elif kind == "conv_equiv_eta":
        positive("rate")
        if p["power"] < 0:
            raise ParameterError("conv_equiv_eta: power must be >= 0", "power")
    elif kind == "stable":
        if not 0 < p["alpha"] <= 2:
            raise ParameterError(f"stable: alpha must lie in (0, 2], got {p['alpha']}", "alpha")
        if not -1 <= p["beta"] <= 1:
            raise ParameterError(f"stable: beta must lie in [-1, 1], got {p['beta']}", "beta")
        positive("scale")
    elif kind == "uniform":
        if not p["low"] < p["high"]:
            raise ParameterError("uniform: need low < high", "high")


# ---------------------------------------------------------------------------
# sampling


def _conv_equiv_inverse(log_surv: np.ndarray, rate: float, power: float) -> np.ndarray:
    """Solve power*log1p(x) + rate*x = -log_surv for x >= 0 (vectorized Newton).

    The left side is increasing and concave, so starting from the upper bound
    ``-log_surv/rate`` the first step lands left of the root and the iteration
    then increases monotonically.
    """
    target = -np.asarray(log_surv, dtype=float)
    x = target / rate
    if power == 0.0:
        return x
    for _ in range(100):
        g = power * np.log1p(x) + rate * x - target
        step = g / (power / (1.0 + x) + rate)
        x = np.maximum(x - step, 0.0)
        if np.all(np.abs(step) <= 4e-16 * (1.0 + x)):
            break
    return x


def _cms_stable(gen: np.random.Generator, alpha: float, beta: float, size) -> np.ndarray:
    """Chambers-Mallows-Stuck draws of a standard S1 stable variate."""
    v = gen.uniform(-np.pi / 2, np.pi / 2, size)
    w = gen.standard_exponential(size)
    if alpha == 1.0:
        half_pi_bv = np.pi / 2 + beta * v
        return (2 / np.pi) * (
            half_pi_bv * np.tan(v) - beta * np.log((np.pi / 2) * w * np.cos(v) / half_pi_bv)
        )
    zeta = beta * math.tan(np.pi * alpha / 2)
    b = math.atan(zeta) / alpha
    s = (1 + zeta * zeta) ** (1 / (2 * alpha))
    arg = alpha * (v + b)
    return (
        s
        * np.sin(arg)
        / np.cos(v) ** (1 / alpha)
        * (np.cos(v - arg) / w) ** ((1 - alpha) / alpha)
    )


def draw(law: LawSpec, gen: np.random.Generator, size) -> np.ndarray:
    """Vectorized draws of ``law`` from a numpy generator (any output shape)."""
    p = law.p
    k = law.kind
    if k == "pareto":
        return p["x_min"] * (1.0 - gen.random(size)) ** (-1.0 / p["alpha"])
    if k == "student_t":
        return gen.standard_t(p["nu"], size)
    if k == "gaussian":
        return gen.normal(p["mean"], p["sd"], size)
    if k == "exponential":
        return gen.exponential(1.0 / p["rate"], size)
    if k == "conv_equiv_eta":
        return _conv_equiv_inverse(np.log1p(-gen.random(size)), p["rate"], p["power"])
    if k == "stable":
        x = _cms_stable(gen, p["alpha"], p["beta"], size)
        if p["alpha"] == 1.0:
            g = p["scale"]
            return g * x + (2 / np.pi) * p["beta"] * g * math.log(g) + p["location"]
        return p["scale"] * x + p["location"]
    if k == "uniform":
        return gen.uniform(p["low"], p["high"], size)
    if k == "constant":
        return np.full(size, p["value"], dtype=float)
    raise AssertionError(k)


def sample(law: LawSpec, stream: RngStream, count: int) -> np.ndarray:
    if count < 0:
        raise ParameterError("count must be >= 0", "count")
    return draw(law, stream.generator, int(count))


def stable_sample(
    alpha: float,
    beta: float = 1.0,
    scale: float = 1.0,
    location: float = 0.0,
    stream: RngStream | None = None,
    count: int = 1,
) -> np.ndarray:
    law = LawSpec.stable(alpha, beta, scale, location)
    if stream is None:
        raise ParameterError("stable_sample needs an RngStream", "stream")
    return sample(law, stream, count)


# ---------------------------------------------------------------------------
# survival / quantile


def survival(law: LawSpec, x):
    """P(X > x); works elementwise on arrays."""
    p = law.p
    k = law.kind
    xa = np.asarray(x, dtype=float)
    if k == "pareto":
        with np.errstate(divide="ignore"):
            out = np.where(xa <= p["x_min"], 1.0, (np.maximum(xa, p["x_min"]) / p["x_min"]) ** -p["alpha"])
    elif k == "student_t":
        out = stats.t.sf(xa, p["nu"])
    elif k == "gaussian":
        out = stats.norm.sf(xa, p["mean"], p["sd"])
    elif k == "exponential":
        out = np.where(xa <= 0, 1.0, np.exp(-p["rate"] * np.maximum(xa, 0.0)))
    elif k == "conv_equiv_eta":
        xp = np.maximum(xa, 0.0)
        out = np.where(xa <= 0, 1.0, (1.0 + xp) ** -p["power"] * np.exp(-p["rate"] * xp))
    elif k == "stable":
        out = stats.levy_stable.sf(xa, p["alpha"], p["beta"], loc=p["location"], scale=p["scale"])
    elif k == "uniform":
        out = np.clip((p["high"] - xa) / (p["high"] - p["low"]), 0.0, 1.0)
    elif k == "constant":
        out = np.where(xa < p["value"], 1.0, 0.0)
    else:  # pragma: no cover
        raise AssertionError(k)
    return float(out) if np.ndim(out) == 0 else out


def quantile(law: LawSpec, u: float, tol: float = 1e-10, max_iter: int = 4000) -> float:
    """Inverse of the CDF at probability ``u`` in (0, 1).

    Closed forms are used where they exist; otherwise bisection on the
    survival function with an expanding bracket. The result satisfies
    ``|survival(q) - (1-u)| <= tol``.
    """
    if not 0.0 < u < 1.0:
        raise ParameterError(f"quantile level must lie in (0, 1), got {u}", "u")
    p = law.p
    k = law.kind
    if k == "pareto":
        return p["x_min"] * (1.0 - u) ** (-1.0 / p["alpha"])
    if k == "exponential":
        return -math.log1p(-u) / p["rate"]
    if k == "uniform":
        return p["low"] + u * (p["high"] - p["low"])
    if k == "constant":
        return p["value"]
    if k == "gaussian":
        return float(stats.norm.ppf(u, p["mean"], p["sd"]))
    if k == "student_t":
        return float(stats.t.ppf(u, p["nu"]))
    return _bisect_quantile(law, 1.0 - u, tol, max_iter)


def _bisect_quantile(law: LawSpec, target: float, tol: float, max_iter: int) -> float:
    lo, hi = (0.0, 1.0) if law.kind == "conv_equiv_eta" else (-1.0, 1.0)
    it = 0
    while survival(law, hi) > target:
        hi = hi * 2 if hi > 0 else 1.0
        it += 1
        if it > 2000:
            raise NumericError(f"could not bracket quantile of {law.kind}")
    while survival(law, lo) < target:
        lo = lo * 2 if lo < 0 else -1.0
        it += 1
        if it > 2000:
            raise NumericError(f"could not bracket quantile of {law.kind}")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if survival(law, mid) > target:
            lo = mid
        else:
            hi = mid
    else:
        raise NumericError(f"bisection for {law.kind} quantile did not converge")
    best = min((lo, hi), key=lambda z: abs(survival(law, z) - target))
    if abs(survival(law, best) - target) > tol:
        raise NumericError(
            f"{law.kind} quantile residual {abs(survival(law, best) - target):.3g} exceeds {tol}"
        )
    return best


def abs_quantile(law: LawSpec, u: float) -> float:
    """Quantile of |X| at level u, for nonnegative or zero-centred symmetric laws."""
    k = law.kind
    p = law.p
    if k in ("pareto", "exponential", "conv_equiv_eta"):
        return quantile(law, u)
    if k == "uniform" and p["low"] >= 0:
        return quantile(law, u)
    symmetric = (
        k == "student_t"
        or (k == "gaussian" and p["mean"] == 0)
        or (k == "stable" and p["beta"] == 0 and p["location"] == 0)
        or (k == "uniform" and p["low"] == -p["high"])
    )
    if symmetric:
        return quantile(law, 0.5 + 0.5 * u)
    if k == "constant":
        return abs(p["value"])
    raise ParameterError(f"no closed-form |X| quantile for {k}", "kind")


def tail_index(law: LawSpec) -> float:
    """Index of regular variation of |X| (inf for light-tailed laws)."""
    k = law.kind
    p = law.p
    if k == "pareto":
        return p["alpha"]
    if k == "student_t":
        return p["nu"]
    if k == "stable":
        return p["alpha"] if p["alpha"] < 2 else math.inf
    return math.inf


def exp_tail_index(law: LawSpec) -> float:
    """Index of regular variation of exp(eta) for an eta-law (inf if none)."""
    if law.kind in ("exponential", "conv_equiv_eta"):
        return law["rate"]
    return math.inf


def second_moment(law: LawSpec) -> float:
    """E[X^2] in closed form where available, else inf/NaN-free error."""
    k = law.kind
    p = law.p
    if k == "pareto":
        a = p["alpha"]
        return a * p["x_min"] ** 2 / (a - 2) if a > 2 else math.inf
    if k == "student_t":
        nu = p["nu"]
        return nu / (nu - 2) if nu > 2 else math.inf
    if k == "gaussian":
        return p["mean"] ** 2 + p["sd"] ** 2
    if k == "exponential":
        return 2.0 / p["rate"] ** 2
    if k == "uniform":
        lo, hi = p["low"], p["high"]
        return (lo * lo + lo * hi + hi * hi) / 3.0
    if k == "constant":
        return p["value"] ** 2
    if k == "stable":
        return math.inf if p["alpha"] < 2 else 2 * p["scale"] ** 2 + p["location"] ** 2
    raise ParameterError(f"no closed-form second moment for {k}", "kind")
