"""Coefficient fields for the log-volatility filter and their tail-exponent combinatorics.

A field assigns non-negative weights to finitely many integer offsets
``(k, l)`` (row offset, time offset). The log-volatility at ``(i, t)`` is
``sum(w[k, l] * eta[i - k, t - l])``. Weights are normalised so the largest
one is exactly 1.

All comparisons against the maximal exponent are exact float comparisons.
Sums of two weights are formed the same way everywhere, so ties are detected
reliably.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .distributions import LawSpec, RngStream, draw
from .errors import ParameterError, UnsupportedModelError
from .panel import Panel

Offset = tuple[int, int]


@dataclass(frozen=True)
class CoefficientField:
    weights: tuple[tuple[Offset, float], ...]

    def __post_init__(self):
        if not self.weights:
            raise ParameterError("coefficient field needs at least one positive weight", "weights")
        for (k, l), w in self.weights:
            if not (isinstance(k, (int, np.integer)) and isinstance(l, (int, np.integer))):
                raise ParameterError("field offsets must be integers", "k")
            if not (math.isfinite(w) and w > 0):
                raise ParameterError(f"weight at ({k},{l}) must be positive and finite", "weight")
        if max(w for _, w in self.weights) != 1.0:
            raise ParameterError("field must be normalised to max weight 1", "weight")

    @classmethod
    def from_weights(cls, weights: Mapping[Offset, float] | Iterable[tuple[Offset, float]]) -> "CoefficientField":
        """Build a field, dropping zero weights and rescaling so the max is 1."""
        items = weights.items() if isinstance(weights, Mapping) else weights
        clean: dict[Offset, float] = {}
        for (k, l), w in items:
            w = float(w)
            if not math.isfinite(w):
                raise UnsupportedModelError(f"weight at ({k},{l}) is not finite")
            if w < 0:
                raise ParameterError(f"weight at ({k},{l}) is negative", "weight")
            if w > 0:
                key = (int(k), int(l))
                if key in clean:
                    raise ParameterError(f"duplicate offset {key}", "k")
                clean[key] = w
        if not clean:
            raise ParameterError("coefficient field needs at least one positive weight", "weights")
        top = max(clean.values())
        if top != 1.0:
            warnings.warn(f"field weights rescaled by 1/{top:g} so that the maximum is 1", stacklevel=2)
            # top / top is exactly 1.0 in IEEE arithmetic
            clean = {key: w / top for key, w in clean.items()}
        return cls(tuple(sorted(clean.items())))

    @property
    def table(self) -> dict[Offset, float]:
        return dict(self.weights)

    def weight(self, k: int, l: int) -> float:
        return self.table.get((k, l), 0.0)

    @property
    def bounds(self) -> tuple[int, int, int, int]:
        ks = [k for (k, _), _ in self.weights]
        ls = [l for (_, l), _ in self.weights]
        return min(ks), max(ks), min(ls), max(ls)

    def to_json(self) -> list[dict]:
        return [{"k": k, "l": l, "weight": w} for (k, l), w in self.weights]

    @classmethod
    def from_json(cls, data: str | Sequence[Mapping]) -> "CoefficientField":
        if isinstance(data, str):
            data = json.loads(data)
        try:
            return cls.from_weights([((int(d["k"]), int(d["l"])), d["weight"]) for d in data])
        except (KeyError, TypeError) as exc:
            raise ParameterError(f"field entries need k, l and weight: {exc}", "field") from exc


def preset_field(name: str) -> CoefficientField:
    if name == "ma18":
        return CoefficientField(tuple(((k, 0), 1.0) for k in range(1, 19)))
    if name == "single":
        return CoefficientField((((0, 0), 1.0),))
    if name == "tridiag":
        return CoefficientField((((0, 0), 1.0), ((1, 0), 1.0)))
    raise ParameterError(f"unknown field preset {name!r}", "field")


def field_from_config(value) -> CoefficientField:
    if isinstance(value, CoefficientField):
        return value
    if isinstance(value, str):
        return preset_field(value)
    return CoefficientField.from_json(value)


# ---------------------------------------------------------------------------
# combinatorics


def psi_exponent(field: CoefficientField, d: int) -> float:
    """max over (k,l) of w[k,l] + w[k+d,l], the exponent governing row offset d."""
    tab = field.table
    best = 0.0
    for (k, l), w in field.weights:
        best = max(best, w + tab.get((k + d, l), 0.0))
    return best


def psi_exponent_multi(field: CoefficientField, pairs: Iterable[tuple[int, int]]) -> float:
    """Joint exponent for several (i, j) pairs: the largest single-pair exponent."""
    vals = [psi_exponent(field, i - j) for i, j in pairs]
    if not vals:
        raise ParameterError("need at least one index pair", "pairs")
    return max(vals)


@dataclass(frozen=True)
class GammaSet:
    p: int
    pairs: frozenset[tuple[int, int]]

    def mask(self) -> np.ndarray:
        m = np.zeros((self.p, self.p), dtype=bool)
        for i, j in self.pairs:
            m[i - 1, j - 1] = True
        return m

    def __contains__(self, pair) -> bool:
        return tuple(pair) in self.pairs

    def __len__(self) -> int:
        return len(self.pairs)


def gamma_p(field: CoefficientField, p: int) -> GammaSet:
    """Pairs (1-based) whose product series carries the heaviest tail."""
    if p < 1:
        raise ParameterError("p must be >= 1", "p")
    top = {d: psi_exponent(field, d) == 2.0 for d in range(-(p - 1), p)}
    pairs = frozenset((i, j) for i in range(1, p + 1) for j in range(1, p + 1) if top[i - j])
    return GammaSet(p, pairs)


@dataclass(frozen=True)
class LambdaSet:
    i: int
    j: int
    t: int
    indices: frozenset[Offset]

    def __len__(self) -> int:
        return len(self.indices)

    def sorted(self) -> list[Offset]:
        return sorted(self.indices)


def lambda_set(field: CoefficientField, i: int, j: int, t: int = 0) -> LambdaSet:
    """Noise locations (u,v) whose combined weight in X_it X_jt hits the maximum."""
    tab = field.table
    target = psi_exponent(field, i - j)
    cands = set()
    for (k, l), _ in field.weights:
        cands.add((i - k, t - l))
        cands.add((j - k, t - l))
    hits = frozenset(
        (u, v) for u, v in cands
        if tab.get((i - u, t - v), 0.0) + tab.get((j - u, t - v), 0.0) == target
    )
    return LambdaSet(i, j, t, hits)


def product_exponent_matrix(
    field: CoefficientField, i: int, j: int, lags: Sequence[int]
) -> tuple[np.ndarray, list[Offset]]:
    """Exponent matrix of the leading noise factors of (sigma_it sigma_jt) over ``lags``.

    Rows are lags, columns the union of the Lambda-sets over those lags; entry
    (t, (u,v)) is w[i-u, t-v] + w[j-u, t-v].
    """
    tab = field.table
    cols = sorted(set().union(*(lambda_set(field, i, j, t).indices for t in lags)))
    a = np.array(
        [[tab.get((i - u, t - v), 0.0) + tab.get((j - u, t - v), 0.0) for u, v in cols] for t in lags]
    )
    return a, cols


# ---------------------------------------------------------------------------
# simulation


def eta_window_shape(field: CoefficientField, p: int, n: int) -> tuple[int, int]:
    kmin, kmax, lmin, lmax = field.bounds
    return p + kmax - kmin, n + lmax - lmin


def log_sigma_from_eta(field: CoefficientField, eta: np.ndarray, p: int, n: int) -> np.ndarray:
    """Apply the filter to an eta window of shape (..., rows, cols).

    The window's entry [a, b] holds eta at row 1 - kmax + a and time 1 - lmax + b,
    so every term of every output cell is available and nothing is truncated.
    """
    kmin, kmax, lmin, lmax = field.bounds
    rows, cols = eta_window_shape(field, p, n)
    if eta.shape[-2:] != (rows, cols):
        raise ParameterError(f"eta window must have trailing shape {(rows, cols)}, got {eta.shape[-2:]}", "eta")
    out = np.zeros(eta.shape[:-2] + (p, n))
    for (k, l), w in field.weights:
        r0 = kmax - k
        c0 = lmax - l
        out += w * eta[..., r0 : r0 + p, c0 : c0 + n]
    return out


def simulate_eta(field: CoefficientField, eta_law: LawSpec, p: int, n: int, stream: RngStream) -> np.ndarray:
    return draw(eta_law, stream.generator, eta_window_shape(field, p, n))


def simulate_sigma_panel(
    field: CoefficientField, eta_law: LawSpec, p: int, n: int, stream: RngStream
) -> Panel:
    if not isinstance(field, CoefficientField):
        raise UnsupportedModelError("only finite-support CoefficientField objects are supported")
    if p < 1 or n < 1:
        raise ParameterError("p and n must be >= 1", "p" if p < 1 else "n")
    noise = simulate_eta(field, eta_law, p, n, stream)
    return Panel(np.exp(log_sigma_from_eta(field, noise, p, n)), role="sigma")

