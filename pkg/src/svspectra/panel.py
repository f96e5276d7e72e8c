"""The p x n observation matrix shared by every module."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError

ROLES = ("X", "sigma", "eta")


@dataclass(frozen=True)
class Panel:
    """Rows are series, columns are time points."""

    values: np.ndarray
    role: str = "X"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2:
            raise ContractError(f"panel must be 2-D, got shape {v.shape}")
        if self.role not in ROLES:
            raise ContractError(f"unknown panel role {self.role!r}")
        if not np.all(np.isfinite(v)):
            raise ContractError("panel contains non-finite entries")
        if self.role == "sigma" and not np.all(v > 0):
            raise ContractError("volatility panel must be strictly positive")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def p(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[1]

    def row(self, i: int) -> np.ndarray:
        return self.values[i]
