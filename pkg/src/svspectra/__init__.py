"""Simulation and verification lab for covariance eigenstructure of heavy-tailed stochastic volatility panels."""

from __future__ import annotations

from .cov_spectrum import EigenReport, correlation_matrix, diag_approx_error, eigen, sample_cov, spectral_stats
from .distributions import LawSpec, RngStream, quantile, sample, stable_sample, survival
from .errors import (
    BudgetError,
    ConfigError,
    ContractError,
    DegenerateRowError,
    IngestionError,
    InsufficientTailError,
    NumericError,
    ParameterError,
    PreconditionError,
    SvError,
    UnsupportedModelError,
    UsageError,
)
from .panel import Panel
from .sv_simulator import ModelSpec, NormSeq, norm_sequences, preset, simulate_panel
from .volatility_field import CoefficientField, gamma_p, lambda_set, psi_exponent, simulate_sigma_panel

__version__ = "0.1.0"
