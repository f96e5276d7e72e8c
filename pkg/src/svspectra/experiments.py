"""Config-driven Monte Carlo studies over replicated panels.

Replicate ``r`` at sample size ``n`` is simulated with master seed
``derive_seed(cfg.master_seed, n, r)``, so results do not depend on the
execution order or on the number of worker threads.
"""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field, replace
from typing import Any, Callable, Mapping, Sequence

import numpy as np
from scipy import stats as sstats

from .cov_spectrum import diag_approx_error, eigen, sample_cov
from .distributions import RngStream, derive_seed, stable_sample
from .errors import ConfigError, InsufficientTailError, ParameterError, SvError
from .sv_simulator import MarginalPool, ModelSpec, norm_sequences, preset, simulate_panel, spec_from_config
from .tail_inference import hill
from .volatility_field import gamma_p

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
EXPERIMENTS = ("convergence", "stable_limit", "figure2", "dichotomy")
STATISTICS = (
    "diag_error",
    "gamma_error",
    "offdiag_ratio",
    "top_max_abs",
    "top_participation",
    "trace_ratio_dev",
)
DEFAULT_STATS = ("diag_error", "gamma_error", "offdiag_ratio", "top_max_abs", "top_participation")


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str = "convergence"
    spec: Any = "case1"
    p: int | None = None
    n_grid: tuple[int, ...] = (500, 2000, 8000)
    replicates: int = 50
    statistics: tuple[str, ...] = DEFAULT_STATS
    master_seed: int = 0
    mc_budget: int = 10**6
    threshold_quantile: float = 0.97
    workers: int = 1
    output: str | None = None

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"experiment must be one of {EXPERIMENTS}, got {self.experiment!r}")
        if not self.n_grid:
            raise ConfigError("n_grid must be non-empty")
        grid = tuple(int(n) for n in self.n_grid)
        if any(n < 1 for n in grid) or list(grid) != sorted(set(grid)):
            raise ConfigError("n_grid must be strictly increasing positive integers")
        object.__setattr__(self, "n_grid", grid)
        if int(self.replicates) < 1:
            raise ConfigError("replicates must be >= 1")
        bad = [s for s in self.statistics if s not in STATISTICS]
        if bad or not self.statistics:
            raise ConfigError(f"unknown statistics {bad}; choose from {STATISTICS}")
        object.__setattr__(self, "statistics", tuple(self.statistics))
        if self.p is not None and int(self.p) < 1:
            raise ConfigError("p must be >= 1")
        if int(self.workers) < 1:
            raise ConfigError("workers must be >= 1")
        if not 0 < self.threshold_quantile < 1:
            raise ConfigError("threshold_quantile must lie in (0, 1)")
        self.model()  # validate the model eagerly

    def model(self) -> ModelSpec:
        return spec_from_config(self.spec, p=self.p, seed=self.master_seed)

    @property
    def label(self) -> str:
        return self.spec if isinstance(self.spec, str) else (self.model().name or "custom")

    def to_dict(self) -> dict:
        spec = self.spec if isinstance(self.spec, str) else self.model().to_dict()
        return {
            "schema_version": SCHEMA_VERSION,
            "experiment": self.experiment,
            "spec": spec,
            "p": self.p,
            "n_grid": list(self.n_grid),
            "replicates": self.replicates,
            "statistics": list(self.statistics),
            "master_seed": self.master_seed,
            "mc_budget": self.mc_budget,
            "threshold_quantile": self.threshold_quantile,
            "workers": self.workers,
            "output": self.output,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "ExperimentConfig":
        d = dict(d)
        version = d.pop("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {version!r} (expected {SCHEMA_VERSION})")
        known = set(cls.__dataclass_fields__)
        extra = sorted(set(d) - known)
        if extra:
            raise ConfigError(f"unknown config fields: {', '.join(extra)}")
        for key in ("n_grid", "statistics"):
            if key in d:
                if not isinstance(d[key], (list, tuple)):
                    raise ConfigError(f"{key} must be a list")
                d[key] = tuple(d[key])
        for key in ("replicates", "master_seed", "mc_budget", "workers"):
            if key in d and not isinstance(d[key], int):
                raise ConfigError(f"{key} must be an integer")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(data)


@dataclass(frozen=True)
class Record:
    n: int
    replicate: int
    statistic: str
    value: float | None
    error: str | None = None

    def to_dict(self) -> dict:
        return {"n": self.n, "replicate": self.replicate, "statistic": self.statistic,
                "value": self.value, "error": self.error}


@dataclass(frozen=True)
class Summary:
    n: int
    statistic: str
    median: float | None
    q25: float | None
    q75: float | None
    count: int

    def to_dict(self) -> dict:
        return {"n": self.n, "statistic": self.statistic, "median": self.median,
                "q25": self.q25, "q75": self.q75, "count": self.count}


def summarize(records: Sequence[Record]) -> list[Summary]:
    """Median and quartiles per (n, statistic), ignoring aborted replicates."""
    groups: dict[tuple[int, str], list[float]] = {}
    order: list[tuple[int, str]] = []
    for r in records:
        key = (r.n, r.statistic)
        if key not in groups:
            groups[key] = []
            order.append(key)
        if r.value is not None:
            groups[key].append(r.value)
    out = []
    for n, stat in order:
        vals = np.array(groups[(n, stat)])
        if vals.size:
            q25, med, q75 = (float(v) for v in np.quantile(vals, [0.25, 0.5, 0.75]))
        else:
            q25 = med = q75 = None
        out.append(Summary(n, stat, med, q25, q75, int(vals.size)))
    return out


@dataclass(frozen=True)
class ExperimentResult:
    config: ExperimentConfig
    records: tuple[Record, ...]
    summaries: tuple[Summary, ...] = dc_field(default=())

    def medians(self, statistic: str) -> list[float | None]:
        return [s.median for s in self.summaries if s.statistic == statistic]

    def values(self, n: int, statistic: str) -> list[float]:
        return [r.value for r in self.records if r.n == n and r.statistic == statistic and r.value is not None]


def _map(fn: Callable, items: Sequence, workers: int) -> list:
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


def replicate_seed(master_seed: int, n: int, r: int) -> int:
    return derive_seed(master_seed, n, r)


def _panel_statistics(spec: ModelSpec, a_n: float, wanted: Sequence[str], gamma_mask) -> dict[str, float]:
    x = simulate_panel(spec)
    s = sample_cov(x)
    out: dict[str, float] = {}
    need_eig = {"top_max_abs", "top_participation", "trace_ratio_dev"} & set(wanted)
    rep = eigen(s) if need_eig else None
    p = spec.p
    for stat in wanted:
        if stat == "diag_error":
            out[stat] = diag_approx_error(s, a_n, "diagonal")
        elif stat == "gamma_error":
            out[stat] = diag_approx_error(s, a_n, gamma_mask)
        elif stat == "offdiag_ratio":
            off = np.abs(s - np.diag(np.diag(s)))
            out[stat] = float(off.max() / np.diag(s).min()) if p > 1 else 0.0
        elif stat == "top_max_abs":
            out[stat] = rep.top().max_abs
        elif stat == "top_participation":
            out[stat] = rep.top().participation_ratio
        elif stat == "trace_ratio_dev":
            tr = math.fsum(np.diag(s).tolist())
            out[stat] = float(np.mean(np.abs(rep.eigenvalues / tr - 1.0 / p)))
    return out


def convergence_study(cfg: ExperimentConfig) -> ExperimentResult:
    """Per n and replicate: diagonal-approximation errors and localisation of the top eigenvector.

    a_n comes from a single pooled Monte Carlo sample shared by the whole
    n grid. A replicate that raises is logged and kept as a record with
    value None and the error text.
    """
    base = cfg.model()
    gmask = gamma_p(base.field, base.p)
    pool = None
    if base.eta_law.kind != "constant":
        pool = MarginalPool(base, max(cfg.mc_budget, max(cfg.n_grid)))
    records: list[Record] = []
    for n in cfg.n_grid:
        a_n = norm_sequences(base, n, cfg.mc_budget, pool=pool).a_n

        def run(r: int, n=n, a_n=a_n):
            spec = replace(base, n=n, master_seed=replicate_seed(cfg.master_seed, n, r))
            try:
                vals = _panel_statistics(spec, a_n, cfg.statistics, gmask)
                return [Record(n, r, st, float(vals[st])) for st in cfg.statistics]
            except SvError as exc:
                log.warning("replicate %d at n=%d aborted: %s", r, n, exc)
                return [Record(n, r, st, None, f"{type(exc).__name__}: {exc}") for st in cfg.statistics]

        for recs in _map(run, range(cfg.replicates), cfg.workers):
            records.extend(recs)
    return ExperimentResult(cfg, tuple(records), tuple(summarize(records)))


@dataclass(frozen=True)
class StableLimitResult:
    n: int
    replicates: int
    a_n: float
    c_n: float
    target_index: float
    hill: tuple[float | None, ...]
    normalized: np.ndarray
    qq: tuple[tuple[np.ndarray, np.ndarray], ...]
    pearson: np.ndarray
    spearman: np.ndarray
    corr_se: float

    def to_dict(self) -> dict:
        return {
            "n": self.n, "replicates": self.replicates, "a_n": self.a_n, "c_n": self.c_n,
            "target_index": self.target_index, "hill": list(self.hill),
            "pearson": self.pearson.tolist(), "spearman": self.spearman.tolist(), "corr_se": self.corr_se,
        }


def stable_limit_check(
    spec: ModelSpec,
    n: int,
    replicates: int = 2000,
    threshold_quantile: float = 0.97,
    mc_budget: int = 10**6,
    workers: int = 1,
    min_replicates: int = 500,
) -> StableLimitResult:
    """Replicate the normalised diagonal sums a_n^-2 (S_ii - c_n) and estimate their tail index.

    The expected index is alpha/2. QQ pairs compare sorted replicates with
    sorted draws from a totally skewed stable law of index alpha/2; only the
    shape is comparable since the limit's scale is not pinned down.
    """
    if replicates < min_replicates:
        raise ConfigError(f"need >= {min_replicates} replicates, got {replicates}")
    alpha = spec.alpha
    if not (0 < alpha < 4) or alpha == 2:
        raise ConfigError(f"stable limit check needs a tail index in (0,4) other than 2, got {alpha}")
    ns = norm_sequences(spec, n, mc_budget)
    a2 = ns.a_n * ns.a_n

    def run(r: int) -> np.ndarray:
        x = simulate_panel(replace(spec, n=n, master_seed=replicate_seed(spec.master_seed, n, r)))
        s = sample_cov(x)
        return (np.diag(s) - ns.c_n) / a2

    vals = np.array(_map(run, range(replicates), workers))
    p = vals.shape[1]
    hills: list[float | None] = []
    qq = []
    ref_stream = RngStream(spec.master_seed, 7)
    for i in range(p):
        try:
            hills.append(hill(vals[:, i], threshold_quantile, upper_tail=True).hill_index)
        except InsufficientTailError:
            hills.append(None)
        ref = stable_sample(alpha / 2, 1.0, 1.0, 0.0, ref_stream, replicates)
        qq.append((np.sort(vals[:, i]), np.sort(ref)))
    if p > 1:
        pearson = np.corrcoef(vals, rowvar=False)
        spear = sstats.spearmanr(vals).statistic
        if np.ndim(spear) == 0:  # scipy returns a bare coefficient for two columns
            spear = np.array([[1.0, spear], [spear, 1.0]])
    else:
        pearson = spear = np.ones((1, 1))
    return StableLimitResult(
        n, replicates, ns.a_n, ns.c_n, alpha / 2, tuple(hills), vals, tuple(qq),
        pearson, np.asarray(spear), 1.0 / math.sqrt(replicates),
    )


@dataclass(frozen=True)
class Figure2Stats:
    preset: str
    seed: int
    normalized_eigenvalues: np.ndarray
    top_vector: np.ndarray
    max_abs: float
    participation_ratio: float

    def rows(self) -> list[dict]:
        return [
            {"index": k + 1, "normalized_eigenvalue": float(self.normalized_eigenvalues[k]),
             "top_vector": float(self.top_vector[k])}
            for k in range(self.normalized_eigenvalues.size)
        ]


def figure2_stats(name: str, seed: int = 0, p: int = 18, n: int = 1567) -> Figure2Stats:
    """Trace-normalised ordered eigenvalues and the leading eigenvector for one simulated run."""
    spec = spec_from_config(name, p=p, n=n, seed=seed)
    s = sample_cov(simulate_panel(spec))
    rep = eigen(s)
    tr = math.fsum(np.diag(s).tolist())
    top = rep.top()
    return Figure2Stats(
        name, seed, rep.eigenvalues / tr, rep.vectors[:, 0].copy(), top.max_abs, top.participation_ratio
    )


@dataclass(frozen=True)
class DichotomyResult:
    p: int
    n: int
    replicates: int
    max_abs: dict[str, np.ndarray]
    participation: dict[str, np.ndarray]
    comparisons: dict[str, float]

    def medians(self) -> dict[str, dict[str, float]]:
        return {
            k: {"max_abs": float(np.median(self.max_abs[k])), "participation": float(np.median(self.participation[k]))}
            for k in self.max_abs
        }

    def to_dict(self) -> dict:
        return {"p": self.p, "n": self.n, "replicates": self.replicates,
                "medians": self.medians(), "rank_sum_p_values": dict(self.comparisons)}


def rank_sum_greater(a: Sequence[float], b: Sequence[float]) -> float:
    """One-sided Mann-Whitney p-value for 'a is stochastically larger than b'."""
    return float(sstats.mannwhitneyu(a, b, alternative="greater").pvalue)


def regime_dichotomy(
    replicates: int = 100,
    p: int = 18,
    n: int = 1567,
    master_seed: int = 0,
    presets: Sequence[str] = ("case1", "case2_exp", "case2_convequiv"),
    workers: int = 1,
    min_replicates: int = 100,
) -> DichotomyResult:
    """Distributions of top-eigenvector localisation per preset and rank-sum comparisons."""
    if replicates < min_replicates:
        raise ConfigError(f"need >= {min_replicates} replicates, got {replicates}")
    max_abs: dict[str, np.ndarray] = {}
    part: dict[str, np.ndarray] = {}
    for name in presets:
        base = preset(name, p, n)

        def run(r: int, base=base):
            spec = replace(base, master_seed=replicate_seed(master_seed, n, r))
            top = eigen(sample_cov(simulate_panel(spec))).top()
            return top.max_abs, top.participation_ratio

        res = _map(run, range(replicates), workers)
        max_abs[name] = np.array([m for m, _ in res])
        part[name] = np.array([pr for _, pr in res])
    comps = {}
    if "case1" in max_abs and "case2_convequiv" in max_abs:
        comps["case1>case2_convequiv"] = rank_sum_greater(max_abs["case1"], max_abs["case2_convequiv"])
    return DichotomyResult(p, n, replicates, max_abs, part, comps)


def run_experiment(cfg: ExperimentConfig):
    if cfg.experiment == "convergence":
        return convergence_study(cfg)
    spec = cfg.model()
    if cfg.experiment == "stable_limit":
        return stable_limit_check(spec, cfg.n_grid[-1], cfg.replicates, cfg.threshold_quantile,
                                  cfg.mc_budget, cfg.workers)
    if cfg.experiment == "figure2":
        if not isinstance(cfg.spec, str):
            raise ConfigError("figure2 needs a preset name")
        return figure2_stats(cfg.spec, cfg.master_seed, spec.p, cfg.n_grid[-1])
    if cfg.experiment == "dichotomy":
        return regime_dichotomy(cfg.replicates, spec.p, cfg.n_grid[-1], cfg.master_seed, workers=cfg.workers)
    raise ParameterError(f"unknown experiment {cfg.experiment}", "experiment")  # pragma: no cover
