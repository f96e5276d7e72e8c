"""Command-line entry point.

Exit codes: 0 ok, 2 usage, 3 config, 4 input/output, 5 numeric. Failures
print one JSON object ``{"error", "message", "exit_code"}`` on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from .cov_spectrum import eigen, sample_cov
from .distributions import LawSpec, RngStream
from .errors import ConfigError, IngestionError, SvError, UsageError
from .experiments import ExperimentConfig, ExperimentResult, run_experiment
from .io import ingest_returns, panel_to_csv, write_csv, write_json
from .panel import Panel
from .product_tail_oracles import pareto_product_survival, peff, ratio_limit_mc, splitup_check
from .sv_simulator import ModelSpec, simulate_panel, spec_from_config
from .tail_inference import DEFAULT_Q, extremogram, hill, hill_matrix, rows_to_csv, tail_balance
from .volatility_field import preset_field, product_exponent_matrix

log = logging.getLogger("svspectra")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _load_json(path: str):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise IngestionError(f"cannot read config {path}: {exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc


def _quantile(value: str) -> float:
    try:
        q = float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {value!r}") from None
    if not 0 < q < 1:
        raise argparse.ArgumentTypeError("quantile must lie in (0, 1)")
    return q


def _positive_int(value: str) -> int:
    try:
        v = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {value!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _seed(value: str) -> int:
    try:
        v = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {value!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--preset", choices=("case1", "case2_exp", "case2_convequiv"))
    common.add_argument("--config", help="JSON config (model spec, experiment or oracle parameters)")
    common.add_argument("--p", type=_positive_int)
    common.add_argument("--n", type=_positive_int)
    common.add_argument("--seed", type=_seed)
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--format", choices=("csv", "json"), default="csv")

    data = _Parser(add_help=False)
    data.add_argument("--input", help="CSV with a label column then one column per series")
    data.add_argument("--transform", choices=("none", "log_returns"), default="none")
    data.add_argument("--missing", choices=("error", "drop_row"), default="error")
    data.add_argument("--quantile", type=_quantile, default=DEFAULT_Q)
    data.add_argument("--center", action="store_true", help="remove row means first")

    parser = _Parser(prog="svspectra", description="Heavy-tailed stochastic volatility spectra lab")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("simulate", parents=[common], help="simulate a panel")
    sub.add_parser("eigen", parents=[common, data], help="eigen-decompose a sample covariance matrix")
    sub.add_parser("hill", parents=[common, data], help="Hill matrix of cross products plus per-series tails")
    ex = sub.add_parser("extremogram", parents=[common, data], help="lagged exceedance probabilities")
    ex.add_argument("--lags", default="1,2,3,4,5")
    ex.add_argument("--series", type=_positive_int, default=1, help="1-based series index")
    sub.add_parser("experiment", parents=[common], help="run an experiment config")
    orc = sub.add_parser("oracle", parents=[common], help="product-tail oracles")
    orc.add_argument("routine", choices=("ratio", "pareto_product", "peff", "splitup"))
    orc.add_argument("--budget", type=_positive_int)
    return parser


def _model(args, cfg_json=None) -> ModelSpec:
    if args.preset and cfg_json is not None:
        raise UsageError("give either --preset or --config, not both")
    source = args.preset or cfg_json or "case1"
    return spec_from_config(source, p=args.p, n=args.n, seed=args.seed)


def _panel_from_args(args) -> tuple[Panel, dict, int | None]:
    """Panel from --input, or simulated from --preset/--config."""
    if args.input:
        if args.preset or args.config:
            raise UsageError("--input cannot be combined with --preset or --config")
        table = ingest_returns(args.input, args.transform, args.missing)
        prov = {"input": str(args.input), "transform": args.transform, "missing": args.missing}
        return table.to_panel(), prov, None
    spec = _model(args, _load_json(args.config) if args.config else None)
    return simulate_panel(spec), spec.to_dict(), spec.master_seed


def _centered(panel: Panel, center: bool) -> np.ndarray:
    x = panel.values
    if center:
        x = x - x.mean(axis=1, keepdims=True)
    return x


def cmd_simulate(args) -> list[Path]:
    spec = _model(args, _load_json(args.config) if args.config else None)
    panel = simulate_panel(spec)
    cfg = spec.to_dict()
    stem = f"panel_{spec.name or 'custom'}_{spec.master_seed}"
    out = Path(args.out)
    if args.format == "csv":
        return [write_csv(out / f"{stem}.csv", panel_to_csv(panel), cfg, spec.master_seed)]
    return [write_json(out / f"{stem}.json", {"spec": cfg, "panel": panel.values.tolist()}, cfg, spec.master_seed)]


def cmd_eigen(args) -> list[Path]:
    panel, prov, seed = _panel_from_args(args)
    s = sample_cov(panel, center=args.center)
    rep = eigen(s)
    cfg = {"source": prov, "center": args.center}
    out = Path(args.out)
    if args.format == "csv":
        return [write_csv(out / "eigen.csv", rep.to_csv(), cfg, seed)]
    return [write_json(out / "eigen.json", rep.to_json(), cfg, seed)]


def cmd_hill(args) -> list[Path]:
    panel, prov, seed = _panel_from_args(args)
    x = _centered(panel, args.center)
    hm = hill_matrix(x, args.quantile)
    reports = []
    for i in range(x.shape[0]):
        rec = {"series": f"s{i + 1}", "hill_index": None, "threshold": None, "k_exceedances": None,
               "p_plus": None, "p_minus": None, "error": None}
        try:
            tr = hill(np.abs(x[i]), args.quantile)
            bal = tail_balance(x[i], args.quantile)
            rec.update(hill_index=tr.hill_index, threshold=tr.threshold, k_exceedances=tr.k_exceedances,
                       p_plus=bal[0], p_minus=bal[1])
        except SvError as exc:
            rec["error"] = str(exc)
        reports.append(rec)
    cfg = {"source": prov, "quantile": args.quantile, "center": args.center}
    out = Path(args.out)
    if args.format == "csv":
        csv_rows = [{k: ("" if v is None else v) for k, v in r.items()} for r in reports]
        return [
            write_csv(out / "hill_matrix.csv", hm.to_csv(), cfg, seed),
            write_csv(out / "tail_report.csv", rows_to_csv(csv_rows), cfg, seed),
        ]
    return [write_json(out / "hill.json", {**hm.to_json(), "tail_reports": reports}, cfg, seed)]


def cmd_extremogram(args) -> list[Path]:
    panel, prov, seed = _panel_from_args(args)
    try:
        lags = [int(v) for v in args.lags.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"--lags must be comma-separated integers, got {args.lags!r}") from None
    if args.series > panel.p:
        raise ConfigError(f"--series {args.series} out of range (panel has {panel.p} series)")
    x = _centered(panel, args.center)
    est = extremogram(x[args.series - 1], lags, args.quantile)
    cfg = {"source": prov, "quantile": args.quantile, "lags": lags, "series": args.series}
    out = Path(args.out)
    rows = [e.to_dict() for e in est]
    if args.format == "csv":
        return [write_csv(out / "extremogram.csv", rows_to_csv(rows), cfg, seed)]
    return [write_json(out / "extremogram.json", {"extremogram": rows}, cfg, seed)]


def cmd_experiment(args) -> list[Path]:
    if not args.config:
        raise UsageError("experiment needs --config")
    data = _load_json(args.config)
    if not isinstance(data, dict):
        raise ConfigError("experiment config must be a JSON object")
    if args.seed is not None:
        data["master_seed"] = args.seed
    if args.p is not None:
        data["p"] = args.p
    cfg = ExperimentConfig.from_dict(data)
    result = run_experiment(cfg)
    out = Path(args.out)
    label = cfg.label
    d = cfg.to_dict()
    paths = []
    if isinstance(result, ExperimentResult):
        for n in cfg.n_grid:
            rows = [r.to_dict() for r in result.records if r.n == n]
            rows = [{k: ("" if v is None else v) for k, v in r.items()} for r in rows]
            paths.append(write_csv(out / f"{cfg.experiment}_{label}_{n}.csv", rows_to_csv(rows), d, cfg.master_seed))
        summary = {"summaries": [s.to_dict() for s in result.summaries]}
    elif hasattr(result, "rows"):
        rows = result.rows()
        paths.append(write_csv(out / f"{cfg.experiment}_{label}_{cfg.n_grid[-1]}.csv", rows_to_csv(rows), d,
                               cfg.master_seed))
        summary = {"max_abs": result.max_abs, "participation_ratio": result.participation_ratio}
    else:
        summary = result.to_dict()
    paths.append(write_json(out / f"{cfg.experiment}_{label}_summary.json", summary, d, cfg.master_seed))
    return paths


def cmd_oracle(args) -> list[Path]:
    params = _load_json(args.config) if args.config else {}
    if not isinstance(params, dict):
        raise ConfigError("oracle config must be a JSON object")
    seed = 0 if args.seed is None else args.seed
    stream = RngStream(seed, 0)
    out = Path(args.out)
    cfg = {"routine": args.routine, **params}
    if args.routine == "ratio":
        x_law = LawSpec.from_dict(params.get("x_law", {"kind": "pareto", "alpha": 3.0}))
        y_law = LawSpec.from_dict(params.get("y_law", {"kind": "uniform"}))
        levels = params.get("levels", [0.9, 0.99, 0.999])
        budget = args.budget or int(params.get("mc_budget", 10**7))
        rows = ratio_limit_mc(x_law, y_law, levels, budget, stream).rows()
    elif args.routine == "pareto_product":
        alpha = float(params.get("alpha", 3.0))
        grid = params.get("x", [1.0, math.e, math.e**2])
        rows = [{"x": float(x), "survival": pareto_product_survival(alpha, float(x))} for x in grid]
    elif args.routine == "peff":
        if "a" in params:
            a = params["a"]
        else:
            field = preset_field(params.get("field", "ma18"))
            a, _ = product_exponent_matrix(field, 1, 1, list(range(int(params.get("lags", 3)))))
        res = peff(a)
        return [write_json(out / "peff.json", res.to_json(), cfg, seed)]
    else:
        y_law = LawSpec.from_dict(params.get("y_law", {"kind": "conv_equiv_eta", "rate": 3.0, "power": 2.0}))
        res = splitup_check(
            y_law,
            params.get("exponents", [1.0, 1.0]),
            float(params.get("v", 1.0)),
            params.get("s_grid", [0.5, 0.25, 0.1]),
            params.get("levels", [0.999, 0.9999]),
            args.budget or int(params.get("mc_budget", 10**6)),
            stream,
            bool(params.get("exponentiate", y_law.kind in ("exponential", "conv_equiv_eta"))),
        )
        rows = [r.to_dict() for r in res.rows]
    if args.format == "csv":
        return [write_csv(out / f"oracle_{args.routine}.csv", rows_to_csv(rows), cfg, seed)]
    return [write_json(out / f"oracle_{args.routine}.json", {"rows": rows}, cfg, seed)]


COMMANDS = {
    "simulate": cmd_simulate,
    "eigen": cmd_eigen,
    "hill": cmd_hill,
    "extremogram": cmd_extremogram,
    "experiment": cmd_experiment,
    "oracle": cmd_oracle,
}


def _fail(exc: BaseException, code: int) -> int:
    rec = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    print(json.dumps(rec), file=sys.stderr)
    return code


def run_command(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
        paths = COMMANDS[args.command](args)
        for p in paths:
            print(p)
        return 0
    except SvError as exc:
        return _fail(exc, exc.exit_code)
    except OSError as exc:
        return _fail(exc, IngestionError.exit_code)
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        return _fail(exc, 5)


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()
