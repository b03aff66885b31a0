"""Command-line entry point: ``tailgini <command> [options]``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd
from dotenv import load_dotenv

from tailgini.config import RunConfig, load_run_config
from tailgini.errors import ConfigError, TailGiniError
from tailgini.estimators import TailConfig, fit_tail_gini, sensitivity_path
from tailgini.experiments import (
    SWEEP_FRACTIONS,
    ExperimentSpec,
    GridPoint,
    logratio_diagnostics,
    run_replications,
)
from tailgini.ingest import align_losses, read_prices, summary_stats, weekly_losses
from tailgini.observability import setup_logging, setup_observability, tracer
from tailgini.simulation import PUBLISHED_TRUE_VALUES, exponent_discrepancies, resolve_model, sample_model, true_tg_replicates
from tailgini.tables import (
    qq_frame,
    ratio_frame,
    read_losses,
    read_true_values,
    replications_frame,
    smse_frame,
    write_losses,
    write_run_metadata,
    write_table,
    write_true_values,
)
from tailgini.tailtest import tqcc_pvalue
from tailgini.workers import RngStream

logger = logging.getLogger("tailgini")

ESTIMATE_COLUMNS = (
    "p", "k", "k1", "k2", "theta_intermediate", "gamma1_hat", "eta_hat", "d_n",
    "theta_extreme", "theta_hw", "exponent", "qualifying", "ties_at_threshold",
)


def _fractions(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(part) for part in text.split(",") if part.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated fractions, got {text!r}") from exc


def _add_run_options(parser: argparse.ArgumentParser, *names: str) -> None:
    """Flags mirrored by RunConfig fields; unset flags stay None so the config file can fill them."""
    if "tail" in names:
        parser.add_argument("--alpha", type=float, help="tail fraction for the intermediate estimate (default 0.09)")
        parser.add_argument("--alpha1", type=float, help="tail fraction for the Hill estimate of gamma1 (default 0.05)")
        parser.add_argument("--alpha2", type=float, help="tail fraction for the eta estimate (default 0.05)")
        parser.add_argument("--p", type=float, action="append", help="extreme level; repeat for several")
    if "model" in names:
        parser.add_argument("--model", help="model1a..model1d, model2 or custom:a1,a2")
    if "n" in names:
        parser.add_argument("--n", type=int, help="sample size")
    if "reps" in names:
        parser.add_argument("--reps", type=int, help="number of replications")
    if "scale" in names:
        parser.add_argument("--paper-scale", action="store_true", default=None, help="use the published study's replication sizes")
    if "null" in names:
        parser.add_argument("--null-reps", type=int, help="permutations for the null distribution (default 999)")
        parser.add_argument("--level", type=float, help="test level (default 0.05)")
        parser.add_argument("--transform", choices=("gev", "rank"), default="gev", help="margin transform to unit Frechet")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="master seed (default 20240101)")
    common.add_argument("--out", type=Path, help="output directory (default ./results)")
    common.add_argument("--config", type=Path, help="key=value settings file; flags win")
    common.add_argument("--workers", type=int, help="worker threads (default TAILGINI_THREADS or cpu count)")
    common.add_argument("--log-level", help="DEBUG, INFO, WARNING or ERROR (default LOG_LEVEL or INFO)")

    parser = argparse.ArgumentParser(prog="tailgini", description="Tail Gini estimation for asymptotically independent losses.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="draw a model sample to a loss file")
    _add_run_options(p, "model", "n")
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("truevalue", parents=[common], help="Monte Carlo true value of TG_p")
    _add_run_options(p, "model", "reps", "scale")
    p.add_argument("--p", type=float, action="append", help="extreme level; repeat for several")
    p.add_argument("--size", type=int, help="sample size per replication")
    p.set_defaults(handler=cmd_truevalue)

    p = sub.add_parser("estimate", parents=[common], help="fit TG_p on a two-column loss file")
    p.add_argument("file", type=Path)
    _add_run_options(p, "tail")
    p.set_defaults(handler=cmd_estimate)

    p = sub.add_parser("experiment", parents=[common], help="seeded replications, ratio table and sMSE surface")
    _add_run_options(p, "tail", "model", "n", "reps", "scale")
    p.add_argument("--true-values", type=Path, help="true-value table written by 'truevalue'")
    p.add_argument("--sweep", type=_fractions, nargs="?", const=SWEEP_FRACTIONS, default=None,
                   help="also sweep each fraction one at a time over these values")
    p.set_defaults(handler=cmd_experiment)

    p = sub.add_parser("test-indep", parents=[common], help="permutation TQCC test of asymptotic independence")
    p.add_argument("file", type=Path)
    _add_run_options(p, "null")
    p.set_defaults(handler=cmd_test_indep)

    p = sub.add_parser("ingest", parents=[common], help="daily prices to aligned weekly loss pairs")
    p.add_argument("--index", type=Path, required=True, help="price file of the systemic series (Y)")
    p.add_argument("stocks", type=Path, nargs="+", help="price files of the individual series (X)")
    p.set_defaults(handler=cmd_ingest)

    p = sub.add_parser("pipeline", parents=[common], help="ingest, screen and estimate every stock against an index")
    p.add_argument("--index", type=Path, required=True, help="price file of the systemic series (Y)")
    p.add_argument("stocks", type=Path, nargs="+", help="price files of the individual series (X)")
    _add_run_options(p, "tail", "null")
    p.set_defaults(handler=cmd_pipeline)

    p = sub.add_parser("sensitivity", parents=[common], help="estimates against the tail fraction")
    p.add_argument("file", type=Path)
    p.add_argument("--fractions", type=_fractions, default=SWEEP_FRACTIONS, help="comma-separated tail fractions")
    _add_run_options(p, "tail")
    p.set_defaults(handler=cmd_sensitivity)

    p = sub.add_parser("serve", help="run the MCP tool server")
    p.add_argument("transport", choices=("http", "stdio"), nargs="?", default="stdio")
    p.set_defaults(handler=cmd_serve)
    return parser


_CONFIG_FLAGS = {
    "alpha": "alpha", "alpha1": "alpha1", "alpha2": "alpha2", "p": "p", "model": "model", "n": "n",
    "seed": "seed", "out": "out", "paper_scale": "paper_scale", "null_reps": "null_reps", "level": "level",
    "workers": "workers", "log_level": "log_level", "true_values": "true_values", "size": "oracle_size",
}


def run_config(args: argparse.Namespace) -> RunConfig:
    overrides = {field: getattr(args, flag, None) for flag, field in _CONFIG_FLAGS.items()}
    if getattr(args, "reps", None) is not None:
        overrides["oracle_reps" if args.command == "truevalue" else "m"] = args.reps
    return load_run_config(getattr(args, "config", None), overrides)


def _tail_configs(config: RunConfig, n: int) -> list[TailConfig]:
    return [TailConfig.from_fractions(n, p, config.alpha, config.alpha1, config.alpha2) for p in config.p]


def _estimate_rows(sample, config: RunConfig) -> pd.DataFrame:
    rows = []
    for tail in _tail_configs(config, sample.n):
        fit = fit_tail_gini(sample, tail)
        if fit.diagnostics.k_below_rate_bound:
            logger.warning("k=%d <= n^(1 - eta_hat); the intermediate estimate may be unreliable", tail.k)
        rows.append({
            "p": tail.p, "k": tail.k, "k1": tail.k1, "k2": tail.k2,
            "theta_intermediate": fit.theta_intermediate, "gamma1_hat": fit.gamma1_hat,
            "eta_hat": fit.eta_hat, "d_n": fit.d_n, "theta_extreme": fit.theta_extreme,
            "theta_hw": fit.theta_hw, "exponent": fit.exponent,
            "qualifying": fit.diagnostics.qualifying, "ties_at_threshold": fit.diagnostics.ties_at_threshold,
        })
    return pd.DataFrame(rows, columns=list(ESTIMATE_COLUMNS))


def cmd_simulate(args, config: RunConfig) -> int:
    model = resolve_model(config.model)
    sample = sample_model(model, config.n, RngStream(config.seed))
    path = write_losses(config.out / f"{model.label}_n{config.n}_seed{config.seed}.csv", sample)
    print(path)
    return 0


def cmd_truevalue(args, config: RunConfig) -> int:
    model = resolve_model(config.model)
    rows = []
    for i, p in enumerate(config.p):
        run = true_tg_replicates(model, p, config.reps, config.size, RngStream(config.seed, i), config.workers)
        published = PUBLISHED_TRUE_VALUES.get((model.label, p))
        if published is not None:
            logger.info("%s p=%g: %.6g vs published %.4f (%+.1f%%)", model.label, p, run.value, published,
                        100.0 * (run.value / published - 1.0))
        rows.append({"model": model.label, "p": p, "true_value": run.value, "reps": config.reps,
                     "size": config.size, "excluded": run.excluded})
        print(f"{model.label}\tp={p:g}\t{run.value:.6g}")
    for name, (computed, printed) in exponent_discrepancies().items():
        if name == model.label:
            logger.warning("%s: exponent 1 - 1/eta + gamma1 = %.4f but the published column prints %.3f",
                           name, computed, printed)
    write_true_values(config.out / "true_values.csv", rows)
    write_run_metadata(config.out, "truevalue", config.model_dump())
    return 0


def cmd_estimate(args, config: RunConfig) -> int:
    sample = read_losses(args.file)
    frame = _estimate_rows(sample, config)
    write_table(config.out / "estimates.csv", frame)
    print(frame.to_string(index=False))
    return 0


def _experiment_true_values(config: RunConfig, label: str) -> dict[float, float]:
    if config.true_values is not None:
        return read_true_values(config.true_values, label)
    values = {p: PUBLISHED_TRUE_VALUES[(label, p)] for p in config.p if (label, p) in PUBLISHED_TRUE_VALUES}
    if len(values) != len(config.p):
        raise ConfigError(f"no published true values for {label} at every p; pass --true-values")
    logger.info("using published true values for %s", label)
    return values


def cmd_experiment(args, config: RunConfig) -> int:
    model = resolve_model(config.model)
    point = GridPoint(config.alpha, config.alpha1, config.alpha2)
    common = dict(n=config.n, m=config.replications, p_levels=tuple(config.p), seed=config.seed, table_point=point)
    if args.sweep:
        spec = ExperimentSpec.with_sweeps(model, args.sweep, args.sweep, args.sweep, **common)
    else:
        spec = ExperimentSpec(model, grid=(point,), **common)
    result = run_replications(spec, _experiment_true_values(config, model.label), config.workers)

    out = config.out
    write_table(out / "replications.csv", replications_frame(result.records))
    write_table(out / "ratio_summary.csv", ratio_frame(result.summaries))
    if args.sweep:
        write_table(out / "smse.csv", smse_frame(result.smse))
    qq = []
    for p in spec.p_levels:
        try:
            qq.append(qq_frame(model.label, p, logratio_diagnostics(result, p)))
        except TailGiniError as exc:
            logger.warning("no log-ratio diagnostics at p=%g: %s", p, exc)
    if qq:
        write_table(out / "qq.csv", pd.concat(qq, ignore_index=True))
    write_run_metadata(out, "experiment", {**config.model_dump(), "sweep": args.sweep,
                                           "failed_replications": result.failed_replications})
    for row in result.summaries:
        print(f"{row.model}\tp={row.p:g}\t{row.method}\tmean={row.mean:.4f}\tsd={row.sd:.4f}\tcount={row.count}")
    return 0


def cmd_test_indep(args, config: RunConfig) -> int:
    sample = read_losses(args.file)
    result = tqcc_pvalue(sample, config.null_reps, RngStream(config.seed), config.level, args.transform, config.workers)
    print(json.dumps({"tqcc": result.statistic, "threshold": result.threshold, "p_value": result.p_value,
                      "null_reps": result.null_reps, "reject": result.reject, "transform": result.transform}))
    return 0


def _weekly(path: Path):
    return weekly_losses(read_prices(path))


def cmd_ingest(args, config: RunConfig) -> int:
    index = _weekly(args.index)
    for stock_path in args.stocks:
        stock = _weekly(stock_path)
        sample = align_losses(stock, index)
        path = write_losses(config.out / f"{stock.ticker}_vs_{index.ticker}.csv", sample)
        mean, sd = summary_stats(stock)
        print(f"{stock.ticker}\tn={sample.n}\tmean={mean:.4f}\tsd={sd:.4f}\tgaps={stock.gaps}\t{path}")
    return 0


def pipeline_report(index_path: Path, stock_paths: Sequence[Path], config: RunConfig, transform: str = "gev") -> pd.DataFrame:
    """Summary statistics, TQCC screen and tail Gini estimates per stock, index row first.

    A stock that cannot be screened or estimated keeps its row, with the
    failure in ``error`` and ``retained`` False.
    """
    theta_columns = [f"theta_{p:g}" for p in config.p]

    def blank(ticker: str) -> dict:
        return {"ticker": ticker, "n": np.nan, "mean": np.nan, "sd": np.nan, "tqcc": np.nan, "p_value": np.nan,
                "retained": False, "gamma1_hat": np.nan, "eta_hat": np.nan,
                **{c: np.nan for c in theta_columns}, "error": ""}

    index = _weekly(index_path)
    mean, sd = summary_stats(index)
    rows = [{**blank(index.ticker), "n": index.n, "mean": mean, "sd": sd}]
    for stock_path in stock_paths:
        row = blank(Path(stock_path).stem)
        with tracer().start_as_current_span("pipeline_stock") as span:
            try:
                stock = _weekly(stock_path)
                row["ticker"] = stock.ticker
                span.set_attribute("ticker", stock.ticker)
                sample = align_losses(stock, index)
                row["mean"], row["sd"] = summary_stats(stock)
                row["n"] = sample.n
                test = tqcc_pvalue(sample, config.null_reps, RngStream(config.seed), config.level, transform, config.workers)
                row.update(tqcc=test.statistic, p_value=test.p_value)
                if test.reject:
                    logger.info("%s: asymptotic independence rejected (p=%.4g); not estimated", stock.ticker, test.p_value)
                else:
                    estimates = _estimate_rows(sample, config)
                    row["gamma1_hat"] = float(estimates["gamma1_hat"].iloc[0])
                    row["eta_hat"] = float(estimates["eta_hat"].iloc[0])
                    for column, value in zip(theta_columns, estimates["theta_extreme"]):
                        row[column] = float(value)
                    row["retained"] = True
            except ConfigError:
                raise
            except TailGiniError as exc:
                logger.warning("%s: skipped (%s: %s)", row["ticker"], type(exc).__name__, exc)
                row.update({c: np.nan for c in ("gamma1_hat", "eta_hat", *theta_columns)})
                row.update(retained=False, error=f"{type(exc).__name__}: {exc}")
                span.set_attribute("error", type(exc).__name__)
        rows.append(row)
    columns = ["ticker", "n", "mean", "sd", "tqcc", "p_value", "retained", "gamma1_hat", "eta_hat",
               *theta_columns, "error"]
    return pd.DataFrame(rows, columns=columns)


def cmd_pipeline(args, config: RunConfig) -> int:
    report = pipeline_report(args.index, args.stocks, config, args.transform)
    write_table(config.out / "report.csv", report)
    write_run_metadata(config.out, "pipeline", config.model_dump())
    print(report.to_string(index=False))
    return 0


def cmd_sensitivity(args, config: RunConfig) -> int:
    sample = read_losses(args.file)
    rows = sensitivity_path(sample, args.fractions, config.p, config.alpha1, config.alpha2)
    frame = pd.DataFrame([asdict(r) for r in rows], columns=["parameter", "fraction", "count", "p", "value"])
    write_table(config.out / "sensitivity.csv", frame)
    print(frame.to_string(index=False))
    return 0


def cmd_serve(args, config: RunConfig | None) -> int:
    from tailgini.server import run

    run(args.transport)
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    load_dotenv()
    args = build_parser().parse_args(argv)
    try:
        config = None if args.command == "serve" else run_config(args)
        setup_logging(config.log_level if config else None)
        setup_observability()
        return args.handler(args, config)
    except TailGiniError as exc:
        print(f"tailgini {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
