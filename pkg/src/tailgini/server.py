import json
import logging
import os
import sys
from typing import List, Optional

from dotenv import load_dotenv
from mcp.server.fastmcp import FastMCP

from tailgini.errors import TailGiniError
from tailgini.estimators import TailConfig, extrapolation_exponent as _exponent, fit_tail_gini
from tailgini.observability import setup_logging, setup_observability
from tailgini.sample_core import PairedSample
from tailgini.simulation import PUBLISHED_TRUE_VALUES, resolve_model, true_tg_replicates
from tailgini.tailtest import DEFAULT_NULL_REPS, tqcc_pvalue
from tailgini.workers import RngStream

load_dotenv()

logger = logging.getLogger(__name__)

# Desk-sized oracle so a tool call finishes in seconds
TOOL_ORACLE_REPS = 20
TOOL_ORACLE_SIZE = 100_000

server = FastMCP("Tail Gini Estimator")


def _error(exc: TailGiniError) -> str:
    return json.dumps({"error": type(exc).__name__, "message": str(exc)})


@server.tool(
    name="estimate_tail_gini",
    title="Estimate tail Gini",
    description="Estimates TG_p(X;Y) for paired losses x (individual) and y (systemic) at extreme levels p",
)
async def estimate_tail_gini(
    x: List[float],
    y: List[float],
    p: List[float],
    alpha: float = 0.09,
    alpha1: float = 0.05,
    alpha2: float = 0.05,
) -> str:
    """
    Fits the asymptotic-independence estimator and the eta = 1 baseline.

    Args:
        x: Losses of the individual series
        y: Losses of the systemic series, same length as x
        p: Extreme levels, each at most alpha
        alpha, alpha1, alpha2: Tail fractions for the intermediate estimate, gamma1 and eta
    """
    try:
        sample = PairedSample(x, y)
        result = []
        for level in p:
            fit = fit_tail_gini(sample, TailConfig.from_fractions(sample.n, level, alpha, alpha1, alpha2))
            result.append({
                "p": level,
                "theta_extreme": fit.theta_extreme,
                "theta_hw": fit.theta_hw,
                "theta_intermediate": fit.theta_intermediate,
                "gamma1_hat": fit.gamma1_hat,
                "eta_hat": fit.eta_hat,
                "k": fit.config.k,
                "k_below_rate_bound": fit.diagnostics.k_below_rate_bound,
            })
    except TailGiniError as exc:
        return _error(exc)
    return json.dumps(result, indent=2)


@server.tool(
    name="test_asymptotic_independence",
    title="Test asymptotic independence",
    description="Permutation test of asymptotic independence between x and y based on the tail quotient correlation",
)
async def test_asymptotic_independence(
    x: List[float],
    y: List[float],
    null_reps: int = DEFAULT_NULL_REPS,
    seed: int = 0,
    level: float = 0.05,
) -> str:
    try:
        result = tqcc_pvalue(PairedSample(x, y), null_reps, RngStream(seed), level)
    except TailGiniError as exc:
        return _error(exc)
    return json.dumps({
        "tqcc": result.statistic,
        "p_value": result.p_value,
        "reject": result.reject,
        "transform": result.transform,
    }, indent=2)


@server.tool(
    name="true_tail_gini",
    title="True tail Gini of a simulation model",
    description="Monte Carlo true value of TG_p for a simulation model (model1a..model1d, model2, custom:a1,a2)",
)
async def true_tail_gini(model: str, p: float, seed: int = 0, reps: Optional[int] = None) -> str:
    """
    Args:
        model: Preset name or custom:a1,a2
        p: Extreme level
        seed: Master seed
        reps: Replications (defaults to a small desk run)
    """
    try:
        sim = resolve_model(model)
        run = true_tg_replicates(sim, p, reps or TOOL_ORACLE_REPS, TOOL_ORACLE_SIZE, RngStream(seed))
    except TailGiniError as exc:
        return _error(exc)
    return json.dumps({
        "model": sim.label,
        "p": p,
        "true_value": run.value,
        "published": PUBLISHED_TRUE_VALUES.get((sim.label, p)),
        "excluded": run.excluded,
    }, indent=2)


@server.tool(
    name="extrapolation_exponent",
    title="Extrapolation exponent",
    description="Returns 1 - 1/eta + gamma1, the power of k/(np) used to extrapolate from the intermediate level",
)
async def extrapolation_exponent(gamma1: float, eta: float) -> str:
    if eta <= 0:
        return json.dumps({"error": "ConfigError", "message": f"eta={eta} must be positive"})
    return json.dumps({"gamma1": gamma1, "eta": eta, "exponent": _exponent(gamma1, eta)})


@server.tool(
    name="health",
    title="Health check",
    description="Checks that the server is alive",
)
async def health() -> str:
    return "ok"


def run(transport_type: str = "http") -> None:
    setup_logging()
    setup_observability(service_name="tailgini-server")
    server.settings.log_level = os.environ.get("LOG_LEVEL", "CRITICAL")

    if transport_type == "http":
        server.settings.port = int(os.environ.get("PORT", 3001))
        server.settings.host = "127.0.0.1"
        logger.info("Starting MCP server (http) on %s:%s", server.settings.host, server.settings.port)
        server.run(transport="streamable-http")
    elif transport_type == "stdio":
        logger.info("Starting MCP server (stdio)")
        server.run(transport="stdio")
    else:
        raise ValueError(f"Invalid transport type {transport_type!r}. Use 'http' or 'stdio'.")


if __name__ == "__main__":
    try:
        run(sys.argv[1] if len(sys.argv) > 1 else "http")
    except ValueError as exc:
        print(exc)
        sys.exit(1)
