"""Command-line driver: solve, verify, analyze, all.

Exit codes: 0 ok, 1 config error, 2 solver or analysis failure, 3 invariant
violation found by verify, 4 I/O or schema error.
"""
from __future__ import annotations
import argparse
import logging
import math
import sys
from pathlib import Path
from typing import Optional, Sequence

import matplotlib
import numpy as np
import pydantic
import scipy
from pydantic import ValidationError

from .. import verify
from ..boundary import EXTERIOR_CONVENTION, rescale
from ..errors import ConfigError, EmptyRegion, PGradError, SchemaError, StencilError
from ..interp import NetInterpolator
from ..schemas import SolverConfig
from ..solver import solve_interior
from ..types import CharGrid
from ..vacuum import (
    MinPressure,
    Ray,
    axis_slope_profile,
    bubble_report,
    decay_fit,
    deepest_decade,
    derivative_exponent,
    level_curve,
    min_pressure,
)
from . import plots, store
from .env import LOG_LEVEL, SERVICE_NAME, thread_cap
from .schemas import RunConfig, load_run_config

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_INVARIANT, EXIT_IO = 0, 1, 2, 3, 4


class InvariantViolation(PGradError):
    def __init__(self, report: verify.InvariantReport) -> None:
        self.report = report
        super().__init__(f"{report.violations} nodes violate invariants: {report.violating}")


def _workers(cfg: RunConfig) -> int:
    try:
        cap = thread_cap()
    except RuntimeError as exc:
        raise ConfigError(str(exc)) from exc
    return min(cfg.workers, cap) if cap is not None else cfg.workers


def _grid_path(cfg: RunConfig, grid: Optional[Path]) -> Path:
    return Path(grid) if grid is not None else cfg.output_dir / "grid.csv"


def load_grid(cfg: RunConfig, grid: Optional[Path]) -> CharGrid:
    """grid.csv with the solver settings and scale echoed in its meta.json, if present."""
    path = _grid_path(cfg, grid)
    meta = path.with_name("meta.json")
    solver_cfg, scale = cfg.solver_config(), cfg.p1
    if meta.is_file():
        doc = store.read_json(meta, "meta")
        scale = float(doc["p1"])
        echoed = {k: v for k, v in doc["config"].items() if k in SolverConfig.model_fields}
        try:
            solver_cfg = SolverConfig.model_validate(echoed)
        except ValidationError as exc:
            raise SchemaError(f"{meta}: config echo is not a solver config: {exc}") from exc
    return store.read_grid(path, solver_cfg, scale=scale)


def _min_pressure_doc(low: MinPressure) -> dict:
    return {
        "value": low.value,
        "index": list(low.index),
        "r": low.r,
        "theta": low.theta,
        "arc_value": low.arc_value,
    }


# --- solve -------------------------------------------------------------------------


def run_solve(cfg: RunConfig) -> CharGrid:
    grid = solve_interior(cfg.solver_config(), workers=_workers(cfg))
    if cfg.p1 != 1.0:
        grid = rescale(grid, cfg.p1)
    out = cfg.output_dir
    store.write_grid(grid, out / "grid.csv")
    meta = {
        "schema_version": store.SCHEMA_VERSION,
        "service": SERVICE_NAME,
        "config": cfg.model_dump(mode="json"),
        "diagnostics": {
            "counts": grid.meta["counts"],
            "max_iterations": grid.meta["max_iterations"],
            "max_mismatch": grid.meta["max_mismatch"],
        },
        "versions": {
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "matplotlib": matplotlib.__version__,
            "pydantic": pydantic.VERSION,
        },
        "p1": cfg.p1,
        "grid_columns": list(store.GRID_COLUMNS),
        "exterior_convention": EXTERIOR_CONVENTION,
    }
    store.write_json(meta, out / "meta.json", "meta")
    return grid


# --- verify ------------------------------------------------------------------------


def _residual_box(cfg: RunConfig, grid: CharGrid) -> tuple[float, float, float, float]:
    root = math.sqrt(grid.scale)
    r_lo, r_hi, t_lo, t_hi = cfg.residual_box
    return (r_lo * root, r_hi * root, t_lo, t_hi)


def run_verify(cfg: RunConfig, grid_path: Optional[Path] = None) -> dict:
    """Write verify.json, residual.csv and integral_checks.csv; return the report."""
    grid = load_grid(cfg, grid_path)
    out = cfg.output_dir
    p_min = cfg.check_p_min * grid.scale

    invariants = verify.check_signs_and_monotonicity(grid)
    decomposition = verify.check_decomposition(grid, p_min=p_min)

    pde = None
    residual_rows = []
    try:
        raster = verify.resample_to_polar(
            grid, cfg.n_r, cfg.n_theta, method=cfg.residual_method, box=_residual_box(cfg, grid)
        )
        field = verify.residual_pde(raster)
        pde = {
            "method": cfg.residual_method,
            "norm_inf": field.norm_inf,
            "norm_l2": field.norm_l2,
            "samples": field.count,
            "skipped": field.skipped,
        }
        residual_rows += [
            ("pde", *row) for row in zip(field.r, field.theta, field.value, field.width)
        ]
    except (EmptyRegion, StencilError) as exc:
        logger.warning("pde residual skipped: %s", exc)
    residual_rows += [
        ("decomposition", *row)
        for row in zip(
            decomposition.r, decomposition.theta, decomposition.value, decomposition.width
        )
    ]
    store.write_csv(out / "residual.csv", ("kind", "r", "theta", "value", "width"), residual_rows)

    checks = verify.integral_checks(grid, p_min=p_min)
    store.write_csv(
        out / "integral_checks.csv",
        ("i", "j", "family", "lhs", "rhs", "prefactor", "rel_err"),
        (
            (c.node.i, c.node.j, c.family, c.lhs, c.rhs, c.prefactor, c.rel_err)
            for c in checks
        ),
    )
    errs = np.array([c.rel_err for c in checks])
    sup = verify.sup_ratio(grid)
    low = min_pressure(grid)
    report = {
        "schema_version": store.SCHEMA_VERSION,
        "checked": invariants.checked,
        "violations": invariants.violations,
        "violation_counts": invariants.counts(),
        "violating_nodes": [list(ij) for ij in invariants.violating],
        "pde_residual": pde,
        "decomposition": {
            "norm_inf": decomposition.norm_inf,
            "norm_l2": decomposition.norm_l2,
            "samples": decomposition.count,
            "form_gap": decomposition.form_gap,
        },
        "integral_checks": {
            "count": int(errs.size),
            "median": float(np.median(errs)) if errs.size else None,
            "p90": float(np.percentile(errs, 90)) if errs.size else None,
            "max": float(errs.max()) if errs.size else None,
        },
        "sup_ratio": {"value": sup.value, "index": list(sup.index), "r": sup.r, "theta": sup.theta},
        "m2_analog": verify.m2_analog(grid),
        "min_pressure": _min_pressure_doc(low),
    }
    store.write_json(report, out / "verify.json", "verify_report")
    logger.info(
        "verify: %d violations, sup ratio %.6g, median integral rel err %s",
        invariants.violations, sup.value, report["integral_checks"]["median"],
    )
    if invariants.violations:
        raise InvariantViolation(invariants)
    return report


# --- analyze -----------------------------------------------------------------------


def run_analyze(cfg: RunConfig, grid_path: Optional[Path] = None) -> dict:
    """Write decay.csv, levels.csv, profile.csv, bubble.json and the figures."""
    grid = load_grid(cfg, grid_path)
    out = cfg.output_dir
    interp = NetInterpolator(grid)
    ray = Ray(grid, interp)

    window = deepest_decade(grid, cfg.decay_theta, ray)
    fit = decay_fit(grid, cfg.decay_theta, r_window=window, ray=ray)
    r_dec = np.linspace(window[0], window[1], 64)
    p_dec = np.exp(ray.log_p(r_dec, cfg.decay_theta))
    kept = np.isfinite(p_dec) & (r_dec >= fit.r_range[0]) & (r_dec <= fit.r_range[1])
    r_dec, p_dec = r_dec[kept], p_dec[kept]
    store.write_csv(
        out / "decay.csv",
        ("r", "p", "ln_p", "inv_r"),
        zip(r_dec, p_dec, np.log(p_dec), 1.0 / r_dec),
    )

    curves = [level_curve(grid, e, ray=ray) for e in cfg.epsilons]
    store.write_csv(
        out / "levels.csv",
        ("epsilon", "theta", "r"),
        (
            (c.epsilon, t, r)
            for c in curves
            for t, r in zip(c.theta[c.covered], c.r[c.covered])
        ),
    )

    r_prof = np.linspace(0.0, ray.r_max, 257)[1:]
    theta_prof = np.full(r_prof.shape, cfg.decay_theta)
    prof = {name: interp.polar(r_prof, theta_prof, name) for name in ("p", "dp_plus", "dp_minus")}
    ok = np.isfinite(prof["p"])
    store.write_csv(
        out / "profile.csv",
        ("r", "p", "dp_plus", "dp_minus"),
        zip(r_prof[ok], prof["p"][ok], prof["dp_plus"][ok], prof["dp_minus"][ok]),
    )

    bubble = bubble_report(grid, cfg.epsilons, delta=cfg.delta)
    try:
        exponent = derivative_exponent(grid, cfg.decay_theta)
        exponent_doc = {
            "exponent": exponent.exponent,
            "prefactor": exponent.prefactor,
            "r_squared": exponent.r_squared,
            "n_points": exponent.n_points,
        }
    except EmptyRegion as exc:
        logger.warning("derivative exponent skipped: %s", exc)
        exponent_doc = None
    low = min_pressure(grid)
    for family in ("plus", "minus"):
        profile = axis_slope_profile(grid, family)
        if len(profile.arc):
            logger.info(
                "%s arc: dθ/dr from %.4g to %.4g toward the axis",
                family, profile.arc[0, 2], profile.arc[-1, 2],
            )
    doc = {
        "schema_version": store.SCHEMA_VERSION,
        "delta": bubble.delta,
        "levels": [
            {"epsilon": e, "sup_r": r, "sup_theta": t, "rel_err": err}
            for e, r, t, err in zip(bubble.epsilons, bubble.sup_r, bubble.sup_theta, bubble.rel_err)
        ],
        "shrinkage_fit": {"c": bubble.c, "M0": bubble.M0},
        "decreasing": bubble.decreasing,
        "consistent": bubble.consistent,
        "decay_fit": {
            "theta": fit.theta,
            "c": fit.c,
            "M0": fit.M0,
            "r_range": list(fit.r_range),
            "r_squared": fit.r_squared,
            "n_points": fit.n_points,
        },
        "derivative_exponent": exponent_doc,
        "min_pressure": _min_pressure_doc(low),
    }
    store.write_json(doc, out / "bubble.json", "bubble")

    if cfg.plots:
        size = cfg.figure_size
        plots.characteristics_svg(grid, out / "characteristics.svg", size)
        plots.levels_svg(curves, grid, out / "levels.svg", size)
        plots.decay_svg(r_dec, p_dec, fit, out / "decay.svg", size)
        plots.field_svg(grid, out / "field.svg", size, interp=interp)
    return doc


# --- entry point -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="flat key = value config file")
    common.add_argument("--out", type=Path, dest="output_dir", help="output directory")
    common.add_argument("--n-seeds", type=int, dest="n_seeds")
    common.add_argument("--p-floor", type=float, dest="p_floor")
    common.add_argument("--p1", type=float)
    common.add_argument("--epsilons", help="comma-separated levels, e.g. 1e-2,1e-3,1e-4")
    common.add_argument("--no-plots", action="store_false", dest="plots", default=None)

    parser = argparse.ArgumentParser(
        prog="pgrad",
        description="Characteristic solver and checks for the pressure-gradient quadrant problem.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("solve", parents=[common], help="march the characteristic net")
    for name, text in (("verify", "check a solved grid"), ("analyze", "near-vacuum analysis")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("--grid", type=Path, help="grid.csv (default: <out>/grid.csv)")
    sub.add_parser("all", parents=[common], help="solve, verify and analyze")
    return parser


def _overrides(args: argparse.Namespace) -> dict:
    keys = ("output_dir", "n_seeds", "p_floor", "p1", "epsilons", "plots")
    return {k: getattr(args, k) for k in keys}


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(
        level=LOG_LEVEL,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    args = build_parser().parse_args(argv)
    try:
        cfg = load_run_config(args.config, _overrides(args))
        grid_path = getattr(args, "grid", None)
        if args.command == "solve":
            run_solve(cfg)
        elif args.command == "verify":
            run_verify(cfg, grid_path)
        elif args.command == "analyze":
            run_analyze(cfg, grid_path)
        else:
            run_solve(cfg)
            try:
                run_verify(cfg)
            except InvariantViolation:
                run_analyze(cfg)
                raise
            run_analyze(cfg)
    except (ConfigError, ValidationError) as exc:
        logger.error("config error: %s", exc)
        return EXIT_CONFIG
    except InvariantViolation as exc:
        logger.error("%s", exc)
        return EXIT_INVARIANT
    except (SchemaError, OSError) as exc:
        logger.error("i/o error: %s", exc)
        return EXIT_IO
    except PGradError as exc:
        logger.error("solver error: %s", exc)
        return EXIT_SOLVER
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
