"""Command-line driver: ``poisson-sprays <verb> [options]``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import catalog, report
from .geometry import jacobiator
from .exceptions import CapabilityError, ConfigError, DegenerateSampleError, DomainError


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.replace(",", " ").split()]


def _add_run_flags(p: argparse.ArgumentParser, checks: bool = True) -> None:
    p.add_argument("--config", type=Path, help="JSON run configuration; flags override its fields")
    p.add_argument("--example", help="catalog entry (poisson.builtin)")
    p.add_argument("--polynomial", type=Path, help="JSON file of monomial terms with dim and domain_radius")
    p.add_argument("--spray", choices=("basic", "geodesic"))
    p.add_argument("--metric", help="geodesic metric: 'identity' or comma-separated diagonal")
    p.add_argument("--method", choices=("rk4-fixed", "rk45-adaptive"))
    p.add_argument("--steps", type=int)
    p.add_argument("--count", type=int, help="samples.count")
    p.add_argument("--seed", type=int, help="samples.seed")
    p.add_argument("--y-radius", type=float, help="samples.y_radius")
    p.add_argument("--x-radius", type=float, help="samples.x_radius")
    if checks:
        p.add_argument("--checks", help="comma-separated subset of " + ",".join(report.CHECKS))
    p.add_argument("--expect", choices=("poisson", "non-poisson"))
    p.add_argument("--output", type=Path, help="write the report here instead of stdout")
    p.add_argument("--threads", type=int, help=f"worker threads (default from ${report.THREADS_ENV})")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="poisson-sprays", description="Symplectic realizations from Poisson sprays.")
    sub = parser.add_subparsers(dest="verb", required=True)

    sub.add_parser("list-examples", help="list catalog entries")

    p = sub.add_parser("check-jacobi", help="jacobiator defect at sampled points")
    _add_run_flags(p, checks=False)
    p.add_argument("--x", help="evaluate at this point only")

    p = sub.add_parser("realize", help="omega and its Poisson defect at one cotangent point")
    _add_run_flags(p, checks=False)
    p.add_argument("--x", required=True)
    p.add_argument("--y", required=True)

    p = sub.add_parser("verify", help="run the configured checks over a seeded sample set")
    _add_run_flags(p)

    p = sub.add_parser("radius", help="nondegeneracy radius at sampled base points")
    _add_run_flags(p, checks=False)

    p = sub.add_parser("export", help="plot-ready table from a report")
    p.add_argument("--report", type=Path, required=True)
    p.add_argument("--kind", required=True, help="one of " + ", ".join(report.PLOT_KINDS))
    p.add_argument("--output", type=Path)
    return parser


def _load_config(args) -> dict:
    raw: dict = {}
    if getattr(args, "config", None) is not None:
        try:
            raw = json.loads(args.config.read_text())
        except OSError as err:
            raise ConfigError("--config", str(err)) from None
        except json.JSONDecodeError as err:
            raise ConfigError("--config", f"invalid JSON ({err})") from None
        if not isinstance(raw, dict):
            raise ConfigError("<root>", "configuration must be a mapping")
    if args.example is not None:
        raw["poisson"] = {"builtin": args.example}
    if args.polynomial is not None:
        try:
            raw["poisson"] = {"polynomial": json.loads(args.polynomial.read_text())}
        except (OSError, json.JSONDecodeError) as err:
            raise ConfigError("--polynomial", str(err)) from None
    if args.spray == "basic":
        raw["spray"] = "basic"
    elif args.spray == "geodesic" or args.metric is not None:
        metric = args.metric or "default"
        if metric not in ("identity", "default"):
            try:
                metric = _floats(metric)
            except ValueError:
                raise ConfigError("spray.geodesic.metric", f"cannot parse {args.metric!r}") from None
        raw["spray"] = {"geodesic": {"metric": metric}}
    integ = raw.setdefault("integrator", {})
    if args.method is not None:
        integ["method"] = args.method
    if args.steps is not None:
        integ["steps"] = args.steps
    samples = raw.setdefault("samples", {})
    for flag, key in (("count", "count"), ("seed", "seed"), ("y_radius", "y_radius"), ("x_radius", "x_radius")):
        if getattr(args, flag) is not None:
            samples[key] = getattr(args, flag)
    if getattr(args, "checks", None):
        raw["checks"] = [c.strip() for c in args.checks.split(",") if c.strip()]
    if args.expect is not None:
        raw["expect"] = args.expect
    if args.output is not None:
        raw["output"] = {"path": str(args.output), "format": "json"}
    raw.setdefault("poisson", {"builtin": "so3-star"})
    return raw


def _emit(text: str, path: Optional[Path]) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        path.write_text(text)


def _output_path(args, cfg: report.RunConfig) -> Optional[Path]:
    if getattr(args, "output", None) is not None:
        return args.output
    out = cfg.output.get("path") if isinstance(cfg.output, dict) else None
    return Path(out) if out else None


def _run_verb(args) -> int:
    raw = _load_config(args)
    if args.verb == "check-jacobi":
        raw["checks"] = ["jacobi"]
        if args.x is not None:
            return _jacobi_at(args, raw, _floats(args.x))
    elif args.verb == "radius":
        raw["checks"] = ["radius"]
    elif args.verb == "realize":
        raw.pop("checks", None)
        cfg = report.parse_config(raw)
        rep = report.realize_report(cfg, _floats(args.x), _floats(args.y))
        _emit(report.dumps(rep), _output_path(args, cfg))
        return rep["status"]["exit_code"]
    if args.verb != "verify":
        # convenience defaults for the single-check verbs; verify insists on an explicit seed
        raw["samples"].setdefault("count", 10)
        raw["samples"].setdefault("seed", 0)
    cfg = report.parse_config(raw)
    rep = report.run(cfg, threads=args.threads)
    _emit(report.dumps(rep), _output_path(args, cfg))
    return rep["status"]["exit_code"]


def _jacobi_at(args, raw: dict, x: list[float]) -> int:
    cfg = report.parse_config(raw)
    res = report.resolve(cfg)
    x = res.pi.chart.check(np.asarray(x, dtype=float))
    J = jacobiator(res.pi, x)
    d = float(np.max(np.abs(J)))
    tol = report.TOLERANCES["jacobi"] if res.pi.provenance == "analytic" else 1e-6
    rec = report._rec("jacobi", 0, d, tol, x=[float(v) for v in x])
    rep = report.assemble(cfg, res, [rec])
    _emit(report.dumps(rep), _output_path(args, cfg))
    return rep["status"]["exit_code"]


def _list_examples() -> int:
    for e in catalog.catalog():
        tag = "poisson" if e.poisson else "non-poisson"
        sys.stdout.write(f"{e.name:<22} n={e.bivector.dim}  R={e.domain_radius:g}  {tag:<11}  {e.description}\n")
    return 0


def _export(args) -> int:
    try:
        rep = json.loads(args.report.read_text())
    except (OSError, json.JSONDecodeError) as err:
        raise ConfigError("--report", str(err)) from None
    try:
        table = report.export_plot_data(rep, args.kind)
    except ValueError as err:
        raise ConfigError("--kind", str(err)) from None
    _emit(table, args.output)
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.verb == "list-examples":
            return _list_examples()
        if args.verb == "export":
            return _export(args)
        return _run_verb(args)
    except ConfigError as err:
        sys.stderr.write(f"configuration error: {err}\n")
        return report.EXIT_CONFIG
    except DomainError as err:
        sys.stderr.write(f"domain error: {err}\n")
        return report.EXIT_CONFIG
    except (DegenerateSampleError, np.linalg.LinAlgError, CapabilityError, FloatingPointError) as err:
        sys.stderr.write(f"numerical failure: {err}\n")
        return report.EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
