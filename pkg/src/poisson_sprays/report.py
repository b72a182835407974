"""Batch verification runs with deterministic, byte-stable reports."""

from __future__ import annotations

import copy
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from . import __version__, catalog, conventions
from .connections import (
    ClassicalConnection,
    CotangentMetric,
    compatibility_defect,
    levi_civita_contravariant,
    metric_defect,
    torsion_tensor,
)
from .exceptions import ConfigError, DegenerateSampleError, DomainError
from .flow import IntegratorConfig, integrate_batch
from .geometry import BivectorField, ThreeForm, covector_field, jacobiator_from
from .realization import (
    boundary_formula,
    closedness_check,
    nondegeneracy_radius,
    orthogonality_defect,
    sample_from_bundle,
    zero_section_formula,
)
from .sprays import (
    SprayField,
    basic_spray,
    check_spray_axiom1,
    check_spray_homogeneity,
    metric_geodesic_spray,
)

CHECKS = (
    "jacobi",
    "spray-axioms",
    "zero-section",
    "realization",
    "orthogonality",
    "boundary-formula",
    "closedness",
    "radius",
    "twisted",
)

TOLERANCES = {
    "jacobi": 1e-9,
    "spray-axiom1": 1e-12,
    "spray-homogeneity": 1e-12,
    "zero-section": 1e-10,
    "realization": 1e-6,
    "orthogonality": 1e-6,
    "boundary-formula": 1e-6,
    "closedness": 1e-4,
    "radius": 0.0,
    "twisted": 1e-9,
}

THREADS_ENV = "POISSON_SPRAYS_THREADS"
MAX_EXPENSIVE = 10

EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3, 4


# configuration -----------------------------------------------------------------


@dataclass
class RunConfig:
    poisson: dict
    spray: Any = "basic"
    integrator: dict = field(default_factory=dict)
    samples: dict = field(default_factory=lambda: {"count": 0, "y_radius": 0.1, "seed": 0})
    checks: Optional[list] = None
    sigma: Optional[dict] = None
    expect: str = "poisson"
    output: dict = field(default_factory=dict)

    def echo(self) -> dict:
        return {
            "poisson": self.poisson,
            "spray": self.spray,
            "integrator": self.integrator,
            "samples": self.samples,
            "checks": None if self.checks is None else list(self.checks),
            "sigma": self.sigma,
            "expect": self.expect,
        }


@dataclass
class Resolved:
    pi: BivectorField
    entry: Optional[catalog.CatalogEntry]
    spray: SprayField
    metric: CotangentMetric
    cfg: IntegratorConfig
    sigma: Optional[ThreeForm]
    count: int
    x_radius: float
    y_radius: float
    seed: int


def parse_config(raw: dict) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "configuration must be a mapping")
    known = {"poisson", "spray", "integrator", "samples", "checks", "sigma", "expect", "output"}
    for key in raw:
        if key not in known:
            raise ConfigError(key, "unknown field")
    if "poisson" not in raw:
        raise ConfigError("poisson", "required")
    cfg = RunConfig(poisson=raw["poisson"])
    for key in known - {"poisson"}:
        if key in raw:
            setattr(cfg, key, copy.deepcopy(raw[key]))
    if cfg.checks is not None and (not isinstance(cfg.checks, list) or any(c not in CHECKS for c in cfg.checks)):
        raise ConfigError("checks", f"must be a list drawn from {', '.join(CHECKS)}")
    if cfg.expect not in ("poisson", "non-poisson"):
        raise ConfigError("expect", "must be 'poisson' or 'non-poisson'")
    return cfg


def _metric_from(choice, pi: BivectorField, default: np.ndarray) -> CotangentMetric:
    if choice in (None, "default"):
        G = default
    elif choice == "identity":
        G = np.eye(pi.dim)
    else:
        G = np.asarray(choice, dtype=float)
        if G.ndim == 1:
            G = np.diag(G)
    if G.shape != (pi.dim, pi.dim):
        raise ConfigError("spray.geodesic.metric", f"expected a {pi.dim}x{pi.dim} matrix")
    metric = CotangentMetric.constant(G, pi.chart)
    try:
        metric.check(np.zeros(pi.dim))
    except (ValueError, np.linalg.LinAlgError) as err:
        raise ConfigError("spray.geodesic.metric", str(err)) from None
    return metric


def resolve(cfg: RunConfig) -> Resolved:
    p = cfg.poisson
    entry = None
    if not isinstance(p, dict) or len(p) != 1:
        raise ConfigError("poisson", "expected exactly one of {builtin, polynomial}")
    if "builtin" in p:
        try:
            entry = catalog.get(p["builtin"])
        except KeyError as err:
            raise ConfigError("poisson.builtin", str(err.args[0])) from None
        pi, default_metric = entry.bivector, entry.metric
    elif "polynomial" in p:
        poly = p["polynomial"]
        try:
            dim = int(poly["dim"])
            pi = BivectorField.polynomial(poly["terms"], dim, float(poly.get("domain_radius", 1.0)), name="polynomial")
        except (KeyError, TypeError) as err:
            raise ConfigError("poisson.polynomial", f"missing or malformed field {err}") from None
        except ValueError as err:
            raise ConfigError("poisson.polynomial.terms", str(err)) from None
        default_metric = np.eye(dim)
    else:
        raise ConfigError("poisson", "expected one of {builtin, polynomial}")

    if cfg.spray == "basic" or cfg.spray == {"basic": {}}:
        metric = CotangentMetric.constant(default_metric, pi.chart)
        spray = basic_spray(pi)
    elif isinstance(cfg.spray, dict) and "geodesic" in cfg.spray:
        geo = cfg.spray["geodesic"] or {}
        metric = _metric_from(geo.get("metric"), pi, default_metric)
        spray = metric_geodesic_spray(pi, metric)
    else:
        raise ConfigError("spray", "expected 'basic' or {geodesic: {metric: ...}}")

    try:
        icfg = IntegratorConfig(**cfg.integrator)
    except TypeError as err:
        raise ConfigError("integrator", str(err)) from None
    except ValueError as err:
        raise ConfigError("integrator", str(err)) from None

    s = cfg.samples
    count = int(s.get("count", 0))
    if count < 0:
        raise ConfigError("samples.count", "must be non-negative")
    if count > 0 and "seed" not in s:
        raise ConfigError("samples.seed", "required when samples.count > 0")
    R = pi.chart.domain_radius
    y_radius = float(s.get("y_radius", 0.1))
    x_radius = float(s.get("x_radius", min(0.5 * R, 1.0) if np.isfinite(R) else 1.0))
    if y_radius > R:
        raise ConfigError("samples.y_radius", "must not exceed the chart domain radius")
    if x_radius >= R:
        raise ConfigError("samples.x_radius", "must be smaller than the chart domain radius")

    sigma = None
    if cfg.sigma is not None:
        try:
            sigma = ThreeForm.from_entries(pi.dim, cfg.sigma["entries"])
        except (KeyError, TypeError, ValueError, IndexError) as err:
            raise ConfigError("sigma.entries", f"malformed 3-form ({err})") from None
    elif entry is not None and entry.sigma is not None:
        sigma = entry.sigma
    if cfg.checks is None:
        # all applicable checks
        cfg.checks = [c for c in CHECKS if c != "twisted" or sigma is not None]
    elif "twisted" in cfg.checks and sigma is None:
        raise ConfigError("sigma", "the twisted check needs a 3-form")
    return Resolved(pi, entry, spray, metric, icfg, sigma, count, x_radius, y_radius, int(s.get("seed", 0)))


# sampling ----------------------------------------------------------------------


def _ball(rng: np.random.Generator, count: int, n: int, radius: float) -> np.ndarray:
    d = rng.standard_normal((count, n))
    norms = np.linalg.norm(d, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    r = radius * rng.uniform(0.0, 1.0, (count, 1)) ** (1.0 / n)
    return d / norms * r


def draw_samples(seed: int, count: int, n: int, x_radius: float, y_radius: float):
    """Sample set of the ``pcg64-ball-v1`` scheme.

    A PCG64 generator seeded with ``seed`` draws, in order: base points
    uniform in the ``x_radius`` ball, covectors uniform in the ``y_radius``
    ball (each as ``count`` normals then ``count`` radii), then ``count``
    pairs of standard-normal tangent vectors of length ``2n``.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    xs = _ball(rng, count, n, x_radius)
    ys = _ball(rng, count, n, y_radius)
    vw = rng.standard_normal((count, 2, 2 * n))
    return xs, ys, vw


# running -----------------------------------------------------------------------


def _rec(check, sample_id, defect, tol, passed=None, status="ok", **extra):
    if defect is not None and not math.isfinite(defect):
        defect = None
    if passed is None:
        passed = defect is not None and defect <= tol
    r = {"name": check, "sample_id": sample_id, "defect": defect, "tolerance": tol, "pass": bool(passed), "status": status}
    if extra:
        r["extra"] = extra
    return r


def _threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def _parallel_batch(spray, X0, cfg, threads, sigma=None):
    if len(X0) == 0:
        return []
    if threads <= 1 or len(X0) < 2:
        return integrate_batch(spray, X0, cfg, sigma=sigma)
    chunks = np.array_split(np.arange(len(X0)), min(threads, len(X0)))
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(lambda idx: integrate_batch(spray, X0[idx], cfg, sigma=sigma), chunks))
    return [b for part in parts for b in part]


def gauss_legendre_twisted(spray: SprayField, sigma: ThreeForm, bundle, nodes: int = 32) -> np.ndarray:
    """Quadrature of ``J^T S J`` over the dense output of a flow bundle."""
    from .flow import twist_matrix
    from .connections import DensePath

    n2 = 2 * spray.dim
    X = DensePath(bundle.t, bundle.states, bundle.velocities)
    Jd = np.einsum("kab,kbc->kac", bundle.field_jacobians, bundle.jacobians)
    J = DensePath(bundle.t, bundle.jacobians.reshape(len(bundle.t), -1), Jd.reshape(len(bundle.t), -1))
    s, w = np.polynomial.legendre.leggauss(nodes)
    t = 0.5 * (s + 1.0)
    total = np.zeros((n2, n2))
    for ti, wi in zip(t, w):
        Jt = J(ti).reshape(n2, n2)
        total += 0.5 * wi * Jt.T @ twist_matrix(spray, sigma, X(ti)) @ Jt
    return 0.5 * (total - total.T)


def run(cfg: RunConfig, threads: Optional[int] = None) -> dict:
    """Execute the configured checks and return the report as a plain dict."""
    res = resolve(cfg)
    threads = _threads() if threads is None else threads
    pi, spray, n = res.pi, res.spray, res.pi.dim
    xs, ys, vw = draw_samples(res.seed, res.count, n, res.x_radius, res.y_radius)
    records: list[dict] = []
    numerical = 0
    checks = set(cfg.checks)
    witness = res.entry.witness if res.entry is not None else None

    if "jacobi" in checks:
        pts = list(enumerate(xs))
        if witness is not None:
            pts.append(("witness", witness[0]))
        for sid, x in pts:
            J = jacobiator_from(pi.matrix(x), pi.derivative(x))
            tol = TOLERANCES["jacobi"] if pi.provenance == "analytic" else 1e-6
            records.append(_rec("jacobi", sid, float(np.max(np.abs(J))), tol))

    if "spray-axioms" in checks and res.count:
        X = np.concatenate([xs, ys], axis=1)
        for i in range(res.count):
            records.append(_rec("spray-axiom1", i, check_spray_axiom1(spray, X[i : i + 1]), TOLERANCES["spray-axiom1"]))
            hom = check_spray_homogeneity(spray, X[i : i + 1], (0.5, 2.0, 10.0))
            records.append(_rec("spray-homogeneity", i, hom, TOLERANCES["spray-homogeneity"]))

    if "zero-section" in checks and res.count:
        Z = np.concatenate([xs, np.zeros_like(xs)], axis=1)
        for i, b in enumerate(_parallel_batch(spray, Z, res.cfg, threads)):
            err = float(np.max(np.abs(b.omega() - zero_section_formula(pi, xs[i]))))
            records.append(_rec("zero-section", i, err, TOLERANCES["zero-section"]))

    need_flow = checks & {"realization", "orthogonality", "boundary-formula"}
    if need_flow:
        ids = list(range(res.count))
        X0 = [np.concatenate([xs[i], ys[i]]) for i in ids]
        vws = [vw[i] for i in ids]
        if witness is not None:
            ids.append("witness")
            X0.append(np.concatenate(witness))
            vws.append(np.random.Generator(np.random.PCG64(res.seed)).standard_normal((2, 2 * n)))
        X0 = np.asarray(X0).reshape(-1, 2 * n)
        bundles = _parallel_batch(spray, X0, res.cfg, threads)
        for sid, X, b, (v0, w0) in zip(ids, X0, bundles, vws):
            if not b.complete:
                for c in sorted(need_flow):
                    records.append(_rec(c, sid, None, TOLERANCES[c], False, "escaped", escape_time=b.escape_time))
                continue
            if "realization" in checks:
                s = sample_from_bundle(spray, X, b)
                records.append(_rec("realization", sid, s.poisson_defect, TOLERANCES["realization"], status=s.status))
                numerical += s.status == "degenerate"
            if "orthogonality" in checks:
                try:
                    d = orthogonality_defect(spray, X, res.cfg, bundle=b)
                    records.append(_rec("orthogonality", sid, d, TOLERANCES["orthogonality"]))
                except DegenerateSampleError:
                    numerical += 1
                    records.append(_rec("orthogonality", sid, None, TOLERANCES["orthogonality"], False, "degenerate"))
            if "boundary-formula" in checks:
                r = boundary_formula(spray, X, v0, w0, res.cfg, bundle=b)
                records.append(
                    _rec("boundary-formula", sid, r.defect, TOLERANCES["boundary-formula"],
                         chi_integral=r.chi_integral,
                         chi_residual=abs((r.lhs - r.rhs) - conventions.CHI_NORMALIZATION * r.chi_integral))
                )

    if "closedness" in checks:
        for i in range(min(res.count, MAX_EXPENSIVE)):
            try:
                d = closedness_check(spray, np.concatenate([xs[i], ys[i]]), res.cfg, 1e-3)
                records.append(_rec("closedness", i, d, TOLERANCES["closedness"]))
            except DomainError:
                records.append(_rec("closedness", i, None, TOLERANCES["closedness"], False, "escaped"))

    if "radius" in checks:
        for i in range(min(res.count, MAX_EXPENSIVE)):
            rad = nondegeneracy_radius(spray, xs[i], res.cfg, seed=res.seed + i)
            records.append(_rec("radius", i, rad, 0.0, rad > 0.0, x=[float(v) for v in xs[i]]))

    if "twisted" in checks and res.count:
        X0 = np.concatenate([xs, ys], axis=1)
        for i, b in enumerate(_parallel_batch(spray, X0, res.cfg, threads, sigma=res.sigma)):
            if not b.complete:
                records.append(_rec("twisted", i, None, TOLERANCES["twisted"], False, "escaped"))
                continue
            err = float(np.max(np.abs(b.twisted[-1] - gauss_legendre_twisted(spray, res.sigma, b))))
            det = float(np.linalg.det(b.omega() + b.twisted[-1]))
            records.append(_rec("twisted", i, err, TOLERANCES["twisted"], err <= TOLERANCES["twisted"] and abs(det) > 1e-12, det=det))

    return assemble(cfg, res, records, numerical)


def _sort_key(r):
    sid = r["sample_id"]
    return (r["name"], 0, sid, "") if isinstance(sid, int) else (r["name"], 1, 0, str(sid))


def summarize(records: list[dict]) -> dict:
    out: dict = {}
    for r in records:
        s = out.setdefault(r["name"], {"count": 0, "passed": 0, "failed": 0, "max_defect": None})
        s["count"] += 1
        s["passed" if r["pass"] else "failed"] += 1
        if r["defect"] is not None and (s["max_defect"] is None or r["defect"] > s["max_defect"]):
            s["max_defect"] = r["defect"]
    return out


def exit_code(records: list[dict], expect: str, numerical: int = 0) -> int:
    if numerical:
        return EXIT_NUMERICAL
    failed = any(not r["pass"] for r in records)
    if expect == "non-poisson":
        return EXIT_OK if failed else EXIT_FAILED
    return EXIT_FAILED if failed else EXIT_OK


def assemble(cfg: RunConfig, res: Resolved, records: list[dict], numerical: int = 0) -> dict:
    records = sorted(records, key=_sort_key)
    return {
        "metadata": {
            "version": __version__,
            "config": cfg.echo(),
            "conventions": conventions.metadata(),
            "integrator": res.cfg.as_dict(),
            "seed": res.seed,
            "bivector": pi_name(res),
        },
        "records": records,
        "summary": summarize(records),
        "status": {
            "all_passed": all(r["pass"] for r in records),
            "expect": cfg.expect,
            "numerical_failures": numerical,
            "exit_code": exit_code(records, cfg.expect, numerical),
        },
    }


def pi_name(res: Resolved) -> str:
    return res.entry.name if res.entry is not None else res.pi.name


def dumps(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True, allow_nan=False) + "\n"


# plot tables ---------------------------------------------------------------------

PLOT_KINDS = ("defect-histogram", "radius-vs-point", "omega-heatmap")


def export_plot_data(report: dict, kind: str) -> str:
    """Plain columnar table with a one-line header."""
    if kind not in PLOT_KINDS:
        raise ValueError(f"unknown plot kind {kind!r}; expected one of {', '.join(PLOT_KINDS)}")
    records = report.get("records", [])
    buf = io.StringIO()
    if kind == "defect-histogram":
        buf.write("check log10_lo log10_hi count\n")
        bins: dict = {}
        for r in records:
            if r["defect"] is None or r["name"] == "radius":
                continue
            lo = math.floor(math.log10(max(r["defect"], 1e-300)))
            bins[(r["name"], lo)] = bins.get((r["name"], lo), 0) + 1
        for (check, lo), c in sorted(bins.items()):
            buf.write(f"{check} {lo} {lo + 1} {c}\n")
    elif kind == "radius-vs-point":
        rows = [r for r in records if r["name"] == "radius"]
        n = len(rows[0]["extra"]["x"]) if rows else 0
        buf.write(" ".join(["sample_id", "radius"] + [f"x{i + 1}" for i in range(n)]) + "\n")
        for r in rows:
            buf.write(" ".join([str(r["sample_id"]), repr(r["defect"])] + [repr(v) for v in r["extra"]["x"]]) + "\n")
    else:
        buf.write("row col value abs\n")
        rows = [r for r in records if "omega" in r.get("extra", {})]
        if rows:
            om = np.asarray(rows[0]["extra"]["omega"], dtype=float)
            for i in range(om.shape[0]):
                for j in range(om.shape[1]):
                    buf.write(f"{i} {j} {float(om[i, j])!r} {abs(float(om[i, j]))!r}\n")
    return buf.getvalue()


# single-purpose reports used by the CLI ------------------------------------------


def realize_report(cfg: RunConfig, x, y) -> dict:
    from .realization import omega_at

    res = resolve(cfg)
    s = omega_at(res.spray, (np.asarray(x, dtype=float), np.asarray(y, dtype=float)), res.cfg)
    extra = {"x": [float(v) for v in s.xi.x], "y": [float(v) for v in s.xi.y]}
    if s.omega is not None:
        extra["omega"] = s.omega.tolist()
        extra["det"] = s.det
    if s.omega_inv is not None:
        extra["omega_inv"] = s.omega_inv.tolist()
    rec = _rec("omega", 0, s.poisson_defect, TOLERANCES["realization"], status=s.status, **extra)
    return assemble(cfg, res, [rec], int(s.status == "degenerate"))


def connection_records(pi: BivectorField, metric: CotangentMetric, xs: np.ndarray, rng: np.random.Generator) -> list[dict]:
    """Compatibility, Levi-Civita torsion and metric records (used by acceptance runs)."""
    flat = ClassicalConnection.flat(pi.chart)
    lc = levi_civita_contravariant(metric, pi)
    out = []
    for i, x in enumerate(xs):
        a, b = rng.standard_normal(pi.dim), rng.standard_normal(pi.dim)
        d = compatibility_defect(flat, pi, covector_field(a), covector_field(b), x)
        out.append(_rec("compatibility", i, float(np.max(np.abs(d))), 1e-9))
        out.append(_rec("lc-torsion", i, float(np.max(np.abs(torsion_tensor(lc, x)))), 1e-9))
        out.append(_rec("lc-metric", i, float(np.max(np.abs(metric_defect(lc, metric, x)))), 1e-9))
    return out
