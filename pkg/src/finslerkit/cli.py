"""Config-driven command line front end.

``run`` executes a batch of identity checks described by a YAML config and
writes machine-readable JSON/CSV reports; ``single`` runs one check at one
point; ``list-metrics`` and ``describe-check`` are self-documentation.

Exit status: 0 when no check failed (refusals are recorded, not failed),
1 when at least one check failed, 2 for config or model validation errors.
Reports are byte-identical for a fixed config and seed at any parallelism
degree: every task derives its randomness from the config seed and the
task key, and the report list is sorted before serialization.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import json
import multiprocessing
import sys
import time
import zlib
from dataclasses import asdict
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .expressions import ParseError
from .identities import (
    IdentityReport,
    check_algebra,
    check_berwald_theorem,
    check_bianchi,
    check_lemma1,
    check_lemma2,
    check_main_theorem,
    check_schur_corollary,
    check_section_invariance,
    check_stokes_torus,
    classify,
)
from .jets import JetError
from .metrics import (
    MetricModel,
    ModelValidationError,
    base_grid,
    builtin,
    builtin_names,
    domain_sample,
    parse_metric_dsl,
    parse_metric_file,
)
from .quadrature import DEFAULT_RESOLUTION, sphere_rule

_ORDER_NEEDED = {
    "lemma2": 2,
    "lemma1": 7,
    "main": 7,
    "schur": 7,
    "berwald": 6,
    "stokes": 4,
    "bianchi": 7,
    "section": 2,
    "algebra": 7,
    "classify": 6,
}

_CHECK_DESCRIPTIONS = {
    "lemma2": (
        "Fiber representation of the differential of a base function: for the "
        "differential of any function rho of the base point, d_i rho(x) times "
        "the fiber volume equals n times the fiber integral of "
        "(y^a d_a rho) y_i / F^2. Holds for every metric and every rho; a "
        "failure indicates a quadrature or pipeline defect."
    ),
    "lemma1": (
        "Diffeomorphism-invariance identity of the curvature functional: "
        "every Finsler metric has the pointwise property that the fiber "
        "integral of {g^{ab} Ric_{.a.b} - (n+2) Ric/F^2}_{|0} y_i/F^2 equals "
        "-2 times the fiber integral of pfrak_{|0} y_i/F^2, where pfrak = "
        "g^{ij}(P_{i|j} - P_i P_j + P_{i|0.j})."
    ),
    "main": (
        "Einstein representation: when Ric = rho(x) F^2, the differential of "
        "rho satisfies (n-2) d rho = -2n <pfrak_{|0} omega> with the "
        "degree-1-weighted fiber average of the Hilbert form. Refused on "
        "non-Einstein models."
    ),
    "schur": (
        "Constancy of the Einstein factor: a weakly Landsberg (or expanded "
        "Schur-scalar-vanishing) Einstein metric in dimension >= 3 has "
        "constant rho; then rho is constant across the base grid. Both the "
        "printed and the expanded Schur condition scalars are evaluated and "
        "logged side by side."
    ),
    "berwald": (
        "Quadratic-Ricci dichotomy: an Einstein metric with quadratic Ricci "
        "scalar (direction-independent vertical Hessian) in dimension >= 3 "
        "is either globally Ricci-flat or has constant rho. Non-quadratic "
        "models are recorded as out of scope."
    ),
    "stokes": (
        "Boundary-free integration on a periodic base: the bundle integrals "
        "of the horizontal divergence u_{|0} and of the vertical divergence "
        "of a 1-homogeneous vertical field vanish on the torus; any boundary "
        "term depending on the generator will automatically vanish."
    ),
    "bianchi": (
        "Classical contracted identity: the divergence of the Einstein "
        "tensor built from the quadratic-Ricci extraction vanishes, whatever "
        "the Riemannian metric may be."
    ),
    "section": (
        "Section invariance of fiber integration: recomputing the fiber "
        "volume on the scaled section y = lambda u changes nothing; the "
        "residual is pure roundoff."
    ),
    "algebra": (
        "Exact-AD algebraic invariants at one tangent sample: metric "
        "compatibility g_{ij|k} = 0, L_{|0} = 0, the contractions "
        "y^k C_ijk = 0 and y^i P_i = 0, the trace identity g^{ij}_{.i} = "
        "-2C^j, spray reproduction y^j y^k Gamma^i_jk = 2 G^i, the Hilbert "
        "form normalization, and the homogeneity ladder."
    ),
    "classify": (
        "Einstein / weakly-Landsberg / quadratic-Ricci / Riemannian "
        "classification over a base grid, with the implication chain "
        "riemannian => weakly landsberg => vanishing Schur scalars checked "
        "for coherence."
    ),
}


class ConfigError(ValueError):
    pass


# -- metric construction -------------------------------------------------------


def parse_metric_ref(ref: str) -> dict:
    """Parse a compact reference like ``funk(3)`` or ``sphere_round(3,1)``."""
    ref = ref.strip()
    if "(" not in ref:
        raise ConfigError(f"metric reference {ref!r} needs parameters, e.g. euclidean(3)")
    name, _, rest = ref.partition("(")
    if not rest.endswith(")"):
        raise ConfigError(f"unbalanced parentheses in metric reference {ref!r}")
    args = [a for a in rest[:-1].split(",") if a.strip()]
    name = name.strip()
    spec: dict = {"builtin": name, "dim": int(args[0])}
    vals = [float(a) for a in args[1:]]
    if name == "minkowski_randers":
        spec["b"] = vals if vals else [0.5] + [0.0] * (spec["dim"] - 1)
    elif name == "sphere_round":
        spec["radius"] = vals[0] if vals else 1.0
    elif name == "torus_conformal":
        spec["amplitude"] = vals[0] if vals else 0.1
    elif vals:
        raise ConfigError(f"unexpected parameters {vals} for builtin {name!r}")
    return spec


def build_metric(spec: dict) -> MetricModel:
    if "ref" in spec:
        spec = {**parse_metric_ref(spec["ref"]), **{k: v for k, v in spec.items() if k != "ref"}}
    if "builtin" in spec:
        name = spec["builtin"]
        dim = int(spec["dim"])
        kwargs = {}
        if name == "minkowski_randers":
            kwargs["b"] = np.asarray(spec.get("b", [0.5] + [0.0] * (dim - 1)), dtype=np.float64)
        elif name == "sphere_round":
            kwargs["radius"] = float(spec.get("radius", 1.0))
        elif name == "torus_conformal":
            kwargs["amplitude"] = float(spec.get("amplitude", 0.1))
        elif name == "riemannian":
            kwargs["g_exprs"] = spec["g"]
        elif name == "randers":
            if "alpha" in spec:
                kwargs["alpha"] = spec["alpha"]
            if "beta" in spec:
                kwargs["beta"] = spec["beta"]
        return builtin(name, dim, **kwargs)
    if "dsl" in spec:
        return parse_metric_dsl(
            spec["dsl"],
            int(spec["dim"]),
            name=spec.get("name", "user"),
            domain_expr=spec.get("domain"),
            positive_definite=bool(spec.get("positive_definite", True)),
            periodic=bool(spec.get("periodic", False)),
            box_half=float(spec.get("box_half", 1.0)),
        )
    if "file" in spec:
        return parse_metric_file(Path(spec["file"]).read_text(encoding="utf-8"))
    raise ConfigError(f"metric spec {spec} needs one of: ref, builtin, dsl, file")


def metric_key(spec: dict) -> str:
    if "ref" in spec:
        return spec["ref"]
    if "builtin" in spec:
        return f"{spec['builtin']}({spec.get('dim')})"
    if "dsl" in spec:
        return spec.get("name", "user")
    if "file" in spec:
        return Path(spec["file"]).stem
    return "unknown"


# -- task expansion and execution ------------------------------------------------


def _task_seed(config_seed: int, *parts) -> int:
    key = "|".join(str(p) for p in parts)
    return (config_seed * 1000003 + zlib.crc32(key.encode())) % (2**31)


def _select_points(model, check_item, config_seed, check_name):
    pts = check_item.get("points", 3)
    if isinstance(pts, int):
        x, y = domain_sample(
            model, pts, seed=_task_seed(config_seed, check_name, model.name, "points")
        )
        return [(xi, yi) for xi, yi in zip(x, y)]
    return [(np.asarray(p, dtype=np.float64), None) for p in pts]


def expand_tasks(config: dict) -> list[dict]:
    """Flatten the config into independent (model, check, point) tasks."""
    metric_specs = config.get("metrics", [])
    if not metric_specs:
        raise ConfigError("config lists no metrics")
    checks = config.get("checks", [])
    if not checks:
        raise ConfigError("config lists no checks")
    seed = int(config.get("seed", 0))
    order = int(config.get("jet_order", 7))
    tasks = []
    by_key = {metric_key(s): s for s in metric_specs}
    for check_item in checks:
        name = check_item.get("check")
        if name not in _CHECK_DESCRIPTIONS:
            raise ConfigError(f"unknown check {name!r}; see describe-check")
        need = _ORDER_NEEDED[name]
        if order < need:
            raise ConfigError(
                f"check {name!r} needs jet order >= {need}, config requests {order}"
            )
        wanted = check_item.get("metrics")
        keys = list(by_key) if wanted is None else wanted
        for key in keys:
            if key not in by_key:
                raise ConfigError(f"check {name!r} references unknown metric {key!r}")
            spec = by_key[key]
            model = build_metric(spec)
            params = {k: v for k, v in check_item.items() if k not in ("check", "metrics", "points")}
            params["jet_order"] = order
            if name in ("schur", "berwald", "stokes", "classify"):
                tasks.append(
                    dict(check=name, metric=spec, key=key, point=None, index=0, params=params,
                         seed=_task_seed(seed, name, key))
                )
            elif name == "lemma2":
                rhos = check_item.get("rho", ["x1"])
                if isinstance(rhos, str):
                    rhos = [rhos]
                for pi, (x, _) in enumerate(_select_points(model, check_item, seed, name)):
                    for ri, rho in enumerate(rhos):
                        p = dict(params)
                        p["rho"] = rho
                        tasks.append(
                            dict(check=name, metric=spec, key=key, point=x.tolist(),
                                 index=pi * 100 + ri, params=p, seed=_task_seed(seed, name, key, pi, ri))
                        )
            else:
                for pi, (x, y) in enumerate(_select_points(model, check_item, seed, name)):
                    p = dict(params)
                    if name == "algebra" and y is not None:
                        p["direction"] = y.tolist()
                    tasks.append(
                        dict(check=name, metric=spec, key=key, point=x.tolist(),
                             index=pi, params=p, seed=_task_seed(seed, name, key, pi))
                    )
    return tasks


def run_task(task: dict) -> dict:
    """Execute one task; returns report dict plus optional classification."""
    model = build_metric(task["metric"])
    name = task["check"]
    params = task["params"]
    order = int(params.get("jet_order", 7))
    n = model.dim
    resolution = params.get("resolution")
    tol = params.get("tolerance")
    rule = None
    if name in ("lemma2", "lemma1", "main", "stokes", "section", "schur"):
        rule = sphere_rule(n, resolution)
    classification = None
    if name == "lemma2":
        report = check_lemma2(model, params["rho"], task["point"], rule, tolerance=tol)
    elif name == "lemma1":
        report = check_lemma1(model, task["point"], rule, tolerance=tol, order=order)
    elif name == "main":
        report = check_main_theorem(
            model, task["point"], rule, tolerance=tol, order=order,
            grid_step=float(params.get("grid_step", 0.05)),
        )
    elif name == "schur":
        grid = base_grid(model, per_axis=int(params.get("grid_per_axis", 2)))
        report = check_schur_corollary(model, grid, rule, tolerance=tol, order=order)
    elif name == "berwald":
        grid = base_grid(model, per_axis=int(params.get("grid_per_axis", 2)))
        report = check_berwald_theorem(model, grid, tolerance=tol)
    elif name == "stokes":
        report = check_stokes_torus(
            model, rule, base_resolution=int(params.get("base_resolution", 12)), tolerance=tol
        )
    elif name == "bianchi":
        report = check_bianchi(model, task["point"], tolerance=tol)
    elif name == "section":
        report = check_section_invariance(
            model, task["point"], rule, lam=float(params.get("scale", 2.0)), tolerance=tol
        )
    elif name == "algebra":
        if params.get("direction") is not None:
            y = np.asarray(params["direction"], dtype=np.float64)
        else:
            _, ys = domain_sample(model, 1, seed=task["seed"])
            y = ys[0]
        report = check_algebra(
            model, task["point"], y, tolerance=tol if tol is not None else 1e-9, order=order
        )
    elif name == "classify":
        grid = base_grid(model, per_axis=int(params.get("grid_per_axis", 2)))
        cls = classify(model, grid)
        coherent = (not cls.riemannian or cls.weakly_landsberg)
        classification = asdict(cls)
        report = IdentityReport.build(
            "classify", model.name, grid[0],
            [float(cls.einstein_variance)], [0.0], 1.0,
            tol if tol is not None else 1.0, 0, 6,
            note=(
                f"einstein={cls.einstein}, weakly_landsberg={cls.weakly_landsberg}, "
                f"quadratic={cls.berwald_quadratic}, riemannian={cls.riemannian}, "
                f"coherent={coherent}"
            ),
        )
        if not coherent:
            report = IdentityReport(**{**asdict(report), "verdict": "fail"})
    else:  # pragma: no cover - guarded by expand_tasks
        raise ConfigError(f"unknown check {name!r}")
    out = asdict(report)
    out["_key"] = (task["check"], task["key"], task["index"])
    if classification is not None:
        out["_classification"] = classification
    return out


# -- serialization ----------------------------------------------------------------


def _round_floats(obj):
    if isinstance(obj, float):
        if obj != obj:  # NaN
            return None
        return float(f"{obj:.12g}")
    if isinstance(obj, (list, tuple)):
        return [_round_floats(v) for v in obj]
    if isinstance(obj, dict):
        return {k: _round_floats(v) for k, v in obj.items()}
    if isinstance(obj, np.ndarray):
        return _round_floats(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return _round_floats(float(obj))
    if isinstance(obj, (np.integer,)):
        return int(obj)
    return obj


def _fmt_cell(value) -> str:
    if isinstance(value, (list, tuple)):
        return ";".join(_fmt_cell(v) for v in value)
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.12g}"
    return str(value)


_CSV_COLUMNS = [
    "identity", "model", "point", "lhs", "rhs", "abs_residual",
    "rel_residual", "tolerance", "verdict", "resolution", "order", "note",
]


def write_reports(reports, classifications, config, json_path, csv_path, wall_time):
    summary = {
        "pass": sum(r["verdict"] == "pass" for r in reports),
        "fail": sum(r["verdict"] == "fail" for r in reports),
        "refused": sum(r["verdict"] == "refused" for r in reports),
    }
    payload = {
        "version": __version__,
        "config": _round_floats(config),
        "reports": _round_floats(reports),
        "classifications": _round_floats(classifications),
        "summary": summary,
        "wall_time_s": round(wall_time, 3),
    }
    if json_path:
        Path(json_path).parent.mkdir(parents=True, exist_ok=True)
        Path(json_path).write_text(
            json.dumps(payload, indent=2, sort_keys=True, allow_nan=False) + "\n",
            encoding="utf-8",
        )
    if csv_path:
        Path(csv_path).parent.mkdir(parents=True, exist_ok=True)
        with open(csv_path, "w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow(_CSV_COLUMNS)
            for rep in _round_floats(reports):
                writer.writerow([_fmt_cell(rep[c]) for c in _CSV_COLUMNS])
    return summary


# -- commands ----------------------------------------------------------------------


def command_run(args) -> int:
    t0 = time.time()
    try:
        config = yaml.safe_load(Path(args.config).read_text(encoding="utf-8"))
        if not isinstance(config, dict):
            raise ConfigError("config must be a mapping")
        if args.seed is not None:
            config["seed"] = args.seed
        tasks = expand_tasks(config)
    except (ConfigError, ModelValidationError, ParseError, OSError, JetError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    jobs = args.jobs or int(config.get("jobs", 1))
    results = []
    try:
        if jobs > 1:
            # spawned workers: the jit threading layer does not survive fork
            ctx = multiprocessing.get_context("spawn")
            with concurrent.futures.ProcessPoolExecutor(max_workers=jobs, mp_context=ctx) as pool:
                results = list(pool.map(run_task, tasks))
        else:
            results = [run_task(t) for t in tasks]
    except (ModelValidationError, ParseError, JetError, ValueError) as err:
        print(f"execution error: {err}", file=sys.stderr)
        return 2
    results.sort(key=lambda r: r["_key"])
    classifications = [r.pop("_classification") for r in results if "_classification" in r]
    for r in results:
        r.pop("_key")
    json_path = args.json or config.get("output", {}).get("json")
    csv_path = args.csv or config.get("output", {}).get("csv")
    summary = write_reports(
        results, classifications, config, json_path, csv_path, time.time() - t0
    )
    for rep in results:
        mark = {"pass": "PASS", "fail": "FAIL", "refused": "SKIP"}[rep["verdict"]]
        rel = rep["rel_residual"]
        rel_text = f"{rel:.3e}" if rel == rel else "-"
        print(f"{mark} {rep['identity']:<9s} {rep['model']:<24s} rel={rel_text}")
    print(
        f"summary: {summary['pass']} pass, {summary['fail']} fail, "
        f"{summary['refused']} refused ({time.time() - t0:.1f}s)"
    )
    return 1 if summary["fail"] else 0


def command_single(args) -> int:
    try:
        model = build_metric({"ref": args.metric})
    except (ConfigError, ModelValidationError, ParseError, ValueError) as err:
        print(f"metric error: {err}", file=sys.stderr)
        return 2
    params = {"jet_order": args.order}
    if args.resolution:
        params["resolution"] = args.resolution
    if args.rho:
        params["rho"] = args.rho
    if args.check == "lemma2" and "rho" not in params:
        params["rho"] = "x1"
    point = (
        [float(v) for v in args.point.split(",")]
        if args.point
        else domain_sample(model, 1, seed=args.seed)[0][0].tolist()
    )
    task = dict(
        check=args.check, metric={"ref": args.metric}, key=args.metric,
        point=point, index=0, params=params, seed=args.seed,
    )
    try:
        result = run_task(task)
    except (ConfigError, ModelValidationError, ParseError, JetError, ValueError) as err:
        print(f"execution error: {err}", file=sys.stderr)
        return 2
    result.pop("_key", None)
    result.pop("_classification", None)
    for key in _CSV_COLUMNS:
        print(f"{key:>14s}: {_fmt_cell(_round_floats(result[key]))}")
    return {"pass": 0, "refused": 0, "fail": 1}[result["verdict"]]


def command_list_metrics(_args) -> int:
    schemas = {
        "euclidean": "euclidean(n) -- flat quadratic metric |y|^2",
        "minkowski_randers": "minkowski_randers(n, b...) -- (|y| + b.y)^2 with constant |b| < 1",
        "riemannian": "riemannian(n, g=[[expr]]) -- quadratic metric g_ij(x) y^i y^j",
        "sphere_round": "sphere_round(n, radius) -- round sphere in a stereographic chart",
        "torus_conformal": "torus_conformal(n, amplitude<0.3) -- exp(2*a*sum sin x^i) |y|^2, 2pi-periodic",
        "randers": "randers(n, alpha=[[expr]], beta=[expr]) -- (sqrt(a_ij y^i y^j) + b_i(x) y^i)^2, |beta|_alpha < 1",
        "funk": "funk(n) -- Funk metric of the open unit ball",
    }
    for name in builtin_names():
        print(f"{name:<18s} {schemas[name]}")
    print("\nuser metrics: dsl expressions over x1..xn, y1..yn, or declaration files")
    print("(keys: name, dim, L, domain, positive_definite, periodic, box_half)")
    return 0


def command_describe_check(args) -> int:
    name = args.name
    if name not in _CHECK_DESCRIPTIONS:
        print(
            f"unknown check {name!r}; available: {', '.join(sorted(_CHECK_DESCRIPTIONS))}",
            file=sys.stderr,
        )
        return 2
    print(f"{name}: {_CHECK_DESCRIPTIONS[name]}")
    print(f"minimum jet order: {_ORDER_NEEDED[name]}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="finslerkit",
        description="Finsler curvature identity verification at desk scale",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a config of identity checks")
    p_run.add_argument("config", help="YAML config path")
    p_run.add_argument("--jobs", type=int, default=None, help="parallel worker count")
    p_run.add_argument("--json", default=None, help="JSON report path")
    p_run.add_argument("--csv", default=None, help="CSV report path")
    p_run.add_argument("--seed", type=int, default=None, help="override config seed")

    p_single = sub.add_parser("single", help="run one check at one point")
    p_single.add_argument("metric", help="metric reference, e.g. funk(3)")
    p_single.add_argument("check", help="check name, e.g. lemma2")
    p_single.add_argument("--point", default=None, help="comma-separated base point")
    p_single.add_argument("--rho", default=None, help="base function for lemma2")
    p_single.add_argument("--resolution", type=int, default=None)
    p_single.add_argument("--order", type=int, default=7)
    p_single.add_argument("--seed", type=int, default=0)

    sub.add_parser("list-metrics", help="enumerate built-in metric families")
    p_desc = sub.add_parser("describe-check", help="describe one identity check")
    p_desc.add_argument("name")

    args = parser.parse_args(argv)
    if args.command == "run":
        return command_run(args)
    if args.command == "single":
        return command_single(args)
    if args.command == "list-metrics":
        return command_list_metrics(args)
    return command_describe_check(args)


if __name__ == "__main__":
    raise SystemExit(main())
