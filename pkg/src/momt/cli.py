"""Command-line entry point: solve, reduce, diagnose, scenario.

Exit codes are a stable contract: 0 success, 2 input or validation failure,
3 numerical or solver failure.  All randomness flows through --seed; output
files are deterministic functions of the inputs.

Instance files are UTF-8 JSON (axes are 1-based in files and flags):

    {"version": 1,
     "spaces": [{"name": "X", "points": [[0.0, 0.0], [1.0, 0.0]]}, ...],
     "weights": [[0.5, 0.5], ...],
     "cost": {"builtin": "surplus"}          # or {"tensor": nested lists}
             # gromovWasserstein adds "xi" and "A"
     "sense": "max"}
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import lp
from .costs import BUILTIN_KINDS, CostSpec
from .errors import (
    InstanceTooLarge,
    MomtError,
    NonFiniteCost,
    SchemaError,
    SolverError,
)
from .extremality import check_c_extreme, check_cyclical_monotonicity, fiber_report
from .instance import DiscreteInstance, prune_zero_atoms
from .measure import DiscreteMeasure, Space
from .reduction import IndexSubset, reduce, verify_reduction_optimality
from .scenarios import ALIASES, SCENARIO_KINDS, ScenarioConfig, run_scenario
from .serialize import dump_text, write_csv
from .tolerances import GAP_TOL

SCHEMA_VERSION = 1
_EXIT_VALIDATION = 2
_EXIT_SOLVER = 3


# ---------------------------------------------------------------------------
# instance file handling
# ---------------------------------------------------------------------------

def load_instance_dict(doc: dict) -> DiscreteInstance:
    if not isinstance(doc, dict):
        raise SchemaError("document", "top level must be an object")
    if doc.get("version") != SCHEMA_VERSION:
        raise SchemaError("version", f"expected {SCHEMA_VERSION}, got {doc.get('version')!r}")
    spaces_doc = doc.get("spaces")
    weights_doc = doc.get("weights")
    if not isinstance(spaces_doc, list) or not spaces_doc:
        raise SchemaError("spaces", "need a nonempty list of spaces")
    if not isinstance(weights_doc, list) or len(weights_doc) != len(spaces_doc):
        raise SchemaError("weights", "need one weight vector per space")
    spaces, measures = [], []
    for k, (sd, wd) in enumerate(zip(spaces_doc, weights_doc)):
        try:
            space = Space(str(sd.get("name", f"S{k + 1}")),
                          np.asarray(sd["points"], dtype=float))
        except (KeyError, TypeError, ValueError, MomtError) as exc:
            raise SchemaError(f"spaces[{k}]", str(exc)) from exc
        w = np.asarray(wd, dtype=float)
        if w.ndim != 1 or w.shape[0] != space.size:
            raise SchemaError(f"weights[{k}]",
                              f"{w.shape} does not match {space.size} atoms")
        if abs(w.sum() - 1.0) > 1e-12:
            raise SchemaError(f"weights[{k}]", f"weights sum to {w.sum()!r}, expected 1")
        try:
            measures.append(DiscreteMeasure(space, w))
        except MomtError as exc:
            raise SchemaError(f"weights[{k}]", str(exc)) from exc
        spaces.append(space)

    cost_doc = doc.get("cost")
    if not isinstance(cost_doc, dict):
        raise SchemaError("cost", "need an object with 'builtin' or 'tensor'")
    sense = doc.get("sense", "min")
    if sense not in ("min", "max"):
        raise SchemaError("sense", f"must be 'min' or 'max', got {sense!r}")
    try:
        if "tensor" in cost_doc:
            spec = CostSpec("tensor", sense,
                            {"values": np.asarray(cost_doc["tensor"], dtype=float)})
        elif "builtin" in cost_doc:
            kind = cost_doc["builtin"]
            if kind not in BUILTIN_KINDS or kind in ("tensor", "custom"):
                raise SchemaError("cost.builtin", f"unknown builtin {kind!r}")
            params = {}
            if kind == "gromovWasserstein":
                params = {"xi": float(cost_doc["xi"]),
                          "A": np.asarray(cost_doc["A"], dtype=float)}
            spec = CostSpec(kind, sense, params)
        else:
            raise SchemaError("cost", "need 'builtin' or 'tensor'")
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError("cost", str(exc)) from exc
    except MomtError as exc:
        raise SchemaError("cost", str(exc)) from exc
    instance = DiscreteInstance(spaces, measures, spec)
    return prune_zero_atoms(instance)


def load_instance(path: str) -> DiscreteInstance:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise SchemaError("file", str(exc)) from exc
    except json.JSONDecodeError as exc:
        raise SchemaError("json", f"line {exc.lineno}: {exc.msg}") from exc
    return load_instance_dict(doc)


def instance_to_dict(instance: DiscreteInstance) -> dict:
    cost: dict = {}
    if instance.cost.kind == "tensor":
        cost["tensor"] = np.asarray(instance.cost.params["values"]).tolist()
    else:
        cost["builtin"] = instance.cost.kind
        if instance.cost.kind == "gromovWasserstein":
            cost["xi"] = float(instance.cost.params["xi"])
            cost["A"] = np.asarray(instance.cost.params["A"]).tolist()
    return {
        "version": SCHEMA_VERSION,
        "spaces": [{"name": s.name, "points": s.points.tolist()}
                   for s in instance.spaces],
        "weights": [m.weights.tolist() for m in instance.measures],
        "cost": cost,
        "sense": instance.sense,
    }


def _instance_hash(instance: DiscreteInstance) -> str:
    return hashlib.sha256(dump_text(instance_to_dict(instance)).encode()).hexdigest()


def result_dict(instance, res: lp.SolveResult, certificates=None,
                provenance=None) -> dict:
    support = [
        {"index": [int(i) + 1 for i in idx], "mass": float(m)}
        for idx, m in sorted(res.plan.entries.items())
    ]
    out = {
        "value": float(res.value),
        "support": support,
        "potentials": [v.tolist() for v in res.potentials.vectors],
        "certificates": certificates or {},
        "provenance": {
            "solver_iterations": int(res.iterations),
            "duality_gap": float(res.duality_gap),
            "slack_residual": float(res.slack_residual),
            "tolerances": {"duality_gap": GAP_TOL},
            **(provenance or {}),
        },
    }
    return out


def _write_out(doc: dict, out_path: str | None):
    text = dump_text(doc)
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_solve(args) -> int:
    instance = load_instance(args.instance)
    res = lp.solve(instance)
    certificates = {}
    if args.oracle:
        verts = lp.oracle_enumerate(instance)
        values = [v for _, v in verts]
        best = min(values) if instance.sense == "min" else max(values)
        certificates["oracle"] = {
            "vertices": len(verts),
            "optimum": float(best),
            "agreement_gap": abs(float(best) - res.value),
            "agrees": abs(float(best) - res.value) <= (args.tol or 1e-9),
        }
    _write_out(result_dict(instance, res, certificates), args.out)
    return 0


def _parse_subset(text: str, n_axes: int) -> tuple[int, ...]:
    try:
        indices = tuple(int(tok) for tok in text.split(","))
    except ValueError as exc:
        raise SchemaError("--subset", f"not a comma-separated index list: {text!r}") from exc
    if any(i < 1 or i > n_axes for i in indices):
        raise SchemaError("--subset", f"axes must lie in 1..{n_axes}")
    return tuple(i - 1 for i in indices)


def cmd_reduce(args) -> int:
    instance = load_instance(args.instance)
    subset0 = _parse_subset(args.subset, instance.n_axes)
    try:
        subset = IndexSubset(subset0, instance.n_axes)
        subset.require_reducible()
    except MomtError as exc:
        raise SchemaError("--subset", str(exc)) from exc
    res = lp.solve(instance)
    red = reduce(instance, res.potentials, subset)
    report = verify_reduction_optimality(instance, res.plan, res.potentials, subset)
    doc = instance_to_dict(red.instance)
    doc["provenance"] = {
        "parent_sha256": _instance_hash(instance),
        "subset": [i + 1 for i in subset.indices],
        "potential_gauge": "zero mean against each marginal after the first",
        "reduction": {
            "reduced_optimum": float(report.reduced_optimum),
            "pushforward_value": float(report.pushforward_value),
            "gap": float(report.gap),
            "passed": bool(report.passed),
        },
    }
    _write_out(doc, args.out)
    return 0


def cmd_diagnose(args) -> int:
    instance = load_instance(args.instance)
    res = lp.solve(instance)
    mono = check_cyclical_monotonicity(
        res.plan.support(), instance.cost_grid(), sense=instance.sense,
        max_cycle=args.max_cycle, seed=args.seed or 0,
        tol=args.tol if args.tol else 1e-9,
    )
    n = instance.n_axes
    split = (tuple(range(n - 1)), (n - 1,))
    freport = fiber_report(res.plan.support(), instance.cost_grid(), split)
    extreme = check_c_extreme(freport)
    cert = lp.uniqueness_certificate(instance, res.plan, res.value)
    active = lp.minimizing_set(instance, res.potentials)
    certificates = {
        "cyclically_monotone": bool(mono.passed),
        "monotonicity_checked": mono.checked_exhaustive + mono.checked_sampled,
        "c_extreme": bool(extreme.passed),
        "c_extreme_split": [[a + 1 for a in split[0]], [a + 1 for a in split[1]]],
        "is_vertex": bool(lp.is_vertex(res.plan, instance.measures)),
        # gauge note: the active set is read off one dual solution; another
        # optimal dual can activate a different superset of the support
        "active_set_size": len(active.indices),
        "active_set_tolerance": active.tolerance,
        "uniqueness": {
            "status": cert.status,
            "face_probe_value_gap": float(cert.face_probe_value_gap),
            "max_tv_gap": float(cert.max_tv_gap),
            "witness": None if cert.witness is None else [
                {"index": [int(i) + 1 for i in idx], "mass": float(m)}
                for idx, m in sorted(cert.witness.entries.items())
            ],
        },
    }
    _write_out(result_dict(instance, res, certificates,
                           provenance={"seed": args.seed}), args.out)
    return 0


def _scenario_csvs(report: dict, base: str):
    support = report.get("support")
    if support:
        n_axes = len(support[0]["index"])
        write_csv(base + ".support.csv",
                  [f"i{k + 1}" for k in range(n_axes)] + ["mass"],
                  [row["index"] + [row["mass"]] for row in support])
        sizes: dict[int, int] = {}
        for row in support:
            sizes[row["index"][0]] = sizes.get(row["index"][0], 0) + 1
        write_csv(base + ".fibers.csv", ["atom", "fiber_size"],
                  [[k, v] for k, v in sorted(sizes.items())])
    if "collinearity" in report:
        write_csv(base + ".collinearity.csv",
                  ["z", "pair_a_x", "pair_a_y", "pair_b_x", "pair_b_y", "sine"],
                  [[r["z"], r["pair_a"][0], r["pair_a"][1], r["pair_b"][0],
                    r["pair_b"][1], r["sine"]] for r in report["collinearity"]])
    if report.get("kind") == "twoMapDemo" and "windows" in report:
        write_csv(base + ".windows.csv", ["atom", "alpha", "beta", "low", "high"],
                  report["windows"])


def _run_one_seed(payload):
    kind, seed, sizes, dim = payload
    config = ScenarioConfig(kind, seed=seed, sizes=sizes, dimension=dim)
    return seed, run_scenario(config)


def cmd_scenario(args) -> int:
    kind = ALIASES.get(args.kind, args.kind)
    if kind not in SCENARIO_KINDS:
        raise SchemaError("kind", f"unknown scenario {args.kind!r}")
    sizes = (args.n,) if args.n else ()
    seeds = [args.seed or 0]
    if args.seeds:
        seeds = [int(s) for s in args.seeds.split(",")]
    jobs = [(kind, s, sizes, args.d or 0) for s in seeds]
    if len(jobs) > 1:
        workers = int(os.environ.get("MOMT_THREADS", os.cpu_count() or 1))
        workers = max(1, min(workers, len(jobs)))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_one_seed, jobs))
    else:
        results = [_run_one_seed(jobs[0])]
    results.sort(key=lambda kv: kv[0])
    status = 0
    for seed, report in results:
        if args.out:
            base = os.path.join(args.out, f"{kind}_seed{seed}")
            os.makedirs(args.out, exist_ok=True)
            with open(base + ".json", "w", encoding="utf-8") as fh:
                fh.write(dump_text(report))
            _scenario_csvs(report, base)
        else:
            sys.stdout.write(dump_text(report))
        if not report.get("passed", False):
            status = status or 0  # informational; scenario failure is not an exit error
    return status


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="momt",
        description="exact multi-marginal transport: solve, reduce, diagnose, scenario",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="solve an instance file")
    p_solve.add_argument("instance")
    p_solve.add_argument("--out")
    p_solve.add_argument("--oracle", action="store_true",
                         help="cross-check against exhaustive vertex enumeration")
    p_solve.add_argument("--tol", type=float, default=None)
    p_solve.set_defaults(fn=cmd_solve)

    p_red = sub.add_parser("reduce", help="write a reduced instance for an axis subset")
    p_red.add_argument("instance")
    p_red.add_argument("--subset", required=True, help="1-based axes, e.g. 1,2")
    p_red.add_argument("--out")
    p_red.set_defaults(fn=cmd_reduce)

    p_diag = sub.add_parser("diagnose", help="solve plus structure certificates")
    p_diag.add_argument("instance")
    p_diag.add_argument("--out")
    p_diag.add_argument("--max-cycle", type=int, default=3)
    p_diag.add_argument("--seed", type=int, default=0)
    p_diag.add_argument("--tol", type=float, default=None)
    p_diag.set_defaults(fn=cmd_diagnose)

    p_sc = sub.add_parser("scenario", help="run a reproduction study")
    p_sc.add_argument("kind", help="|".join(sorted(ALIASES)))
    p_sc.add_argument("--seed", type=int, default=0)
    p_sc.add_argument("--seeds", help="comma list for a batch run")
    p_sc.add_argument("--n", type=int, default=0)
    p_sc.add_argument("--d", type=int, default=0)
    p_sc.add_argument("--out", help="directory for report JSON and CSV tables")
    p_sc.set_defaults(fn=cmd_scenario)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _EXIT_VALIDATION
    except (SolverError, NonFiniteCost, InstanceTooLarge) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return _EXIT_SOLVER
    except MomtError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
