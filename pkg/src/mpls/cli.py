"""Command-line surface: configuration, file formats, and subcommands.

Commands: simulate | solve | path | bench | kkt-verify. Configuration
is one JSON document; command-line flags override matching fields, and
the effective configuration is echoed into every structured output.

File formats: matrices are headerless comma-separated rows, vectors one
value per line, both printed with 17 significant digits so a write/read
round trip is exact; structured outputs are JSON. Exit codes: 0 success,
1 validation error, 2 numerical failure, 3 I/O error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np
import scipy.linalg

from .amnr import (
    AmnrConfig,
    AmnrError,
    PathKnot,
    Variant,
    amnr_path,
    kkt_check,
    solve_at_lambda,
)
from .bench import Combo, ExperimentPlan, run_experiment, pooled_summary
from .metrics import summarize
from .mnr import MnrConfig, MnrError, mnr_solve
from .model import L2, ModelSpec, PenaltyTerm, Problem, Solution, objective
from .operators import make_operator
from .selection import degrees_of_freedom, lambda_grid, ridge_select, select_lambda
from .simulation import SimConfig, generate, make_truth, theoretical_snr

log = logging.getLogger("mpls")

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERICAL = 2
EXIT_IO = 3

_LOG_LEVELS = {
    "error": logging.ERROR,
    "warn": logging.WARNING,
    "info": logging.INFO,
    "debug": logging.DEBUG,
}


class ValidationError(ValueError):
    """Bad configuration or inconsistent inputs (exit code 1)."""


# operator kinds the CLI can build by name
_STENCILS = ("identity", "first_difference", "second_difference")


# --- file formats ---


def write_matrix(path, matrix) -> None:
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2:
        raise ValidationError(f"matrix for {path} must be 2-dimensional")
    np.savetxt(path, m, fmt="%.17g", delimiter=",")


def write_vector(path, vector) -> None:
    v = np.asarray(vector, dtype=float)
    if v.ndim != 1:
        raise ValidationError(f"vector for {path} must be 1-dimensional")
    np.savetxt(path, v, fmt="%.17g")


def read_matrix(path) -> np.ndarray:
    try:
        return np.loadtxt(path, delimiter=",", ndmin=2)
    except ValueError as exc:
        raise ValidationError(f"cannot parse matrix file {path}: {exc}") from exc


def read_vector(path) -> np.ndarray:
    try:
        v = np.loadtxt(path, ndmin=1)
    except ValueError as exc:
        raise ValidationError(f"cannot parse vector file {path}: {exc}") from exc
    if v.ndim != 1:
        raise ValidationError(f"{path} does not hold a vector (one value per line)")
    return v


def _jsonable(value):
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, float) and not np.isfinite(value):
        return None
    return value


def write_json(path, document) -> None:
    with open(path, "w") as fh:
        json.dump(_jsonable(document), fh, indent=2, sort_keys=True)
        fh.write("\n")


# --- configuration plumbing ---


def _require_keys(cfg: dict, allowed, where: str, required=()):
    if not isinstance(cfg, dict):
        raise ValidationError(f"{where} must be a JSON object")
    unknown = sorted(set(cfg) - set(allowed))
    if unknown:
        raise ValidationError(f"unknown keys in {where}: {', '.join(unknown)}")
    missing = sorted(set(required) - set(cfg))
    if missing:
        raise ValidationError(f"missing keys in {where}: {', '.join(missing)}")


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ValidationError(f"config {path} must hold a JSON object")
    return cfg


def _sim_config(cfg: dict, seed_override=None) -> SimConfig:
    _require_keys(cfg, ("p", "n", "seed", "noise_sigma"), "simulate config", required=("n",))
    seed = cfg.get("seed", 0) if seed_override is None else seed_override
    try:
        return SimConfig(
            n=int(cfg["n"]),
            seed=int(seed),
            p=int(cfg.get("p", 200)),
            noise_sigma=float(cfg.get("noise_sigma", 1.0)),
        )
    except ValueError as exc:
        raise ValidationError(str(exc)) from exc


def _load_problem(cfg: dict, seed_override=None):
    _require_keys(cfg, ("x_csv", "y_csv", "simulate"), "problem config")
    if "simulate" in cfg:
        if "x_csv" in cfg or "y_csv" in cfg:
            raise ValidationError("problem config mixes files with simulate")
        sim = _sim_config(cfg["simulate"], seed_override)
        problem, _ = generate(sim)
        return problem
    if "x_csv" not in cfg or "y_csv" not in cfg:
        raise ValidationError("problem config needs x_csv and y_csv (or simulate)")
    X = read_matrix(cfg["x_csv"])
    y = read_vector(cfg["y_csv"])
    try:
        return Problem(X, y)
    except ValueError as exc:
        raise ValidationError(str(exc)) from exc


def _build_mnr_config(cfg: dict) -> MnrConfig:
    _require_keys(cfg, ("tau", "epsilon0", "max_iter", "alpha"), "mnr config")
    try:
        return MnrConfig(
            tau=float(cfg.get("tau", 1e-8)),
            epsilon0=float(cfg.get("epsilon0", 1e-8)),
            max_iter=int(cfg.get("max_iter", 100)),
            alpha=float(cfg.get("alpha", 1.0)),
        )
    except ValueError as exc:
        raise ValidationError(str(exc)) from exc


def _build_amnr_config(cfg: dict) -> AmnrConfig:
    _require_keys(cfg, ("tau", "max_active", "allow_removal", "max_knots"), "amnr config")
    try:
        return AmnrConfig(
            tau=float(cfg.get("tau", 1e-8)),
            max_active=cfg.get("max_active"),
            allow_removal=bool(cfg.get("allow_removal", True)),
            max_knots=cfg.get("max_knots"),
        )
    except ValueError as exc:
        raise ValidationError(str(exc)) from exc


def _build_terms_spec(cfg: dict, p: int, lam: float) -> ModelSpec:
    _require_keys(cfg, ("terms",), "mnr model", required=("terms",))
    terms = []
    if not isinstance(cfg["terms"], list) or not cfg["terms"]:
        raise ValidationError("model.terms must be a nonempty list")
    for i, tcfg in enumerate(cfg["terms"]):
        where = f"model.terms[{i}]"
        _require_keys(
            tcfg, ("kind", "operator", "proportion", "gamma_csv"), where, required=("kind", "operator")
        )
        if tcfg["operator"] not in _STENCILS:
            raise ValidationError(f"{where}.operator must be one of {_STENCILS}")
        gamma = read_vector(tcfg["gamma_csv"]) if "gamma_csv" in tcfg else None
        try:
            terms.append(
                PenaltyTerm(
                    kind=tcfg["kind"],
                    operator=make_operator(tcfg["operator"], p),
                    proportion=float(tcfg.get("proportion", 1.0 / len(cfg["terms"]))),
                    gamma=gamma,
                )
            )
        except ValueError as exc:
            raise ValidationError(f"{where}: {exc}") from exc
    try:
        return ModelSpec(terms=tuple(terms), lam=lam)
    except ValueError as exc:
        raise ValidationError(str(exc)) from exc


def _build_variant(cfg: dict) -> Variant:
    _require_keys(
        cfg,
        ("variant", "gamma_csv", "reference_csv", "lambda_sm", "smooth_operator"),
        "amnr model",
        required=("variant",),
    )
    kwargs = {}
    if "gamma_csv" in cfg:
        kwargs["gamma"] = read_vector(cfg["gamma_csv"])
    if "reference_csv" in cfg:
        kwargs["reference"] = read_vector(cfg["reference_csv"])
    if "lambda_sm" in cfg:
        kwargs["lambda_sm"] = float(cfg["lambda_sm"])
    if "smooth_operator" in cfg:
        kwargs["smooth_operator"] = cfg["smooth_operator"]
    try:
        return Variant(cfg["variant"], **kwargs)
    except (TypeError, ValueError) as exc:
        raise ValidationError(str(exc)) from exc


def _build_plan(cfg: dict, seed_override=None) -> ExperimentPlan:
    _require_keys(
        cfg,
        ("p", "n_values", "repetitions", "seed_base", "grid_count", "mnr_max_iter", "combos"),
        "plan",
        required=("p", "n_values", "combos"),
    )
    combos = []
    for i, ccfg in enumerate(cfg["combos"]):
        where = f"plan.combos[{i}]"
        _require_keys(ccfg, ("name", "kind", "reference", "lambda_sm"), where, required=("name", "kind"))
        try:
            combos.append(
                Combo(
                    name=ccfg["name"],
                    kind=ccfg["kind"],
                    reference=ccfg.get("reference"),
                    lambda_sm=tuple(ccfg.get("lambda_sm", ())),
                )
            )
        except ValueError as exc:
            raise ValidationError(f"{where}: {exc}") from exc
    seed_base = cfg.get("seed_base", 0) if seed_override is None else seed_override
    try:
        return ExperimentPlan(
            p=int(cfg["p"]),
            n_values=tuple(cfg["n_values"]),
            combos=tuple(combos),
            repetitions=int(cfg.get("repetitions", 100)),
            seed_base=int(seed_base),
            grid_count=int(cfg.get("grid_count", 50)),
            mnr_max_iter=int(cfg.get("mnr_max_iter", 100)),
        )
    except ValueError as exc:
        raise ValidationError(str(exc)) from exc


# --- commands ---


def cmd_simulate(args) -> int:
    cfg = load_config(args.config) if args.config else {}
    _require_keys(cfg, ("p", "n", "seed", "noise_sigma"), "config")
    cfg.setdefault("n", 100)
    sim = _sim_config(cfg, args.seed)
    effective = {
        "command": "simulate",
        "p": sim.p,
        "n": sim.n,
        "seed": sim.seed,
        "noise_sigma": sim.noise_sigma,
    }
    problem, truth = generate(sim)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_matrix(out / "X.csv", problem.X)
    write_vector(out / "y.csv", problem.y)
    write_vector(out / "beta_true.csv", truth.beta_true)
    write_json(
        out / "meta.json",
        {
            "config": effective,
            "snr_theoretical_db": theoretical_snr(truth, sim.noise_sigma)
            if sim.noise_sigma > 0
            else None,
            "support_size": int(truth.support.sum()),
            "truth_indexing": "1-based positions in the coefficient formula",
            "rng": "numpy.random.default_rng (PCG64), one stream per seed",
        },
    )
    print(f"wrote X.csv, y.csv, beta_true.csv, meta.json to {out}")
    return EXIT_OK


_SOLVE_KEYS = ("problem", "algorithm", "model", "lambda_policy", "lambda", "grid", "mnr", "amnr")


def _grid_from_config(cfg: dict, problem: Problem):
    _require_keys(cfg, ("mode", "count", "values"), "grid")
    mode = cfg.get("mode", "singular_value_scaled")
    if mode == "explicit":
        if "values" not in cfg:
            raise ValidationError("explicit grid needs values")
        return lambda_grid(problem, mode="explicit", values=cfg["values"])
    return lambda_grid(problem, int(cfg.get("count", 50)), mode)


def cmd_solve(args) -> int:
    if not args.config:
        raise ValidationError("solve needs --config")
    cfg = load_config(args.config)
    _require_keys(cfg, _SOLVE_KEYS, "config", required=("problem", "algorithm", "model"))
    problem = _load_problem(cfg["problem"], args.seed)
    algorithm = cfg["algorithm"]
    policy = cfg.get("lambda_policy", "gcv")
    if policy not in ("fixed", "gcv"):
        raise ValidationError("lambda_policy must be 'fixed' or 'gcv'")
    lam = args.lam if args.lam is not None else cfg.get("lambda")
    if policy == "fixed" and lam is None:
        raise ValidationError("fixed lambda policy needs a lambda value")

    doc = {
        "config": {**cfg, "lambda": lam},
        "algorithm": algorithm,
        "lambda_policy": policy,
        "df": None,
        "gcv": None,
        "beta_sparse": None,
        "epsilon": None,
    }

    if algorithm == "mnr":
        config = _build_mnr_config(cfg.get("mnr", {}))
        spec = _build_terms_spec(cfg["model"], problem.p, float(lam if lam is not None else 0.0))
        if policy == "fixed":
            sol = mnr_solve(problem, spec, config)
        else:
            grid = _grid_from_config(cfg.get("grid", {}), problem)
            res = select_lambda(problem, spec, grid, solver="mnr", config=config)
            sol = res.solution
            doc["gcv"] = {"lambda": res.curve[:, 0], "score": res.curve[:, 1]}
            spec = dataclasses.replace(spec, lam=res.lam)
        doc["df"] = degrees_of_freedom(problem, spec, sol.beta, epsilon=sol.epsilon)
        doc["beta_sparse"] = sol.beta_sparse
        doc["epsilon"] = sol.epsilon
    elif algorithm == "amnr":
        config = _build_amnr_config(cfg.get("amnr", {}))
        variant = _build_variant(cfg["model"])
        path = amnr_path(problem, variant, config)
        if policy == "fixed":
            sol = solve_at_lambda(problem, variant, float(lam), path=path)
            doc["df"] = int(np.count_nonzero(sol.beta))
        else:
            res = select_lambda(problem, variant, solver="amnr", path=path)
            sol = res.solution
            doc["gcv"] = {"lambda": res.curve[:, 0], "score": res.curve[:, 1]}
            knot = next(k for k in path if k.lam == res.lam)
            doc["df"] = len(knot.active)
    elif algorithm == "closed_form":
        _require_keys(cfg["model"], ("operator",), "closed_form model")
        kind = cfg["model"].get("operator", "identity")
        op = make_operator(kind, problem.p)
        spec = ModelSpec(terms=(PenaltyTerm(L2, op),), lam=0.0)
        if policy == "fixed":
            LtL = op.entries.T @ op.entries
            t0 = time.perf_counter()
            beta = scipy.linalg.solve(
                problem.X.T @ problem.X + 2.0 * float(lam) * LtL,
                problem.X.T @ problem.y,
                assume_a="pos",
            )
            spec = dataclasses.replace(spec, lam=float(lam))
            sol_objective = objective(problem, spec, beta)
            sol = Solution(
                beta=beta,
                lam=float(lam),
                objective=sol_objective,
                iterations=1,
                converged=True,
                wall_time=time.perf_counter() - t0,
            )
        else:
            grid = _grid_from_config(cfg.get("grid", {}), problem)
            res = ridge_select(problem, grid, operator=op)
            sol = res.solution
            doc["gcv"] = {"lambda": res.curve[:, 0], "score": res.curve[:, 1]}
            spec = dataclasses.replace(spec, lam=res.lam)
        doc["df"] = degrees_of_freedom(problem, spec, sol.beta, epsilon=1e-10)
    else:
        raise ValidationError("algorithm must be 'mnr', 'amnr', or 'closed_form'")

    doc.update(
        {
            "beta": sol.beta,
            "lambda": sol.lam,
            "objective": sol.objective,
            "iterations": sol.iterations,
            "converged": sol.converged,
            "wall_time": sol.wall_time,
        }
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "solution.json", doc)
    print(f"wrote solution.json to {out} (lambda={sol.lam:.6g}, converged={sol.converged})")
    return EXIT_OK


def cmd_path(args) -> int:
    if not args.config:
        raise ValidationError("path needs --config")
    cfg = load_config(args.config)
    _require_keys(cfg, ("problem", "model", "amnr", "kkt_tol"), "config", required=("problem", "model"))
    problem = _load_problem(cfg["problem"], args.seed)
    variant = _build_variant(cfg["model"])
    config = _build_amnr_config(cfg.get("amnr", {}))
    tol = args.tol if args.tol is not None else float(cfg.get("kkt_tol", 1e-8))
    path = amnr_path(problem, variant, config)
    knots = []
    for knot in path:
        report = kkt_check(problem, variant, knot, tol=tol)
        knots.append(
            {
                "k": knot.k,
                "lambda": knot.lam,
                "alpha": knot.alpha,
                "cause": knot.cause,
                "active": list(knot.active),
                "beta": knot.beta,
                "w": knot.w,
                "warnings": list(knot.warnings),
                "kkt": {
                    "max_active_gap": report.max_active_gap,
                    "max_inactive_excess": report.max_inactive_excess,
                    "sign_violations": report.sign_violations,
                    "passed": report.passed,
                },
            }
        )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "path.json", {"config": cfg, "kkt_tol": tol, "knots": knots})
    print(f"wrote path.json to {out} ({len(knots)} knots)")
    return EXIT_OK


def cmd_bench(args) -> int:
    if not args.config:
        raise ValidationError("bench needs --config")
    cfg = load_config(args.config)
    _require_keys(cfg, ("plan",), "config", required=("plan",))
    plan = _build_plan(cfg["plan"], args.seed)
    workers = args.workers if args.workers is not None else (os.cpu_count() or 1)
    rows = run_experiment(plan, workers=workers)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "results.csv", "w") as fh:
        fh.write("model,algorithm,n,repetition,auc,re,time,lambda_selected,error\n")
        for r in rows:
            err = "" if r.error is None else r.error.replace(",", ";").replace("\n", " ")
            fh.write(
                f"{r.model},{r.algorithm},{r.n},{r.repetition},"
                f"{r.auc:.17g},{r.re:.17g},{r.time:.17g},{r.lambda_selected:.17g},{err}\n"
            )
    summary = pooled_summary(rows)
    with open(out / "summary.csv", "w") as fh:
        fh.write("model,algorithm,re,auc,time,rows\n")
        for s in summary:
            fh.write(
                f"{s['model']},{s['algorithm']},{s['re']:.17g},{s['auc']:.17g},"
                f"{s['time']:.17g},{s['rows']}\n"
            )
    groups = summarize(rows, group_by=("model", "algorithm", "n"))
    write_json(
        out / "boxplot.json",
        {
            "config": {**cfg, "workers": workers},
            "quartile_convention": "linear interpolation between order statistics",
            "groups": [
                {
                    "model": g.key[0],
                    "algorithm": g.key[1],
                    "n": g.key[2],
                    "count": g.count,
                    "stats": g.stats,
                }
                for g in groups
            ],
        },
    )
    print(f"wrote results.csv, summary.csv, boxplot.json to {out} ({len(rows)} rows)")
    return EXIT_OK


def cmd_kkt_verify(args) -> int:
    if not args.config:
        raise ValidationError("kkt-verify needs --config")
    cfg = load_config(args.config)
    _require_keys(cfg, ("problem", "model", "path_json", "tol"), "config",
                  required=("problem", "model", "path_json"))
    problem = _load_problem(cfg["problem"], args.seed)
    variant = _build_variant(cfg["model"])
    tol = args.tol if args.tol is not None else float(cfg.get("tol", 1e-8))
    try:
        with open(cfg["path_json"]) as fh:
            path_doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"cannot parse {cfg['path_json']}: {exc}") from exc
    if "knots" not in path_doc:
        raise ValidationError("path file holds no knots")
    report_rows = []
    all_passed = True
    for entry in path_doc["knots"]:
        beta = np.asarray(entry["beta"], dtype=float)
        w = np.asarray(entry.get("w", entry["beta"]), dtype=float)
        if beta.shape != (problem.p,):
            raise ValidationError(
                f"knot {entry.get('k')} has beta of length {beta.size}, expected {problem.p}"
            )
        knot = PathKnot(
            k=int(entry["k"]),
            lam=float(entry["lambda"]),
            beta=beta,
            active=tuple(entry["active"]),
            alpha=float(entry.get("alpha", 0.0)),
            cause=entry.get("cause", "terminal"),
            w=w,
        )
        rep = kkt_check(problem, variant, knot, tol=tol)
        all_passed = all_passed and rep.passed
        report_rows.append(
            {
                "k": knot.k,
                "lambda": knot.lam,
                "max_active_gap": rep.max_active_gap,
                "max_inactive_excess": rep.max_inactive_excess,
                "sign_violations": rep.sign_violations,
                "passed": rep.passed,
            }
        )
    doc = {"config": {**cfg, "tol": tol}, "knots": report_rows, "all_passed": all_passed}
    print(json.dumps(_jsonable(doc), indent=2, sort_keys=True))
    return EXIT_OK if all_passed else EXIT_NUMERICAL


# --- entry point ---


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON configuration file")
    common.add_argument("--seed", type=int, default=None, help="override the configured seed")
    common.add_argument("--lambda", dest="lam", type=float, default=None,
                        help="override the configured regularization level")
    common.add_argument("--workers", type=int, default=None,
                        help="bench parallelism (default: available processors)")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--tol", type=float, default=None, help="tolerance override")

    parser = argparse.ArgumentParser(
        prog="mpls",
        description="Penalized least-squares solvers: iterative reweighting and active-set paths.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="generate a synthetic problem")
    sub.add_parser("solve", parents=[common], help="fit one model at fixed or GCV-selected lambda")
    sub.add_parser("path", parents=[common], help="compute a full solution path with KKT reports")
    sub.add_parser("bench", parents=[common], help="run a benchmark plan")
    sub.add_parser("kkt-verify", parents=[common], help="check optimality of a stored path")
    return parser


_COMMANDS = {
    "simulate": cmd_simulate,
    "solve": cmd_solve,
    "path": cmd_path,
    "bench": cmd_bench,
    "kkt-verify": cmd_kkt_verify,
}


def _error_json(exc: Exception, code: int) -> str:
    return json.dumps(
        {"error": {"type": type(exc).__name__, "message": str(exc), "exit_code": code}}
    )


def main(argv=None) -> int:
    level = os.environ.get("MPLS_LOG", "warn").lower()
    logging.basicConfig(level=_LOG_LEVELS.get(level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    if level not in _LOG_LEVELS:
        log.warning("unknown MPLS_LOG value %r; using 'warn'", level)
    args = _parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ValidationError as exc:
        print(_error_json(exc, EXIT_VALIDATION))
        log.error("%s", exc)
        return EXIT_VALIDATION
    except OSError as exc:
        print(_error_json(exc, EXIT_IO))
        log.error("%s", exc)
        return EXIT_IO
    except (MnrError, AmnrError, scipy.linalg.LinAlgError, np.linalg.LinAlgError,
            FloatingPointError, ValueError) as exc:
        code = EXIT_VALIDATION if isinstance(exc, ValueError) and not isinstance(
            exc, (MnrError, AmnrError)
        ) else EXIT_NUMERICAL
        print(_error_json(exc, code))
        log.error("%s", exc)
        return code


if __name__ == "__main__":
    sys.exit(main())
