"""Benchmark harness: repetitions x sample sizes x model/algorithm combos.

Each repetition draws one synthetic problem per sample size, then runs
every combo on it with GCV-selected regularization, recording support
AUC, relative error, and the wall time of a single solve (for the path
solver, one full path). Garrote-style combos consume the solution of an
earlier combo as their reference, so plans list references first.
Failures never abort the run: they become error-tagged rows.
"""

from __future__ import annotations

import logging
import multiprocessing
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .amnr import Variant, amnr_path
from .metrics import MetricRow, auc, relative_error
from .mnr import MnrConfig
from .model import L1, ModelSpec, PenaltyTerm
from .operators import make_operator
from .selection import SelectionResult, lambda_grid, ridge_select, select_lambda
from .simulation import SimConfig, generate, make_truth

log = logging.getLogger("mpls.bench")

# combo kind -> which engine produces it
KIND_ALGORITHM = {
    "ols": "closed_form",
    "ridge_i": "closed_form",
    "ridge_l": "closed_form",
    "fnlasso": "mnr",
    "lasso": "amnr",
    "nng": "amnr",
    "snng": "amnr",
    "nn_slasso": "amnr",
    "slasso": "amnr",
    "enet_l": "amnr",
}
_NEEDS_REFERENCE = ("nng", "snng")
_NEEDS_SMOOTH_GRID = ("snng", "nn_slasso", "slasso", "enet_l")


@dataclass(frozen=True)
class Combo:
    name: str
    kind: str
    reference: Optional[str] = None  # name of an earlier combo (garrote kinds)
    lambda_sm: tuple = ()  # candidate smoothness levels, GCV picks one

    def __post_init__(self):
        if self.kind not in KIND_ALGORITHM:
            raise ValueError(f"unknown combo kind {self.kind!r}")
        if self.kind in _NEEDS_REFERENCE and not self.reference:
            raise ValueError(f"combo {self.name!r} ({self.kind}) needs a reference combo")
        if self.kind in _NEEDS_SMOOTH_GRID and len(self.lambda_sm) == 0:
            raise ValueError(f"combo {self.name!r} ({self.kind}) needs lambda_sm candidates")
        if any(v < 0 for v in self.lambda_sm):
            raise ValueError("lambda_sm candidates must be >= 0")

    @property
    def algorithm(self) -> str:
        return KIND_ALGORITHM[self.kind]


@dataclass(frozen=True)
class ExperimentPlan:
    p: int
    n_values: tuple
    combos: tuple
    repetitions: int = 100
    seed_base: int = 0
    grid_count: int = 50
    mnr_max_iter: int = 100

    def __post_init__(self):
        object.__setattr__(self, "n_values", tuple(int(n) for n in self.n_values))
        object.__setattr__(self, "combos", tuple(self.combos))
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if not self.combos:
            raise ValueError("plan needs at least one combo")
        if not self.n_values:
            raise ValueError("plan needs at least one sample size")
        seen = set()
        for combo in self.combos:
            if combo.name in seen:
                raise ValueError(f"duplicate combo name {combo.name!r}")
            if combo.reference is not None and combo.reference not in seen:
                raise ValueError(
                    f"combo {combo.name!r} references {combo.reference!r}, "
                    "which does not precede it in the plan"
                )
            seen.add(combo.name)
        if any(c.kind == "ols" for c in self.combos) and min(self.n_values) <= self.p:
            raise ValueError("an ols combo requires n > p for every sample size")


def benchmark_plan(repetitions: int = 100, n_values=(100,), seed_base: int = 0) -> ExperimentPlan:
    """The default p=200 synthetic benchmark plan.

    Smoothness levels are fixed per combo (tuned once on this design);
    GCV then picks the sparsity level along each path. The garrote combo
    consumes the fused-penalty solution as its reference, so that combo
    precedes it.
    """
    combos = (
        Combo("ridge_i", "ridge_i"),
        Combo("fnlasso_mnr", "fnlasso"),
        Combo("lasso_amnr", "lasso"),
        Combo("slasso_amnr", "slasso", lambda_sm=(384.0,)),
        Combo("enet_l_amnr", "enet_l", lambda_sm=(4096.0,)),
        Combo("nn_slasso_amnr", "nn_slasso", lambda_sm=(16.0,)),
        Combo("snng_fnlasso", "snng", reference="fnlasso_mnr", lambda_sm=(16.0,)),
    )
    return ExperimentPlan(
        p=200,
        n_values=tuple(n_values),
        combos=combos,
        repetitions=repetitions,
        seed_base=seed_base,
    )


def _mnr_spec(p: int) -> ModelSpec:
    op = make_operator("first_difference", p)
    return ModelSpec(terms=(PenaltyTerm(L1, op),), lam=1.0)


def _gcv_of(result: SelectionResult) -> float:
    hit = result.curve[result.curve[:, 0] == result.lam]
    return float(hit[0, 1]) if hit.size else float(np.nanmin(result.curve[:, 1]))


def _best_smooth_fit(problem, make_variant, levels):
    """GCV over the (lambda_sm, knot) product; returns fit details."""
    best = None  # (gcv, lambda_sm, result, path_time)
    for level in levels:
        variant = make_variant(float(level))
        t0 = time.perf_counter()
        path = amnr_path(problem, variant)
        elapsed = time.perf_counter() - t0
        result = select_lambda(problem, variant, solver="amnr", path=path)
        score = _gcv_of(result)
        if best is None or score < best[0]:
            best = (score, float(level), result, elapsed)
    return best


def _run_combo(problem, combo: Combo, plan: ExperimentPlan, context: dict):
    """One combo on one problem. Returns (solution_beta, lam, time, solution)."""
    p = plan.p

    if combo.kind == "ols":
        t0 = time.perf_counter()
        beta, *_ = np.linalg.lstsq(problem.X, problem.y, rcond=None)
        elapsed = time.perf_counter() - t0
        context[combo.name] = beta
        return beta, 0.0, elapsed, None

    if combo.kind in ("ridge_i", "ridge_l"):
        op = None if combo.kind == "ridge_i" else make_operator("second_difference", p)
        grid = lambda_grid(problem, plan.grid_count, "singular_value_scaled")
        result = ridge_select(problem, grid, operator=op)
        # wall time of a single solve at the chosen level
        t0 = time.perf_counter()
        if op is None:
            np.linalg.solve(
                problem.X.T @ problem.X + 2.0 * result.lam * np.eye(p),
                problem.X.T @ problem.y,
            )
        else:
            LtL = op.entries.T @ op.entries
            np.linalg.solve(
                problem.X.T @ problem.X + 2.0 * result.lam * LtL,
                problem.X.T @ problem.y,
            )
        elapsed = time.perf_counter() - t0
        context[combo.name] = result.solution.beta
        return result.solution.beta, result.lam, elapsed, result.solution

    if combo.kind == "fnlasso":
        spec = _mnr_spec(p)
        grid = lambda_grid(problem, plan.grid_count, "path_knots")
        config = MnrConfig(max_iter=plan.mnr_max_iter)
        result = select_lambda(problem, spec, grid, solver="mnr", config=config)
        # the reference view is the sparse print of the converged iterate
        context[combo.name] = result.solution.beta_sparse
        return result.solution.beta, result.lam, result.solution.wall_time, result.solution

    # path-solver combos
    if combo.kind == "lasso":
        variant = Variant.lasso()
        t0 = time.perf_counter()
        path = amnr_path(problem, variant)
        elapsed = time.perf_counter() - t0
        result = select_lambda(problem, variant, solver="amnr", path=path)
    elif combo.kind == "nng":
        reference = _reference_of(combo, context)
        variant = Variant.nng(reference)
        t0 = time.perf_counter()
        path = amnr_path(problem, variant)
        elapsed = time.perf_counter() - t0
        result = select_lambda(problem, variant, solver="amnr", path=path)
    elif combo.kind == "snng":
        reference = _reference_of(combo, context)
        _, _, result, elapsed = _best_smooth_fit(
            problem, lambda lv: Variant.snng(reference, lv), combo.lambda_sm
        )
    elif combo.kind == "nn_slasso":
        _, _, result, elapsed = _best_smooth_fit(
            problem, Variant.nn_slasso, combo.lambda_sm
        )
    elif combo.kind == "slasso":
        _, _, result, elapsed = _best_smooth_fit(
            problem, Variant.slasso, combo.lambda_sm
        )
    elif combo.kind == "enet_l":
        _, _, result, elapsed = _best_smooth_fit(
            problem, Variant.enet_l, combo.lambda_sm
        )
    else:  # pragma: no cover - Combo validation rules this out
        raise ValueError(f"unhandled combo kind {combo.kind!r}")

    context[combo.name] = result.solution.beta
    return result.solution.beta, result.lam, elapsed, result.solution


def _reference_of(combo: Combo, context: dict) -> np.ndarray:
    if combo.reference not in context:
        raise RuntimeError(f"reference combo {combo.reference!r} produced no solution")
    return context[combo.reference]


def _run_repetition(plan: ExperimentPlan, rep: int, keep_solutions: bool):
    rows = []
    solutions = {}
    for n in plan.n_values:
        problem, truth = generate(SimConfig(n=n, seed=plan.seed_base + rep, p=plan.p))
        context: dict = {}
        for combo in plan.combos:
            try:
                beta, lam, elapsed, sol = _run_combo(problem, combo, plan, context)
                row = MetricRow(
                    model=combo.name,
                    algorithm=combo.algorithm,
                    repetition=rep,
                    auc=auc(np.abs(beta), truth.support),
                    re=relative_error(truth.beta_true, beta),
                    time=elapsed,
                    lambda_selected=lam,
                    n=n,
                )
                if keep_solutions and sol is not None:
                    solutions[(rep, n, combo.name)] = sol
            except Exception as exc:  # noqa: BLE001 - failures become tagged rows
                log.warning("rep=%d n=%d combo=%s failed: %s", rep, n, combo.name, exc)
                row = MetricRow(
                    model=combo.name,
                    algorithm=combo.algorithm,
                    repetition=rep,
                    auc=np.nan,
                    re=np.nan,
                    time=np.nan,
                    lambda_selected=np.nan,
                    n=n,
                    error=f"{type(exc).__name__}: {exc}",
                )
            rows.append(row)
    return rows, solutions


def run_experiment(plan: ExperimentPlan, workers: int = 1, keep_solutions: bool = False):
    """All repetitions of the plan; rows in (repetition, n, combo) order.

    Results are independent of the worker count: each repetition seeds
    its own generator stream. With keep_solutions the return value is
    (rows, solutions) where solutions maps (repetition, n, combo name)
    to the fitted Solution.
    """
    reps = range(plan.repetitions)
    if workers <= 1:
        parts = [_run_repetition(plan, rep, keep_solutions) for rep in reps]
    else:
        with multiprocessing.Pool(workers) as pool:
            parts = pool.starmap(
                _run_repetition, [(plan, rep, keep_solutions) for rep in reps]
            )
    rows = [row for part_rows, _ in parts for row in part_rows]
    if not keep_solutions:
        return rows
    solutions: dict = {}
    for _, part_solutions in parts:
        solutions.update(part_solutions)
    return rows, solutions


def pooled_summary(rows) -> list:
    """Mean RE / AUC / time per combo, pooled across every sample size.

    Every combo must have usable rows at every sample size appearing in
    the input; gaps are reported in the error.
    """
    if not rows:
        raise ValueError("no rows to summarize")
    all_n = sorted({row.n for row in rows})
    order = []
    groups: dict = {}
    for row in rows:
        key = (row.model, row.algorithm)
        if key not in groups:
            groups[key] = []
            order.append(key)
        if row.error is None:
            groups[key].append(row)
    gaps = []
    for key in order:
        covered = {row.n for row in groups[key]}
        missing = [n for n in all_n if n not in covered]
        if missing:
            gaps.append(f"{key[0]} ({key[1]}) lacks usable rows for n in {missing}")
    if gaps:
        raise ValueError("incomplete sample-size coverage: " + "; ".join(gaps))
    out = []
    for key in order:
        members = groups[key]
        out.append(
            {
                "model": key[0],
                "algorithm": key[1],
                "re": float(np.mean([r.re for r in members])),
                "auc": float(np.mean([r.auc for r in members])),
                "time": float(np.mean([r.time for r in members])),
                "rows": len(members),
            }
        )
    return out


def median_auc_exemplar(rows, solutions) -> dict:
    """Per (model, algorithm, n): the kept solution closest to median AUC.

    Ties in distance resolve to the lower repetition index. Only groups
    with at least one kept solution appear in the result.
    """
    groups: dict = {}
    for row in rows:
        if row.error is not None:
            continue
        groups.setdefault((row.model, row.algorithm, row.n), []).append(row)
    out = {}
    for key, members in groups.items():
        med = float(np.median([r.auc for r in members]))
        ranked = sorted(members, key=lambda r: (abs(r.auc - med), r.repetition))
        for row in ranked:
            sol = solutions.get((row.repetition, row.n, row.model))
            if sol is not None:
                out[key] = (row.repetition, sol)
                break
    return out
