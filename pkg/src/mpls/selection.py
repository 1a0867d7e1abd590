"""Regularization-level machinery: lambda grids, degrees of freedom, GCV.

One scalar lambda controls the whole penalty (per-term proportions are
fixed inside the model), so selection is a one-dimensional search. The
iterative solver is scored on a log-spaced grid; the path solver is
scored at its knots, where the active-set size is the model complexity.
"""

from __future__ import annotations

import dataclasses
from typing import NamedTuple, Optional

import numpy as np
import scipy.linalg

from .amnr import Variant, _working_problem, amnr_path, solve_at_lambda
from .mnr import MnrError, mnr_solve
from .model import L2, ModelSpec, PenaltyTerm, Problem, Solution, objective, perturbed_penalty_diag
from .operators import LinearOperator, apply, make_operator, weighted_gram

GRID_MODES = ("singular_value_scaled", "path_knots", "explicit")
_FLOOR = 1e-4  # grid bottom relative to its top


@dataclasses.dataclass(frozen=True)
class LambdaGrid:
    values: np.ndarray
    origin: str

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size == 0:
            raise ValueError("grid values must be a nonempty vector")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise ValueError("grid values must be finite and >= 0")
        if v.size > 1 and not np.all(np.diff(v) < 0):
            raise ValueError("grid values must be strictly decreasing")
        if self.origin not in GRID_MODES:
            raise ValueError(f"unknown grid origin {self.origin!r}")
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.size

    def __iter__(self):
        return iter(self.values)


def lambda_grid(problem: Problem, count: int = 50, mode: str = "singular_value_scaled",
                values=None) -> LambdaGrid:
    """Log-spaced candidate levels, spanning four decades below the top.

    singular_value_scaled anchors the top at the squared largest singular
    value of X; path_knots anchors it at max|X^T y|, the level where an
    L1 path leaves the empty model. explicit passes values through,
    sorted descending.
    """
    if mode == "explicit":
        if values is None:
            raise ValueError("explicit mode needs values")
        v = np.sort(np.asarray(values, dtype=float))[::-1]
        return LambdaGrid(v, "explicit")
    if count < 2:
        raise ValueError("count must be >= 2")
    if mode == "singular_value_scaled":
        top = float(np.linalg.norm(problem.X, 2)) ** 2
        if top == 0.0:
            raise ValueError("X is identically zero: no usable scale")
    elif mode == "path_knots":
        top = float(np.max(np.abs(problem.X.T @ problem.y)))
        if top == 0.0:
            raise ValueError("X^T y is identically zero: no usable scale")
    else:
        raise ValueError(f"unknown grid mode {mode!r}")
    v = np.geomspace(top, _FLOOR * top, count)
    return LambdaGrid(v, mode)


def degrees_of_freedom(problem: Problem, spec: ModelSpec, beta, lam: Optional[float] = None,
                       epsilon: float = 1e-8) -> float:
    """Effective model size trace(X (X^T X + Omega(beta))^{-1} X^T).

    Omega is the converged reweighted penalty matrix at beta, using the
    perturbation epsilon the solver finished with. For operators other
    than the identity this trace is the natural generalization of the
    usual reweighted-ridge count.
    """
    beta = np.asarray(beta, dtype=float)
    level = spec.lam if lam is None else lam
    props = [t.proportion for t in spec.terms]
    lambdas = level * np.asarray(props, dtype=float)
    p = problem.p
    XtX = problem.X.T @ problem.X
    omega = np.zeros((p, p))
    for lam_r, term in zip(lambdas, spec.terms):
        if lam_r == 0.0:
            continue
        theta = apply(term.operator, beta)
        d = perturbed_penalty_diag(theta, term.kind, term.gamma, epsilon)
        omega += lam_r * weighted_gram(term.operator, d)
    try:
        fac = scipy.linalg.cho_factor(XtX + omega, lower=True, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise ValueError("X^T X + Omega is numerically singular") from exc
    return float(np.trace(scipy.linalg.cho_solve(fac, XtX, check_finite=False)))


def gcv(rss: float, df: float, n: int) -> float:
    """(rss/n) / (1 - df/n)^2, undefined once df reaches n."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if df < 0:
        raise ValueError("df must be >= 0")
    if df >= n:
        raise ValueError(f"GCV undefined for df={df} >= n={n}")
    return (rss / n) / (1.0 - df / n) ** 2


class SelectionResult(NamedTuple):
    lam: float
    solution: Solution
    curve: np.ndarray  # rows (lambda, gcv), nan where GCV was undefined


def select_lambda(problem: Problem, model, grid=None, solver: str = "mnr",
                  config=None, path=None) -> SelectionResult:
    """Pick the GCV-minimizing level; ties go to the larger lambda.

    solver "mnr" runs the iterative solver at every grid value (model is
    the penalty model; its own lam field is ignored). solver
    "amnr" scores the path knots (model is a Variant); pass a precomputed
    path to avoid recomputing it. The residual sum of squares is always
    taken in the original data space.
    """
    if solver == "mnr":
        return _select_mnr(problem, model, grid, config)
    if solver == "amnr":
        return _select_amnr(problem, model, config, path)
    raise ValueError(f"unknown solver {solver!r}")


def _select_mnr(problem, spec: ModelSpec, grid, config) -> SelectionResult:
    if grid is None:
        grid = lambda_grid(problem)
    n = problem.n
    curve = np.full((len(grid), 2), np.nan)
    best = None  # (gcv, lam, solution)
    for i, lam in enumerate(grid):
        trial = dataclasses.replace(spec, lam=float(lam))
        try:
            sol = mnr_solve(problem, trial, config)
        except MnrError as exc:
            raise MnrError(f"at lambda={lam:g}: {exc}") from exc
        r = problem.y - problem.X @ sol.beta
        rss = float(r @ r)
        df = degrees_of_freedom(problem, trial, sol.beta, epsilon=sol.epsilon)
        curve[i, 0] = lam
        if df >= n:
            continue
        score = gcv(rss, df, n)
        curve[i, 1] = score
        if best is None or score < best[0]:
            best = (score, float(lam), sol)
    if best is None:
        raise ValueError("every grid value left df >= n; GCV cannot rank them")
    return SelectionResult(best[1], best[2], curve)


def _select_amnr(problem, variant: Variant, config, path) -> SelectionResult:
    if variant is None:
        raise ValueError("solver 'amnr' needs the variant as the model argument")
    if path is None:
        path = amnr_path(problem, variant, config)
    n = problem.n
    wk = _working_problem(problem, variant)
    augmented = wk.Xw.shape[0] > n
    if augmented:
        # Model complexity of a knot is the trace of its restricted hat
        # matrix: the smooth rows shrink within the active set, so the
        # cardinality |A| overcounts. Without augmentation the trace is
        # exactly |A| (projection), so the cheap count is used there.
        gram_w = wk.Xw.T @ wk.Xw
        data_block = wk.Xw[:n, :]
        gram_d = data_block.T @ data_block
    curve = np.full((len(path), 2), np.nan)
    best = None  # (gcv, index)
    for i, knot in enumerate(path):
        curve[i, 0] = knot.lam
        idx = list(knot.active)
        if augmented and idx:
            sub = np.ix_(idx, idx)
            try:
                fac = scipy.linalg.cho_factor(gram_w[sub], lower=True, check_finite=False)
            except scipy.linalg.LinAlgError:
                continue
            df = float(np.trace(scipy.linalg.cho_solve(fac, gram_d[sub], check_finite=False)))
        else:
            df = float(len(idx))
        if df >= n:
            continue
        r = problem.y - problem.X @ knot.beta
        score = gcv(float(r @ r), df, n)
        curve[i, 1] = score
        if best is None or score < best[0]:
            best = (score, i)
    if best is None:
        raise ValueError("every path knot left df >= n; GCV cannot rank them")
    knot = path[best[1]]
    sol = solve_at_lambda(problem, variant, knot.lam, path=path)
    return SelectionResult(knot.lam, sol, curve)


def ridge_select(problem: Problem, grid: LambdaGrid, operator: Optional[LinearOperator] = None,
                 ) -> SelectionResult:
    """GCV-selected quadratic-penalty fit, solved in closed form.

    Solves (X^T X + 2 lam L^T L) beta = X^T y over the grid. With the
    identity operator one singular value decomposition covers the whole
    grid; a general operator refactorizes per grid value.
    """
    n, p = problem.n, problem.p
    X, y = problem.X, problem.y
    curve = np.full((len(grid), 2), np.nan)
    best = None  # (gcv, lam, beta, df)

    if operator is None or operator.kind == "identity":
        U, s, Vt = np.linalg.svd(X, full_matrices=False)
        uty = U.T @ y
        s2 = s * s
        for i, lam in enumerate(grid):
            shrink = s2 / (s2 + 2.0 * lam)
            beta = Vt.T @ ((s / (s2 + 2.0 * lam)) * uty)
            df = float(shrink.sum())
            curve[i, 0] = lam
            if df >= n:
                continue
            r = y - X @ beta
            score = gcv(float(r @ r), df, n)
            curve[i, 1] = score
            if best is None or score < best[0]:
                best = (score, float(lam), beta, df)
    else:
        XtX = X.T @ X
        Xty = X.T @ y
        LtL = weighted_gram(operator, np.ones(operator.rows))
        for i, lam in enumerate(grid):
            try:
                fac = scipy.linalg.cho_factor(
                    XtX + 2.0 * lam * LtL, lower=True, check_finite=False
                )
            except scipy.linalg.LinAlgError as exc:
                raise ValueError(f"singular ridge system at lambda={lam:g}") from exc
            beta = scipy.linalg.cho_solve(fac, Xty, check_finite=False)
            df = float(np.trace(scipy.linalg.cho_solve(fac, XtX, check_finite=False)))
            curve[i, 0] = lam
            if df >= n:
                continue
            r = y - X @ beta
            score = gcv(float(r @ r), df, n)
            curve[i, 1] = score
            if best is None or score < best[0]:
                best = (score, float(lam), beta, df)

    if best is None:
        raise ValueError("every grid value left df >= n; GCV cannot rank them")
    score, lam, beta, _ = best
    op = operator if operator is not None else make_operator("identity", p)
    spec = ModelSpec(terms=(PenaltyTerm(L2, op),), lam=lam)
    sol = Solution(
        beta=beta,
        lam=lam,
        objective=objective(problem, spec, beta),
        iterations=1,
        converged=True,
        wall_time=0.0,
    )
    return SelectionResult(lam, sol, curve)
