"""Reweighted Newton solver for the penalized least-squares objective.

Each iteration solves (X^T X + Omega) beta = X^T y where Omega collects
the per-term diagonally reweighted Gram matrices, then rebuilds the
weights at the new iterate. The perturbation epsilon is tightened once,
after the first iteration, and frozen from then on.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .model import (
    L1,
    ModelSpec,
    Problem,
    Solution,
    objective,
    perturbed_objective,
    perturbed_penalty_diag,
)
from .operators import apply, weighted_gram

__all__ = [
    "MnrConfig",
    "MnrError",
    "mnr_solve",
    "update_epsilon",
    "perturbed_penalty_diag",
]


class MnrError(RuntimeError):
    """Numerical failure inside the iteration, tagged with the iteration index."""


@dataclass
class MnrConfig:
    tau: float = 1e-8
    epsilon0: float = 1e-8
    max_iter: int = 100
    alpha: float = 1.0
    track_descent: bool = False

    def __post_init__(self):
        if self.tau <= 0 or self.epsilon0 <= 0:
            raise ValueError("tau and epsilon0 must be > 0")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not (0 < self.alpha <= 1):
            raise ValueError("alpha must be in (0, 1]")


def update_epsilon(thetas, tau: float, kinds, epsilon: float) -> float:
    """Tightened perturbation tau/(2 R M) * min nonzero |theta|.

    M is the largest one-sided derivative at zero across terms: 1 for the
    absolute-value kind, 0 for the square kind. With no absolute-value
    term that maximum would be 0, so M falls back to 1 (for pure square
    penalties the perturbation is numerically irrelevant anyway).
    If every theta entry is exactly zero the incoming epsilon is kept.
    """
    R = len(thetas)
    smallest = np.inf
    for theta in thetas:
        a = np.abs(np.asarray(theta, dtype=float))
        nz = a[a > 0]
        if nz.size:
            smallest = min(smallest, nz.min())
    if not np.isfinite(smallest):
        return epsilon
    # the square kind contributes derivative 0 at the origin, so M = 1 always
    M = 1.0
    return tau / (2.0 * R * M) * smallest


def _spd_solve(H: np.ndarray, rhs: np.ndarray, iteration: int):
    try:
        c = scipy.linalg.cho_factor(H, lower=True, check_finite=False)
        return scipy.linalg.cho_solve(c, rhs, check_finite=False)
    except scipy.linalg.LinAlgError:
        pass
    jitter = 1e-10 * np.trace(H) / H.shape[0]
    try:
        c = scipy.linalg.cho_factor(
            H + jitter * np.eye(H.shape[0]), lower=True, check_finite=False
        )
        return scipy.linalg.cho_solve(c, rhs, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise MnrError(
            f"normal-equations matrix numerically singular at iteration {iteration}"
        ) from exc


def mnr_solve(problem: Problem, spec: ModelSpec, config: MnrConfig | None = None) -> Solution:
    if config is None:
        config = MnrConfig()
    if spec.sign_mode != "unconstrained":
        raise ValueError("this solver cannot impose sign constraints; use the path solver")
    for t in spec.terms:
        if t.operator.cols != problem.p:
            raise ValueError("operator width does not match problem dimension")

    t0 = time.perf_counter()
    X, y, p = problem.X, problem.y, problem.p
    XtX = X.T @ X
    Xty = X.T @ y
    lambdas = spec.lambdas
    kinds = [t.kind for t in spec.terms]

    eps = config.epsilon0
    omega = np.eye(p)
    beta = np.zeros(p)
    k = 0
    converged = False
    eps_surrogate = None  # epsilon under which the pending step's weights were built
    descent_gaps = [] if config.track_descent else None

    while k < config.max_iter:
        k += 1
        newton = _spd_solve(XtX + omega, Xty, k)
        beta_new = beta + config.alpha * (newton - beta)
        if not np.all(np.isfinite(beta_new)):
            raise MnrError(f"non-finite iterate at iteration {k}")
        if descent_gaps is not None and eps_surrogate is not None:
            gap = perturbed_objective(problem, spec, beta_new, eps_surrogate) - (
                perturbed_objective(problem, spec, beta, eps_surrogate)
            )
            descent_gaps.append(gap)
        beta = beta_new

        thetas = [apply(t.operator, beta) for t in spec.terms]
        ds = [
            perturbed_penalty_diag(theta, t.kind, t.gamma, eps)
            for theta, t in zip(thetas, spec.terms)
        ]
        eps_surrogate = eps
        if k == 1:
            eps = update_epsilon(thetas, config.tau, kinds, eps)

        omega = np.zeros((p, p))
        for lam_r, t, d in zip(lambdas, spec.terms, ds):
            if lam_r != 0.0:
                omega += lam_r * weighted_gram(t.operator, d)
        delta = -Xty + (XtX + omega) @ beta

        # certify only the coordinates that are clearly non-null
        live = np.abs(beta) >= eps
        if np.all(np.abs(delta[live]) < config.tau / 2.0):
            converged = True
            break

    sparse = np.where(np.abs(beta) >= eps, beta, 0.0)
    return Solution(
        beta=beta,
        lam=spec.lam,
        objective=objective(problem, spec, beta),
        iterations=k,
        converged=converged,
        wall_time=time.perf_counter() - t0,
        beta_sparse=sparse,
        epsilon=eps,
        descent_gaps=None if descent_gaps is None else np.asarray(descent_gaps),
    )
