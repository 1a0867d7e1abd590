"""Active-set path solver for L1-type penalties and its model variants.

The engine computes the full piecewise-linear solution path of

    0.5 * ||y~ - X~ v||^2 + lam * sum_j gamma_j |v_j|      (v free), or
    0.5 * ||y~ - X~ v||^2 + lam * sum_j gamma_j v_j        (v >= 0),

moving from the empty model downward in lam. Variants are realized by
mapping onto this working problem: reference-scaled columns for the
garrote family (the working variable is the shrinkage factor w, with
beta_j = w_j * ref_j recovered only at the boundary), and an appended
sqrt(lambda_sm) * L block to absorb a quadratic smoothness term.

Between events the active coefficients move along the least-squares
direction delta = (X_A^T X_A)^{-1} X_A^T r while every active weighted
correlation decays as (1 - alpha) * lam_k. Events are: an inactive
variable reaching the correlation boundary (it enters), an active
coefficient reaching zero (it is removed and the direction is rebuilt
at the same lam), or the full step alpha = 1 (all correlations vanish;
the path ends at lam = 0).
"""

from __future__ import annotations

import bisect
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg

from .model import Problem, Solution, _as_finite_array
from .operators import LinearOperator, make_operator

VARIANT_TAGS = ("lasso", "alasso", "nng", "snng", "nn_slasso", "slasso", "enet_l")
_NONNEG_TAGS = ("nng", "snng", "nn_slasso")
_SMOOTH_TAGS = ("snng", "nn_slasso", "slasso", "enet_l")

ENTERED_PLUS = "entered_plus"
ENTERED_MINUS = "entered_minus"
ZERO_CROSSED = "zero_crossed"
TERMINAL = "terminal"

# candidates this close to each other count as tied; smallest index wins
_TIE = 1e-12
# a step this close to 1 is taken as the terminal full step
_FULL_STEP = 1.0 - 1e-12
# active coefficients at most this large after a crossing step are snapped to 0
_SNAP = 1e-14


class AmnrError(RuntimeError):
    pass


@dataclass(frozen=True)
class Variant:
    """A concrete model solved on the path: tag plus its parameters."""

    tag: str
    gamma: Optional[np.ndarray] = None
    reference: Optional[np.ndarray] = None
    lambda_sm: float = 0.0
    smooth_operator: str = "first_difference"

    def __post_init__(self):
        if self.tag not in VARIANT_TAGS:
            raise ValueError(f"unknown variant tag {self.tag!r}")
        if self.tag in ("nng", "snng") and self.reference is None:
            raise ValueError(f"{self.tag} requires a reference vector")
        if self.lambda_sm < 0:
            raise ValueError("lambda_sm must be >= 0")
        if self.gamma is not None:
            g = _as_finite_array(self.gamma, "gamma", 1)
            if np.any(g < 0):
                raise ValueError("gamma weights must be >= 0")
            object.__setattr__(self, "gamma", g)
        if self.reference is not None:
            ref = _as_finite_array(self.reference, "reference", 1)
            object.__setattr__(self, "reference", ref)

    @property
    def nonneg(self) -> bool:
        return self.tag in _NONNEG_TAGS

    # --- factory helpers ---

    @classmethod
    def lasso(cls) -> "Variant":
        return cls("lasso")

    @classmethod
    def alasso(cls, gamma) -> "Variant":
        return cls("alasso", gamma=np.asarray(gamma, dtype=float))

    @classmethod
    def nng(cls, reference) -> "Variant":
        return cls("nng", reference=np.asarray(reference, dtype=float))

    @classmethod
    def snng(cls, reference, lambda_sm, smooth_operator="first_difference") -> "Variant":
        return cls(
            "snng",
            reference=np.asarray(reference, dtype=float),
            lambda_sm=lambda_sm,
            smooth_operator=smooth_operator,
        )

    @classmethod
    def nn_slasso(cls, lambda_sm) -> "Variant":
        # the all-ones reference is materialized when the problem is seen
        return cls("nn_slasso", lambda_sm=lambda_sm, smooth_operator="first_difference")

    @classmethod
    def slasso(cls, lambda_sm) -> "Variant":
        return cls("slasso", lambda_sm=lambda_sm, smooth_operator="first_difference")

    @classmethod
    def enet_l(cls, lambda_sm) -> "Variant":
        return cls("enet_l", lambda_sm=lambda_sm, smooth_operator="second_difference")


@dataclass(frozen=True)
class PathKnot:
    k: int
    lam: float
    beta: np.ndarray
    active: tuple
    alpha: float
    cause: str
    w: np.ndarray
    warnings: tuple = ()


@dataclass
class AmnrConfig:
    tau: float = 1e-8
    max_active: Optional[int] = None  # default: min(working rows, p)
    allow_removal: bool = True
    max_knots: Optional[int] = None  # safety valve, default 20 p + 50

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError("tau must be > 0")
        if self.max_active is not None and self.max_active < 1:
            raise ValueError("max_active must be >= 1")


def augment_smooth(problem: Problem, lambda_sm: float, L: LinearOperator, reference=None) -> Problem:
    """Working problem with reference-scaled columns and the smooth block.

    Rows sqrt(lambda_sm) * L * diag(reference) over a zero response absorb
    the term (lambda_sm / 2) * ||L diag(ref) w||^2 into the fidelity.
    A zero lambda_sm omits the block entirely.
    """
    if lambda_sm < 0:
        raise ValueError("lambda_sm must be >= 0")
    if reference is None:
        scale = np.ones(problem.p)
    else:
        scale = _as_finite_array(reference, "reference", 1)
        if scale.shape != (problem.p,):
            raise ValueError("reference length must equal p")
    X = problem.X * scale[None, :]
    if lambda_sm == 0.0:
        return Problem(X, problem.y)
    if L.cols != problem.p:
        raise ValueError("smooth operator width must equal p")
    block = np.sqrt(lambda_sm) * (L.entries * scale[None, :])
    Xw = np.vstack([X, block])
    yw = np.concatenate([problem.y, np.zeros(L.rows)])
    return Problem(Xw, yw)


@dataclass
class _Working:
    Xw: np.ndarray
    yw: np.ndarray
    gamma: np.ndarray
    nonneg: bool
    scale: np.ndarray  # beta = w * scale
    alive: np.ndarray  # bool, columns that can ever activate


def _working_problem(problem: Problem, variant: Variant) -> _Working:
    p = problem.p
    if variant.tag in ("nng", "snng"):
        ref = variant.reference
        if ref.shape != (p,):
            raise ValueError("reference length must equal p")
        if np.all(ref == 0):
            raise ValueError("reference is identically zero: no admissible variables")
    else:
        ref = np.ones(p)

    if variant.tag in _SMOOTH_TAGS and variant.lambda_sm > 0:
        if isinstance(variant.smooth_operator, LinearOperator):
            L = variant.smooth_operator
        else:
            L = make_operator(variant.smooth_operator, p)
        work = augment_smooth(problem, variant.lambda_sm, L, ref)
    else:
        work = augment_smooth(problem, 0.0, None, ref)

    if variant.tag == "alasso":
        gamma = variant.gamma
        if gamma is None or gamma.shape != (p,):
            raise ValueError("alasso needs a gamma vector of length p")
        if np.any(gamma == 0):
            raise ValueError(
                "alasso path needs strictly positive gamma; zero weights are not representable"
            )
    else:
        gamma = np.ones(p)

    alive = np.einsum("ij,ij->j", work.X, work.X) > 0.0
    return _Working(work.X, work.y, gamma, variant.nonneg, ref, alive)


# --- spec-level helper operations (also used by the engine) ---


def _weighted_value(c, gamma, nonneg):
    return (c / gamma) if nonneg else (np.abs(c) / gamma)


def select_entering(c, gamma, candidates, nonneg=False, tau=0.0):
    """Pick the entering index among candidates; returns (index, lam) or None.

    Unconstrained: argmax |c_j| / gamma_j. Sign-constrained: argmax of the
    signed c_j / gamma_j, admissible only while positive (above tau).
    Ties within 1e-12 resolve to the smallest index.
    """
    candidates = np.asarray(candidates, dtype=int)
    if candidates.size == 0:
        return None
    c = np.asarray(c, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    vals = _weighted_value(c[candidates], gamma[candidates], nonneg)
    top = vals.max()
    if top <= tau:
        return None
    tied = candidates[vals >= top - _TIE * max(1.0, abs(top))]
    j = int(tied.min())
    return j, float(_weighted_value(c[j], gamma[j], nonneg))


def descent_direction(X_A, r):
    """Least-squares direction on the active columns: delta and u = X_A delta."""
    X_A = np.asarray(X_A, dtype=float)
    G = X_A.T @ X_A
    fac = _try_factor(G)
    if fac is None:
        raise AmnrError(
            f"active Gram matrix is numerically singular ({X_A.shape[1]} active columns)"
        )
    delta = scipy.linalg.cho_solve(fac, X_A.T @ r, check_finite=False)
    return delta, X_A @ delta


def _try_factor(G):
    try:
        fac = scipy.linalg.cho_factor(G, lower=True, check_finite=False)
    except scipy.linalg.LinAlgError:
        return None
    piv = np.diag(fac[0]) ** 2
    if piv.min() < 1e-12 * piv.max():
        return None
    return fac


def step_length(c, a, lam_k, gamma, w_active, delta, active, mask_plus,
                mask_minus=None, nonneg=False, allow_removal=True):
    """Smallest positive event along the direction: (alpha, cause, index).

    Entering events solve |c_j - alpha a_j| = gamma_j lam_k (1 - alpha) on the
    admissible side; crossing events fire where an active coefficient changes
    sign within the step; alpha = 1 is the terminal full step. Ties within
    1e-12 resolve to the smallest variable index. The two entering branches
    take separate candidate masks: a variable that just left the active set
    sits exactly on one boundary, so only its other side stays a candidate.
    """
    c = np.asarray(c, dtype=float)
    a = np.asarray(a, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    if mask_minus is None:
        mask_minus = mask_plus
    events = []  # (alpha, variable index, cause)

    glam = gamma * lam_k
    idx = np.flatnonzero(mask_plus)
    if idx.size:
        gl, cj, aj = glam[idx], c[idx], a[idx]
        ok = aj < gl
        with np.errstate(divide="ignore", invalid="ignore"):
            alphas = np.where(ok, (gl - cj) / (gl - aj), np.inf)
        for pos in np.flatnonzero(ok):
            events.append((float(alphas[pos]), int(idx[pos]), ENTERED_PLUS))
    idx = np.flatnonzero(mask_minus)
    if idx.size and not nonneg:
        gl, cj, aj = glam[idx], c[idx], a[idx]
        ok = aj > -gl
        with np.errstate(divide="ignore", invalid="ignore"):
            alphas = np.where(ok, (gl + cj) / (gl + aj), np.inf)
        for pos in np.flatnonzero(ok):
            events.append((float(alphas[pos]), int(idx[pos]), ENTERED_MINUS))

    if allow_removal:
        w_active = np.asarray(w_active, dtype=float)
        delta = np.asarray(delta, dtype=float)
        crossing = w_active * (w_active + delta) < 0
        for h in np.flatnonzero(crossing):
            events.append((float(-w_active[h] / delta[h]), int(active[h]), ZERO_CROSSED))

    best = (1.0, None, TERMINAL)
    for alpha, j, cause in events:
        if alpha <= _TIE or alpha >= _FULL_STEP:
            continue
        b_alpha, b_j, _ = best
        if alpha < b_alpha - _TIE:
            best = (alpha, j, cause)
        elif abs(alpha - b_alpha) <= _TIE and (b_j is None or j < b_j):
            best = (alpha, j, cause)
    return best


def drop_zeroed(active, inactive, beta):
    """Move exact-zero active indices back to the inactive pool."""
    beta = np.asarray(beta, dtype=float)
    dropped = [j for j in active if beta[j] == 0.0]
    kept = [j for j in active if beta[j] != 0.0]
    return kept, list(inactive) + dropped


# --- the path engine ---


def amnr_path(problem: Problem, variant: Variant, config: AmnrConfig | None = None):
    if config is None:
        config = AmnrConfig()
    wk = _working_problem(problem, variant)
    Xw, yw, gamma, nonneg = wk.Xw, wk.yw, wk.gamma, wk.nonneg
    n_w, p = Xw.shape
    max_active = config.max_active or min(n_w, p)
    max_active = min(max_active, p)
    max_knots = config.max_knots or (20 * p + 50)

    w = np.zeros(p)
    in_a = np.zeros(p, dtype=bool)
    skipped = np.zeros(p, dtype=bool)
    active: list = []
    knots: list = []
    pending_warnings: list = []

    def emit(k, lam, alpha, cause):
        beta = w * wk.scale
        knots.append(
            PathKnot(
                k=k,
                lam=float(lam),
                beta=beta,
                active=tuple(active),
                alpha=float(alpha),
                cause=cause,
                w=w.copy(),
                warnings=tuple(pending_warnings),
            )
        )
        pending_warnings.clear()

    def absorb(c, lam):
        """Move every candidate sitting on the boundary lam into the active set.

        Normally that is exactly the variable whose entering event fired;
        exact ties come along in index order. Columns that would make the
        active Gram singular are skipped and recorded.
        """
        added = 0
        while len(active) < max_active:
            cand = np.flatnonzero(wk.alive & ~in_a & ~skipped)
            picked = select_entering(c, gamma, cand, nonneg=nonneg, tau=config.tau)
            if picked is None:
                break
            j, val = picked
            if val < lam * (1.0 - _TIE) - _TIE:
                break
            active.append(j)
            in_a[j] = True
            if _try_factor(Xw[:, active].T @ Xw[:, active]) is None:
                active.pop()
                in_a[j] = False
                skipped[j] = True
                pending_warnings.append(
                    f"variable {j} skipped: joining it makes the active Gram singular"
                )
                continue
            added += 1
        return added

    # initial selection fixes lam_0
    c = Xw.T @ yw
    picked = select_entering(c, gamma, np.flatnonzero(wk.alive), nonneg=nonneg, tau=config.tau)
    if picked is None:
        # nothing is admissible (e.g. y = 0): the path is the single empty knot
        emit(0, 0.0, 0.0, TERMINAL)
        return knots
    j0, lam = picked
    active.append(j0)
    in_a[j0] = True
    absorb(c, lam)
    emit(0, lam, 0.0, ENTERED_PLUS if c[j0] > 0 else ENTERED_MINUS)

    # one-event echo guards: a variable dropped from one boundary must not
    # fire that boundary's entering event again at alpha ~ 0
    jd_plus = np.zeros(p, dtype=bool)
    jd_minus = np.zeros(p, dtype=bool)
    k = 0
    while True:
        if k >= max_knots:
            raise AmnrError(f"path exceeded {max_knots} knots without terminating")
        XA = Xw[:, active]
        r = yw - XA @ w[active]
        c = Xw.T @ r
        fac = _try_factor(XA.T @ XA)
        if fac is None:
            # cannot happen for sets that were validated on entry
            raise AmnrError(f"active Gram became singular with active set {active}")
        delta = scipy.linalg.cho_solve(fac, XA.T @ r, check_finite=False)
        u = XA @ delta
        a = Xw.T @ u

        mask = wk.alive & ~in_a & ~skipped
        alpha, j_ev, cause = step_length(
            c, a, lam, gamma, w[active], delta, active,
            mask & ~jd_plus, mask & ~jd_minus,
            nonneg=nonneg, allow_removal=config.allow_removal,
        )
        k += 1

        if cause == TERMINAL:
            w[active] += delta
            emit(k, 0.0, 1.0, TERMINAL)
            return knots

        if cause != ZERO_CROSSED and len(active) >= max_active:
            # the true path needs another variable; stop at this boundary
            w[active] += alpha * np.asarray(delta)
            lam = (1.0 - alpha) * lam
            pending_warnings.append(
                f"max_active={max_active} reached; path truncated where "
                f"variable {j_ev} would enter"
            )
            emit(k, lam, alpha, TERMINAL)
            return knots

        w_before = w.copy()
        w[active] += alpha * np.asarray(delta)
        lam = (1.0 - alpha) * lam
        jd_plus[:] = False
        jd_minus[:] = False

        if cause == ZERO_CROSSED:
            w[j_ev] = 0.0
            for j in list(active):
                if abs(w[j]) <= _SNAP:
                    w[j] = 0.0
            kept = [j for j in active if w[j] != 0.0]
            for j in active:
                if w[j] == 0.0:
                    in_a[j] = False
                    # it sat on the boundary matching its old sign
                    if w_before[j] >= 0.0:
                        jd_plus[j] = True
                    if w_before[j] <= 0.0:
                        jd_minus[j] = True
            active[:] = kept
            emit(k, lam, alpha, ZERO_CROSSED)
            if not active:
                # unreachable for strictly positive weights; guard anyway
                pending_warnings.append("active set emptied by simultaneous removals")
                return knots
            continue

        # an entering event: j_ev sits exactly on the boundary now
        active.append(j_ev)
        in_a[j_ev] = True
        if _try_factor(Xw[:, active].T @ Xw[:, active]) is None:
            active.pop()
            in_a[j_ev] = False
            skipped[j_ev] = True
            pending_warnings.append(
                f"variable {j_ev} skipped: joining it makes the active Gram singular"
            )
            emit(k, lam, alpha, cause)
            continue
        # re-anchor lam to the actual correlation level and collect exact ties
        r = yw - Xw[:, active] @ w[active]
        c = Xw.T @ r
        lam = _weighted_value(c[j_ev], gamma[j_ev], nonneg)
        absorb(c, lam)
        emit(k, lam, alpha, cause)


def working_objective(problem: Problem, variant: Variant, w, lam: float) -> float:
    """Objective of the working L1 problem at shrinkage coordinates w."""
    wk = _working_problem(problem, variant)
    r = wk.yw - wk.Xw @ w
    pen = wk.gamma @ (w if wk.nonneg else np.abs(w))
    return 0.5 * float(r @ r) + lam * float(pen)


def solve_at_lambda(problem: Problem, variant: Variant, lam: float,
                    config: AmnrConfig | None = None, path=None) -> Solution:
    """Exact solution at one lam, read off the piecewise-linear path."""
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    t0 = time.perf_counter()
    if path is None:
        path = amnr_path(problem, variant, config)
    lams = [-knot.lam for knot in path]  # ascending for bisect
    if lam >= path[0].lam:
        w = np.zeros_like(path[0].w)
        beta = np.zeros_like(path[0].beta)
    elif lam <= path[-1].lam:
        w, beta = path[-1].w, path[-1].beta
    else:
        hi = bisect.bisect_left(lams, -lam)
        lo = hi - 1
        span = path[lo].lam - path[hi].lam
        t = (path[lo].lam - lam) / span
        w = (1 - t) * path[lo].w + t * path[hi].w
        beta = (1 - t) * path[lo].beta + t * path[hi].beta
    return Solution(
        beta=beta.copy(),
        lam=float(lam),
        objective=working_objective(problem, variant, w, lam),
        iterations=len(path),
        converged=True,
        wall_time=time.perf_counter() - t0,
    )


@dataclass
class KktReport:
    lam: float
    max_active_gap: float
    max_inactive_excess: float
    sign_violations: int
    tol: float

    @property
    def passed(self) -> bool:
        return (
            self.max_active_gap <= self.tol
            and self.max_inactive_excess <= self.tol
            and self.sign_violations == 0
        )


def kkt_check(problem: Problem, variant: Variant, knot: PathKnot, tol: float = 1e-8) -> KktReport:
    """Optimality report for one path point, in working coordinates.

    Active variables must sit exactly on the weighted correlation boundary
    with matching sign; inactive ones must stay inside it (one-sided for the
    sign-constrained variants).
    """
    wk = _working_problem(problem, variant)
    w = knot.w
    r = wk.yw - wk.Xw @ w
    c = wk.Xw.T @ r
    lam = knot.lam

    active = np.asarray(knot.active, dtype=int)
    active_gap = 0.0
    for j in active:
        v = c[j] / wk.gamma[j]
        if wk.nonneg:
            gap = abs(v - lam)
        elif w[j] != 0.0:
            gap = abs(v - lam * np.sign(w[j]))
        else:
            gap = abs(abs(v) - lam)
        active_gap = max(active_gap, float(gap))

    in_a = np.zeros(wk.Xw.shape[1], dtype=bool)
    in_a[active] = True
    outside = wk.alive & ~in_a
    if np.any(outside):
        v = _weighted_value(c[outside], wk.gamma[outside], wk.nonneg)
        inactive_excess = float(np.max(v) - lam)
    else:
        inactive_excess = 0.0

    violations = int(np.sum(w < -1e-12)) if wk.nonneg else 0
    return KktReport(lam, active_gap, inactive_excess, violations, tol)
