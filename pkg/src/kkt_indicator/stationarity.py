"""Pareto-stationarity residuals via the min-norm point of the gradient hull.

For a Jacobian ``G`` (``n x m``, one gradient per column) the residual of a
solution is ``s = ||G lam*||^2`` where ``lam*`` minimizes that squared norm
over the probability simplex. ``s`` vanishes exactly at Pareto-stationary
points.
"""

from __future__ import annotations

from collections.abc import Sequence
from concurrent.futures import Executor
from dataclasses import dataclass, field

import numpy as np

from kkt_indicator.problems import Problem, jacobian_fd

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 50_000
NEGATIVE_WEIGHT_TOL = 1e-14


@dataclass(frozen=True)
class StationarityResult:
    """Solution of the min-norm QP for one Jacobian."""

    weights: np.ndarray
    q: np.ndarray
    residual: float
    iterations: int
    converged: bool


@dataclass(frozen=True)
class ResidualSet:
    """Residuals of a population, in population order."""

    values: np.ndarray
    converged: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float).reshape(-1)
        if np.any(~np.isfinite(values)) or np.any(values < 0):
            raise ValueError("residuals must be finite and nonnegative")
        flags = (
            np.ones(values.shape, dtype=bool)
            if self.converged is None
            else np.asarray(self.converged, dtype=bool).reshape(-1)
        )
        if flags.shape != values.shape:
            raise ValueError("one convergence flag per residual required")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "converged", flags)

    def __len__(self) -> int:
        return self.values.size

    @property
    def failures(self) -> int:
        return int(np.count_nonzero(~self.converged))


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection of ``v`` onto ``{w >= 0, sum(w) = 1}``.

    Sorting-based algorithm: find the largest ``rho`` with
    ``u_rho + (1 - sum_{j<=rho} u_j) / rho > 0`` for ``u`` sorted descending,
    then shift and clip.
    """
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    ind = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / ind > 0)[0][-1]
    return np.maximum(v - css[rho] / (rho + 1.0), 0.0)


def _clean_weights(lam: np.ndarray) -> np.ndarray:
    lam = np.where(lam < NEGATIVE_WEIGHT_TOL, np.maximum(lam, 0.0), lam)
    lam = np.maximum(lam, 0.0)
    return lam / lam.sum()


def _gradient_step(H: np.ndarray, lam: np.ndarray) -> np.ndarray:
    # H is normalized to unit trace, so 1/L = 1/2 and the step is plain H @ lam
    return project_simplex(lam - H @ lam)


def _active_set(H: np.ndarray, lam: np.ndarray, max_iter: int) -> tuple[np.ndarray, int]:
    """Primal active-set refinement started from a feasible ``lam``.

    Each step minimizes ``lam^T H lam`` on the affine hull of the working set
    (least-squares KKT solve, so singular ``H`` is fine), walks toward it until
    a weight hits zero, and frees the index with the most negative reduced
    gradient once the working set is optimal.
    """
    m = lam.size
    work = lam > 0.0
    for it in range(1, max_iter + 1):
        idx = np.flatnonzero(work)
        r = idx.size
        K = np.zeros((r + 1, r + 1))
        K[:r, :r] = H[np.ix_(idx, idx)]
        K[:r, r] = K[r, :r] = 1.0
        rhs = np.zeros(r + 1)
        rhs[r] = 1.0
        sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
        target = np.zeros(m)
        target[idx] = sol[:r]
        target[idx] /= target[idx].sum()
        d = target - lam
        neg = idx[d[idx] < 0.0]
        blocking = neg[target[neg] < 0.0]
        if blocking.size:
            ratios = lam[blocking] / -d[blocking]
            j = int(np.argmin(ratios))
            lam = np.maximum(lam + ratios[j] * d, 0.0)
            lam[blocking[j]] = 0.0
            lam /= lam.sum()
            work[blocking[j]] = False
            continue
        lam = target
        grad = H @ lam
        nu = lam @ grad
        outside = np.flatnonzero(~work)
        if outside.size == 0:
            return lam, it
        j = outside[np.argmin(grad[outside])]
        if grad[j] >= nu - 1e-15:
            return lam, it
        work[j] = True
    return lam, max_iter


def solve_min_norm_qp(
    G: np.ndarray,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    warm_iter: int = 200,
) -> StationarityResult:
    """Minimize ``||G lam||^2`` over the probability simplex.

    The Gram matrix is normalized to unit trace, which makes the fixed step
    ``1/L`` with ``L = 2 trace(G^T G)`` equal to 1/2 and makes every iterate
    independent of a positive rescaling of ``G``. Up to ``warm_iter``
    projected-gradient steps from uniform weights locate the support; an
    active-set solve on the reduced KKT system then finishes exactly. If that
    does not certify, projected gradient resumes for the remaining budget.

    Optimality is certified by the projected step
    ``||lam - P(lam - grad/L)|| <= tol``.

    Args:
        G: Jacobian of shape ``(n, m)``.
        tol: Certification tolerance on the projected step.
        max_iter: Total iteration cap. On exhaustion the best iterate is
            returned with ``converged=False``.
        warm_iter: Projected-gradient steps before the active-set phase.

    Raises:
        ValueError: If ``G`` has non-finite entries or no columns.
    """
    G = np.asarray(G, dtype=float)
    if G.ndim != 2 or G.shape[1] < 1:
        raise ValueError(f"expected an (n, m) Jacobian with m >= 1, got shape {G.shape}")
    if not np.all(np.isfinite(G)):
        raise ValueError("Jacobian contains non-finite entries")
    m = G.shape[1]
    lam = np.full(m, 1.0 / m)
    if m == 1:
        q = G[:, 0].copy()
        return StationarityResult(lam, q, float(q @ q), 0, True)

    H = G.T @ G
    trace = np.trace(H)
    if trace == 0.0:
        return StationarityResult(lam, np.zeros(G.shape[0]), 0.0, 0, True)
    H = H / trace

    def certified(w: np.ndarray) -> bool:
        return np.linalg.norm(_gradient_step(H, w) - w) <= tol

    best, best_val = lam, float(lam @ H @ lam)
    used = 0
    converged = False
    for _ in range(min(warm_iter, max_iter)):
        nxt = _gradient_step(H, lam)
        used += 1
        done = np.linalg.norm(nxt - lam) <= tol
        lam = nxt
        val = float(lam @ H @ lam)
        if val <= best_val:
            best, best_val = lam, val
        if done:
            converged = True
            break

    if not converged and used < max_iter:
        cand, spent = _active_set(H, best, min(4 * m + 20, max_iter - used))
        used += spent
        cand = _clean_weights(cand)
        val = float(cand @ H @ cand)
        if certified(cand) or val <= best_val:
            best, best_val = cand, val
        lam = best
        converged = certified(best)
        while not converged and used < max_iter:
            lam = _gradient_step(H, lam)
            used += 1
            val = float(lam @ H @ lam)
            if val <= best_val:
                best, best_val = lam, val
            converged = certified(lam)

    lam = _clean_weights(best)
    q = G @ lam
    return StationarityResult(lam, q, float(q @ q), used, converged)


def residual(G: np.ndarray, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> float:
    """Stationarity residual ``||G lam*||^2`` of a Jacobian."""
    return solve_min_norm_qp(G, tol, max_iter).residual


def _solve_point(args):
    problem, x, gradient_mode, tol, max_iter = args
    G = problem.jacobian(x) if gradient_mode == "analytic" else jacobian_fd(problem, x)
    return solve_min_norm_qp(G, tol, max_iter)


def residuals(
    problem: Problem,
    population: Sequence[np.ndarray] | np.ndarray,
    gradient_mode: str = "analytic",
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    executor: Executor | None = None,
) -> ResidualSet:
    """Residuals of every solution in ``population``, in input order.

    Args:
        problem: Problem supplying Jacobians.
        population: Decision vectors, shape ``(N, n)``.
        gradient_mode: ``"analytic"`` or ``"finite_difference"`` (alias ``"fd"``).
        executor: Optional executor for concurrent solves. Results are
            collected in input order, so output does not depend on scheduling.

    Raises:
        ValueError: On an empty population, unknown mode, or invalid points.
    """
    if gradient_mode == "fd":
        gradient_mode = "finite_difference"
    if gradient_mode not in ("analytic", "finite_difference"):
        raise ValueError(f"unknown gradient mode {gradient_mode!r}")
    X = np.asarray(population, dtype=float)
    if X.size == 0:
        raise ValueError("empty population")
    X = problem.check(np.atleast_2d(X))
    jobs = [(problem, x, gradient_mode, tol, max_iter) for x in X]
    results = list(executor.map(_solve_point, jobs) if executor else map(_solve_point, jobs))
    return ResidualSet(
        np.array([r.residual for r in results]),
        np.array([r.converged for r in results]),
    )
