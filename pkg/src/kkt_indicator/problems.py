"""DTLZ1-DTLZ5 benchmark problems with analytic Jacobians.

All problems share the layout used by Deb, Thiele, Laumanns and Zitzler:
the first ``m - 1`` decision variables are position variables that place a
point on the front, the remaining ``k`` distance variables enter through a
scalar ``g`` that is minimal on the Pareto-optimal set. Every objective is

    f_i(x) = S(g) * P_i(theta)

where ``S(g)`` is ``0.5 (1 + g)`` for DTLZ1 and ``1 + g`` otherwise, and
``P_i`` is a product of "cosine-like" factors ``a_j`` and one "sine-like"
factor ``b_j`` of the angles ``theta``. DTLZ1 uses ``a = x``, ``b = 1 - x``.

Jacobians are returned with shape ``(n, m)``: column ``i`` is the gradient of
``f_i``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import ClassVar

import numpy as np

DEFAULT_K: dict[str, int] = {"dtlz1": 5, "dtlz2": 10, "dtlz3": 10, "dtlz4": 10, "dtlz5": 10}

_HALF_PI = 0.5 * np.pi


@dataclass(frozen=True)
class Problem:
    """Base class for box-constrained DTLZ problems on ``[0, 1]^n``."""

    m: int
    k: int

    name: ClassVar[str] = ""
    lower: ClassVar[float] = 0.0
    upper: ClassVar[float] = 1.0

    def __post_init__(self) -> None:
        if self.m < 2:
            raise ValueError(f"{self.name}: need m >= 2 objectives, got {self.m}")
        if self.k < 1:
            raise ValueError(f"{self.name}: need k >= 1 distance variables, got {self.k}")

    @property
    def n(self) -> int:
        return self.m - 1 + self.k

    @property
    def ideal(self) -> np.ndarray:
        return np.zeros(self.m)

    @property
    def nadir(self) -> np.ndarray:
        return np.ones(self.m)

    def __str__(self) -> str:
        return f"{self.name}(m={self.m}, k={self.k})"

    # -- validation -----------------------------------------------------

    def check(self, X: np.ndarray) -> np.ndarray:
        """Return ``X`` as a float array after dimension and bound checks.

        Raises:
            ValueError: On a length mismatch or any component outside the box.
                Out-of-bounds values are rejected rather than clamped.
        """
        X = np.asarray(X, dtype=float)
        if X.shape[-1] != self.n:
            raise ValueError(f"{self}: expected {self.n} decision variables, got {X.shape[-1]}")
        if not np.all(np.isfinite(X)):
            raise ValueError(f"{self}: decision vector contains non-finite values")
        bad = (X < self.lower) | (X > self.upper)
        if np.any(bad):
            idx = np.argwhere(bad)[0]
            raise ValueError(
                f"{self}: component {tuple(int(i) for i in idx)} = {X[tuple(idx)]!r} "
                f"outside [{self.lower}, {self.upper}]"
            )
        return X

    # -- pieces overridden by subclasses -----------------------------------

    def _g(self, xd: np.ndarray) -> np.ndarray:
        """Distance function over the last axis of ``xd``."""
        return np.sum((xd - 0.5) ** 2, axis=-1)

    def _dg(self, xd: np.ndarray) -> np.ndarray:
        return 2.0 * (xd - 0.5)

    def _scale(self, g: np.ndarray) -> np.ndarray:
        return 1.0 + g

    def _dscale(self) -> float:
        return 1.0

    def _theta(self, xp: np.ndarray, g: np.ndarray) -> np.ndarray:
        return _HALF_PI * xp

    def _dtheta_dx(self, xp: np.ndarray, g: float) -> np.ndarray:
        return np.full_like(xp, _HALF_PI)

    def _dtheta_dg(self, xp: np.ndarray, g: float) -> np.ndarray:
        return np.zeros_like(xp)

    def _factors(self, theta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return np.cos(theta), np.sin(theta)

    def _dfactors(self, theta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return -np.sin(theta), np.cos(theta)

    # -- public API -------------------------------------------------------

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        """Objective vector of a single decision vector (or a batch of rows)."""
        X = self.check(x)
        if X.ndim == 1:
            return self._evaluate(X[None, :])[0]
        return self._evaluate(X)

    def _evaluate(self, X: np.ndarray) -> np.ndarray:
        m = self.m
        xp, xd = X[:, : m - 1], X[:, m - 1 :]
        g = self._g(xd)
        a, b = self._factors(self._theta(xp, g[:, None]))
        # lead[:, t] = a_0 * ... * a_{t-1}
        lead = np.ones((X.shape[0], m))
        lead[:, 1:] = np.cumprod(a, axis=1)
        P = np.empty((X.shape[0], m))
        P[:, 0] = lead[:, m - 1]
        for i in range(1, m):
            t = m - 1 - i
            P[:, i] = lead[:, t] * b[:, t]
        return self._scale(g)[:, None] * P

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        """Analytic Jacobian ``G`` of shape ``(n, m)`` at a single point.

        Valid on the closed box; no division by factor values is used, so the
        formula is well defined where cosines or sines vanish.
        """
        x = self.check(x)
        if x.ndim != 1:
            raise ValueError(f"{self}: jacobian expects a single decision vector")
        m = self.m
        xp, xd = x[: m - 1], x[m - 1 :]
        g = float(self._g(xd))
        theta = self._theta(xp, g)
        a, b = self._factors(theta)
        da, db = self._dfactors(theta)

        # dP[i, l] = dP_i / dtheta_l
        P = np.empty(m)
        dP = np.zeros((m, m - 1))
        for i in range(m):
            t = m - 1 - i  # number of leading a-factors
            fac = a[:t].copy()
            P[i] = np.prod(fac) * (b[t] if i > 0 else 1.0)
            for l in range(t):
                saved = fac[l]
                fac[l] = da[l]
                dP[i, l] = np.prod(fac) * (b[t] if i > 0 else 1.0)
                fac[l] = saved
            if i > 0:
                dP[i, t] = np.prod(fac) * db[t]

        S = float(self._scale(np.asarray(g)))
        G = np.empty((self.n, m))
        G[: m - 1, :] = (dP * self._dtheta_dx(xp, g)[None, :]).T * S
        dgdx = self._dg(xd)
        dPdg = dP @ self._dtheta_dg(xp, g)
        G[m - 1 :, :] = np.outer(dgdx, self._dscale() * P + S * dPdg)
        return G

    def jacobian_fd(self, x: np.ndarray, h: float = 1e-6) -> np.ndarray:
        """Finite-difference Jacobian, see :func:`jacobian_fd`."""
        return jacobian_fd(self, x, h)

    def sample_front(self, count: int, seed: int) -> np.ndarray:
        """Points on the true Pareto front, shape ``(count, m)``."""
        if count < 1:
            raise ValueError("count must be >= 1")
        rng = np.random.default_rng(seed)
        v = np.abs(rng.standard_normal((count, self.m)))
        v[np.all(v == 0.0, axis=1), 0] = 1.0
        return v / np.linalg.norm(v, axis=1, keepdims=True)

    def optimal_solutions(self, xp: np.ndarray) -> np.ndarray:
        """Complete position variables ``xp`` with the distance tail at its optimum."""
        xp = np.atleast_2d(np.asarray(xp, dtype=float))
        tail = np.full((xp.shape[0], self.k), 0.5)
        return np.hstack([xp, tail])


class DTLZ1(Problem):
    name = "dtlz1"

    def _g(self, xd):
        y = xd - 0.5
        return 100.0 * (xd.shape[-1] + np.sum(y**2 - np.cos(20.0 * np.pi * y), axis=-1))

    def _dg(self, xd):
        y = xd - 0.5
        return 100.0 * (2.0 * y + 20.0 * np.pi * np.sin(20.0 * np.pi * y))

    def _scale(self, g):
        return 0.5 * (1.0 + g)

    def _dscale(self):
        return 0.5

    def _theta(self, xp, g):
        return np.array(xp, dtype=float)

    def _dtheta_dx(self, xp, g):
        return np.ones_like(xp)

    def _factors(self, theta):
        return theta, 1.0 - theta

    def _dfactors(self, theta):
        return np.ones_like(theta), -np.ones_like(theta)

    @property
    def nadir(self) -> np.ndarray:
        return np.full(self.m, 0.5)

    def sample_front(self, count: int, seed: int) -> np.ndarray:
        if count < 1:
            raise ValueError("count must be >= 1")
        rng = np.random.default_rng(seed)
        w = rng.dirichlet(np.ones(self.m), size=count)
        # renormalize so the 0.5-sum holds to rounding, not to sampler accuracy
        return 0.5 * w / w.sum(axis=1, keepdims=True)


class DTLZ2(Problem):
    name = "dtlz2"


class DTLZ3(Problem):
    name = "dtlz3"
    _g = DTLZ1._g
    _dg = DTLZ1._dg


@dataclass(frozen=True)
class DTLZ4(Problem):
    alpha: float = 100.0

    name: ClassVar[str] = "dtlz4"

    def _theta(self, xp, g):
        return _HALF_PI * xp**self.alpha

    def _dtheta_dx(self, xp, g):
        return _HALF_PI * self.alpha * xp ** (self.alpha - 1.0)


class DTLZ5(Problem):
    """DTLZ5; position angles after the first are pulled toward pi/4 as ``g -> 0``."""

    name = "dtlz5"

    def _theta(self, xp, g):
        g = np.asarray(g, dtype=float)
        theta = np.pi / (4.0 * (1.0 + g)) * (1.0 + 2.0 * g * xp)
        theta[..., 0] = _HALF_PI * xp[..., 0]
        return theta

    def _dtheta_dx(self, xp, g):
        d = np.full_like(xp, np.pi * g / (2.0 * (1.0 + g)))
        d[0] = _HALF_PI
        return d

    def _dtheta_dg(self, xp, g):
        d = np.pi / 4.0 * (2.0 * xp - 1.0) / (1.0 + g) ** 2
        d[0] = 0.0
        return d

    def sample_front(self, count: int, seed: int) -> np.ndarray:
        if count < 1:
            raise ValueError("count must be >= 1")
        rng = np.random.default_rng(seed)
        xp = np.full((count, self.m - 1), 0.5)
        xp[:, 0] = rng.random(count)
        F = self._evaluate(self.optimal_solutions(xp))
        return F / np.linalg.norm(F, axis=1, keepdims=True)


REGISTRY: dict[str, type[Problem]] = {
    cls.name: cls for cls in (DTLZ1, DTLZ2, DTLZ3, DTLZ4, DTLZ5)
}


def get_problem(name: str, m: int = 3, k: int | None = None) -> Problem:
    """Build a problem from its registry id (``"dtlz1"`` ... ``"dtlz5"``)."""
    key = name.lower()
    if key not in REGISTRY:
        raise KeyError(f"unknown problem {name!r}; choose from {sorted(REGISTRY)}")
    return REGISTRY[key](m=m, k=DEFAULT_K[key] if k is None else k)


def jacobian_fd(problem: Problem, x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Central finite-difference Jacobian of shape ``(n, m)``.

    The step for coordinate ``j`` is ``h * max(1, |x_j|)``. If a central
    stencil would leave the box, a second-order one-sided stencil pointing
    into the box is used instead, so the problem is never evaluated outside
    its bounds. Costs ``2n`` objective-vector evaluations for interior points.
    """
    if not h > 0:
        raise ValueError(f"finite-difference step must be positive, got {h}")
    x = problem.check(x)
    lo, hi = problem.lower, problem.upper
    G = np.empty((problem.n, problem.m))
    for j in range(problem.n):
        hj = h * max(1.0, abs(x[j]))
        if x[j] - hj >= lo and x[j] + hj <= hi:
            stencil, coef, denom = (-hj, hj), (-1.0, 1.0), 2.0 * hj
        elif x[j] + 2.0 * hj <= hi:
            stencil, coef, denom = (0.0, hj, 2.0 * hj), (-3.0, 4.0, -1.0), 2.0 * hj
        else:
            stencil, coef, denom = (0.0, -hj, -2.0 * hj), (3.0, -4.0, 1.0), 2.0 * hj
        X = np.repeat(x[None, :], len(stencil), axis=0)
        X[:, j] += stencil
        F = problem._evaluate(X)
        G[j] = np.asarray(coef) @ F / denom
    return G
