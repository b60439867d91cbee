"""Reference-based metrics: averaged Hausdorff distance and hypervolume."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from kkt_indicator.problems import Problem

REFERENCE_SIZE = 5000
_CHUNK = 4096  # Monte Carlo samples per Philox block
_CHUNK_ELEMS = 1 << 22  # max array elements per distance chunk


@dataclass(frozen=True)
class ReferenceFront:
    points: np.ndarray
    ideal: np.ndarray
    nadir: np.ndarray

    def __post_init__(self) -> None:
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        if pts.size == 0:
            raise ValueError("reference front is empty")
        ideal = np.asarray(self.ideal, dtype=float)
        nadir = np.asarray(self.nadir, dtype=float)
        if ideal.shape != (pts.shape[1],) or nadir.shape != ideal.shape:
            raise ValueError("ideal/nadir must match the objective count")
        if np.any(ideal > nadir):
            raise ValueError("ideal point must be componentwise <= nadir point")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "ideal", ideal)
        object.__setattr__(self, "nadir", nadir)

    @classmethod
    def for_problem(cls, problem: Problem, size: int = REFERENCE_SIZE, seed: int = 0) -> ReferenceFront:
        return cls(problem.sample_front(size, seed), problem.ideal, problem.nadir)


@dataclass(frozen=True)
class HvConfig:
    reference_point: np.ndarray | None = None  # None -> all ones
    samples: int = 100_000
    seed: int = 0

    def ref(self, m: int) -> np.ndarray:
        r = np.ones(m) if self.reference_point is None else np.asarray(self.reference_point, dtype=float)
        if r.shape != (m,) or np.any(r <= 0):
            raise ValueError("reference point must have m strictly positive components")
        return r


def _as_points(a: np.ndarray, what: str) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.size == 0:
        raise ValueError(f"{what} is empty")
    return np.atleast_2d(a)


def _nearest_distances(A: np.ndarray, R: np.ndarray) -> np.ndarray:
    """For each row of ``A`` the Euclidean distance to the closest row of ``R``.

    Differences are formed explicitly (no ``|a|^2 - 2ab + |r|^2`` expansion),
    so coincident points are exactly 0 apart.
    """
    out = np.empty(A.shape[0])
    step = max(1, _CHUNK_ELEMS // max(1, R.size))
    for start in range(0, A.shape[0], step):
        diff = A[start : start + step, None, :] - R[None, :, :]
        out[start : start + step] = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff).min(axis=1))
    return out


def _power_mean(d: np.ndarray, p: float) -> float:
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    return float(np.mean(d**p) ** (1.0 / p))


def gd_p(approx: np.ndarray, ref: ReferenceFront | np.ndarray, p: float = 2.0) -> float:
    """Power-mean distance from each approximation point to the reference set."""
    R = ref.points if isinstance(ref, ReferenceFront) else _as_points(ref, "reference set")
    return _power_mean(_nearest_distances(_as_points(approx, "approximation set"), R), p)


def igd_p(approx: np.ndarray, ref: ReferenceFront | np.ndarray, p: float = 2.0) -> float:
    """Power-mean distance from each reference point to the approximation set."""
    R = ref.points if isinstance(ref, ReferenceFront) else _as_points(ref, "reference set")
    return _power_mean(_nearest_distances(R, _as_points(approx, "approximation set")), p)


def delta_p(approx: np.ndarray, ref: ReferenceFront | np.ndarray, p: float = 2.0) -> float:
    """Averaged Hausdorff distance ``max(GD_p, IGD_p)``."""
    return max(gd_p(approx, ref, p), igd_p(approx, ref, p))


def normalize_objectives(F: np.ndarray, front: ReferenceFront) -> np.ndarray:
    span = front.nadir - front.ideal
    if np.any(span <= 0):
        raise ValueError("degenerate normalization: ideal equals nadir in some objective")
    return (np.asarray(F, dtype=float) - front.ideal) / span


def hypervolume_mc(approx: np.ndarray, front: ReferenceFront, config: HvConfig | None = None) -> float:
    """Monte-Carlo hypervolume in the normalized objective space.

    Uniform samples in ``[0, r]`` are drawn in fixed-size blocks from a
    Philox counter-based stream keyed by ``config.seed``; block ``b`` always
    holds the same samples, so the estimate does not depend on how blocks
    are scheduled. Points with any normalized component ``>= r`` dominate
    nothing inside the box and are dropped before sampling.
    """
    cfg = config or HvConfig()
    A = normalize_objectives(_as_points(approx, "approximation set"), front)
    m = A.shape[1]
    r = cfg.ref(m)
    A = A[np.all(A < r, axis=1)]
    if A.shape[0] == 0:
        return 0.0
    box = float(np.prod(r))
    hits = 0
    n_blocks = -(-cfg.samples // _CHUNK)
    for b in range(n_blocks):
        size = min(_CHUNK, cfg.samples - b * _CHUNK)
        bitgen = np.random.Philox(key=cfg.seed, counter=[0, 0, 0, b])
        u = np.random.Generator(bitgen).random((size, m)) * r
        dominated = np.zeros(size, dtype=bool)
        for a in A:
            dominated |= np.all(u >= a, axis=1)
        hits += int(dominated.sum())
    return box * hits / cfg.samples


def hypervolume_exact_2d(approx: np.ndarray, reference_point: np.ndarray) -> float:
    """Exact dominated area of a 2-objective set (minimization) by a sweep."""
    A = _as_points(approx, "approximation set")
    r = np.asarray(reference_point, dtype=float)
    if A.shape[1] != 2 or r.shape != (2,):
        raise ValueError("exact sweep is only defined for two objectives")
    A = A[np.all(A < r, axis=1)]
    if A.shape[0] == 0:
        return 0.0
    A = A[np.lexsort((A[:, 1], A[:, 0]))]
    area = 0.0
    best_y = r[1]
    for x, y in A:
        if y < best_y:
            area += (r[0] - x) * (best_y - y)
            best_y = y
    return float(area)
