"""A compact reference-direction evolutionary algorithm ("refdir-ea").

Generational loop in the style of NSGA-III: SBX crossover and polynomial
mutation produce offspring, parents and offspring are merged, and survivors
are chosen by nondominated sorting with reference-direction niching on the
last admitted front. In addition, for each reference direction the merged
individual with the best weighted Chebyshev value is always kept, which
makes the per-direction best value monotone over generations.

This is a stand-in used to generate approximation sets, not a replica of any
published NSGA-III implementation.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from math import comb

import numpy as np

from kkt_indicator.problems import Problem

CHEBYSHEV_FLOOR = 1e-6


@dataclass(frozen=True)
class EaConfig:
    population_size: int = 100
    max_evaluations: int = 25_000
    crossover_eta: float = 20.0
    crossover_prob: float = 1.0
    mutation_eta: float = 20.0
    mutation_prob: float | None = None  # None -> 1/n
    direction_divisions: tuple[int, int] | None = None  # None -> default_divisions(m, N)
    snapshots: bool = False  # record the population every snapshot_interval generations
    snapshot_interval: int = 10
    seed: int = 0

    def __post_init__(self) -> None:
        if self.population_size < 2:
            raise ValueError("population_size must be >= 2")
        if self.max_evaluations < self.population_size:
            raise ValueError("max_evaluations must cover at least the initial population")
        if not 0.0 <= self.crossover_prob <= 1.0:
            raise ValueError("crossover_prob must lie in [0, 1]")
        if self.mutation_prob is not None and not 0.0 <= self.mutation_prob <= 1.0:
            raise ValueError("mutation_prob must lie in [0, 1]")
        if self.crossover_eta <= 0 or self.mutation_eta <= 0:
            raise ValueError("distribution indices must be positive")
        if self.snapshot_interval < 1:
            raise ValueError("snapshot_interval must be >= 1")

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        if d["direction_divisions"] is not None:
            d["direction_divisions"] = list(d["direction_divisions"])
        return d

    @classmethod
    def from_dict(cls, data: dict) -> EaConfig:
        data = dict(data)
        if data.get("direction_divisions") is not None:
            data["direction_divisions"] = tuple(int(v) for v in data["direction_divisions"])
        return cls(**data)


@dataclass
class RunTrace:
    final_population: np.ndarray
    final_objectives: np.ndarray
    evaluations_used: int
    generation_snapshots: list[np.ndarray] = field(default_factory=list)
    best_per_direction: list[np.ndarray] = field(default_factory=list)


def das_dennis_directions(m: int, divisions_outer: int, divisions_inner: int = 0) -> np.ndarray:
    """Simplex-lattice reference directions, optionally with an inner layer.

    The outer layer holds every vector with components in ``{0, 1/H, ..., 1}``
    summing to one (``C(H + m - 1, m - 1)`` vectors). The inner layer is built
    the same way from ``divisions_inner`` and shrunk halfway to the centroid.
    """
    if m < 2:
        raise ValueError("need m >= 2")
    if divisions_outer < 0 or divisions_inner < 0:
        raise ValueError("divisions must be nonnegative")
    layers = []
    if divisions_outer > 0:
        layers.append(_lattice(m, divisions_outer))
    if divisions_inner > 0:
        layers.append(0.5 * _lattice(m, divisions_inner) + 0.5 / m)
    if not layers:
        raise ValueError("no reference directions requested")
    return np.vstack(layers)


def _lattice(m: int, H: int) -> np.ndarray:
    # stars and bars: choose m - 1 bar positions among H + m - 1 slots
    out = np.empty((comb(H + m - 1, m - 1), m))
    for row, bars in enumerate(itertools.combinations(range(H + m - 1), m - 1)):
        edges = np.array((-1,) + bars + (H + m - 1,))
        out[row] = (np.diff(edges) - 1) / H
    return out


def default_divisions(m: int, population_size: int) -> tuple[int, int]:
    """Largest lattice that fits the population; a second layer when it is coarse."""
    outer = 1
    while comb(outer + m, m - 1) <= population_size:
        outer += 1
    if outer >= m:
        return outer, 0
    inner = 0
    used = comb(outer + m - 1, m - 1)
    while inner < outer and used + comb(inner + m, m - 1) <= population_size:
        inner += 1
    return outer, inner


def random_population(problem: Problem, size: int, seed: int) -> np.ndarray:
    """Uniform samples from the decision box, shape ``(size, n)``."""
    rng = np.random.default_rng(seed)
    return problem.lower + (problem.upper - problem.lower) * rng.random((size, problem.n))


def sbx(parents: np.ndarray, eta: float, prob: float, lo: float, hi: float, rng: np.random.Generator) -> np.ndarray:
    """Simulated binary crossover on consecutive parent pairs.

    Each variable is recombined with probability 0.5, and a whole pair with
    probability ``prob``; children are clipped to ``[lo, hi]``.
    """
    half = parents.shape[0] // 2
    p1, p2 = parents[:half], parents[half : 2 * half]
    mu = rng.random(p1.shape)
    beta = np.where(mu <= 0.5, (2.0 * mu) ** (1.0 / (eta + 1.0)), (2.0 - 2.0 * mu) ** (-1.0 / (eta + 1.0)))
    beta *= np.where(rng.random(p1.shape) < 0.5, -1.0, 1.0)
    beta[rng.random(p1.shape) < 0.5] = 1.0
    beta[rng.random(half) > prob, :] = 1.0
    mean, diff = 0.5 * (p1 + p2), 0.5 * (p1 - p2)
    keep = beta == 1.0  # untouched variables are copied, not recomputed
    c1 = np.where(keep, p1, mean + beta * diff)
    c2 = np.where(keep, p2, mean - beta * diff)
    children = np.vstack([c1, c2])
    return np.clip(children, lo, hi)


def polynomial_mutation(X: np.ndarray, eta: float, prob: float, lo: float, hi: float, rng: np.random.Generator) -> np.ndarray:
    """Bounded polynomial mutation applied per variable with probability ``prob``."""
    X = X.copy()
    span = hi - lo
    mask = rng.random(X.shape) < prob
    mu = rng.random(X.shape)
    d1, d2 = (X - lo) / span, (hi - X) / span
    p = 1.0 / (eta + 1.0)
    left = (2.0 * mu + (1.0 - 2.0 * mu) * (1.0 - d1) ** (eta + 1.0)) ** p - 1.0
    right = 1.0 - (2.0 * (1.0 - mu) + 2.0 * (mu - 0.5) * (1.0 - d2) ** (eta + 1.0)) ** p
    delta = np.where(mu <= 0.5, left, right)
    X[mask] += (delta * span)[mask]
    return np.clip(X, lo, hi)


def nondominated_fronts(F: np.ndarray) -> list[np.ndarray]:
    """Fronts of a minimization problem, best first, as index arrays."""
    le = np.all(F[:, None, :] <= F[None, :, :], axis=2)
    lt = np.any(F[:, None, :] < F[None, :, :], axis=2)
    dom = le & lt  # dom[i, j]: i dominates j
    count = dom.sum(axis=0)
    fronts = []
    current = np.flatnonzero(count == 0)
    while current.size:
        fronts.append(current)
        count[current] = -1
        count -= dom[current].sum(axis=0)
        current = np.flatnonzero(count == 0)
    return fronts


def _normalize(F: np.ndarray) -> np.ndarray:
    """Translate by the ideal point and divide by hyperplane intercepts."""
    ideal = F.min(axis=0)
    T = F - ideal
    m = F.shape[1]
    weights = np.eye(m) + CHEBYSHEV_FLOOR
    asf = np.max(T[:, None, :] / weights[None, :, :], axis=2)
    extremes = T[np.argmin(asf, axis=0)]
    worst = T.max(axis=0)
    try:
        b = np.linalg.solve(extremes, np.ones(m))
        with np.errstate(divide="ignore"):
            intercepts = 1.0 / b
        if not np.all(np.isfinite(intercepts)) or np.any(intercepts <= 1e-10):
            raise np.linalg.LinAlgError
    except np.linalg.LinAlgError:
        intercepts = worst
    intercepts = np.where(intercepts <= 1e-10, 1.0, intercepts)
    return T / intercepts


def _associate(N: np.ndarray, W: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Closest direction (by perpendicular distance) for each normalized point."""
    U = W / np.linalg.norm(W, axis=1, keepdims=True)
    proj = N @ U.T
    d2 = np.einsum("ij,ij->i", N, N)[:, None] - proj**2
    dist = np.sqrt(np.maximum(d2, 0.0))
    idx = np.argmin(dist, axis=1)
    return idx, dist[np.arange(N.shape[0]), idx]


def chebyshev(F: np.ndarray, W: np.ndarray) -> np.ndarray:
    """Weighted Chebyshev values, shape ``(len(F), len(W))``."""
    return np.max(F[:, None, :] * (W[None, :, :] + CHEBYSHEV_FLOOR), axis=2)


def environmental_selection(
    F: np.ndarray, W: np.ndarray, size: int, rng: np.random.Generator
) -> np.ndarray:
    """Indices of ``size`` survivors among the rows of ``F``."""
    elites = np.unique(np.argmin(chebyshev(F, W), axis=0))
    chosen = np.zeros(F.shape[0], dtype=bool)
    chosen[elites] = True
    last = np.array([], dtype=int)
    for front in nondominated_fronts(F):
        rest = front[~chosen[front]]
        if chosen.sum() + rest.size <= size:
            chosen[rest] = True
            if chosen.sum() == size:
                break
            continue
        last = rest
        break
    need = size - int(chosen.sum())
    if need <= 0 or last.size == 0:
        return np.flatnonzero(chosen)

    members = np.flatnonzero(chosen)
    pool = np.concatenate([members, last])
    niche, dist = _associate(_normalize(F[pool]), W)
    counts = np.bincount(niche[: members.size], minlength=W.shape[0])
    cand_niche, cand_dist = niche[members.size :], dist[members.size :]
    open_ = np.ones(last.size, dtype=bool)
    active = np.ones(W.shape[0], dtype=bool)
    while need > 0:
        live = active & np.isin(np.arange(W.shape[0]), cand_niche[open_])
        if not live.any():
            break
        lowest = np.flatnonzero(live & (counts == counts[live].min()))
        j = rng.choice(lowest)
        cands = np.flatnonzero(open_ & (cand_niche == j))
        if counts[j] == 0:
            best = cand_dist[cands].min()
            cands = cands[cand_dist[cands] == best]
        pick = rng.choice(cands)
        chosen[last[pick]] = True
        open_[pick] = False
        counts[j] += 1
        need -= 1
        if not np.any(open_ & (cand_niche == j)):
            active[j] = False
    return np.flatnonzero(chosen)


def run_ea(problem: Problem, config: EaConfig | None = None) -> RunTrace:
    """Run the generational loop until the evaluation budget is spent.

    The last generation may produce fewer offspring than the population size
    so that exactly ``max_evaluations`` evaluations are used.
    """
    cfg = config or EaConfig()
    rng = np.random.default_rng(cfg.seed)
    N = cfg.population_size
    divisions = cfg.direction_divisions or default_divisions(problem.m, N)
    W = das_dennis_directions(problem.m, *divisions)
    if W.shape[0] > N:
        raise ValueError(f"{W.shape[0]} reference directions exceed population size {N}")
    lo, hi = problem.lower, problem.upper
    pm = cfg.mutation_prob if cfg.mutation_prob is not None else 1.0 / problem.n

    X = random_population(problem, N, int(rng.integers(2**63)))
    F = problem.evaluate(X)
    evals = N
    trace = RunTrace(X, F, evals)
    trace.best_per_direction.append(chebyshev(F, W).min(axis=0))
    generation = 0
    while evals < cfg.max_evaluations:
        n_off = min(N, cfg.max_evaluations - evals)
        pairs = -(-n_off // 2)
        mates = rng.integers(0, N, size=2 * pairs)
        kids = sbx(X[mates], cfg.crossover_eta, cfg.crossover_prob, lo, hi, rng)
        kids = polynomial_mutation(kids, cfg.mutation_eta, pm, lo, hi, rng)[:n_off]
        kf = problem.evaluate(kids)
        evals += n_off
        X_all, F_all = np.vstack([X, kids]), np.vstack([F, kf])
        keep = environmental_selection(F_all, W, N, rng)
        X, F = X_all[keep], F_all[keep]
        generation += 1
        trace.best_per_direction.append(chebyshev(F, W).min(axis=0))
        if cfg.snapshots and generation % cfg.snapshot_interval == 0:
            trace.generation_snapshots.append(X.copy())
    trace.final_population, trace.final_objectives, trace.evaluations_used = X, F, evals
    return trace
