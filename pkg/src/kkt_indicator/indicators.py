"""Entropy-style aggregation of stationarity residuals.

Two indicators map a residual set ``{s_1, ..., s_N}`` to ``[0, 1/e]`` with
``phi(t) = -t log t``:

* :func:`h_old` saturates each residual at ``1/e`` before aggregating, so all
  residuals above the threshold contribute the same amount.
* :func:`h_adap` winsorizes the residuals to an empirical quantile band
  ``[Q_alpha, Q_beta]`` and rescales the band to ``[0, 1]`` first, which keeps
  resolution among large residuals and makes the value invariant to a common
  positive rescaling of the residuals.

Means are computed from an exactly rounded sum plus its remainder, so the
result does not depend on residual order and a set of identical terms
averages to exactly that term.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from fractions import Fraction

import numpy as np

from kkt_indicator.stationarity import ResidualSet

INV_E = math.exp(-1.0)


@dataclass(frozen=True)
class QuantileBand:
    alpha: float
    beta: float
    q_lo: float
    q_hi: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.alpha < self.beta <= 1.0:
            raise ValueError(f"quantile levels must satisfy alpha < beta, got {self.alpha}, {self.beta}")
        if self.q_lo > self.q_hi:
            raise ValueError(f"band is inverted: {self.q_lo} > {self.q_hi}")

    @property
    def width(self) -> float:
        return self.q_hi - self.q_lo


@dataclass(frozen=True)
class IndicatorConfig:
    """Parameters of :func:`h_adap`.

    ``alpha`` and ``beta`` must satisfy ``0 < alpha < beta < 1``. The tests use
    ``alpha=0, beta=1`` (the min/max band) through :meth:`unchecked`.
    """

    alpha: float = 0.05
    beta: float = 0.95
    epsilon: float = 1e-12
    degeneracy_threshold: float = 1e-15

    def __post_init__(self) -> None:
        self.validate(strict=True)

    def validate(self, strict: bool = True) -> None:
        lo, hi = (0.0, 1.0)
        ok = lo < self.alpha < self.beta < hi if strict else lo <= self.alpha < self.beta <= hi
        if not ok:
            raise ValueError(f"need 0 < alpha < beta < 1, got alpha={self.alpha}, beta={self.beta}")
        if not self.epsilon >= 0.0:
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")
        if not self.degeneracy_threshold >= 0.0:
            raise ValueError("degeneracy_threshold must be >= 0")

    @classmethod
    def unchecked(cls, **kwargs) -> IndicatorConfig:
        """Build a config allowing the closed levels ``alpha=0`` / ``beta=1``."""
        obj = object.__new__(cls)
        for key, value in {**asdict(cls()), **kwargs}.items():
            object.__setattr__(obj, key, float(value))
        obj.validate(strict=False)
        return obj

    def to_dict(self) -> dict[str, float]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> IndicatorConfig:
        known = {"alpha", "beta", "epsilon", "degeneracy_threshold"}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown indicator config keys: {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in data.items()})


@dataclass(frozen=True)
class IndicatorValue:
    value: float
    degenerate: bool
    band: QuantileBand | None
    n: int


def _values(residuals: ResidualSet | np.ndarray) -> np.ndarray:
    s = residuals.values if isinstance(residuals, ResidualSet) else np.asarray(residuals, dtype=float)
    s = s.reshape(-1)
    if s.size == 0:
        raise ValueError("empty residual set")
    if np.any(~np.isfinite(s)) or np.any(s < 0):
        raise ValueError("residuals must be finite and nonnegative")
    return s


def _mean(terms: np.ndarray) -> float:
    total = math.fsum(terms)
    rest = math.fsum(np.append(terms, -total))
    return float((Fraction(total) + Fraction(rest)) / terms.size)


def _phi(t: np.ndarray) -> np.ndarray:
    """``-t log t`` with ``0 log 0 = 0``."""
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = -t[pos] * np.log(t[pos])
    return out


def h_old(residuals: ResidualSet | np.ndarray) -> IndicatorValue:
    """Saturated entropy indicator: mean of ``phi(min(1/e, s_i))``."""
    s = _values(residuals)
    terms = _phi(np.minimum(INV_E, s))
    return IndicatorValue(_mean(terms), False, None, s.size)


def _quantile_sorted(v: np.ndarray, q: float) -> float:
    h = (v.size - 1) * q
    lo = math.floor(h)
    hi = min(lo + 1, v.size - 1)
    return float(v[lo] + (h - lo) * (v[hi] - v[lo]))


def empirical_quantile(samples: np.ndarray, q: float) -> float:
    """Linear-interpolation quantile at index ``(N - 1) q`` of the sorted samples."""
    v = np.asarray(samples, dtype=float).reshape(-1)
    if v.size == 0:
        raise ValueError("empirical quantile of an empty sample")
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"quantile level must lie in [0, 1], got {q}")
    if np.any(~np.isfinite(v)):
        raise ValueError("samples must be finite")
    return _quantile_sorted(np.sort(v), q)


def quantile_band(residuals: ResidualSet | np.ndarray, alpha: float, beta: float) -> QuantileBand:
    """Lower and upper empirical quantiles from a single sort."""
    v = np.sort(_values(residuals))
    return QuantileBand(alpha, beta, _quantile_sorted(v, alpha), _quantile_sorted(v, beta))


def winsorize(residuals: ResidualSet | np.ndarray, band: QuantileBand) -> np.ndarray:
    """Clamp residuals into ``[q_lo, q_hi]``; order within the band is kept."""
    return np.minimum(np.maximum(_values(residuals), band.q_lo), band.q_hi)


def normalize(winsorized: np.ndarray, band: QuantileBand, epsilon: float) -> np.ndarray:
    """Map winsorized residuals to ``[0, 1]``: ``(s - q_lo) / (q_hi - q_lo + epsilon)``.

    A zero-width band with ``epsilon = 0`` maps everything to 0; callers that
    care about that case check :attr:`QuantileBand.width` first.
    """
    w = np.asarray(winsorized, dtype=float)
    denom = band.width + epsilon
    if denom <= 0.0:
        return np.zeros_like(w)
    return (w - band.q_lo) / denom


def h_adap(
    residuals: ResidualSet | np.ndarray, config: IndicatorConfig | None = None
) -> IndicatorValue:
    """Quantile-normalized entropy indicator.

    Per-term contributions are ``max(0, -z log(z + epsilon))``; the clamp only
    matters for ``z`` close to 1 with ``epsilon > 0`` and keeps the value in
    ``[0, 1/e]``. When ``q_hi - q_lo <= threshold * |q_hi|`` the set has no
    dispersion to measure: the value is 0 and ``degenerate`` is set. The test is
    purely relative so that rescaling the residuals never flips it.
    """
    cfg = config or IndicatorConfig()
    s = _values(residuals)
    band = quantile_band(s, cfg.alpha, cfg.beta)
    if band.width <= cfg.degeneracy_threshold * abs(band.q_hi):
        return IndicatorValue(0.0, True, band, s.size)
    z = normalize(winsorize(s, band), band, cfg.epsilon)
    terms = np.zeros_like(z)
    pos = z > 0
    terms[pos] = np.maximum(0.0, -z[pos] * np.log(z[pos] + cfg.epsilon))
    return IndicatorValue(_mean(terms), False, band, s.size)


def indicator_report(
    residuals: ResidualSet | np.ndarray, config: IndicatorConfig | None = None
) -> tuple[IndicatorValue, IndicatorValue]:
    """``(H_old, H_adap)`` computed from the same residual set."""
    return h_old(residuals), h_adap(residuals, config)
