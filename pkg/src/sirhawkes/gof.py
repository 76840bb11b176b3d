"""Time-rescaling residuals and tests of their unit-exponential law.

Under the generating intensity the compensator increments between
consecutive events are i.i.d. Exp(1). Three tests probe that: KS for the
marginal law, excess dispersion (ED) for the variance and Ljung-Box (LB)
for serial correlation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import special, stats

from . import likelihood as L
from .cascades import Cascade, SirRealization
from .kernels import SirSpec

MIN_SAMPLE = 5
DEFAULT_LEVEL = 0.01
DEFAULT_GAP = 0.05


class InsufficientSampleError(ValueError):
    pass


@dataclass(frozen=True)
class RescaledIntervals:
    taus: np.ndarray

    def __post_init__(self):
        taus = np.array(self.taus, dtype=float)
        if not np.all(np.isfinite(taus)) or np.any(taus < 0):
            raise ValueError("rescaled intervals must be finite and non-negative")
        taus.setflags(write=False)
        object.__setattr__(self, "taus", taus)

    def __len__(self) -> int:
        return len(self.taus)


def rescale(params: L.HawkesNParams, cascade: Cascade, method: L.Method = "auto") -> RescaledIntervals:
    """Compensator increments ``Lambda(t_i) - Lambda(t_{i-1})``, ``i >= 2``."""
    if len(cascade) < 3:
        raise InsufficientSampleError("rescaling needs at least 3 events")
    _, seg = L.hawkesn_pieces(params, cascade, None, method)
    return RescaledIntervals(np.maximum(seg[: len(cascade) - 1], 0.0))


def rescale_sir(sir: SirSpec, real: SirRealization) -> RescaledIntervals:
    """Residuals under the SIR infection intensity with recoveries known."""
    if len(real) < 3:
        raise InsufficientSampleError("rescaling needs at least 3 events")
    comp = L.sir_compensator_at_infections(sir, real)
    return RescaledIntervals(np.maximum(np.diff(comp), 0.0))


def _check(taus, minimum: int = MIN_SAMPLE) -> np.ndarray:
    x = np.asarray(getattr(taus, "taus", taus), dtype=float)
    if x.size < minimum:
        raise InsufficientSampleError(f"need at least {minimum} intervals, got {x.size}")
    return x


def ks_test(taus) -> tuple[float, float]:
    """KS distance to ``1 - exp(-x)`` and its p-value.

    The p-value uses the limiting Kolmogorov law at the effective size
    ``sqrt(n) + 0.12 + 0.11/sqrt(n)``.
    """
    x = np.sort(_check(taus))
    n = x.size
    F = -np.expm1(-x)
    i = np.arange(1, n + 1)
    D = float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))
    D = min(max(D, 0.0), 1.0)
    sn = math.sqrt(n)
    p = float(special.kolmogorov((sn + 0.12 + 0.11 / sn) * D))
    return D, min(max(p, 0.0), 1.0)


def ed_test(taus) -> tuple[float, float]:
    """Excess dispersion ``sqrt(n/8) * (s^2 - 1)`` with a two-sided normal p."""
    x = _check(taus)
    n = x.size
    stat = math.sqrt(n / 8.0) * (float(np.var(x, ddof=1)) - 1.0)
    return stat, float(2.0 * stats.norm.sf(abs(stat)))


def default_lags(n: int) -> int:
    return max(1, min(10, n // 5))


def lb_test(taus, lags: int | None = None) -> tuple[float, float]:
    """Ljung-Box Q over ``lags`` autocorrelations, chi-square p-value."""
    x = _check(taus)
    n = x.size
    L_ = default_lags(n) if lags is None else int(lags)
    if not 1 <= L_ < n:
        raise InsufficientSampleError(f"lags must satisfy 1 <= lags < n ({L_}, {n})")
    d = x - x.mean()
    denom = float(np.dot(d, d))
    if denom == 0.0:
        return 0.0, 1.0
    k = np.arange(1, L_ + 1)
    acf = np.array([np.dot(d[j:], d[:-j]) for j in k]) / denom
    Q = float(n * (n + 2) * np.sum(acf**2 / (n - k)))
    return Q, float(stats.chi2.sf(Q, L_))


@dataclass(frozen=True)
class GofReport:
    n: int
    ks_D: float
    ks_p: float
    ed_stat: float
    ed_p: float
    lb_Q: float
    lb_p: float
    lags: int

    def pass_at(self, level: float = DEFAULT_LEVEL) -> dict[str, bool]:
        return {"ks": self.ks_p > level, "ed": self.ed_p > level, "lb": self.lb_p > level}


def gof_report(taus, lags: int | None = None) -> GofReport:
    x = _check(taus)
    L_ = default_lags(x.size) if lags is None else int(lags)
    D, kp = ks_test(x)
    es, ep = ed_test(x)
    Q, lp = lb_test(x, L_)
    return GofReport(x.size, D, kp, es, ep, Q, lp, L_)


class Comparison(str, Enum):
    A_BETTER = "A_better"
    B_BETTER = "B_better"
    TIE = "Tie"


def compare_models(a: GofReport, b: GofReport, min_gap: float = DEFAULT_GAP) -> Comparison:
    """Lower KS distance wins unless the two are within ``min_gap``."""
    if abs(a.ks_D - b.ks_D) < min_gap:
        return Comparison.TIE
    return Comparison.A_BETTER if a.ks_D < b.ks_D else Comparison.B_BETTER
