"""Log-likelihoods for HawkesN and generalised stochastic SIR.

HawkesN intensity::

    lambda(t) = max(1 - N_t / N, 0) * sum_{t_i < t} m_i**rho * phi(t - t_i)

with ``N_t`` the number of events strictly before ``t``. The first event
is the (given) start of the cascade and contributes no log term. The
compensator is a sum over inter-event segments, each scaled by the
depletion factor in force after the segment's opening event.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np
from numba import njit
from scipy import integrate

from . import kernels as K
from .cascades import Cascade, SirRealization
from .kernels import Family, KernelSpec, SirSpec

Method = Literal["auto", "fast", "closed", "quadrature"]
QUAD_TOL = 1e-10


@dataclass(frozen=True)
class HawkesNParams:
    kernel: KernelSpec
    N: float
    rho: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "N", float(self.N))
        object.__setattr__(self, "rho", float(self.rho))
        if not self.N > 0:
            raise K.ParameterError(f"N must be positive, got {self.N}")
        if self.rho < 0:
            raise K.ParameterError(f"rho must be non-negative, got {self.rho}")

    def to_dict(self) -> dict:
        return {"kernel": self.kernel.to_dict(), "N": self.N, "rho": self.rho}

    @classmethod
    def from_dict(cls, d: dict) -> "HawkesNParams":
        return cls(KernelSpec.from_dict(d["kernel"]), d["N"], d.get("rho", 0.0))


@dataclass(frozen=True)
class LikelihoodValue:
    loglik: float
    n_events: int

    @property
    def per_event(self) -> float:
        return self.loglik / self.n_events if self.n_events else math.nan

    @property
    def impossible(self) -> bool:
        return self.loglik == -math.inf


def depletion(count, N: float):
    """``max(1 - count/N, 0)``; equals 1 for ``N = inf`` (plain Hawkes)."""
    return np.maximum(1.0 - np.asarray(count, dtype=float) / N, 0.0)


def _weights(params: HawkesNParams, marks: np.ndarray) -> np.ndarray:
    if params.rho == 0:
        return np.ones_like(marks)
    return marks**params.rho


def hawkesn_intensity(params: HawkesNParams, cascade: Cascade, t: float) -> float:
    """``lambda^H(t)``, counting only events strictly before ``t``."""
    before = cascade.times < t
    n_t = int(np.count_nonzero(before))
    if n_t == 0:
        return 0.0
    w = _weights(params, cascade.marks[before])
    total = float(np.dot(w, K.phi(params.kernel, t - cascade.times[before])))
    return float(depletion(n_t, params.N)) * total


# --- triangle layout ----------------------------------------------------------


class _Triangle:
    """Params-independent index layout of all (later, earlier) event pairs."""

    __slots__ = ("n", "rows", "cols", "lags")

    def __init__(self, times: np.ndarray):
        n = len(times)
        rows, cols = np.tril_indices(n, k=-1)
        self.n = n
        self.rows = rows
        self.cols = cols
        self.lags = times[rows] - times[cols]


# Cascade arrays are read-only, so the layout can be cached per array object.
_TRI_CACHE: dict[int, tuple[np.ndarray, _Triangle]] = {}
_TRI_CACHE_MAX_PAIRS = 10_000_000
_tri_cached_pairs = 0


def _triangle(times: np.ndarray) -> _Triangle:
    global _tri_cached_pairs
    key = id(times)
    hit = _TRI_CACHE.get(key)
    if hit is not None and hit[0] is times:
        return hit[1]
    tri = _Triangle(times)
    if times.flags.writeable:
        return tri
    if _tri_cached_pairs + tri.lags.size > _TRI_CACHE_MAX_PAIRS:
        _TRI_CACHE.clear()
        _tri_cached_pairs = 0
    _TRI_CACHE[key] = (times, tri)
    _tri_cached_pairs += tri.lags.size
    return tri


@njit(cache=True)
def _exp_pieces(times, w, kappa, theta, N, upto):
    """O(n) recursion for the exponential kernel.

    Returns (intensity at each event's left limit, compensator per segment).
    ``acc`` carries sum_i w_i exp(-theta (t - t_i)) across events.
    """
    n = times.shape[0]
    lam = np.zeros(n)
    nseg = n - 1 if upto <= times[n - 1] else n
    seg = np.zeros(nseg)
    acc = 0.0
    for j in range(1, n):
        d = times[j] - times[j - 1]
        src = acc + w[j - 1]
        f = max(1.0 - j / N, 0.0)
        seg[j - 1] = f * kappa * src * (-math.expm1(-theta * d))
        acc = src * math.exp(-theta * d)
        lam[j] = f * kappa * theta * acc
    if nseg == n:
        src = acc + w[n - 1]
        f = max(1.0 - n / N, 0.0)
        if upto == math.inf:
            seg[n - 1] = f * kappa * src
        else:
            seg[n - 1] = f * kappa * src * (-math.expm1(-theta * (upto - times[n - 1])))
    return lam, seg


def _closed_pieces(params: HawkesNParams, times: np.ndarray, w: np.ndarray, upto: float):
    """Closed-form pieces over all event pairs (O(n^2) work, any family)."""
    spec = params.kernel
    n = len(times)
    tri = _triangle(times)
    wc = w[tri.cols]
    phis = K.phi(spec, tri.lags) if tri.lags.size else tri.lags
    G = K.neg_antiderivative(spec, tri.lags) if tri.lags.size else tri.lags
    counts = np.arange(n, dtype=float)
    lam = depletion(counts, params.N) * np.bincount(tri.rows, weights=wc * phis, minlength=n)
    # S_j = sum_{i<j} w_i G(t_j - t_i); segment l integral = S_l + w_l G(0) - S_{l+1}
    S = np.bincount(tri.rows, weights=wc * G, minlength=n)
    G0 = float(K.neg_antiderivative(spec, 0.0))
    seg_raw = S[:-1] + w[:-1] * G0 - S[1:]
    if upto > times[-1]:
        tail_lags = upto - times
        with np.errstate(invalid="ignore"):
            G_up = K.neg_antiderivative(spec, tail_lags)
        # G(inf) = -inf when the kernel has infinite mass
        last = S[-1] + w[-1] * G0 - float(np.dot(w, G_up))
        seg_raw = np.append(seg_raw, last)
    factors = depletion(np.arange(1, len(seg_raw) + 1), params.N)
    with np.errstate(invalid="ignore"):
        seg = np.where(factors > 0, factors * np.maximum(seg_raw, 0.0), 0.0)
    lam[0] = 0.0
    return lam, seg


def _quad_pieces(params: HawkesNParams, cascade: Cascade, upto: float):
    """Adaptive Gauss-Kronrod integration of the intensity per segment."""
    times = cascade.times
    n = len(times)
    lam = np.zeros(n)
    for j in range(1, n):
        lam[j] = hawkesn_intensity(params, cascade, times[j])
    ends = list(times[1:])
    if upto > times[-1]:
        ends.append(upto)
    seg = np.zeros(len(ends))
    w = _weights(params, cascade.marks)
    spec = params.kernel
    for l, b in enumerate(ends):
        a = times[l]
        f = float(depletion(l + 1, params.N))
        if f == 0.0:
            continue
        src_t, src_w = times[: l + 1], w[: l + 1]

        def integrand(x, src_t=src_t, src_w=src_w):
            return f * float(np.dot(src_w, K.phi(spec, x - src_t)))

        breaks = [s for s in (src_t + spec.support_end) if a < s < b] if math.isfinite(spec.support_end) else []
        if math.isinf(b):
            total = 0.0
            lo = a
            for s in sorted(breaks):
                total += integrate.quad(integrand, lo, s, epsabs=QUAD_TOL, epsrel=QUAD_TOL, limit=200)[0]
                lo = s
            total += integrate.quad(integrand, lo, math.inf, epsabs=QUAD_TOL, epsrel=QUAD_TOL, limit=200)[0]
            seg[l] = total
        else:
            seg[l] = integrate.quad(
                integrand, a, b, epsabs=QUAD_TOL, epsrel=QUAD_TOL, limit=200, points=breaks or None
            )[0]
    return lam, seg


def _resolve_upto(cascade: Cascade, upto: float | None) -> float:
    last = float(cascade.times[-1])
    if upto is None:
        return last
    if upto < last:
        raise ValueError(f"upto={upto} precedes the last event at {last}")
    return float(upto)


def hawkesn_pieces(
    params: HawkesNParams, cascade: Cascade, upto: float | None = None, method: Method = "auto"
) -> tuple[np.ndarray, np.ndarray]:
    """Intensity at each event's left limit and the compensator of each
    segment ``[t_l, t_{l+1}]`` (plus ``[t_n, upto]`` when ``upto > t_n``).

    ``method``: ``fast`` is the O(n) exponential recursion, ``closed`` the
    closed-form pairwise sum, ``quadrature`` numerical integration. ``auto``
    picks ``fast`` for the exponential kernel and ``closed`` otherwise.
    """
    upto = _resolve_upto(cascade, upto)
    spec = params.kernel
    if method == "auto":
        method = "fast" if spec.family is Family.EXP else "closed"
    if method == "fast":
        if spec.family is not Family.EXP:
            raise ValueError("the O(n) recursion only exists for the exponential kernel")
        w = _weights(params, cascade.marks)
        return _exp_pieces(cascade.times, w, spec.kappa, spec.theta, params.N, upto)
    if method == "closed":
        return _closed_pieces(params, cascade.times, _weights(params, cascade.marks), upto)
    if method == "quadrature":
        return _quad_pieces(params, cascade, upto)
    raise ValueError(f"unknown method {method!r}")


def _assemble(lam: np.ndarray, seg: np.ndarray) -> float:
    if np.any(lam[1:] <= 0):
        return -math.inf
    comp = float(np.sum(seg))
    if not math.isfinite(comp):
        return -math.inf
    return float(np.sum(np.log(lam[1:]))) - comp


def hawkesn_loglik(
    params: HawkesNParams, cascade: Cascade, upto: float | None = None, method: Method = "auto"
) -> LikelihoodValue:
    """HawkesN log-likelihood of a whole cascade.

    The compensator runs to the last event unless ``upto`` extends it to a
    censoring time (``inf`` allowed). A zero intensity at any event, e.g.
    ``N`` smaller than the event count, gives ``-inf``.
    """
    lam, seg = hawkesn_pieces(params, cascade, upto, method)
    return LikelihoodValue(_assemble(lam, seg), len(cascade))


def split_index(n: int, split_fraction: float) -> int:
    """Number of training events for a count-based split."""
    if not 0 < split_fraction < 1:
        raise ValueError("split_fraction must lie in (0, 1)")
    return int(math.ceil(split_fraction * n - 1e-9))


def holdout_loglik(
    params: HawkesNParams, cascade: Cascade, split_fraction: float = 0.4, method: Method = "auto"
) -> LikelihoodValue:
    """Log-likelihood of the events after a count split.

    The first ``ceil(split_fraction * n)`` events are the training part.
    Holdout events are scored with the full history in the intensity over
    the window ``(t_k, t_n]``; ``n_events`` is the number of holdout events.
    """
    n = len(cascade)
    k = split_index(n, split_fraction)
    if k < 2 or n - k < 2:
        raise ValueError(f"split {split_fraction} of {n} events leaves fewer than 2 on one side")
    lam, seg = hawkesn_pieces(params, cascade, None, method)
    lam_h = lam[k:]
    if np.any(lam_h <= 0):
        return LikelihoodValue(-math.inf, n - k)
    # training depletion already failing means N is below the training count
    if float(depletion(k, params.N)) <= 0:
        return LikelihoodValue(-math.inf, n - k)
    comp = float(np.sum(seg[k - 1 :]))
    return LikelihoodValue(float(np.sum(np.log(lam_h))) - comp, n - k)


# --- SIR ------------------------------------------------------------------------


class _SirLayout:
    """Event sweep of a realisation up to ``upto``; independent of params."""

    def __init__(self, real: SirRealization, upto: float):
        t_inf = real.times
        rec = real.recoveries
        n = len(t_inf)
        rec_in = rec <= upto
        times = np.concatenate([t_inf, rec[rec_in]])
        kind = np.concatenate([np.zeros(n, dtype=np.int8), np.ones(int(rec_in.sum()), dtype=np.int8)])
        owner = np.concatenate([np.arange(n), np.nonzero(rec_in)[0]])
        # infections sort before recoveries at equal times (left-limit convention)
        order = np.lexsort((kind, times))
        self.times = times[order]
        self.kind = kind[order]
        self.owner = owner[order]
        self.sign = np.where(self.kind == 0, 1.0, -1.0)
        self.C_after = np.cumsum(self.kind == 0)
        ends = np.append(self.times[1:], upto)
        self.dt = np.maximum(ends - self.times, 0.0)
        self.inf_pos = np.nonzero(self.kind == 0)[0]
        self.n = n
        self.upto = upto
        self.recovered = np.nonzero(rec_in)[0]
        self.censored = np.nonzero(~rec_in)[0]
        self.tau = rec[rec_in] - t_inf[rec_in]
        self.censor_age = upto - t_inf[~rec_in]
        self.marks = real.marks


def _sir_weights(layout: _SirLayout, rho: float) -> np.ndarray:
    """Infected weight ``sum m_i**rho`` on each sweep segment."""
    w = layout.marks**rho if rho else np.ones(layout.n)
    return np.cumsum(layout.sign * w[layout.owner])


def _sir_rates(sir: SirSpec, layout: _SirLayout) -> np.ndarray:
    W = np.maximum(_sir_weights(layout, sir.rho), 0.0)
    return sir.beta * depletion(layout.C_after, sir.N) * W


def sir_compensator_at_infections(sir: SirSpec, real: SirRealization) -> np.ndarray:
    """Integrated infection intensity from 0 to each infection time."""
    upto = float(np.max(real.times))
    layout = _SirLayout(real, upto)
    cum = np.concatenate([[0.0], np.cumsum(_sir_rates(sir, layout) * layout.dt)])
    return cum[layout.inf_pos]


def _sir_loglik_layout(sir: SirSpec, layout: _SirLayout) -> float:
    if layout.n > sir.N:
        return -math.inf
    rates = _sir_rates(sir, layout)
    # rate in force just before infection j is that of the preceding sweep segment
    pos = layout.inf_pos[1:]
    lam = rates[pos - 1]
    if np.any(lam <= 0):
        return -math.inf
    ll = float(np.sum(np.log(lam))) - float(np.dot(rates, layout.dt))
    rec = sir.recovery
    if layout.tau.size:
        dens = np.asarray(rec.density(layout.tau), dtype=float)
        if np.any(dens <= 0):
            return -math.inf
        ll += float(np.sum(np.log(dens)))
    if layout.censor_age.size and not rec.is_si:
        surv = np.asarray(rec.survival(layout.censor_age), dtype=float)
        if np.any(surv <= 0):
            return -math.inf
        ll += float(np.sum(np.log(surv)))
    return ll


def sir_loglik(sir: SirSpec, real: SirRealization, upto: float | None = None) -> LikelihoodValue:
    """Stochastic SIR log-likelihood with observed recoveries.

    Infection terms use the piecewise-constant intensity
    ``beta * (1 - C_t/N) * sum(m_i**rho over infected)``; recovered
    individuals add ``log f(tau)``, those still infected at ``upto`` add
    ``log S(upto - t_i)``. Recoveries after ``upto`` (or ``inf``) count as
    not yet observed. ``upto`` defaults to the last finite event time.
    """
    finite = real.recoveries[np.isfinite(real.recoveries)]
    last = float(max(real.times[-1], finite.max() if finite.size else 0.0))
    if upto is None:
        upto = last
    elif upto < real.times[-1]:
        raise ValueError("upto precedes the last infection")
    layout = _SirLayout(real, float(upto))
    return LikelihoodValue(_sir_loglik_layout(sir, layout), len(real))
