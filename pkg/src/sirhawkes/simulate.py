"""Sampling generalised stochastic SIR and HawkesN processes.

The SIR sampler pairs every infection with a pre-drawn recovery time. Given
those, the infection intensity ``beta * S/N * sum(m_i**rho over infected)``
is piecewise constant until the next infection, so the next infection time
is found by inverting its integrated intensity segment by segment.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from functools import partial

import numpy as np
from scipy import optimize

from . import kernels as K
from ._parallel import pmap
from .cascades import Cascade, SirRealization
from .kernels import KernelSpec, ParameterError, SirSpec

DEFAULT_MAX_EVENTS = 10**6


@dataclass(frozen=True)
class SimConfig:
    sir: SirSpec
    seed: int = 0
    max_events: int = DEFAULT_MAX_EVENTS
    horizon: float | None = None

    def __post_init__(self):
        if self.max_events < 1:
            raise ParameterError("max_events must be >= 1")


def run_streams(seed: int, run: int) -> tuple[np.random.Generator, np.random.Generator]:
    """Independent (event-time, mark) generators for one realisation.

    Keyed on ``(seed, run)`` so batches give the same realisations whatever
    the order or parallelism they are produced in.
    """
    ss = np.random.SeedSequence(entropy=int(seed) & (2**64 - 1), spawn_key=(int(run),))
    times_ss, marks_ss = ss.spawn(2)
    return np.random.default_rng(times_ss), np.random.default_rng(marks_ss)


_FLOAT_MAX = float(np.finfo(float).max)
_LOG_FLOAT_MAX = math.log(_FLOAT_MAX)


def sample_mark(u: float, alpha: float) -> float:
    """Inverse CDF of ``P(m) = (alpha-1) m^-alpha`` on ``m >= 1``.

    Saturates at the largest finite float when ``alpha`` is close to 1.
    """
    if not alpha > 1:
        raise ParameterError(f"mark exponent alpha must exceed 1, got {alpha}")
    log_m = -math.log1p(-u) / (alpha - 1.0)
    return math.exp(log_m) if log_m < _LOG_FLOAT_MAX else _FLOAT_MAX


def _draw_recovery(rec: K.RecoveryDistribution, rng: np.random.Generator) -> float:
    u = 1.0 - rng.random()  # (0, 1]
    return float(rec.inverse_survival(u))


def _sir_run(
    sir: SirSpec,
    times_rng: np.random.Generator,
    marks_rng: np.random.Generator | None,
    alpha: float | None,
    max_events: int,
    horizon: float | None,
    run_id: str,
) -> SirRealization:
    N = int(sir.N)
    rec = sir.recovery
    beta = sir.beta

    def mark() -> float:
        return 1.0 if marks_rng is None else sample_mark(marks_rng.random(), alpha)

    m0 = mark()
    times, marks = [0.0], [m0]
    recoveries = [_draw_recovery(rec, times_rng)]
    w0 = m0**sir.rho
    active = [(recoveries[0], w0)]  # heap of (recovery time, weight) for the infected
    weight = w0
    now = 0.0
    truncated = False

    while len(times) < N:
        if len(times) >= max_events:
            truncated = True
            break
        s = times_rng.standard_exponential()
        scale = beta * (N - len(times)) / N
        t = now
        nxt = None
        while active:
            r_end, w = active[0]
            rate = scale * weight
            mass = rate * (r_end - t)
            if rate > 0 and s <= mass:
                nxt = t + s / rate
                break
            s -= mass
            heapq.heappop(active)
            weight = weight - w if active else 0.0
            t = r_end
        if nxt is None:
            break  # no more infections: remaining intensity mass exhausted
        if horizon is not None and nxt > horizon:
            truncated = True
            break
        if nxt <= now:
            nxt = np.nextafter(now, math.inf)
        now = nxt
        m = mark()
        r = now + _draw_recovery(rec, times_rng)
        if r <= now:
            r = np.nextafter(now, math.inf)
        times.append(now)
        marks.append(m)
        recoveries.append(r)
        w = m**sir.rho
        heapq.heappush(active, (r, w))
        weight += w

    casc = Cascade(np.array(times), np.array(marks), run_id)
    return SirRealization(casc, np.array(recoveries), truncated=truncated)


def simulate_sir(cfg: SimConfig, run: int = 0) -> SirRealization:
    """One unmarked realisation of the generalised stochastic SIR process."""
    trng, _ = run_streams(cfg.seed, run)
    return _sir_run(cfg.sir, trng, None, None, cfg.max_events, cfg.horizon, str(run))


def simulate_marked(cfg: SimConfig, alpha: float = K.DEFAULT_ALPHA, run: int = 0) -> SirRealization:
    """Marked realisation; marks are power-law with exponent ``alpha``.

    Marks come from their own random stream, so with ``rho = 0`` the event
    times equal those of :func:`simulate_sir` for the same seed and run.
    """
    if not alpha > 1:
        raise ParameterError(f"mark exponent alpha must exceed 1, got {alpha}")
    trng, mrng = run_streams(cfg.seed, run)
    return _sir_run(cfg.sir, trng, mrng, alpha, cfg.max_events, cfg.horizon, str(run))


def _one(cfg: SimConfig, alpha: float | None, run: int) -> SirRealization:
    if alpha is None:
        return simulate_sir(cfg, run)
    return simulate_marked(cfg, alpha, run)


def simulate_many(cfg: SimConfig, runs: int, alpha: float | None = None, jobs: int = 1) -> list[SirRealization]:
    return pmap(partial(_one, cfg, alpha), range(runs), jobs)


# --- HawkesN ----------------------------------------------------------------


def simulate_hawkesn(
    kernel: KernelSpec,
    N: float,
    seed: int = 0,
    run: int = 0,
    rho: float = 0.0,
    alpha: float | None = None,
    max_events: int = DEFAULT_MAX_EVENTS,
    horizon: float | None = None,
) -> Cascade:
    """Sample a HawkesN cascade by inverting its compensator.

    From the latest event, the integrated intensity to infinity is known in
    closed form. A unit exponential draw beyond it means the cascade is
    over; otherwise the next time is the root of the compensator.
    """
    trng, mrng = run_streams(seed, run)

    def mark() -> float:
        return 1.0 if alpha is None else sample_mark(mrng.random(), alpha)

    times = [0.0]
    weights = [mark()]
    while N - len(times) > 0 and len(times) < max_events:
        now = times[-1]
        factor = (N - len(times)) / N
        t_arr = np.asarray(times)
        w_arr = np.asarray(weights) ** rho
        lags = now - t_arr
        s = trng.standard_exponential()
        remaining = factor * float(np.dot(w_arr, K.kernel_integral(kernel, lags, np.full_like(lags, math.inf))))
        if not s < remaining:
            break

        def excess(x: float) -> float:
            d = x - now
            return factor * float(np.dot(w_arr, K.kernel_integral(kernel, lags, lags + d))) - s

        rate0 = factor * float(np.dot(w_arr, K.phi(kernel, lags)))
        step = s / rate0 if rate0 > 0 else 1.0
        hi = now + step
        while excess(hi) < 0:
            step *= 2.0
            hi = now + step
        nxt = optimize.brentq(excess, now, hi, xtol=1e-13 * max(1.0, hi), rtol=4 * np.finfo(float).eps)
        if horizon is not None and nxt > horizon:
            break
        if nxt <= now:
            nxt = float(np.nextafter(now, math.inf))
        times.append(nxt)
        weights.append(mark())
    return Cascade(np.array(times), np.array(weights), str(run))


# --- classic SIR oracle -------------------------------------------------------


@dataclass
class GillespieTrace:
    infection_times: np.ndarray
    recovery_times: np.ndarray

    @property
    def final_size(self) -> int:
        return len(self.infection_times)


def gillespie_sir(beta: float, gamma: float, N: int, rng: np.random.Generator, max_events: int = DEFAULT_MAX_EVENTS) -> GillespieTrace:
    """Classic two-reaction Gillespie SIR, one initial infective at t = 0.

    Reactions are infection (rate ``beta*S*I/N``) and recovery (rate
    ``gamma*I``). Used as an independent oracle for the exponential case.
    """
    S, I = N - 1, 1
    t = 0.0
    inf_t, rec_t = [0.0], []
    while I > 0 and len(inf_t) < max_events:
        a_inf = beta * S * I / N
        a_rec = gamma * I
        total = a_inf + a_rec
        if total <= 0:
            break
        t += rng.exponential(1.0 / total)
        if rng.random() * total < a_inf:
            S -= 1
            I += 1
            inf_t.append(t)
        else:
            I -= 1
            rec_t.append(t)
    return GillespieTrace(np.array(inf_t), np.array(rec_t))


# --- size distribution --------------------------------------------------------


@dataclass
class SizeDistribution:
    """Empirical distribution of final sizes over ``[1, N]``."""

    N: int
    sizes: np.ndarray
    counts: np.ndarray = field(init=False)

    def __post_init__(self):
        self.counts = np.bincount(np.asarray(self.sizes, dtype=int), minlength=self.N + 1)[1 : self.N + 1]

    @property
    def support(self) -> np.ndarray:
        return np.arange(1, self.N + 1)

    def cdf(self) -> np.ndarray:
        return np.cumsum(self.counts) / self.counts.sum()

    def pmf(self, smoothed: bool = True) -> np.ndarray:
        if smoothed:
            return (self.counts + 1.0) / (self.counts.sum() + self.N)
        return self.counts / self.counts.sum()

    def size_likelihood(self, n: int, at_least: int = 1) -> float:
        """Smoothed ``P[size = n | size >= at_least]``."""
        if not 1 <= n <= self.N:
            return 0.0
        if n < at_least:
            return 0.0
        p = self.pmf(smoothed=True)
        return float(p[n - 1] / p[at_least - 1 :].sum())


def _final_size(cfg: SimConfig, run: int) -> int:
    return len(simulate_sir(cfg, run))


def size_distribution(
    spec: SirSpec | KernelSpec,
    runs: int,
    seed: int = 0,
    N: float | None = None,
    jobs: int = 1,
) -> SizeDistribution:
    """Monte-Carlo final-size distribution from ``runs`` seeded simulations.

    A :class:`KernelSpec` is first converted to SIR parameters; its
    (possibly fractional) population ``N`` is floored.
    """
    if runs < 1:
        raise ParameterError("runs must be >= 1")
    if isinstance(spec, KernelSpec):
        if N is None:
            raise ParameterError("N is required to simulate from a kernel")
        spec = K.to_sir(spec, int(math.floor(N)))
    cfg = SimConfig(spec, seed)
    sizes = pmap(partial(_final_size, cfg), range(runs), jobs)
    return SizeDistribution(int(spec.N), np.asarray(sizes))
