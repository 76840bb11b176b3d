"""Maximum-likelihood fitting with random restarts.

Every positive parameter is optimised on a log scale and the population as
``log(N - C_max)``, so each iterate is feasible. The local solver is
L-BFGS-B with finite-difference gradients in those coordinates.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import partial
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy import optimize

from . import kernels as K
from . import likelihood as L
from ._parallel import pmap
from .cascades import Cascade, SirRealization
from .kernels import Family, KernelSpec, RecoveryDistribution, SirSpec

PENALTY = 1e15


class InsufficientDataError(ValueError):
    """Too few events to identify the model."""


# Random initialisation boxes (log-uniform); N is sampled in [C_max, 10*C_max].
INIT_RANGES = {
    "kappa": (1e-2, 10.0),
    "beta": (1e-2, 10.0),
    "theta": (1e-2, 10.0),
    "c": (0.1, 10.0),
    "rho": (1e-3, 1.0),
}

# Hard boxes, natural scale.
DEFAULT_BOUNDS = {
    "kappa": (1e-10, 1e6),
    "beta": (1e-10, 1e6),
    "theta": (1e-8, 1e6),
    "c": (1e-8, 1e6),
    "rho": (1e-10, 50.0),
}
N_EXCESS_BOUNDS = (1e-8, 1e9)  # bounds on N - C_max


@dataclass(frozen=True)
class FitConfig:
    family: Family | str = Family.EXP
    marked: bool = False
    restarts: int = 10
    pinned: Mapping[str, float] = field(default_factory=dict)
    bounds: Mapping[str, tuple[float, float]] = field(default_factory=dict)
    tol: float = 1e-8
    gtol: float = 1e-6
    maxiter: int = 1000
    seed: int = 0
    jobs: int = 1

    def __post_init__(self):
        object.__setattr__(self, "family", Family.parse(self.family))
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")

    @property
    def model_name(self) -> str:
        return K.MODEL_NAMES[self.family]


class _Space:
    """Named parameters with their transforms, bounds and init ranges."""

    def __init__(self, names: Sequence[str], family: Family, c_max: int, cfg: FitConfig):
        self.family = family
        self.c_max = c_max
        self.pinned = {k: float(v) for k, v in cfg.pinned.items()}
        self.free = [n for n in names if n not in self.pinned]
        self.bounds = dict(DEFAULT_BOUNDS)
        self.bounds.update(cfg.bounds)
        self.names = list(names)

    def _shift(self, name: str) -> float:
        if name == "theta" and self.family is Family.QEXP:
            return 1.0
        if name == "N":
            return float(self.c_max)
        return 0.0

    def to_natural(self, x: np.ndarray) -> dict[str, float]:
        out = dict(self.pinned)
        for name, v in zip(self.free, x):
            out[name] = self._shift(name) + math.exp(v)
        return out

    def to_internal(self, nat: Mapping[str, float]) -> np.ndarray:
        return np.array([math.log(max(nat[n] - self._shift(n), 1e-300)) for n in self.free])

    def box(self) -> list[tuple[float, float]]:
        out = []
        for n in self.free:
            if n == "N":
                lo, hi = N_EXCESS_BOUNDS
                if "N" in self.bounds:
                    lo = max(lo, self.bounds["N"][0] - self.c_max)
                    hi = self.bounds["N"][1] - self.c_max
            else:
                lo, hi = self.bounds[n]
                s = self._shift(n)
                lo, hi = max(lo - s, 1e-12), hi - s
            out.append((math.log(lo), math.log(hi)))
        return out

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        nat = {}
        for n in self.free:
            if n == "N":
                lo, hi = math.log(self.c_max), math.log(10.0 * self.c_max)
                N0 = math.exp(rng.uniform(lo, hi))
                nat[n] = max(N0, self.c_max + 1e-3)
            elif n == "theta" and self.family is Family.QEXP:
                nat[n] = 1.0 + math.exp(rng.uniform(math.log(1e-2), math.log(9.0)))
            else:
                lo, hi = INIT_RANGES[n]
                nat[n] = math.exp(rng.uniform(math.log(lo), math.log(hi)))
        x = self.to_internal({**self.pinned, **nat})
        box = self.box()
        return np.array([min(max(v, lo), hi) for v, (lo, hi) in zip(x, box)])


@dataclass
class FitResult:
    """Best fit across restarts.

    ``restarts_summary`` holds ``(initial parameters, final nll)`` per
    restart, in restart order.
    """

    model: str
    params: HawkesNParams
    neg_loglik: float
    converged: bool
    restarts_summary: list[tuple[dict, float]]
    n_events: int
    cascade_ids: list[str]
    observed_until: float | None = None
    message: str = ""

    @property
    def sir_view(self) -> SirSpec:
        return K.to_sir(self.params.kernel, self.params.N, self.params.rho)

    @property
    def branching_factor(self) -> float:
        try:
            return K.branching_factor(self.params.kernel, self.params.rho)
        except K.DivergentBranchingError:
            return math.inf

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "params": self.params.to_dict(),
            "neg_loglik": self.neg_loglik,
            "converged": self.converged,
            "restarts_summary": [[init, nll] for init, nll in self.restarts_summary],
            "n_events": self.n_events,
            "cascade_ids": list(self.cascade_ids),
            "observed_until": self.observed_until,
            "message": self.message,
            "sir_view": self.sir_view.to_dict(),
            "branching_factor": self.branching_factor,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FitResult":
        return cls(
            model=d["model"],
            params=L.HawkesNParams.from_dict(d["params"]),
            neg_loglik=d["neg_loglik"],
            converged=d["converged"],
            restarts_summary=[(init, nll) for init, nll in d.get("restarts_summary", [])],
            n_events=d["n_events"],
            cascade_ids=list(d.get("cascade_ids", [])),
            observed_until=d.get("observed_until"),
            message=d.get("message", ""),
        )


HawkesNParams = L.HawkesNParams


@dataclass
class SirFitResult:
    sir: SirSpec
    neg_loglik: float
    converged: bool
    restarts_summary: list[tuple[dict, float]]
    n_events: int
    message: str = ""


def _minimise(objective: Callable[[np.ndarray], float], x0: np.ndarray, box, cfg: FitConfig):
    res = optimize.minimize(
        objective,
        x0,
        method="L-BFGS-B",
        bounds=box,
        options={"ftol": cfg.tol, "gtol": cfg.gtol, "maxiter": cfg.maxiter, "maxfun": 20 * cfg.maxiter},
    )
    return res


def _restart_seed(seed: int, k: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=(1000003, int(k))))


# --- HawkesN -------------------------------------------------------------------


def _hawkes_names(family: Family, marked: bool) -> list[str]:
    names = ["kappa", "theta"]
    if family is Family.POWERLAW:
        names.append("c")
    names.append("N")
    if marked:
        names.append("rho")
    return names


def _hawkes_params(family: Family, nat: Mapping[str, float]) -> L.HawkesNParams:
    spec = KernelSpec(family, nat["kappa"], nat["theta"], nat.get("c") if family is Family.POWERLAW else None)
    return L.HawkesNParams(spec, nat["N"], nat.get("rho", 0.0))


def _hawkes_nll(x, space: _Space, cascades: Sequence[Cascade], uptos: Sequence[float | None]) -> float:
    try:
        params = _hawkes_params(space.family, space.to_natural(x))
    except (K.ParameterError, OverflowError):
        return PENALTY
    total = 0.0
    for c, up in zip(cascades, uptos):
        lam, seg = L.hawkesn_pieces(params, c, up)
        ll = L._assemble(lam, seg)
        if not math.isfinite(ll):
            return PENALTY
        total -= ll
    return total


def _hawkes_restart(space: _Space, cascades, uptos, cfg: FitConfig, k: int):
    rng = _restart_seed(cfg.seed, k)
    x0 = space.sample(rng)
    obj = partial(_hawkes_nll, space=space, cascades=cascades, uptos=uptos)
    res = _minimise(obj, x0, space.box(), cfg)
    return x0, res.x, float(res.fun), bool(res.success), str(res.message)


def _select(space: _Space, runs):
    """Lowest nll wins; ties go to the lexicographically smallest point."""
    best = min(runs, key=lambda r: (r[2], tuple(r[1])))
    summary = [({k: v for k, v in space.to_natural(x0).items()}, nll) for x0, _, nll, _, _ in runs]
    return best, summary


def fit_joint(
    cascades: Sequence[Cascade], cfg: FitConfig, upto: float | Sequence[float | None] | None = None
) -> FitResult:
    """One parameter set (and one shared ``N``) for a group of cascades,
    maximising the summed log-likelihood."""
    cascades = list(cascades)
    if not cascades:
        raise InsufficientDataError("no cascades to fit")
    if sum(len(c) for c in cascades) < 3 or max(len(c) for c in cascades) < 2:
        raise InsufficientDataError("at least 3 events are needed to fit")
    uptos = list(upto) if isinstance(upto, (list, tuple)) else [upto] * len(cascades)
    uptos = [None if u is None else max(float(u), float(c.times[-1])) for u, c in zip(uptos, cascades)]
    c_max = max(len(c) for c in cascades)
    space = _Space(_hawkes_names(cfg.family, cfg.marked), cfg.family, c_max, cfg)
    runs = pmap(partial(_hawkes_restart, space, cascades, uptos, cfg), range(cfg.restarts), cfg.jobs)
    best, summary = _select(space, runs)
    _, x, nll, ok, msg = best
    params = _hawkes_params(cfg.family, space.to_natural(x))
    finite_up = [u for u in uptos if u is not None]
    return FitResult(
        model=cfg.model_name,
        params=params,
        neg_loglik=nll,
        converged=ok and nll < PENALTY,
        restarts_summary=summary,
        n_events=sum(len(c) for c in cascades),
        cascade_ids=[c.id for c in cascades],
        observed_until=max(finite_up) if finite_up else float(max(c.times[-1] for c in cascades)),
        message=msg,
    )


def fit_cascade(cascade: Cascade, cfg: FitConfig, upto: float | None = None) -> FitResult:
    """Fit HawkesN to a single cascade (needs at least 3 events)."""
    if len(cascade) < 3:
        raise InsufficientDataError(f"cascade {cascade.id!r} has {len(cascade)} events; 3 are needed")
    return fit_joint([cascade], cfg, upto)


# --- SIR with observed recoveries --------------------------------------------


def _sir_names(family: Family) -> list[str]:
    names = ["beta", "theta"]
    if family is Family.POWERLAW:
        names.append("c")
    names.append("N")
    return names


def _sir_spec(family: Family, nat: Mapping[str, float]) -> SirSpec:
    rec = RecoveryDistribution(family, nat["theta"], nat.get("c") if family is Family.POWERLAW else None)
    return SirSpec(nat["beta"], rec, nat["N"], nat.get("rho", 0.0))


def _sir_nll(x, space: _Space, layouts) -> float:
    try:
        sir = _sir_spec(space.family, space.to_natural(x))
    except (K.ParameterError, OverflowError):
        return PENALTY
    total = 0.0
    for lay in layouts:
        ll = L._sir_loglik_layout(sir, lay)
        if not math.isfinite(ll):
            return PENALTY
        total -= ll
    return total


def _sir_restart(space: _Space, layouts, cfg: FitConfig, k: int):
    rng = _restart_seed(cfg.seed, k)
    x0 = space.sample(rng)
    if not space.free:
        return x0, x0, _sir_nll(x0, space, layouts), True, "all parameters pinned"
    res = _minimise(partial(_sir_nll, space=space, layouts=layouts), x0, space.box(), cfg)
    return x0, res.x, float(res.fun), bool(res.success), str(res.message)


class _SirSpace(_Space):
    def sample(self, rng: np.random.Generator) -> np.ndarray:
        if not self.free:
            return np.zeros(0)
        return super().sample(rng)


def fit_sir(realizations: Sequence[SirRealization], cfg: FitConfig, upto: float | None = None) -> SirFitResult:
    """Joint SIR fit when both infections and recoveries are observed.

    Pin ``theta=0`` with the exponential family to fit the SI model.
    """
    reals = list(realizations)
    if not reals:
        raise InsufficientDataError("no realisations to fit")
    layouts = []
    for r in reals:
        finite = r.recoveries[np.isfinite(r.recoveries)]
        last = float(max(r.times[-1], finite.max() if finite.size else 0.0))
        layouts.append(L._SirLayout(r, last if upto is None else max(float(upto), float(r.times[-1]))))
    c_max = max(len(r) for r in reals)
    space = _SirSpace(_sir_names(cfg.family), cfg.family, c_max, cfg)
    runs = pmap(partial(_sir_restart, space, layouts, cfg), range(cfg.restarts), cfg.jobs)
    best, summary = _select(space, runs)
    _, x, nll, ok, msg = best
    return SirFitResult(
        sir=_sir_spec(cfg.family, space.to_natural(x)),
        neg_loglik=nll,
        converged=ok and nll < PENALTY,
        restarts_summary=summary,
        n_events=sum(len(r) for r in reals),
        message=msg,
    )
