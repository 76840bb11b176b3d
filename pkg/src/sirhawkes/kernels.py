"""Parametric HawkesN kernels and their SIR recovery-time counterparts.

A kernel ``phi`` with ``phi(0) = beta`` corresponds to a stochastic SIR
process with recovery-time survival function ``phi(t) / phi(0)``. From that
identity every family gets a recovery density ``f = -phi' / phi(0)`` and a
recovery hazard ``h = -phi' / phi``. All functions here accept scalars or
numpy arrays for the time argument.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Any

import numpy as np
from scipy import special

DEFAULT_ALPHA = 2.016


class ParameterError(ValueError):
    """Raised when parameters fall outside a family's valid domain."""


class SingularHazardError(ValueError):
    """Raised when the hazard is requested where the kernel vanishes."""


class DivergentBranchingError(ValueError):
    """Raised when the marked branching factor has no finite value."""


class Family(str, enum.Enum):
    LINEAR = "linear"
    QUADRATIC = "quadratic"
    GAUSSIAN = "gaussian"
    QEXP = "qexp"
    EXP = "exp"
    POWERLAW = "powerlaw"

    @classmethod
    def parse(cls, value: "Family | str") -> "Family":
        if isinstance(value, Family):
            return value
        key = str(value).strip().lower().replace("-", "").replace("_", "")
        aliases = {
            "pl": "powerlaw",
            "power": "powerlaw",
            "qexponential": "qexp",
            "tsallis": "qexp",
            "exponential": "exp",
        }
        key = aliases.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise ParameterError(f"unknown kernel family {value!r}") from None


# Short model names used in reports (EXPN, PLN, ...).
MODEL_NAMES = {
    Family.LINEAR: "LINN",
    Family.QUADRATIC: "QUADN",
    Family.GAUSSIAN: "GAUSSN",
    Family.QEXP: "QEXPN",
    Family.EXP: "EXPN",
    Family.POWERLAW: "PLN",
}


@dataclass(frozen=True)
class KernelSpec:
    """A kernel family with scale ``kappa``, shape ``theta`` and (power-law
    only) offset ``c``."""

    family: Family
    kappa: float
    theta: float
    c: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "family", Family.parse(self.family))
        object.__setattr__(self, "kappa", float(self.kappa))
        object.__setattr__(self, "theta", float(self.theta))
        if self.family is Family.POWERLAW:
            if self.c is None:
                raise ParameterError("power-law kernel needs an offset c")
            object.__setattr__(self, "c", float(self.c))
        elif self.c is not None:
            raise ParameterError(f"offset c is only defined for the power-law kernel, got {self.family.value}")
        _check_shape(self.family, self.theta, self.c)
        if not (self.kappa > 0 and math.isfinite(self.kappa)):
            raise ParameterError(f"kappa must be positive and finite, got {self.kappa}")

    @property
    def support_end(self) -> float:
        return _support_end(self.family, self.theta)

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {"family": self.family.value, "kappa": self.kappa, "theta": self.theta}
        if self.c is not None:
            d["c"] = self.c
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "KernelSpec":
        return cls(d["family"], d["kappa"], d["theta"], d.get("c"))


def _check_shape(family: Family, theta: float, c: float | None) -> None:
    if not math.isfinite(theta):
        raise ParameterError(f"theta must be finite, got {theta}")
    if family is Family.QEXP:
        if not theta > 1:
            raise ParameterError(f"q-exponential kernel needs theta > 1, got {theta}")
    elif not theta > 0:
        raise ParameterError(f"theta must be positive, got {theta}")
    if family is Family.POWERLAW and not (c is not None and c > 0 and math.isfinite(c)):
        raise ParameterError(f"power-law offset c must be positive, got {c}")


def _support_end(family: Family, theta: float) -> float:
    if family is Family.LINEAR:
        return 1.0 / theta
    if family is Family.QUADRATIC:
        return 2.0 / theta
    return math.inf


def _wrap(t, out):
    if np.ndim(t) == 0:
        return float(out)
    return out


def _unit_phi(family: Family, theta: float, c: float | None, t: np.ndarray) -> np.ndarray:
    """phi / kappa, assuming ``t`` already lies inside the support."""
    if family is Family.LINEAR:
        return 1.0 - theta * t
    if family is Family.QUADRATIC:
        return (1.0 - 0.5 * theta * t) ** 2
    if family is Family.GAUSSIAN:
        return np.exp(-(t * t) / (2.0 * theta * theta))
    if family is Family.QEXP:
        return (1.0 + (theta - 1.0) * t) ** (1.0 / (1.0 - theta))
    if family is Family.EXP:
        return theta * np.exp(-theta * t)
    return (t + c) ** (-(1.0 + theta))


def _unit_neg_dphi(family: Family, theta: float, c: float | None, t: np.ndarray) -> np.ndarray:
    """-phi'(t) / kappa inside the support."""
    if family is Family.LINEAR:
        return np.full_like(t, theta)
    if family is Family.QUADRATIC:
        return theta * (1.0 - 0.5 * theta * t)
    if family is Family.GAUSSIAN:
        return t / (theta * theta) * np.exp(-(t * t) / (2.0 * theta * theta))
    if family is Family.QEXP:
        return (1.0 + (theta - 1.0) * t) ** (theta / (1.0 - theta))
    if family is Family.EXP:
        return theta * theta * np.exp(-theta * t)
    return (1.0 + theta) * (t + c) ** (-(2.0 + theta))


def _unit_hazard(family: Family, theta: float, c: float | None, t: np.ndarray) -> np.ndarray:
    # closed forms avoid 0/0 far out in the tail
    if family is Family.LINEAR:
        return theta / (1.0 - theta * t)
    if family is Family.QUADRATIC:
        return (4.0 * theta - 2.0 * theta**2 * t) / (theta**2 * t**2 - 4.0 * theta * t + 4.0)
    if family is Family.GAUSSIAN:
        return t / (theta * theta)
    if family is Family.QEXP:
        return 1.0 / (1.0 + (theta - 1.0) * t)
    if family is Family.EXP:
        return np.full_like(t, theta)
    return (1.0 + theta) / (t + c)


def _nonneg_times(t) -> np.ndarray:
    arr = np.asarray(t, dtype=float)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise ParameterError("time arguments must be non-negative")
    return arr


def phi(spec: KernelSpec, t):
    """Kernel value; zero outside the support."""
    arr = _nonneg_times(t)
    out = np.zeros_like(arr)
    inside = arr < spec.support_end
    out[inside] = spec.kappa * _unit_phi(spec.family, spec.theta, spec.c, arr[inside])
    return _wrap(t, out)


def phi0(spec: KernelSpec) -> float:
    """``phi(0)``, which is the SIR infection rate beta."""
    return spec.kappa * float(_unit_phi(spec.family, spec.theta, spec.c, np.zeros(1))[0])


def neg_dphi(spec: KernelSpec, t):
    """Analytic ``-phi'(t)``; zero past the support end."""
    arr = _nonneg_times(t)
    out = np.zeros_like(arr)
    inside = arr < spec.support_end
    out[inside] = spec.kappa * _unit_neg_dphi(spec.family, spec.theta, spec.c, arr[inside])
    return _wrap(t, out)


def recovery_density(spec: KernelSpec, t):
    """Recovery-time density ``f(t) = -phi'(t) / phi(0)``."""
    arr = _nonneg_times(t)
    out = np.zeros_like(arr)
    inside = arr < spec.support_end
    norm = float(_unit_phi(spec.family, spec.theta, spec.c, np.zeros(1))[0])
    out[inside] = _unit_neg_dphi(spec.family, spec.theta, spec.c, arr[inside]) / norm
    return _wrap(t, out)


def hazard(spec: KernelSpec, t):
    """Recovery hazard ``h(t) = -phi'(t) / phi(t)``.

    Raises
    ------
    SingularHazardError
        If any ``t`` is at or beyond the end of a bounded support.
    """
    arr = _nonneg_times(t)
    if np.any(arr >= spec.support_end):
        raise SingularHazardError(
            f"hazard undefined at t >= {spec.support_end} for the {spec.family.value} kernel"
        )
    out = _unit_hazard(spec.family, spec.theta, spec.c, arr.astype(float))
    return _wrap(t, np.asarray(out, dtype=float))


def _tail(spec: KernelSpec, x: np.ndarray) -> np.ndarray:
    """Integral of phi over [x, inf) for the infinite-support families."""
    k, th, c = spec.kappa, spec.theta, spec.c
    fam = spec.family
    if fam is Family.EXP:
        return k * np.exp(-th * x)
    if fam is Family.POWERLAW:
        return k / th * (x + c) ** (-th)
    if fam is Family.GAUSSIAN:
        return k * th * math.sqrt(math.pi / 2.0) * special.erfc(x / (th * math.sqrt(2.0)))
    raise AssertionError(fam)


def _cumulative(spec: KernelSpec, x: np.ndarray) -> np.ndarray:
    """Integral of phi over [0, x]; ``x`` may be inf."""
    k, th = spec.kappa, spec.theta
    fam = spec.family
    if fam is Family.LINEAR:
        y = np.minimum(x, 1.0 / th)
        return k * (y - 0.5 * th * y * y)
    if fam is Family.QUADRATIC:
        y = np.minimum(x, 2.0 / th)
        return k * 2.0 / (3.0 * th) * (1.0 - (1.0 - 0.5 * th * y) ** 3)
    if fam is Family.QEXP:
        base = 1.0 + (th - 1.0) * x
        if th == 2.0:
            return k * np.log(base)
        q = (2.0 - th) / (1.0 - th)
        with np.errstate(over="ignore"):
            return k / (2.0 - th) * (1.0 - base**q)
    return _tail(spec, np.zeros_like(x)) - _tail(spec, x)


def neg_antiderivative(spec: KernelSpec, x):
    """A function ``G`` with ``G(a) - G(b) = integral_a^b phi``.

    For exp, power-law and Gaussian kernels ``G`` is the tail integral,
    which keeps differences accurate far from the origin. ``x`` may be inf.
    """
    arr = np.asarray(x, dtype=float)
    fam, k, th = spec.family, spec.kappa, spec.theta
    if fam in (Family.EXP, Family.POWERLAW, Family.GAUSSIAN):
        out = _tail(spec, arr)
    elif fam is Family.QEXP:
        base = 1.0 + (th - 1.0) * arr
        with np.errstate(over="ignore", divide="ignore"):
            if th == 2.0:
                out = -k * np.log(base)
            else:
                out = k / (2.0 - th) * base ** ((2.0 - th) / (1.0 - th))
    else:
        out = -_cumulative(spec, arr)
    return _wrap(x, out)


def kernel_integral(spec: KernelSpec, a, b):
    """Closed-form ``integral_a^b phi``; ``b`` may be ``inf``."""
    a_arr = _nonneg_times(a)
    b_arr = _nonneg_times(b)
    if np.any(b_arr < a_arr):
        raise ParameterError("kernel_integral needs a <= b")
    a_arr, b_arr = np.broadcast_arrays(a_arr, b_arr)
    if spec.family in (Family.EXP, Family.POWERLAW, Family.GAUSSIAN):
        # differencing tails keeps precision far from the origin
        out = _tail(spec, a_arr) - _tail(spec, b_arr)
    else:
        with np.errstate(invalid="ignore"):
            out = _cumulative(spec, b_arr) - _cumulative(spec, a_arr)
        out = np.where(a_arr == b_arr, 0.0, out)
    out = np.maximum(out, 0.0)
    if np.ndim(a) == 0 and np.ndim(b) == 0:
        return float(out)
    return out


def cumulative_kernel(spec: KernelSpec, x):
    """``integral_0^x phi``, vectorised, for compensator evaluation."""
    arr = _nonneg_times(x)
    out = np.maximum(_cumulative(spec, arr.astype(float)), 0.0)
    return _wrap(x, out)


def branching_factor(spec: KernelSpec, rho: float = 0.0, alpha: float = DEFAULT_ALPHA) -> float:
    """Expected number of direct offspring of one event.

    With marks drawn from ``P(m) = (alpha - 1) m^-alpha`` and influence
    ``m**rho``, the unmarked value is scaled by ``(alpha-1)/(alpha-1-rho)``.
    """
    if rho < 0:
        raise ParameterError(f"rho must be non-negative, got {rho}")
    base = kernel_integral(spec, 0.0, math.inf)
    if rho == 0:
        return base
    if not alpha - 1.0 - rho > 0:
        raise DivergentBranchingError(
            f"marked branching factor diverges for rho={rho} >= alpha-1={alpha - 1.0}"
        )
    return base * (alpha - 1.0) / (alpha - 1.0 - rho)


# --- SIR side --------------------------------------------------------------


@dataclass(frozen=True)
class RecoveryDistribution:
    """Recovery-time law with survival ``S(t) = phi(t)/phi(0)``.

    For the exponential family ``theta`` is the recovery rate gamma, and
    ``theta = 0`` is allowed to express the SI model (nobody recovers).
    """

    family: Family
    theta: float
    c: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "family", Family.parse(self.family))
        object.__setattr__(self, "theta", float(self.theta))
        if self.c is not None:
            object.__setattr__(self, "c", float(self.c))
        if self.is_si:
            return
        if self.family is not Family.POWERLAW and self.c is not None:
            raise ParameterError("offset c is only defined for the power-law family")
        _check_shape(self.family, self.theta, self.c)

    @property
    def is_si(self) -> bool:
        return self.family is Family.EXP and self.theta == 0.0

    @property
    def gamma(self) -> float:
        if self.family is not Family.EXP:
            raise AttributeError("gamma is only defined for exponential recovery")
        return self.theta

    def shape(self) -> KernelSpec:
        """The kernel with ``phi(0) = 1``, i.e. the survival function."""
        unit = float(_unit_phi(self.family, self.theta, self.c, np.zeros(1))[0])
        return KernelSpec(self.family, 1.0 / unit, self.theta, self.c)

    def survival(self, t):
        if self.is_si:
            return _wrap(t, np.ones_like(_nonneg_times(t)))
        return phi(self.shape(), t)

    def density(self, t):
        if self.is_si:
            return _wrap(t, np.zeros_like(_nonneg_times(t)))
        return recovery_density(self.shape(), t)

    def hazard(self, t):
        if self.is_si:
            return _wrap(t, np.zeros_like(_nonneg_times(t)))
        return hazard(self.shape(), t)

    def inverse_survival(self, u):
        """Time ``t`` with ``S(t) = u`` for ``u`` in (0, 1]; inverse-CDF sampling."""
        u = np.asarray(u, dtype=float)
        th, c = self.theta, self.c
        fam = self.family
        with np.errstate(divide="ignore"):
            if self.is_si:
                out = np.full_like(u, math.inf)
            elif fam is Family.LINEAR:
                out = (1.0 - u) / th
            elif fam is Family.QUADRATIC:
                out = 2.0 * (1.0 - np.sqrt(u)) / th
            elif fam is Family.GAUSSIAN:
                out = th * np.sqrt(-2.0 * np.log(u))
            elif fam is Family.QEXP:
                out = (u ** (1.0 - th) - 1.0) / (th - 1.0)
            elif fam is Family.EXP:
                out = -np.log(u) / th
            else:
                out = c * (u ** (-1.0 / (1.0 + th)) - 1.0)
        return _wrap(u, out)

    def mean(self) -> float:
        """Mean recovery time, equal to the integral of the survival function."""
        if self.is_si:
            return math.inf
        return kernel_integral(self.shape(), 0.0, math.inf)

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {"family": self.family.value, "theta": self.theta}
        if self.c is not None:
            d["c"] = self.c
        return d


@dataclass(frozen=True)
class SirSpec:
    """Generalised stochastic SIR: infection rate, recovery law, population,
    and mark exponent ``rho`` (0 for unmarked)."""

    beta: float
    recovery: RecoveryDistribution
    N: int
    rho: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "beta", float(self.beta))
        object.__setattr__(self, "rho", float(self.rho))
        if not (self.beta >= 0 and math.isfinite(self.beta)):
            raise ParameterError(f"beta must be non-negative, got {self.beta}")
        if self.rho < 0:
            raise ParameterError(f"rho must be non-negative, got {self.rho}")
        if not self.N >= 1:
            raise ParameterError(f"population size must be >= 1, got {self.N}")

    def branching_factor(self, alpha: float = DEFAULT_ALPHA) -> float:
        """``R0 = beta * E[recovery time]``, scaled for marks when ``rho > 0``."""
        base = self.beta * self.recovery.mean()
        if self.rho == 0:
            return base
        if not alpha - 1.0 - self.rho > 0:
            raise DivergentBranchingError(f"rho={self.rho} >= alpha-1")
        return base * (alpha - 1.0) / (alpha - 1.0 - self.rho)

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {"beta": self.beta, "N": self.N, "rho": self.rho}
        d["recovery"] = self.recovery.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "SirSpec":
        rec = d["recovery"]
        recovery = RecoveryDistribution(rec["family"], rec.get("theta", rec.get("gamma")), rec.get("c"))
        return cls(d["beta"], recovery, d["N"], d.get("rho", 0.0))


def to_sir(spec: KernelSpec, N, rho: float = 0.0) -> SirSpec:
    """Map a HawkesN kernel to SIR parameters: ``beta = phi(0)``, shape kept."""
    return SirSpec(phi0(spec), RecoveryDistribution(spec.family, spec.theta, spec.c), N, rho)


def to_kernel(sir: SirSpec | RecoveryDistribution, beta: float | None = None) -> KernelSpec:
    """Inverse of :func:`to_sir`: ``kappa = beta / phi_unit(0)``."""
    if isinstance(sir, SirSpec):
        rec, beta = sir.recovery, sir.beta
    else:
        rec = sir
        if beta is None:
            raise ParameterError("beta is required when converting a bare recovery distribution")
    if rec.is_si:
        raise ParameterError("the SI model (gamma = 0) has no HawkesN kernel")
    unit = float(_unit_phi(rec.family, rec.theta, rec.c, np.zeros(1))[0])
    return KernelSpec(rec.family, beta / unit, rec.theta, rec.c)
