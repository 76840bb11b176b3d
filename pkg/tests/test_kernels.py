import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from sirhawkes import kernels as K
from sirhawkes.kernels import Family, KernelSpec, RecoveryDistribution, SirSpec

from tests.strategies import kernels


def quad(fn, a, b):
    return integrate.quad(fn, a, b, epsabs=1e-13, epsrel=1e-12, limit=400)[0]


# --- point values ------------------------------------------------------------------------


def test_phi_examples():
    assert K.phi(KernelSpec("exp", 2, 1), 0.0) == pytest.approx(2.0, rel=1e-15)
    assert K.phi(KernelSpec("linear", 1, 2), 1.0) == 0.0
    assert K.phi(KernelSpec("powerlaw", 1, 0.5, 2), 0.0) == pytest.approx(2**-1.5, rel=1e-14)


def test_density_examples():
    assert K.recovery_density(KernelSpec("exp", 5, 1), 0.0) == pytest.approx(1.0)
    assert K.recovery_density(KernelSpec("qexp", 1, 2), 1.0) == pytest.approx(0.25)


def test_hazard_examples():
    assert K.hazard(KernelSpec("exp", 0.3, 3), 7.0) == pytest.approx(3.0)
    assert K.hazard(KernelSpec("qexp", 1, 2), 1.0) == pytest.approx(0.5)
    assert K.hazard(KernelSpec("powerlaw", 1, 1, 2), 0.0) == pytest.approx(1.0)


def test_integral_examples():
    assert K.kernel_integral(KernelSpec("exp", 0.8, 5), 0.0, math.inf) == pytest.approx(0.8)
    # kappa * c**-theta / theta with kappa=1, theta=0.5, c=2
    pl = KernelSpec("powerlaw", 1, 0.5, 2)
    assert K.kernel_integral(pl, 0.0, math.inf) == pytest.approx(2**-0.5 / 0.5, rel=1e-12)
    assert K.kernel_integral(pl, 0.0, math.inf) == pytest.approx(quad(lambda t: K.phi(pl, t), 0, math.inf), rel=1e-8)


@given(kernels(), st.floats(0.0, 10.0))
def test_integral_over_empty_interval_is_zero(spec, a):
    assert K.kernel_integral(spec, a, a) == 0.0


def test_branching_examples():
    assert K.branching_factor(KernelSpec("exp", 0.8, 5)) == pytest.approx(0.8)
    assert K.branching_factor(KernelSpec("exp", 1, 1), rho=0.5) == pytest.approx(1.016 / 0.516, rel=1e-12)
    spec = KernelSpec("powerlaw", 1, 0.7, 1.5)
    assert K.branching_factor(spec, 0.0, 2.016) == K.kernel_integral(spec, 0, math.inf)


def test_branching_divergences():
    with pytest.raises(K.DivergentBranchingError):
        K.branching_factor(KernelSpec("exp", 1, 1), rho=1.1)
    assert K.branching_factor(KernelSpec("qexp", 1, 2.5)) == math.inf


# --- closed forms checked by hand ---------------------------------------------------------------------


def test_gaussian_density_exponent_uses_theta_squared():
    spec = KernelSpec("gaussian", 1.0, 2.0)
    t = 1.3
    assert K.recovery_density(spec, t) == pytest.approx(t / 4.0 * math.exp(-t * t / 8.0), rel=1e-14)


def test_qexp_hazard_closed_form():
    spec = KernelSpec("qexp", 1.0, 1.7)
    for t in (0.0, 0.5, 3.0):
        assert K.hazard(spec, t) == pytest.approx(1.0 / (1.0 + 0.7 * t), rel=1e-14)


def test_quadratic_hazard_closed_form():
    th = 0.8
    spec = KernelSpec("quadratic", 1.0, th)
    for t in (0.1, 1.0, 2.0):
        assert K.hazard(spec, t) == pytest.approx((4 * th - 2 * th**2 * t) / (th**2 * t**2 - 4 * th * t + 4))


def test_linear_support_ends_at_inverse_theta():
    spec = KernelSpec("linear", 7.0, 2.0)
    assert spec.support_end == 0.5
    assert K.phi(spec, 0.49) > 0 and K.phi(spec, 0.5) == 0.0
    with pytest.raises(K.SingularHazardError):
        K.hazard(spec, 0.5)


# --- properties -----------------------------------------------------------------------------------


@given(kernels())
def test_density_integrates_to_one(spec):
    f = lambda t: float(K.recovery_density(spec, t))
    end = spec.support_end
    assert quad(f, 0.0, end) == pytest.approx(1.0, abs=1e-8)


@given(kernels(), st.floats(0.01, 0.95))
def test_analytic_derivative_matches_central_difference(spec, frac):
    end = spec.support_end if math.isfinite(spec.support_end) else 10.0
    t = frac * end
    h = 1e-6 * max(1.0, t)
    dphi = (K.phi(spec, t + h) - K.phi(spec, t - h)) / (2 * h)
    assert -dphi == pytest.approx(K.phi0(spec) * K.recovery_density(spec, t), rel=1e-4, abs=1e-10)


@given(kernels(), st.floats(0.0, 0.95))
def test_density_is_hazard_times_survival(spec, frac):
    end = spec.support_end if math.isfinite(spec.support_end) else 20.0
    t = frac * end
    lhs = K.recovery_density(spec, t)
    rhs = K.hazard(spec, t) * K.phi(spec, t) / K.phi0(spec)
    assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-300)


@given(kernels(), st.floats(0.0, 5.0), st.floats(0.0, 5.0))
def test_phi_non_increasing(spec, a, b):
    t1, t2 = sorted((a, b))
    assert K.phi(spec, t1) >= K.phi(spec, t2)


@given(kernels(), st.floats(0.01, 5.0))
def test_tail_integral_derivative_is_minus_phi(spec, t):
    if t >= spec.support_end or math.isinf(K.kernel_integral(spec, 0.0, math.inf)):
        return  # divergent tails are covered by the head-integral property below
    h = 1e-6 * max(1.0, t)
    tail = lambda x: K.kernel_integral(spec, x, math.inf)
    d = (tail(t + h) - tail(max(t - h, 0.0))) / (t + h - max(t - h, 0.0))
    assert d == pytest.approx(-K.phi(spec, t), rel=1e-4, abs=1e-8)


@given(kernels(), st.floats(0.01, 5.0))
def test_head_integral_derivative_is_phi(spec, t):
    if t >= spec.support_end:
        return
    h = 1e-6 * max(1.0, t)
    d = (K.kernel_integral(spec, 0.0, t + h) - K.kernel_integral(spec, 0.0, t - h)) / (2 * h)
    assert d == pytest.approx(K.phi(spec, t), rel=1e-4, abs=1e-8)


def test_divergent_tail_is_infinite():
    assert K.kernel_integral(KernelSpec("qexp", 1.0, 2.0), 1.0, math.inf) == math.inf


@given(kernels(families=(Family.EXP, Family.POWERLAW, Family.GAUSSIAN, Family.LINEAR, Family.QUADRATIC)))
def test_r0_equals_branching_factor(spec):
    rec = RecoveryDistribution(spec.family, spec.theta, spec.c)
    if spec.family is Family.POWERLAW and spec.theta < 0.3:
        return  # very slow tails; covered by the acceptance suite
    f = lambda t: t * float(K.recovery_density(spec, t))
    r0 = K.phi0(spec) * quad(f, 0, spec.support_end)
    assert r0 == pytest.approx(K.branching_factor(spec), rel=1e-6)
    assert K.phi0(spec) * rec.mean() == pytest.approx(K.branching_factor(spec), rel=1e-10)


@given(kernels(), st.floats(1e-9, 1.0))
def test_inverse_survival(spec, u):
    rec = RecoveryDistribution(spec.family, spec.theta, spec.c)
    t = rec.inverse_survival(u)
    assert t >= 0
    assert rec.survival(t) == pytest.approx(u, rel=1e-9, abs=1e-12)


# --- conversions ----------------------------------------------------------------------------------------


def test_exp_to_sir():
    sir = K.to_sir(KernelSpec("exp", 2, 1.5), 100)
    assert sir.beta == pytest.approx(3.0) and sir.recovery.gamma == 1.5


def test_powerlaw_to_sir_beta_is_phi0():
    sir = K.to_sir(KernelSpec("powerlaw", 1, 0.5, 2), 10)
    assert sir.beta == pytest.approx(2**-1.5)


@given(kernels())
def test_round_trip(spec):
    back = K.to_kernel(K.to_sir(spec, 50))
    assert back.family is spec.family and back.theta == spec.theta and back.c == spec.c
    assert back.kappa == pytest.approx(spec.kappa, rel=1e-14)


@given(kernels())
def test_json_round_trip(spec):
    assert KernelSpec.from_dict(spec.to_dict()) == spec


def test_si_has_no_kernel():
    with pytest.raises(K.ParameterError):
        K.to_kernel(SirSpec(1.0, RecoveryDistribution("exp", 0.0), 10))


@pytest.mark.parametrize(
    "args",
    [("exp", -1, 1), ("exp", 1, 0), ("qexp", 1, 1.0), ("powerlaw", 1, 1, None), ("powerlaw", 1, 1, -2), ("nope", 1, 1)],
)
def test_invalid_parameters(args):
    with pytest.raises(K.ParameterError):
        KernelSpec(*args)


def test_negative_time_rejected():
    with pytest.raises(K.ParameterError):
        K.phi(KernelSpec("exp", 1, 1), -0.1)


def test_family_aliases():
    assert Family.parse("PL") is Family.POWERLAW
    assert Family.parse("tsallis") is Family.QEXP
    assert Family.parse("exponential") is Family.EXP


def test_vectorised_phi_matches_scalar():
    spec = KernelSpec("quadratic", 2.0, 0.5)
    t = np.linspace(0, 5, 11)
    np.testing.assert_array_equal(K.phi(spec, t), [K.phi(spec, x) for x in t])
