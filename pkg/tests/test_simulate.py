import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from sirhawkes import gof as G
from sirhawkes import kernels as K
from sirhawkes.kernels import KernelSpec, RecoveryDistribution, SirSpec
from sirhawkes.simulate import (
    SimConfig,
    gillespie_sir,
    sample_mark,
    simulate_hawkesn,
    simulate_many,
    simulate_marked,
    simulate_sir,
    size_distribution,
)


def exp_sir(beta, gamma, N, rho=0.0):
    return SirSpec(beta, RecoveryDistribution("exp", gamma), N, rho)


def test_single_individual():
    r = simulate_sir(SimConfig(exp_sir(3.0, 1.0, 1), seed=2))
    assert len(r) == 1 and r.times[0] == 0.0 and math.isfinite(r.recoveries[0])


def test_zero_infection_rate():
    r = simulate_sir(SimConfig(exp_sir(0.0, 1.0, 50), seed=2))
    assert len(r) == 1 and r.recoveries[0] > 0


def test_reproducible_and_order_independent():
    cfg = SimConfig(exp_sir(2.5, 0.5, 100), seed=9)
    a = simulate_many(cfg, 5)
    b = [simulate_sir(cfg, run) for run in (4, 3, 2, 1, 0)][::-1]
    assert all(x == y for x, y in zip(a, b))
    assert simulate_sir(cfg, 0) != simulate_sir(cfg, 1)


def test_parallel_batch_matches_serial():
    cfg = SimConfig(exp_sir(2.0, 1.0, 60), seed=4)
    assert all(x == y for x, y in zip(simulate_many(cfg, 6, jobs=1), simulate_many(cfg, 6, jobs=2)))


def test_marked_with_rho_zero_keeps_times():
    cfg = SimConfig(exp_sir(2.0, 1.0, 80), seed=5)
    plain, marked = simulate_sir(cfg, 3), simulate_marked(cfg, 2.016, 3)
    np.testing.assert_array_equal(plain.times, marked.times)
    np.testing.assert_array_equal(plain.recoveries, marked.recoveries)
    assert np.all(marked.marks >= 1)


def test_mark_inverse_cdf():
    assert sample_mark(0.5, 2.016) == pytest.approx(0.5 ** (-1 / 1.016), rel=1e-14)
    assert sample_mark(0.5, 2.016) == pytest.approx(1.978, abs=1e-3)
    with pytest.raises(K.ParameterError):
        sample_mark(0.5, 1.0)


@given(st.floats(0.0, 1.0, exclude_max=True), st.floats(1.01, 5.0))
def test_marks_at_least_one(u, alpha):
    m = sample_mark(u, alpha)
    assert 1.0 <= m < math.inf


@given(
    st.sampled_from(["exp", "powerlaw", "linear", "quadratic", "gaussian", "qexp"]),
    st.integers(1, 60),
    st.integers(0, 10_000),
)
def test_recoveries_follow_infections(family, N, seed):
    theta = 1.5 if family == "qexp" else 0.7
    rec = RecoveryDistribution(family, theta, 1.0 if family == "powerlaw" else None)
    r = simulate_sir(SimConfig(SirSpec(2.0, rec, N), seed=seed))
    assert 1 <= len(r) <= N
    assert np.all(r.recoveries > r.times)
    assert np.all(np.diff(r.times) > 0)


def test_horizon_and_max_events_truncate():
    sir = exp_sir(5.0, 0.2, 500)
    r = simulate_sir(SimConfig(sir, seed=1, horizon=1.0))
    assert r.truncated and r.times[-1] <= 1.0
    r = simulate_sir(SimConfig(sir, seed=1, max_events=7))
    assert r.truncated and len(r) == 7


@pytest.mark.parametrize("n_star", [0.5, 1.0, 5.0])
def test_final_size_matches_gillespie(n_star):
    gamma, N, runs = 1.0, 100, 600
    ours = [len(r) for r in simulate_many(SimConfig(exp_sir(n_star * gamma, gamma, N), seed=21), runs)]
    rng = np.random.default_rng(77)
    oracle = [gillespie_sir(n_star * gamma, gamma, N, rng).final_size for _ in range(runs)]
    assert stats.ks_2samp(ours, oracle).pvalue > 0.01


def test_kth_infection_time_matches_gillespie():
    beta, gamma, N, runs, k = 3.0, 1.0, 100, 600, 5
    ours = [r.times[k - 1] for r in simulate_many(SimConfig(exp_sir(beta, gamma, N), seed=8), runs) if len(r) >= k]
    rng = np.random.default_rng(5)
    tr = [gillespie_sir(beta, gamma, N, rng) for _ in range(runs)]
    oracle = [t.infection_times[k - 1] for t in tr if t.final_size >= k]
    assert stats.ks_2samp(ours, oracle).pvalue > 0.01


def test_two_person_race():
    # infection at beta*(1/2) races the recovery at gamma
    beta, gamma = 1.0, 1.0
    dist = size_distribution(exp_sir(beta, gamma, 2), runs=5000, seed=3)
    p2 = dist.counts[1] / 5000
    assert p2 == pytest.approx(beta / (beta + 2 * gamma), abs=0.02)


def test_size_distribution_properties():
    dist = size_distribution(exp_sir(0.0, 1.0, 10), runs=50, seed=0)
    assert dist.counts[0] == 50
    dist = size_distribution(exp_sir(2.0, 1.0, 30), runs=300, seed=1)
    cdf = dist.cdf()
    assert np.all(np.diff(cdf) >= 0) and cdf[-1] == pytest.approx(1.0)
    pmf = dist.pmf(smoothed=True)
    assert np.all(pmf > 0) and pmf.sum() == pytest.approx(1.0)
    assert sum(dist.size_likelihood(n) for n in range(1, 31)) == pytest.approx(1.0)
    assert sum(dist.size_likelihood(n, at_least=5) for n in range(5, 31)) == pytest.approx(1.0)
    assert dist.size_likelihood(31) == 0.0


def test_size_distribution_from_kernel():
    spec = KernelSpec("exp", 2.0, 1.0)
    a = size_distribution(spec, runs=40, seed=2, N=25.7)
    b = size_distribution(K.to_sir(spec, 25), runs=40, seed=2)
    np.testing.assert_array_equal(a.counts, b.counts)


def test_sir_residuals_pass_ks():
    sir = exp_sir(2.5, 0.5, 200)
    passed, total = 0, 0
    for r in simulate_many(SimConfig(sir, seed=13), 200):
        if len(r) < 20:
            continue
        total += 1
        passed += G.ks_test(G.rescale_sir(sir, r))[1] > 0.01
    assert total > 50 and passed / total >= 0.95


def test_hawkesn_simulator_respects_population():
    spec = KernelSpec("exp", 6.0, 1.0)
    for run in range(20):
        c = simulate_hawkesn(spec, 30.0, seed=1, run=run)
        assert len(c) <= 30 and np.all(np.diff(c.times) > 0)


def test_hawkesn_residuals_have_unit_mean():
    from sirhawkes.likelihood import HawkesNParams

    spec = KernelSpec("powerlaw", 3.0, 1.0, 1.0)
    taus = []
    for run in range(40):
        c = simulate_hawkesn(spec, 150.0, seed=6, run=run)
        if len(c) >= 3:
            taus.append(G.rescale(HawkesNParams(spec, 150.0), c).taus)
    x = np.concatenate(taus)
    assert abs(x.mean() - 1.0) < 3 * x.std(ddof=1) / math.sqrt(x.size)
