"""Reproducible experiments behind the acceptance checks.

Each ``run_*`` function takes a frozen config, does its work from seeded
random streams and returns a :class:`Outcome` holding the measured
quantities, the threshold they are held to and whether it was met.
The scripts in ``scripts/`` and ``tests/test_acceptance.py`` call these.
"""
from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path
from typing import Any, Callable, Mapping

import numpy as np
from scipy import integrate, stats

from . import gof as G
from . import kernels as K
from . import likelihood as L
from . import predict as P
from ._parallel import pmap
from .cascades import Cascade
from .fit import FitConfig, fit_cascade, fit_joint
from .kernels import Family, KernelSpec, RecoveryDistribution, SirSpec
from .simulate import SimConfig, gillespie_sir, simulate_hawkesn, simulate_many


@dataclass
class Outcome:
    name: str
    passed: bool
    summary: str
    values: dict[str, Any] = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.summary} ({self.seconds:.1f}s)"


def _timed(fn: Callable[..., Outcome]) -> Callable[..., Outcome]:
    def wrapper(*a, **k) -> Outcome:
        t0 = time.perf_counter()
        out = fn(*a, **k)
        out.seconds = time.perf_counter() - t0
        return out

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def _rel(a: float, b: float) -> float:
    return abs(a - b) / max(abs(b), 1e-300)


# --- parameter recovery -----------------------------------------------------------------------


@dataclass(frozen=True)
class RecoveryConfig:
    """Joint fit of HawkesN to groups of SIR realisations (recoveries hidden).

    With ``groups > 1`` each group uses ``seed + g`` and the fitted
    parameters are summarised by their median across groups.
    """

    family: str = "exp"
    beta: float = 2.5
    theta: float = 0.5
    c: float | None = None
    N: int = 200
    realizations: int = 100
    groups: int = 1
    seed: int = 1
    restarts: int = 4
    pinned: Mapping[str, float] = field(default_factory=dict)
    beta_tol: float | None = 0.10
    theta_tol: float | None = 0.15
    jobs: int = 1


def _recovery_group(cfg: RecoveryConfig, g: int) -> tuple[float, float, float]:
    sir = SirSpec(cfg.beta, RecoveryDistribution(cfg.family, cfg.theta, cfg.c), cfg.N)
    reals = simulate_many(SimConfig(sir, seed=cfg.seed + g), cfg.realizations)
    fit = fit_joint([r.infections for r in reals], FitConfig(cfg.family, restarts=cfg.restarts, pinned=dict(cfg.pinned)))
    view = fit.sir_view
    return view.beta, view.recovery.theta, fit.params.N


@_timed
def run_recovery(cfg: RecoveryConfig, name: str = "parameter recovery") -> Outcome:
    rows = pmap(partial(_recovery_group, cfg), range(cfg.groups), cfg.jobs)
    betas, thetas, Ns = (np.array(v) for v in zip(*rows))
    b, th = float(np.median(betas)), float(np.median(thetas))
    eb, et = _rel(b, cfg.beta), _rel(th, cfg.theta)
    ok = (cfg.beta_tol is None or eb <= cfg.beta_tol) and (cfg.theta_tol is None or et <= cfg.theta_tol)
    label = "gamma" if Family.parse(cfg.family) is Family.EXP else "theta"
    summary = f"beta_hat={b:.4g} (err {eb:.1%}), {label}_hat={th:.4g} (err {et:.1%})"
    if cfg.groups > 1:
        summary += f", median of {cfg.groups} groups; per-group {label}: " + ", ".join(f"{x:.3g}" for x in thetas)
    return Outcome(name, ok, summary, {"beta": betas.tolist(), "theta": thetas.tolist(), "N": Ns.tolist()})


# --- likelihood agreement -------------------------------------------------------------------------


def random_cascade(rng: np.random.Generator, n: int, marked: bool = False, scale: float = 1.0) -> Cascade:
    times = np.concatenate([[0.0], np.cumsum(rng.exponential(scale, n - 1))])
    marks = (1.0 - rng.random(n)) ** (-1.0 / 1.5) if marked else np.ones(n)
    return Cascade.from_times(times, marks)


def random_kernel(rng: np.random.Generator, family: Family) -> KernelSpec:
    if family is Family.EXP:
        return KernelSpec(family, rng.uniform(0.2, 3.0), rng.uniform(0.2, 3.0))
    if family is Family.POWERLAW:
        return KernelSpec(family, rng.uniform(0.2, 3.0), rng.uniform(0.2, 2.0), rng.uniform(0.2, 3.0))
    if family is Family.QEXP:
        return KernelSpec(family, rng.uniform(0.2, 3.0), rng.uniform(1.05, 3.0))
    if family is Family.LINEAR:
        return KernelSpec(family, rng.uniform(0.2, 3.0), rng.uniform(0.05, 1.0))
    if family is Family.QUADRATIC:
        return KernelSpec(family, rng.uniform(0.2, 3.0), rng.uniform(0.05, 1.0))
    return KernelSpec(family, rng.uniform(0.2, 3.0), rng.uniform(0.2, 3.0))


@dataclass(frozen=True)
class LikelihoodConfig:
    cascades: int = 50
    max_events: int = 20
    families: tuple[str, ...] = ("exp", "powerlaw", "qexp")
    quad_rtol: float = 1e-6
    fast_sizes: tuple[int, ...] = (10, 100, 500, 2000)
    fast_rtol: float = 1e-9
    seed: int = 3


@_timed
def run_likelihood(cfg: LikelihoodConfig, name: str = "likelihood correctness") -> Outcome:
    rng = np.random.default_rng(cfg.seed)
    worst_quad = 0.0
    for fam in map(Family.parse, cfg.families):
        for i in range(cfg.cascades):
            n = int(rng.integers(3, cfg.max_events + 1))
            c = random_cascade(rng, n, marked=bool(i % 2))
            params = L.HawkesNParams(random_kernel(rng, fam), rng.uniform(n, 3 * n), rho=0.5 if i % 2 else 0.0)
            closed = L.hawkesn_loglik(params, c, method="closed").loglik
            quad = L.hawkesn_loglik(params, c, method="quadrature").loglik
            worst_quad = max(worst_quad, _rel(closed, quad))
    worst_fast = 0.0
    for n in cfg.fast_sizes:
        c = random_cascade(rng, n, scale=0.05)
        params = L.HawkesNParams(random_kernel(rng, Family.EXP), rng.uniform(n, 2 * n))
        fast = L.hawkesn_loglik(params, c, method="fast").loglik
        closed = L.hawkesn_loglik(params, c, method="closed").loglik
        worst_fast = max(worst_fast, _rel(fast, closed))
    ok = worst_quad <= cfg.quad_rtol and worst_fast <= cfg.fast_rtol
    summary = (
        f"closed vs quadrature max rel {worst_quad:.2e} (tol {cfg.quad_rtol:g}); "
        f"O(n) vs O(n^2) max rel {worst_fast:.2e} (tol {cfg.fast_rtol:g}, n<={max(cfg.fast_sizes)})"
    )
    return Outcome(name, ok, summary, {"quad": worst_quad, "fast": worst_fast})


# --- transforms -------------------------------------------------------------------------------------


@dataclass(frozen=True)
class TransformConfig:
    draws: int = 20
    seed: int = 4
    mass_tol: float = 1e-8
    deriv_rtol: float = 1e-4
    r0_rtol: float = 1e-6


def _transform_draw(rng: np.random.Generator, family: Family) -> KernelSpec:
    spec = random_kernel(rng, family)
    if family is Family.QEXP:  # finite mean recovery time needs theta < 2
        spec = KernelSpec(family, spec.kappa, rng.uniform(1.05, 1.9))
    return spec


def _quad(fn, a: float, b: float) -> float:
    val, _ = integrate.quad(fn, a, b, epsabs=0.0, epsrel=1e-10, limit=200)
    return val


def _quad_to_end(fn, a: float, end: float) -> float:
    if math.isinf(end):
        return _quad(fn, a, math.inf)
    return _quad(fn, a, end)


@_timed
def run_transforms(cfg: TransformConfig, name: str = "transform suite") -> Outcome:
    rng = np.random.default_rng(cfg.seed)
    worst = {"mass": 0.0, "f": 0.0, "h": 0.0, "r0": 0.0}
    for fam in Family:
        for _ in range(cfg.draws):
            spec = _transform_draw(rng, fam)
            end = spec.support_end
            f = lambda t, s=spec: float(K.recovery_density(s, t))
            mass = _quad_to_end(f, 0.0, end)
            worst["mass"] = max(worst["mass"], abs(mass - 1.0))
            # numeric derivative of phi at interior points
            hi = min(end, 10.0 * K.RecoveryDistribution(spec.family, spec.theta, spec.c).mean()) if math.isfinite(end) else 5.0
            for t in np.linspace(0.05, 0.9, 6) * hi:
                eps = 1e-5 * max(t, 1e-3)
                dphi = (K.phi(spec, t + eps) - K.phi(spec, t - eps)) / (2 * eps)
                f_num = -dphi / K.phi0(spec)
                h_num = -dphi / K.phi(spec, t)
                worst["f"] = max(worst["f"], _rel(float(K.recovery_density(spec, t)), f_num))
                worst["h"] = max(worst["h"], _rel(float(K.hazard(spec, t)), h_num))
            beta = K.phi0(spec)
            rec = K.RecoveryDistribution(spec.family, spec.theta, spec.c)
            # inner integral of the double form: the survival, checked pointwise
            for t in np.linspace(0.0, 0.9, 4) * hi:
                worst["r0"] = max(worst["r0"], _rel(float(rec.survival(t)), _quad_to_end(f, t, end)))
            r0_direct = beta * _quad_to_end(lambda t: t * f(t), 0.0, end)
            r0_double = beta * _quad_to_end(lambda t: float(rec.survival(t)), 0.0, end)
            n_star = K.branching_factor(spec)
            worst["r0"] = max(worst["r0"], _rel(r0_direct, n_star), _rel(r0_double, n_star))
    ok = (
        worst["mass"] <= cfg.mass_tol
        and worst["f"] <= cfg.deriv_rtol
        and worst["h"] <= cfg.deriv_rtol
        and worst["r0"] <= cfg.r0_rtol
    )
    summary = (
        f"|int f - 1| max {worst['mass']:.1e}; f, h vs numeric max rel {max(worst['f'], worst['h']):.1e}; "
        f"R0 forms max rel {worst['r0']:.1e} ({len(Family)} families x {cfg.draws})"
    )
    return Outcome(name, ok, summary, worst)


# --- simulator vs Gillespie --------------------------------------------------------------------------


@dataclass(frozen=True)
class SimulatorConfig:
    n_stars: tuple[float, ...] = (0.5, 1.0, 5.0)
    gamma: float = 1.0
    N: int = 200
    runs: int = 1000
    seed: int = 5
    min_p: float = 0.01
    race_beta: float = 1.0
    race_gamma: float = 1.0
    race_runs: int = 10_000
    race_tol: float = 0.02


def race_probability(beta: float, gamma: float) -> float:
    """P[second infection] for ``N = 2``: infection at ``beta/2`` races recovery at ``gamma``."""
    return beta / (beta + 2.0 * gamma)


@_timed
def run_simulator(cfg: SimulatorConfig, name: str = "simulator validity") -> Outcome:
    pvals = []
    for i, n_star in enumerate(cfg.n_stars):
        beta = n_star * cfg.gamma
        sir = SirSpec(beta, RecoveryDistribution("exp", cfg.gamma), cfg.N)
        ours = [len(r) for r in simulate_many(SimConfig(sir, seed=cfg.seed + i), cfg.runs)]
        rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(99, i)))
        oracle = [gillespie_sir(beta, cfg.gamma, cfg.N, rng).final_size for _ in range(cfg.runs)]
        pvals.append(float(stats.ks_2samp(ours, oracle).pvalue))
    sir2 = SirSpec(cfg.race_beta, RecoveryDistribution("exp", cfg.race_gamma), 2)
    reals = simulate_many(SimConfig(sir2, seed=cfg.seed + 100), cfg.race_runs)
    p_hat = float(np.mean([len(r) == 2 for r in reals]))
    p_true = race_probability(cfg.race_beta, cfg.race_gamma)
    ok = min(pvals) > cfg.min_p and abs(p_hat - p_true) <= cfg.race_tol
    summary = (
        "KS p = " + ", ".join(f"{p:.3f}" for p in pvals) + f" for n* = {list(cfg.n_stars)}; "
        f"N=2 race {p_hat:.4f} vs {p_true:.4f}"
    )
    return Outcome(name, ok, summary, {"ks_p": pvals, "race": p_hat})


# --- GoF calibration ---------------------------------------------------------------------------------


@dataclass(frozen=True)
class CalibrationConfig:
    kappa: float = 5.0
    theta: float = 1.0
    N: float = 200.0
    cascades: int = 500
    min_events: int = 20
    seed: int = 11
    level: float = 0.01
    min_rate: float = 0.95
    jobs: int = 1


def _calibration_report(cfg: CalibrationConfig, run: int) -> G.GofReport | None:
    spec = KernelSpec("exp", cfg.kappa, cfg.theta)
    c = simulate_hawkesn(spec, cfg.N, seed=cfg.seed, run=run)
    if len(c) < cfg.min_events:
        return None
    return G.gof_report(G.rescale(L.HawkesNParams(spec, cfg.N), c))


@_timed
def run_calibration(cfg: CalibrationConfig, name: str = "GoF calibration") -> Outcome:
    reports: list[G.GofReport] = []
    start = 0
    while len(reports) < cfg.cascades:
        batch = range(start, start + cfg.cascades - len(reports))
        start = batch.stop
        reports += [r for r in pmap(partial(_calibration_report, cfg), batch, cfg.jobs) if r is not None]
    rates = {k: float(np.mean([r.pass_at(cfg.level)[k] for r in reports])) for k in ("ks", "ed", "lb")}
    ok = all(v >= cfg.min_rate for v in rates.values())
    summary = ", ".join(f"{k.upper()} {v:.1%}" for k, v in rates.items()) + f" pass at {cfg.level} over {len(reports)} cascades"
    return Outcome(name, ok, summary, rates)


# --- holdout additivity ---------------------------------------------------------------------------------


@dataclass(frozen=True)
class HoldoutConfig:
    cascades: int = 50
    split: float = 0.4
    seed: int = 6
    atol: float = 1e-9


@_timed
def run_holdout(cfg: HoldoutConfig, name: str = "holdout additivity") -> Outcome:
    rng = np.random.default_rng(cfg.seed)
    worst = 0.0
    fams = list(Family)
    for i in range(cfg.cascades):
        n = int(rng.integers(5, 60))
        c = random_cascade(rng, n, marked=bool(i % 3 == 0))
        params = L.HawkesNParams(random_kernel(rng, fams[i % len(fams)]), rng.uniform(n, 3 * n), 0.3 if i % 3 == 0 else 0.0)
        k = L.split_index(n, cfg.split)
        full = L.hawkesn_loglik(params, c).loglik
        parts = L.hawkesn_loglik(params, c.head(k)).loglik + L.holdout_loglik(params, c, cfg.split).loglik
        worst = max(worst, abs(full - parts) / max(1.0, abs(full)))
    return Outcome(name, worst <= cfg.atol, f"max |train + holdout - full| / max(1,|full|) = {worst:.1e}", {"err": worst})


# --- prediction ------------------------------------------------------------------------------------------------


@dataclass(frozen=True)
class PredictionConfig:
    cascades: int = 500
    fraction: float = 0.5
    min_events: int = 20
    seed: int = 7
    restarts: int = 3
    pl_restarts: int = 2
    pl_c: float = 1.0
    with_powerlaw: bool = True
    cv: P.CvConfig = P.CvConfig()
    jobs: int = 1


def prediction_corpus(cfg: PredictionConfig) -> list[tuple[Cascade, dict]]:
    """EXPN cascades with parameters drawn per cascade."""
    rng = np.random.default_rng(cfg.seed)
    out, run = [], 0
    while len(out) < cfg.cascades:
        N = float(rng.integers(100, 400))
        spec = KernelSpec("exp", rng.uniform(1.5, 5.0), rng.uniform(0.5, 2.0))
        c = simulate_hawkesn(spec, N, seed=cfg.seed, run=run)
        run += 1
        if len(c) >= cfg.min_events:
            out.append((Cascade(c.times, c.marks, f"p{len(out):04d}"), {"N": N, "kernel": spec.to_dict()}))
    return out


def _prefix_fits(cfg: PredictionConfig, c: Cascade):
    k = L.split_index(len(c), cfg.fraction)
    head = c.head(k)
    fits = {"EXPN": fit_cascade(head, FitConfig("exp", restarts=cfg.restarts, seed=cfg.seed))}
    if cfg.with_powerlaw:
        pl = FitConfig("powerlaw", restarts=cfg.pl_restarts, pinned={"c": cfg.pl_c}, seed=cfg.seed)
        fits["PLN"] = fit_cascade(head, pl)
    return head, fits


@_timed
def run_prediction(cfg: PredictionConfig, name: str = "prediction pipeline") -> Outcome:
    corpus = [c for c, _ in prediction_corpus(cfg)]
    fitted = pmap(partial(_prefix_fits, cfg), corpus, cfg.jobs)
    C_inf_all = {c.id: len(c) for c in corpus}
    table, preds = {}, {}
    for model in ["EXPN", "PLN"] if cfg.with_powerlaw else ["EXPN"]:
        rows = [P.extract_features(fits[model], head, head.times[-1]) for head, fits in fitted]
        keep = [(r, fits[model]) for r, (_, fits) in zip(rows, fitted) if r is not None]
        X = P.feature_matrix([r for r, _ in keep])
        C_t = np.array([r.C_t for r, _ in keep], dtype=float)
        N_hat = np.array([f.params.N for _, f in keep])
        C_inf = np.array([C_inf_all[r.cascade_id] for r, _ in keep], dtype=float)
        res = P.cross_validate(X, C_t, N_hat, C_inf, cfg.cv)
        table[model] = float(np.median(res.are))
        preds[model] = dict(zip([r.cascade_id for r, _ in keep], res.C_inf_hat))
    ids = [c.id for c in corpus]
    C_t_all = {head.id: len(head) for head, _ in fitted}
    table["BASELINE"] = float(np.median(P.baseline_are([C_t_all[i] for i in ids], [C_inf_all[i] for i in ids])))
    if cfg.with_powerlaw:
        common = [i for i in ids if i in preds["EXPN"] and i in preds["PLN"]]
        comb = [P.are(P.combine_predictions([preds["EXPN"][i], preds["PLN"][i]]), C_inf_all[i]) for i in common]
        table["COMBINED"] = float(np.median(comb))
    ok = table["EXPN"] < table["BASELINE"] and (not cfg.with_powerlaw or math.isfinite(table["COMBINED"]))
    summary = "median ARE " + ", ".join(f"{k} {v:.3f}" for k, v in table.items())
    return Outcome(name, ok, summary, table)


# --- corpus pipeline ----------------------------------------------------------------------------------------

FIT_SUMMARY_HEADER = ["cascade_id", "family", "kappa", "theta", "c", "N", "rho", "nll", "n_star", "converged"]
GOF_HEADER = ["cascade_id", "model", "n", "ks_D", "ks_p", "ed_p", "lb_p", "pass_ks", "pass_ed", "pass_lb"]
COMPARE_HEADER = ["cascade_id", "model_a", "model_b", "ks_D_a", "ks_D_b", "result"]


@dataclass(frozen=True)
class CorpusConfig:
    corpus: str = "data/synthetic_corpus.csv"
    outdir: str = "results/corpus"
    restarts: int = 3
    seed: int = 0
    jobs: int = 1


def _header(path: Path) -> list[str]:
    with open(path, newline="") as fh:
        return next(csv.reader(fh), [])


@_timed
def run_corpus_pipeline(cfg: CorpusConfig, name: str = "corpus pipeline") -> Outcome:
    """EXPN and PLN fits, then gof with pairwise comparison, via the CLI."""
    from .cli import main

    out = Path(cfg.outdir)
    out.mkdir(parents=True, exist_ok=True)
    common = ["--restarts", str(cfg.restarts), "--seed", str(cfg.seed), "--jobs", str(cfg.jobs)]
    codes = []
    for fam, stem in (("exp", "expn"), ("powerlaw", "pln")):
        codes.append(main(["fit", "-i", cfg.corpus, "--family", fam, "-o", str(out / f"{stem}.jsonl")] + common))
    gof = out / "gof.csv"
    codes.append(
        main(["gof", "-i", cfg.corpus, "--fits", str(out / "expn.jsonl"), "--fits", str(out / "pln.jsonl"),
              "-o", str(gof), "--jobs", str(cfg.jobs)])
    )
    if any(codes):
        return Outcome(name, False, f"exit codes {codes}")
    schema = {
        "expn_summary.csv": FIT_SUMMARY_HEADER,
        "pln_summary.csv": FIT_SUMMARY_HEADER,
        "gof.csv": GOF_HEADER,
        "gof_compare.csv": COMPARE_HEADER,
    }
    bad = [f for f, h in schema.items() if _header(out / f) != h]
    with open(out / "gof_compare.csv", newline="") as fh:
        verdicts = [r["result"] for r in csv.DictReader(fh)]
    with open(gof, newline="") as fh:
        rows = list(csv.DictReader(fh))
    counts = {v: verdicts.count(v) for v in ("A_better", "B_better", "Tie")}
    ok = not bad and len(verdicts) > 0 and sum(counts.values()) == len(verdicts)
    summary = f"{len(rows)} gof rows, {len(verdicts)} comparisons {counts}"
    if bad:
        summary += f"; schema mismatch in {bad}"
    return Outcome(name, ok, summary, {"comparisons": counts, "gof_rows": len(rows)})
