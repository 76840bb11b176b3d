"""Command-line front end.

Every subcommand reads its settings from flags, an optional ``--config``
JSON file and built-in defaults, in that order of precedence, and writes a
``<output>.manifest.json`` next to its main output.

Exit codes: 0 success, 1 invalid input or usage, 2 file-system errors.
"""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import sys
import warnings
from functools import partial
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from . import gof as G
from . import kernels as K
from . import likelihood as L
from . import predict as P
from ._parallel import JOBS_ENV, default_jobs, pmap
from .cascades import Cascade, fmt, load_cascades, save_realizations
from .fit import FitConfig, FitResult, InsufficientDataError, fit_cascade, fit_joint
from .simulate import SimConfig, size_distribution, simulate_many

ALL_FAMILIES = [f.value for f in K.Family]

_SIR_FLAGS = dict(family=None, beta=None, gamma=None, theta=None, c=None, N=None, rho=None, spec=None)

DEFAULTS: dict[str, dict[str, Any]] = {
    "simulate": dict(_SIR_FLAGS, alpha=None, runs=1, seed=0, horizon=None, max_events=10**6, output="realizations.csv"),
    "fit": dict(
        input=None, family="exp", marked=False, restarts=10, pin=[], seed=0, group=False,
        train_fraction=None, horizon=None, output="fits.jsonl", summary=None,
    ),
    "gof": dict(input=None, fits=[], output="gof.csv", compare_output=None, min_gap=G.DEFAULT_GAP, level=G.DEFAULT_LEVEL),
    "holdout": dict(input=None, fits=[], split=0.4, output="holdout.csv"),
    "predict": dict(
        input=None, fits=[], horizon=P.DEFAULT_WINDOW, folds=10, train_folds=4, seed=0,
        output="predictions.csv", are_table=None, export_features=None,
    ),
    "convert": dict(family="exp", kappa=None, theta=None, gamma=None, c=None, beta=None, to="sir", output=None),
    "size-dist": dict(_SIR_FLAGS, kappa=None, runs=1000, seed=0, output="size_dist.csv"),
}


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


# --- argument parsing ---------------------------------------------------------------------


def _add_sir_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--spec", help="SIR spec JSON file (flags override its fields)")
    p.add_argument("--family", help=f"recovery family: {', '.join(ALL_FAMILIES)}")
    p.add_argument("--beta", type=float)
    p.add_argument("--gamma", type=float, help="exponential recovery rate (alias of --theta)")
    p.add_argument("--theta", type=float)
    p.add_argument("--c", type=float)
    p.add_argument("--N", type=int)
    p.add_argument("--rho", type=float)


def build_parser() -> argparse.ArgumentParser:
    root = _Parser(prog="sirhawkes", description=__doc__.splitlines()[0])
    root.add_argument("--version", action="version", version=__version__)
    sub = root.add_subparsers(dest="command", parser_class=_Parser, required=True)

    def cmd(name: str, help: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help, argument_default=argparse.SUPPRESS)
        p.add_argument("--config", help="JSON file of settings (flags take precedence)")
        p.add_argument("--jobs", type=int, help=f"worker processes (default ${JOBS_ENV} or all cores)")
        return p

    p = cmd("simulate", "sample SIR realisations")
    _add_sir_flags(p)
    p.add_argument("--alpha", type=float, help="mark exponent; enables marks")
    p.add_argument("--runs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--horizon", type=float)
    p.add_argument("--max-events", dest="max_events", type=int)
    p.add_argument("-o", "--output")

    p = cmd("fit", "fit HawkesN models to cascades")
    p.add_argument("-i", "--input")
    p.add_argument("--family")
    p.add_argument("--marked", action="store_true")
    p.add_argument("--restarts", type=int)
    p.add_argument("--pin", action="append", metavar="NAME=VALUE")
    p.add_argument("--seed", type=int)
    p.add_argument("--group", action="store_true", help="one joint fit for all cascades")
    p.add_argument("--train-fraction", dest="train_fraction", type=float)
    p.add_argument("--horizon", type=float, help="fit only events up to this time")
    p.add_argument("-o", "--output")
    p.add_argument("--summary")

    p = cmd("gof", "residual goodness-of-fit tests")
    p.add_argument("-i", "--input")
    p.add_argument("--fits", action="append", help="fits JSONL (repeat to compare models)")
    p.add_argument("-o", "--output")
    p.add_argument("--compare-output", dest="compare_output")
    p.add_argument("--min-gap", dest="min_gap", type=float)
    p.add_argument("--level", type=float)

    p = cmd("holdout", "per-event holdout log-likelihood")
    p.add_argument("-i", "--input")
    p.add_argument("--fits", action="append")
    p.add_argument("--split", type=float)
    p.add_argument("-o", "--output")

    p = cmd("predict", "final-size prediction")
    p.add_argument("-i", "--input")
    p.add_argument("--fits", action="append")
    p.add_argument("--horizon", type=float)
    p.add_argument("--folds", type=int)
    p.add_argument("--train-folds", dest="train_folds", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("-o", "--output")
    p.add_argument("--are-table", dest="are_table")
    p.add_argument("--export-features", dest="export_features")

    p = cmd("convert", "convert between kernel and SIR parameters")
    p.add_argument("--family")
    p.add_argument("--kappa", type=float)
    p.add_argument("--theta", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--c", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--to", choices=["sir", "kernel"])
    p.add_argument("-o", "--output")

    p = cmd("size-dist", "Monte-Carlo final-size distribution")
    _add_sir_flags(p)
    p.add_argument("--kappa", type=float, help="kernel scale (instead of --beta)")
    p.add_argument("--runs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("-o", "--output")
    return root


def _settings(command: str, ns: argparse.Namespace) -> dict[str, Any]:
    given = {k: v for k, v in vars(ns).items() if k != "command"}
    out = dict(DEFAULTS[command], jobs=None)
    cfg_path = given.pop("config", None)
    if cfg_path:
        raw = json.loads(Path(cfg_path).read_text(encoding="utf-8"))
        if not isinstance(raw, dict):
            raise UsageError("config file must hold a JSON object")
        for k, v in raw.items():
            key = k.replace("-", "_")
            if key not in out:
                raise UsageError(f"unknown config key {k!r} for {command}")
            out[key] = v
    out.update(given)
    if out["jobs"] is None:
        out["jobs"] = default_jobs()
    if out["jobs"] < 1:
        raise UsageError("--jobs must be >= 1")
    return out


# --- output helpers ----------------------------------------------------------------------------


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def write_manifest(path: str | Path, command: str, settings: dict, started: str, outputs: list[str], extra=None) -> None:
    """Run manifest stored next to ``path``; ``started``/``finished`` are
    the only fields that differ between identical runs."""
    manifest = {
        "subcommand": command,
        "config": settings,
        "seed": settings.get("seed"),
        "version": __version__,
        "outputs": outputs,
        "started": started,
        "finished": _now(),
    }
    if extra:
        manifest.update(extra)
    Path(f"{path}.manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n", encoding="utf-8")


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return fmt(v)
    return str(v)


def write_csv(path: str | Path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_cell(v) for v in r])


def _round(x: float) -> float:
    return float(fmt(x))


def _derived(path: str, suffix: str) -> str:
    p = Path(path)
    return str(p.with_name(p.stem + suffix))


# --- spec construction -----------------------------------------------------------------------------


def _recovery_theta(s: dict) -> float | None:
    if s.get("gamma") is not None and s.get("theta") is not None and s["gamma"] != s["theta"]:
        raise UsageError("give only one of --gamma and --theta")
    return s["gamma"] if s.get("gamma") is not None else s.get("theta")


def sir_from_settings(s: dict) -> K.SirSpec:
    base: dict[str, Any] = {}
    if s.get("spec"):
        base = K.SirSpec.from_dict(json.loads(Path(s["spec"]).read_text(encoding="utf-8"))).to_dict()
    rec = dict(base.get("recovery", {}))
    family = s["family"] if s["family"] is not None else rec.get("family", "exp")
    theta = _recovery_theta(s)
    theta = theta if theta is not None else rec.get("theta")
    c = s["c"] if s["c"] is not None else rec.get("c")
    N = s["N"] if s["N"] is not None else base.get("N")
    rho = s["rho"] if s.get("rho") is not None else base.get("rho", 0.0)
    if theta is None:
        raise UsageError("recovery parameter missing: give --gamma/--theta or --spec")
    if N is None:
        raise UsageError("population size missing: give --N or --spec")
    rec_d = K.RecoveryDistribution(family, theta, c)
    kappa = s.get("kappa")
    if kappa is not None:
        if s["beta"] is not None:
            raise UsageError("give only one of --beta and --kappa")
        return K.to_sir(K.KernelSpec(family, kappa, theta, c), N, rho)
    beta = s["beta"] if s["beta"] is not None else base.get("beta")
    if beta is None:
        raise UsageError("infection rate missing: give --beta or --spec")
    return K.SirSpec(beta, rec_d, N, rho)


def _parse_pins(pins) -> dict[str, float]:
    if isinstance(pins, dict):
        return {str(k): float(v) for k, v in pins.items()}
    out = {}
    for item in pins or []:
        name, sep, val = str(item).partition("=")
        if not sep:
            raise UsageError(f"--pin expects NAME=VALUE, got {item!r}")
        try:
            out[name.strip()] = float(val)
        except ValueError:
            raise UsageError(f"--pin value for {name!r} is not a number") from None
    return out


# --- subcommands ---------------------------------------------------------------------------------


def cmd_simulate(s: dict) -> list[str]:
    sir = sir_from_settings(s)
    alpha = s["alpha"]
    if alpha is None and sir.rho > 0:
        alpha = K.DEFAULT_ALPHA
    cfg = SimConfig(sir, int(s["seed"]), int(s["max_events"]), s["horizon"])
    reals = simulate_many(cfg, int(s["runs"]), alpha, s["jobs"])
    save_realizations(reals, s["output"])
    return [s["output"]]


def _load_nonempty(path) -> list[Cascade]:
    if path is None:
        raise UsageError("--input is required")
    cascades = load_cascades(path)
    if not cascades:
        raise InsufficientDataError(f"{path}: no cascades found")
    return cascades


def _observed(c: Cascade, s: dict) -> tuple[Cascade, float | None]:
    if s.get("horizon") is not None:
        return c.until(s["horizon"]), float(s["horizon"])
    if s.get("train_fraction") is not None:
        return c.head(L.split_index(len(c), s["train_fraction"])), None
    return c, None


def _fit_one(cfg: FitConfig, item) -> FitResult | str:
    c, upto = item
    try:
        return fit_cascade(c, cfg, upto)
    except InsufficientDataError as e:
        return str(e)


def _summary_rows(fit: FitResult):
    k = fit.params.kernel
    for cid in fit.cascade_ids:
        yield [cid, k.family.value, k.kappa, k.theta, k.c, fit.params.N, fit.params.rho, fit.neg_loglik, fit.branching_factor, fit.converged]


SUMMARY_HEADER = ["cascade_id", "family", "kappa", "theta", "c", "N", "rho", "nll", "n_star", "converged"]


def cmd_fit(s: dict) -> list[str]:
    cascades = _load_nonempty(s["input"])
    if s["train_fraction"] is not None and s["horizon"] is not None:
        raise UsageError("use either --train-fraction or --horizon")
    observed = [_observed(c, s) for c in cascades]
    pinned = _parse_pins(s["pin"])
    base = dict(family=s["family"], marked=bool(s["marked"]), restarts=int(s["restarts"]), pinned=pinned, seed=int(s["seed"]))
    if s["group"]:
        fits = [fit_joint([c for c, _ in observed], FitConfig(**base, jobs=s["jobs"]), [u for _, u in observed])]
    else:
        results = pmap(partial(_fit_one, FitConfig(**base)), observed, s["jobs"])
        fits = []
        for (c, _), r in zip(observed, results):
            if isinstance(r, str):
                warnings.warn(f"skipping cascade {c.id!r}: {r}", stacklevel=1)
            else:
                fits.append(r)
        if not fits:
            raise InsufficientDataError("no cascade had enough events to fit")
    summary = s["summary"] or _derived(s["output"], "_summary.csv")
    with open(s["output"], "w", encoding="utf-8") as fh:
        for f in fits:
            fh.write(json.dumps(f.to_dict(), sort_keys=True) + "\n")
    write_csv(summary, SUMMARY_HEADER, (row for f in fits for row in _summary_rows(f)))
    return [s["output"], summary]


def load_fits(path) -> dict[str, FitResult]:
    """Fits keyed by cascade id; a group fit applies to all its members."""
    out: dict[str, FitResult] = {}
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                fit = FitResult.from_dict(json.loads(line))
            except (KeyError, TypeError, json.JSONDecodeError) as e:
                raise UsageError(f"{path}:{n}: not a fit record ({e})") from None
            for cid in fit.cascade_ids:
                out[cid] = fit
    return out


def _fit_sets(s: dict) -> list[dict[str, FitResult]]:
    fits = s["fits"]
    if isinstance(fits, str):
        fits = [fits]
    if not fits:
        raise UsageError("--fits is required")
    return [load_fits(p) for p in fits]


def _model_of(fits: dict[str, FitResult]) -> str:
    return next(iter(fits.values())).model if fits else "?"


def _gof_row(item):
    c, fit = item
    try:
        taus = G.rescale(fit.params, c)
        return G.gof_report(taus)
    except G.InsufficientSampleError as e:
        return str(e)


GOF_HEADER = ["cascade_id", "model", "n", "ks_D", "ks_p", "ed_p", "lb_p", "pass_ks", "pass_ed", "pass_lb"]
COMPARE_HEADER = ["cascade_id", "model_a", "model_b", "ks_D_a", "ks_D_b", "result"]


def cmd_gof(s: dict) -> list[str]:
    cascades = _load_nonempty(s["input"])
    sets = _fit_sets(s)
    reports: list[dict[str, G.GofReport]] = []
    rows = []
    for fits in sets:
        work = [(c, fits[c.id]) for c in cascades if c.id in fits]
        res = pmap(_gof_row, work, s["jobs"])
        by_id = {}
        for (c, fit), r in zip(work, res):
            if isinstance(r, str):
                warnings.warn(f"skipping cascade {c.id!r}: {r}", stacklevel=1)
                continue
            by_id[c.id] = r
            ok = r.pass_at(s["level"])
            rows.append([c.id, fit.model, r.n, r.ks_D, r.ks_p, r.ed_p, r.lb_p, ok["ks"], ok["ed"], ok["lb"]])
        reports.append(by_id)
    if not rows:
        raise InsufficientDataError("no cascade matched a fit with enough events to test")
    write_csv(s["output"], GOF_HEADER, rows)
    outputs = [s["output"]]
    if len(sets) >= 2:
        path = s["compare_output"] or _derived(s["output"], "_compare.csv")
        ma, mb = _model_of(sets[0]), _model_of(sets[1])
        crow = []
        for c in cascades:
            a, b = reports[0].get(c.id), reports[1].get(c.id)
            if a is not None and b is not None:
                crow.append([c.id, ma, mb, a.ks_D, b.ks_D, G.compare_models(a, b, s["min_gap"]).value])
        write_csv(path, COMPARE_HEADER, crow)
        outputs.append(path)
    return outputs


def cmd_holdout(s: dict) -> list[str]:
    cascades = _load_nonempty(s["input"])
    rows = []
    for fits in _fit_sets(s):
        for c in cascades:
            fit = fits.get(c.id)
            if fit is None:
                continue
            try:
                v = L.holdout_loglik(fit.params, c, s["split"])
            except ValueError as e:
                warnings.warn(f"skipping cascade {c.id!r}: {e}", stacklevel=1)
                continue
            rows.append([c.id, fit.model, s["split"], v.n_events, -v.per_event])
    if not rows:
        raise InsufficientDataError("no cascade could be split and scored")
    write_csv(s["output"], ["cascade_id", "model", "split", "n_holdout", "neg_loglik_per_event"], rows)
    return [s["output"]]


PREDICT_HEADER = ["cascade_id", "model", "C_t", "N_hat", "sigma", "C_inf_hat", "C_inf_true", "are"]


def cmd_predict(s: dict) -> tuple[list[str], dict]:
    cascades = _load_nonempty(s["input"])
    by_id = {c.id: c for c in cascades}
    cv = P.CvConfig(folds=int(s["folds"]), train_folds=int(s["train_folds"]), seed=int(s["seed"]))
    horizon = float(s["horizon"])
    rows, feats_out = [], []
    per_model: dict[str, dict[str, float]] = {}
    C_t_of: dict[str, int] = {}
    for fits in _fit_sets(s):
        feats = []
        for c in cascades:
            if c.id in fits:
                f = P.extract_features(fits[c.id], c, horizon)
                if f is not None:
                    feats.append((f, fits[c.id]))
        if not feats:
            continue
        model = feats[0][0].model
        X = P.feature_matrix([f for f, _ in feats])
        C_t = np.array([f.C_t for f, _ in feats], dtype=float)
        N_hat = np.array([fit.params.N for _, fit in feats])
        C_inf = np.array([len(by_id[f.cascade_id]) for f, _ in feats], dtype=float)
        res = P.cross_validate(X, C_t, N_hat, C_inf, cv)
        preds = per_model.setdefault(model, {})
        for i, (f, _) in enumerate(feats):
            preds[f.cascade_id] = res.C_inf_hat[i]
            C_t_of[f.cascade_id] = f.C_t
            rows.append([f.cascade_id, model, f.C_t, N_hat[i], res.sigma_hat[i], res.C_inf_hat[i], int(C_inf[i]), res.are[i]])
            feats_out.append((f, N_hat[i], int(C_inf[i])))
    if not rows:
        raise InsufficientDataError("no cascade matched a usable fit")
    if len(per_model) >= 2:
        common = set.intersection(*(set(p) for p in per_model.values()))
        for c in cascades:
            if c.id in common:
                hat = P.combine_predictions([p[c.id] for p in per_model.values()])
                rows.append([c.id, "COMBINED", C_t_of[c.id], None, None, hat, len(c), P.are(hat, len(c))])
    write_csv(s["output"], PREDICT_HEADER, rows)
    table_path = s["are_table"] or _derived(s["output"], "_are_table.csv")
    table = are_table(rows)
    write_csv(table_path, ["model", "n", "median_are", "mean_are"], table)
    outputs = [s["output"], table_path]
    if s["export_features"]:
        names: list[str] = []
        for f, _, _ in feats_out:
            names += [n for n in f.names if n not in names]
        header = ["cascade_id", "model", *names, "C_t", "t_obs", "C_inf_true", "sigma_target"]
        frows = []
        for f, N_hat_i, C_inf_i in feats_out:
            vals = dict(zip(f.names, f.values))
            frows.append([f.cascade_id, f.model, *[vals.get(n) for n in names], f.C_t, f.t_obs, C_inf_i,
                          float(P.sigma_target(C_inf_i, f.C_t, N_hat_i))])
        write_csv(s["export_features"], header, frows)
        outputs.append(s["export_features"])
    return outputs, {"are_table": [dict(zip(["model", "n", "median_are", "mean_are"], r)) for r in table]}


def are_table(rows) -> list[list]:
    """Median and mean ARE per model, plus the ``C_inf_hat = C_t`` baseline."""
    models: dict[str, list[float]] = {}
    base: dict[str, float] = {}
    for cid, model, C_t, _, _, _, C_inf, a in rows:
        models.setdefault(model, []).append(a)
        base[cid] = P.are(C_t, C_inf)
    out = [[m, len(v), float(np.median(v)), float(np.mean(v))] for m, v in models.items()]
    b = list(base.values())
    out.append(["BASELINE", len(b), float(np.median(b)), float(np.mean(b))])
    return out


def cmd_convert(s: dict) -> tuple[list[str], dict]:
    family = K.Family.parse(s["family"])
    theta = _recovery_theta(s)
    if theta is None:
        raise UsageError("--theta (or --gamma) is required")
    if s["to"] == "sir":
        if s["kappa"] is None:
            raise UsageError("--kappa is required for --to sir")
        spec = K.KernelSpec(family, s["kappa"], theta, s["c"])
        beta = K.phi0(spec)
        if family is K.Family.EXP:
            out = {"beta": _round(beta), "gamma": _round(theta)}
        else:
            out = {"beta": _round(beta), "family": family.value, "theta": _round(theta)}
            if spec.c is not None:
                out["c"] = _round(spec.c)
    else:
        if s["beta"] is None:
            raise UsageError("--beta is required for --to kernel")
        spec = K.to_kernel(K.RecoveryDistribution(family, theta, s["c"]), s["beta"])
        out = {k: (_round(v) if isinstance(v, float) else v) for k, v in spec.to_dict().items()}
    text = json.dumps(out, separators=(",", ":"))
    print(text)
    if s["output"]:
        Path(s["output"]).write_text(text + "\n", encoding="utf-8")
        return [s["output"]], {}
    return [], {}


def cmd_size_dist(s: dict) -> list[str]:
    sir = sir_from_settings(s)
    dist = size_distribution(sir, int(s["runs"]), int(s["seed"]), jobs=s["jobs"])
    cdf = dist.cdf()
    pmf = dist.pmf(smoothed=False)
    write_csv(s["output"], ["size", "count", "cdf", "pmf"], zip(dist.support, dist.counts, cdf, pmf))
    return [s["output"]]


COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "gof": cmd_gof,
    "holdout": cmd_holdout,
    "predict": cmd_predict,
    "convert": cmd_convert,
    "size-dist": cmd_size_dist,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
        command = ns.command
        settings = _settings(command, ns)
        started = _now()
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            warnings.showwarning = lambda msg, *a, **k: print(f"warning: {msg}", file=sys.stderr)
            result = COMMANDS[command](settings)
        outputs, extra = result if isinstance(result, tuple) else (result, {})
        if outputs:
            write_manifest(outputs[0], command, settings, started, outputs, extra)
        return 0
    except SystemExit as e:  # --help / --version
        return int(e.code or 0)
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (ValueError, ArithmeticError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
