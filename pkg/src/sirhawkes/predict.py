"""Final-size prediction from fitted finite-population models.

A fitted model gives a population estimate ``N_hat``; the final size is
predicted as ``C_t + sigma * (N_hat - C_t)`` where ``sigma``, the share of
the remaining population eventually reached, is learned by a small boosted
tree regressor from the fitted parameters.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .cascades import Cascade
from .fit import FitResult
from .kernels import Family

SIGMA_CAP = 50.0
DEFAULT_WINDOW = 3600.0


@dataclass(frozen=True)
class PredictionFeatures:
    """Parameter features of one fitted model, plus the observation state.

    ``values`` follows ``names``: the SIR-view parameters
    (``beta, theta[, c], rho, N``) then the branching factor ``n_star``.
    """

    cascade_id: str
    model: str
    names: tuple[str, ...]
    values: np.ndarray
    C_t: int
    t_obs: float


def feature_names(family: Family | str) -> tuple[str, ...]:
    family = Family.parse(family)
    gamma = "gamma" if family is Family.EXP else "theta"
    extra = ("c",) if family is Family.POWERLAW else ()
    return ("beta", gamma) + extra + ("rho", "N", "n_star")


def extract_features(fit: FitResult, cascade: Cascade, t_obs: float) -> PredictionFeatures | None:
    """Feature row for ``fit`` observed up to ``t_obs``.

    Returns ``None`` (with a warning) when a parameter is not finite.
    """
    spec = fit.params.kernel
    sir = fit.sir_view
    vals = [sir.beta, spec.theta]
    if spec.family is Family.POWERLAW:
        vals.append(spec.c)
    vals += [fit.params.rho, fit.params.N, fit.branching_factor]
    vals = np.asarray(vals, dtype=float)
    if not np.all(np.isfinite(vals)):
        warnings.warn(f"dropping cascade {cascade.id!r}: non-finite fitted parameters", stacklevel=2)
        return None
    C_t = int(np.count_nonzero(cascade.times <= t_obs))
    return PredictionFeatures(cascade.id, fit.model, feature_names(spec.family), vals, C_t, float(t_obs))


def predict_size(sigma: float, C_t: int, N: float) -> float:
    if C_t < 1:
        raise ValueError("C_t must be >= 1")
    return C_t + sigma * (N - C_t)


def are(predicted: float, true_size: int) -> float:
    if true_size < 1:
        raise ValueError("true_size must be >= 1")
    return abs(predicted - true_size) / true_size


def combine_predictions(preds) -> float:
    preds = [float(p) for p in preds]
    if len(preds) < 2:
        raise ValueError("combining needs at least 2 predictions")
    return float(np.mean(preds))


def sigma_target(C_inf, C_t, N_hat, cap: float = SIGMA_CAP):
    """``(C_inf - C_t) / max(N_hat - C_t, 1)``, capped at ``cap``."""
    C_inf, C_t, N_hat = (np.asarray(a, dtype=float) for a in (C_inf, C_t, N_hat))
    out = (C_inf - C_t) / np.maximum(N_hat - C_t, 1.0)
    return np.minimum(out, cap)


# --- gradient boosted depth-limited trees ----------------------------------------


@dataclass
class _Node:
    value: float
    feature: int = -1
    threshold: float = 0.0
    left: "_Node | None" = None
    right: "_Node | None" = None

    def predict(self, X: np.ndarray) -> np.ndarray:
        if self.feature < 0:
            return np.full(len(X), self.value)
        out = np.empty(len(X))
        go_left = X[:, self.feature] <= self.threshold
        out[go_left] = self.left.predict(X[go_left])
        out[~go_left] = self.right.predict(X[~go_left])
        return out


def _best_split(X: np.ndarray, r: np.ndarray, min_leaf: int):
    """Split maximising the reduction in squared error, or ``None``."""
    n = len(r)
    total = r.sum()
    best_gain, best = 1e-12 * max(1.0, float(np.dot(r, r))), None
    for j in range(X.shape[1]):
        order = np.argsort(X[:, j], kind="stable")
        xs, rs = X[order, j], r[order]
        cs = np.cumsum(rs)[:-1]
        nl = np.arange(1, n)
        valid = (xs[1:] > xs[:-1]) & (nl >= min_leaf) & (n - nl >= min_leaf)
        if not valid.any():
            continue
        gain = cs**2 / nl + (total - cs) ** 2 / (n - nl) - total**2 / n
        gain = np.where(valid, gain, -np.inf)
        i = int(np.argmax(gain))
        if gain[i] > best_gain:
            best_gain = gain[i]
            best = (j, 0.5 * (xs[i] + xs[i + 1]))
    return best


def _grow(X: np.ndarray, r: np.ndarray, depth: int, min_leaf: int) -> _Node:
    node = _Node(float(r.mean()))
    if depth == 0 or len(r) < 2 * min_leaf:
        return node
    split = _best_split(X, r, min_leaf)
    if split is None:
        return node
    node.feature, node.threshold = split
    mask = X[:, node.feature] <= node.threshold
    node.left = _grow(X[mask], r[mask], depth - 1, min_leaf)
    node.right = _grow(X[~mask], r[~mask], depth - 1, min_leaf)
    return node


@dataclass(frozen=True)
class GbmConfig:
    rounds: int = 200
    learning_rate: float = 0.1
    depth: int = 2
    min_leaf: int = 5


@dataclass
class SigmaModel:
    """Boosted regression trees on squared error."""

    config: GbmConfig
    base: float
    trees: list[_Node] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def predict(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = np.full(len(X), self.base)
        for t in self.trees:
            out += self.config.learning_rate * t.predict(X)
        return out


def fit_gbm(X, y, config: GbmConfig = GbmConfig()) -> SigmaModel:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    model = SigmaModel(config, float(y.mean()))
    pred = np.full(len(y), model.base)
    for _ in range(config.rounds):
        r = y - pred
        if not np.any(np.abs(r) > 1e-12 * max(1.0, abs(model.base))):
            break
        tree = _grow(X, r, config.depth, config.min_leaf)
        model.trees.append(tree)
        pred += config.learning_rate * tree.predict(X)
    return model


# --- cross validation ----------------------------------------------------------------


@dataclass(frozen=True)
class CvConfig:
    folds: int = 10
    train_folds: int = 4
    seed: int = 0
    gbm: GbmConfig = GbmConfig()


@dataclass
class CvResult:
    """Per-rotation test AREs and out-of-fold predictions.

    Rotation ``i`` trains on folds ``i, ..., i + train_folds - 1`` (mod
    ``folds``) and tests on the rest. Each row is tested in several
    rotations; ``C_inf_hat`` is the mean of its test predictions.
    """

    folds: np.ndarray
    fold_are: list[np.ndarray]
    sigma_hat: np.ndarray
    C_inf_hat: np.ndarray
    are: np.ndarray


def fold_assignment(n: int, folds: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(7,)))
    return rng.permutation(np.arange(n) % folds)


def train_sigma(X, C_t, N_hat, C_inf, config: GbmConfig = GbmConfig()) -> SigmaModel:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if len(X) < 20:
        raise ValueError("training needs at least 20 cascades")
    return fit_gbm(X, sigma_target(C_inf, C_t, N_hat), config)


def cross_validate(X, C_t, N_hat, C_inf, cv: CvConfig = CvConfig()) -> CvResult:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    C_t, N_hat, C_inf = (np.asarray(a, dtype=float) for a in (C_t, N_hat, C_inf))
    n = len(X)
    if not 1 <= cv.train_folds < cv.folds:
        raise ValueError("train_folds must lie in [1, folds)")
    folds = fold_assignment(n, cv.folds, cv.seed)
    sig_sum, sig_cnt = np.zeros(n), np.zeros(n)
    fold_are = []
    for i in range(cv.folds):
        train_ids = [(i + k) % cv.folds for k in range(cv.train_folds)]
        tr = np.isin(folds, train_ids)
        te = ~tr
        model = train_sigma(X[tr], C_t[tr], N_hat[tr], C_inf[tr], cv.gbm)
        s = model.predict(X[te])
        pred = C_t[te] + s * (N_hat[te] - C_t[te])
        fold_are.append(np.abs(pred - C_inf[te]) / C_inf[te])
        sig_sum[te] += s
        sig_cnt[te] += 1
    sigma_hat = sig_sum / np.maximum(sig_cnt, 1)
    C_hat = C_t + sigma_hat * (N_hat - C_t)
    return CvResult(folds, fold_are, sigma_hat, C_hat, np.abs(C_hat - C_inf) / C_inf)


def baseline_are(C_t, C_inf) -> np.ndarray:
    """ARE of the no-growth prediction ``C_inf_hat = C_t``."""
    C_t, C_inf = np.asarray(C_t, dtype=float), np.asarray(C_inf, dtype=float)
    return np.abs(C_t - C_inf) / C_inf


def feature_matrix(rows: list[PredictionFeatures]) -> np.ndarray:
    return np.vstack([r.values for r in rows])

