"""One-hidden-layer Bayesian neural network regression posterior.

Model (all in standardized data space):

    y ~ N(w2 . relu(W1^T x + b1) + b2, 1/gamma)
    W1, b1, w2, b2 ~ N(0, 1/lam)        elementwise
    gamma, lam ~ Gamma(shape=1, rate=0.1)

The precisions are parametrized in log space for unconstrained dynamics, so
the prior terms carry the +log(gamma) and +log(lam) change-of-variable
corrections.  Gradients are computed by hand-written backpropagation; the
ReLU subgradient at the kink takes the zero branch.

Parameter vectors flatten in the fixed order
``W1 (row-major, d_in x hidden), b1, w2, b2, log_gamma, log_lambda``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .targets import TargetDensity

Array = np.ndarray

HIDDEN_DEFAULT = 50
GAMMA_SHAPE = 1.0
GAMMA_RATE = 0.1
_LOG_2PI = float(np.log(2.0 * np.pi))
_STD_FLOOR = 1e-8


def param_dim(d_in: int, hidden: int = HIDDEN_DEFAULT) -> int:
    return d_in * hidden + hidden + hidden + 1 + 2


def unflatten_params(vec: Array, d_in: int, hidden: int = HIDDEN_DEFAULT):
    """Split a flat vector into (W1, b1, w2, b2, log_gamma, log_lambda)."""
    vec = np.asarray(vec, dtype=float)
    if vec.shape != (param_dim(d_in, hidden),):
        raise ValueError(
            f"parameter vector has shape {vec.shape}, expected "
            f"({param_dim(d_in, hidden)},)")
    k = 0
    w1 = vec[k:k + d_in * hidden].reshape(d_in, hidden)
    k += d_in * hidden
    b1 = vec[k:k + hidden]
    k += hidden
    w2 = vec[k:k + hidden]
    k += hidden
    b2 = vec[k]
    log_gamma = vec[k + 1]
    log_lambda = vec[k + 2]
    return w1, b1, w2, b2, log_gamma, log_lambda


def flatten_params(w1: Array, b1: Array, w2: Array, b2: float,
                   log_gamma: float, log_lambda: float) -> Array:
    """Inverse of :func:`unflatten_params` (bitwise round-trip)."""
    return np.concatenate([
        np.asarray(w1, dtype=float).reshape(-1),
        np.asarray(b1, dtype=float),
        np.asarray(w2, dtype=float),
        np.array([b2, log_gamma, log_lambda], dtype=float),
    ])


def init_params(rng: np.random.Generator, d_in: int,
                hidden: int = HIDDEN_DEFAULT) -> Array:
    """Glorot-normal weights (variance 2/(fan_in+fan_out)), zero biases,
    log precisions at zero."""
    w1 = rng.standard_normal((d_in, hidden)) * np.sqrt(2.0 / (d_in + hidden))
    w2 = rng.standard_normal(hidden) * np.sqrt(2.0 / (hidden + 1))
    return flatten_params(w1, np.zeros(hidden), w2, 0.0, 0.0, 0.0)


def _forward(w1, b1, w2, b2, X: Array):
    z = X @ w1 + b1
    a = np.maximum(z, 0.0)
    return z, a, a @ w2 + b2


def log_prior(vec: Array, d_in: int, hidden: int = HIDDEN_DEFAULT) -> float:
    """Log prior of the flattened parameters (including all constants)."""
    w1, b1, w2, b2, lg, ll = unflatten_params(vec, d_in, hidden)
    lam = np.exp(ll)
    gamma = np.exp(lg)
    weights_sq = float(np.sum(w1 ** 2) + np.sum(b1 ** 2) + np.sum(w2 ** 2) + b2 ** 2)
    n_w = d_in * hidden + hidden + hidden + 1
    out = 0.5 * n_w * (ll - _LOG_2PI) - 0.5 * lam * weights_sq
    # Gamma(1, 0.1) on gamma and lam, in log space (+log Jacobians).
    out += np.log(GAMMA_RATE) - GAMMA_RATE * gamma + lg
    out += np.log(GAMMA_RATE) - GAMMA_RATE * lam + ll
    return float(out)


def grad_log_prior(vec: Array, d_in: int, hidden: int = HIDDEN_DEFAULT) -> Array:
    """Gradient of :func:`log_prior` in the flattened parametrization."""
    w1, b1, w2, b2, lg, ll = unflatten_params(vec, d_in, hidden)
    lam = np.exp(ll)
    gamma = np.exp(lg)
    weights_sq = float(np.sum(w1 ** 2) + np.sum(b1 ** 2) + np.sum(w2 ** 2) + b2 ** 2)
    n_w = d_in * hidden + hidden + hidden + 1
    g_lg = 1.0 - GAMMA_RATE * gamma
    g_ll = 0.5 * n_w - 0.5 * lam * weights_sq + 1.0 - GAMMA_RATE * lam
    return flatten_params(-lam * w1, -lam * b1, -lam * w2, -lam * b2, g_lg, g_ll)


# ---------------------------------------------------------------------------
# Datasets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Dataset:
    """Regression data with a train/test split and train-only standardization.

    ``features``/``targets`` are stored in original units; standardized
    views are derived from train-split statistics (std floored at 1e-8 so a
    constant column maps to zeros, never NaN).
    """

    features: Array
    targets: Array
    train_idx: Array
    test_idx: Array
    feat_mean: Array
    feat_std: Array
    targ_mean: float
    targ_std: float

    @property
    def d_in(self) -> int:
        return self.features.shape[1]

    @property
    def n_train(self) -> int:
        return self.train_idx.shape[0]

    @property
    def n_test(self) -> int:
        return self.test_idx.shape[0]

    def standardize_x(self, X: Array) -> Array:
        return (X - self.feat_mean) / self.feat_std

    @cached_property
    def x_train(self) -> Array:
        return self.standardize_x(self.features[self.train_idx])

    @cached_property
    def y_train(self) -> Array:
        return (self.targets[self.train_idx] - self.targ_mean) / self.targ_std

    @cached_property
    def x_test(self) -> Array:
        return self.standardize_x(self.features[self.test_idx])

    @cached_property
    def y_test(self) -> Array:
        return self.targets[self.test_idx]


def make_dataset(features: Array, targets: Array, seed: int,
                 test_frac: float = 0.1) -> Dataset:
    """Shuffle, split and standardize a regression table deterministically."""
    features = np.atleast_2d(np.asarray(features, dtype=float))
    targets = np.asarray(targets, dtype=float).reshape(-1)
    n = features.shape[0]
    if targets.shape[0] != n:
        raise ValueError("features and targets disagree on the number of rows")
    if n < 10:
        raise ValueError(f"need at least 10 rows, got {n}")
    if not 0.0 < test_frac < 1.0:
        raise ValueError("test_frac must lie in (0, 1)")
    perm = np.random.default_rng(seed).permutation(n)
    n_test = max(1, int(round(n * test_frac)))
    test_idx = np.sort(perm[:n_test])
    train_idx = np.sort(perm[n_test:])
    x_tr = features[train_idx]
    y_tr = targets[train_idx]
    feat_std = np.maximum(x_tr.std(axis=0), _STD_FLOOR)
    targ_std = max(float(y_tr.std()), _STD_FLOOR)
    return Dataset(features, targets, train_idx, test_idx,
                   x_tr.mean(axis=0), feat_std, float(y_tr.mean()), targ_std)


def load_regression_csv(path, seed: int, test_frac: float = 0.1) -> Dataset:
    """Load a numeric CSV (last column = target, optional header row).

    A cell that fails to parse raises a ValueError naming its row and
    column (1-based, header included in the row count).
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines:
        raise ValueError(f"{path}: empty file")

    def parse_row(line: str, row_no: int) -> list[float]:
        out = []
        for col_no, cell in enumerate(line.split(","), start=1):
            try:
                out.append(float(cell))
            except ValueError:
                raise ValueError(
                    f"{path}: unparsable cell at row {row_no}, column {col_no}: "
                    f"{cell!r}") from None
        return out

    start = 0
    try:
        first = parse_row(lines[0], 1)
    except ValueError:
        start = 1      # header row
        first = None
    rows = [first] if first is not None else []
    for i, line in enumerate(lines[start:], start=start + 1):
        rows.append(parse_row(line, i))
    width = len(rows[0])
    if width < 2:
        raise ValueError(f"{path}: need at least one feature column and a target")
    for i, row in enumerate(rows, start=start + 1):
        if len(row) != width:
            raise ValueError(f"{path}: row {i} has {len(row)} cells, expected {width}")
    table = np.asarray(rows, dtype=float)
    return make_dataset(table[:, :-1], table[:, -1], seed, test_frac)


# ---------------------------------------------------------------------------
# Posterior
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BNNPosterior:
    """Log posterior and gradient over the flattened network parameters.

    Minibatch evaluations rescale the batch log-likelihood by
    ``n_train / batch`` so the full-data posterior is estimated without bias.
    All evaluations run in standardized data space.
    """

    dataset: Dataset
    hidden: int = HIDDEN_DEFAULT

    @property
    def d_in(self) -> int:
        return self.dataset.d_in

    @property
    def dim(self) -> int:
        return param_dim(self.d_in, self.hidden)

    def _batch(self, idx):
        X = self.dataset.x_train
        y = self.dataset.y_train
        if idx is None:
            return X, y
        idx = np.asarray(idx, dtype=int)
        if idx.size == 0:
            raise ValueError("batch must be nonempty")
        return X[idx], y[idx]

    def log_posterior(self, vec: Array, idx=None) -> float:
        """Log prior plus the (rescaled) batch log-likelihood."""
        Xb, yb = self._batch(idx)
        w1, b1, w2, b2, lg, ll = unflatten_params(vec, self.d_in, self.hidden)
        gamma = np.exp(lg)
        _, _, m = _forward(w1, b1, w2, b2, Xb)
        resid = yb - m
        loglik = np.sum(0.5 * (lg - _LOG_2PI) - 0.5 * gamma * resid ** 2)
        scale = self.dataset.n_train / Xb.shape[0]
        return float(scale * loglik) + log_prior(vec, self.d_in, self.hidden)

    def grad_log_posterior(self, vec: Array, idx=None) -> Array:
        """Backpropagated gradient, same flattening order as the input."""
        Xb, yb = self._batch(idx)
        w1, b1, w2, b2, lg, ll = unflatten_params(vec, self.d_in, self.hidden)
        gamma = np.exp(lg)
        z, a, m = _forward(w1, b1, w2, b2, Xb)
        resid = yb - m
        scale = self.dataset.n_train / Xb.shape[0]

        dm = gamma * resid                          # dloglik/dm per point
        g_w2 = a.T @ dm
        g_b2 = float(np.sum(dm))
        dz = (dm[:, None] * w2[None, :]) * (z > 0)
        g_w1 = Xb.T @ dz
        g_b1 = dz.sum(axis=0)
        g_lg = float(np.sum(0.5 - 0.5 * gamma * resid ** 2))

        lik = scale * flatten_params(g_w1, g_b1, g_w2, g_b2, g_lg, 0.0)
        return lik + grad_log_prior(vec, self.d_in, self.hidden)

    def as_target(self, idx=None) -> TargetDensity:
        """View of this (mini)batch posterior as a sampling target."""

        def logp_fn(W: Array) -> Array:
            return np.array([self.log_posterior(w, idx) for w in W])

        def grad_fn(W: Array) -> Array:
            return np.stack([self.grad_log_posterior(w, idx) for w in W])

        return TargetDensity(self.dim, logp_fn, grad_fn, None, "bnn")


class MinibatchSchedule:
    """Without-replacement minibatch indices, reshuffled each epoch."""

    def __init__(self, n: int, batch: int | None, rng: np.random.Generator):
        self.n = n
        self.batch = None if not batch or batch >= n else int(batch)
        self._rng = rng
        self._perm: Array = np.empty(0, dtype=int)
        self._pos = 0

    def next(self):
        """Indices for the next iteration (None means the full batch)."""
        if self.batch is None:
            return None
        if self._pos + self.batch > self._perm.size:
            self._perm = self._rng.permutation(self.n)
            self._pos = 0
        out = self._perm[self._pos:self._pos + self.batch]
        self._pos += self.batch
        return out


# ---------------------------------------------------------------------------
# Prediction
# ---------------------------------------------------------------------------

def predict(theta: Array, x: Array, dataset: Dataset,
            hidden: int = HIDDEN_DEFAULT) -> tuple[Array, Array]:
    """Network outputs in original units for each parameter vector.

    Args:
        theta: (N, P) matrix of flattened parameter vectors.
        x: A single input (d_in,) or a batch (m, d_in), original units.

    Returns:
        ``(mean, per_particle)`` where per_particle has shape (N,) for a
        single input or (N, m) for a batch, and mean is its particle average.
    """
    theta = np.atleast_2d(np.asarray(theta, dtype=float))
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = x[None, :] if single else x
    if X.shape[1] != dataset.d_in:
        raise ValueError(f"input dim {X.shape[1]} != dataset dim {dataset.d_in}")
    Xs = dataset.standardize_x(X)
    preds = np.empty((theta.shape[0], X.shape[0]))
    for i, vec in enumerate(theta):
        w1, b1, w2, b2, _, _ = unflatten_params(vec, dataset.d_in, hidden)
        _, _, m = _forward(w1, b1, w2, b2, Xs)
        preds[i] = m * dataset.targ_std + dataset.targ_mean
    if single:
        preds = preds[:, 0]
    return preds.mean(axis=0), preds


def predictive_log_likelihood(theta: Array, dataset: Dataset,
                              hidden: int = HIDDEN_DEFAULT) -> float:
    """Mean test log density of the ensemble's predictive mixture.

    For each test point: ``log( (1/N) sum_i N(y | m_i, 1/gamma_i) )``,
    evaluated in standardized space and shifted by ``-log(targ_std)`` so the
    density lives in original units.
    """
    theta = np.atleast_2d(np.asarray(theta, dtype=float))
    if dataset.n_test == 0:
        raise ValueError("dataset has an empty test split")
    n = theta.shape[0]
    y_std = (dataset.y_test - dataset.targ_mean) / dataset.targ_std
    logp = np.empty((n, dataset.n_test))
    for i, vec in enumerate(theta):
        w1, b1, w2, b2, lg, _ = unflatten_params(vec, dataset.d_in, hidden)
        _, _, m = _forward(w1, b1, w2, b2, dataset.x_test)
        gamma = np.exp(lg)
        logp[i] = 0.5 * (lg - _LOG_2PI) - 0.5 * gamma * (y_std - m) ** 2
    mx = logp.max(axis=0)
    mix = mx + np.log(np.mean(np.exp(logp - mx[None, :]), axis=0))
    return float(np.mean(mix) - np.log(dataset.targ_std))
