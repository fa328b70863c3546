"""One-hidden-layer perceptron trained by scaled conjugate gradient.

Hidden units are tanh. The output layer is logistic for autoencoders (data
lives in [0, 1]) or linear for regressing unbounded targets such as PCA
projections. Training minimises the sum of squared errors over the full
batch and keeps the weights with the best validation RMSE.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from ._random import substream
from .exceptions import DataError, DivergenceError

logger = logging.getLogger(__name__)

OUTPUTS = ("sigmoid", "linear")


@dataclass
class MlpModel:
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    output: str = "sigmoid"

    @property
    def layer_sizes(self) -> tuple[int, int, int]:
        return self.W1.shape[0], self.W1.shape[1], self.W2.shape[1]

    def flat(self) -> np.ndarray:
        return np.concatenate([self.W1.ravel(), self.b1, self.W2.ravel(), self.b2])

    @classmethod
    def from_flat(cls, sizes, w, output="sigmoid") -> "MlpModel":
        n, h, o = sizes
        w = np.asarray(w, dtype=float)
        if w.size != n * h + h + h * o + o:
            raise DataError(f"weight vector of length {w.size} does not fit sizes {sizes}")
        a, b, c = n * h, n * h + h, n * h + h + h * o
        return cls(w[:a].reshape(n, h).copy(), w[a:b].copy(),
                   w[b:c].reshape(h, o).copy(), w[c:].copy(), output)

    def copy(self) -> "MlpModel":
        return MlpModel.from_flat(self.layer_sizes, self.flat(), self.output)

    def to_text(self) -> str:
        lines = ["mlp v1", "sizes " + " ".join(str(s) for s in self.layer_sizes),
                 f"output {self.output}"]
        lines += [f"{v:.17g}" for v in self.flat()]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "MlpModel":
        lines = text.split()
        if lines[:2] != ["mlp", "v1"] or lines[2] != "sizes" or lines[6] != "output":
            raise DataError("not an mlp v1 file")
        sizes = tuple(int(s) for s in lines[3:6])
        return cls.from_flat(sizes, np.array([float(v) for v in lines[8:]]), lines[7])


def init_model(layer_sizes, seed=0, output="sigmoid") -> MlpModel:
    n, h, o = layer_sizes
    if min(layer_sizes) < 1:
        raise DataError(f"layer sizes must be positive, got {layer_sizes}")
    if output not in OUTPUTS:
        raise DataError(f"output must be one of {OUTPUTS}")
    rng = substream(seed, "init")
    return MlpModel(rng.standard_normal((n, h)) / np.sqrt(n),
                    rng.standard_normal(h) / np.sqrt(n),
                    rng.standard_normal((h, o)) / np.sqrt(h),
                    rng.standard_normal(o) / np.sqrt(h),
                    output)


def _sigmoid(a):
    return 0.5 * (1.0 + np.tanh(0.5 * a))


def _forward(m: MlpModel, X):
    z = np.tanh(X @ m.W1 + m.b1)
    a = z @ m.W2 + m.b2
    return z, (_sigmoid(a) if m.output == "sigmoid" else a)


def forward(m: MlpModel, x) -> np.ndarray:
    """Network output for one input vector or a batch of rows."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != m.W1.shape[0]:
        raise DataError(f"input length {x.shape[-1]} != {m.W1.shape[0]}")
    return _forward(m, x)[1]


def loss_and_gradient(m: MlpModel, X, T):
    """Sum of squared errors over the batch and its gradient as an MlpModel."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    T = np.atleast_2d(np.asarray(T, dtype=float))
    if X.shape[0] != T.shape[0] or X.shape[1] != m.W1.shape[0] or T.shape[1] != m.W2.shape[1]:
        raise DataError(f"shape mismatch: X {X.shape}, T {T.shape}, net {m.layer_sizes}")
    z, y = _forward(m, X)
    diff = y - T
    sse = float((diff ** 2).sum())
    delta_out = 2.0 * diff
    if m.output == "sigmoid":
        delta_out = delta_out * y * (1.0 - y)
    delta_hid = (delta_out @ m.W2.T) * (1.0 - z ** 2)
    grad = MlpModel(X.T @ delta_hid, delta_hid.sum(axis=0),
                    z.T @ delta_out, delta_out.sum(axis=0), m.output)
    return sse, grad


def rmse(m: MlpModel, X, T) -> float:
    T = np.atleast_2d(T)
    return float(np.sqrt(((forward(m, X) - T) ** 2).sum() / T.size))


@dataclass(frozen=True)
class TrainConfig:
    max_cycles: int = 110
    early_stop_patience: int = 20
    sigma0: float = 1e-4
    lambda0: float = 1e-6
    max_failures: int = 50

    def __post_init__(self):
        if self.max_cycles < 1 or self.early_stop_patience < 1:
            raise DataError("max_cycles and early_stop_patience must be >= 1")


@dataclass
class TrainReport:
    """Per-cycle curves; index 0 holds the initial weights' errors."""
    train_rmse: list[float] = field(default_factory=list)
    validation_rmse: list[float] = field(default_factory=list)
    stopped_at: int = 0
    best_cycle: int = 0

    @property
    def best_validation(self) -> float:
        return min(self.validation_rmse)

    def to_text(self) -> str:
        lines = [f"stopped_at {self.stopped_at}", f"best_cycle {self.best_cycle}",
                 f"best_validation {self.best_validation:.17g}", "cycle train_rmse validation_rmse"]
        lines += [f"{i} {a:.17g} {b:.17g}"
                  for i, (a, b) in enumerate(zip(self.train_rmse, self.validation_rmse))]
        return "\n".join(lines) + "\n"


def train_scg(m: MlpModel, train, validation, cfg: TrainConfig = TrainConfig()):
    """Full-batch scaled conjugate gradient with early stopping.

    A cycle is one accepted weight update; rejected trial steps only raise the
    damping term. Returns ``(best_model, TrainReport)``.
    """
    X, T = (np.atleast_2d(np.asarray(a, dtype=float)) for a in train)
    Xv, Tv = (np.atleast_2d(np.asarray(a, dtype=float)) for a in validation)
    sizes, output = m.layer_sizes, m.output

    def f(w):
        sse, _ = loss_and_gradient(MlpModel.from_flat(sizes, w, output), X, T)
        return sse

    def fg(w):
        sse, g = loss_and_gradient(MlpModel.from_flat(sizes, w, output), X, T)
        if not np.isfinite(sse):
            raise DivergenceError(f"non-finite training loss {sse}")
        return sse, g.flat()

    def val_rmse(w):
        return rmse(MlpModel.from_flat(sizes, w, output), Xv, Tv)

    w = m.flat()
    n_w = w.size
    e, g = fg(w)
    r = -g
    p = r.copy()
    lam, lam_bar = cfg.lambda0, 0.0
    success = True
    delta = 0.0
    n_out = T.size

    report = TrainReport([float(np.sqrt(e / n_out))], [val_rmse(w)])
    best_w, best_val, since_best = w.copy(), report.validation_rmse[0], 0
    k = 0
    for cycle in range(1, cfg.max_cycles + 1):
        accepted = False
        failures = 0
        while not accepted:
            p2 = float(p @ p)
            if p2 < 1e-30:
                break
            if success:
                sigma = cfg.sigma0 / np.sqrt(p2)
                _, g_sig = fg(w + sigma * p)
                s = (g_sig - g) / sigma
                delta = float(p @ s)
            delta += (lam - lam_bar) * p2
            if delta <= 0:
                lam_bar = 2.0 * (lam - delta / p2)
                delta = -delta + lam * p2
                lam = lam_bar
            mu = float(p @ r)
            alpha = mu / delta
            e_new = f(w + alpha * p)
            if not np.isfinite(e_new):
                comparison = -1.0
            else:
                comparison = 2.0 * delta * (e - e_new) / (mu * mu) if mu != 0 else -1.0
            if comparison >= 0:
                w = w + alpha * p
                e, g = fg(w)
                r_new = -g
                lam_bar = 0.0
                success = accepted = True
                k += 1
                if k % n_w == 0:
                    p = r_new.copy()
                else:
                    beta = (float(r_new @ r_new) - float(r_new @ r)) / mu
                    p = r_new + beta * p
                r = r_new
                if comparison >= 0.75:
                    lam = 0.25 * lam
            else:
                lam_bar = lam
                success = False
                failures += 1
            if comparison < 0.25:
                lam = lam + delta * (1.0 - comparison) / p2
            if not accepted and failures >= cfg.max_failures:
                break
        if not accepted:
            logger.debug("scg: no further progress at cycle %d", cycle)
            break
        report.train_rmse.append(float(np.sqrt(e / n_out)))
        v = val_rmse(w)
        report.validation_rmse.append(v)
        report.stopped_at = cycle
        if v < best_val:
            best_w, best_val, since_best = w.copy(), v, 0
            report.best_cycle = cycle
        else:
            since_best += 1
            if since_best >= cfg.early_stop_patience:
                break
    return MlpModel.from_flat(sizes, best_w, output), report


class SCGNetwork(RegressorMixin, BaseEstimator):
    """Estimator wrapper around :func:`train_scg`.

    ``fit(X, Y, X_val=None, Y_val=None)``; without a validation set the
    training data doubles as one.
    """

    def __init__(self, hidden=11, output="sigmoid", max_cycles=110, patience=20,
                 sigma0=1e-4, lambda0=1e-6, random_state=0):
        self.hidden = hidden
        self.output = output
        self.max_cycles = max_cycles
        self.patience = patience
        self.sigma0 = sigma0
        self.lambda0 = lambda0
        self.random_state = random_state

    def fit(self, X, Y, X_val=None, Y_val=None):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        Y = np.asarray(Y, dtype=float)
        Y = Y[:, None] if Y.ndim == 1 else Y
        if not (np.isfinite(X).all() and np.isfinite(Y).all()):
            raise DataError("training data must be complete and finite")
        if X_val is None:
            X_val, Y_val = X, Y
        Y_val = np.asarray(Y_val, dtype=float)
        Y_val = Y_val[:, None] if Y_val.ndim == 1 else Y_val
        m = init_model((X.shape[1], self.hidden, Y.shape[1]), self.random_state, self.output)
        cfg = TrainConfig(self.max_cycles, self.patience, self.sigma0, self.lambda0)
        self.model_, self.report_ = train_scg(m, (X, Y), (X_val, Y_val), cfg)
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        return forward(self.model_, np.asarray(X, dtype=float))


def sweep_hidden_nodes(X, Y, candidates, cycles, seed=0, output="sigmoid", autoencoder=True):
    """Train one network per hidden size for a fixed cycle budget.

    Returns ``(table, best)`` where ``table`` is a list of ``(H, train RMSE)``
    and ``best`` the H with the lowest RMSE (ties to the smaller H).
    """
    candidates = list(candidates)
    if not candidates:
        raise DataError("no hidden-node candidates")
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if autoencoder and any(h >= X.shape[1] for h in candidates):
        raise DataError("autoencoder hidden sizes must be smaller than the input size")
    table = []
    cfg = TrainConfig(max_cycles=cycles, early_stop_patience=cycles + 1)
    for h in candidates:
        m = init_model((X.shape[1], h, np.atleast_2d(Y).shape[1]), seed, output)
        m, _ = train_scg(m, (X, Y), (X, Y), cfg)
        table.append((int(h), rmse(m, X, Y)))
    best = min(table, key=lambda t: (t[1], t[0]))[0]
    return table, best
