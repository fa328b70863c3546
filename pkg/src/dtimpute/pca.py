"""Principal component analysis on centred data.

Per record the mapping is ``y = U.T @ (x - mean)`` with ``U`` the top-K
eigenvectors of the sample covariance (1/(M-1) normalisation).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import DataError


@dataclass
class PcaModel:
    mean: np.ndarray
    components: np.ndarray  # N x K, columns ordered by decreasing eigenvalue
    eigenvalues: np.ndarray  # K retained
    all_eigenvalues: np.ndarray  # N, for variance bookkeeping

    @property
    def n_components(self) -> int:
        return self.components.shape[1]

    @property
    def n_features(self) -> int:
        return self.components.shape[0]

    def to_text(self) -> str:
        n, k = self.components.shape
        lines = ["pca v1", f"shape {n} {k}",
                 "mean " + " ".join(f"{v:.17g}" for v in self.mean),
                 "eigenvalues " + " ".join(f"{v:.17g}" for v in self.all_eigenvalues)]
        lines += [" ".join(f"{v:.17g}" for v in row) for row in self.components]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "PcaModel":
        lines = text.splitlines()
        if not lines or lines[0] != "pca v1":
            raise DataError("not a pca v1 file")
        n, k = (int(s) for s in lines[1].split()[1:])
        mean = np.array([float(v) for v in lines[2].split()[1:]])
        eig = np.array([float(v) for v in lines[3].split()[1:]])
        U = np.array([[float(v) for v in ln.split()] for ln in lines[4:4 + n]]).reshape(n, k)
        return cls(mean, U, eig[:k].copy(), eig)


def fit_pca(data, n_components) -> PcaModel:
    X = np.atleast_2d(np.asarray(data, dtype=float))
    m, n = X.shape
    if m < 2:
        raise DataError("PCA needs at least two records")
    if not 1 <= n_components <= n:
        raise DataError(f"n_components must be in [1, {n}], got {n_components}")
    mean = X.mean(axis=0)
    Xc = X - mean
    cov = Xc.T @ Xc / (m - 1)
    vals, vecs = np.linalg.eigh(cov)
    order = np.argsort(-vals, kind="stable")
    vals = np.clip(vals[order], 0.0, None)
    vecs = vecs[:, order]
    pivots = np.argmax(np.abs(vecs), axis=0)
    vecs = vecs * np.sign(vecs[pivots, np.arange(n)])
    return PcaModel(mean, vecs[:, :n_components].copy(), vals[:n_components].copy(), vals)


def project(m: PcaModel, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != m.n_features:
        raise DataError(f"input length {x.shape[-1]} != {m.n_features}")
    return (x - m.mean) @ m.components


def reconstruct(m: PcaModel, y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.shape[-1] != m.n_components:
        raise DataError(f"projection length {y.shape[-1]} != {m.n_components}")
    return y @ m.components.T + m.mean


def reconstruction_rmse(data, model: PcaModel) -> float:
    X = np.atleast_2d(np.asarray(data, dtype=float))
    return float(np.sqrt(((reconstruct(model, project(model, X)) - X) ** 2).mean()))


def choose_dimension(data, tolerance):
    """Smallest K whose reconstruction RMSE is within ``tolerance`` of the K = N value.

    Returns ``(K, table)`` with ``table`` a list of ``(K, RMSE)`` for K = 1..N.
    """
    X = np.atleast_2d(np.asarray(data, dtype=float))
    n = X.shape[1]
    if n < 2:
        raise DataError("need at least two columns")
    full = fit_pca(X, n)
    table = []
    for k in range(1, n + 1):
        mk = PcaModel(full.mean, full.components[:, :k], full.eigenvalues[:k], full.all_eigenvalues)
        table.append((k, reconstruction_rmse(X, mk)))
    floor = table[-1][1]
    chosen = next(k for k, e in table if e - floor <= tolerance)
    return chosen, table


class PCA(TransformerMixin, BaseEstimator):
    def __init__(self, n_components=7):
        self.n_components = n_components

    def fit(self, X, y=None):
        self.model_ = fit_pca(X, self.n_components)
        self.n_features_in_ = self.model_.n_features
        return self

    def transform(self, X):
        check_is_fitted(self, "model_")
        return project(self.model_, X)

    def inverse_transform(self, Y):
        check_is_fitted(self, "model_")
        return reconstruct(self.model_, Y)
