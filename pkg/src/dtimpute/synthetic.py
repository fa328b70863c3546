"""Synthetic survey-shaped data for experiments and tests.

The real antenatal survey data is not distributable, so records are drawn
from a two-factor linear latent model with noise. Attribute names, ranges,
interval widths and tolerance tiers follow the survey layout: five integer
continuous attributes, race and province as compact-binary categoricals and
an optional binary HIV status.
"""
from __future__ import annotations

import numpy as np

from ._random import substream
from .dataset import AttributeSpec, Dataset, Schema

RACES = ("Asian", "Black", "Colored", "Other", "White")
PROVINCES = ("EC", "FS", "GP", "KZN", "LP", "MP", "NC", "NW", "WC")


def survey_schema(with_hiv: bool = True) -> Schema:
    attrs = [
        AttributeSpec("Age", "continuous", 14, 50, integer=True, interval=4, tolerances=(2, 4, 6, 10)),
        AttributeSpec("Education", "continuous", 0, 13, integer=True, interval=2, tolerances=(1, 2, 3, 5)),
        AttributeSpec("FatherAge", "continuous", 14, 70, integer=True, interval=4, tolerances=(2, 4, 6, 10)),
        AttributeSpec("Gravidity", "continuous", 0, 12, integer=True, interval=2, tolerances=(0, 1, 3, 5)),
        AttributeSpec("Parity", "continuous", 0, 10, integer=True, interval=2, tolerances=(0, 1, 3, 5)),
        AttributeSpec("Race", "categorical", levels=RACES),
        AttributeSpec("Province", "categorical", levels=PROVINCES),
    ]
    if with_hiv:
        attrs.append(AttributeSpec("HIV", "binary"))
    return Schema(tuple(attrs))


def _bucket(score, n_levels, rng, flip=0.1):
    """Quantile-bin a score into levels, reassigning a fraction at random."""
    cuts = np.quantile(score, np.linspace(0, 1, n_levels + 1)[1:-1])
    level = np.searchsorted(cuts, score)
    noisy = rng.random(score.size) < flip
    level[noisy] = rng.integers(0, n_levels, noisy.sum())
    return level


def survey_like(n_rows: int = 1000, seed: int = 0, with_hiv: bool = False, noise: float = 1.0) -> Dataset:
    """Raw, complete dataset from a two-factor latent model."""
    schema = survey_schema(with_hiv)
    rng = substream(seed, "synthetic")
    z1, z2 = rng.standard_normal((2, n_rows))
    e = rng.standard_normal((5, n_rows)) * noise
    cont = np.stack([
        27.0 + 6.0 * z1 + 1.5 * e[0],
        7.5 + 2.5 * z2 - 0.6 * z1 + 1.0 * e[1],
        32.0 + 7.0 * z1 + 1.0 * z2 + 2.0 * e[2],
        2.4 + 1.4 * z1 - 0.6 * z2 + 0.5 * e[3],
        1.8 + 1.1 * z1 - 0.5 * z2 + 0.5 * e[4],
    ], axis=1)
    lo = np.array([a.min for a in schema.attributes[:5]])
    hi = np.array([a.max for a in schema.attributes[:5]])
    cont = np.clip(np.round(cont), lo, hi)
    cont[:, 4] = np.minimum(cont[:, 4], cont[:, 3])  # parity never exceeds gravidity
    race = _bucket(z2 + 0.5 * rng.standard_normal(n_rows), len(RACES), rng)
    province = _bucket(z1 - z2 + 0.5 * rng.standard_normal(n_rows), len(PROVINCES), rng)
    cols = [cont, race[:, None], province[:, None]]
    if with_hiv:
        p = 1.0 / (1.0 + np.exp(-(-1.0 + 0.8 * z1 - 0.6 * z2)))
        cols.append((rng.random(n_rows) < p).astype(float)[:, None])
    rows = np.hstack(cols).astype(float)
    return Dataset(schema, rows, np.ones(rows.shape, dtype=bool), "raw")


def low_rank(n_rows: int, n_cols: int, rank: int, seed: int = 0, noise: float = 0.0) -> np.ndarray:
    """Rows in [0.1, 0.9] lying on a ``rank``-dimensional affine subspace (plus noise)."""
    rng = substream(seed, "low_rank")
    z = rng.uniform(-1, 1, (n_rows, rank))
    basis = np.linalg.qr(rng.standard_normal((n_cols, rank)))[0]
    x = 0.5 + 0.4 * (z @ basis.T) / np.sqrt(rank)
    return np.clip(x + noise * rng.standard_normal(x.shape), 0.0, 1.0)
