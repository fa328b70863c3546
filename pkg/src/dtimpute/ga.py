"""Real-coded genetic algorithm over a box in normalized space.

Operators: normalized geometric ranking selection, simple (one-point
gene-swap) crossover, non-uniform mutation, plus elitism. Everything
minimises an error function.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._random import substream
from .exceptions import DataError, DivergenceError


@dataclass(frozen=True)
class Bounds:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lo, dtype=float))
        hi = np.atleast_1d(np.asarray(self.hi, dtype=float))
        if lo.shape != hi.shape or lo.ndim != 1:
            raise DataError("bounds lo/hi must be vectors of equal length")
        if np.any(lo < 0) or np.any(hi > 1) or np.any(lo >= hi):
            raise DataError(f"bounds must satisfy 0 <= lo < hi <= 1, got {lo} / {hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def full(cls, n: int) -> "Bounds":
        return cls(np.zeros(n), np.ones(n))

    def __len__(self):
        return self.lo.size

    def contains(self, x) -> bool:
        x = np.asarray(x)
        return bool(np.all(x >= self.lo) and np.all(x <= self.hi))


@dataclass(frozen=True)
class GaConfig:
    population_size: int = 50
    generations: int = 20
    q: float = 0.08
    crossover_rate: float = 0.6
    mutation_rate: float = 0.05
    b: float = 3.0
    seed: int = 0

    def __post_init__(self):
        if self.population_size < 2 or self.generations < 1:
            raise DataError("population_size >= 2 and generations >= 1 required")
        if not 0 < self.q < 1:
            raise DataError("q must lie in (0, 1)")
        for rate in (self.crossover_rate, self.mutation_rate):
            if not 0 <= rate <= 1:
                raise DataError("operator rates must lie in [0, 1]")


@dataclass
class GaResult:
    best: np.ndarray
    best_error: float
    curve: list[float] = field(default_factory=list)


def geometric_probabilities(q: float, size: int) -> np.ndarray:
    r = np.arange(size)
    return q * (1.0 - q) ** r / (1.0 - (1.0 - q) ** size)


def select_geometric(size: int, q: float, count: int, rng) -> np.ndarray:
    """Rank indices (0 = best) drawn with replacement, P(r) proportional to q(1-q)^r."""
    if size == 1:
        return np.zeros(count, dtype=int)
    cdf = np.cumsum(geometric_probabilities(q, size))
    cdf[-1] = 1.0
    return np.searchsorted(cdf, rng.random(count), side="right").clip(0, size - 1)


def crossover_simple(parents: np.ndarray, rate: float, rng) -> np.ndarray:
    """Swap gene tails of consecutive parent pairs at a random cut point."""
    children = parents.copy()
    n_genes = parents.shape[1]
    if n_genes < 2:
        return children
    for i in range(0, parents.shape[0] - 1, 2):
        if rng.random() < rate:
            cut = rng.integers(1, n_genes)
            children[i, cut:] = parents[i + 1, cut:]
            children[i + 1, cut:] = parents[i, cut:]
    return children


def mutate_nonuniform(gene, lo, hi, gen, max_gen, b, rng):
    """Move a gene toward one boundary by a step that anneals to zero at ``max_gen``."""
    gene, lo, hi = (np.asarray(a, dtype=float) for a in (gene, lo, hi))
    u = rng.random(gene.shape)
    up = rng.random(gene.shape) < 0.5
    shrink = 1.0 - u ** ((1.0 - gen / max_gen) ** b)
    out = np.where(up, gene + (hi - gene) * shrink, gene - (gene - lo) * shrink)
    out = np.clip(out, lo, hi)
    return float(out) if out.ndim == 0 else out


def run(error_fn, bounds: Bounds, cfg: GaConfig = GaConfig(), vectorized=False, rng=None) -> GaResult:
    """Minimise ``error_fn`` inside ``bounds``.

    ``error_fn`` maps a chromosome to an error, or with ``vectorized=True`` a
    (population, genes) matrix to a vector of errors.
    """
    rng = substream(cfg.seed, "ga") if rng is None else rng
    lo, hi = bounds.lo, bounds.hi
    P, n = cfg.population_size, len(bounds)

    def evaluate(pop):
        err = np.asarray(error_fn(pop), dtype=float) if vectorized \
            else np.array([float(error_fn(c)) for c in pop])
        bad = ~np.isfinite(err)
        if bad.any():
            raise DivergenceError(f"error function non-finite at chromosome {pop[np.argmax(bad)]}")
        return err

    pop = lo + (hi - lo) * rng.random((P, n))
    err = evaluate(pop)
    i = int(np.argmin(err))
    best, best_err = pop[i].copy(), float(err[i])
    curve = []
    for gen in range(cfg.generations):
        order = np.argsort(err, kind="stable")
        ranked = pop[order]
        parents = ranked[select_geometric(P, cfg.q, P, rng)]
        children = crossover_simple(parents, cfg.crossover_rate, rng)
        hit = rng.random(children.shape) < cfg.mutation_rate
        if hit.any():
            mutated = mutate_nonuniform(children, lo, hi, gen, cfg.generations, cfg.b, rng)
            children = np.where(hit, mutated, children)
        children[0] = best
        pop, err = children, evaluate(children)
        i = int(np.argmin(err))
        if err[i] < best_err:
            best, best_err = pop[i].copy(), float(err[i])
        curve.append(best_err)
    return GaResult(best, best_err, curve)
