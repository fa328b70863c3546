"""Model-based imputation by bounded genetic search.

Two data models score a candidate completion of a record:

* ``aann``: an autoencoder; the error is the squared reconstruction residual
  ``||x - f(x)||^2`` over every encoded column.
* ``pca_nn``: a PCA projection and a network trained to reproduce it; the
  error is ``||pca(x) - net(x)||^2`` over the retained components.

The GA searches the missing columns either over the whole normalized range
(``full``) or inside intervals predicted by one decision tree per attribute
(``tree``).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from urllib.parse import unquote

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import ga as ga_mod
from ._random import substream
from .dataset import (Dataset, Schema, attribute_values, decode_rows, level_bits,
                      read_schema, write_schema)
from .exceptions import DataError
from .mlp import MlpModel, TrainConfig, TrainReport, forward, init_model, train_scg
from .pca import PcaModel, fit_pca, project
from .tree import IntervalDecisionTree, IntervalScheme

logger = logging.getLogger(__name__)

VARIANTS = ("aann", "pca_nn")
POLICIES = ("full", "tree")
DEFAULT_HIDDEN = {"aann": 11, "pca_nn": 17}
DEFAULT_CYCLES = {"aann": 110, "pca_nn": 140}


def normalize_variant(name: str) -> str:
    v = name.strip().lower().replace("-", "_")
    if v not in VARIANTS:
        raise DataError(f"unknown pipeline variant {name!r}")
    return v


@dataclass(frozen=True)
class TreeParams:
    min_leaf: int = 25
    min_gain: float = 1e-3
    max_depth: int = 12


@dataclass(frozen=True)
class RecordHole:
    row: int
    values: np.ndarray  # encoded row, NaN in missing columns
    missing: tuple[str, ...]
    missing_columns: np.ndarray

    @classmethod
    def from_row(cls, row_index: int, row, schema: Schema) -> "RecordHole":
        row = np.asarray(row, dtype=float)
        if row.shape != (schema.total_width,):
            raise DataError(f"row width {row.shape} != {schema.total_width}")
        missing, cols = [], []
        for spec in schema.attributes:
            c = schema.columns(spec.name)
            block = np.isnan(row[c])
            if block.any():
                missing.append(spec.name)
                cols.extend(range(c.start, c.stop))
        values = row.copy()
        values[cols] = np.nan
        return cls(row_index, values, tuple(missing), np.asarray(cols, dtype=int))

    @property
    def known_columns(self) -> np.ndarray:
        return np.setdiff1d(np.arange(self.values.size), self.missing_columns)

    def assemble(self, candidates) -> np.ndarray:
        """Full rows with ``candidates`` written into the missing columns."""
        cand = np.atleast_2d(np.asarray(candidates, dtype=float))
        if cand.shape[1] != self.missing_columns.size:
            raise DataError(f"candidate length {cand.shape[1]} != {self.missing_columns.size} missing columns")
        if not np.isfinite(cand).all():
            raise DataError("candidate contains non-finite values")
        x = np.repeat(self.values[None, :], cand.shape[0], axis=0)
        x[:, self.missing_columns] = cand
        return x


@dataclass
class AttributeTree:
    """A fitted tree predicting one attribute's interval (or level) from the others."""
    target: str
    tree: IntervalDecisionTree
    features: tuple[str, ...]
    scheme: IntervalScheme | None = None

    def predict(self, attr_row, schema: Schema) -> int:
        idx = [schema.index(f) for f in self.features]
        return self.tree.predict_one(np.asarray(attr_row, dtype=float)[idx])

    def to_text(self) -> str:
        head = [f"target {self.target}"]
        if self.scheme is not None:
            kind = "integer" if self.scheme.integer else "real"
            head.append(f"scheme {kind} {self.scheme.width!r} " + " ".join(repr(e) for e in self.scheme.edges))
        else:
            head.append("scheme none")
        return "\n".join(head) + "\n" + self.tree.to_text(list(self.features))

    @classmethod
    def from_text(cls, text: str) -> "AttributeTree":
        lines = text.splitlines()
        target = lines[0].split(" ", 1)[1]
        parts = lines[1].split()
        scheme = None
        if parts[1] != "none":
            scheme = IntervalScheme(target, float(parts[2]), tuple(float(e) for e in parts[3:]),
                                    parts[1] == "integer")
        tree = IntervalDecisionTree.from_text("\n".join(lines[2:]))
        features = tuple(unquote(f) for f in lines[4].split()[1:])
        return cls(target, tree, features, scheme)


def _target_labels(raw_target: np.ndarray, spec, scheme):
    if spec.kind == "continuous":
        return scheme.label(raw_target), scheme.n_bins
    if spec.kind == "binary":
        return raw_target.astype(int), 2
    return raw_target.astype(int), len(spec.levels)


def fit_attribute_tree(rows: np.ndarray, schema: Schema, target: str,
                       params: TreeParams = TreeParams()) -> AttributeTree:
    """Induce a tree for ``target`` from the remaining attributes of complete rows."""
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    if np.isnan(rows).any():
        raise DataError("trees are trained on complete records only")
    spec = schema[target]
    feats = [a for a in schema.attributes if a.name != target]
    attr = attribute_values(rows, schema)
    X = attr[:, [schema.index(a.name) for a in feats]]
    raw = decode_rows(rows, schema)[:, schema.index(target)]
    scheme = IntervalScheme.for_attribute(spec) if spec.kind == "continuous" else None
    y, n_classes = _target_labels(raw, spec, scheme)
    levels = [len(a.levels) if a.kind == "categorical" else 0 for a in feats]
    tree = IntervalDecisionTree(min_leaf=params.min_leaf, min_gain=params.min_gain,
                                max_depth=params.max_depth, levels=levels,
                                n_classes=n_classes).fit(X, y)
    return AttributeTree(target, tree, tuple(a.name for a in feats), scheme)


@dataclass
class PipelineModel:
    variant: str
    schema: Schema
    network: MlpModel
    pca: PcaModel | None = None
    trees: dict[str, AttributeTree] = field(default_factory=dict)
    reports: dict[str, TrainReport] = field(default_factory=dict)

    def __post_init__(self):
        self.variant = normalize_variant(self.variant)
        n, _, o = self.network.layer_sizes
        if n != self.schema.total_width:
            raise DataError(f"network input {n} != schema width {self.schema.total_width}")
        if self.variant == "aann" and o != n:
            raise DataError("autoencoder output size must equal its input size")
        if self.variant == "pca_nn":
            if self.pca is None:
                raise DataError("pca_nn pipeline needs a PCA model")
            if o != self.pca.n_components or self.pca.n_features != n:
                raise DataError("regressor output size must equal the PCA dimension")

    def error(self, x) -> np.ndarray:
        """Model error of complete encoded rows."""
        x = np.atleast_2d(x)
        if self.variant == "aann":
            return ((x - forward(self.network, x)) ** 2).sum(axis=1)
        return ((project(self.pca, x) - forward(self.network, x)) ** 2).sum(axis=1)

    def save(self, directory) -> None:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        write_schema(self.schema, d / "schema.txt")
        targets = [self.schema.index(t) for t in self.trees]
        (d / "pipeline.txt").write_text(
            f"pipeline v1\nvariant {self.variant}\ntrees {' '.join(str(i) for i in sorted(targets))}\n",
            encoding="utf-8")
        (d / "network.txt").write_text(self.network.to_text(), encoding="utf-8")
        if self.pca is not None:
            (d / "pca.txt").write_text(self.pca.to_text(), encoding="utf-8")
        for name, t in self.trees.items():
            (d / f"tree_{self.schema.index(name):02d}.txt").write_text(t.to_text(), encoding="utf-8")
        for name, rep in self.reports.items():
            (d / f"train_report_{name}.txt").write_text(rep.to_text(), encoding="utf-8")

    @classmethod
    def load(cls, directory) -> "PipelineModel":
        d = Path(directory)
        if not (d / "pipeline.txt").is_file():
            raise DataError(f"no pipeline model in {d}")
        meta = dict(ln.split(" ", 1) if " " in ln else (ln, "")
                    for ln in (d / "pipeline.txt").read_text(encoding="utf-8").splitlines()[1:])
        schema = read_schema(d / "schema.txt")
        network = MlpModel.from_text((d / "network.txt").read_text(encoding="utf-8"))
        pca = PcaModel.from_text((d / "pca.txt").read_text(encoding="utf-8")) \
            if (d / "pca.txt").is_file() else None
        trees = {}
        for i in (int(s) for s in meta.get("trees", "").split()):
            t = AttributeTree.from_text((d / f"tree_{i:02d}.txt").read_text(encoding="utf-8"))
            trees[t.target] = t
        return cls(meta["variant"], schema, network, pca, trees)


def error_aann(model: PipelineModel, hole: RecordHole, candidate):
    """Squared autoencoder residual of the assembled record(s)."""
    x = hole.assemble(candidate)
    e = ((x - forward(model.network, x)) ** 2).sum(axis=1)
    return float(e[0]) if np.ndim(candidate) <= 1 else e


def error_pcann(model: PipelineModel, hole: RecordHole, candidate):
    """Squared gap between the PCA projection and the regressor output."""
    x = hole.assemble(candidate)
    e = ((project(model.pca, x) - forward(model.network, x)) ** 2).sum(axis=1)
    return float(e[0]) if np.ndim(candidate) <= 1 else e


def _error_fn(model: PipelineModel):
    return error_aann if model.variant == "aann" else error_pcann


def bounds_for(hole: RecordHole, policy: str, model: PipelineModel) -> ga_mod.Bounds:
    """Per-gene GA search box for a record's missing columns."""
    if policy not in POLICIES:
        raise DataError(f"unknown bounds policy {policy!r}")
    schema = model.schema
    n = hole.missing_columns.size
    if policy == "full" or n == 0:
        return ga_mod.Bounds.full(n)
    attr_row = attribute_values(hole.values, schema)[0]
    lo, hi = [], []
    for name in hole.missing:
        spec = schema[name]
        width = spec.encoded_width
        tree = model.trees.get(name)
        if tree is None:
            if spec.kind != "categorical":
                raise DataError(f"tree bounds requested but no tree for {name!r}")
            lo += [0.0] * width
            hi += [1.0] * width
            continue
        label = tree.predict(attr_row, schema)
        if spec.kind == "continuous":
            a, b = tree.scheme.interval(label)
            if b <= a:
                # single-value bin: search the values that round onto it
                a, b = a - 0.5, b + 0.5
            lo.append(min(max((a - spec.min) / spec.span, 0.0), 1.0))
            hi.append(min(max((b - spec.min) / spec.span, 0.0), 1.0))
        else:
            bits = level_bits(label, width) if spec.kind == "categorical" else np.array([label])
            lo += [0.5 * float(v) for v in bits]
            hi += [0.5 + 0.5 * float(v) for v in bits]
    return ga_mod.Bounds(np.array(lo), np.array(hi))


@dataclass
class Diagnostics:
    row: int
    attributes: tuple[str, ...]
    lo: np.ndarray
    hi: np.ndarray
    error: float
    solution: np.ndarray


def impute_record(model: PipelineModel, hole: RecordHole, policy: str = "full",
                  ga_cfg: ga_mod.GaConfig = ga_mod.GaConfig()):
    """Fill one record's missing columns by GA search of the model error.

    Returns ``(completed encoded row, Diagnostics or None)``; records without
    holes come back unchanged with ``None``.
    """
    if hole.missing_columns.size == 0:
        return hole.values.copy(), None
    bounds = bounds_for(hole, policy, model)
    err = _error_fn(model)
    rng = substream(ga_cfg.seed, "ga", hole.row)
    result = ga_mod.run(lambda pop: err(model, hole, pop), bounds, ga_cfg, vectorized=True, rng=rng)
    row = hole.values.copy()
    row[hole.missing_columns] = result.best
    return row, Diagnostics(hole.row, hole.missing, bounds.lo, bounds.hi,
                            result.best_error, result.best.copy())


def impute_rows(model: PipelineModel, rows, policy="full", ga_cfg=ga_mod.GaConfig()):
    """Impute every NaN in an encoded matrix. Returns ``(filled, diagnostics list)``."""
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    out = rows.copy()
    diags = []
    for i, row in enumerate(rows):
        if not np.isnan(row).any():
            continue
        hole = RecordHole.from_row(i, row, model.schema)
        out[i], diag = impute_record(model, hole, policy, ga_cfg)
        diags.append(diag)
    return out, diags


def _complete_rows(data, name) -> np.ndarray:
    rows = data.rows if isinstance(data, Dataset) else np.asarray(data, dtype=float)
    if isinstance(data, Dataset) and not data.mask.all():
        raise DataError(f"{name} data must be complete")
    rows = np.atleast_2d(rows)
    if not np.isfinite(rows).all():
        raise DataError(f"{name} data must be complete")
    return rows


def train_pipeline(variant, train, validation, schema: Schema, *, hidden=None, n_components=7,
                   train_config: TrainConfig | None = None, tree_params: TreeParams | None = None,
                   tree_targets=None, pca=None, seed=0) -> PipelineModel:
    """Train the data model (and optionally trees) from complete encoded rows.

    ``tree_targets``: attributes that get a tree; ``None`` means none,
    ``"all"`` means every attribute. ``pca`` may supply a pre-fitted model for
    the ``pca_nn`` variant.
    """
    variant = normalize_variant(variant)
    X = _complete_rows(train, "training")
    Xv = _complete_rows(validation, "validation") if validation is not None else X
    if X.shape[1] != schema.total_width:
        raise DataError(f"data width {X.shape[1]} != schema width {schema.total_width}")
    hidden = hidden or DEFAULT_HIDDEN[variant]
    cfg = train_config or TrainConfig(max_cycles=DEFAULT_CYCLES[variant])
    if variant == "aann":
        net = init_model((X.shape[1], hidden, X.shape[1]), seed, "sigmoid")
        net, report = train_scg(net, (X, X), (Xv, Xv), cfg)
    else:
        if pca is None:
            pca = fit_pca(np.vstack([X, Xv]) if validation is not None else X, n_components)
        net = init_model((X.shape[1], hidden, pca.n_components), seed, "linear")
        net, report = train_scg(net, (X, project(pca, X)), (Xv, project(pca, Xv)), cfg)
    trees = {}
    if tree_targets:
        names = schema.names if tree_targets == "all" else list(tree_targets)
        pooled = np.vstack([X, Xv]) if validation is not None else X
        for name in names:
            trees[name] = fit_attribute_tree(pooled, schema, name, tree_params or TreeParams())
    return PipelineModel(variant, schema, net, pca, trees, {"network": report})


def impute_baseline_mean(d: Dataset, attribute: str) -> Dataset:
    """Replace every missing cell of ``attribute`` by the mean of its observed values."""
    cols = d.schema.columns(attribute) if d.provenance == "normalized" \
        else slice(d.schema.index(attribute), d.schema.index(attribute) + 1)
    present = d.mask[:, cols].all(axis=1)
    if not present.any():
        raise DataError(f"attribute {attribute!r} has no observed values")
    if present.all():
        return d
    rows = d.rows.copy()
    mask = d.mask.copy()
    rows[~present, cols] = rows[present, cols].mean(axis=0)
    mask[:, cols] = True
    return Dataset(d.schema, rows, mask, d.provenance)


class GAImputer(TransformerMixin, BaseEstimator):
    """Estimator front end for the four GA imputation pipelines.

    ``fit(X, X_val=None)`` takes complete normalized encoded rows;
    ``transform(X)`` fills NaN cells. ``bounds="tree"`` trains one interval
    tree per attribute at fit time.
    """

    def __init__(self, schema=None, variant="aann", bounds="full", hidden=None, n_components=7,
                 max_cycles=None, patience=20, population_size=50, generations=20, q=0.08,
                 crossover_rate=0.6, mutation_rate=0.05, mutation_shape=3.0,
                 min_leaf=25, min_gain=1e-3, max_depth=12, random_state=0):
        self.schema = schema
        self.variant = variant
        self.bounds = bounds
        self.hidden = hidden
        self.n_components = n_components
        self.max_cycles = max_cycles
        self.patience = patience
        self.population_size = population_size
        self.generations = generations
        self.q = q
        self.crossover_rate = crossover_rate
        self.mutation_rate = mutation_rate
        self.mutation_shape = mutation_shape
        self.min_leaf = min_leaf
        self.min_gain = min_gain
        self.max_depth = max_depth
        self.random_state = random_state

    def _ga_config(self) -> ga_mod.GaConfig:
        return ga_mod.GaConfig(self.population_size, self.generations, self.q, self.crossover_rate,
                               self.mutation_rate, self.mutation_shape, self.random_state)

    def fit(self, X, y=None, X_val=None):
        if self.schema is None:
            raise DataError("GAImputer needs a schema")
        if self.bounds not in POLICIES:
            raise DataError(f"unknown bounds policy {self.bounds!r}")
        variant = normalize_variant(self.variant)
        cycles = self.max_cycles or DEFAULT_CYCLES[variant]
        self.model_ = train_pipeline(
            variant, X, X_val, self.schema, hidden=self.hidden, n_components=self.n_components,
            train_config=TrainConfig(max_cycles=cycles, early_stop_patience=self.patience),
            tree_params=TreeParams(self.min_leaf, self.min_gain, self.max_depth),
            tree_targets="all" if self.bounds == "tree" else None, seed=self.random_state)
        self.n_features_in_ = self.schema.total_width
        return self

    def transform(self, X):
        check_is_fitted(self, "model_")
        out, self.diagnostics_ = impute_rows(self.model_, X, self.bounds, self._ga_config())
        return out
