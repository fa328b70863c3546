"""Scoring of imputations and the multi-seed benchmark harness."""
from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field

import numpy as np

from . import ga as ga_mod
from .dataset import Dataset, Schema, SplitSpec, decode_rows, inject_mcar, split, to_normalized
from .exceptions import DataError, ReportError
from .imputer import (DEFAULT_CYCLES, DEFAULT_HIDDEN, POLICIES, TreeParams, fit_attribute_tree,
                      impute_baseline_mean, impute_rows, normalize_variant, train_pipeline)
from .mlp import TrainConfig

logger = logging.getLogger(__name__)

DEFAULT_TOLERANCES = {
    "Age": (2, 4, 6, 10),
    "Education": (1, 2, 3, 5),
    "FatherAge": (2, 4, 6, 10),
    "Father's Age": (2, 4, 6, 10),
    "Gravidity": (0, 1, 3, 5),
    "Parity": (0, 1, 3, 5),
}
HEADLINE_TIER = 1  # second tolerance tier


@dataclass(frozen=True)
class ToleranceScheme:
    tiers: dict

    @classmethod
    def for_schema(cls, schema: Schema) -> "ToleranceScheme":
        tiers = {}
        for a in schema.attributes:
            if a.kind == "continuous":
                t = a.tolerances or DEFAULT_TOLERANCES.get(a.name) \
                    or tuple(round(a.span * f, 12) for f in (0.05, 0.1, 0.15, 0.25))
            else:
                t = ()
            if any(y <= x for x, y in zip(t, t[1:])):
                raise DataError(f"tolerances for {a.name!r} must be strictly increasing")
            tiers[a.name] = tuple(float(v) for v in t)
        return cls(tiers)


def accuracy_within(true, imputed, tolerance) -> float:
    """Percentage of imputed values within ``tolerance`` (inclusive) of the truth."""
    true = np.asarray(true, dtype=float)
    imputed = np.asarray(imputed, dtype=float)
    if true.size == 0 or true.shape != imputed.shape:
        raise DataError("accuracy needs equal-length non-empty inputs")
    # small slack so integer-valued differences at the boundary count as hits
    return 100.0 * float(np.mean(np.abs(imputed - true) <= tolerance + 1e-9))


@dataclass(frozen=True)
class BinaryScores:
    specificity: float | None
    sensitivity: float | None
    accuracy: float


def specificity(true, imputed) -> BinaryScores:
    """Specificity, sensitivity and accuracy (percent) of 0/1 predictions.

    A rate with no actual cases of its kind is ``None`` (not applicable).
    """
    t = np.asarray(true).astype(int)
    p = np.asarray(imputed).astype(int)
    if t.size == 0 or t.shape != p.shape:
        raise DataError("specificity needs equal-length non-empty inputs")
    tn = int(((t == 0) & (p == 0)).sum())
    fp = int(((t == 0) & (p == 1)).sum())
    tp = int(((t == 1) & (p == 1)).sum())
    fn = int(((t == 1) & (p == 0)).sum())
    spec = 100.0 * tn / (tn + fp) if tn + fp else None
    sens = 100.0 * tp / (tp + fn) if tp + fn else None
    return BinaryScores(spec, sens, 100.0 * (tn + tp) / t.size)


@dataclass(frozen=True)
class PipelineSpec:
    variant: str
    bounds: str = "full"

    def __post_init__(self):
        object.__setattr__(self, "variant", normalize_variant(self.variant))
        if self.bounds not in POLICIES:
            raise DataError(f"unknown bounds policy {self.bounds!r}")

    @property
    def label(self) -> str:
        base = "AANN-GA" if self.variant == "aann" else "PCA-NN-GA"
        return base if self.bounds == "full" else f"C4.5, {base}"

    @classmethod
    def parse(cls, text: str) -> "PipelineSpec":
        """``"aann"``, ``"pca-nn/tree"`` and the like."""
        variant, _, bounds = text.strip().partition("/")
        return cls(variant, bounds or "full")


BASELINE = "Mean imputation"


@dataclass
class BenchmarkConfig:
    split: SplitSpec = field(default_factory=SplitSpec)
    hidden: dict = field(default_factory=lambda: dict(DEFAULT_HIDDEN))
    max_cycles: dict = field(default_factory=lambda: dict(DEFAULT_CYCLES))
    n_components: int = 7
    patience: int = 20
    ga: ga_mod.GaConfig = field(default_factory=ga_mod.GaConfig)
    tree: TreeParams = field(default_factory=TreeParams)


@dataclass
class ImputationReport:
    labels: list[str]
    attributes: list[str]
    tolerances: ToleranceScheme
    kinds: dict
    seeds: list[int]
    per_seed: list[dict] = field(default_factory=list)

    # accuracy cells: (section, attribute, tier) -> mean percent over seeds
    def _values(self, section, attribute, metric, tier):
        return [r["value"] for r in self.per_seed
                if r["section"] == section and r["attribute"] == attribute
                and r["metric"] == metric and r["tier"] == tier and r["value"] is not None]

    def cell(self, section: int, attribute: str, tier: int = 0, metric: str = "accuracy"):
        vals = self._values(section, attribute, metric, tier)
        return sum(vals) / len(vals) if vals else None

    def primary(self, section: int, attribute: str, tier: int):
        """The Table-position value: accuracy tier for continuous, specificity for binary."""
        if self.kinds[attribute] == "binary":
            return self.cell(section, attribute, 0, "specificity") if tier == 0 else None
        return self.cell(section, attribute, tier)

    def headline(self, section: int):
        """Mean over attributes of the second-tier accuracy (specificity for binary)."""
        vals = []
        for a in self.attributes:
            if self.kinds[a] == "binary":
                v = self.cell(section, a, 0, "specificity")
            else:
                tier = min(HEADLINE_TIER, max(len(self.tolerances.tiers.get(a, ())), 1) - 1)
                v = self.cell(section, a, tier)
            if v is not None:
                vals.append(v)
        return sum(vals) / len(vals) if vals else None

    def n_tiers(self, attribute):
        return max(1, len(self.tolerances.tiers.get(attribute, ())))

    def check_monotone(self) -> None:
        """Raise ReportError if any accuracy decreases with a looser tolerance."""
        for seed in self.seeds + [None]:
            for s in range(len(self.labels)):
                for a in self.attributes:
                    if self.kinds[a] != "continuous":
                        continue
                    if seed is None:
                        seq = [self.cell(s, a, t) for t in range(self.n_tiers(a))]
                    else:
                        seq = [next((r["value"] for r in self.per_seed if r["seed"] == seed and r["section"] == s
                                     and r["attribute"] == a and r["metric"] == "accuracy" and r["tier"] == t), None)
                               for t in range(self.n_tiers(a))]
                    seq = [v for v in seq if v is not None]
                    if any(b < a_ - 1e-9 for a_, b in zip(seq, seq[1:])):
                        raise ReportError(f"accuracy not monotone in tolerance for {self.labels[s]!r}/{a}: {seq}")

    def to_text(self) -> str:
        width = max(12, max(len(a) for a in self.attributes) + 2)
        lab_w = max(len(x) for x in self.labels) + 2
        out = ["Percentages of imputed values within the specified tolerance",
               f"seeds: {' '.join(str(s) for s in self.seeds)}", ""]
        out.append("Method".ljust(lab_w) + "".join(a.rjust(width) for a in self.attributes))
        tiers = max(self.n_tiers(a) for a in self.attributes)
        for s, label in enumerate(self.labels):
            for t in range(tiers):
                cells = []
                for a in self.attributes:
                    v = self.primary(s, a, t) if t < self.n_tiers(a) else None
                    cells.append(("-" if v is None else f"{v:.1f}").rjust(width))
                out.append((label if t == 0 else "").ljust(lab_w) + "".join(cells))
        out += ["", "Tolerances (raw units):"]
        for a in self.attributes:
            if self.kinds[a] == "continuous":
                out.append(f"  {a}: " + ", ".join(f"{v:g}" for v in self.tolerances.tiers[a]))
            elif self.kinds[a] == "binary":
                out.append(f"  {a}: specificity (sensitivity and accuracy in CSV)")
            else:
                out.append(f"  {a}: exact level match")
        out += ["", "Mean accuracy at the second tolerance tier (specificity for binary attributes):"]
        for s, label in enumerate(self.labels):
            h = self.headline(s)
            out.append(f"  {label.ljust(lab_w)}{'-' if h is None else f'{h:.2f}'}")
        return "\n".join(out) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["section", "pipeline", "attribute", "metric", "tier", "tolerance", "value"])
        for s, label in enumerate(self.labels):
            for a in self.attributes:
                for metric, tier, tol in self._metric_rows(a):
                    v = self.cell(s, a, tier, metric)
                    w.writerow([s, label, a, metric, tier, tol, "" if v is None else repr(v)])
            h = self.headline(s)
            w.writerow([s, label, "*", "headline", HEADLINE_TIER, "", "" if h is None else repr(h)])
        return buf.getvalue()

    def per_seed_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["seed", "section", "pipeline", "attribute", "metric", "tier", "tolerance", "n", "value"])
        for r in self.per_seed:
            w.writerow([r["seed"], r["section"], self.labels[r["section"]], r["attribute"], r["metric"],
                        r["tier"], r["tolerance"], r["n"], "" if r["value"] is None else repr(r["value"])])
        return buf.getvalue()

    def _metric_rows(self, attribute):
        kind = self.kinds[attribute]
        if kind == "continuous":
            return [("accuracy", t, tol) for t, tol in enumerate(self.tolerances.tiers[attribute])]
        if kind == "binary":
            return [("specificity", 0, ""), ("sensitivity", 0, ""), ("accuracy", 0, "")]
        return [("accuracy", 0, "")]


def score_attribute(spec, true, imputed, tolerances):
    """List of ``(metric, tier, tolerance, value)`` for one attribute's holes."""
    if spec.kind == "continuous":
        return [("accuracy", t, tol, accuracy_within(true, imputed, tol)) for t, tol in enumerate(tolerances)]
    if spec.kind == "binary":
        b = specificity(true, imputed)
        return [("specificity", 0, "", b.specificity), ("sensitivity", 0, "", b.sensitivity),
                ("accuracy", 0, "", b.accuracy)]
    return [("accuracy", 0, "", 100.0 * float(np.mean(np.asarray(true) == np.asarray(imputed))))]


def benchmark(dataset: Dataset, pipelines, mask_plan: dict, seeds, config: BenchmarkConfig | None = None,
              include_baseline: bool = True) -> ImputationReport:
    """Train, mask, impute and score every pipeline for each seed.

    ``mask_plan`` maps attribute name to the MCAR fraction cleared in the test
    split. Networks and trees are trained once per seed and shared by the
    pipelines that use them.
    """
    config = config or BenchmarkConfig()
    seeds = [int(s) for s in seeds]
    if not seeds:
        raise DataError("benchmark needs at least one seed")
    specs = [p if isinstance(p, PipelineSpec) else PipelineSpec.parse(p) for p in pipelines]
    d = to_normalized(dataset)
    if not d.mask.all():
        raise DataError("benchmark expects a complete dataset before masking")
    schema = d.schema
    targets = [a for a in schema.names if a in mask_plan and mask_plan[a] > 0]
    labels = [s.label for s in specs] + ([BASELINE] if include_baseline else [])
    tol = ToleranceScheme.for_schema(schema)
    report = ImputationReport(labels, list(schema.names), tol,
                              {a.name: a.kind for a in schema.attributes}, seeds)

    for seed in seeds:
        sp = config.split
        train, val, test = split(d, SplitSpec(sp.train_fraction, sp.validation_fraction, sp.test_fraction, seed))
        masked = test
        for a in targets:
            masked = inject_mcar(masked, a, mask_plan[a], seed)
        holes = masked.masked_rows()
        truth = decode_rows(test.rows, schema)
        attr_mask = masked.attribute_mask()
        models, trees = {}, None
        outputs = []
        for spec in specs:
            if spec.variant not in models:
                cfg = TrainConfig(max_cycles=config.max_cycles[spec.variant], early_stop_patience=config.patience)
                models[spec.variant] = train_pipeline(
                    spec.variant, train, val, schema, hidden=config.hidden[spec.variant],
                    n_components=config.n_components, train_config=cfg, seed=seed)
            model = models[spec.variant]
            if spec.bounds == "tree":
                if trees is None:
                    pooled = np.vstack([train.rows, val.rows])
                    trees = {a: fit_attribute_tree(pooled, schema, a, config.tree) for a in targets}
                model.trees = trees
            ga_cfg = ga_mod.GaConfig(config.ga.population_size, config.ga.generations, config.ga.q,
                                     config.ga.crossover_rate, config.ga.mutation_rate, config.ga.b, seed)
            filled, _ = impute_rows(model, holes, spec.bounds, ga_cfg)
            outputs.append(filled)
            logger.info("seed %d: %s done", seed, spec.label)
        if include_baseline:
            base = masked
            for a in targets:
                base = impute_baseline_mean(base, a)
            outputs.append(base.rows)
        for section, filled in enumerate(outputs):
            imputed = decode_rows(filled, schema)
            for a in targets:
                j = schema.index(a)
                miss = ~attr_mask[:, j]
                n = int(miss.sum())
                if n == 0:
                    continue
                for metric, tier, tolerance, value in score_attribute(schema[a], truth[miss, j], imputed[miss, j],
                                                                  tol.tiers[a]):
                    report.per_seed.append(dict(seed=seed, section=section, attribute=a, metric=metric,
                                                tier=tier, tolerance=tolerance, n=n, value=value))
    report.check_monotone()
    return report
