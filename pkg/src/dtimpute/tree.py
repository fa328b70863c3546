"""Entropy-driven decision trees that predict a target attribute's interval.

Splits maximise plain information gain. Continuous features use binary
threshold tests at midpoints between consecutive distinct values; categorical
features branch once per level. Growth is limited by pre-pruning only.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from urllib.parse import quote

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .dataset import AttributeSpec
from .exceptions import DataError

_TIE = 1e-12


def entropy(counts) -> float:
    """Class entropy in bits of a vector of per-class counts."""
    c = np.asarray(counts, dtype=float)
    s = c.sum()
    if s <= 0:
        raise DataError("entropy of an empty set is undefined")
    p = c[c > 0] / s
    return float(max(0.0, -(p * np.log2(p)).sum()))


def expected_info(partition) -> float:
    """Size-weighted mean entropy of the subsets of a partition."""
    parts = [np.asarray(c, dtype=float) for c in partition]
    total = sum(c.sum() for c in parts)
    if total <= 0:
        raise DataError("all subsets are empty")
    return float(sum(c.sum() / total * entropy(c) for c in parts if c.sum() > 0))


def gain(parent, partition) -> float:
    parent = np.asarray(parent, dtype=float)
    summed = np.sum([np.asarray(c, dtype=float) for c in partition], axis=0)
    if summed.shape != parent.shape or not np.allclose(summed, parent):
        raise DataError("partition counts do not add up to the parent counts")
    return entropy(parent) - expected_info(partition)


def _entropy_rows(counts: np.ndarray) -> np.ndarray:
    """Row-wise entropy of a (k, m) count matrix; all-zero rows give 0."""
    s = counts.sum(axis=1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.where(s > 0, counts / np.where(s > 0, s, 1), 0.0)
        terms = np.where(p > 0, p * np.log2(np.where(p > 0, p, 1)), 0.0)
    return -terms.sum(axis=1)


@dataclass(frozen=True)
class SplitTest:
    feature: int
    threshold: float | None = None
    n_levels: int | None = None

    @property
    def is_threshold(self) -> bool:
        return self.threshold is not None

    def branch(self, value: float) -> int:
        if self.is_threshold:
            return 0 if value <= self.threshold else 1
        return int(value)


@dataclass
class TreeNode:
    label: int
    counts: np.ndarray
    test: SplitTest | None = None
    children: list["TreeNode"] = field(default_factory=list)

    @property
    def is_leaf(self) -> bool:
        return self.test is None

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    def depth(self) -> int:
        return 0 if self.is_leaf else 1 + max(c.depth() for c in self.children)

    def n_leaves(self) -> int:
        return 1 if self.is_leaf else sum(c.n_leaves() for c in self.children)


def best_split(X, y, n_classes, levels=None, features=None, min_leaf=1, min_gain=0.0):
    """Highest-gain admissible test at a node, or ``None``.

    ``levels[j]`` is the level count of categorical feature ``j`` (0 for
    continuous). A test is admissible when at least two branches receive
    ``min_leaf`` rows or more. Ties prefer the earlier feature, then the
    smaller threshold.

    Returns ``(SplitTest, gain)`` or ``None`` when no admissible test has
    positive gain of at least ``min_gain``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    n, p = X.shape
    levels = np.zeros(p, dtype=int) if levels is None else np.asarray(levels, dtype=int)
    features = range(p) if features is None else features
    onehot = np.eye(n_classes)[y]
    parent = onehot.sum(axis=0)
    h_parent = _entropy_rows(parent[None, :])[0]
    best, best_gain = None, -np.inf
    for j in features:
        v = X[:, j]
        if levels[j] > 0:
            counts = np.zeros((levels[j], n_classes))
            np.add.at(counts, v.astype(int), onehot)
            sizes = counts.sum(axis=1)
            if (sizes >= min_leaf).sum() < 2:
                continue
            g = h_parent - (sizes / n) @ _entropy_rows(counts)
            if g > best_gain + _TIE:
                best, best_gain = SplitTest(j, n_levels=int(levels[j])), g
            continue
        order = np.argsort(v, kind="stable")
        vs = v[order]
        left = np.cumsum(onehot[order], axis=0)[:-1]
        n_left = np.arange(1, n)
        ok = (vs[1:] > vs[:-1]) & (n_left >= min_leaf) & (n - n_left >= min_leaf)
        if not ok.any():
            continue
        idx = np.flatnonzero(ok)
        left = left[idx]
        right = parent - left
        nl = n_left[idx]
        g = h_parent - (nl * _entropy_rows(left) + (n - nl) * _entropy_rows(right)) / n
        top = g.max()
        k = np.flatnonzero(g >= top - _TIE)[0]
        if g[k] > best_gain + _TIE:
            i = idx[k]
            best, best_gain = SplitTest(j, threshold=float((vs[i] + vs[i + 1]) / 2)), float(g[k])
    # a zero-gain test separates nothing
    if best is None or best_gain <= _TIE or best_gain < min_gain:
        return None
    return best, float(best_gain)


class IntervalDecisionTree(ClassifierMixin, BaseEstimator):
    """Decision tree classifier grown by information gain.

    Parameters
    ----------
    min_leaf : int
        A test needs at least two branches with this many rows.
    min_gain : float
        Minimum information gain (bits) for a split.
    max_depth : int
        Nodes at this depth become leaves.
    levels : sequence of int, optional
        Level count per feature for categorical features, 0 for continuous.
    n_classes : int, optional
        Number of class labels; defaults to ``max(y) + 1``.

    Missing feature values (NaN) at prediction time follow the branch that
    received the most training rows.
    """

    def __init__(self, min_leaf=25, min_gain=1e-3, max_depth=12, levels=None, n_classes=None):
        self.min_leaf = min_leaf
        self.min_gain = min_gain
        self.max_depth = max_depth
        self.levels = levels
        self.n_classes = n_classes

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y)
        if X.ndim != 2 or X.shape[0] == 0:
            raise DataError("cannot induce a tree from an empty training set")
        if X.shape[0] != y.shape[0]:
            raise DataError("X and y have different row counts")
        if not np.isfinite(X).all():
            raise DataError("training features must be fully observed")
        if np.any(y < 0) or np.any(y != np.round(y)):
            raise DataError("class labels must be non-negative integers")
        y = y.astype(int)
        self.n_features_in_ = X.shape[1]
        self.levels_ = (np.zeros(X.shape[1], dtype=int) if self.levels is None
                        else np.asarray(self.levels, dtype=int))
        if self.levels_.shape != (X.shape[1],):
            raise DataError("levels must give one entry per feature")
        self.n_classes_ = int(self.n_classes if self.n_classes is not None else y.max() + 1)
        self.classes_ = np.arange(self.n_classes_)
        self.tree_ = self._grow(X, y, 0)
        return self

    def _grow(self, X, y, depth):
        counts = np.bincount(y, minlength=self.n_classes_).astype(float)
        node = TreeNode(label=int(np.argmax(counts)), counts=counts)
        if (counts > 0).sum() <= 1 or len(y) < self.min_leaf or depth >= self.max_depth:
            return node
        found = best_split(X, y, self.n_classes_, self.levels_,
                           min_leaf=self.min_leaf, min_gain=self.min_gain)
        if found is None:
            return node
        test, _ = found
        node.test = test
        branch = (X[:, test.feature] > test.threshold).astype(int) if test.is_threshold \
            else X[:, test.feature].astype(int)
        n_branches = 2 if test.is_threshold else test.n_levels
        for b in range(n_branches):
            sel = branch == b
            if sel.any():
                node.children.append(self._grow(X[sel], y[sel], depth + 1))
            else:
                node.children.append(TreeNode(label=node.label, counts=np.zeros(self.n_classes_)))
        return node

    def predict_one(self, row) -> int:
        node = self.tree_
        while not node.is_leaf:
            v = row[node.test.feature]
            if v is None or np.isnan(v):
                node = max(node.children, key=lambda c: c.n)
            else:
                node = node.children[node.test.branch(v)]
        return node.label

    def predict(self, X):
        check_is_fitted(self, "tree_")
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n_features_in_:
            raise DataError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        return np.array([self.predict_one(r) for r in X], dtype=int)

    def to_text(self, feature_names=None) -> str:
        """Line-per-node dump, two-space indentation per depth level."""
        check_is_fitted(self, "tree_")
        names = [quote(n, safe="'") for n in
                 (feature_names or [f"x{j}" for j in range(self.n_features_in_)])]
        lines = ["tree v1",
                 f"classes {self.n_classes_}",
                 "features " + " ".join(names),
                 "levels " + " ".join(str(int(k)) for k in self.levels_),
                 f"params min_leaf={self.min_leaf} min_gain={self.min_gain!r} max_depth={self.max_depth}"]

        def emit(node, depth):
            counts = ",".join(str(int(c)) for c in node.counts)
            pad = "  " * depth
            if node.is_leaf:
                lines.append(f"{pad}leaf label={node.label} counts={counts}")
                return
            t = node.test
            test = f"threshold={t.threshold!r}" if t.is_threshold else f"branches={t.n_levels}"
            lines.append(f"{pad}split {names[t.feature]} {test} label={node.label} counts={counts}")
            for c in node.children:
                emit(c, depth + 1)

        emit(self.tree_, 0)
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "IntervalDecisionTree":
        lines = text.splitlines()
        if not lines or lines[0] != "tree v1":
            raise DataError("not a tree v1 file")
        n_classes = int(lines[1].split()[1])
        names = lines[2].split()[1:]
        levels = [int(k) for k in lines[3].split()[1:]]
        params = dict(kv.split("=") for kv in lines[4].split()[1:])
        est = cls(min_leaf=int(params["min_leaf"]), min_gain=float(params["min_gain"]),
                  max_depth=int(params["max_depth"]), levels=levels, n_classes=n_classes)
        pos = 5

        def parse(depth):
            nonlocal pos
            line = lines[pos]
            pos += 1
            if len(line) - len(line.lstrip(" ")) != 2 * depth:
                raise DataError(f"tree file: bad indentation at line {pos}")
            parts = line.split()
            fields = dict(p.split("=") for p in parts if "=" in p)
            counts = np.array([float(c) for c in fields["counts"].split(",")])
            node = TreeNode(label=int(fields["label"]), counts=counts)
            if parts[0] == "leaf":
                return node
            j = names.index(parts[1])
            if "threshold" in fields:
                node.test, n_children = SplitTest(j, threshold=float(fields["threshold"])), 2
            else:
                n_children = int(fields["branches"])
                node.test = SplitTest(j, n_levels=n_children)
            node.children = [parse(depth + 1) for _ in range(n_children)]
            return node

        est.tree_ = parse(0)
        est.n_features_in_ = len(names)
        est.levels_ = np.asarray(levels, dtype=int)
        est.n_classes_ = n_classes
        est.classes_ = np.arange(n_classes)
        return est


@dataclass(frozen=True)
class IntervalScheme:
    """Bins over a continuous attribute's range, anchored at its minimum.

    ``edges`` holds the bin starts followed by the maximum. For real-valued
    attributes bin ``i`` is ``[edges[i], edges[i+1])`` with the last bin closed.
    For integer attributes a width ``w`` bin is the closed run of ``w + 1``
    integers ``[edges[i], edges[i] + w]`` (e.g. 20-24, 25-29), so consecutive
    bins start ``w + 1`` apart.
    """
    attribute: str
    width: float
    edges: tuple[float, ...]
    integer: bool = False

    @classmethod
    def for_attribute(cls, spec: AttributeSpec, width: float | None = None) -> "IntervalScheme":
        if spec.kind != "continuous":
            raise DataError(f"interval schemes apply to continuous attributes, not {spec.name!r}")
        width = float(width or spec.interval or spec.span / 10.0)
        step = width + 1 if spec.integer else width
        if spec.integer:
            span = spec.span + 1
            if width != round(width):
                raise DataError(f"{spec.name!r}: integer attributes need an integer interval width")
        else:
            span = spec.span
        n_bins = max(1, int(np.ceil(span / step - 1e-9)))
        edges = [spec.min + k * step for k in range(n_bins)] + [spec.max]
        return cls(spec.name, width, tuple(float(e) for e in edges), bool(spec.integer))

    @property
    def n_bins(self) -> int:
        return len(self.edges) - 1

    def label(self, values) -> np.ndarray:
        inner = np.asarray(self.edges[1:-1])
        return np.searchsorted(inner, np.asarray(values, dtype=float), side="right")

    def interval(self, label: int) -> tuple[float, float]:
        """Raw-unit ``(lo, hi)`` covered by bin ``label``."""
        lo = self.edges[label]
        if self.integer:
            return lo, min(lo + self.width, self.edges[-1])
        return lo, self.edges[label + 1]


def induce(X, y, n_classes=None, levels=None, min_leaf=25, min_gain=1e-3, max_depth=12):
    """Grow a tree; thin functional wrapper over :class:`IntervalDecisionTree`."""
    return IntervalDecisionTree(min_leaf=min_leaf, min_gain=min_gain, max_depth=max_depth,
                                levels=levels, n_classes=n_classes).fit(X, y)


def predict_interval(tree: IntervalDecisionTree, row) -> int:
    return tree.predict_one(np.asarray(row, dtype=float))
