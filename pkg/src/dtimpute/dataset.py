"""Tabular data: schema, CSV ingest, encoding, splitting and MCAR masking.

A :class:`Dataset` is in one of two layouts:

* ``raw``: one column per attribute. Continuous and binary attributes hold
  their value, categorical attributes hold the level index.
* ``normalized``: one column per encoded input. Continuous attributes are
  min-max scaled to [0, 1], categorical level indices become compact binary
  digit groups (most significant bit first), binary attributes pass through.

Masks mark present cells with ``True``. Values under a cleared mask are kept
so that imputations can be scored against them later.
"""
from __future__ import annotations

import configparser
import csv
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from ._random import substream
from .exceptions import DataError, SchemaError

logger = logging.getLogger(__name__)

KINDS = ("continuous", "categorical", "binary")


@dataclass(frozen=True)
class AttributeSpec:
    name: str
    kind: str
    min: float | None = None
    max: float | None = None
    levels: tuple[str, ...] = ()
    integer: bool = False
    interval: float | None = None
    tolerances: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"attribute {self.name!r}: unknown kind {self.kind!r}")
        if self.kind == "continuous":
            if self.min is None or self.max is None or not self.min < self.max:
                raise SchemaError(f"attribute {self.name!r}: continuous needs min < max")
            if self.interval is not None and self.interval <= 0:
                raise SchemaError(f"attribute {self.name!r}: interval must be positive")
        if self.kind == "categorical":
            if len(self.levels) < 2:
                raise SchemaError(f"attribute {self.name!r}: need at least 2 levels")
            if len(set(self.levels)) != len(self.levels):
                raise SchemaError(f"attribute {self.name!r}: duplicate levels")
        if any(b <= a for a, b in zip(self.tolerances, self.tolerances[1:])):
            raise SchemaError(f"attribute {self.name!r}: tolerances must increase")

    @property
    def encoded_width(self) -> int:
        if self.kind == "categorical":
            return max(1, math.ceil(math.log2(len(self.levels))))
        return 1

    @property
    def span(self) -> float:
        return self.max - self.min


@dataclass(frozen=True)
class Schema:
    attributes: tuple[AttributeSpec, ...]
    _offsets: tuple[int, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "attributes", tuple(self.attributes))
        if not self.attributes:
            raise SchemaError("schema has no attributes")
        names = [a.name for a in self.attributes]
        if len(set(names)) != len(names):
            raise SchemaError("attribute names must be unique")
        offsets = np.cumsum([0] + [a.encoded_width for a in self.attributes])
        object.__setattr__(self, "_offsets", tuple(int(o) for o in offsets))

    @property
    def names(self) -> list[str]:
        return [a.name for a in self.attributes]

    @property
    def total_width(self) -> int:
        return self._offsets[-1]

    def __len__(self):
        return len(self.attributes)

    def __getitem__(self, name: str) -> AttributeSpec:
        return self.attributes[self.index(name)]

    def index(self, name: str) -> int:
        for i, a in enumerate(self.attributes):
            if a.name == name:
                return i
        raise SchemaError(f"unknown attribute {name!r}")

    def columns(self, name: str) -> slice:
        i = self.index(name)
        return slice(self._offsets[i], self._offsets[i + 1])

    def column_owner(self) -> np.ndarray:
        """Attribute index owning each encoded column."""
        return np.repeat(np.arange(len(self)), [a.encoded_width for a in self.attributes])


def read_schema(path) -> Schema:
    """Parse a schema file: one ``[name]`` section per attribute, in order.

    Recognised keys are ``kind``, ``min``, ``max``, ``levels`` (comma
    separated), ``integer``, ``interval`` and ``tolerances``.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"schema file not found: {path}")
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise SchemaError(f"{path}: {exc}") from exc
    attrs = []
    for name in parser.sections():
        sec = parser[name]
        try:
            attrs.append(AttributeSpec(
                name=name,
                kind=sec.get("kind", "continuous").strip(),
                min=sec.getfloat("min"),
                max=sec.getfloat("max"),
                levels=tuple(s.strip() for s in sec.get("levels", "").split(",") if s.strip()),
                integer=sec.getboolean("integer", False),
                interval=sec.getfloat("interval"),
                tolerances=tuple(float(s) for s in sec.get("tolerances", "").split(",") if s.strip()),
            ))
        except ValueError as exc:
            if isinstance(exc, SchemaError):
                raise
            raise SchemaError(f"{path}: attribute {name!r}: {exc}") from exc
    return Schema(tuple(attrs))


def _fmt(v: float) -> str:
    return repr(float(v))


def write_schema(schema: Schema, path) -> None:
    lines = []
    for a in schema.attributes:
        lines.append(f"[{a.name}]")
        lines.append(f"kind = {a.kind}")
        if a.kind == "continuous":
            lines.append(f"min = {_fmt(a.min)}")
            lines.append(f"max = {_fmt(a.max)}")
            if a.integer:
                lines.append("integer = yes")
            if a.interval is not None:
                lines.append(f"interval = {_fmt(a.interval)}")
        if a.kind == "categorical":
            lines.append("levels = " + ", ".join(a.levels))
        if a.tolerances:
            lines.append("tolerances = " + ", ".join(_fmt(t) for t in a.tolerances))
        lines.append("")
    Path(path).write_text("\n".join(lines), encoding="utf-8")


@dataclass(frozen=True)
class Dataset:
    schema: Schema
    rows: np.ndarray
    mask: np.ndarray
    provenance: str = "raw"

    def __post_init__(self):
        rows = np.array(self.rows, dtype=float)
        mask = np.array(self.mask, dtype=bool)
        width = self.schema.total_width if self.provenance == "normalized" else len(self.schema)
        if self.provenance not in ("raw", "normalized"):
            raise DataError(f"unknown provenance {self.provenance!r}")
        if rows.ndim != 2 or rows.shape[1] != width or rows.shape[0] < 1:
            raise DataError(f"rows must be M x {width} with M >= 1, got {rows.shape}")
        if mask.shape != rows.shape:
            raise DataError("mask shape must match rows")
        if self.provenance == "normalized":
            present = rows[mask]
            if present.size and (present.min() < 0.0 or present.max() > 1.0):
                raise DataError("normalized values must lie in [0, 1]")
            owner = self.schema.column_owner()
            for i in range(len(self.schema)):
                group = mask[:, owner == i]
                if not np.all(group == group[:, :1]):
                    raise DataError(f"mask for {self.schema.attributes[i].name!r} is not uniform across its columns")
        rows.setflags(write=False)
        mask.setflags(write=False)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "mask", mask)

    def __len__(self):
        return self.rows.shape[0]

    @property
    def n_rows(self) -> int:
        return self.rows.shape[0]

    def attribute_mask(self) -> np.ndarray:
        """M x n_attributes presence matrix, whatever the layout."""
        if self.provenance == "raw":
            return self.mask.copy()
        starts = [self.schema.columns(n).start for n in self.schema.names]
        return self.mask[:, starts].copy()

    def masked_rows(self) -> np.ndarray:
        """Copy of ``rows`` with NaN wherever the mask is cleared."""
        out = self.rows.copy()
        out[~self.mask] = np.nan
        return out

    def take(self, index) -> "Dataset":
        index = np.asarray(index)
        return replace(self, rows=self.rows[index], mask=self.mask[index])

    def complete_rows(self) -> "Dataset":
        keep = np.flatnonzero(self.mask.all(axis=1))
        if keep.size == 0:
            raise DataError("no complete rows")
        return self.take(keep)


def _parse_cell(spec: AttributeSpec, text: str, line: int, strict: bool, clamped: list):
    where = f"row {line}, column {spec.name!r}"
    if spec.kind == "categorical":
        try:
            return float(spec.levels.index(text))
        except ValueError:
            raise DataError(f"{where}: unknown level {text!r}") from None
    try:
        value = float(text)
    except ValueError:
        raise DataError(f"{where}: cannot parse {text!r} as a number") from None
    if not math.isfinite(value):
        raise DataError(f"{where}: non-finite value {text!r}")
    if spec.kind == "binary":
        if value not in (0.0, 1.0):
            raise DataError(f"{where}: binary value must be 0 or 1, got {text!r}")
        return value
    if value < spec.min or value > spec.max:
        if strict:
            raise DataError(f"{where}: value {text} outside [{spec.min:g}, {spec.max:g}]")
        clamped.append(where)
        value = min(max(value, spec.min), spec.max)
    return value


def load_csv(path, schema: Schema, strict: bool = True) -> Dataset:
    """Read a CSV file into a raw :class:`Dataset`; empty cells are missing."""
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            lines = list(csv.reader(fh))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if not lines:
        raise DataError(f"{path}: empty file")
    header = [h.strip() for h in lines[0]]
    if header != schema.names:
        raise DataError(f"{path}: header {header} does not match schema {schema.names}")
    body = [ln for ln in lines[1:] if ln]
    if not body:
        raise DataError(f"{path}: no data rows")
    rows = np.full((len(body), len(schema)), np.nan)
    mask = np.zeros(rows.shape, dtype=bool)
    clamped: list[str] = []
    for r, cells in enumerate(body):
        if len(cells) != len(schema):
            raise DataError(f"{path}: row {r + 1} has {len(cells)} fields, expected {len(schema)}")
        for c, (spec, cell) in enumerate(zip(schema.attributes, cells)):
            cell = cell.strip()
            if cell == "":
                continue
            rows[r, c] = _parse_cell(spec, cell, r + 1, strict, clamped)
            mask[r, c] = True
    if clamped:
        logger.warning("%s: clamped %d out-of-range values", path, len(clamped))
    return Dataset(schema, rows, mask, "raw")


def encode_rows(raw: np.ndarray, schema: Schema) -> np.ndarray:
    """Encode an M x n_attributes raw matrix into M x total_width. NaN stays NaN."""
    raw = np.atleast_2d(np.asarray(raw, dtype=float))
    out = np.full((raw.shape[0], schema.total_width), np.nan)
    for i, spec in enumerate(schema.attributes):
        cols = schema.columns(spec.name)
        v = raw[:, i]
        if spec.kind == "continuous":
            out[:, cols] = ((v - spec.min) / spec.span)[:, None]
        elif spec.kind == "binary":
            out[:, cols] = v[:, None]
        else:
            ok = ~np.isnan(v)
            out[ok, cols] = level_bits(v[ok].astype(int), spec.encoded_width)
    return out


def encode_normalize(d: Dataset) -> Dataset:
    if d.provenance != "raw":
        raise DataError("encode_normalize expects a raw dataset")
    # encoding works on the stored values, so ground truth under a cleared mask survives
    rows = encode_rows(d.rows, d.schema)
    mask = d.mask[:, d.schema.column_owner()]
    return Dataset(d.schema, rows, mask, "normalized")


def level_bits(index, width: int) -> np.ndarray:
    """Binary digits of each level index, most significant bit first."""
    index = np.asarray(index, dtype=int)
    shifts = np.arange(width - 1, -1, -1)
    return ((index[..., None] >> shifts) & 1).astype(float)


def nearest_level(bits: np.ndarray, n_levels: int) -> np.ndarray:
    """Valid level whose bit pattern is closest (Euclidean) to each soft bit group.

    Ties go to the lower index. When the bitwise-rounded pattern is itself a
    valid level it is always the nearest vertex, so this reduces to rounding.
    """
    bits = np.atleast_2d(np.asarray(bits, dtype=float))
    patterns = level_bits(np.arange(n_levels), bits.shape[1])
    d2 = ((bits[:, None, :] - patterns[None, :, :]) ** 2).sum(axis=2)
    return np.argmin(d2, axis=1)


def decode_rows(rows: np.ndarray, schema: Schema) -> np.ndarray:
    """Inverse of :func:`encode_rows`: M x total_width to M x n_attributes raw values."""
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    if rows.shape[1] != schema.total_width:
        raise DataError(f"row width {rows.shape[1]} != schema width {schema.total_width}")
    out = np.full((rows.shape[0], len(schema)), np.nan)
    for i, spec in enumerate(schema.attributes):
        block = rows[:, schema.columns(spec.name)]
        ok = ~np.isnan(block).any(axis=1)
        if spec.kind == "continuous":
            v = block[ok, 0] * spec.span + spec.min
            if spec.integer:
                v = np.round(v)
            out[ok, i] = np.clip(v, spec.min, spec.max)
        elif spec.kind == "binary":
            out[ok, i] = (block[ok, 0] >= 0.5).astype(float)
        else:
            out[ok, i] = nearest_level(block[ok], len(spec.levels))
    return out


def decode(row, schema: Schema) -> dict:
    """Decode one encoded row into ``{attribute name: value}``.

    Categorical attributes come back as their level label, binary as 0/1.
    """
    raw = decode_rows(np.asarray(row, dtype=float)[None, :], schema)[0]
    record = {}
    for spec, v in zip(schema.attributes, raw):
        if np.isnan(v):
            record[spec.name] = None
        elif spec.kind == "categorical":
            record[spec.name] = spec.levels[int(v)]
        elif spec.kind == "binary":
            record[spec.name] = int(v)
        else:
            record[spec.name] = float(v)
    return record


def to_normalized(d: Dataset) -> Dataset:
    return d if d.provenance == "normalized" else encode_normalize(d)


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.8
    validation_fraction: float = 0.1
    test_fraction: float = 0.1
    seed: int = 0

    def __post_init__(self):
        fr = (self.train_fraction, self.validation_fraction, self.test_fraction)
        if min(fr) <= 0 or abs(sum(fr) - 1.0) > 1e-9:
            raise DataError(f"split fractions must be positive and sum to 1, got {fr}")


def split_sizes(m: int, s: SplitSpec) -> tuple[int, int, int]:
    # validation/test sizes are floored so leftovers land in train
    n_val = int(math.floor(s.validation_fraction * m + 1e-9))
    n_test = int(math.floor(s.test_fraction * m + 1e-9))
    return m - n_val - n_test, n_val, n_test


def split(d: Dataset, s: SplitSpec) -> tuple[Dataset, Dataset, Dataset]:
    if d.provenance != "normalized":
        raise DataError("split expects a normalized dataset")
    sizes = split_sizes(d.n_rows, s)
    if min(sizes) < 1:
        raise DataError(f"split of {d.n_rows} rows gives an empty partition {sizes}")
    perm = substream(s.seed, "split").permutation(d.n_rows)
    a, b = sizes[0], sizes[0] + sizes[1]
    return d.take(perm[:a]), d.take(perm[a:b]), d.take(perm[b:])


def inject_mcar(d: Dataset, attribute: str, fraction: float, seed: int) -> Dataset:
    """Clear the mask of ``round(fraction * M)`` uniformly chosen rows of one attribute."""
    if not 0.0 < fraction < 1.0:
        raise DataError(f"fraction must be in (0, 1), got {fraction}")
    i = d.schema.index(attribute)
    cols = d.schema.columns(attribute) if d.provenance == "normalized" else slice(i, i + 1)
    if not d.mask[:, cols].all():
        raise DataError(f"attribute {attribute!r} is not fully observed")
    count = int(round(fraction * d.n_rows))
    if count == 0:
        raise DataError(f"fraction {fraction} of {d.n_rows} rows masks nothing")
    chosen = substream(seed, "mask", i).choice(d.n_rows, size=count, replace=False)
    mask = d.mask.copy()
    mask[chosen, cols] = False
    return replace(d, mask=mask)


def attribute_values(rows: np.ndarray, schema: Schema) -> np.ndarray:
    """Per-attribute feature matrix used by the interval trees.

    Continuous attributes keep their normalized value, binary attributes
    their 0/1 value, categorical attributes their decoded level index.
    Any attribute with a NaN in its columns is NaN.
    """
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    out = np.full((rows.shape[0], len(schema)), np.nan)
    for i, spec in enumerate(schema.attributes):
        block = rows[:, schema.columns(spec.name)]
        ok = ~np.isnan(block).any(axis=1)
        if spec.kind == "categorical":
            out[ok, i] = nearest_level(block[ok], len(spec.levels))
        else:
            out[ok, i] = block[ok, 0]
    return out


def from_records(records: Sequence[dict], schema: Schema) -> Dataset:
    """Build a raw Dataset from dicts (categoricals given by label); ``None`` is missing."""
    rows = np.full((len(records), len(schema)), np.nan)
    mask = np.zeros(rows.shape, dtype=bool)
    for r, rec in enumerate(records):
        for c, spec in enumerate(schema.attributes):
            v = rec.get(spec.name)
            if v is None:
                continue
            rows[r, c] = spec.levels.index(v) if spec.kind == "categorical" else float(v)
            mask[r, c] = True
    return Dataset(schema, rows, mask, "raw")


def write_csv(path, raw: np.ndarray, schema: Schema) -> None:
    """Write an M x n_attributes raw matrix (NaN = empty cell)."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(schema.names)
        for row in np.atleast_2d(raw):
            w.writerow([format_value(spec, v) for spec, v in zip(schema.attributes, row)])


def format_value(spec: AttributeSpec, v: float) -> str:
    if v is None or np.isnan(v):
        return ""
    if spec.kind == "categorical":
        return spec.levels[int(v)]
    if spec.kind == "binary" or spec.integer:
        return str(int(round(v)))
    return repr(float(v))
