"""Run configuration: an INI-style file plus command-line overrides.

Recognized sections and keys (all optional)::

    [run]       schema, data, pipeline, bounds, seed, out, strict
    [network]   hidden, cycles, patience, n_components,
                aann_hidden, aann_cycles, pca_nn_hidden, pca_nn_cycles
    [ga]        population_size, generations, q, crossover_rate, mutation_rate, b
    [tree]      min_leaf, min_gain, max_depth
    [split]     train, validation, test
    [benchmark] pipelines, seeds, targets, mask_fraction
    [sweep]     hidden, cycles, pca_tolerance

``hidden`` and ``cycles`` apply to the selected pipeline (train, sweep).
The benchmark trains both variants and reads the ``aann_*``/``pca_nn_*``
keys instead. Missing values fall back to the per-variant defaults.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

from .dataset import SplitSpec
from .exceptions import DataError
from .ga import GaConfig
from .imputer import DEFAULT_CYCLES, DEFAULT_HIDDEN, POLICIES, TreeParams, normalize_variant

DEFAULT_SEED = 0
DEFAULT_PIPELINES = ("aann/full", "aann/tree", "pca-nn/full", "pca-nn/tree")

_KNOWN = {
    "run": {"schema", "data", "pipeline", "bounds", "seed", "out", "strict"},
    "network": {"hidden", "cycles", "patience", "n_components",
                "aann_hidden", "aann_cycles", "pca_nn_hidden", "pca_nn_cycles"},
    "ga": {"population_size", "generations", "q", "crossover_rate", "mutation_rate", "b"},
    "tree": {"min_leaf", "min_gain", "max_depth"},
    "split": {"train", "validation", "test"},
    "benchmark": {"pipelines", "seeds", "targets", "mask_fraction"},
    "sweep": {"hidden", "cycles", "pca_tolerance"},
}


def parse_int_list(text: str) -> list[int]:
    """``"2,3,4"``, ``"2 3 4"`` or the inclusive range ``"2-6"``."""
    out = []
    for part in text.replace(",", " ").split():
        lo, sep, hi = part.partition("-")
        try:
            if sep and lo:
                out.extend(range(int(lo), int(hi) + 1))
            else:
                out.append(int(part))
        except ValueError:
            raise DataError(f"bad integer list {text!r}") from None
    return out


def _names(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


@dataclass
class RunConfig:
    schema: Path | None = None
    data: Path | None = None
    pipeline: str = "aann"
    bounds: str = "full"
    seed: int = DEFAULT_SEED
    out: Path = Path("out")
    strict: bool = True
    hidden: int | None = None
    cycles: int | None = None
    patience: int = 20
    variant_hidden: dict = field(default_factory=lambda: dict(DEFAULT_HIDDEN))
    variant_cycles: dict = field(default_factory=lambda: dict(DEFAULT_CYCLES))
    n_components: int = 7
    ga: GaConfig = field(default_factory=GaConfig)
    tree: TreeParams = field(default_factory=TreeParams)
    split: SplitSpec = field(default_factory=SplitSpec)
    pipelines: list[str] = field(default_factory=lambda: list(DEFAULT_PIPELINES))
    seeds: list[int] = field(default_factory=lambda: [0, 1, 2])
    targets: list[str] | None = None
    mask_fraction: float = 0.1
    sweep_hidden: list[int] | None = None
    sweep_cycles: int | None = None
    pca_tolerance: float = 0.01

    def __post_init__(self):
        self.pipeline = normalize_variant(self.pipeline)
        if self.bounds not in POLICIES:
            raise DataError(f"unknown bounds policy {self.bounds!r}")
        if self.seed < 0:
            raise DataError("seed must be non-negative")

    @property
    def hidden_nodes(self) -> int:
        return self.hidden or self.variant_hidden[self.pipeline]

    @property
    def max_cycles(self) -> int:
        return self.cycles or self.variant_cycles[self.pipeline]

    def require(self, *names) -> None:
        """Check that the named path fields are set and exist."""
        for name in names:
            p = getattr(self, name)
            if p is None:
                raise DataError(f"no {name} path given (use --{name} or [run] {name})")
            if not Path(p).exists():
                raise DataError(f"{name} file not found: {p}")


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Build a :class:`RunConfig` from an optional file, then apply non-None overrides."""
    cp = configparser.ConfigParser(interpolation=None)
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise DataError(f"config file not found: {path}")
        try:
            cp.read(path, encoding="utf-8")
        except configparser.Error as exc:
            raise DataError(f"{path}: {exc}") from exc
    for section in cp.sections():
        if section not in _KNOWN:
            raise DataError(f"unknown config section [{section}]")
        extra = set(cp[section]) - _KNOWN[section]
        if extra:
            raise DataError(f"unknown keys in [{section}]: {', '.join(sorted(extra))}")

    def get(section, key, conv=str, default=None):
        if not cp.has_option(section, key):
            return default
        raw = cp.get(section, key)
        try:
            return conv(raw)
        except ValueError:
            raise DataError(f"[{section}] {key}: bad value {raw!r}") from None

    def boolean(text):
        t = text.strip().lower()
        if t in ("1", "yes", "true", "on"):
            return True
        if t in ("0", "no", "false", "off"):
            return False
        raise ValueError(text)

    g = GaConfig()
    t = TreeParams()
    s = SplitSpec()
    values = dict(
        schema=get("run", "schema", Path),
        data=get("run", "data", Path),
        pipeline=get("run", "pipeline", default="aann"),
        bounds=get("run", "bounds", default="full"),
        seed=get("run", "seed", int, DEFAULT_SEED),
        out=get("run", "out", Path, Path("out")),
        strict=get("run", "strict", boolean, True),
        hidden=get("network", "hidden", int),
        cycles=get("network", "cycles", int),
        patience=get("network", "patience", int, 20),
        variant_hidden={v: get("network", f"{v}_hidden", int, DEFAULT_HIDDEN[v]) for v in DEFAULT_HIDDEN},
        variant_cycles={v: get("network", f"{v}_cycles", int, DEFAULT_CYCLES[v]) for v in DEFAULT_CYCLES},
        n_components=get("network", "n_components", int, 7),
        pipelines=get("benchmark", "pipelines", _names, list(DEFAULT_PIPELINES)),
        seeds=get("benchmark", "seeds", parse_int_list, [0, 1, 2]),
        targets=get("benchmark", "targets", _names),
        mask_fraction=get("benchmark", "mask_fraction", float, 0.1),
        sweep_hidden=get("sweep", "hidden", parse_int_list),
        sweep_cycles=get("sweep", "cycles", int),
        pca_tolerance=get("sweep", "pca_tolerance", float, 0.01),
    )
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = value
    ga = GaConfig(
        population_size=get("ga", "population_size", int, g.population_size),
        generations=get("ga", "generations", int, g.generations),
        q=get("ga", "q", float, g.q),
        crossover_rate=get("ga", "crossover_rate", float, g.crossover_rate),
        mutation_rate=get("ga", "mutation_rate", float, g.mutation_rate),
        b=get("ga", "b", float, g.b),
        seed=values["seed"],
    )
    tree = TreeParams(get("tree", "min_leaf", int, t.min_leaf), get("tree", "min_gain", float, t.min_gain),
                      get("tree", "max_depth", int, t.max_depth))
    sp = SplitSpec(get("split", "train", float, s.train_fraction),
                   get("split", "validation", float, s.validation_fraction),
                   get("split", "test", float, s.test_fraction), values["seed"])
    return RunConfig(ga=ga, tree=tree, split=sp, **values)
