"""Command-line front end: ``dtimpute {train,impute,benchmark,sweep}``.

Exit codes: 0 on success, 1 for data or configuration errors, 2 for
numerical failures. Logging goes to stderr at the level named by
``IMPUTE_LOG`` (error, warning, info or debug; default warning).
"""
from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .config import RunConfig, load_config
from .dataset import (Schema, decode_rows, encode_rows, format_value, load_csv, read_schema, split,
                      to_normalized)
from .evaluate import BenchmarkConfig, benchmark
from .exceptions import DataError, DivergenceError, ImputeError
from .imputer import PipelineModel, impute_rows, train_pipeline
from .mlp import TrainConfig, init_model, train_scg, sweep_hidden_nodes
from .pca import choose_dimension, fit_pca, project

logger = logging.getLogger("dtimpute")


def _setup_logging() -> None:
    name = os.environ.get("IMPUTE_LOG", "warning").strip().upper()
    level = getattr(logging, name) if name in ("ERROR", "WARNING", "INFO", "DEBUG") else logging.WARNING
    logger.setLevel(level)
    if not logger.handlers:
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
        logger.addHandler(handler)


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _csv_text(header, rows) -> str:
    lines = [",".join(header)]
    lines += [",".join(v if isinstance(v, str) else repr(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def _complete_data(cfg: RunConfig):
    cfg.require("schema", "data")
    schema = read_schema(cfg.schema)
    d = load_csv(cfg.data, schema, strict=cfg.strict)
    complete = d.complete_rows()
    dropped = d.n_rows - complete.n_rows
    if dropped:
        logger.info("excluded %d rows with missing values", dropped)
    if complete.n_rows < 3:
        raise DataError(f"{cfg.data}: fewer than 3 complete rows")
    return schema, to_normalized(complete)


def cmd_train(cfg: RunConfig) -> Path:
    """Train a pipeline (network, PCA if any, one tree per attribute) and save it."""
    schema, d = _complete_data(cfg)
    train, val, _ = split(d, cfg.split)
    model = train_pipeline(cfg.pipeline, train, val, schema, hidden=cfg.hidden_nodes,
                           n_components=cfg.n_components,
                           train_config=TrainConfig(cfg.max_cycles, cfg.patience),
                           tree_params=cfg.tree, tree_targets="all", seed=cfg.seed)
    model.save(cfg.out)
    rep = model.reports["network"]
    logger.info("trained %s: best validation RMSE %.6f at cycle %d", model.variant,
                rep.best_validation, rep.best_cycle)
    return Path(cfg.out)


def _check_schema(model: PipelineModel, cfg: RunConfig) -> Schema:
    if cfg.schema is not None:
        cfg.require("schema")
        given = read_schema(cfg.schema)
        if given != model.schema:
            raise DataError(f"schema {cfg.schema} does not match the model schema")
    return model.schema


def cmd_impute(cfg: RunConfig, model_dir) -> tuple[Path, Path]:
    """Fill the empty cells of ``cfg.data``; other cells are copied verbatim."""
    if model_dir is None or not Path(model_dir).is_dir():
        raise DataError(f"model directory not found: {model_dir}")
    model = PipelineModel.load(model_dir)
    schema = _check_schema(model, cfg)
    cfg.require("data")
    d = load_csv(cfg.data, schema, strict=cfg.strict)
    filled, diags = impute_rows(model, encode_rows(d.rows, schema), cfg.bounds, cfg.ga)
    values = decode_rows(filled, schema)

    with Path(cfg.data).open(newline="", encoding="utf-8") as fh:
        lines = [ln for ln in csv.reader(fh) if ln]
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    imputed_path, diag_path = out / "imputed.csv", out / "diagnostics.csv"
    with imputed_path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(lines[0])
        for r, cells in enumerate(lines[1:]):
            w.writerow([c if c.strip() else format_value(spec, values[r, j])
                        for j, (spec, c) in enumerate(zip(schema.attributes, cells))])

    rows = []
    for diag in diags:
        k = 0
        for name in diag.attributes:
            width = schema[name].encoded_width
            lo = ";".join(repr(float(v)) for v in diag.lo[k:k + width])
            hi = ";".join(repr(float(v)) for v in diag.hi[k:k + width])
            rows.append([str(diag.row + 1), name, lo, hi, repr(float(diag.error))])
            k += width
    _write(diag_path, _csv_text(["row", "attribute", "lo", "hi", "error"], rows))
    logger.info("imputed %d records", len(diags))
    return imputed_path, diag_path


def cmd_benchmark(cfg: RunConfig) -> Path:
    """Run every configured pipeline over the configured seeds; write the reports."""
    schema, d = _complete_data(cfg)
    targets = cfg.targets or [a.name for a in schema.attributes if a.kind != "categorical"]
    for t in targets:
        schema.index(t)
    bcfg = BenchmarkConfig(split=cfg.split, hidden=dict(cfg.variant_hidden),
                           max_cycles=dict(cfg.variant_cycles), n_components=cfg.n_components,
                           patience=cfg.patience, ga=cfg.ga, tree=cfg.tree)
    report = benchmark(d, cfg.pipelines, {t: cfg.mask_fraction for t in targets}, cfg.seeds, bcfg)
    out = Path(cfg.out)
    _write(out / "report.txt", report.to_text())
    _write(out / "report.csv", report.to_csv())
    _write(out / "per_seed.csv", report.per_seed_csv())
    return out


def cmd_sweep(cfg: RunConfig) -> str:
    """Hidden-node table, training curves and PCA dimension table for one pipeline."""
    _, d = _complete_data(cfg)
    train, val, _ = split(d, cfg.split)
    X, Xv = np.asarray(train.rows), np.asarray(val.rows)
    n = X.shape[1]
    cycles = cfg.sweep_cycles or cfg.max_cycles
    k_best, k_table = choose_dimension(np.vstack([X, Xv]), cfg.pca_tolerance)
    if cfg.pipeline == "aann":
        Y, Yv, output = X, Xv, "sigmoid"
        candidates = cfg.sweep_hidden or list(range(2, n))
    else:
        pca = fit_pca(np.vstack([X, Xv]), cfg.n_components)
        Y, Yv, output = project(pca, X), project(pca, Xv), "linear"
        candidates = cfg.sweep_hidden or list(range(2, 2 * n + 1, 2))
    h_table, h_best = sweep_hidden_nodes(X, Y, candidates, cycles, cfg.seed, output,
                                         autoencoder=cfg.pipeline == "aann")
    net = init_model((n, cfg.hidden_nodes, Y.shape[1]), cfg.seed, output)
    _, rep = train_scg(net, (X, Y), (Xv, Yv), TrainConfig(cycles, cycles + 1))

    out = Path(cfg.out)
    _write(out / "hidden_nodes.csv", _csv_text(["hidden", "train_rmse"], [(str(h), e) for h, e in h_table]))
    _write(out / "training_cycles.csv", _csv_text(
        ["cycle", "train_rmse", "validation_rmse"],
        [(str(i), a, b) for i, (a, b) in enumerate(zip(rep.train_rmse, rep.validation_rmse))]))
    _write(out / "pca_dimensions.csv", _csv_text(["k", "rmse"], [(str(k), e) for k, e in k_table]))
    summary = (f"pipeline={cfg.pipeline} hidden={h_best} best_cycle={rep.best_cycle} "
               f"pca_k={k_best} (tolerance {cfg.pca_tolerance:g})")
    _write(out / "summary.txt", summary + "\n")
    return summary


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="INI-style run configuration")
    common.add_argument("--schema", type=Path, help="schema file")
    common.add_argument("--data", type=Path, help="CSV dataset")
    common.add_argument("--pipeline", choices=("aann", "pca-nn"), help="data model variant")
    common.add_argument("--bounds", choices=("full", "tree"), help="GA search bounds policy")
    common.add_argument("--seed", type=int, help="master random seed")
    common.add_argument("--out", type=Path, help="output directory")

    p = argparse.ArgumentParser(prog="dtimpute", description="Decision-tree bounded GA imputation.")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("train", parents=[common], help="train and save a pipeline model")
    imp = sub.add_parser("impute", parents=[common], help="fill empty cells of a CSV file")
    imp.add_argument("--model", type=Path, required=True, help="model directory written by train")
    sub.add_parser("benchmark", parents=[common], help="mask, impute and score over several seeds")
    sub.add_parser("sweep", parents=[common], help="hidden-node, training-cycle and PCA-dimension tables")
    return p


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, dict(schema=args.schema, data=args.data, pipeline=args.pipeline,
                                            bounds=args.bounds, seed=args.seed, out=args.out))
        if args.command == "train":
            print(f"model written to {cmd_train(cfg)}")
        elif args.command == "impute":
            imputed, _ = cmd_impute(cfg, args.model)
            print(f"imputed data written to {imputed}")
        elif args.command == "benchmark":
            print(f"reports written to {cmd_benchmark(cfg)}")
        else:
            print(cmd_sweep(cfg))
    except (DivergenceError, FloatingPointError) as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return 2
    except (ImputeError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
