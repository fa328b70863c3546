import csv
import filecmp

import pytest

from dtimpute import cli
from dtimpute.config import load_config, parse_int_list
from dtimpute.dataset import AttributeSpec, Schema, write_csv, write_schema
from dtimpute.exceptions import DataError, DivergenceError
from dtimpute.imputer import PipelineModel
from dtimpute.synthetic import low_rank, survey_like


def run(*argv):
    return cli.main(list(argv))


def read(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


def same_tree(a, b):
    cmp = filecmp.dircmp(a, b)
    return not (cmp.diff_files or cmp.left_only or cmp.right_only) and \
        all(filecmp.cmp(a / f, b / f, shallow=False) for f in cmp.common_files)


def test_train_writes_reloadable_model(cwd):
    assert run("train", "--config", "run.ini", "--out", "m", "--pipeline", "pca-nn") == 0
    for f in ("schema.txt", "pipeline.txt", "network.txt", "pca.txt", "train_report_network.txt"):
        assert (cwd / "m" / f).is_file()
    model = PipelineModel.load(cwd / "m")
    assert model.variant == "pca_nn" and len(model.trees) == 7
    model.save(cwd / "m2")
    # model files reload losslessly (report files are not part of the loaded model)
    for f in ("schema.txt", "pipeline.txt", "network.txt", "pca.txt", "tree_00.txt"):
        assert (cwd / "m" / f).read_bytes() == (cwd / "m2" / f).read_bytes()


def test_train_rerun_byte_identical(cwd):
    assert run("train", "--config", "run.ini", "--out", "a") == 0
    assert run("train", "--config", "run.ini", "--out", "b") == 0
    assert same_tree(cwd / "a", cwd / "b")
    assert run("train", "--config", "run.ini", "--out", "c", "--seed", "9") == 0
    assert (cwd / "a" / "network.txt").read_bytes() != (cwd / "c" / "network.txt").read_bytes()


def test_missing_schema_exit_1(cwd, capsys):
    assert run("train", "--schema", "nope.txt", "--data", "data.csv") == 1
    assert "nope.txt" in capsys.readouterr().err


def test_missing_config_exit_1(cwd, capsys):
    assert run("train", "--config", "absent.ini") == 1
    assert "absent.ini" in capsys.readouterr().err


def test_numerical_failure_exit_2(cwd, monkeypatch):
    def fail(cfg):
        raise DivergenceError("weights became non-finite")

    monkeypatch.setattr(cli, "cmd_train", fail)
    assert run("train", "--config", "run.ini") == 2


def test_impute_fills_only_holes(cwd):
    assert run("train", "--config", "run.ini", "--out", "m") == 0
    assert run("impute", "--config", "run.ini", "--model", "m", "--data", "holes.csv",
               "--bounds", "tree", "--out", "imp") == 0
    before, after = read(cwd / "holes.csv"), read(cwd / "imp" / "imputed.csv")
    assert len(before) == len(after) and before[0] == after[0]
    changed = [(r, c) for r, (x, y) in enumerate(zip(before, after)) for c, (u, v) in enumerate(zip(x, y)) if u != v]
    assert changed == [(4, 0), (6, 1), (6, 5)]
    assert all(cell for row in after for cell in row)
    diag = read(cwd / "imp" / "diagnostics.csv")
    assert diag[0] == ["row", "attribute", "lo", "hi", "error"]
    assert [(d[0], d[1]) for d in diag[1:]] == [("4", "Age"), ("6", "Education"), ("6", "Race")]
    # Race is three bits wide
    assert len(diag[3][2].split(";")) == 3


def test_impute_no_holes_identical(cwd):
    d = survey_like(10, seed=4)
    write_csv(cwd / "full.csv", d.rows, d.schema)
    assert run("train", "--config", "run.ini", "--out", "m") == 0
    assert run("impute", "--config", "run.ini", "--model", "m", "--data", "full.csv", "--out", "o") == 0
    assert (cwd / "o" / "imputed.csv").read_bytes() == (cwd / "full.csv").read_bytes()
    assert read(cwd / "o" / "diagnostics.csv") == [["row", "attribute", "lo", "hi", "error"]]


def test_impute_single_hole_and_deterministic(cwd):
    rows = read(cwd / "data.csv")[:6]
    rows[2][3] = ""
    with open(cwd / "one.csv", "w", newline="") as fh:
        csv.writer(fh, lineterminator="\n").writerows(rows)
    assert run("train", "--config", "run.ini", "--out", "m") == 0
    for out in ("o1", "o2"):
        assert run("impute", "--config", "run.ini", "--model", "m", "--data", "one.csv", "--out", out) == 0
    a = read(cwd / "o1" / "imputed.csv")
    diffs = sum(u != v for x, y in zip(rows, a) for u, v in zip(x, y))
    assert diffs == 1
    assert same_tree(cwd / "o1", cwd / "o2")


def test_impute_schema_mismatch(cwd, capsys):
    assert run("train", "--config", "run.ini", "--out", "m") == 0
    other = Schema((AttributeSpec("Age", "continuous", 0, 99),))
    write_schema(other, cwd / "other.txt")
    assert run("impute", "--config", "run.ini", "--model", "m", "--schema", "other.txt",
               "--data", "holes.csv") == 1
    assert "does not match" in capsys.readouterr().err
    assert run("impute", "--config", "run.ini", "--model", "nowhere", "--data", "holes.csv") == 1


def test_benchmark_sections_and_determinism(cwd):
    assert run("benchmark", "--config", "run.ini", "--out", "b1") == 0
    assert run("benchmark", "--config", "run.ini", "--out", "b2") == 0
    for f in ("report.txt", "report.csv", "per_seed.csv"):
        assert (cwd / "b1" / f).read_bytes() == (cwd / "b2" / f).read_bytes()
    text = (cwd / "b1" / "report.txt").read_text()
    for label in ("AANN-GA", "C4.5, AANN-GA", "PCA-NN-GA", "C4.5, PCA-NN-GA", "Mean imputation"):
        assert f"\n{label} " in text
    sections = {r[1] for r in read(cwd / "b1" / "report.csv")[1:]}
    assert len(sections) == 5


def test_benchmark_single_pipeline(cwd):
    ini = (cwd / "run.ini").read_text().replace("[benchmark]\n", "[benchmark]\npipelines = pca-nn/tree\n")
    (cwd / "one.ini").write_text(ini)
    assert run("benchmark", "--config", "one.ini", "--out", "b") == 0
    sections = {r[1] for r in read(cwd / "b" / "report.csv")[1:]}
    assert sections == {"C4.5, PCA-NN-GA", "Mean imputation"}


def test_sweep_tables(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    X = low_rank(120, 8, 3, seed=0)
    schema = Schema(tuple(AttributeSpec(f"x{i}", "continuous", 0.0, 1.0) for i in range(8)))
    write_schema(schema, tmp_path / "s.txt")
    write_csv(tmp_path / "d.csv", X, schema)
    (tmp_path / "sw.ini").write_text("[sweep]\nhidden = 2-6\ncycles = 20\n")
    assert run("sweep", "--config", "sw.ini", "--schema", "s.txt", "--data", "d.csv", "--out", "sw") == 0
    hidden = read(tmp_path / "sw" / "hidden_nodes.csv")
    assert [r[0] for r in hidden[1:]] == ["2", "3", "4", "5", "6"]
    curves = read(tmp_path / "sw" / "training_cycles.csv")
    assert len(curves) == 1 + 21
    summary = capsys.readouterr().out.strip()
    best = min(hidden[1:], key=lambda r: (float(r[1]), int(r[0])))[0]
    assert f"hidden={best}" in summary and "pca_k=" in summary
    assert (tmp_path / "sw" / "summary.txt").read_text().strip() == summary


def test_sweep_pca_table_thirteen_rows(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    d = survey_like(150, seed=2, with_hiv=True)
    write_schema(d.schema, tmp_path / "s.txt")
    write_csv(tmp_path / "d.csv", d.rows, d.schema)
    (tmp_path / "sw.ini").write_text("[sweep]\nhidden = 4\ncycles = 5\n")
    assert run("sweep", "--config", "sw.ini", "--schema", "s.txt", "--data", "d.csv", "--out", "sw") == 0
    assert len(read(tmp_path / "sw" / "pca_dimensions.csv")) == 1 + 13


def test_flags_override_config(cwd):
    cfg = load_config(cwd / "run.ini", {"pipeline": "pca-nn", "seed": 5, "bounds": None})
    assert cfg.pipeline == "pca_nn" and cfg.seed == 5 and cfg.bounds == "full"
    assert cfg.ga.seed == 5 and cfg.split.seed == 5
    assert cfg.max_cycles == 30 and cfg.ga.population_size == 20
    assert cfg.hidden_nodes == 17


def test_config_errors(tmp_path):
    (tmp_path / "bad.ini").write_text("[ga]\npopulaton_size = 3\n")
    with pytest.raises(DataError, match="unknown keys"):
        load_config(tmp_path / "bad.ini")
    (tmp_path / "bad2.ini").write_text("[ga]\nq = lots\n")
    with pytest.raises(DataError, match="bad value"):
        load_config(tmp_path / "bad2.ini")
    assert parse_int_list("2-4, 7") == [2, 3, 4, 7]


@pytest.mark.parametrize("value, level", [("debug", "DEBUG"), ("info", "INFO"), ("error", "ERROR"),
                                          ("shouty", "WARNING")])
def test_log_level_env(monkeypatch, value, level):
    import logging
    monkeypatch.setenv("IMPUTE_LOG", value)
    cli._setup_logging()
    assert logging.getLogger("dtimpute").level == getattr(logging, level)
