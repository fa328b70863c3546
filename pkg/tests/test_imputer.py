import numpy as np
import pytest

from dtimpute.dataset import (AttributeSpec, Dataset, Schema, SplitSpec, attribute_values, encode_normalize,
                              from_records, split)
from dtimpute import imputer as imputer_mod
from dtimpute.exceptions import DataError
from dtimpute.ga import GaConfig
from dtimpute.imputer import (AttributeTree, GAImputer, PipelineModel, RecordHole, bounds_for,
                              error_aann, error_pcann, fit_attribute_tree, impute_baseline_mean,
                              impute_record, impute_rows, train_pipeline)
from dtimpute.mlp import TrainConfig, init_model
from dtimpute.pca import fit_pca, project
from dtimpute.synthetic import survey_schema, survey_like
from dtimpute.tree import IntervalScheme

from oracles import memorization_errors


@pytest.fixture(scope="module")
def parts():
    d = encode_normalize(survey_like(400, seed=2, with_hiv=True))
    return split(d, SplitSpec(seed=0))


@pytest.fixture(scope="module")
def aann(parts):
    tr, va, _ = parts
    return train_pipeline("aann", tr, va, tr.schema, train_config=TrainConfig(max_cycles=30),
                          tree_targets=["Age", "Education", "FatherAge", "Gravidity", "Parity", "HIV"])


def test_layer_sizes(parts, aann):
    tr, va, _ = parts
    assert aann.network.layer_sizes == (13, 11, 13)
    assert len(aann.trees) == 6
    p = train_pipeline("pca-nn", tr, va, tr.schema, train_config=TrainConfig(max_cycles=5))
    assert p.pca.n_components == 7
    assert p.network.layer_sizes == (13, 17, 7)
    assert p.network.output == "linear"


@pytest.mark.parametrize("variant", ["aann", "pca_nn"])
@pytest.mark.parametrize("seed", [0, 1])
def test_memorization(variant, seed):
    assert max(memorization_errors(variant, seed)) < 0.05


def test_error_pure_and_non_negative(parts, aann):
    _, _, te = parts
    row = te.rows[0].copy()
    row[[0, 3]] = np.nan
    hole = RecordHole.from_row(0, row, te.schema)
    rng = np.random.default_rng(0)
    cands = rng.random((50, 2))
    e = error_aann(aann, hole, cands)
    assert (e >= 0).all()
    assert error_aann(aann, hole, cands[0]) == error_aann(aann, hole, cands[0])
    # batched evaluation may differ in the last bit (BLAS summation order)
    assert error_aann(aann, hole, cands[0]) == pytest.approx(e[0], rel=1e-12)


def test_pcann_error_zero_for_identical_models(parts, monkeypatch):
    tr, _, te = parts
    schema = tr.schema
    n = schema.total_width
    pca = fit_pca(tr.rows, n)
    model = PipelineModel("pca_nn", schema, init_model((n, 4, n), 0, "linear"), pca)
    row = te.rows[1].copy()
    row[0] = np.nan
    hole = RecordHole.from_row(1, row, schema)
    assert error_pcann(model, hole, [0.4]) > 0
    # regressor replaced by the PCA map itself
    monkeypatch.setattr(imputer_mod, "forward", lambda net, x: project(pca, x))
    e = error_pcann(model, hole, np.random.default_rng(0).random((20, 1)))
    assert np.abs(e).max() < 1e-20


def test_bounds_full(parts, aann):
    _, _, te = parts
    row = te.rows[2].copy()
    row[[0, 12]] = np.nan
    b = bounds_for(RecordHole.from_row(2, row, te.schema), "full", aann)
    np.testing.assert_array_equal(b.lo, [0, 0])
    np.testing.assert_array_equal(b.hi, [1, 1])


def test_bounds_tree_hiv_and_age(parts, aann):
    _, _, te = parts
    schema = te.schema
    for i in range(10):
        row = te.rows[i].copy()
        row[[0, 12]] = np.nan
        hole = RecordHole.from_row(i, row, schema)
        b = bounds_for(hole, "tree", aann)
        attrs = attribute_values(hole.values, schema)[0]
        hiv = aann.trees["HIV"].predict(attrs, schema)
        assert (b.lo[1], b.hi[1]) == ((0.0, 0.5) if hiv == 0 else (0.5, 1.0))
        a, z = aann.trees["Age"].scheme.interval(aann.trees["Age"].predict(attrs, schema))
        spec = schema["Age"]
        assert b.lo[0] == pytest.approx((a - spec.min) / spec.span, abs=1e-9)
        assert b.hi[0] == pytest.approx((z - spec.min) / spec.span, abs=1e-9)
        assert 0 <= b.lo.min() and b.hi.max() <= 1


def test_bounds_table_interval():
    spec = survey_schema()["Age"]
    scheme = IntervalScheme("Age", 4.0, (20.0, 25.0, 50.0), True)
    a, b = scheme.interval(0)
    assert ((a - spec.min) / spec.span, (b - spec.min) / spec.span) == pytest.approx((0.16667, 0.27778), abs=1e-5)


def test_bounds_single_value_bin(parts, aann):
    # Gravidity 0-12 in width-2 integer bins ends with the bin 12-12
    scheme = IntervalScheme.for_attribute(survey_schema()["Gravidity"])
    assert scheme.interval(scheme.n_bins - 1) == (12.0, 12.0)
    _, _, te = parts
    tree = aann.trees["Gravidity"]
    stub = AttributeTree("Gravidity", tree.tree, tree.features, scheme)
    stub.predict = lambda attrs, schema: scheme.n_bins - 1
    model = PipelineModel("aann", aann.schema, aann.network, trees={"Gravidity": stub})
    row = te.rows[0].copy()
    row[3] = np.nan
    b = bounds_for(RecordHole.from_row(0, row, te.schema), "tree", model)
    assert b.lo[0] == pytest.approx(11.5 / 12) and b.hi[0] == 1.0


def test_no_holes_is_noop(parts, aann, monkeypatch):
    _, _, te = parts

    def boom(model):
        raise AssertionError("error function invoked")

    monkeypatch.setattr(imputer_mod, "_error_fn", boom)
    hole = RecordHole.from_row(0, te.rows[0], te.schema)
    row, diag = impute_record(aann, hole)
    assert diag is None
    np.testing.assert_array_equal(row, te.rows[0])


def test_two_holes_joint_search(parts, aann):
    _, _, te = parts
    row = te.rows[3].copy()
    row[[1, 4]] = np.nan
    hole = RecordHole.from_row(3, row, te.schema)
    filled, diag = impute_record(aann, hole, "tree", GaConfig(seed=1))
    assert diag.solution.shape == (2,)
    assert np.all(diag.lo <= filled[[1, 4]]) and np.all(filled[[1, 4]] <= diag.hi)
    assert not np.isnan(filled).any()


def test_impute_rows_deterministic(parts, aann):
    _, _, te = parts
    rows = te.rows[:5].copy()
    rows[0, 0] = np.nan
    rows[2, 5:8] = np.nan
    a, da = impute_rows(aann, rows, "tree", GaConfig(seed=3))
    b, db = impute_rows(aann, rows, "tree", GaConfig(seed=3))
    np.testing.assert_array_equal(a, b)
    assert len(da) == 2 and da[1].attributes == ("Race",)
    np.testing.assert_array_equal(a[[1, 3, 4]], rows[[1, 3, 4]])


def test_save_load_round_trip(tmp_path, aann):
    aann.save(tmp_path / "m")
    back = PipelineModel.load(tmp_path / "m")
    np.testing.assert_array_equal(back.network.flat(), aann.network.flat())
    assert set(back.trees) == set(aann.trees)
    x = np.random.default_rng(0).random((4, 13))
    np.testing.assert_array_equal(back.error(x), aann.error(x))
    for name, t in aann.trees.items():
        assert back.trees[name].to_text() == t.to_text()


def test_baseline_mean():
    schema = Schema((AttributeSpec("x", "continuous", 0.0, 1.0),))
    d = from_records([{"x": 0.2}, {"x": 0.4}, {"x": None}], schema)
    assert impute_baseline_mean(d, "x").rows[2, 0] == pytest.approx(0.3)
    full = from_records([{"x": 0.2}], schema)
    assert impute_baseline_mean(full, "x") is full
    one = from_records([{"x": None}, {"x": 0.7}, {"x": None}], schema)
    np.testing.assert_allclose(impute_baseline_mean(one, "x").rows[:, 0], 0.7)
    with pytest.raises(DataError):
        impute_baseline_mean(from_records([{"x": None}], schema), "x")


def test_attribute_tree_text(parts):
    tr, _, _ = parts
    t = fit_attribute_tree(tr.rows, tr.schema, "Education")
    back = AttributeTree.from_text(t.to_text())
    assert back.to_text() == t.to_text()
    assert back.scheme == t.scheme


def test_estimator(parts):
    tr, va, te = parts
    imp = GAImputer(schema=tr.schema, bounds="tree", max_cycles=10, generations=5, population_size=10)
    imp.fit(tr.rows, X_val=va.rows)
    X = te.rows[:4].copy()
    X[0, 0] = np.nan
    out = imp.transform(X)
    assert not np.isnan(out).any()
    assert len(imp.diagnostics_) == 1
    assert imp.get_params()["bounds"] == "tree"


def test_pipeline_model_validation(parts):
    schema = parts[0].schema
    with pytest.raises(DataError):
        PipelineModel("aann", schema, init_model((12, 3, 12)))
    with pytest.raises(DataError):
        PipelineModel("pca_nn", schema, init_model((13, 3, 7), output="linear"))


def test_train_rejects_incomplete(parts):
    tr, va, _ = parts
    m = tr.mask.copy()
    m[0, 0] = False
    with pytest.raises(DataError):
        train_pipeline("aann", Dataset(tr.schema, tr.rows, m, "normalized"), va, tr.schema)
