import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dtimpute.dataset import (AttributeSpec, Dataset, Schema, SplitSpec, decode, decode_rows,
                              encode_normalize, encode_rows, from_records, inject_mcar, level_bits,
                              load_csv, nearest_level, read_schema, split, split_sizes, write_csv,
                              write_schema)
from dtimpute.exceptions import DataError, SchemaError
from dtimpute.synthetic import survey_schema


def test_widths(small_schema):
    # 9 levels need 4 bits
    assert small_schema["Province"].encoded_width == 4
    assert small_schema.total_width == 1 + 1 + 4 + 1
    assert small_schema.columns("Province") == slice(2, 6)
    assert survey_schema().total_width == 13


def test_age_normalization():
    spec = survey_schema()["Age"]
    assert (20 - spec.min) / spec.span == pytest.approx(0.16667, abs=1e-5)
    assert (24 - spec.min) / spec.span == pytest.approx(0.27778, abs=1e-5)


def test_level_bits_msb_first():
    assert level_bits(6, 4).tolist() == [0, 1, 1, 0]
    assert level_bits(8, 4).tolist() == [1, 0, 0, 0]


def test_encode_example(small_schema):
    raw = np.array([[32.0, 0.25, 6.0, 1.0]])
    enc = encode_rows(raw, small_schema)[0]
    assert enc[0] == pytest.approx(0.5)
    assert enc[1] == 0.25
    assert enc[2:6].tolist() == [0, 1, 1, 0]
    assert enc[6] == 1.0


def test_nearest_level_matches_exhaustive_distance():
    soft = np.array([0.9, 0.2, 0.1, 0.8])
    # exhaustive oracle over the nine valid patterns
    dists = [sum((s - b) ** 2 for s, b in zip(soft, level_bits(k, 4))) for k in range(9)]
    expect = min(range(9), key=lambda k: (dists[k], k))
    assert nearest_level(soft, 9)[0] == expect == 8


def test_nearest_level_exhaustive_on_all_vertices():
    # any rounded 4-bit pattern maps to itself when valid, to a nearest valid one otherwise
    for bits in itertools.product([0.0, 1.0], repeat=4):
        got = nearest_level(np.array(bits), 9)[0]
        d = [np.sum((np.array(bits) - level_bits(k, 4)) ** 2) for k in range(9)]
        assert d[got] == min(d)
        assert got == d.index(min(d))


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(14, 50), st.floats(0, 1), st.integers(0, 8), st.integers(0, 1)),
                min_size=1, max_size=20))
def test_round_trip(records):
    schema = Schema((
        AttributeSpec("Age", "continuous", 14, 50, integer=True),
        AttributeSpec("Score", "continuous", 0.0, 1.0),
        AttributeSpec("Province", "categorical", levels=tuple("ABCDEFGHI")),
        AttributeSpec("HIV", "binary"),
    ))
    raw = np.array(records, dtype=float)
    back = decode_rows(encode_rows(raw, schema), schema)
    np.testing.assert_allclose(back, raw, atol=1e-12)


def test_decode_to_record(small_schema):
    row = encode_rows(np.array([[20.0, 0.5, 2.0, 0.0]]), small_schema)[0]
    row[1] = np.nan
    rec = decode(row, small_schema)
    assert rec == {"Age": 20.0, "Score": None, "Province": "C", "HIV": 0}


def test_encode_normalize_keeps_mask(small_schema):
    d = from_records([{"Age": 20, "Score": 0.1, "Province": "B", "HIV": 1},
                      {"Age": 30, "Province": None, "Score": 0.2, "HIV": 0}], small_schema)
    n = encode_normalize(d)
    assert n.provenance == "normalized"
    assert n.mask.shape == (2, 7)
    assert not n.mask[1, 2:6].any() and n.mask[1, :2].all()
    with pytest.raises(ValueError):
        n.rows[0, 0] = 0.3


def test_normalized_range_checked(small_schema):
    with pytest.raises(DataError):
        Dataset(small_schema, np.full((1, 7), 1.5), np.ones((1, 7), bool), "normalized")


def test_split_sizes():
    assert split_sizes(10, SplitSpec(0.8, 0.1, 0.1)) == (8, 1, 1)
    assert split_sizes(12179, SplitSpec(0.8, 0.1, 0.1)) == (9745, 1217, 1217)


def test_split_partitions_and_is_seeded(survey):
    d = encode_normalize(survey)
    tr, va, te = split(d, SplitSpec(seed=4))
    assert (tr.n_rows, va.n_rows, te.n_rows) == (240, 30, 30)
    rows = np.vstack([tr.rows, va.rows, te.rows])
    # a permutation of the original rows
    key = lambda a: sorted(map(tuple, a))
    assert key(rows) == key(d.rows)
    again = split(d, SplitSpec(seed=4))
    np.testing.assert_array_equal(again[2].rows, te.rows)
    other = split(d, SplitSpec(seed=5))
    assert not np.array_equal(other[2].rows, te.rows)


def test_split_errors(survey):
    with pytest.raises(DataError):
        SplitSpec(0.8, 0.1, 0.2)
    tiny = encode_normalize(survey.take([0, 1, 2, 3, 4]))
    with pytest.raises(DataError):
        split(tiny, SplitSpec())


def test_mcar_counts(survey):
    d = encode_normalize(survey)
    m = inject_mcar(d, "Province", 0.1, seed=0)
    cols = d.schema.columns("Province")
    assert (~m.mask[:, cols].all(axis=1)).sum() == 30
    assert (~m.mask[:, cols]).sum() == 30 * 4
    # other attributes untouched, values untouched
    assert m.mask[:, :cols.start].all()
    np.testing.assert_array_equal(m.rows, d.rows)
    same = inject_mcar(d, "Province", 0.1, seed=0)
    np.testing.assert_array_equal(same.mask, m.mask)


def test_mcar_errors(survey):
    with pytest.raises(DataError):
        inject_mcar(survey, "Age", 1.0, 0)
    once = inject_mcar(survey, "Age", 0.1, 0)
    with pytest.raises(DataError):
        inject_mcar(once, "Age", 0.1, 1)


def test_schema_file_round_trip(tmp_path):
    schema = survey_schema()
    write_schema(schema, tmp_path / "s.txt")
    assert read_schema(tmp_path / "s.txt") == schema


def test_schema_errors(tmp_path):
    with pytest.raises(DataError, match="nope.txt"):
        read_schema(tmp_path / "nope.txt")
    (tmp_path / "bad.txt").write_text("[X]\nkind = continuous\nmin = 3\nmax = 1\n")
    with pytest.raises(SchemaError):
        read_schema(tmp_path / "bad.txt")
    with pytest.raises(SchemaError):
        AttributeSpec("R", "categorical", levels=("a",))


def _write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def test_load_csv_missing_cells(tmp_path):
    schema = survey_schema(with_hiv=False)
    p = _write(tmp_path / "d.csv", "Age,Education,FatherAge,Gravidity,Parity,Race,Province\n"
                                   "20,5,30,1,1,Black,GP\n25,,31,2,1,,WC\n")
    d = load_csv(p, schema)
    assert d.mask.tolist() == [[True] * 7, [True, False, True, True, True, False, True]]
    assert d.rows[0, 5] == schema["Race"].levels.index("Black")


def test_load_csv_strict_range(tmp_path):
    schema = survey_schema(with_hiv=False)
    p = _write(tmp_path / "d.csv", "Age,Education,FatherAge,Gravidity,Parity,Race,Province\n"
                                   "20,5,30,1,1,Black,GP\n55,5,30,1,1,Black,GP\n")
    with pytest.raises(DataError, match=r"row 2, column 'Age'"):
        load_csv(p, schema)
    d = load_csv(p, schema, strict=False)
    assert d.rows[1, 0] == 50


def test_load_csv_header_mismatch(tmp_path):
    schema = survey_schema(with_hiv=False)
    p = _write(tmp_path / "d.csv", "Age,Education\n1,2\n")
    with pytest.raises(DataError, match="header"):
        load_csv(p, schema)


@pytest.mark.parametrize("cell", ["nan", "inf", "abc"])
def test_load_csv_rejects_bad_numbers(tmp_path, cell):
    schema = Schema((AttributeSpec("x", "continuous", 0, 1), AttributeSpec("h", "binary")))
    p = _write(tmp_path / "d.csv", f"x,h\n{cell},1\n")
    with pytest.raises(DataError):
        load_csv(p, schema)


def test_load_csv_binary_values(tmp_path):
    schema = Schema((AttributeSpec("x", "continuous", 0, 1), AttributeSpec("h", "binary")))
    with pytest.raises(DataError, match="binary"):
        load_csv(_write(tmp_path / "d.csv", "x,h\n0.5,2\n"), schema)


def test_csv_round_trip(tmp_path, survey):
    write_csv(tmp_path / "s.csv", survey.rows, survey.schema)
    back = load_csv(tmp_path / "s.csv", survey.schema)
    np.testing.assert_array_equal(back.rows, survey.rows)
