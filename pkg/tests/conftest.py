import numpy as np
import pytest

from dtimpute.dataset import AttributeSpec, Schema, write_csv, write_schema
from dtimpute.synthetic import survey_like


@pytest.fixture
def small_schema():
    return Schema((
        AttributeSpec("Age", "continuous", 14, 50, integer=True, interval=4),
        AttributeSpec("Score", "continuous", 0.0, 1.0),
        AttributeSpec("Province", "categorical", levels=tuple("ABCDEFGHI")),
        AttributeSpec("HIV", "binary"),
    ))


@pytest.fixture
def survey():
    return survey_like(300, seed=3)


@pytest.fixture
def survey_files(tmp_path):
    """Schema and CSV for a small synthetic survey, plus a copy with holes."""
    d = survey_like(300, seed=1)
    write_schema(d.schema, tmp_path / "schema.txt")
    write_csv(tmp_path / "data.csv", d.rows, d.schema)
    rows = d.rows[:20].copy()
    rows[3, 0] = np.nan
    rows[5, [1, 5]] = np.nan
    write_csv(tmp_path / "holes.csv", rows, d.schema)
    (tmp_path / "run.ini").write_text(
        "[run]\nschema = schema.txt\ndata = data.csv\n"
        "[network]\ncycles = 30\naann_cycles = 30\npca_nn_cycles = 30\n"
        "[ga]\npopulation_size = 20\ngenerations = 10\n"
        "[benchmark]\nseeds = 0, 1\n", encoding="utf-8")
    return tmp_path


@pytest.fixture
def cwd(survey_files, monkeypatch):
    monkeypatch.chdir(survey_files)
    return survey_files


