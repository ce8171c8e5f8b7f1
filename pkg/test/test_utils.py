import json

import numpy as np
import pandas as pd
import pytest

from fracpme import __version__
from fracpme.exceptions import ConfigError
from fracpme.utils.parallel import THREADS_ENV, resolve_n_jobs, run_jobs
from fracpme.utils.tables import read_table, render_csv, write_table

STAMP = "2024-01-01T00:00:00+00:00"


def test_resolve_n_jobs_reads_environment(monkeypatch):
    monkeypatch.delenv(THREADS_ENV, raising=False)
    assert resolve_n_jobs() == 1
    monkeypatch.setenv(THREADS_ENV, "3")
    assert resolve_n_jobs() == 3
    assert resolve_n_jobs(2) == 2
    monkeypatch.setenv(THREADS_ENV, "many")
    with pytest.raises(ConfigError):
        resolve_n_jobs()
    with pytest.raises(ConfigError):
        resolve_n_jobs(0)


@pytest.mark.parametrize("n_jobs", [1, 2])
def test_run_jobs_keeps_order(n_jobs):
    assert run_jobs(abs, [-3, 2, -1, 0, 5], n_jobs=n_jobs, progress=False) == [3, 2, 1, 0, 5]


def test_csv_header_and_precision():
    df = pd.DataFrame({"z": [0.0, 1.0 / 3.0], "label": ["a", "b"]})
    text = render_csv(df, "solve", STAMP, {"alpha": 0.5})
    lines = text.splitlines()
    assert lines[0] == f"# fracpme v{__version__} solve {STAMP}"
    assert lines[1] == "# alpha=0.5"
    assert lines[2] == "z,label"
    assert float(lines[4].split(",")[0]) == 1.0 / 3.0


def test_write_and_read_back(tmp_path):
    df = pd.DataFrame({"x": np.linspace(0, 1, 5), "u": np.linspace(1, 0, 5)})
    path = write_table(df, str(tmp_path / "out" / "t.csv"), "profile", STAMP, {"m": 2.0})
    back = read_table(path)
    pd.testing.assert_frame_equal(back, df)
    assert [p.name for p in (tmp_path / "out").iterdir()] == ["t.csv"]


def test_json_output(tmp_path):
    df = pd.DataFrame({"m": [1.0, 2.0], "order": [2.0, np.nan]})
    path = write_table(df, str(tmp_path / "t.json"), "order", STAMP, fmt="json")
    with open(path) as f:
        payload = json.load(f)
    assert payload["command"] == "order"
    assert payload["columns"] == ["m", "order"]
    assert payload["data"]["order"] == [2.0, None]


def test_unknown_format(tmp_path):
    with pytest.raises(ConfigError):
        write_table(pd.DataFrame({"a": [1]}), str(tmp_path / "t.txt"), "solve", STAMP, fmt="xml")
