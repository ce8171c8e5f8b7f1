import json

import pytest

from fracpme.cli import main
from fracpme.config import RunConfig, build_config, load_config, save_config
from fracpme.exceptions import ConfigError, ToleranceNotReached
from fracpme.utils.tables import read_table

STAMP = ["--created-at", "2024-01-01T00:00:00+00:00"]


def test_solve_writes_one_row_per_node(tmp_path):
    out = tmp_path / "robin.csv"
    code = main(["solve", "--alpha", "0.5", "--m", "2", "--bc", "robin", "--n", "20", "--grid-n", "32", "-o", str(out), "-q"] + STAMP)
    assert code == 0
    df = read_table(out)
    assert list(df.columns) == ["bc", "z", "v", "y"]
    assert len(df) == 21
    first = out.read_text().splitlines()[0]
    assert first.startswith("# fracpme v") and first.endswith("solve 2024-01-01T00:00:00+00:00")


def test_constant_kernel_grid(tmp_path):
    out = tmp_path / "grid.csv"
    code = main(["solve", "--kernel", "power", "--n", "10", "--gammas", "0,0.5", "--ms", "1,2", "-o", str(out), "-q"] + STAMP)
    assert code == 0
    df = read_table(out)
    assert len(df) == 4
    assert (df["max_error"] <= 1e-8).all()


def test_json_format(tmp_path):
    out = tmp_path / "sine.json"
    code = main(["solve", "--kernel", "sine", "--n", "8", "--format", "json", "-o", str(out), "-q"] + STAMP)
    assert code == 0
    payload = json.loads(out.read_text())
    assert payload["columns"] == ["z", "v", "y"]
    assert len(payload["data"]["z"]) == 9


def test_config_round_trip_gives_identical_output(tmp_path):
    first, second = tmp_path / "a.csv", tmp_path / "b.csv"
    cfg_path = tmp_path / "run.json"
    args = ["profile", "--alpha", "0.5", "--m", "2", "--bc", "all", "--n", "10", "--grid-n", "32", "--n-x", "21", "-q"]
    assert main(args + ["-o", str(first), "--save-config", str(cfg_path)]) == 0
    assert main(["profile", "--config", str(cfg_path), "-o", str(second), "-q"]) == 0
    assert first.read_bytes() == second.read_bytes()
    df = read_table(first)
    assert set(df["bc"]) == {"dirichlet", "neumann", "robin"}
    assert len(df) == 63


def test_fd_command(tmp_path):
    out = tmp_path / "fd.csv"
    code = main(["fd", "--alpha", "0.5", "--m", "2", "--dt", "0.05", "--dx", "0.05", "--t-final", "0.5", "--x-max", "1", "-o", str(out), "-q"] + STAMP)
    assert code == 0
    text = out.read_text()
    assert "# front_dirichlet=" in text
    assert len(read_table(out)) == 11 * 21


def test_config_errors_exit_with_two(tmp_path):
    assert main(["solve", "--alpha", "1.5", "-o", str(tmp_path / "x.csv"), "-q"]) == 2
    assert main(["order", "--base-n", "11", "-q"]) == 2
    assert main(["bench", "--bc", "robin", "-q"]) == 2
    assert main(["solve", "--config", str(tmp_path / "missing.json"), "-q"]) == 2


def test_numerical_failure_exits_with_three(tmp_path):
    out = tmp_path / "fd.csv"
    code = main(["fd", "--dt", "0.01", "--dx", "0.01", "--x-max", "0.05", "-o", str(out), "-q"])
    assert code == 3
    assert not out.exists()


def test_quadrature_failure_exits_with_four(tmp_path, monkeypatch):
    import fracpme.volterra as volterra

    real = volterra.adaptive_quad

    def strict_quad(f, lo, hi, quad):
        if lo > 0:
            raise ToleranceNotReached(0.0, 1.0, "limit reached")
        return real(f, lo, hi, quad)

    monkeypatch.setattr(volterra, "adaptive_quad", strict_quad)
    out = tmp_path / "sine.csv"
    assert main(["solve", "--kernel", "sine", "--n", "8", "-o", str(out), "-q"] + STAMP) == 4
    assert not out.exists()


def test_run_config_validation():
    cfg = build_config(command="front")
    assert cfg.output_path == "fracpme_front.csv"
    assert [bc.value for bc in build_config(command="solve", bc="all").boundary_conditions()] == [
        "dirichlet", "neumann", "robin",
    ]
    with pytest.raises(ConfigError):
        build_config(command="solve", tolerances=[1e-2, 1e-1, 1e-3])
    with pytest.raises(ConfigError):
        build_config(command="m0", alphas=[0.5, 1.0])
    with pytest.raises(ConfigError):
        build_config(command="solve", unknown=1)


def test_save_and_load_config(tmp_path):
    cfg = build_config(command="order", alphas=[0.3, 0.7], created_at="2024-01-01T00:00:00+00:00")
    path = save_config(cfg, str(tmp_path / "c.json"))
    back = load_config(path)
    assert back == cfg
    assert isinstance(back, RunConfig)
    assert load_config(path, base_n=20).base_n == 20
    (tmp_path / "bad.json").write_text("{\"command\": \"fly\"}")
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "bad.json"))


def test_m0_command_reports_the_floor(tmp_path):
    out = tmp_path / "m0.csv"
    code = main(["m0", "--alphas", "0.5", "--grid-n", "32", "-o", str(out), "-q"] + STAMP)
    assert code == 0
    df = read_table(out)
    assert list(df.columns) == ["alpha", "bc", "m0", "m0_floor", "error"]
    assert df["m0_floor"].iloc[0] == pytest.approx(2.617, abs=2e-3)
    assert df["m0"].iloc[0] > df["m0_floor"].iloc[0]
    assert "# minus_cutoff=0.5" in out.read_text()


def test_start_option_changes_the_first_value(tmp_path):
    finite, extrapolated = tmp_path / "f.csv", tmp_path / "e.csv"
    args = ["solve", "--alpha", "0.5", "--m", "2", "--n", "10", "--grid-n", "32", "-q"] + STAMP
    assert main(args + ["--start", "finite", "-o", str(finite)]) == 0
    assert main(args + ["-o", str(extrapolated)]) == 0
    assert read_table(finite)["v"].iloc[0] != read_table(extrapolated)["v"].iloc[0]
    with pytest.raises(ConfigError):
        build_config(command="solve", start="midpoint")
    with pytest.raises(ConfigError):
        build_config(command="m0", minus_cutoff=0.0)
