import csv
import json
import math

import numpy as np
import pytest

from smoluchowski import cli, study
from smoluchowski import grid as G
from smoluchowski.config import load_config, parse_config
from smoluchowski.errors import ConfigError
from smoluchowski.outputs import load_run_dir
from smoluchowski.solver import MOMENT_NAMES, moment_vector

SMALL = """
[kernel]
name = "{kernel}"

[truncation]
n = {n}
theta = {theta}

[grid]
min = {lo}
max = 1e3
cells = {cells}

[initial]
kind = "exponential"

[time]
T = {T}
dt = {dt}
snapshots = 4

[diagnostics]
q = 5.0
lam = 2.0

[study]
n = [10.0, 100.0]
"""


def write_config(path, kernel="constant", n=1e3, theta=1, lo=1e-4, cells=60, T=0.2, dt=1e-2):
    path.write_text(SMALL.format(kernel=kernel, n=n, theta=theta, lo=lo, cells=cells, T=T, dt=dt),
                    encoding="utf-8")
    return path


def read_rows(path):
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
        rows = list(csv.reader(fh))
    return first, rows[0], np.array(rows[1:], dtype=float)


# -- configuration ---------------------------------------------------------------


def test_demo_configs_parse():
    from pathlib import Path
    for p in sorted((Path(__file__).parents[1] / "demos" / "configs").glob("*.toml")):
        spec = load_config(p)
        assert len(spec.hash) == 64


def test_hash_ignores_key_order(tmp_path):
    a = load_config(write_config(tmp_path / "a.toml"))
    raw = dict(reversed(list(a.raw.items())))
    assert parse_config(raw).hash == a.hash
    assert a.with_truncation(10.0, 0).hash != a.hash


@pytest.mark.parametrize("mutate, message", [
    (lambda r: r.pop("grid"), "missing section"),
    (lambda r: r.update(extra={}), "unknown section"),
    (lambda r: r["grid"].update(spacing=1), "unknown key"),
    (lambda r: r["truncation"].update(theta=2), "theta"),
    (lambda r: r["grid"].update(cells=10.5), "cells"),
    (lambda r: r["kernel"].update(name="nope"), "nope"),
    (lambda r: r["truncation"].update(n=1e5), "cover"),
    (lambda r: r["time"].update(T=-1.0), "T must be positive"),
    (lambda r: r["initial"].update(kind="gaussian"), "kind"),
    (lambda r: r["time"].update(snapshots="x"), "snapshots"),
])
def test_invalid_configs(tmp_path, mutate, message):
    raw = load_config(write_config(tmp_path / "c.toml")).raw
    mutate(raw)
    with pytest.raises(ConfigError, match=message):
        parse_config(raw)


def test_tabulated_initial_density(tmp_path):
    table = tmp_path / "g.csv"
    z = np.geomspace(1e-4, 1e3, 200)
    table.write_text("volume,density\n" + "".join(f"{float(a)!r},{math.exp(-a)!r}\n" for a in z),
                     encoding="utf-8")
    cfg = write_config(tmp_path / "t.toml")
    cfg.write_text(cfg.read_text().replace('kind = "exponential"', 'kind = "tabulated"\npath = "g.csv"'))
    spec = load_config(cfg)
    h = spec.hash
    table.write_text(table.read_text() + "2000,0\n", encoding="utf-8")
    assert load_config(cfg).hash != h


def test_toml_syntax_error_reports_location(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text("[kernel]\nname = \n", encoding="utf-8")
    assert cli.main(["run", str(bad), "-o", str(tmp_path / "out")]) == 2
    assert "line 2" in capsys.readouterr().err
    assert not (tmp_path / "out").exists()


def test_missing_config_writes_nothing(tmp_path, capsys):
    out = tmp_path / "out"
    assert cli.main(["run", str(tmp_path / "missing.toml"), "-o", str(out)]) == 2
    assert "no such file" in capsys.readouterr().err
    assert not out.exists()


# -- run ---------------------------------------------------------------


@pytest.fixture(scope="module")
def run_dirs(tmp_path_factory):
    base = tmp_path_factory.mktemp("runs")
    cfg = write_config(base / "const.toml")
    outs = [base / "a", base / "b"]
    for out in outs:
        assert cli.main(["run", str(cfg), "-o", str(out)]) == 0
    return cfg, outs


def test_run_writes_all_outputs(run_dirs):
    _, (out, _) = run_dirs
    for name in ("moments.csv", "snapshots.csv", "report.json", "config.toml"):
        assert (out / name).is_file()


def test_moments_header_and_first_row(run_dirs):
    cfg, (out, _) = run_dirs
    spec = load_config(cfg)
    first, header, data = read_rows(out / "moments.csv")
    assert first.strip() == f"# config_sha256={spec.hash}"
    assert header == ["t", *MOMENT_NAMES, "loss"]
    r = spec.run
    state = G.project_initial(r.initial, r.build_grid())
    expected = moment_vector(state.grid, state.numbers, r.kernel.beta)
    assert data[0, 0] == 0.0
    np.testing.assert_array_equal(data[0, 1:6], expected)


def test_snapshot_columns(run_dirs):
    _, (out, _) = run_dirs
    _, header, data = read_rows(out / "snapshots.csv")
    assert header == ["t", "zeta_pivot", "g"]
    assert len(np.unique(data[:, 0])) == 5           # t = 0 plus four snapshots
    assert len(data) == 5 * 60


def test_report_contents(run_dirs):
    cfg, (out, _) = run_dirs
    rep = json.loads((out / "report.json").read_text(encoding="utf-8"))
    assert rep["config_sha256"] == load_config(cfg).hash
    assert rep["diagnostics"]["mass"]["max_drift"] <= 1e-10
    assert {r["name"] for r in rep["diagnostics"]["residuals"]} >= {"weak_form[1]", "tail(q=5)"}
    assert rep["diagnostics"]["bounds"]["passed"] is True


def test_reruns_are_byte_identical(run_dirs):
    _, (a, b) = run_dirs
    for name in ("moments.csv", "snapshots.csv", "report.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes(), name


def test_run_dir_round_trip(run_dirs):
    _, (out, _) = run_dirs
    traj, spec = load_run_dir(out)
    _, _, data = read_rows(out / "moments.csv")
    np.testing.assert_array_equal(traj.moments, data[:, 1:6])
    assert len(traj.snapshots) == 5


def test_tampered_run_dir_rejected(run_dirs, tmp_path):
    import shutil
    _, (out, _) = run_dirs
    copy = tmp_path / "copy"
    shutil.copytree(out, copy)
    text = (copy / "config.toml").read_text(encoding="utf-8").replace("cells = 60", "cells = 61")
    (copy / "config.toml").write_text(text, encoding="utf-8")
    assert cli.main(["compare", str(copy), "--oracle", "constant_exact"]) == 2


def test_theta0_ledger_row_wise(tmp_path):
    cfg = write_config(tmp_path / "gel.toml", kernel="multiplicative", theta=0, lo=1e-3,
                       cells=60, T=0.8, dt=2e-3)
    out = tmp_path / "gel"
    assert cli.main(["run", str(cfg), "-o", str(out)]) == 0
    _, header, data = read_rows(out / "moments.csv")
    M1, loss = data[:, header.index("M_1")], data[:, header.index("loss")]
    assert loss[-1] > 0.1 * M1[0]
    assert np.max(np.abs(M1 + loss - M1[0])) <= 1e-6 * M1[0]
    rep = json.loads((out / "report.json").read_text(encoding="utf-8"))
    assert "bounds_skipped" in rep["diagnostics"]


# -- compare, audit, study ---------------------------------------------------


def test_compare_constant_exact(run_dirs, capsys):
    _, (out, _) = run_dirs
    assert cli.main(["compare", str(out), "--oracle", "constant_exact"]) == 0
    res = json.loads(capsys.readouterr().out)
    assert len(res["l1"]) == 5 and max(res["l1"]) < 0.05


def test_compare_self_reference_is_zero(run_dirs, capsys):
    _, (out, _) = run_dirs
    assert cli.main(["compare", str(out), "--oracle", "reference:1"]) == 0
    res = json.loads(capsys.readouterr().out)
    assert res["l1"] == [0.0] * 5


@pytest.mark.parametrize("oracle", ["moment_ode", "reference:x", "exact"])
def test_compare_bad_oracle(run_dirs, oracle):
    _, (out, _) = run_dirs
    assert cli.main(["compare", str(out), "--oracle", oracle]) == 2


def test_audit_kernel(tmp_path, capsys):
    cfg = write_config(tmp_path / "s.toml", kernel="smoluchowski")
    assert cli.main(["audit-kernel", str(cfg), "--count", "101"]) == 0
    out = capsys.readouterr().out
    assert "envelope_holds   True" in out and "sampled k (envelope) 4" in out


def test_audit_flags_multiplicative(tmp_path, capsys):
    cfg = write_config(tmp_path / "m.toml", kernel="multiplicative")
    assert cli.main(["audit-kernel", str(cfg)]) == 0
    assert "faster than linearly" in capsys.readouterr().out


def test_study_single_level(tmp_path, capsys):
    cfg = write_config(tmp_path / "s.toml", kernel="smoluchowski")
    out = tmp_path / "study"
    assert cli.main(["study", str(cfg), "--n", "10", "-o", str(out)]) == 0
    rep = json.loads((out / "study.json").read_text(encoding="utf-8"))
    assert len(rep["rows"]) == 2 and {r["theta"] for r in rep["rows"]} == {0, 1}
    assert rep["decreasing"] is None
    assert rep["rows"][0]["l1_theta0_theta1"] > 0
    for r in rep["rows"]:
        if r["theta"] == 1:
            assert r["mass_drift"] <= 1e-10


def test_study_checks_levels_before_running(tmp_path, monkeypatch):
    spec = load_config(write_config(tmp_path / "s.toml", kernel="smoluchowski"))

    def boom(*_):
        raise AssertionError("a run started")

    monkeypatch.setattr(study, "run", boom)
    with pytest.raises(ConfigError, match="cover"):
        study.convergence_study(spec, [10.0, 1e4])
    for bad in ([], [10.0, 10.0], [0.5, 10.0]):
        with pytest.raises(ConfigError):
            study.convergence_study(spec, bad)


def test_study_threads_are_deterministic(tmp_path, monkeypatch):
    spec = load_config(write_config(tmp_path / "s.toml", kernel="smoluchowski"))
    serial = study.convergence_study(spec, [10.0, 100.0], threads=1)
    monkeypatch.setenv(study.THREADS_ENV, "3")
    assert study.thread_count() == 3
    parallel = study.convergence_study(spec, [10.0, 100.0])
    assert serial.distances == parallel.distances
    assert serial.decreasing is True
    assert [r.n for r in serial.rows] == [10.0, 10.0, 100.0, 100.0]
    table = serial.format_table()
    assert "100" in table


def test_bad_thread_env(monkeypatch):
    monkeypatch.setenv(study.THREADS_ENV, "zero")
    with pytest.raises(ConfigError):
        study.thread_count()


def test_help_lists_verbs(capsys):
    with pytest.raises(SystemExit):
        cli.main(["--help"])
    text = capsys.readouterr().out
    for verb in ("run", "study", "compare", "audit-kernel"):
        assert verb in text


def test_study_members_share_the_default_step(tmp_path, monkeypatch):
    cfg = write_config(tmp_path / "s.toml", kernel="smoluchowski", cells=40, T=0.1)
    cfg.write_text(cfg.read_text().replace("dt = 0.01\n", ""), encoding="utf-8")
    spec = load_config(cfg)
    assert spec.run.dt is None
    seen = []
    real_run = study.run

    def recording(config):
        seen.append(config.dt)
        return real_run(config)

    monkeypatch.setattr(study, "run", recording)
    study.convergence_study(spec, [10.0, 100.0])
    assert len(seen) == 4 and len(set(seen)) == 1 and seen[0] is not None
