import csv

import numpy as np
import pytest

from lagmc import ConfigError
from lagmc.experiments import (ExperimentReport, Table, config_from_string, emit_csv, load_config,
                               run)


def _cfg(text):
    return config_from_string(text)


def _rows(report, name):
    t = report.tables[name]
    return [dict(zip(t.columns, r)) for r in t.rows]


def test_solve_quadratic():
    rep = run(_cfg("[experiment]\nkind = solve\n[grid]\nn = 2\npoints = 17\n[potential]\ntype = quadratic\na = 1"))
    row = _rows(rep, "solve")[0]
    assert rep.ok and row["converged"] and row["error_sup"] < 1e-10


def test_solve_subcritical_warning():
    rep = run(_cfg("[experiment]\nkind = solve\n[grid]\nn = 3\npoints = 7\n"
                   "[phase]\nvariant = constant\nc = 0.3"))
    assert any("subcritical" in line for line in rep.summary)


def test_flow_drift():
    rep = run(_cfg("[experiment]\nkind = flow\n[grid]\npoints = 11\n[flow]\nsteps = 40"))
    assert rep.ok
    assert max(r["drift_error"] for r in _rows(rep, "flow")) < 1e-12


def test_gallery_single_family():
    rep = run(_cfg("[experiment]\nkind = counterexample-gallery\n[gallery]\n"
                   "families = odd_power:4:0\nsamples = 200\np_steps = 21\nM_steps = 21"))
    assert rep.ok
    rows = _rows(rep, "gallery_odd_power_4_0")
    assert len(rows) == 400
    assert max(r["residual"] for r in rows) <= 1e-10


def test_concavity_sweep():
    rep = run(_cfg("[experiment]\nkind = concavity-sweep\nseed = 3\n[concavity]\n"
                   "n = 3\nK = 2\nA = 1, 8, 64, 141, 200\nsamples = 5000"))
    fr = [r["pd_fraction"] for r in _rows(rep, "concavity")]
    assert all(b >= a for a, b in zip(fr, fr[1:]))
    assert fr[-1] == 1.0 and fr[0] < 1.0
    assert rep.ok


def test_rotation_check():
    rep = run(_cfg("[experiment]\nkind = rotation-check\n[grid]\npoints = 33"))
    row = _rows(rep, "rotation")[0]
    assert rep.ok and row["injective"] and row["phase_shift_residual"] <= row["shift_bound"]


def test_jacobi_report():
    rep = run(_cfg("[experiment]\nkind = jacobi-report\n[grid]\nn = 3\npoints = 9\nlower = 1 -0.5 -0.5\n"
                   "upper = 2 0.5 0.5\n[jacobi]\ndump_nodes = false"))
    assert rep.ok
    row = _rows(rep, "jacobi")[0]
    assert row["evaluated"] > 0 and row["c_emp"] > 0
    assert "jacobi_nodes" not in rep.tables


def test_gradient_scaling_columns():
    rep = run(_cfg("[experiment]\nkind = gradient-scaling\n[grid]\npoints = 17\n[scaling]\nscales = 0.5, 1, 2"))
    t = rep.tables["gradient_scaling"]
    assert {"osc", "du0", "fitted_C"} <= set(t.columns)
    C = _rows(rep, "fit")[0]["fitted_C"]
    assert rep.ok and 0 < C < np.inf


def test_hessian_scaling_envelope():
    rep = run(_cfg("[experiment]\nkind = hessian-scaling\n[grid]\npoints = 17\n[scaling]\nscales = 0.5, 1, 2"))
    assert rep.ok and _rows(rep, "envelope")[0]["consistent"]
    for r in _rows(rep, "hessian_scaling"):
        assert r["log_hessian"] <= r["envelope"] + 1e-9


@pytest.mark.parametrize("text,path", [
    ("[experiment]\nkind = solve\n[grid]\npoints = abc", "grid.points"),
    ("[experiment]\nkind = nope", "experiment.kind"),
    ("[grid]\nn = 2", "experiment"),
    ("[experiment]\nkind = solve\n[grid]\nwidth = 2", "grid.width"),
    ("[experiment]\nkind = solve\n[extras]\na = 1", "extras"),
    ("[experiment]\nkind = flow\n[flow]\nboundary = open", "flow.boundary"),
    ("[experiment]\nkind = concavity-sweep\n[concavity]\nn = 2", "concavity.n"),
    ("[experiment]\nkind = counterexample-gallery\n[gallery]\nfamilies = cubic", "gallery.families"),
    ("[experiment]\nkind = flow\n[grid]\nn = 2\npoints = 11\n[flow]\ndt = 1", "flow.dt"),
])
def test_config_errors_name_the_field(text, path):
    with pytest.raises(ConfigError) as exc:
        run(_cfg(text))
    assert exc.value.path == path


def test_keys_are_case_sensitive():
    cfg = _cfg("[experiment]\nkind = concavity-sweep\n[concavity]\nK = 2")
    assert cfg.float("concavity", "K") == 2.0
    with pytest.raises(ConfigError):
        _cfg("[experiment]\nkind = concavity-sweep\n[concavity]\nk = 2")


def test_load_config_seed_override(tmp_path):
    p = tmp_path / "c.ini"
    p.write_text("[experiment]\nkind = concavity-sweep\nseed = 3\n")
    assert load_config(p).seed == 3
    assert load_config(p, seed=9).seed == 9
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.ini")


def test_emit_csv_header_only(tmp_path):
    rep = ExperimentReport("solve", {"empty": Table(["a", "b", "status"])}, ["nothing"])
    emit_csv(rep, tmp_path)
    assert (tmp_path / "empty.csv").read_text() == "a,b,status\n"
    assert "status: ok" in (tmp_path / "summary.txt").read_text()


def test_emit_csv_formatting(tmp_path):
    t = Table(["x", "flag", "k", "status"])
    t.add(x=1 / 3, flag=True, k=np.int64(4), status="ok")
    t.add(x=2.0, flag=False, k=0, status="failed: why")
    rep = ExperimentReport("solve", {"t": t}, [])
    emit_csv(rep, tmp_path)
    rows = list(csv.reader(open(tmp_path / "t.csv")))
    assert rows[1] == ["0.33333333333333331", "true", "4", "ok"]
    assert rows[2][1] == "false"
    assert rep.failed_rows == 1 and not rep.ok
    assert "failed rows: 1" in (tmp_path / "summary.txt").read_text()


def test_emit_csv_reports_path(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(OSError) as exc:
        emit_csv(ExperimentReport("solve", {}, []), blocker / "sub")
    assert str(blocker) in str(exc.value)


def test_table_missing_column():
    with pytest.raises(KeyError):
        Table(["a", "b"]).add(a=1)
