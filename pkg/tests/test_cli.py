"""CLI behavior: verbs, terminal reports, trace files, exit codes."""

import csv
import json

import numpy as np
import pytest

from sheafcoord.cli import main

BUILTINS = {
    "consensus-line4",
    "constant-cycle",
    "formation-triangle",
    "pinned-consensus",
    "sign-cycle-3",
    "sign-cycle-4",
    "sign-cycle-5",
}


def _tiny_doc():
    """A two-vertex soft consensus scenario used for file-based tests."""
    return {
        "name": "tiny",
        "description": "two agents pulled to 1 and 3",
        "mode": "soft",
        "graph": {"vertices": 2, "edges": [[0, 1]]},
        "sheaf": {
            "vertex_dims": [1, 1],
            "edge_dims": [1],
            "restrictions": [
                {"edge": 0, "side": "tail", "entries": [1.0]},
                {"edge": 0, "side": "head", "entries": [1.0]},
            ],
        },
        "objectives": [
            {"type": "quadratic", "reference": [1.0], "weight": 1.0},
            {"type": "quadratic", "reference": [3.0], "weight": 1.0},
        ],
        "potentials": [{"type": "quadratic", "target": [0.0], "stiffness": 1.0}],
        "initial_state": [[0.0], [0.0]],
        "solver": {"rho": 1.0, "max_iters": 20000, "primal_tol": 1e-10, "dual_tol": 1e-10},
        "flow": {"converge_tol": 1e-10},
    }


def _write_doc(tmp_path, doc, name="scenario.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def _report(capsys):
    """Parse the terminal JSON line and return (report, remaining lines, err)."""
    captured = capsys.readouterr()
    lines = [ln for ln in captured.out.splitlines() if ln]
    report = None
    rest = []
    for ln in lines:
        if report is None and ln.startswith("{"):
            report = json.loads(ln)
        else:
            rest.append(ln)
    return report, rest, captured.err


class TestScenariosList:
    def test_lists_every_builtin_with_description(self, capsys):
        assert main(["scenarios", "list"]) == 0
        out = capsys.readouterr().out
        names = {ln.split(":", 1)[0] for ln in out.splitlines() if ln}
        assert names == BUILTINS
        for ln in out.splitlines():
            if ln:
                assert ":" in ln and ln.split(":", 1)[1].strip()


class TestCohomology:
    def test_sign_cycle_3_has_no_sections(self, capsys):
        assert main(["cohomology", "sign-cycle", "--n", "3"]) == 0
        out = capsys.readouterr().out
        assert "dim_h0 = 0" in out
        assert "dim_h1 = 0" in out
        assert "section_basis: (empty)" in out

    def test_sign_cycle_4_has_one_section(self, capsys):
        assert main(["cohomology", "sign-cycle", "--n", "4"]) == 0
        out = capsys.readouterr().out
        assert "dim_h0 = 1" in out
        assert "dim_h1 = 1" in out
        assert "section_basis:" in out

    def test_constant_cycle_counts(self, capsys):
        assert main(["cohomology", "constant-cycle"]) == 0
        out = capsys.readouterr().out
        assert "dim_h0 = 1" in out
        assert "dim_h1 = 1" in out

    def test_consensus_line_counts(self, capsys):
        assert main(["cohomology", "consensus-line4"]) == 0
        out = capsys.readouterr().out
        assert "dim_h0 = 1" in out
        assert "dim_h1 = 0" in out


class TestFlow:
    def test_consensus_flow_reaches_the_mean(self, tmp_path, capsys, monkeypatch):
        monkeypatch.chdir(tmp_path)
        assert main(["flow", "consensus-line4", "--out", "t.csv"]) == 0
        report, rest, _ = _report(capsys)
        assert report["status"] == "Converged"
        x = np.array(report["x"], dtype=float).ravel()
        assert np.allclose(x, 2.5, atol=1e-6)
        assert "is_global_section: true" in rest

        with open(tmp_path / "t.csv", newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["iter", "primal_residual", "dual_residual", "objective"]
        # record_every is forced to 1: consecutive step indices from 1
        iters = [int(r[0]) for r in rows[1:]]
        assert iters == list(range(1, len(iters) + 1))
        primals = [float(r[1]) for r in rows[1:]]
        assert primals[-1] < 1e-6
        objectives = [float(r[3]) for r in rows[1:]]
        assert all(b <= a + 1e-12 for a, b in zip(objectives, objectives[1:]))

    def test_formation_nonlinear_flow_hits_edge_targets(self, tmp_path, capsys, monkeypatch):
        monkeypatch.chdir(tmp_path)
        assert main(["flow", "formation-triangle", "--nonlinear", "--out", "f.csv"]) == 0
        report, _, _ = _report(capsys)
        assert report["status"] == "Converged"
        deltas = [np.array(b) for b in report["delta_x"]]
        targets = [
            np.array([-1.0, 0.0]),
            np.array([0.5, -0.8660254037844386]),
            np.array([-0.5, -0.8660254037844386]),
        ]
        for d, t in zip(deltas, targets):
            assert np.allclose(d, t, atol=1e-6)

    def test_steps_override_caps_the_run(self, tmp_path, capsys, monkeypatch):
        monkeypatch.chdir(tmp_path)
        assert main(["flow", "consensus-line4", "--steps", "3", "--out", "s.csv"]) == 0
        report, _, _ = _report(capsys)
        assert report["status"] == "MaxIters"
        with open(tmp_path / "s.csv", newline="") as fh:
            rows = list(csv.reader(fh))
        assert [int(r[0]) for r in rows[1:]] == [1, 2, 3]

    def test_missing_initial_state_is_a_scenario_error(self, tmp_path, capsys):
        doc = _tiny_doc()
        del doc["initial_state"]
        path = _write_doc(tmp_path, doc)
        assert main(["flow", path, "--out", str(tmp_path / "x.csv")]) == 2
        assert "initial_state" in capsys.readouterr().err

    def test_bad_steps_is_a_usage_error(self, tmp_path, capsys):
        assert main(["flow", "consensus-line4", "--steps", "0",
                     "--out", str(tmp_path / "x.csv")]) == 1
        assert "usage error" in capsys.readouterr().err


class TestSolve:
    def test_pinned_consensus_reaches_seven(self, tmp_path, capsys, monkeypatch):
        monkeypatch.chdir(tmp_path)
        assert main(["solve", "pinned-consensus", "--out", "p.csv"]) == 0
        report, _, _ = _report(capsys)
        assert report["status"] == "Converged"
        x = np.array(report["x"], dtype=float).ravel()
        assert np.allclose(x, 7.0, atol=1e-7)
        with open(tmp_path / "p.csv", newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["iter", "primal_residual", "dual_residual", "objective"]
        assert [int(r[0]) for r in rows[1:]] == list(range(1, len(rows)))

    def test_distributed_writes_an_identical_trace(self, tmp_path, capsys, monkeypatch):
        monkeypatch.chdir(tmp_path)
        assert main(["solve", "pinned-consensus", "--out", "c.csv"]) == 0
        rep_c, _, _ = _report(capsys)
        assert main(["solve", "pinned-consensus", "--distributed", "--out", "d.csv"]) == 0
        rep_d, _, _ = _report(capsys)
        assert rep_c == rep_d
        assert (tmp_path / "c.csv").read_bytes() == (tmp_path / "d.csv").read_bytes()

    def test_repeat_runs_write_identical_bytes(self, tmp_path, capsys, monkeypatch):
        monkeypatch.chdir(tmp_path)
        assert main(["solve", "formation-triangle", "--out", "a.csv"]) == 0
        assert main(["solve", "formation-triangle", "--out", "b.csv"]) == 0
        capsys.readouterr()
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()

    def test_max_iters_run_still_exits_zero(self, tmp_path, capsys, monkeypatch):
        monkeypatch.chdir(tmp_path)
        assert main(["solve", "pinned-consensus", "--max-iters", "3", "--out", "m.csv"]) == 0
        report, _, _ = _report(capsys)
        assert report["status"] == "MaxIters"

    def test_rho_override_is_validated(self, tmp_path, capsys):
        assert main(["solve", "pinned-consensus", "--rho", "-1.0",
                     "--out", str(tmp_path / "x.csv")]) == 1
        err = capsys.readouterr().err
        assert "usage error" in err and "rho" in err

    def test_seed_env_var_is_validated(self, tmp_path, capsys, monkeypatch):
        monkeypatch.chdir(tmp_path)
        monkeypatch.setenv("SHEAFCOORD_SEED", "not-a-number")
        assert main(["solve", "pinned-consensus", "--out", "x.csv"]) == 1
        assert "SHEAFCOORD_SEED" in capsys.readouterr().err
        monkeypatch.setenv("SHEAFCOORD_SEED", "42")
        assert main(["solve", "pinned-consensus", "--out", "y.csv"]) == 0

    def test_solves_a_scenario_file(self, tmp_path, capsys):
        path = _write_doc(tmp_path, _tiny_doc())
        assert main(["solve", path, "--out", str(tmp_path / "t.csv")]) == 0
        report, _, _ = _report(capsys)
        x = np.array(report["x"], dtype=float).ravel()
        # two quadratic pulls to 1 and 3 plus a consensus spring: symmetric
        # answer straddling 2
        assert x[0] + x[1] == pytest.approx(4.0, abs=1e-6)
        assert x[0] < 2.0 < x[1]


class TestErrorPaths:
    def test_unknown_scenario_is_exit_2(self, capsys):
        assert main(["cohomology", "does-not-exist"]) == 2
        assert "scenario error" in capsys.readouterr().err

    def test_family_without_n_is_a_usage_error(self, capsys):
        assert main(["cohomology", "sign-cycle"]) == 1
        err = capsys.readouterr().err
        assert "usage error" in err
        assert "sign-cycle-3" in err and "--n" in err

    def test_n_on_a_non_family_is_a_usage_error(self, capsys):
        assert main(["cohomology", "sign-cycle", "--n", "7"]) == 1
        assert "usage error" in capsys.readouterr().err

    def test_invalid_json_is_exit_2(self, tmp_path, capsys):
        path = tmp_path / "broken.json"
        path.write_text('{"name": "x",')
        assert main(["cohomology", str(path)]) == 2
        err = capsys.readouterr().err
        assert "scenario error" in err

    def test_structural_errors_name_the_field(self, tmp_path, capsys):
        doc = _tiny_doc()
        doc["sheaf"]["restrictions"][1]["entries"] = [1.0, 2.0]
        path = _write_doc(tmp_path, doc)
        assert main(["cohomology", path]) == 2
        err = capsys.readouterr().err
        assert "entries" in err

    def test_no_arguments_shows_usage(self, capsys):
        assert main([]) == 1
        assert main(["--help"]) == 0
