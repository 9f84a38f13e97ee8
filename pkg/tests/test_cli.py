import json

import numpy as np
import pytest

from taskorder.cli import bin_rule_rows, build_parser, main, phase_table, resolve_config
from taskorder.io import read_csv, save_correlation


def _run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, (json.loads(out.out) if code == 0 else out.err)


class TestEval:
    def test_independent_tasks(self, capsys, tmp_path):
        save_correlation(tmp_path / "eye.csv", np.eye(4))
        code, payload = _run(capsys, "eval", "--matrix", str(tmp_path / "eye.csv"))
        assert code == 0 and payload["error"] == 0.0

    def test_two_tasks(self, capsys, tmp_path):
        save_correlation(tmp_path / "c.json", np.array([[1, 0.5], [0.5, 1]]))
        code, payload = _run(capsys, "eval", "--matrix", str(tmp_path / "c.json"))
        assert payload["error"] == pytest.approx(0.0625, abs=1e-12)

    def test_chain_all_orders(self, capsys, tmp_path):
        code, payload = _run(capsys, "eval", "--graph", "chain", "--size", "5", "--a", "0.6",
                             "--all-orders", "--out", str(tmp_path))
        assert code == 0
        rows = read_csv(tmp_path / "orders.csv")
        assert len(rows) == 120
        assert payload["worst_to_best"] == pytest.approx(float(rows[-1]["error"]) / float(rows[0]["error"]))
        for name in ("config.json", "report.json"):
            assert (tmp_path / name).exists()

    def test_order_flag(self, capsys):
        code, payload = _run(capsys, "eval", "--graph", "chain", "--size", "3", "--a", "0.5", "--order", "A>C>B")
        assert payload["order"] == "1>3>2"

    @pytest.mark.parametrize("argv", [
        ["eval", "--graph", "chain", "--size", "4", "--a", "1.5"],
        ["eval"],
        ["eval", "--matrix", "/nonexistent.csv"],
        ["eval", "--graph", "chain", "--size", "3", "--a", "0.5", "--order", "1>2"],
    ])
    def test_errors_exit_nonzero(self, capsys, argv):
        code, err = _run(capsys, *argv)
        assert code != 0 and "taskorder eval" in err


class TestConfig:
    def test_precedence(self, tmp_path):
        cfg_path = tmp_path / "c.json"
        cfg_path.write_text(json.dumps({"graph": "ring", "size": 6, "a": 0.3}))
        args = build_parser().parse_args(["eval", "--config", str(cfg_path), "--a", "0.4"])
        cfg = resolve_config(args)
        assert (cfg["graph"], cfg["size"], cfg["a"], cfg["rho_o"]) == ("ring", 6, 0.4, 1.0)

    def test_unknown_key(self, capsys, tmp_path):
        cfg_path = tmp_path / "c.json"
        cfg_path.write_text(json.dumps({"grpah": "ring"}))
        code, err = _run(capsys, "eval", "--config", str(cfg_path))
        assert code != 0 and "grpah" in err

    def test_reproducible_payload(self, capsys, tmp_path):
        argv = ["simulate", "--graph", "chain", "--size", "3", "--a", "0.5", "--n-s", "5", "--n-x", "100",
                "--n-y", "2", "--n-seeds", "2", "--trainer", "closed", "--seed", "4"]
        _run(capsys, *argv, "--out", str(tmp_path / "a"))
        _run(capsys, *argv, "--out", str(tmp_path / "b"), "--threads", "2")
        for name in ("traces.csv", "summary.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


@pytest.fixture(scope="module")
def table():
    rows = phase_table(0.05)
    return {(r["rho_ab"], r["rho_bc"], r["rho_ca"]): r for r in rows}


class TestPhase:
    def test_grid_size(self, table):
        assert len(table) == 40**3
        assert min(k[0] for k in table) == -1.0 and max(k[0] for k in table) == 0.95

    def test_symmetric_cell_ties(self, table):
        assert table[(0.3, 0.3, 0.3)]["n_best"] == 6

    def test_invalid_cell(self, table):
        assert table[(0.95, 0.95, -0.9)]["valid"] is False

    def test_mirror_symmetry(self, table):
        swap = str.maketrans("AC", "CA")
        for (ab, bc, ca), r in table.items():
            if ca != 0.2 or not r["valid"]:
                continue
            m = table[(bc, ab, ca)]
            assert m["best_error"] == pytest.approx(r["best_error"], abs=1e-12)
            if r["n_best"] == 1:
                assert m["best_order"] == r["best_order"].translate(swap)

    def test_command(self, capsys, tmp_path):
        code, payload = _run(capsys, "phase", "--step", "0.25", "--out", str(tmp_path))
        assert payload["n_cells"] == 8**3
        assert read_csv(tmp_path / "phase.csv")[0].keys() >= {"rho_ab", "rho_bc", "rho_ca", "best_order", "best_error"}


class TestRules:
    def test_independent_tasks(self, capsys, tmp_path):
        save_correlation(tmp_path / "eye.csv", np.eye(5))
        code, payload = _run(capsys, "rules", "--matrix", str(tmp_path / "eye.csv"))
        assert all(r["error"] == 0.0 for r in payload["rules"])

    def test_small_sweep(self, capsys, tmp_path):
        code, payload = _run(capsys, "rules", "--sweep", "6", "--P", "4", "--out", str(tmp_path))
        assert code == 0 and payload["n_specs"] == 6
        assert sum(b["n"] for b in payload["bins"]) == 6
        assert len(read_csv(tmp_path / "specs.csv")) == 6

    def test_binning(self):
        rows = [
            {"m": 0.05, "periphery_to_core": 1, "core_to_periphery": 2, "max_path": 1, "min_path": 2, "random_mean": 3},
            {"m": 0.41, "periphery_to_core": 2, "core_to_periphery": 1, "max_path": 1, "min_path": 2, "random_mean": 3},
            {"m": 0.45, "periphery_to_core": 1, "core_to_periphery": 2, "max_path": 2, "min_path": 2, "random_mean": 3},
        ]
        bins = {b["m_lo"]: b for b in bin_rule_rows(rows, 0.1)}
        assert bins[0.0]["n"] == 1 and bins[0.0]["p2c_beats_c2p"] == 1.0
        assert bins[0.4]["p2c_beats_c2p"] == 0.5
        assert bins[0.4]["max_beats_min"] == 0.5


class TestSimulate:
    def test_traces(self, capsys, tmp_path):
        code, payload = _run(capsys, "simulate", "--graph", "chain", "--size", "3", "--a", "0.5",
                             "--orders", "A>B>C", "A>C>B", "--n-s", "5", "--n-x", "200", "--n-y", "2",
                             "--n-seeds", "2", "--out", str(tmp_path))
        rows = read_csv(tmp_path / "traces.csv")
        assert len(rows) == 2 * 2 * 4 * 3
        assert {r["order"] for r in rows} == {"1>2>3", "1>3>2"}
        assert len(payload["orders"]) == 2

    def test_scatter(self, capsys, tmp_path):
        code, payload = _run(capsys, "simulate", "--scatter", "3", "--trainer", "closed", "--n-s", "5",
                             "--n-x", "500", "--n-y", "2", "--n-seeds", "2", "--out", str(tmp_path))
        assert payload["n_specs"] == 3
        assert len(read_csv(tmp_path / "scatter.csv")) == 3

    def test_diverged_exit(self, capsys):
        code, err = _run(capsys, "simulate", "--graph", "chain", "--size", "2", "--a", "0.5",
                         "--n-s", "5", "--n-x", "100", "--n-y", "2", "--n-seeds", "2", "--eta", "1.0")
        assert code != 0 and "Diverged" in err


class TestEstimate:
    def test_recovers_similarity_and_feeds_rules(self, capsys, tmp_path):
        rho = np.array([[1.0, 0.5, -0.2], [0.5, 1.0, 0.3], [-0.2, 0.3, 1.0]])
        (tmp_path / "t.json").write_text(json.dumps({"transfer": ((1 - rho) ** 2).tolist(),
                                                     "baseline": np.ones((3, 3)).tolist()}))
        out = tmp_path / "est"
        code, payload = _run(capsys, "estimate", "--table", str(tmp_path / "t.json"), "--out", str(out))
        assert np.allclose(payload["rho"], rho, atol=1e-12)
        assert payload["analytic"]["approximate"] is False
        code, _ = _run(capsys, "rules", "--matrix", str(out / "similarity.csv"))
        assert code == 0

    def test_worse_than_chance_is_negative(self, capsys, tmp_path):
        (tmp_path / "t.json").write_text(json.dumps({"transfer": [[0, 2.25], [2.25, 0]], "baseline": [[1, 1], [1, 1]]}))
        code, payload = _run(capsys, "estimate", "--table", str(tmp_path / "t.json"), "--out", str(tmp_path))
        assert payload["rho"][0][1] == pytest.approx(-0.5)
        assert payload["n_clamped"] == 0
        flags = read_csv(tmp_path / "flags.csv")
        assert flags[0]["clamped"] == "false"

    def test_non_psd_needs_flag(self, capsys, tmp_path):
        rho = np.array([[1.0, 0.95, -0.9], [0.95, 1.0, 0.95], [-0.9, 0.95, 1.0]])
        (tmp_path / "t.json").write_text(json.dumps({"transfer": ((1 - rho) ** 2).tolist(),
                                                     "baseline": np.ones((3, 3)).tolist()}))
        code, payload = _run(capsys, "estimate", "--table", str(tmp_path / "t.json"))
        assert payload["analytic"] is None and payload["psd"] is False
        code, payload = _run(capsys, "estimate", "--table", str(tmp_path / "t.json"), "--project")
        assert payload["analytic"]["approximate"] is True

    def test_missing_input(self, capsys):
        code, err = _run(capsys, "estimate")
        assert code != 0
