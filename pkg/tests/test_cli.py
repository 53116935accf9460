import json

import pytest

from cvarmax.cli import main
from cvarmax.feasible import BudgetPolytope
from cvarmax.objective import SensorObjective, sensor_value
from cvarmax.optimizers import offline_rascal
from cvarmax.scenarios import load_pool


@pytest.fixture
def path_graph(tmp_path):
    p = tmp_path / "path3.txt"
    p.write_text("0 1\n1 2\n", encoding="utf-8")
    return str(p)


def _strip_wallclock(trace_text):
    lines = trace_text.strip().splitlines()
    return [",".join(ln.split(",")[:5]) for ln in lines]


class TestGenerate:
    def test_row_count_and_determinism(self, tmp_path, path_graph, capsys):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        for out in (out1, out2):
            rc = main(["generate", "--graph", path_graph, "--pool-size", "10",
                       "--seed", "5", "--out", str(out)])
            assert rc == 0
        t1 = (out1 / "pool.csv").read_text()
        t2 = (out2 / "pool.csv").read_text()
        assert t1 == t2
        assert len(t1.strip().splitlines()) == 1 + 30  # header + 10 scenarios x 3 vertices
        pool = load_pool(out1 / "pool.csv")
        assert len(pool) == 10 and pool[0].n == 3

    def test_pool_round_trips_losslessly(self, tmp_path, path_graph):
        out = tmp_path / "g"
        main(["generate", "--graph", path_graph, "--pool-size", "7",
              "--seed", "1", "--out", str(out)])
        from cvarmax.scenarios import pool_to_csv
        text = (out / "pool.csv").read_text()
        assert pool_to_csv(load_pool(out / "pool.csv")) == text


class TestRun:
    def test_fw_on_single_scenario_matches_alpha_one_offline(self, tmp_path, path_graph):
        pool_dir = tmp_path / "pool"
        main(["generate", "--graph", path_graph, "--pool-size", "1",
              "--seed", "2", "--out", str(pool_dir)])
        pool_file = str(pool_dir / "pool.csv")
        out = tmp_path / "fw"
        rc = main(["run", "--graph", path_graph, "--pool-file", pool_file,
                   "--algorithm", "fw", "--budget", "1", "--p", "0.4",
                   "--steps", "25", "--holdout-size", "5",
                   "--online-samples", "50", "--seed", "2", "--out", str(out)])
        assert rc == 0
        from cvarmax.cli import allocation_from_csv
        x_fw = allocation_from_csv((out / "solution.csv").read_text())
        pool = load_pool(pool_file)
        obj = SensorObjective(0.4)
        region = BudgetPolytope(3, 1.0, 1.0)
        x_ref = offline_rascal(pool, obj, region, steps=25, u=1e-7, alpha=1.0)
        z = pool[0]
        assert sensor_value(x_fw, z, obj) == pytest.approx(
            sensor_value(x_ref, z, obj), abs=1e-6)

    def test_trace_schema_identical_across_algorithms(self, tmp_path, path_graph):
        headers = []
        for alg in ("stochastic-rascal", "rascal"):
            out = tmp_path / alg
            rc = main(["run", "--graph", path_graph, "--algorithm", alg,
                       "--pool-size", "20", "--holdout-size", "10",
                       "--online-samples", "40", "--batch-size", "10",
                       "--delta", "0.25", "--steps", "5", "--budget", "1",
                       "--seed", "3", "--out", str(out)])
            assert rc == 0
            headers.append((out / "trace.csv").read_text().splitlines()[0])
        assert headers[0] == headers[1] == "batch,samples,tau,holdout_cvar,holdout_mean,wallclock_ms"

    def test_online_rascal_runs_and_traces(self, tmp_path, path_graph):
        out = tmp_path / "online"
        rc = main(["run", "--graph", path_graph, "--algorithm", "online-rascal",
                   "--pool-size", "15", "--holdout-size", "8",
                   "--online-samples", "40", "--batch-size", "10",
                   "--delta", "0.25", "--budget", "1", "--seed", "4",
                   "--out", str(out)])
        assert rc == 0
        lines = (out / "trace.csv").read_text().strip().splitlines()
        assert len(lines) == 1 + 4  # header + one row per mini-batch

    def test_missing_graph_exits_2_naming_path(self, tmp_path, capsys):
        rc = main(["run", "--graph", str(tmp_path / "nope.txt"), "--out", str(tmp_path)])
        assert rc == 2
        assert "nope.txt" in capsys.readouterr().err

    def test_bad_schedule_exits_1(self, tmp_path, path_graph, capsys):
        rc = main(["run", "--graph", path_graph, "--pool-size", "5",
                   "--holdout-size", "5", "--online-samples", "20",
                   "--batch-size", "50", "--budget", "1", "--out", str(tmp_path)])
        assert rc == 1

    def test_deterministic_outputs(self, tmp_path, path_graph):
        texts = []
        for sub in ("r1", "r2"):
            out = tmp_path / sub
            main(["run", "--graph", path_graph, "--pool-size", "20",
                  "--holdout-size", "10", "--online-samples", "40",
                  "--batch-size", "10", "--delta", "0.25", "--budget", "1",
                  "--seed", "9", "--out", str(out)])
            texts.append(((out / "solution.csv").read_text(),
                          (out / "trace.csv").read_text()))
        assert texts[0][0] == texts[1][0]
        assert _strip_wallclock(texts[0][1]) == _strip_wallclock(texts[1][1])

    def test_config_file_with_override(self, tmp_path, path_graph):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({
            "graph": path_graph, "pool_size": 12, "holdout_size": 6,
            "online_samples": 20, "batch_size": 10, "delta": 0.25,
            "budget": 1.0, "seed": 6}), encoding="utf-8")
        out = tmp_path / "cfgout"
        rc = main(["run", "--config", str(cfg), "--pool-size", "15",
                   "--out", str(out)])
        assert rc == 0

    def test_unknown_config_key_rejected(self, tmp_path, capsys):
        cfg = tmp_path / "bad.json"
        cfg.write_text(json.dumps({"graf": "er:5:0.5"}), encoding="utf-8")
        rc = main(["run", "--config", str(cfg), "--out", str(tmp_path)])
        assert rc == 2
        assert "graf" in capsys.readouterr().err


class TestSweep:
    def test_row_count_and_determinism(self, tmp_path, path_graph, capsys):
        args = ["sweep", "--graph", path_graph, "--axis", "T",
                "--values", "20,40,60", "--algorithms", "stochastic-rascal,rascal,fw",
                "--seeds", "0,1", "--pool-size", "15", "--holdout-size", "8",
                "--batch-size", "10", "--delta", "0.25", "--steps", "5",
                "--budget", "1", "--seed", "7"]
        out1, out2 = tmp_path / "s1", tmp_path / "s2"
        for out in (out1, out2):
            rc = main(args + ["--out", str(out)])
            assert rc == 0
        t1 = (out1 / "sweep.csv").read_text()
        assert t1 == (out2 / "sweep.csv").read_text()
        lines = t1.strip().splitlines()
        assert lines[0] == "algorithm,axis,value,seed,train_cvar,holdout_cvar"
        assert len(lines) == 1 + 18  # 3 values x 2 seeds x 3 algorithms

    def test_offline_rows_identical_across_seeds(self, tmp_path, path_graph):
        out = tmp_path / "s"
        main(["sweep", "--graph", path_graph, "--axis", "T", "--values", "20,40",
              "--algorithms", "fw", "--seeds", "3,4", "--pool-size", "10",
              "--holdout-size", "6", "--steps", "4", "--budget", "1",
              "--seed", "8", "--out", str(out)])
        rows = [ln.split(",") for ln in (out / "sweep.csv").read_text().strip().splitlines()[1:]]
        cvars = {(r[2], r[4], r[5]) for r in rows}
        # fw ignores both the horizon and the seed: one distinct value tuple per axis point,
        # and in fact the same across axis points.
        assert len({(r[4], r[5]) for r in rows}) == 1
        assert len(rows) == 4

    def test_gap_to_offline_shrinks_with_horizon(self, tmp_path):
        from cvarmax.cli import sweep_rows_from_csv
        out = tmp_path / "gap"
        rc = main(["sweep", "--graph", "er:15:0.2", "--axis", "T",
                   "--values", "100,2000", "--algorithms", "stochastic-rascal,rascal",
                   "--seeds", "0", "--pool-size", "150", "--holdout-size", "120",
                   "--budget", "2", "--delta", "0.125", "--steps", "40",
                   "--seed", "1", "--out", str(out)])
        assert rc == 0
        rows = sweep_rows_from_csv((out / "sweep.csv").read_text())
        by = {(r["algorithm"], r["value"]): r["holdout_cvar"] for r in rows}
        gap_small = by[("rascal", 100.0)] - by[("stochastic-rascal", 100.0)]
        gap_large = by[("rascal", 2000.0)] - by[("stochastic-rascal", 2000.0)]
        assert gap_large <= gap_small

    def test_jobs_parallel_same_output(self, tmp_path, path_graph):
        base = ["sweep", "--graph", path_graph, "--axis", "budget",
                "--values", "1,2", "--algorithms", "stochastic-rascal",
                "--seeds", "0", "--pool-size", "10", "--holdout-size", "6",
                "--online-samples", "20", "--batch-size", "10", "--delta", "0.25",
                "--budget", "1", "--seed", "9"]
        out1, out2 = tmp_path / "j1", tmp_path / "j2"
        assert main(base + ["--out", str(out1)]) == 0
        assert main(base + ["--out", str(out2), "--jobs", "2"]) == 0
        assert (out1 / "sweep.csv").read_text() == (out2 / "sweep.csv").read_text()


class TestEvalAndPlot:
    def test_eval_allocation_and_portfolio(self, tmp_path, path_graph, capsys):
        pool_dir = tmp_path / "pool"
        main(["generate", "--graph", path_graph, "--pool-size", "6",
              "--seed", "1", "--out", str(pool_dir)])
        alloc = tmp_path / "alloc.csv"
        alloc.write_text("vertex,allocation\n0,1\n1,0\n2,0\n", encoding="utf-8")
        rc = main(["eval", "--solution", str(alloc), "--pool",
                   str(pool_dir / "pool.csv"), "--alpha", "0.5", "--p", "0.3"])
        assert rc == 0
        out = capsys.readouterr().out
        assert "cvar=" in out and "mean=" in out
        port = tmp_path / "port.csv"
        port.write_text("weight,set\n1/2,0\n1/2,1;2\n", encoding="utf-8")
        rc = main(["eval", "--solution", str(port), "--pool",
                   str(pool_dir / "pool.csv"), "--alpha", "0.5", "--p", "0.3",
                   "--unit-energy", "2.0"])
        assert rc == 0
        assert "cvar=" in capsys.readouterr().out

    def test_eval_missing_files(self, tmp_path, capsys):
        rc = main(["eval", "--solution", str(tmp_path / "a.csv"),
                   "--pool", str(tmp_path / "b.csv")])
        assert rc == 2

    def test_run_plot_writes_png(self, tmp_path, path_graph):
        out = tmp_path / "plot"
        rc = main(["run", "--graph", path_graph, "--pool-size", "10",
                   "--holdout-size", "6", "--online-samples", "20",
                   "--batch-size", "10", "--delta", "0.25", "--budget", "1",
                   "--seed", "2", "--out", str(out), "--plot"])
        assert rc == 0
        assert (out / "trace.png").exists()
        assert (out / "trace.png").stat().st_size > 0

    def test_sweep_plot_and_standalone_plot(self, tmp_path, path_graph):
        out = tmp_path / "sw"
        rc = main(["sweep", "--graph", path_graph, "--axis", "T",
                   "--values", "20,40", "--algorithms", "fw", "--seeds", "0",
                   "--pool-size", "8", "--holdout-size", "5", "--steps", "3",
                   "--budget", "1", "--seed", "3", "--out", str(out), "--plot"])
        assert rc == 0
        assert (out / "sweep.png").exists()
        dest = tmp_path / "re.png"
        rc = main(["plot", "--sweep", str(out / "sweep.csv"), "--out", str(dest)])
        assert rc == 0
        assert dest.exists()

    def test_plot_requires_exactly_one_source(self, tmp_path, capsys):
        assert main(["plot"]) == 2
