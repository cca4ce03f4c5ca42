"""Experiment orchestration, artifact layout, and the command line."""

import csv
import json
import math
import os

import numpy as np
import pytest

from bbmlab import (OffspringDistribution, additive_martingale, cli,
                    grid_scan, m_of_t, martingale_second_moment,
                    sample_correlated_pair, sample_tree)
from bbmlab.experiments import (ConfigError, DEFAULT_SEED, ExperimentConfig,
                                REQUIRED_KEYS, emit_phase_figure_data,
                                load_config, parse_complex, run,
                                validate_config)
from bbmlab.phase import GridCell
from bbmlab.streams import replica_seed

BINARY = OffspringDistribution.binary()


def write_config(tmp_path, name, payload):
    path = tmp_path / name
    path.write_text(json.dumps(payload), encoding="utf-8")
    return str(path)


def read_rows(csv_path):
    with open(csv_path, "r", encoding="utf-8") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


class TestParseComplex:
    @pytest.mark.parametrize("raw,expected", [
        (2.0, complex(2.0, 0.0)),
        (3, complex(3.0, 0.0)),
        ("2", complex(2.0, 0.0)),
        ("0.4+0.6i", complex(0.4, 0.6)),
        ("1.2+0.9j", complex(1.2, 0.9)),
        ([1.2, 0.9], complex(1.2, 0.9)),
        ((0.5, -1.5), complex(0.5, -1.5)),
        (complex(0.0, 1.0), complex(0.0, 1.0)),
    ])
    def test_accepted_forms(self, raw, expected):
        assert parse_complex(raw) == expected

    @pytest.mark.parametrize("raw", ["zebra", {"re": 1.0}, [1.0, 2.0, 3.0]])
    def test_rejected_forms(self, raw):
        with pytest.raises(ConfigError):
            parse_complex(raw)


class TestLoadConfig:
    def test_override_precedence(self, tmp_path):
        path = write_config(tmp_path, "a.json", {
            "experiment": "tree_moments", "replicas": 5, "t": 1.0,
            "seed": 3})
        cfg, provided = load_config(path, {"seed": 11, "replicas": None})
        assert cfg.seed == 11
        assert cfg.replicas == 5
        assert cfg.t == 1.0
        assert {"experiment", "t", "seed", "replicas"} <= provided

    def test_unknown_key_rejected(self, tmp_path):
        path = write_config(tmp_path, "b.json", {
            "experiment": "tree_moments", "replicas": 2, "t": 1.0,
            "banana": 7})
        with pytest.raises(ConfigError, match="banana"):
            load_config(path, {})

    def test_malformed_json_rejected(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text("{not json", encoding="utf-8")
        with pytest.raises(ConfigError):
            load_config(str(path), {})
        path.write_text("[1, 2]", encoding="utf-8")
        with pytest.raises(ConfigError):
            load_config(str(path), {})

    def test_experiment_name_required(self, tmp_path):
        path = write_config(tmp_path, "d.json", {"replicas": 3})
        with pytest.raises(ConfigError):
            load_config(path, {})

    def test_missing_required_keys(self):
        with pytest.raises(ConfigError, match="beta_list"):
            load_config(None, {"experiment": "martingale"})

    def test_alternative_key_satisfies(self, tmp_path):
        path = write_config(tmp_path, "e.json", {
            "experiment": "tree_moments", "replicas": 2, "t_list": [1.0]})
        cfg, _ = load_config(path, {})
        assert cfg.ts() == [1.0]

    def test_validate_rejects_unknown_experiment(self):
        with pytest.raises(ConfigError):
            validate_config(ExperimentConfig(experiment="nope"))

    def test_validate_rejects_bad_replicas(self):
        with pytest.raises(ConfigError):
            validate_config(ExperimentConfig(experiment="tree_moments",
                                             replicas=0))

    def test_every_experiment_lists_requirements(self):
        for name, reqs in REQUIRED_KEYS.items():
            assert reqs, name


@pytest.fixture(scope="module")
def tree_result(tmp_path_factory):
    out = str(tmp_path_factory.mktemp("trees"))
    cfg = ExperimentConfig(experiment="tree_moments", replicas=200,
                           t=1.0, output_dir=out)
    return run(cfg), cfg


class TestRunArtifacts:
    def test_manifest_schema(self, tree_result):
        result, cfg = tree_result
        with open(os.path.join(result.run_dir, "manifest.json"),
                  encoding="utf-8") as fh:
            manifest = json.load(fh)
        assert set(manifest) == {
            "config", "experiment", "failures", "ok", "outputs",
            "replica_seeds", "started_utc", "summary", "tasks", "versions",
            "wall_time_s"}
        assert manifest["experiment"] == "tree_moments"
        assert manifest["ok"] is True
        assert len(manifest["replica_seeds"]) == cfg.replicas
        assert manifest["replica_seeds"][0] == replica_seed(cfg.seed, 0)
        assert manifest["config"]["replicas"] == 200
        assert "numpy" in manifest["versions"]

    def test_csv_config_echo(self, tree_result):
        result, cfg = tree_result
        path = result.outputs["tree_moments.csv"]
        with open(path, encoding="utf-8") as fh:
            first = fh.readline()
        assert first.startswith("# config {")
        echo = json.loads(first[len("# config "):])
        assert echo["replicas"] == cfg.replicas
        assert echo["experiment"] == "tree_moments"

    def test_population_summary(self, tree_result):
        result, _ = tree_result
        cell = result.summary["t=1.0"]
        assert cell["replicas"] == 200
        assert abs(cell["z"]) <= 4.0
        rows = read_rows(result.outputs["tree_moments.csv"])
        assert len(rows) == 200
        assert all(int(r["n_leaves"]) >= 1 for r in rows)


class TestReplicaRowReproduction:
    def test_martingale_row_recomputes_bit_exactly(self, tmp_path):
        cfg = ExperimentConfig(experiment="martingale", replicas=30, t=2.0,
                               beta_list=["0.5"],
                               output_dir=str(tmp_path))
        result = run(cfg)
        rows = read_rows(result.outputs["martingale.csv"])
        row = next(r for r in rows if int(r["replica"]) == 7)
        rs = replica_seed(cfg.seed, 7)
        assert int(row["seed"]) == rs
        tree = sample_tree(BINARY, 2.0, rs)
        assert int(row["n_leaves"]) == tree.n_leaves
        fld = sample_correlated_pair(tree, 1.0, rs)
        m = additive_martingale(fld, complex(0.5, 0.0))
        assert float(row["m_re"]) == m.real
        assert float(row["m_im"]) == m.imag
        assert float(row["m_abs2"]) == abs(m) ** 2
        block = result.summary["beta=(0.5+0j) rho=1.0"]
        assert block["oracle_abs2"] == pytest.approx(
            martingale_second_moment(0.5, 2.0, 2.0), rel=1e-12)

    def test_worker_pool_matches_serial(self, tmp_path):
        rows = {}
        for threads in (1, 2):
            cfg = ExperimentConfig(experiment="tree_moments", replicas=40,
                                   t=1.0, threads=threads,
                                   output_dir=str(tmp_path / str(threads)))
            result = run(cfg)
            with open(result.outputs["tree_moments.csv"],
                      encoding="utf-8") as fh:
                rows[threads] = [ln for ln in fh if not ln.startswith("#")]
        assert rows[1] == rows[2]


class TestFailureBudget:
    def test_node_budget_breach_flips_ok(self, tmp_path):
        cfg = ExperimentConfig(experiment="tree_moments", replicas=10,
                               t=6.0, max_nodes=10,
                               output_dir=str(tmp_path))
        result = run(cfg)
        assert not result.ok
        assert len(result.failures) > 1
        assert all("ResourceLimitError" in f["error"]
                   for f in result.failures)


class TestPhaseFigureData:
    def cell(self, sigma, tau):
        return GridCell(sigma=sigma, tau=tau, phase="B1", p_limit=1.0,
                        p_hat=1.01, stderr=0.01, n_replicas=2, t=1.0)

    def test_single_cell(self, tmp_path):
        path = tmp_path / "grid.csv"
        emit_phase_figure_data([self.cell(0.1, 0.2)], str(path))
        lines = path.read_text(encoding="utf-8").splitlines()
        assert lines[0] == "sigma,tau,p_limit,p_hat"
        assert len(lines) == 2

    def test_five_by_five(self, tmp_path):
        cells = [self.cell(0.1 * i, 0.1 * j)
                 for i in range(5) for j in range(5)]
        path = tmp_path / "grid.csv"
        emit_phase_figure_data(cells, str(path))
        assert len(path.read_text(encoding="utf-8").splitlines()) == 26

    def test_sign_symmetric_scan(self, tmp_path):
        cells = grid_scan((-0.8, 0.8), (0.0, 0.5), 2, BINARY, t=1.0,
                          replicas=2, rho=1.0, seed=DEFAULT_SEED)
        path = tmp_path / "grid.csv"
        emit_phase_figure_data(cells, str(path))
        rows = list(csv.DictReader(
            path.read_text(encoding="utf-8").splitlines()))
        by_key = {(float(r["sigma"]), float(r["tau"])): float(r["p_limit"])
                  for r in rows}
        for tau in (0.0, 0.5):
            assert by_key[(-0.8, tau)] == by_key[(0.8, tau)]

    def test_empty_table_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            emit_phase_figure_data([], str(tmp_path / "grid.csv"))


class TestCli:
    def test_run_subcommand(self, tmp_path, capsys):
        path = write_config(tmp_path, "run.json",
                            {"replicas": 20, "t": 1.0})
        rc = cli.main(["tree_moments", "--config", path,
                       "--out", str(tmp_path / "out")])
        captured = capsys.readouterr()
        assert rc == 0
        run_dir = captured.out.splitlines()[0]
        assert os.path.isfile(os.path.join(run_dir, "manifest.json"))

    def test_unknown_experiment_exits_two(self):
        with pytest.raises(SystemExit) as exc:
            cli.main(["definitely_not_an_experiment"])
        assert exc.value.code == 2

    def test_no_command_is_usage_error(self):
        assert cli.main([]) == 2

    def test_missing_required_keys_exit_two(self):
        assert cli.main(["martingale"]) == 2

    def test_missing_config_file_exit_two(self, tmp_path):
        rc = cli.main(["tree_moments", "--config",
                       str(tmp_path / "absent.json")])
        assert rc == 2

    def test_failure_budget_exit_one(self, tmp_path):
        path = write_config(tmp_path, "broken.json",
                            {"replicas": 10, "t": 6.0, "max_nodes": 10})
        rc = cli.main(["tree_moments", "--config", path,
                       "--out", str(tmp_path / "out")])
        assert rc == 1

    def test_oracle_value(self, capsys):
        assert cli.main(["oracle", "m_of_t", "10"]) == 0
        out = capsys.readouterr().out.strip()
        assert float(out) == pytest.approx(m_of_t(10.0), rel=1e-15)

    def test_oracle_list(self, capsys):
        assert cli.main(["oracle", "list"]) == 0
        out = capsys.readouterr().out
        assert "m_of_t T" in out
        assert "pair_moment LAMBDA RHO TAU T K" in out

    def test_oracle_usage_errors(self):
        assert cli.main(["oracle", "m_of_t"]) == 2
        assert cli.main(["oracle", "nonsense", "1"]) == 2
        assert cli.main(["oracle", "m_of_t", "zebra"]) == 2
