import csv
from pathlib import Path

import numpy as np
import pytest

from deconfound import defaults, harness
from deconfound.harness import ExperimentConfig


def tiny_config(out_dir, **kw):
    base = dict(estimators=["tarnet"], bench="synthetic", out_dir=str(out_dir),
                n=200, n_seeds=2, seed=0, max_epochs=3, patience=2, jobs=1)
    base.update(kw)
    return ExperimentConfig(**base)


class TestResolution:
    def test_table_values(self):
        assert defaults.resolve_lambda("snet+", "ihdp") == (18.0, 1, "table")
        assert defaults.resolve_lambda("snet+", "w5-c10-o5-3K")[:2] == (1.7, 1)
        assert defaults.resolve_lambda("drcfr+", "w5-c10-o5-5K")[:2] == (8.0, 1)
        assert defaults.resolve_lambda("dragonnet_tr+", "w5-c12-o5-3K")[:2] == (2.0, 300)

    def test_every_plus_estimator_covered_for_shipped_labels(self):
        labels = ["ihdp", "ihdp-coeff", "w5-c10-o5-2K", "w5-c10-o5-3K",
                  "w5-c10-o5-5K", "w5-c10-o5-7K", "w5-c11-o5-3K",
                  "w5-c12-o5-3K", "w5-c13-o5-3K"]
        for est in ("snet+", "drcfr+", "dragonnet+", "dragonnet_tr+"):
            for label in labels:
                assert (est, label) in defaults.DEFAULT_LAMBDA

    def test_flag_beats_file_beats_table(self):
        lam, gam, src = defaults.resolve_lambda("snet+", "ihdp", flag_lambda0=2.0,
                                                file_lambda0=5.0)
        assert (lam, src) == (2.0, "flag")
        lam, gam, src = defaults.resolve_lambda("snet+", "ihdp", file_lambda0=5.0)
        assert (lam, src) == (5.0, "config-file")

    def test_non_adversarial_inactive(self):
        assert defaults.resolve_lambda("tarnet", "ihdp") == (0.0, 1, "inactive")

    def test_fallback_label(self):
        lam, gam, src = defaults.resolve_lambda("snet+", "w5-c10-o5-1K")
        assert (lam, gam, src) == (1.0, 1, "fallback")

    def test_alpha_table(self):
        assert defaults.resolve_alpha("snet", "ihdp", "alpha") == (0.6, "table")
        assert defaults.resolve_alpha("dragonnet", "ihdp", "alpha") == (0.99, "table")
        assert defaults.resolve_alpha("snet", "synthetic", "alpha") == (0.2, "table")
        assert defaults.resolve_alpha("dragonnet_tr", "synthetic", "alpha") == (0.7, "table")

    def test_alpha_unit_mode(self):
        assert defaults.resolve_alpha("snet", "ihdp", "unit") == (None, "unit-mode")

    def test_alpha_flag_precedence(self):
        assert defaults.resolve_alpha("snet", "ihdp", "alpha", flag_alpha=0.3) == (0.3, "flag")


class TestExperimentConfig:
    def test_unknown_estimator(self, tmp_path):
        with pytest.raises(ValueError, match="unknown estimator"):
            tiny_config(tmp_path, estimators=["xnet"])

    def test_bench_defaults(self, tmp_path):
        cfg = tiny_config(tmp_path)
        assert cfg.effective_ortho_lambda2 == 0.01
        assert cfg.effective_val_fraction == 0.30
        ihdp_cfg = tiny_config(tmp_path, bench="ihdp")
        assert ihdp_cfg.effective_ortho_lambda2 == 0.0
        assert ihdp_cfg.effective_val_fraction == 0.20

    def test_dataset_label(self, tmp_path):
        assert tiny_config(tmp_path, n=3000).dataset_label() == "w5-c10-o5-3K"
        assert tiny_config(tmp_path, bench="ihdp").dataset_label() == "ihdp"
        assert tiny_config(tmp_path, bench="ihdp",
                           alpha_mode="alpha").dataset_label() == "ihdp-coeff"


class TestRunExperiment:
    def test_records_and_aggregates(self, tmp_path):
        cfg = tiny_config(tmp_path / "a")
        aggs = harness.run_experiment(cfg)
        assert aggs["tarnet"].n_runs == 2
        runs = list(csv.DictReader(open(tmp_path / "a" / "runs.csv")))
        assert len(runs) == 2
        assert runs[0]["estimator"] == "tarnet"
        traces = list((tmp_path / "a" / "traces").iterdir())
        assert len(traces) == 2
        # aggregate recomputable from per-run records
        vals = [float(r["pehe_out"]) for r in runs]
        assert np.isclose(aggs["tarnet"].pehe_out_mean, np.mean(vals))
        log_text = (tmp_path / "a" / "runlog.txt").read_text()
        assert "resolved tarnet" in log_text

    def test_rerun_byte_identical(self, tmp_path):
        for sub in ("r1", "r2"):
            harness.run_experiment(tiny_config(tmp_path / sub, estimators=["snet+"]))
        a, b = tmp_path / "r1", tmp_path / "r2"
        assert (a / "runs.csv").read_bytes() == (b / "runs.csv").read_bytes()
        for trace in (a / "traces").iterdir():
            assert trace.read_bytes() == (b / "traces" / trace.name).read_bytes()

    def test_parallel_matches_serial(self, tmp_path):
        harness.run_experiment(tiny_config(tmp_path / "serial", jobs=1))
        harness.run_experiment(tiny_config(tmp_path / "par", jobs=2))
        assert ((tmp_path / "serial" / "runs.csv").read_bytes()
                == (tmp_path / "par" / "runs.csv").read_bytes())

    def test_paired_seeds_share_data(self, tmp_path):
        # same seed index -> same dataset for every estimator (paired runs)
        cfg = tiny_config(tmp_path, estimators=["snet", "snet+"], n_seeds=1)
        tasks = harness.build_tasks(cfg)
        data = [harness._load_run_data(t) for t in tasks]
        np.testing.assert_array_equal(data[0][0].X, data[1][0].X)
        np.testing.assert_array_equal(data[0][2].y, data[1][2].y)


class TestSweep:
    def test_confounding_sweep_rows(self, tmp_path):
        cfg = tiny_config(tmp_path, n_seeds=1)
        rows = harness.sweep("confounding", cfg)
        xs = [r[0] for r in rows]
        assert xs == [10, 11, 12, 13]
        sweep_csv = (tmp_path / "sweep.csv").read_text().splitlines()
        assert sweep_csv[0].startswith("x_value,estimator,pehe_out_mean")
        assert len(sweep_csv) == 5

    def test_unknown_kind(self, tmp_path):
        with pytest.raises(ValueError, match="unknown sweep"):
            harness.sweep("noise", tiny_config(tmp_path))


class TestRenderReport:
    def write_runs(self, path, rows):
        path.mkdir(parents=True, exist_ok=True)
        with open(path / "runs.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(harness.RUNS_HEADER)
            for r in rows:
                w.writerow(r)

    def row(self, est, seed, pehe_in, pehe_out, diverged=0):
        return [est, seed, "", diverged, 5, "0", "0", 1, "", "1.0",
                "" if diverged else pehe_in, "" if diverged else pehe_out]

    def test_bolds_better_of_pair(self, tmp_path):
        self.write_runs(tmp_path, [
            self.row("snet", 0, "2.0", "2.0"), self.row("snet", 1, "2.2", "2.2"),
            self.row("snet+", 0, "1.5", "1.5"), self.row("snet+", 1, "1.7", "1.7"),
        ])
        out = harness.render_report(tmp_path)
        lines = {l.split()[0]: l for l in out.splitlines() if l.startswith("snet")}
        assert "**" in lines["snet+"]
        assert "**" not in lines["snet"]

    def test_tie_bolds_both(self, tmp_path):
        self.write_runs(tmp_path, [
            self.row("snet", 0, "2.0", "2.0"),
            self.row("snet+", 0, "2.0", "2.0"),
        ])
        out = harness.render_report(tmp_path)
        rows = [l for l in out.splitlines() if l.startswith("snet")]
        assert all("**" in r for r in rows)

    def test_missing_estimator_footnote(self, tmp_path):
        self.write_runs(tmp_path, [self.row("tarnet", 0, "1.0", "1.0")])
        out = harness.render_report(tmp_path, estimators=["tarnet", "snet"])
        assert "no runs recorded for: snet" in out

    def test_diverged_runs_excluded(self, tmp_path):
        self.write_runs(tmp_path, [
            self.row("tarnet", 0, "1.0", "1.0"),
            self.row("tarnet", 1, None, None, diverged=1),
        ])
        out = harness.render_report(tmp_path)
        assert "1.0000" in out

    def test_empty_dir_rejected(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            harness.render_report(tmp_path / "nope")


class TestTuneAlpha:
    def test_visits_start_at_half_and_best_returned(self, tmp_path):
        cfg = tiny_config(tmp_path, estimators=["dragonnet"], n_seeds=1,
                          max_epochs=2)
        best, visited = harness.tune_alpha("dragonnet", cfg)
        assert visited[0][0] == 0.5
        assert (tmp_path / "alpha_search.csv").is_file()
        evaluated = [a for a, _ in visited]
        scores = dict(visited)
        assert scores[best] == min(scores.values())
        assert 0.0 < best < 1.0
