import csv
from pathlib import Path

import pytest

from deconfound import cli


def run_cli(*argv):
    return cli.main(list(argv))


class TestParsing:
    def test_realizations_range(self):
        assert cli.parse_realizations("1..10") == list(range(1, 11))
        assert cli.parse_realizations("7") == [7]
        with pytest.raises(Exception):
            cli.parse_realizations("9..2")

    def test_estimator_list(self):
        assert cli.parse_estimators("snet, snet+") == ["snet", "snet+"]
        with pytest.raises(Exception):
            cli.parse_estimators("hal9000")

    def test_missing_estimators_is_error(self, capsys):
        rc = run_cli("run", "--n", "100")
        assert rc == 2
        assert "no estimators" in capsys.readouterr().err


class TestGenData:
    def test_writes_labeled_csvs(self, tmp_path, capsys):
        rc = run_cli("gen-data", "--estimators", "tarnet", "--n", "100",
                     "--seeds", "2", "--out", str(tmp_path))
        assert rc == 0
        files = sorted(p.name for p in tmp_path.iterdir())
        assert files == ["data_w5-c10-o5-0.1K_s0.csv", "data_w5-c10-o5-0.1K_s1.csv"]
        header = (tmp_path / files[0]).read_text().splitlines()[0]
        assert header.endswith("t,y,mu0,mu1,pi")

    def test_rejects_ihdp(self, capsys):
        rc = run_cli("gen-data", "--estimators", "tarnet", "--bench", "ihdp")
        assert rc == 2
        assert "synthetic" in capsys.readouterr().err


class TestRunCommand:
    def test_end_to_end_and_determinism(self, tmp_path, capsys):
        args = ["run", "--estimators", "tarnet", "--n", "200", "--seeds", "1",
                "--max-epochs", "2", "--patience", "1"]
        rc = run_cli(*args, "--out", str(tmp_path / "a"))
        assert rc == 0
        out = capsys.readouterr().out
        assert "PEHE-out" in out
        rc = run_cli(*args, "--out", str(tmp_path / "b"))
        assert rc == 0
        assert ((tmp_path / "a" / "runs.csv").read_bytes()
                == (tmp_path / "b" / "runs.csv").read_bytes())

    def test_missing_ihdp_dir_diagnostic(self, tmp_path, capsys, monkeypatch):
        monkeypatch.delenv("DECONFOUND_IHDP_DIR", raising=False)
        rc = run_cli("run", "--bench", "ihdp", "--estimators", "tarnet",
                     "--seeds", "1", "--realizations", "1..1",
                     "--out", str(tmp_path))
        assert rc == 2
        assert "DECONFOUND_IHDP_DIR" in capsys.readouterr().err


class TestConfigFile:
    def test_file_values_and_flag_override(self, tmp_path, capsys):
        cfg = tmp_path / "exp.toml"
        cfg.write_text(
            "[experiment]\n"
            'estimators = ["tarnet"]\n'
            "seeds = 1\n"
            f'out = "{tmp_path / "from_file"}"\n'
            "[train]\n"
            "max_epochs = 2\n"
            "patience = 1\n"
            "[dgp]\n"
            "n = 150\n")
        rc = run_cli("run", "--config", str(cfg))
        assert rc == 0
        rows = list(csv.DictReader(open(tmp_path / "from_file" / "runs.csv")))
        assert len(rows) == 1
        # flag overrides the file
        rc = run_cli("run", "--config", str(cfg), "--out", str(tmp_path / "flagged"),
                     "--seeds", "2")
        assert rc == 0
        rows = list(csv.DictReader(open(tmp_path / "flagged" / "runs.csv")))
        assert len(rows) == 2

    def test_lambda_file_resolution(self, tmp_path):
        cfg = tmp_path / "exp.toml"
        cfg.write_text(
            "[experiment]\n"
            'estimators = ["snet+"]\n'
            "seeds = 1\n"
            f'out = "{tmp_path / "lam"}"\n'
            "[train]\n"
            "max_epochs = 2\n"
            "patience = 1\n"
            "lambda0 = 9.5\n"
            "[dgp]\n"
            "n = 150\n")
        assert run_cli("run", "--config", str(cfg)) == 0
        rows = list(csv.DictReader(open(tmp_path / "lam" / "runs.csv")))
        assert rows[0]["lambda0"] == "9.5"
        log_text = (tmp_path / "lam" / "runlog.txt").read_text()
        assert "config-file" in log_text


class TestReportCommand:
    def test_report_from_run_dir(self, tmp_path, capsys):
        assert run_cli("run", "--estimators", "tarnet", "--n", "150",
                       "--seeds", "1", "--max-epochs", "2", "--patience", "1",
                       "--out", str(tmp_path)) == 0
        capsys.readouterr()
        assert run_cli("report", str(tmp_path)) == 0
        out = capsys.readouterr().out
        assert "tarnet" in out and "PEHE-out" in out

    def test_report_missing_dir(self, tmp_path, capsys):
        assert run_cli("report", str(tmp_path / "void")) == 2


class TestHistCommand:
    def test_histogram_csv_written(self, tmp_path, capsys):
        rc = run_cli("hist", "--estimators", "dragonnet", "--n", "150",
                     "--seeds", "1", "--max-epochs", "2", "--patience", "1",
                     "--bins", "10", "--out", str(tmp_path))
        assert rc == 0
        path = tmp_path / "hist_dragonnet_s0.csv"
        assert path.is_file()
        rows = list(csv.DictReader(open(path)))
        assert len(rows) == 10
        assert sum(int(r["count"]) for r in rows) == 45  # test split of n=150

    def test_no_propensity_head_is_error(self, tmp_path, capsys):
        rc = run_cli("hist", "--estimators", "tarnet", "--n", "150",
                     "--seeds", "1", "--max-epochs", "2", "--patience", "1",
                     "--out", str(tmp_path))
        assert rc == 2
        assert "propensity" in capsys.readouterr().err
