import csv
import json

import numpy as np
import pytest

from nakmap.cli import main
from nakmap.config import (
    ExperimentConfig,
    load_config,
    parse_estimator_token,
)
from nakmap.errors import ConfigError

BASE_CONFIG = """\
[phantom]
source = builtin:strokes
count = 2
size = 32
seed = 11

[simulate]
omega = 1.0
seed = 7

[estimate]
estimators = moment:9 score
score_source = analytic
omega_mode = global
filter = median:7

[output]
dir = {out}
"""


def write_config(tmp_path, text=None, **fmt):
    path = tmp_path / "exp.ini"
    out = fmt.pop("out", tmp_path / "out")
    path.write_text((text or BASE_CONFIG).format(out=out, **fmt))
    return path


class TestConfigParsing:
    def test_estimator_tokens(self):
        assert parse_estimator_token("moment:9").name == "moment-9"
        assert parse_estimator_token("mle_taylor:11").name == "mle_taylor-11"
        assert parse_estimator_token("wmc:9+11+13").name == "wmc-9-11-13"
        assert parse_estimator_token("score").name == "score"

    def test_bad_tokens(self):
        for token in ("moment", "wmc:9", "magic:3"):
            with pytest.raises(ConfigError):
                parse_estimator_token(token)

    def test_load_round_trip(self, tmp_path):
        cfg = load_config(write_config(tmp_path))
        assert cfg.phantom_count == 2
        assert cfg.phantom_size == 32
        assert [e.name for e in cfg.estimators] == ["moment-9", "score"]

    def test_defaults(self):
        cfg = ExperimentConfig()
        assert cfg.omega_mode == "global"
        assert cfg.filter_spec == "median:7"

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "nope.ini")

    def test_two_score_estimators_rejected(self, tmp_path):
        text = BASE_CONFIG.replace("moment:9 score", "score score")
        with pytest.raises(ConfigError):
            load_config(write_config(tmp_path, text))

    def test_bad_filter(self, tmp_path):
        text = BASE_CONFIG.replace("median:7", "gaussian:7")
        with pytest.raises(ConfigError):
            load_config(write_config(tmp_path, text))


class TestExitCodes:
    def test_missing_config_is_2(self, tmp_path, capsys):
        assert main(["simulate", "--config", str(tmp_path / "no.ini")]) == 2
        assert "config error" in capsys.readouterr().err

    def test_malformed_config_is_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.ini"
        bad.write_text("[estimate]\nestimators = magic:3\n")
        assert main(["estimate", "--config", str(bad)]) == 2

    def test_estimate_without_data_is_3(self, tmp_path, capsys):
        cfg = write_config(tmp_path)
        assert main(["estimate", "--config", str(cfg)]) == 3
        assert "data error" in capsys.readouterr().err

    def test_success_is_0(self, tmp_path, capsys):
        cfg = write_config(tmp_path)
        assert main(["simulate", "--config", str(cfg)]) == 0
        listed = capsys.readouterr().out.splitlines()
        assert any("env_000.fmap" in line for line in listed)


class TestPipelineStages:
    def run_all(self, tmp_path, capsys):
        cfg = write_config(tmp_path)
        for cmd in ("simulate", "estimate", "evaluate", "compare"):
            assert main([cmd, "--config", str(cfg)]) == 0, cmd
        capsys.readouterr()
        return tmp_path / "out"

    def test_produces_expected_files(self, tmp_path, capsys):
        out = self.run_all(tmp_path, capsys)
        for name in ("gt_000.fmap", "env_001.fmap", "map_moment-9_000.fmap",
                     "map_score_001.fmap", "metrics.csv", "table.txt",
                     "comparison.csv", "manifest_simulate.json",
                     "manifest_evaluate.json", "timings.log"):
            assert (out / name).exists(), name

    def test_analytic_score_beats_moment(self, tmp_path, capsys):
        out = self.run_all(tmp_path, capsys)
        with open(out / "metrics.csv", newline="") as fh:
            rows = {r["method"]: float(r["psnr_db"]) for r in csv.DictReader(fh)}
        # the oracle-score pixel estimator should dominate the windowed one
        assert rows["score"] > rows["moment-9"]

    def test_compare_ranks_by_psnr(self, tmp_path, capsys):
        out = self.run_all(tmp_path, capsys)
        with open(out / "comparison.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        psnrs = [float(r["psnr_db"]) for r in rows]
        assert psnrs == sorted(psnrs, reverse=True)
        assert rows[0]["rank"] == "1"

    def test_manifest_structure(self, tmp_path, capsys):
        out = self.run_all(tmp_path, capsys)
        manifest = json.loads((out / "manifest_simulate.json").read_text())
        assert manifest["stage"] == "simulate"
        assert "env_000.fmap" in manifest["checksums"]
        checksum = manifest["checksums"]["env_000.fmap"]
        assert len(checksum) == 64 and int(checksum, 16) >= 0


class TestReproducibility:
    def test_identical_runs_byte_identical(self, tmp_path, capsys):
        cfg = write_config(tmp_path)
        outs = []
        for sub in ("run_a", "run_b"):
            out = tmp_path / sub
            for cmd in ("simulate", "estimate", "evaluate"):
                assert main([cmd, "--config", str(cfg), "--output", str(out)]) == 0
            outs.append(out)
        capsys.readouterr()
        a, b = outs
        names = sorted(p.name for p in a.iterdir() if p.name != "timings.log")
        assert names == sorted(p.name for p in b.iterdir() if p.name != "timings.log")
        for name in names:
            assert (a / name).read_bytes() == (b / name).read_bytes(), name

    def test_seed_override_changes_data(self, tmp_path, capsys):
        cfg = write_config(tmp_path)
        assert main(["simulate", "--config", str(cfg)]) == 0
        first = (tmp_path / "out" / "env_000.fmap").read_bytes()
        assert main(["simulate", "--config", str(cfg), "--seed", "99"]) == 0
        second = (tmp_path / "out" / "env_000.fmap").read_bytes()
        capsys.readouterr()
        assert first != second


class TestCohortOutputs:
    def test_cohort_files(self, tmp_path, capsys):
        labels = tmp_path / "labels.csv"
        rng = np.random.default_rng(0)
        with open(labels, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["subject", "feature", "reference"])
            for i in range(12):
                writer.writerow([f"n{i}", f"{rng.normal(0.7, 0.05):.4f}", "2"])
            for i in range(12):
                writer.writerow([f"m{i}", f"{rng.normal(1.0, 0.05):.4f}", "8"])
            for i in range(12):
                writer.writerow([f"s{i}", f"{rng.normal(1.4, 0.05):.4f}", "22"])
        text = BASE_CONFIG + f"\n[evaluate]\nlabels = {labels}\n"
        cfg = write_config(tmp_path, text)
        for cmd in ("simulate", "estimate", "evaluate"):
            assert main([cmd, "--config", str(cfg)]) == 0
        capsys.readouterr()
        out = tmp_path / "out"
        for name in ("cohort_roc.csv", "cohort_box.csv", "cohort_summary.txt"):
            assert (out / name).exists()
        with open(out / "cohort_roc.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        by_cmp = {r["comparison"] for r in rows}
        assert by_cmp == {"normal-vs-mild", "mild-vs-severe", "normal-vs-severe"}
        ns = [r for r in rows if r["comparison"] == "normal-vs-severe"]
        assert all(float(r["auroc"]) > 0.95 for r in ns)
        summary = (out / "cohort_summary.txt").read_text()
        assert "normal-vs-severe" in summary
