"""Tests for the shrinklab command line."""

import json

import pytest

from shrinklab.cli import build_parser, main

APPROX = {"kind": "approx", "params": {"alpha": ["golden"], "q_max": 200}}


class TestParser:
    def test_run_options(self):
        args = build_parser().parse_args(["--quiet", "run", "c.json", "--seed", "5",
                                          "--out", "r"])
        assert args.command == "run"
        assert args.seed == 5
        assert args.out == "r"
        assert args.quiet

    def test_quiet_and_verbose_exclusive(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args(["--quiet", "--verbose", "validate", "c.json"])

    def test_command_required(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args([])


class TestValidate:
    def test_ok(self, write_config, capsys):
        path = write_config(APPROX)
        assert main(["validate", str(path)]) == 0
        assert capsys.readouterr().out.strip() == f"{path}: ok"

    def test_violations_go_to_stderr(self, write_config, capsys):
        path = write_config({"kind": "lemma-campaign", "params": {"instances": 3}})
        assert main(["validate", str(path)]) == 1
        assert "seed: required for stochastic kind lemma-campaign" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert main(["validate", str(tmp_path / "absent.json")]) == 1

    def test_unknown_field(self, write_config):
        assert main(["validate", str(write_config({**APPROX, "colour": "red"}))]) == 1


class TestRun:
    def test_writes_reports_and_manifest(self, write_config, tmp_path, capsys):
        out = tmp_path / "out"
        assert main(["--quiet", "run", str(write_config(APPROX)), "--out", str(out)]) == 0
        printed = capsys.readouterr().out
        assert printed.startswith("manifest: ")
        manifest = json.loads(next(out.glob("manifest-*.json")).read_text())
        assert len(manifest["files"]) == 3
        for name in manifest["files"]:
            assert (out / name).exists()

    def test_identical_runs_identical_csv(self, write_config, tmp_path):
        path = write_config(APPROX)
        main(["--quiet", "run", str(path), "--out", str(tmp_path / "a")])
        main(["--quiet", "run", str(path), "--out", str(tmp_path / "b")])
        a = sorted((tmp_path / "a").glob("*.csv"))
        b = sorted((tmp_path / "b").glob("*.csv"))
        assert [p.name for p in a] == [p.name for p in b]
        assert all(x.read_bytes() == y.read_bytes() for x, y in zip(a, b))

    def test_seed_override_satisfies_validation(self, write_config, tmp_path):
        config = {"kind": "lemma-campaign",
                  "params": {"instances": 2, "dimensions": [1], "q_values": [4]}}
        path = write_config(config)
        assert main(["--quiet", "run", str(path), "--out", str(tmp_path / "o")]) == 1
        assert main(["--quiet", "run", str(path), "--seed", "3",
                     "--out", str(tmp_path / "o")]) == 0

    def test_budget_exit_code(self, write_config, tmp_path):
        config = {"kind": "approx", "params": {"alpha": ["sqrt2", "sqrt3"], "q_max": 2**20}}
        path = write_config(config)
        assert main(["--quiet", "run", str(path), "--out", str(tmp_path / "o")]) == 3
