"""End-to-end tests of the command line entry point."""

import json

from cli.manifest import read_manifest
from core.attention.config import EmimConfig
from core.verification.oracle import OracleCase
from main import main


class TestCheckCommand:
    """Tests for the check subcommand."""

    def test_unknown_suite(self, out_dir):
        """Test an unknown suite is a usage error."""
        assert main(["check", "--suite", "bogus", "--out", str(out_dir)]) == 2

    def test_oracle_suite(self, out_dir):
        """Test a short oracle run passes and writes its reports."""
        code = main(["check", "--suite", "oracle", "--trials", "2", "--seed", "3", "--out", str(out_dir)])
        assert code == 0
        report = json.loads((out_dir / "check.json").read_text())
        assert report["passed"] is True
        assert report["max_abs_err"] < 1e-10
        assert report["failing_seed"] is None
        assert report["suites"]["oracle"]["worst_case"]["seed"] is not None
        assert "[oracle]" in (out_dir / "check.txt").read_text()

    def test_grad_suite(self, out_dir):
        """Test the gradient suite passes at the default tolerance."""
        assert main(["check", "--suite", "grad", "--seed", "7", "--out", str(out_dir)]) == 0
        report = json.loads((out_dir / "check.json").read_text())
        assert report["passed"] is True
        assert report["max_rel_err"] < report["tolerance"]

    def test_replay(self, tmp_path, out_dir):
        """Test a serialized case can be replayed."""
        case_file = tmp_path / "case.cfg"
        case_file.write_text(OracleCase(9, EmimConfig(radius=1, heads=2), (2, 4, 4, 4)).to_text())
        assert main(["check", "--replay", str(case_file), "--out", str(out_dir)]) == 0
        report = json.loads((out_dir / "replay.json").read_text())
        assert report["failing_seed"] == 9

    def test_missing_replay_file(self, tmp_path, out_dir):
        """Test a missing replay file is a usage error."""
        assert main(["check", "--replay", str(tmp_path / "absent.cfg"), "--out", str(out_dir)]) == 2


class TestBenchCommand:
    """Tests for the bench subcommand."""

    def test_no_timings_without_repeats(self, out_dir):
        """Test --repeats 0 leaves out the timing section."""
        code = main(["bench", "--repeats", "0", "--frames", "2", "--height", "5", "--width", "5",
                     "--channels", "4", "--radius", "1", "2", "--out", str(out_dir)])
        assert code == 0
        text = (out_dir / "bench.txt").read_text()
        assert "[macs]" in text
        assert "[timings]" not in text
        report = json.loads((out_dir / "bench.json").read_text())
        assert set(report["ratios"]) == {"1", "2"}

    def test_instrumented(self, out_dir):
        """Test instrumented counts agree with the formulas."""
        code = main(["bench", "--repeats", "1", "--frames", "1", "--height", "3", "--width", "3",
                     "--channels", "2", "--radius", "1", "--instrument", "--out", str(out_dir)])
        assert code == 0
        assert "[timings]" in (out_dir / "bench.txt").read_text()

    def test_window_too_large(self, out_dir):
        """Test a window wider than the volume is a usage error."""
        code = main(["bench", "--repeats", "0", "--height", "4", "--width", "4", "--radius", "3",
                     "--out", str(out_dir)])
        assert code == 2


class TestDemoCommand:
    """Tests for the displacement demo."""

    def test_zero_shift(self, out_dir):
        """Test a still clip is recovered."""
        assert main(["demo-displacement", "--shift", "0,0", "--seeds", "2", "--out", str(out_dir)]) == 0
        report = json.loads((out_dir / "displacement.json").read_text())
        assert report["recovered"] == report["total"] == 2

    def test_shift_beyond_radius(self, out_dir):
        """Test a shift outside the window is a usage error."""
        assert main(["demo-displacement", "--shift", "3,3", "--radius", "2", "--out", str(out_dir)]) == 2

    def test_bad_shift_syntax(self, out_dir):
        """Test a malformed shift is a usage error."""
        assert main(["demo-displacement", "--shift", "up", "--out", str(out_dir)]) == 2


class TestTrainCommand:
    """Tests for toy training from the command line."""

    def test_small_run(self, out_dir):
        """Test a tiny run writes metrics and a checkpoint."""
        code = main(["train-toy", "--clips", "8", "--classes", "4", "--epochs", "1", "--depth", "1",
                     "--channels", "4", "--heads", "1", "--radius", "1", "--save-checkpoint",
                     "--out", str(out_dir)])
        assert code == 0
        report = json.loads((out_dir / "metrics.json").read_text())
        assert len(report["history"]) == 2
        assert (out_dir / "checkpoint" / "model.yaml").exists()
        manifest = read_manifest(out_dir / "manifest.txt")
        assert manifest["config.epochs"] == "1"
        assert manifest["config.fast_matmul"] == "true"

    def test_accuracy_gate(self, out_dir):
        """Test an unreachable accuracy floor fails the gate."""
        code = main(["train-toy", "--clips", "8", "--classes", "4", "--epochs", "0", "--depth", "1",
                     "--channels", "4", "--heads", "1", "--radius", "1", "--min-val-acc", "1.01",
                     "--out", str(out_dir)])
        assert code == 1


class TestManifest:
    """Tests for run manifests."""

    def test_written_on_success(self, out_dir):
        """Test a successful run records its command, seed and exit code."""
        main(["demo-displacement", "--shift", "1,0", "--seeds", "1", "--seed", "4", "--out", str(out_dir)])
        manifest = read_manifest(out_dir / "manifest.txt")
        assert manifest["command"] == "demo-displacement"
        assert manifest["seed"] == "4"
        assert manifest["exit_code"] == "0"
        assert "displacement.json" in manifest["outputs"]

    def test_written_on_usage_error(self, out_dir):
        """Test a rejected configuration still leaves a manifest."""
        main(["demo-displacement", "--shift", "3,3", "--radius", "2", "--out", str(out_dir)])
        assert read_manifest(out_dir / "manifest.txt")["exit_code"] == "2"

    def test_written_on_parse_error(self, out_dir):
        """Test a command line argparse rejects still leaves a manifest."""
        assert main(["demo-displacement", "--shift", "up", "--seed", "5", "--out", str(out_dir)]) == 2
        manifest = read_manifest(out_dir / "manifest.txt")
        assert manifest["command"] == "demo-displacement"
        assert manifest["seed"] == "5"
        assert manifest["exit_code"] == "2"
        assert manifest["config.error"] == "usage"
