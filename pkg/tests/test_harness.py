"""
Tests for the command-line harness
"""
import argparse
import io
import os
import re
import shutil
import tempfile
import unittest
from unittest.mock import patch

from core.errors import InputError, InvariantViolation
from harness import PrivacyHarness
from main import main

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")
CONFIGS = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "configs")
QUIET_ENV = {"LOG_LEVEL": "ERROR", "LOG_DIR": "", "HARNESS_SEED": "0", "HARNESS_WORKERS": "1"}


class TestPrivacyHarness(unittest.TestCase):
    """Test cases for PrivacyHarness"""

    @patch('config.load_dotenv')
    @patch.dict(os.environ, QUIET_ENV)
    def setUp(self, mock_load_dotenv):
        """Create a harness without a log file"""
        self.harness = PrivacyHarness()
        self.tmp = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.tmp)

    def run_command(self, *argv):
        with patch('sys.stdout', new_callable=io.StringIO) as stdout:
            code = self.harness.run(list(argv))
        return code, stdout.getvalue()

    def test_commands_registered(self):
        """Test that every command group is available"""
        choices = next(action for action in self.harness.parser._actions
                       if isinstance(action, argparse._SubParsersAction)).choices
        for command in ("simulate", "protocol", "train-attacker", "score", "eer", "detect", "report", "run-suite"):
            self.assertIn(command, choices)

    def test_eer_of_external_scores(self):
        """Test the eer command on an externally produced score file"""
        code, output = self.run_command("eer", "--scores", os.path.join(FIXTURES, "external_scores.txt"))
        self.assertEqual(code, 0)
        self.assertEqual(output.strip(), "EER=20.00%")

    def test_usage_and_input_errors(self):
        """Test that usage errors and bad input exit with 1"""
        self.assertEqual(self.run_command()[0], 1)
        self.assertEqual(self.run_command("no-such-command")[0], 1)
        self.assertEqual(self.run_command("eer", "--scores", os.path.join(self.tmp, "missing"))[0], 1)
        self.assertEqual(self.run_command("protocol", "--mode", "eval", "--embeddings", "e", "--out", "t")[0], 1)

    def test_error_mapping(self):
        """Test the exit code chosen for each error type"""
        self.assertEqual(self.harness.on_command_error(InputError("bad")), 1)
        self.assertEqual(self.harness.on_command_error(OSError("disk")), 1)
        self.assertEqual(self.harness.on_command_error(InvariantViolation("bug")), 2)
        self.assertEqual(self.harness.on_command_error(RuntimeError("boom")), 2)

    def test_detect_published_points(self):
        """Test detect on hand-typed points"""
        matched = os.path.join(self.tmp, "matched.csv")
        candidates = os.path.join(self.tmp, "candidates.csv")
        with open(matched, "w", encoding="utf-8") as handle:
            handle.write("scenario_label,eval_system,attacker_system,eer_test,eer_val\n"
                         "\"(B3,B3)\",B3,B3,27,11\n\"(B4,B4)\",B4,B4,30,12\n")
        with open(candidates, "w", encoding="utf-8") as handle:
            handle.write("scenario_label,eval_system,attacker_system,eer_test,eer_val\n\"(B3,B4)\",B3,B4,44,10\n")
        code, output = self.run_command("detect", "--matched", matched, "--candidates", candidates,
                                        "--out-csv", os.path.join(self.tmp, "v.csv"),
                                        "--out-svg", os.path.join(self.tmp, "s.svg"))
        self.assertEqual(code, 0)
        self.assertIn("(B3,B4)", output)
        self.assertIn("FLAGGED", output)
        self.assertTrue(os.path.isfile(os.path.join(self.tmp, "s.svg")))

    def test_report_without_line(self):
        """Test report on points with a single matched evaluation"""
        points = os.path.join(self.tmp, "points.csv")
        with open(points, "w", encoding="utf-8") as handle:
            handle.write("scenario_label,eval_system,attacker_system,eer_test,eer_val\na,B3,B3,27,11\nb,B3,B4,44,10\n")
        code, output = self.run_command("report", "--points", points, "--out-dir", os.path.join(self.tmp, "out"))
        self.assertEqual(code, 0)
        self.assertIn("no reference line", output)

    def test_pipeline(self):
        """Test simulate, protocol, train-attacker, score and eer chained through files"""
        data = os.path.join(self.tmp, "data")

        def path(name):
            return os.path.join(self.tmp, name)

        code, output = self.run_command("simulate", "--out-dir", data, "--system", "B3", "--seed", "1")
        self.assertEqual(code, 0)
        self.assertEqual(len(output.splitlines()), 6)

        code, output = self.run_command(
            "protocol", "--mode", "val", "--embeddings", os.path.join(data, "anon_train.emb"),
            "--out-train", path("split_train.emb"), "--out", path("val_trials"))
        self.assertEqual(code, 0)
        self.assertTrue(output.startswith("enrollments=40 "))
        self.assertTrue(os.path.isfile(path("val_trials.enroll")))

        code, output = self.run_command("train-attacker", "--train", path("split_train.emb"),
                                        "--out", path("attacker.txt"), "--trained-on", "B3")
        self.assertEqual(code, 0)
        self.assertEqual(output.strip(), "k=8 dim=32 trained_on=B3")

        code, _ = self.run_command(
            "protocol", "--mode", "eval", "--embeddings", os.path.join(data, "anon_enroll.emb"),
            "--test", os.path.join(data, "anon_test.emb"), "--out", path("trials"))
        self.assertEqual(code, 0)

        code, _ = self.run_command(
            "score", "--protocol", path("trials"), "--enroll", os.path.join(data, "anon_enroll.emb"),
            "--test", os.path.join(data, "anon_test.emb"), "--attacker", path("attacker.txt"), "--out", path("scores"))
        self.assertEqual(code, 0)

        code, output = self.run_command("eer", "--scores", path("scores"))
        self.assertEqual(code, 0)
        self.assertRegex(output.strip(), re.compile(r"^EER=\d{1,3}\.\d{2}%$"))

        os.remove(path("trials.enroll"))
        code, _ = self.run_command(
            "score", "--protocol", path("trials"), "--enroll", os.path.join(data, "anon_enroll.emb"),
            "--test", os.path.join(data, "anon_test.emb"), "--attacker", path("attacker.txt"), "--out", path("scores_by_speaker"))
        self.assertEqual(code, 0)
        with open(path("scores"), encoding="utf-8") as first, open(path("scores_by_speaker"), encoding="utf-8") as second:
            self.assertEqual(first.read(), second.read())

    def test_simulate_every_configured_system(self):
        """Test that simulate with a config and no --system writes anonymised sets for each system"""
        data = os.path.join(self.tmp, "data")
        code, output = self.run_command("simulate", "--out-dir", data, "--config",
                                        os.path.join(CONFIGS, "smoke_suite.env"))
        self.assertEqual(code, 0)
        self.assertEqual(len(output.splitlines()), 3 + 4 * 3)
        for system in ("B3", "B4", "B5", "B3-SL"):
            for role in ("train", "enroll", "test"):
                self.assertTrue(os.path.isfile(os.path.join(data, f"anon_{system}_{role}.emb")))


class TestMain(unittest.TestCase):
    """Test cases for the entry point"""

    @patch('config.load_dotenv')
    @patch.dict(os.environ, {"LOG_LEVEL": "LOUD", "LOG_DIR": ""})
    def test_configuration_error(self, mock_load_dotenv):
        """Test that a bad environment exits with 1 before any command runs"""
        with patch('sys.stderr', new_callable=io.StringIO) as stderr:
            self.assertEqual(main(["eer", "--scores", "x"]), 1)
        self.assertIn("[ERROR] [LOG_LEVEL]", stderr.getvalue())


if __name__ == "__main__":
    unittest.main()
