"""
Tests for the text file formats
"""
import os
import shutil
import tempfile
import unittest

import numpy as np

from core.errors import FormatError, InputError, InsufficientDataError
from core.formats import (
    emit_embedding_file,
    emit_enrollment_file,
    emit_score_file,
    emit_trial_file,
    parse_embedding_file,
    parse_enrollment_file,
    parse_number,
    parse_score_file,
    parse_trial_file,
)
from core.types import NONTARGET, TARGET, Embedding, LabeledEmbeddingSet, ScoreEntry, ScoreSet, SystemId, Trial, UtteranceRecord
from services.metrics import compute_eer

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")


class TestEmbeddingFiles(unittest.TestCase):
    """Test cases for embedding file parsing and emission"""

    def setUp(self):
        """Create a scratch directory"""
        self.tmp = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.tmp)

    def write(self, name, text):
        path = os.path.join(self.tmp, name)
        with open(path, "w", encoding="utf-8") as handle:
            handle.write(text)
        return path

    def test_minimal_file(self):
        """Test a one-row file without target ids"""
        path = self.write("one.emb", "#dim 2\nu1\ts1\t-\t1.0 0.0\n")
        data = parse_embedding_file(path)
        self.assertEqual(len(data), 1)
        self.assertEqual(data.dim, 2)
        self.assertIsNone(data.records[0].target_id)
        self.assertFalse(data.is_anonymised)
        self.assertIsNone(data.anonymised_by)

    def test_row_with_wrong_dimension_names_line(self):
        """Test that a row with 3 values under '#dim 2' is reported at line 3"""
        path = self.write("bad.emb", "#dim 2\nu1\ts1\t-\t1.0 0.0\nu2\ts1\t-\t1.0 0.0 0.5\n")
        with self.assertRaises(FormatError) as context:
            parse_embedding_file(path)
        self.assertIn("line 3", str(context.exception))
        self.assertEqual(context.exception.line_number, 3)

    def test_duplicate_utterance_is_error(self):
        """Test duplicate utterance ids"""
        path = self.write("dup.emb", "#dim 2\nu1\ts1\t-\t1 0\nu1\ts2\t-\t0 1\n")
        with self.assertRaises(FormatError) as context:
            parse_embedding_file(path)
        self.assertIn("line 3", str(context.exception))

    def test_non_finite_value_is_error(self):
        """Test that nan and inf are rejected"""
        for token in ("nan", "inf", "1,5"):
            path = self.write("nan.emb", f"#dim 2\nu1\ts1\t-\t{token} 0.0\n")
            with self.assertRaises(FormatError):
                parse_embedding_file(path)

    def test_missing_header(self):
        """Test that the '#dim d' header is required"""
        path = self.write("nohead.emb", "u1\ts1\t-\t1.0 0.0\n")
        with self.assertRaises(FormatError) as context:
            parse_embedding_file(path)
        self.assertIn("line 1", str(context.exception))

    def test_mixed_target_ids_rejected(self):
        """Test that target ids must be present on every row or none"""
        path = self.write("mixed.emb", "#dim 2\nu1\ts1\tp1\t1 0\nu2\ts1\t-\t0 1\n")
        with self.assertRaises(FormatError):
            parse_embedding_file(path)

    def test_target_ids_mark_set_anonymised(self):
        """Test that target ids produce an anonymised set"""
        path = self.write("anon.emb", "#dim 2\nu1\ts1\tp1\t1 0\nu2\ts1\tp2\t0 1\n")
        data = parse_embedding_file(path, anonymised_by=SystemId("B3"))
        self.assertTrue(data.is_anonymised)
        self.assertEqual(data.anonymised_by, SystemId("B3"))
        self.assertEqual(data.records[1].target_id, "p2")

    def test_round_trip(self):
        """Test emit then parse of a 50-record set"""
        rng = np.random.default_rng(4)
        vectors = rng.standard_normal((50, 16))
        vectors /= np.linalg.norm(vectors, axis=1, keepdims=True)
        records = tuple(
            UtteranceRecord(f"u{i:02d}", f"s{i % 5}", Embedding(vectors[i]), f"p{i % 7}")
            for i in range(50)
        )
        original = LabeledEmbeddingSet(records, role="eval-test", anonymised_by=SystemId("B4"))
        path = os.path.join(self.tmp, "round.emb")
        emit_embedding_file(original, path)

        parsed = parse_embedding_file(path, role="eval-test", anonymised_by=SystemId("B4"))
        self.assertEqual(len(parsed), 50)
        for before, after in zip(original.records, parsed.records):
            self.assertEqual(before.utterance_id, after.utterance_id)
            self.assertEqual(before.speaker_id, after.speaker_id)
            self.assertEqual(before.target_id, after.target_id)
            np.testing.assert_allclose(before.embedding.values, after.embedding.values, atol=1e-9)

    def test_unreadable_path(self):
        """Test that a missing file is an input error"""
        with self.assertRaises(InputError):
            parse_embedding_file(os.path.join(self.tmp, "missing.emb"))


class TestScoreAndTrialFiles(unittest.TestCase):
    """Test cases for score, trial and enrollment list files"""

    def setUp(self):
        """Create a scratch directory"""
        self.tmp = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.tmp)

    def test_score_line_format(self):
        """Test that a score is printed with 6 decimals after the label"""
        path = os.path.join(self.tmp, "one.scores")
        emit_score_file(ScoreSet((ScoreEntry("e1", "u1", TARGET, 0.5),)), path)
        with open(path, encoding="utf-8") as handle:
            lines = handle.read().splitlines()
        self.assertEqual(len(lines), 1)
        self.assertTrue(lines[0].endswith("target\t0.500000"))
        self.assertEqual(lines[0], "e1\tu1\ttarget\t0.500000")

    def test_empty_score_set(self):
        """Test that an empty set emits an empty file and fails later at EER time"""
        path = os.path.join(self.tmp, "empty.scores")
        emit_score_file(ScoreSet(()), path)
        self.assertEqual(os.path.getsize(path), 0)
        with self.assertRaises(InsufficientDataError):
            compute_eer(parse_score_file(path))

    def test_score_round_trip(self):
        """Test emit then parse of scores with 6 decimals"""
        scores = ScoreSet((
            ScoreEntry("e1", "u1", TARGET, 0.123456),
            ScoreEntry("e1", "u2", NONTARGET, -0.5),
            ScoreEntry("e2", "u3", NONTARGET, 1.0),
        ))
        path = os.path.join(self.tmp, "round.scores")
        emit_score_file(scores, path)
        self.assertEqual(parse_score_file(path), scores)

    def test_unknown_label_names_line(self):
        """Test that the label 'tgt' is rejected with its line"""
        path = os.path.join(self.tmp, "bad.scores")
        with open(path, "w", encoding="utf-8") as handle:
            handle.write("e1\tu1\ttarget\t0.1\ne1\tu2\tnontarget\t0.2\ne1\tu3\ttgt\t0.3\n")
        with self.assertRaises(FormatError) as context:
            parse_score_file(path)
        self.assertIn("line 3", str(context.exception))

    def test_overflowing_score_names_line(self):
        """Test that a score overflowing to inf is a FormatError naming its line"""
        path = os.path.join(self.tmp, "overflow.scores")
        with open(path, "w", encoding="utf-8") as handle:
            handle.write("e1\tu1\ttarget\t0.1\ne1\tu2\tnontarget\t1e999\n")
        with self.assertRaises(FormatError) as context:
            parse_score_file(path)
        self.assertEqual(context.exception.line_number, 2)

    def test_bad_score_ids_name_line(self):
        """Test that empty or whitespace ids in a score file are FormatErrors with the line"""
        for bad_line in ("\tu1\ttarget\t0.1\n", "e 1\tu1\ttarget\t0.1\n", "e1\t\tnontarget\t0.1\n"):
            path = os.path.join(self.tmp, "ids.scores")
            with open(path, "w", encoding="utf-8") as handle:
                handle.write("e1\tu0\ttarget\t0.3\n" + bad_line)
            with self.assertRaises(FormatError) as context:
                parse_score_file(path)
            self.assertEqual(context.exception.line_number, 2)

    def test_external_fixture(self):
        """Test that the externally produced score file parses and yields a finite EER"""
        scores = parse_score_file(os.path.join(FIXTURES, "external_scores.txt"))
        self.assertEqual(len(scores), 20)
        eer = compute_eer(scores)
        self.assertTrue(np.isfinite(eer.value))
        self.assertAlmostEqual(eer.value, 20.0, places=6)

    def test_trial_and_enrollment_round_trip(self):
        """Test trial lists and enrollment lists"""
        trials = [Trial("s1", "u3", TARGET), Trial("s1", "u9", NONTARGET)]
        spec = {"s1": ("s1", ["u1", "u2"]), "s2": ("s2", ["u7"])}
        trial_path = os.path.join(self.tmp, "trials")
        enroll_path = os.path.join(self.tmp, "enroll")
        emit_trial_file(trials, trial_path)
        emit_enrollment_file(spec, enroll_path)
        self.assertEqual(parse_trial_file(trial_path), trials)
        self.assertEqual(parse_enrollment_file(enroll_path), spec)

    def test_parse_number_is_locale_free(self):
        """Test accepted and rejected number forms"""
        self.assertEqual(parse_number("-1.5e-3"), -0.0015)
        self.assertEqual(parse_number(".5"), 0.5)
        for token in ("1,000", "1 000", "0x10", "NaN", "+inf", "", "1e999", "-2e400"):
            with self.assertRaises(FormatError):
                parse_number(token)


if __name__ == "__main__":
    unittest.main()
