"""
Tests for the attacker surrogate
"""
import os
import shutil
import tempfile
import unittest

import numpy as np
from scipy.stats import ortho_group

from core.errors import FormatError, InputError, InsufficientDataError
from core.types import Embedding, LabeledEmbeddingSet, SystemId, UtteranceRecord
from services.attacker import (
    AttackerModel,
    emit_attacker_file,
    evaluate_attack,
    parse_attacker_file,
    project,
    project_matrix,
    train_attacker,
)
from services.metrics import compute_eer
from services.protocol import build_eval_protocol, build_validation_protocol
from services.scoring import build_enrollment_models, score_protocol


def clustered_set(centroids, per_speaker, sigma, seed, role="train", prefix="s"):
    """Noisy unit-norm utterances around each row of ``centroids``."""
    rng = np.random.default_rng(seed)
    records = []
    for index, centroid in enumerate(np.atleast_2d(centroids)):
        for number in range(per_speaker):
            vector = centroid + sigma * rng.standard_normal(centroid.size)
            records.append(UtteranceRecord(f"{prefix}{index}-u{number:04d}", f"{prefix}{index}",
                                           Embedding(vector / np.linalg.norm(vector))))
    return LabeledEmbeddingSet(tuple(records), role=role)


class TestTrainAttacker(unittest.TestCase):
    """Test cases for train_attacker"""

    def test_two_speakers_along_first_axis(self):
        """Test that two speakers differing along e1 give a first row close to +e1"""
        centroids = np.zeros((2, 8))
        centroids[:, 0] = [0.6, -0.6]
        centroids[:, 1] = 0.8
        model = train_attacker(clustered_set(centroids, 2000, 0.1, seed=1), k=1)
        self.assertEqual((model.k, model.dim), (1, 8))
        self.assertGreaterEqual(model.projection[0, 0], 0.99)

    def test_rows_orthonormal_and_read_only(self):
        """Test the projection invariant"""
        rng = np.random.default_rng(2)
        centroids = rng.standard_normal((6, 12))
        model = train_attacker(clustered_set(centroids / np.linalg.norm(centroids, axis=1, keepdims=True), 20, 0.2, seed=2), k=4)
        np.testing.assert_allclose(model.projection @ model.projection.T, np.eye(4), atol=1e-9)
        self.assertFalse(model.projection.flags.writeable)

    def test_sign_convention(self):
        """Test that the first nonzero component of every row is positive"""
        rng = np.random.default_rng(3)
        model = train_attacker(clustered_set(rng.standard_normal((5, 10)), 10, 0.3, seed=3), k=3)
        for row in model.projection:
            self.assertGreater(row[np.flatnonzero(np.abs(row) > 1e-12)[0]], 0.0)

    def test_utterance_order_invariance(self):
        """Test that shuffling the training records does not change the projection"""
        rng = np.random.default_rng(4)
        data = clustered_set(rng.standard_normal((6, 10)), 12, 0.3, seed=4)
        shuffled = LabeledEmbeddingSet(tuple(data.records[i] for i in rng.permutation(len(data))))
        np.testing.assert_allclose(train_attacker(data, k=3).projection, train_attacker(shuffled, k=3).projection,
                                   atol=1e-8)

    def test_rotation_invariance(self):
        """Test that a global rotation of the data rotates the projection subspace with it"""
        rng = np.random.default_rng(5)
        data = clustered_set(rng.standard_normal((6, 10)), 12, 0.3, seed=5)
        rotation = ortho_group.rvs(dim=10, random_state=6)
        rotated = LabeledEmbeddingSet(tuple(
            UtteranceRecord(r.utterance_id, r.speaker_id, Embedding(rotation @ r.embedding.values)) for r in data
        ))
        model, rotated_model = train_attacker(data, k=3), train_attacker(rotated, k=3)

        inputs = rng.standard_normal((30, 10))
        original = project_matrix(model, inputs)
        moved = project_matrix(rotated_model, inputs @ rotation.T)
        np.testing.assert_allclose(original @ original.T, moved @ moved.T, atol=1e-8)

    def test_provenance(self):
        """Test trained_on defaults"""
        rng = np.random.default_rng(6)
        data = clustered_set(rng.standard_normal((3, 8)), 5, 0.3, seed=6)
        self.assertEqual(train_attacker(data, k=2).trained_on, SystemId("raw"))
        self.assertEqual(train_attacker(data, k=2, trained_on=SystemId("B5")).trained_on, SystemId("B5"))

    def test_errors(self):
        """Test rejected inputs"""
        rng = np.random.default_rng(7)
        data = clustered_set(rng.standard_normal((3, 8)), 5, 0.3, seed=7)
        with self.assertRaises(InsufficientDataError):
            train_attacker(clustered_set(rng.standard_normal((1, 8)), 5, 0.3, seed=7), k=1)
        with self.assertRaises(InputError):
            train_attacker(data, k=3)
        with self.assertRaises(InputError):
            train_attacker(data, k=0)
        with self.assertRaises(InputError):
            train_attacker(data, k=1, shrinkage=1.5)
        thin = LabeledEmbeddingSet(data.records + (UtteranceRecord("x-1", "x", Embedding(np.ones(8))),))
        with self.assertRaises(InsufficientDataError):
            train_attacker(thin, k=2)

    def test_singular_scatter_without_shrinkage(self):
        """Test that identical utterances with no shrinkage are rejected"""
        data = clustered_set(np.eye(8)[:3], 4, 0.0, seed=8)
        with self.assertRaises(InsufficientDataError):
            train_attacker(data, k=2, shrinkage=0.0)
        self.assertEqual(train_attacker(data, k=2, shrinkage=0.1).k, 2)


class TestProjection(unittest.TestCase):
    """Test cases for project and the model type"""

    def setUp(self):
        """Projection onto the first three axes"""
        self.model = AttackerModel(np.eye(8)[:3], SystemId("raw"))

    def test_axis_projection(self):
        """Test that e1 projects to the first unit vector of k-space"""
        result = project(self.model, Embedding(np.eye(8)[0]))
        np.testing.assert_allclose(result.values, [1.0, 0.0, 0.0])

    def test_orthogonal_input_is_error(self):
        """Test that a vector outside the row space has no projection"""
        with self.assertRaises(InputError):
            project(self.model, Embedding(np.eye(8)[5]))

    def test_dimension_mismatch(self):
        """Test that dims must agree"""
        with self.assertRaises(InputError):
            project(self.model, Embedding(np.ones(6)))

    def test_unit_norm_outputs(self):
        """Test that 1000 random projections are unit vectors"""
        rng = np.random.default_rng(9)
        projected = project_matrix(self.model, rng.standard_normal((1000, 8)))
        np.testing.assert_allclose(np.linalg.norm(projected, axis=1), 1.0, atol=1e-12)

    def test_model_validation(self):
        """Test non-orthonormal rows and k >= dim"""
        with self.assertRaises(InputError):
            AttackerModel(2 * np.eye(8)[:3], SystemId("raw"))
        with self.assertRaises(InputError):
            AttackerModel(np.eye(4), SystemId("raw"))


class TestEvaluateAttack(unittest.TestCase):
    """Test cases for evaluate_attack"""

    def setUp(self):
        """Zero-noise world with three orthogonal speakers"""
        centroids = np.eye(8)[:3]
        self.train = clustered_set(centroids, 4, 0.0, seed=0)
        self.enroll = clustered_set(centroids, 2, 0.0, seed=0, role="eval-enroll", prefix="e")
        self.test = LabeledEmbeddingSet(tuple(
            UtteranceRecord(r.utterance_id.replace("-u", "-t"), r.speaker_id, r.embedding) for r in self.enroll
        ), role="eval-test")
        self.eval_protocol = build_eval_protocol(self.enroll, self.test, nontarget_per_test=2)
        self.validation = clustered_set(centroids, 4, 0.0, seed=0, role="validation", prefix="v")
        self.val_protocol = build_validation_protocol(self.validation, n_enroll=2, nontarget_per_speaker=2)

    def test_separable_world(self):
        """Test EER 0 on both protocols"""
        model = train_attacker(self.train, k=2, trained_on=SystemId("B3"))
        point = evaluate_attack(model, self.eval_protocol, (self.enroll, self.test), self.val_protocol,
                                self.validation, eval_system=SystemId("B3"))
        self.assertEqual((point.eer_test, point.eer_val), (0.0, 0.0))
        self.assertTrue(point.is_matched)

    def test_provenance_is_carried(self):
        """Test that the system labels are reported exactly as supplied"""
        model = train_attacker(self.train, k=2, trained_on=SystemId("B3"))
        point = evaluate_attack(model, self.eval_protocol, (self.enroll, self.test), self.val_protocol,
                                self.validation, eval_system=SystemId("B4", "vocoder_swap"), category="full")
        self.assertEqual(point.eval_system, SystemId("B4", "vocoder_swap"))
        self.assertEqual(point.attacker_system, SystemId("B3"))
        self.assertEqual(point.scenario_label, "B4:vocoder_swap|B3")
        self.assertEqual(point.category, "full")
        self.assertFalse(point.is_matched)


def padded(data, dim):
    """Same records with zeros appended up to ``dim``."""
    return LabeledEmbeddingSet(tuple(
        UtteranceRecord(r.utterance_id, r.speaker_id, Embedding(np.pad(r.embedding.values, (0, dim - r.embedding.dim))))
        for r in data
    ), role=data.role)


class TestChanceLevel(unittest.TestCase):
    """Seeded checks that an attacker without usable speaker structure scores at chance"""

    SEEDS = range(20)

    def test_identical_speaker_distributions(self):
        """Test median validation EER near 50% when every speaker has the same distribution"""
        eers = []
        for seed in self.SEEDS:
            train = clustered_set(np.zeros((20, 16)), 20, 1.0, seed=seed)
            validation = clustered_set(np.zeros((30, 16)), 8, 1.0, seed=1000 + seed, role="validation", prefix="v")
            model = train_attacker(train, k=8)
            protocol = build_validation_protocol(validation, seed=seed)
            models = build_enrollment_models(protocol.enrollment_spec, validation)
            scores = score_protocol(protocol, models, validation, projector=model, enrollment_data=validation)
            eers.append(compute_eer(scores).value)
        self.assertTrue(45.0 <= np.median(eers) <= 55.0, np.median(eers))

    def test_attacker_blind_to_eval_structure(self):
        """Test median EER_test near 50% when speaker structure lies outside the attacker's subspace"""
        eers = []
        for seed in self.SEEDS:
            rng = np.random.default_rng(seed)
            train_centroids = rng.standard_normal((10, 8))
            train = padded(clustered_set(train_centroids / np.linalg.norm(train_centroids, axis=1, keepdims=True),
                                         40, 0.3, seed=seed), 16)
            validation = padded(clustered_set(train_centroids / np.linalg.norm(train_centroids, axis=1, keepdims=True),
                                              8, 0.3, seed=500 + seed, role="validation", prefix="v"), 16)
            eval_centroids = np.zeros((10, 16))
            eval_centroids[:, 8:] = rng.standard_normal((10, 8))
            eval_centroids /= np.linalg.norm(eval_centroids, axis=1, keepdims=True)
            evaluation = clustered_set(eval_centroids, 6, 0.3, seed=1000 + seed, role="eval-enroll", prefix="e")
            enroll_ids = [r.utterance_id for r in evaluation if int(r.utterance_id[-4:]) < 3]
            test_ids = [r.utterance_id for r in evaluation if int(r.utterance_id[-4:]) >= 3]
            enroll, test = evaluation.subset(enroll_ids), evaluation.subset(test_ids, role="eval-test")

            model = train_attacker(train, k=4)
            point = evaluate_attack(model, build_eval_protocol(enroll, test, seed=seed), (enroll, test),
                                    build_validation_protocol(validation, seed=seed), validation)
            eers.append(point.eer_test)
        self.assertTrue(40.0 <= np.median(eers) <= 60.0, np.median(eers))


class TestAttackerFiles(unittest.TestCase):
    """Test cases for the attacker model file"""

    def setUp(self):
        """Create a scratch directory"""
        self.tmp = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.tmp)

    def test_round_trip(self):
        """Test emit then parse"""
        rng = np.random.default_rng(10)
        model = train_attacker(clustered_set(rng.standard_normal((5, 8)), 6, 0.3, seed=10), k=3,
                               shrinkage=0.2, trained_on=SystemId("B5", "feature_swap"))
        path = os.path.join(self.tmp, "attacker.txt")
        emit_attacker_file(model, path)
        with open(path, encoding="utf-8") as handle:
            header = handle.read().splitlines()[:4]
        self.assertEqual(header[0], "k\t3")
        self.assertEqual(header[3], "trained_on\tB5:feature_swap")

        parsed = parse_attacker_file(path)
        np.testing.assert_allclose(parsed.projection, model.projection, atol=1e-11)
        self.assertEqual(parsed.trained_on, model.trained_on)
        self.assertAlmostEqual(parsed.shrinkage, 0.2)

    def test_bad_header_names_line(self):
        """Test that a misspelled header key is reported with its line"""
        path = os.path.join(self.tmp, "bad.txt")
        with open(path, "w", encoding="utf-8") as handle:
            handle.write("k\t1\ndim\t2\nlam\t0.1\ntrained_on\traw\n1.0 0.0\n")
        with self.assertRaises(FormatError) as context:
            parse_attacker_file(path)
        self.assertEqual(context.exception.line_number, 3)

    def test_short_row(self):
        """Test that a row with the wrong width is rejected"""
        path = os.path.join(self.tmp, "short.txt")
        with open(path, "w", encoding="utf-8") as handle:
            handle.write("k\t1\ndim\t3\nlambda\t0.1\ntrained_on\traw\n1.0 0.0\n")
        with self.assertRaises(FormatError) as context:
            parse_attacker_file(path)
        self.assertEqual(context.exception.line_number, 5)


if __name__ == "__main__":
    unittest.main()
