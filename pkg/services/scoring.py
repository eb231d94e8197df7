"""
Enrollment models and the cosine scoring backend
"""
import logging
from dataclasses import dataclass
from typing import Dict, Mapping, Optional, Sequence

import numpy as np

from core.errors import InputError, InvariantViolation, ProtocolError
from core.types import Embedding, LabeledEmbeddingSet, ScoreEntry, ScoreSet, UtteranceRecord

logger = logging.getLogger("privacy_harness.scoring")


@dataclass(frozen=True)
class EnrollmentModel:
    """Unit-norm centroid of one original speaker's enrollment utterances."""
    enrollment_id: str
    source_speaker_id: str
    centroid: Embedding

    def __post_init__(self):
        if not self.centroid.is_unit():
            raise InvariantViolation(f"enrollment centroid {self.enrollment_id!r} is not unit norm")


def _mean_direction(vectors: np.ndarray, what: str) -> Embedding:
    mean = vectors.mean(axis=0)
    norm = np.linalg.norm(mean)
    if norm < 1e-12:
        raise InputError(f"{what}: mean embedding has zero norm")
    return Embedding(mean / norm)


def build_enrollment_model(utterances: Sequence[UtteranceRecord], enrollment_id: str) -> EnrollmentModel:
    """
    Average the embeddings of one speaker's utterances and normalize.

    Raises:
        InputError: If the input is empty, mixes speakers or dimensions, or
            the mean vector vanishes
    """
    if not utterances:
        raise InputError(f"enrollment {enrollment_id!r} has no utterances")
    speakers = {record.speaker_id for record in utterances}
    if len(speakers) != 1:
        raise InputError(f"enrollment {enrollment_id!r} mixes speakers {sorted(speakers)}")
    dims = {record.embedding.dim for record in utterances}
    if len(dims) != 1:
        raise InputError(f"enrollment {enrollment_id!r} mixes dimensions {sorted(dims)}")

    vectors = np.vstack([record.embedding.values for record in utterances])
    centroid = _mean_direction(vectors, f"enrollment {enrollment_id!r}")
    return EnrollmentModel(enrollment_id, utterances[0].speaker_id, centroid)


def cosine_score(a: Embedding, b: Embedding) -> float:
    """Cosine similarity in [-1, 1]."""
    if a.dim != b.dim:
        raise InputError(f"cannot score embeddings of dimension {a.dim} and {b.dim}")
    norm_a, norm_b = a.norm, b.norm
    if norm_a == 0.0 or norm_b == 0.0:
        raise InputError("cannot score a zero vector")
    value = float(np.dot(a.values, b.values) / (norm_a * norm_b))
    return min(1.0, max(-1.0, value))


def build_enrollment_models(enrollment_spec: Mapping[str, tuple], data: LabeledEmbeddingSet) -> Dict[str, EnrollmentModel]:
    """Build one model per ``enrollment_id -> (speaker_id, utterance_ids)`` entry."""
    models = {}
    for enrollment_id, (speaker_id, utterance_ids) in enrollment_spec.items():
        records = []
        for utterance_id in utterance_ids:
            record = data.get(utterance_id)
            if record is None:
                raise ProtocolError(f"enrollment {enrollment_id!r} references unknown utterance {utterance_id!r}")
            records.append(record)
        model = build_enrollment_model(records, enrollment_id)
        if model.source_speaker_id != speaker_id:
            raise ProtocolError(
                f"enrollment {enrollment_id!r} declared for speaker {speaker_id!r} "
                f"but built from {model.source_speaker_id!r}"
            )
        models[enrollment_id] = model
    return models


def score_protocol(protocol, enrollments: Mapping[str, EnrollmentModel], tests: LabeledEmbeddingSet,
                   projector=None, enrollment_data: Optional[LabeledEmbeddingSet] = None) -> ScoreSet:
    """
    Score every trial of ``protocol`` with the cosine backend.

    Args:
        protocol: TrialProtocol whose trials are scored in order
        enrollments: Enrollment models by id
        tests: Set holding the test utterances
        projector: Optional AttackerModel; when given, enrollment utterances
            are projected first and then re-averaged and re-normalized
        enrollment_data: Set holding the enrollment utterances, required to
            re-average in projected space (defaults to ``tests``)

    Raises:
        ProtocolError: On a trial referencing a missing model or test utterance
    """
    from services.attacker import project_matrix

    for trial in protocol.trials:
        if trial.enrollment_id not in enrollments:
            raise ProtocolError(f"trial ({trial.enrollment_id}, {trial.test_utterance_id}) references unknown enrollment")
        if trial.test_utterance_id not in tests:
            raise ProtocolError(f"trial ({trial.enrollment_id}, {trial.test_utterance_id}) references unknown test utterance")

    if projector is None:
        centroids = {eid: model.centroid.values for eid, model in enrollments.items()}
    else:
        source = enrollment_data if enrollment_data is not None else tests
        centroids = {}
        for enrollment_id, model in enrollments.items():
            _, utterance_ids = protocol.enrollment_spec.get(enrollment_id, (model.source_speaker_id, None))
            if utterance_ids is None:
                raise ProtocolError(f"enrollment {enrollment_id!r} has no utterance list to project")
            missing = [u for u in utterance_ids if u not in source]
            if missing:
                raise ProtocolError(f"enrollment {enrollment_id!r} references unknown utterance {missing[0]!r}")
            projected = project_matrix(projector, np.vstack([source.get(u).embedding.values for u in utterance_ids]))
            centroids[enrollment_id] = _mean_direction(projected, f"enrollment {enrollment_id!r}").values

    test_ids = list(dict.fromkeys(trial.test_utterance_id for trial in protocol.trials))
    test_matrix = np.vstack([tests.get(u).embedding.values for u in test_ids]) if test_ids else np.zeros((0, 0))
    if projector is not None and test_ids:
        test_matrix = project_matrix(projector, test_matrix)
    if test_ids:
        norms = np.linalg.norm(test_matrix, axis=1, keepdims=True)
        if np.any(norms == 0.0):
            zero = test_ids[int(np.argmin(norms[:, 0]))]
            raise InputError(f"test utterance {zero!r} has a zero embedding")
        test_matrix = test_matrix / norms
    test_rows = {utterance_id: row for row, utterance_id in enumerate(test_ids)}

    entries = []
    for trial in protocol.trials:
        centroid = centroids[trial.enrollment_id]
        score = float(np.dot(centroid, test_matrix[test_rows[trial.test_utterance_id]]) / np.linalg.norm(centroid))
        entries.append(ScoreEntry(trial.enrollment_id, trial.test_utterance_id, trial.label, min(1.0, max(-1.0, score))))
    logger.debug(f"Scored {len(entries)} trials ({'projected' if projector is not None else 'raw'})")
    return ScoreSet(tuple(entries))


def score_raw(protocol, enrollment_data: LabeledEmbeddingSet, tests: LabeledEmbeddingSet) -> ScoreSet:
    """Build the protocol's enrollment models from ``enrollment_data`` and score without projection."""
    models = build_enrollment_models(protocol.enrollment_spec, enrollment_data)
    return score_protocol(protocol, models, tests)
