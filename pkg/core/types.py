"""
Domain types shared by every part of the harness
"""
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from core.errors import InputError, InvariantViolation

TARGET = "target"
NONTARGET = "nontarget"
LABELS = (TARGET, NONTARGET)

ROLES = ("train", "validation", "eval-enroll", "eval-test")

NORM_TOLERANCE = 1e-9


def _check_token(value: str, what: str) -> None:
    if not value or any(ch.isspace() for ch in value):
        raise InputError(f"{what} must be a non-empty token without whitespace, got {value!r}")


@dataclass(frozen=True)
class SystemId:
    """Identifies one anonymisation system configuration within a run."""
    name: str
    variant: Optional[str] = None

    def __post_init__(self):
        _check_token(self.name, "system name")
        if self.variant is not None:
            _check_token(self.variant, "system variant")
        if ":" in self.name:
            raise InputError(f"system name may not contain ':', got {self.name!r}")

    def __str__(self) -> str:
        if self.variant:
            return f"{self.name}:{self.variant}"
        return self.name

    @classmethod
    def parse(cls, token: str) -> "SystemId":
        """Inverse of ``str(system_id)``: ``B3`` or ``B3:vocoder_swap``."""
        name, _, variant = token.strip().partition(":")
        return cls(name, variant or None)


class Embedding:
    """
    Fixed-dimension real vector describing one utterance's speaker characteristics.

    The underlying array is read-only so embeddings can be shared between
    workers without copying.
    """
    __slots__ = ("_values",)

    def __init__(self, values: Iterable[float]):
        array = np.array(values, dtype=np.float64).reshape(-1)
        if array.size < 2:
            raise InputError(f"embedding dimension must be >= 2, got {array.size}")
        if not np.all(np.isfinite(array)):
            raise InputError("embedding contains non-finite values")
        array.flags.writeable = False
        self._values = array

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def dim(self) -> int:
        return int(self._values.size)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self._values))

    def normalize(self) -> "Embedding":
        norm = self.norm
        if norm == 0.0:
            raise InputError("cannot normalize a zero-norm embedding")
        return Embedding(self._values / norm)

    def is_unit(self, tolerance: float = NORM_TOLERANCE) -> bool:
        return abs(self.norm - 1.0) <= tolerance

    def __len__(self) -> int:
        return self.dim

    def __eq__(self, other) -> bool:
        if not isinstance(other, Embedding):
            return NotImplemented
        return self.dim == other.dim and bool(np.array_equal(self._values, other._values))

    def __hash__(self):
        return hash(self._values.tobytes())

    def __repr__(self) -> str:
        return f"Embedding(dim={self.dim}, values={np.array2string(self._values, precision=4)})"


@dataclass(frozen=True)
class UtteranceRecord:
    """One utterance: ids, embedding and (for anonymised data) the pseudo-speaker used."""
    utterance_id: str
    speaker_id: str
    embedding: Embedding
    target_id: Optional[str] = None

    def __post_init__(self):
        _check_token(self.utterance_id, "utterance_id")
        _check_token(self.speaker_id, "speaker_id")
        if self.target_id is not None:
            _check_token(self.target_id, "target_id")


@dataclass(frozen=True)
class LabeledEmbeddingSet:
    """
    Collection of utterance records playing one role in an evaluation.

    Plays the part of attacker training data (role ``train``), its held-out
    split (``validation``) or evaluation data (``eval-enroll``/``eval-test``).
    """
    records: Tuple[UtteranceRecord, ...]
    role: str = "train"
    anonymised_by: Optional[SystemId] = None
    _index: Dict[str, int] = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        records = tuple(self.records)
        object.__setattr__(self, "records", records)
        if self.role not in ROLES:
            raise InputError(f"unknown set role {self.role!r}, expected one of {ROLES}")

        index = {}
        dims = set()
        with_target = 0
        for position, record in enumerate(records):
            if record.utterance_id in index:
                raise InputError(f"duplicate utterance_id {record.utterance_id!r}")
            index[record.utterance_id] = position
            dims.add(record.embedding.dim)
            if record.target_id is not None:
                with_target += 1
        if len(dims) > 1:
            raise InputError(f"embeddings in one set must share a dimension, found {sorted(dims)}")
        if with_target not in (0, len(records)):
            raise InputError("target_id must be present on all records of an anonymised set or on none")
        if self.anonymised_by is not None and records and with_target == 0:
            raise InputError(f"set anonymised by {self.anonymised_by} carries no target ids")
        object.__setattr__(self, "_index", index)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @property
    def dim(self) -> int:
        if not self.records:
            raise InputError("empty set has no dimension")
        return self.records[0].embedding.dim

    @property
    def is_anonymised(self) -> bool:
        return bool(self.records) and self.records[0].target_id is not None

    def get(self, utterance_id: str) -> Optional[UtteranceRecord]:
        position = self._index.get(utterance_id)
        return None if position is None else self.records[position]

    def __contains__(self, utterance_id: str) -> bool:
        return utterance_id in self._index

    def speakers(self) -> List[str]:
        """Speaker ids in order of first appearance."""
        return list(dict.fromkeys(record.speaker_id for record in self.records))

    def by_speaker(self) -> Dict[str, List[UtteranceRecord]]:
        grouped: Dict[str, List[UtteranceRecord]] = {}
        for record in self.records:
            grouped.setdefault(record.speaker_id, []).append(record)
        return grouped

    def matrix(self) -> np.ndarray:
        """Embeddings stacked row-wise, shape (n, dim)."""
        if not self.records:
            return np.zeros((0, 0))
        return np.vstack([record.embedding.values for record in self.records])

    def with_role(self, role: str) -> "LabeledEmbeddingSet":
        return LabeledEmbeddingSet(self.records, role=role, anonymised_by=self.anonymised_by)

    def subset(self, utterance_ids: Sequence[str], role: Optional[str] = None) -> "LabeledEmbeddingSet":
        wanted = set(utterance_ids)
        records = tuple(record for record in self.records if record.utterance_id in wanted)
        return LabeledEmbeddingSet(records, role=role or self.role, anonymised_by=self.anonymised_by)


@dataclass(frozen=True)
class Trial:
    """One verification trial: enrollment model vs. test utterance."""
    enrollment_id: str
    test_utterance_id: str
    label: str

    def __post_init__(self):
        _check_token(self.enrollment_id, "enrollment_id")
        _check_token(self.test_utterance_id, "test_utterance_id")
        if self.label not in LABELS:
            raise InputError(f"unknown trial label {self.label!r}")

    @property
    def is_target(self) -> bool:
        return self.label == TARGET


@dataclass(frozen=True)
class ScoreEntry:
    enrollment_id: str
    test_utterance_id: str
    label: str
    score: float

    def __post_init__(self):
        _check_token(self.enrollment_id, "enrollment_id")
        _check_token(self.test_utterance_id, "test_utterance_id")
        if self.label not in LABELS:
            raise InputError(f"unknown score label {self.label!r}")
        if not np.isfinite(self.score):
            raise InputError(
                f"non-finite score for trial ({self.enrollment_id}, {self.test_utterance_id})"
            )


@dataclass(frozen=True)
class ScoreSet:
    """Scored trials in protocol order; higher scores mean 'same speaker'."""
    entries: Tuple[ScoreEntry, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def scores(self) -> np.ndarray:
        return np.array([entry.score for entry in self.entries], dtype=np.float64)

    def labels(self) -> np.ndarray:
        """1 for target entries, 0 for nontarget entries."""
        return np.array([1 if entry.label == TARGET else 0 for entry in self.entries], dtype=np.int64)

    def target_scores(self) -> np.ndarray:
        return np.array([e.score for e in self.entries if e.label == TARGET], dtype=np.float64)

    def nontarget_scores(self) -> np.ndarray:
        return np.array([e.score for e in self.entries if e.label == NONTARGET], dtype=np.float64)


def check_orthogonal(matrix: np.ndarray, what: str, tolerance: float = 1e-9) -> None:
    """Raise InvariantViolation unless ``matrix`` has orthonormal columns."""
    gram = matrix.T @ matrix
    error = np.max(np.abs(gram - np.eye(gram.shape[0])))
    if error > tolerance:
        raise InvariantViolation(f"{what} is not orthogonal (max deviation {error:.3e})")
