"""
Train/validation splitting and trial protocol generation
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np

from core.errors import InputError, ProtocolError
from core.types import NONTARGET, TARGET, LabeledEmbeddingSet, Trial
from utils.constants import DEFAULT_NONTARGETS_PER_SPEAKER, DEFAULT_NONTARGETS_PER_TEST, DEFAULT_VALIDATION_ENROLL, DEFAULT_VALIDATION_FRACTION
from utils.seeding import derive_rng

logger = logging.getLogger("privacy_harness.protocol")

KINDS = ("eval", "validation")


@dataclass(frozen=True)
class TrialProtocol:
    """Enrollment lists plus the ordered trials scored against them."""
    enrollment_spec: Dict[str, Tuple[str, Tuple[str, ...]]]
    trials: Tuple[Trial, ...]
    kind: str = "eval"
    skipped_speakers: Tuple[str, ...] = field(default=())

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InputError(f"unknown protocol kind {self.kind!r}")
        object.__setattr__(self, "trials", tuple(self.trials))
        object.__setattr__(self, "enrollment_spec", {
            eid: (speaker, tuple(utterances)) for eid, (speaker, utterances) in self.enrollment_spec.items()
        })
        enrolled = self.enrollment_utterances()
        for trial in self.trials:
            if trial.enrollment_id not in self.enrollment_spec:
                raise ProtocolError(f"trial ({trial.enrollment_id}, {trial.test_utterance_id}) has no enrollment list")
            if trial.test_utterance_id in enrolled:
                raise ProtocolError(f"utterance {trial.test_utterance_id!r} is used for enrollment and as a test")

    def enrollment_utterances(self) -> set:
        return {u for _, utterances in self.enrollment_spec.values() for u in utterances}

    def test_utterances(self) -> set:
        return {trial.test_utterance_id for trial in self.trials}

    def trials_for(self, enrollment_id: str) -> List[Trial]:
        return [trial for trial in self.trials if trial.enrollment_id == enrollment_id]

    def counts(self) -> Tuple[int, int]:
        """(target trials, nontarget trials)."""
        targets = sum(1 for trial in self.trials if trial.is_target)
        return targets, len(self.trials) - targets


def check_labels(protocol: TrialProtocol, tests: LabeledEmbeddingSet) -> None:
    """Raise ProtocolError unless every label agrees with the original speaker ids."""
    for trial in protocol.trials:
        record = tests.get(trial.test_utterance_id)
        if record is None:
            raise ProtocolError(f"trial ({trial.enrollment_id}, {trial.test_utterance_id}) references unknown test utterance")
        speaker, _ = protocol.enrollment_spec[trial.enrollment_id]
        expected = TARGET if record.speaker_id == speaker else NONTARGET
        if trial.label != expected:
            raise ProtocolError(f"trial ({trial.enrollment_id}, {trial.test_utterance_id}) labelled {trial.label}, expected {expected}")


def check_disjoint_populations(train: LabeledEmbeddingSet, evaluation: LabeledEmbeddingSet) -> None:
    """Attacker training speakers must not appear in evaluation data."""
    shared = sorted(set(train.speakers()) & set(evaluation.speakers()))
    if shared:
        raise InputError(f"training and evaluation share speakers: {', '.join(shared[:5])}")


@dataclass(frozen=True)
class SplitResult:
    train: LabeledEmbeddingSet
    validation: LabeledEmbeddingSet
    fraction: float


def validation_count(count: int, fraction: float) -> int:
    """round(fraction * count) with halves rounded up, at least 1."""
    return max(1, int(np.floor(fraction * count + 0.5)))


def split_train_validation(data: LabeledEmbeddingSet, fraction: float = DEFAULT_VALIDATION_FRACTION,
                           seed: int = 0) -> SplitResult:
    """
    Per-speaker stratified split of attacker training data.

    Args:
        data: Anonymised (or raw) training data
        fraction: Share of each speaker's utterances set aside for validation
        seed: Master seed; each speaker gets its own derived stream

    Raises:
        InputError: If fraction is outside (0, 0.5) or a speaker has < 2 utterances
    """
    if not (0.0 < fraction < 0.5):
        raise InputError(f"validation fraction must lie in (0, 0.5), got {fraction}")

    held_out = set()
    for speaker, records in data.by_speaker().items():
        if len(records) < 2:
            raise InputError(f"speaker {speaker!r} has fewer than 2 utterances and cannot be split")
        rng = derive_rng(seed, "split", speaker)
        order = rng.permutation(len(records))
        take = validation_count(len(records), fraction)
        held_out.update(records[i].utterance_id for i in order[:take])

    train = tuple(r for r in data.records if r.utterance_id not in held_out)
    validation = tuple(r for r in data.records if r.utterance_id in held_out)
    logger.info(f"Split {len(data)} utterances into {len(train)} train / {len(validation)} validation")
    return SplitResult(
        LabeledEmbeddingSet(train, role="train", anonymised_by=data.anonymised_by),
        LabeledEmbeddingSet(validation, role="validation", anonymised_by=data.anonymised_by),
        fraction,
    )


def _draw_cycled(rng: np.random.Generator, pool: Sequence[str], count: int) -> List[str]:
    """Draw ``count`` items, exhausting shuffled copies of ``pool`` before repeating any."""
    drawn: List[str] = []
    while len(drawn) < count:
        order = rng.permutation(len(pool))
        drawn.extend(pool[i] for i in order[:count - len(drawn)])
    return drawn


def build_validation_protocol(validation: LabeledEmbeddingSet, n_enroll: int = DEFAULT_VALIDATION_ENROLL,
                              nontarget_per_speaker: int = DEFAULT_NONTARGETS_PER_SPEAKER,
                              seed: int = 0) -> TrialProtocol:
    """
    Speaker-overlap protocol over the validation split.

    Speakers with at most ``n_enroll`` utterances are skipped. For every kept
    speaker ``n_enroll`` random utterances form one enrollment model, every
    remaining utterance is a target trial, and ``nontarget_per_speaker`` test
    utterances of other kept speakers give the nontarget trials.
    """
    if len(validation) == 0:
        raise ProtocolError("validation set is empty")
    if n_enroll < 1 or nontarget_per_speaker < 0:
        raise InputError("n_enroll must be >= 1 and nontarget_per_speaker >= 0")

    grouped = validation.by_speaker()
    kept, skipped = [], []
    for speaker, records in grouped.items():
        (kept if len(records) > n_enroll else skipped).append(speaker)
    if skipped:
        logger.warning(f"Validation protocol skips {len(skipped)} speaker(s) with <= {n_enroll} utterances")
    if len(kept) < 2:
        raise ProtocolError(f"validation protocol needs >= 2 speakers with more than {n_enroll} utterances, got {len(kept)}")

    enrollment_spec = {}
    test_ids: Dict[str, List[str]] = {}
    for speaker in kept:
        records = grouped[speaker]
        order = derive_rng(seed, "validation-enroll", speaker).permutation(len(records))
        chosen = set(order[:n_enroll].tolist())
        enrollment_spec[speaker] = (speaker, tuple(records[i].utterance_id for i in range(len(records)) if i in chosen))
        test_ids[speaker] = [records[i].utterance_id for i in range(len(records)) if i not in chosen]

    trials = []
    for speaker in kept:
        trials.extend(Trial(speaker, utterance_id, TARGET) for utterance_id in test_ids[speaker])
        others = [u for other in kept if other != speaker for u in test_ids[other]]
        rng = derive_rng(seed, "validation-nontarget", speaker)
        trials.extend(Trial(speaker, u, NONTARGET) for u in _draw_cycled(rng, others, nontarget_per_speaker))

    protocol = TrialProtocol(enrollment_spec, tuple(trials), kind="validation", skipped_speakers=tuple(skipped))
    targets, nontargets = protocol.counts()
    logger.info(f"Validation protocol: {len(kept)} speakers, {targets} target / {nontargets} nontarget trials")
    return protocol


def build_eval_protocol(enroll: LabeledEmbeddingSet, test: LabeledEmbeddingSet,
                        nontarget_per_test: int = DEFAULT_NONTARGETS_PER_TEST, seed: int = 0) -> TrialProtocol:
    """
    Evaluation protocol: one model per enrolled speaker, and for each test
    utterance one target trial plus ``nontarget_per_test`` nontarget trials
    against distinct other speakers.

    Raises:
        InputError: If ``nontarget_per_test`` is negative
        ProtocolError: If a test speaker was never enrolled, there are too few
            speakers, or enroll and test share utterance ids
    """
    if nontarget_per_test < 0:
        raise InputError(f"nontarget_per_test must be >= 0, got {nontarget_per_test}")
    shared = [r.utterance_id for r in test.records if r.utterance_id in enroll]
    if shared:
        raise ProtocolError(f"utterance {shared[0]!r} appears in both enrollment and test data")

    grouped = enroll.by_speaker()
    speakers = list(grouped)
    if len(speakers) < nontarget_per_test + 1:
        raise ProtocolError(
            f"{nontarget_per_test} nontarget trials per test need >= {nontarget_per_test + 1} enrolled speakers, got {len(speakers)}"
        )
    enrollment_spec = {
        speaker: (speaker, tuple(record.utterance_id for record in records))
        for speaker, records in grouped.items()
    }

    trials = []
    for record in test.records:
        if record.speaker_id not in grouped:
            raise ProtocolError(f"test speaker {record.speaker_id!r} has no enrollment utterances")
        trials.append(Trial(record.speaker_id, record.utterance_id, TARGET))
        others = [speaker for speaker in speakers if speaker != record.speaker_id]
        rng = derive_rng(seed, "eval-nontarget", record.utterance_id)
        picks = rng.choice(len(others), size=nontarget_per_test, replace=False)
        trials.extend(Trial(others[i], record.utterance_id, NONTARGET) for i in picks)

    protocol = TrialProtocol(enrollment_spec, tuple(trials), kind="eval")
    targets, nontargets = protocol.counts()
    logger.info(f"Eval protocol: {len(speakers)} speakers, {targets} target / {nontargets} nontarget trials")
    return protocol
