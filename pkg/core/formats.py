"""
Text file formats for embeddings, trials, enrollment lists and scores.

All formats are tab separated, one record per line, UTF-8, and parsed
without any locale dependency (decimal point only).
"""
import logging
import re
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from core.errors import FormatError, InputError
from core.types import (
    LABELS,
    Embedding,
    LabeledEmbeddingSet,
    ScoreEntry,
    ScoreSet,
    SystemId,
    Trial,
    UtteranceRecord,
)

logger = logging.getLogger("privacy_harness.formats")

NO_TARGET = "-"
EMBEDDING_DECIMALS = 9
SCORE_DECIMALS = 6

_NUMBER = re.compile(r"^[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?$")
_HEADER = re.compile(r"^#dim\s+(\d+)\s*$")


def parse_number(token: str, path: Optional[str] = None, line_number: Optional[int] = None) -> float:
    """Parse a plain decimal number; rejects nan/inf, separators and locale forms."""
    if not _NUMBER.match(token):
        raise FormatError(f"invalid number {token!r}", path, line_number)
    value = float(token)
    if not np.isfinite(value):
        raise FormatError(f"number {token!r} out of range", path, line_number)
    return value


def _read_lines(path: str) -> List[str]:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            return handle.read().splitlines()
    except OSError as error:
        raise InputError(f"cannot read {path}: {error}") from error


def _write_lines(path: str, lines: Sequence[str]) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as handle:
            for line in lines:
                handle.write(line)
                handle.write("\n")
    except OSError as error:
        raise InputError(f"cannot write {path}: {error}") from error


# Embedding files

def parse_embedding_file(path: str, role: str = "train",
                         anonymised_by: Optional[SystemId] = None) -> LabeledEmbeddingSet:
    """
    Parse an embedding file.

    Format: first line ``#dim d``, then one row per utterance::

        utterance_id<TAB>speaker_id<TAB>target_id|-<TAB>v1 v2 ... vd

    Args:
        path: File to read
        role: Role given to the resulting set
        anonymised_by: Provenance recorded on the set; defaults to
            ``SystemId("external")`` when rows carry target ids

    Raises:
        FormatError: On header/dimension mismatch, duplicate ids or bad values,
            naming the offending line
    """
    lines = _read_lines(path)
    if not lines:
        raise FormatError("missing '#dim d' header", path, 1)
    header = _HEADER.match(lines[0].strip())
    if not header:
        raise FormatError(f"expected '#dim d' header, got {lines[0]!r}", path, 1)
    dim = int(header.group(1))
    if dim < 2:
        raise FormatError(f"dimension must be >= 2, got {dim}", path, 1)

    records = []
    seen = set()
    has_targets = None
    for line_number, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != 4:
            raise FormatError(f"expected 4 tab-separated fields, got {len(fields)}", path, line_number)
        utterance_id, speaker_id, target_token, vector = fields
        if utterance_id in seen:
            raise FormatError(f"duplicate utterance_id {utterance_id!r}", path, line_number)
        seen.add(utterance_id)

        tokens = vector.split()
        if len(tokens) != dim:
            raise FormatError(f"expected {dim} values, got {len(tokens)}", path, line_number)
        values = [parse_number(token, path, line_number) for token in tokens]

        target_id = None if target_token == NO_TARGET else target_token
        if has_targets is None:
            has_targets = target_id is not None
        elif has_targets != (target_id is not None):
            raise FormatError("target_id must be given on every row or on none", path, line_number)

        try:
            records.append(UtteranceRecord(utterance_id, speaker_id, Embedding(values), target_id))
        except InputError as error:
            raise FormatError(str(error), path, line_number) from error

    if has_targets and anonymised_by is None:
        anonymised_by = SystemId("external")
    logger.debug(f"Parsed {len(records)} embeddings (dim {dim}) from {path}")
    return LabeledEmbeddingSet(tuple(records), role=role, anonymised_by=anonymised_by if has_targets else None)


def format_embedding_lines(data: LabeledEmbeddingSet, dim: Optional[int] = None) -> List[str]:
    if dim is None:
        dim = data.dim
    lines = [f"#dim {dim}"]
    for record in data.records:
        target = record.target_id if record.target_id is not None else NO_TARGET
        vector = " ".join(f"{value:.{EMBEDDING_DECIMALS}f}" for value in record.embedding.values)
        lines.append(f"{record.utterance_id}\t{record.speaker_id}\t{target}\t{vector}")
    return lines


def emit_embedding_file(data: LabeledEmbeddingSet, path: str) -> None:
    """Write ``data`` in the embedding file format (values at 9 decimal places)."""
    _write_lines(path, format_embedding_lines(data))


# Trial files

def _parse_label(token: str, path: str, line_number: int) -> str:
    if token not in LABELS:
        raise FormatError(f"unknown label {token!r}, expected target or nontarget", path, line_number)
    return token


def parse_trial_file(path: str) -> List[Trial]:
    """Parse ``enrollment_id<TAB>test_utterance_id<TAB>target|nontarget`` lines."""
    trials = []
    for line_number, line in enumerate(_read_lines(path), start=1):
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != 3:
            raise FormatError(f"expected 3 tab-separated fields, got {len(fields)}", path, line_number)
        label = _parse_label(fields[2], path, line_number)
        try:
            trials.append(Trial(fields[0], fields[1], label))
        except InputError as error:
            raise FormatError(str(error), path, line_number) from error
    return trials


def emit_trial_file(trials: Sequence[Trial], path: str) -> None:
    _write_lines(path, [f"{t.enrollment_id}\t{t.test_utterance_id}\t{t.label}" for t in trials])


# Enrollment lists

def parse_enrollment_file(path: str) -> Dict[str, Tuple[str, List[str]]]:
    """Parse ``enrollment_id<TAB>speaker_id<TAB>utt1 utt2 ...`` lines."""
    spec: Dict[str, Tuple[str, List[str]]] = {}
    for line_number, line in enumerate(_read_lines(path), start=1):
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != 3 or not fields[2].split():
            raise FormatError("expected enrollment_id, speaker_id and utterance list", path, line_number)
        if fields[0] in spec:
            raise FormatError(f"duplicate enrollment_id {fields[0]!r}", path, line_number)
        spec[fields[0]] = (fields[1], fields[2].split())
    return spec


def emit_enrollment_file(enrollment_spec: Dict[str, Tuple[str, List[str]]], path: str) -> None:
    _write_lines(path, [
        f"{enrollment_id}\t{speaker_id}\t{' '.join(utterances)}"
        for enrollment_id, (speaker_id, utterances) in enrollment_spec.items()
    ])


# Score files

def parse_score_file(path: str) -> ScoreSet:
    """
    Parse a score file written by :func:`emit_score_file` or by an external pipeline.

    Raises:
        FormatError: On malformed lines or unknown label tokens, naming the line
    """
    entries = []
    for line_number, line in enumerate(_read_lines(path), start=1):
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != 4:
            raise FormatError(f"expected 4 tab-separated fields, got {len(fields)}", path, line_number)
        label = _parse_label(fields[2], path, line_number)
        score = parse_number(fields[3].strip(), path, line_number)
        try:
            entries.append(ScoreEntry(fields[0], fields[1], label, score))
        except InputError as error:
            raise FormatError(str(error), path, line_number) from error
    return ScoreSet(tuple(entries))


def emit_score_file(scores: ScoreSet, path: str) -> None:
    """Write one line per entry in input order, scores at 6 decimal places."""
    _write_lines(path, [
        f"{e.enrollment_id}\t{e.test_utterance_id}\t{e.label}\t{e.score:.{SCORE_DECIMALS}f}"
        for e in scores.entries
    ])
