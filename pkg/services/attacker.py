"""
Semi-informed attacker surrogate: a shrinkage LDA projection trained on
anonymised data, used in front of the cosine backend.
"""
import logging
from dataclasses import dataclass, field
from typing import Optional, Tuple, Union

import numpy as np
from scipy.linalg import eigh

from core.errors import FormatError, InputError, InsufficientDataError
from core.formats import parse_number, _read_lines, _write_lines
from core.types import Embedding, LabeledEmbeddingSet, SystemId
from services.metrics import compute_eer
from services.scoring import build_enrollment_models, score_protocol
from utils.constants import DEFAULT_PROJECTION_RANK, DEFAULT_SHRINKAGE

logger = logging.getLogger("privacy_harness.attacker")

ROW_TOLERANCE = 1e-6
MODEL_DECIMALS = 12


@dataclass(frozen=True, eq=False)
class AttackerModel:
    """Projection with orthonormal rows learned from anonymised training data."""
    projection: np.ndarray = field(repr=False)
    trained_on: SystemId
    shrinkage: float = DEFAULT_SHRINKAGE

    def __post_init__(self):
        projection = np.array(self.projection, dtype=np.float64)
        if projection.ndim != 2 or projection.shape[0] < 1:
            raise InputError("projection must be a non-empty (k, dim) matrix")
        if projection.shape[0] >= projection.shape[1]:
            raise InputError(f"projection rank k={projection.shape[0]} must be below dim={projection.shape[1]}")
        gram = projection @ projection.T
        if np.max(np.abs(gram - np.eye(projection.shape[0]))) > ROW_TOLERANCE:
            raise InputError("projection rows are not orthonormal")
        projection.flags.writeable = False
        object.__setattr__(self, "projection", projection)

    @property
    def k(self) -> int:
        return self.projection.shape[0]

    @property
    def dim(self) -> int:
        return self.projection.shape[1]


def _scatter_matrices(data: LabeledEmbeddingSet):
    matrix = data.matrix()
    labels = np.array([record.speaker_id for record in data.records])
    overall = matrix.mean(axis=0)
    dim = matrix.shape[1]
    within = np.zeros((dim, dim))
    between = np.zeros((dim, dim))
    for speaker in dict.fromkeys(labels):
        rows = matrix[labels == speaker]
        mean = rows.mean(axis=0)
        centred = rows - mean
        within += centred.T @ centred
        offset = (mean - overall)[:, np.newaxis]
        between += rows.shape[0] * (offset @ offset.T)
    total = matrix - overall
    return within / len(matrix), between / len(matrix), (total.T @ total) / len(matrix)


def _sign_convention(rows: np.ndarray) -> np.ndarray:
    rows = rows.copy()
    for index, row in enumerate(rows):
        nonzero = np.flatnonzero(np.abs(row) > 1e-12)
        if nonzero.size and row[nonzero[0]] < 0:
            rows[index] = -row
    return rows


def train_attacker(train: LabeledEmbeddingSet, k: int = DEFAULT_PROJECTION_RANK,
                   shrinkage: float = DEFAULT_SHRINKAGE, trained_on: Optional[SystemId] = None) -> AttackerModel:
    """
    Fit a regularized linear discriminant projection.

    The within-speaker scatter is shrunk toward a scaled identity
    (scale = mean total variance), the between-speaker scatter is whitened
    with its inverse square root, and the top-k eigenvectors are mapped back
    and re-orthonormalized. Rows follow a sign convention (first nonzero
    component positive) so training is deterministic.

    Args:
        train: Attacker training data (speaker labels are the original speakers)
        k: Projection rank, 1 <= k <= speakers - 1 and k < dim
        shrinkage: Weight of the identity target in [0, 1]
        trained_on: Provenance; defaults to the system recorded on ``train``

    Raises:
        InsufficientDataError: Fewer than 2 speakers, a speaker with < 2
            utterances, or a singular within-speaker scatter
        InputError: Invalid k or shrinkage
    """
    if not (0.0 <= shrinkage <= 1.0):
        raise InputError(f"shrinkage must lie in [0, 1], got {shrinkage}")
    grouped = train.by_speaker()
    if len(grouped) < 2:
        raise InsufficientDataError(f"attacker training needs >= 2 speakers, got {len(grouped)}")
    thin = [speaker for speaker, records in grouped.items() if len(records) < 2]
    if thin:
        raise InsufficientDataError(f"speaker {thin[0]!r} has fewer than 2 training utterances")
    dim = train.dim
    if k < 1 or k >= dim or k > len(grouped) - 1:
        raise InputError(f"projection rank k={k} must satisfy 1 <= k <= {len(grouped) - 1} and k < {dim}")

    within, between, total = _scatter_matrices(train)
    scale = np.trace(total) / dim
    within = (1.0 - shrinkage) * within + shrinkage * scale * np.eye(dim)

    values, vectors = eigh(within)
    if values[0] <= 1e-12 * max(values[-1], 1e-300):
        raise InsufficientDataError("within-speaker scatter is singular despite shrinkage")
    inverse_root = (vectors / np.sqrt(values)) @ vectors.T

    whitened = inverse_root @ between @ inverse_root
    whitened = (whitened + whitened.T) / 2.0
    eigenvalues, eigenvectors = eigh(whitened)
    order = np.argsort(-eigenvalues, kind="stable")[:k]
    directions = inverse_root @ eigenvectors[:, order]

    basis, _ = np.linalg.qr(directions)
    projection = _sign_convention(basis.T)
    provenance = trained_on or train.anonymised_by or SystemId("raw")
    logger.info(
        f"Trained attacker on {provenance}: {len(train)} utterances, {len(grouped)} speakers, "
        f"k={k}, top eigenvalue {eigenvalues[order[0]]:.4f}"
    )
    return AttackerModel(projection, provenance, shrinkage)


def project_matrix(model: AttackerModel, matrix: np.ndarray) -> np.ndarray:
    """Project rows of ``matrix`` and normalize them."""
    matrix = np.atleast_2d(matrix)
    if matrix.shape[1] != model.dim:
        raise InputError(f"cannot project dimension {matrix.shape[1]} with a dim-{model.dim} attacker")
    projected = matrix @ model.projection.T
    norms = np.linalg.norm(projected, axis=1, keepdims=True)
    if np.any(norms < 1e-12):
        raise InputError("projected embedding has zero norm")
    return projected / norms


def project(model: AttackerModel, e: Embedding) -> Embedding:
    """Attacker-space embedding: normalize(projection @ e)."""
    return Embedding(project_matrix(model, e.values)[0])


EvalData = Union[LabeledEmbeddingSet, Tuple[LabeledEmbeddingSet, LabeledEmbeddingSet]]


def _score_eer(model: AttackerModel, protocol, data: EvalData) -> float:
    if isinstance(data, tuple):
        enroll, test = data
    else:
        enroll = test = data
    models = build_enrollment_models(protocol.enrollment_spec, enroll)
    scores = score_protocol(protocol, models, test, projector=model, enrollment_data=enroll)
    return compute_eer(scores).value


def evaluate_attack(model: AttackerModel, eval_protocol, eval_data: EvalData, val_protocol,
                    val_data: LabeledEmbeddingSet, eval_system: Optional[SystemId] = None,
                    attacker_system: Optional[SystemId] = None, scenario_label: str = "",
                    category: str = "candidate"):
    """
    Score the evaluation and validation protocols with ``model``.

    Args:
        eval_data: One set holding enrollment and test utterances, or an
            ``(enroll, test)`` pair
        eval_system: System that produced the evaluation data (defaults to
            the provenance recorded on the test set)
        attacker_system: Reported attacker system (defaults to ``model.trained_on``)

    Returns:
        EvaluationPoint with (EER_test, EER_val)
    """
    from services.detector import EvaluationPoint

    eer_test = _score_eer(model, eval_protocol, eval_data)
    eer_val = _score_eer(model, val_protocol, val_data)
    if eval_system is None:
        test_set = eval_data[1] if isinstance(eval_data, tuple) else eval_data
        eval_system = test_set.anonymised_by or SystemId("raw")
    point = EvaluationPoint(
        eer_test=eer_test,
        eer_val=eer_val,
        eval_system=eval_system,
        attacker_system=attacker_system or model.trained_on,
        scenario_label=scenario_label or f"{eval_system}|{attacker_system or model.trained_on}",
        category=category,
    )
    logger.info(f"{point.scenario_label}: EER_test={eer_test:.2f}% EER_val={eer_val:.2f}%")
    return point


# Model files

def emit_attacker_file(model: AttackerModel, path: str) -> None:
    """Text header (k, dim, lambda, trained_on) followed by k rows of dim floats."""
    lines = [
        f"k\t{model.k}",
        f"dim\t{model.dim}",
        f"lambda\t{model.shrinkage:.{MODEL_DECIMALS}f}",
        f"trained_on\t{model.trained_on}",
    ]
    lines.extend(" ".join(f"{value:.{MODEL_DECIMALS}f}" for value in row) for row in model.projection)
    _write_lines(path, lines)


def parse_attacker_file(path: str) -> AttackerModel:
    lines = [line for line in _read_lines(path)]
    if len(lines) < 4:
        raise FormatError("attacker file needs a 4-line header", path, len(lines) + 1)
    header = {}
    for line_number, (line, key) in enumerate(zip(lines[:4], ("k", "dim", "lambda", "trained_on")), start=1):
        fields = line.split("\t")
        if len(fields) != 2 or fields[0] != key:
            raise FormatError(f"expected header '{key}<TAB>value'", path, line_number)
        header[key] = fields[1].strip()
    try:
        k, dim = int(header["k"]), int(header["dim"])
    except ValueError as error:
        raise FormatError("k and dim must be integers", path, 1) from error
    shrinkage = parse_number(header["lambda"], path, 3)
    trained_on = SystemId.parse(header["trained_on"])

    rows = []
    for line_number, line in enumerate(lines[4:], start=5):
        if not line.strip():
            continue
        tokens = line.split()
        if len(tokens) != dim:
            raise FormatError(f"expected {dim} values, got {len(tokens)}", path, line_number)
        rows.append([parse_number(token, path, line_number) for token in tokens])
    if len(rows) != k:
        raise FormatError(f"expected {k} projection rows, got {len(rows)}", path, len(lines))
    try:
        return AttackerModel(np.array(rows), trained_on, shrinkage)
    except InputError as error:
        raise FormatError(str(error), path) from error
