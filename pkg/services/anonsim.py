"""
Synthetic speaker world and anonymisation-system archetypes.

Anonymisation is modelled in embedding space as target replacement with a
small residual of the source speaker::

    y = normalize(vocoder @ mixer @ (target_strength * target + leak * source + post_noise * noise))

with ``target`` a pseudo-speaker from the system's pool, ``source`` the
source speaker embedding and ``noise`` isotropic noise scaled so its expected
norm is ``post_noise``. Noise and random target draws come from per-utterance
streams keyed by the run seed and the utterance id only, so two systems run
with the same seed see the same draws. Every pool of one master seed lies in
a shared pseudo-speaker space; entries, mixers and selectors are per system.
"""
import logging
from dataclasses import dataclass, field, replace
from typing import Dict, Iterator, Mapping, Optional, Tuple

import numpy as np
from scipy.linalg import expm
from scipy.stats import norm, ortho_group

from core.errors import InputError
from core.types import Embedding, LabeledEmbeddingSet, SystemId, UtteranceRecord, check_orthogonal
from utils.constants import (
    DEFAULT_CHANNEL_SIGMA,
    DEFAULT_DIM,
    DEFAULT_LEAK,
    DEFAULT_POOL_RANK,
    DEFAULT_POOL_SIZE,
    DEFAULT_POST_NOISE,
    DEFAULT_ROUTING_SHARE,
    DEFAULT_TARGET_STRENGTH,
    DEFAULT_VOCODER_ANGLE,
    SELECTIONS,
    VARIANT_KINDS,
)
from utils.seeding import derive_rng

logger = logging.getLogger("privacy_harness.anonsim")


def _readonly(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=np.float64)
    array.flags.writeable = False
    return array


def _unit_rows(matrix: np.ndarray) -> np.ndarray:
    return matrix / np.linalg.norm(matrix, axis=1, keepdims=True)


def random_orthogonal(dim: int, rng: np.random.Generator) -> np.ndarray:
    return ortho_group.rvs(dim=dim, random_state=rng)


def pseudo_speaker_space(dim: int, seed: int) -> np.ndarray:
    """Orthonormal basis shared by every pool built from ``seed``; pools use its leading columns."""
    return random_orthogonal(dim, derive_rng(seed, "pseudo-speaker-space"))


def small_rotation(dim: int, angle: float, rng: np.random.Generator) -> np.ndarray:
    """Random rotation whose largest principal angle is ``angle`` radians."""
    if angle == 0.0:
        return np.eye(dim)
    gaussian = rng.standard_normal((dim, dim))
    skew = (gaussian - gaussian.T) / 2.0
    skew *= angle / np.linalg.norm(skew, 2)
    return expm(skew)


# World

@dataclass(frozen=True)
class WorldConfig:
    """Desk-scale stand-in for the attacker training corpus and the evaluation sets."""
    dim: int = DEFAULT_DIM
    n_train_speakers: int = 40
    n_eval_speakers: int = 40
    utterances_per_speaker: int = 80
    channel_noise_sigma: float = DEFAULT_CHANNEL_SIGMA
    eval_utterances_per_speaker: Optional[int] = None
    orthogonal_centroids: bool = False

    def __post_init__(self):
        if self.dim < 8:
            raise InputError(f"world dim must be >= 8, got {self.dim}")
        if min(self.n_train_speakers, self.n_eval_speakers, self.utterances_per_speaker) < 1:
            raise InputError("speaker and utterance counts must be positive")
        if self.eval_utterances < 2:
            raise InputError("eval speakers need >= 2 utterances to split into enroll and test")
        if self.channel_noise_sigma < 0:
            raise InputError(f"channel_noise_sigma must be >= 0, got {self.channel_noise_sigma}")
        if self.orthogonal_centroids and self.dim < self.n_train_speakers + self.n_eval_speakers:
            raise InputError("orthogonal centroids need dim >= total number of speakers")

    @property
    def eval_utterances(self) -> int:
        if self.eval_utterances_per_speaker is None:
            return self.utterances_per_speaker
        return self.eval_utterances_per_speaker


@dataclass(frozen=True)
class World:
    """Sampled world; unpacks as ``train, eval_enroll, eval_test``."""
    train: LabeledEmbeddingSet
    eval_enroll: LabeledEmbeddingSet
    eval_test: LabeledEmbeddingSet
    centroids: Mapping[str, np.ndarray] = field(repr=False, compare=False, default=None)

    def __iter__(self) -> Iterator[LabeledEmbeddingSet]:
        return iter((self.train, self.eval_enroll, self.eval_test))


def _speaker_utterances(speaker: str, centroid: np.ndarray, count: int, sigma: float, seed: int):
    rng = derive_rng(seed, "world-noise", speaker)
    dim = centroid.size
    noise = rng.standard_normal((count, dim)) * (sigma / np.sqrt(dim))
    vectors = _unit_rows(centroid[np.newaxis, :] + noise)
    return [
        UtteranceRecord(f"{speaker}-u{index:03d}", speaker, Embedding(vectors[index]))
        for index in range(count)
    ]


def sample_world(config: WorldConfig, seed: int) -> World:
    """
    Draw speaker centroids uniformly on the sphere and noisy utterances around them.

    Train and eval populations are disjoint; each eval speaker's utterances are
    split into an enrollment half and a test half.
    """
    rng = derive_rng(seed, "world-centroids")
    n_total = config.n_train_speakers + config.n_eval_speakers
    if config.orthogonal_centroids:
        basis, _ = np.linalg.qr(rng.standard_normal((config.dim, config.dim)))
        centroids = basis.T[:n_total]
    else:
        centroids = _unit_rows(rng.standard_normal((n_total, config.dim)))

    train_ids = [f"trn{i:04d}" for i in range(config.n_train_speakers)]
    eval_ids = [f"evl{i:04d}" for i in range(config.n_eval_speakers)]
    centroid_map = {speaker: _readonly(centroids[i]) for i, speaker in enumerate(train_ids + eval_ids)}

    train = []
    for speaker in train_ids:
        train.extend(_speaker_utterances(speaker, centroid_map[speaker], config.utterances_per_speaker,
                                         config.channel_noise_sigma, seed))
    enroll, test = [], []
    half = config.eval_utterances // 2
    for speaker in eval_ids:
        records = _speaker_utterances(speaker, centroid_map[speaker], config.eval_utterances,
                                      config.channel_noise_sigma, seed)
        enroll.extend(records[:half])
        test.extend(records[half:])

    logger.info(f"Sampled world: {len(train_ids)} train / {len(eval_ids)} eval speakers, dim {config.dim}")
    return World(
        LabeledEmbeddingSet(tuple(train), role="train"),
        LabeledEmbeddingSet(tuple(enroll), role="eval-enroll"),
        LabeledEmbeddingSet(tuple(test), role="eval-test"),
        centroid_map,
    )


# Systems

def routing_threshold(dim: int, share: float = DEFAULT_ROUTING_SHARE) -> float:
    """Threshold on one coordinate of a random unit vector exceeded by about ``share`` of inputs."""
    if not (0.0 < share < 1.0):
        raise InputError(f"routing share must lie in (0, 1), got {share}")
    return float(norm.ppf(1.0 - share) / np.sqrt(dim))


@dataclass(frozen=True, eq=False)
class DeterministicSelector:
    """
    Target selection as a fixed function of the source speaker embedding.

    The input is rotated and only its first coordinate is kept, shifted by
    ``threshold``. The pool entry with the largest dot product against that
    rank-one image wins: inputs above the threshold go to the entry furthest
    along the routing axis, the others to the entry furthest against it.
    Nearby inputs therefore part only when they straddle the threshold.
    """
    rotation: np.ndarray = field(repr=False)
    threshold: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "rotation", _readonly(self.rotation))
        check_orthogonal(self.rotation, "selector rotation")

    @property
    def axis(self) -> np.ndarray:
        return self.rotation[0]

    def select(self, x: np.ndarray, pool: np.ndarray) -> int:
        if pool.shape[0] == 0:
            raise InputError("cannot select from an empty target pool")
        image = float(self.axis @ x) - self.threshold
        return int(np.argmax(image * (pool @ self.axis)))

    def retrained(self, rng: np.random.Generator) -> "DeterministicSelector":
        """Fresh routing axis, same threshold."""
        return DeterministicSelector(random_orthogonal(self.rotation.shape[0], rng), self.threshold)


@dataclass(frozen=True, eq=False)
class AnonSystemSpec:
    """Parameters of one simulated anonymisation system."""
    system_id: SystemId
    target_pool: np.ndarray = field(repr=False)
    target_strength: float = DEFAULT_TARGET_STRENGTH
    leak: float = DEFAULT_LEAK
    post_noise: float = DEFAULT_POST_NOISE
    mixer: np.ndarray = field(default=None, repr=False)
    vocoder_rotation: np.ndarray = field(default=None, repr=False)
    selection: str = "utterance_random"
    selector: Optional[DeterministicSelector] = field(default=None, repr=False)
    vocoder_angle: float = DEFAULT_VOCODER_ANGLE
    pool_name: Optional[str] = None

    def __post_init__(self):
        pool = np.array(self.target_pool, dtype=np.float64)
        if pool.ndim != 2:
            raise InputError(f"{self.system_id}: target pool must be a (size, dim) matrix")
        object.__setattr__(self, "target_pool", _readonly(pool))
        dim = pool.shape[1]
        if self.mixer is None:
            object.__setattr__(self, "mixer", np.eye(dim))
        if self.vocoder_rotation is None:
            object.__setattr__(self, "vocoder_rotation", np.eye(dim))
        object.__setattr__(self, "mixer", _readonly(self.mixer))
        object.__setattr__(self, "vocoder_rotation", _readonly(self.vocoder_rotation))
        if self.pool_name is None:
            object.__setattr__(self, "pool_name", self.system_id.name)

        if self.target_strength <= 0:
            raise InputError(f"{self.system_id}: target strength must be > 0")
        if not (0.0 <= self.leak < self.target_strength):
            raise InputError(f"{self.system_id}: leak must satisfy 0 <= leak < target strength")
        if self.post_noise < 0:
            raise InputError(f"{self.system_id}: post noise must be >= 0")
        if self.selection not in SELECTIONS:
            raise InputError(f"{self.system_id}: unknown selection {self.selection!r}")
        if self.selection == "deterministic" and self.selector is None:
            raise InputError(f"{self.system_id}: deterministic selection needs a selector")
        if self.mixer.shape != (dim, dim) or self.vocoder_rotation.shape != (dim, dim):
            raise InputError(f"{self.system_id}: matrices must be {dim}x{dim}")
        if pool.shape[0] and not np.allclose(np.linalg.norm(pool, axis=1), 1.0, atol=1e-9):
            raise InputError(f"{self.system_id}: target pool vectors must be unit norm")
        check_orthogonal(self.mixer, f"{self.system_id} mixer")
        check_orthogonal(self.vocoder_rotation, f"{self.system_id} vocoder rotation")

    @property
    def dim(self) -> int:
        return self.target_pool.shape[1]

    def pool_embeddings(self):
        return tuple(Embedding(row) for row in self.target_pool)

    def transform(self) -> np.ndarray:
        """Combined linear map: vocoder rotation after the mixer."""
        return self.vocoder_rotation @ self.mixer

    def target_label(self, index: int) -> str:
        return f"{self.pool_name}-p{index:03d}"


def make_system(name: str, seed: int, dim: int = DEFAULT_DIM, leak: float = DEFAULT_LEAK,
                target_strength: float = DEFAULT_TARGET_STRENGTH, post_noise: float = DEFAULT_POST_NOISE,
                pool_size: int = DEFAULT_POOL_SIZE, pool_rank: int = DEFAULT_POOL_RANK,
                selection: str = "utterance_random", vocoder_angle: float = DEFAULT_VOCODER_ANGLE,
                routing_share: float = DEFAULT_ROUTING_SHARE) -> AnonSystemSpec:
    """
    Build an independent system: its own pool entries in the seed's
    pseudo-speaker space, its own feature mixer and selector rotation, and
    an identity vocoder rotation.
    """
    if not (1 <= pool_rank <= dim):
        raise InputError(f"{name}: pool rank must lie in [1, {dim}]")
    if pool_size < 0:
        raise InputError(f"{name}: pool size must be >= 0")
    basis = pseudo_speaker_space(dim, seed)[:, :pool_rank]
    rng = derive_rng(seed, "system", name)
    pool = _unit_rows(rng.standard_normal((pool_size, pool_rank))) @ basis.T if pool_size else np.zeros((0, dim))
    if pool_size:
        pool = _unit_rows(pool)
    mixer = random_orthogonal(dim, rng)
    selector = DeterministicSelector(random_orthogonal(dim, rng), routing_threshold(dim, routing_share))
    return AnonSystemSpec(
        system_id=SystemId(name),
        target_pool=pool,
        target_strength=target_strength,
        leak=leak,
        post_noise=post_noise,
        mixer=mixer,
        vocoder_rotation=np.eye(dim),
        selection=selection,
        selector=selector,
        vocoder_angle=vocoder_angle,
    )


def make_variant(spec: AnonSystemSpec, kind: str, seed: int, angle: Optional[float] = None) -> AnonSystemSpec:
    """
    Swap a single module of ``spec``.

    ``vocoder_swap`` composes a small random rotation onto the vocoder,
    ``feature_swap`` replaces the mixer, ``selector_retrain`` replaces the
    deterministic selector rotation. Everything else is carried over.
    """
    if kind not in VARIANT_KINDS:
        raise InputError(f"unknown variant kind {kind!r}")
    rng = derive_rng(seed, "variant", kind, str(spec.system_id))
    new_id = SystemId(spec.system_id.name, kind)
    if kind == "vocoder_swap":
        theta = spec.vocoder_angle if angle is None else angle
        rotation = small_rotation(spec.dim, theta, rng) @ spec.vocoder_rotation
        return replace(spec, system_id=new_id, vocoder_rotation=rotation)
    if kind == "feature_swap":
        return replace(spec, system_id=new_id, mixer=random_orthogonal(spec.dim, rng))
    selector = spec.selector or DeterministicSelector(np.eye(spec.dim), routing_threshold(spec.dim))
    return replace(spec, system_id=new_id, selector=selector.retrained(rng))


def with_selection(spec: AnonSystemSpec, selection: str, system_id: Optional[SystemId] = None) -> AnonSystemSpec:
    """Same system with another target selection strategy (speaker-level, random, deterministic)."""
    if selection not in SELECTIONS:
        raise InputError(f"unknown selection {selection!r}")
    return replace(spec, selection=selection, system_id=system_id or spec.system_id)


def estimate_centroids(data: LabeledEmbeddingSet) -> Dict[str, np.ndarray]:
    """Normalized mean embedding per speaker, used when true centroids are unknown."""
    centroids = {}
    for speaker, records in data.by_speaker().items():
        mean = np.mean([record.embedding.values for record in records], axis=0)
        centroids[speaker] = mean / np.linalg.norm(mean)
    return centroids


def anonymise_dataset(data: LabeledEmbeddingSet, spec: AnonSystemSpec, seed: int,
                      centroids: Optional[Mapping[str, np.ndarray]] = None) -> LabeledEmbeddingSet:
    """
    Anonymise every utterance of ``data`` with ``spec``.

    Args:
        data: Original (non-anonymised) utterances
        spec: System to apply
        seed: Seed of this anonymisation run; per-utterance and per-speaker
            streams are derived from it
        centroids: True speaker embeddings (simulation); estimated from the
            data when omitted

    Raises:
        InputError: On dimension mismatch or an empty target pool
    """
    if len(data) == 0:
        return LabeledEmbeddingSet((), role=data.role)
    if data.dim != spec.dim:
        raise InputError(f"data dim {data.dim} does not match system {spec.system_id} dim {spec.dim}")
    pool = spec.target_pool
    if pool.shape[0] == 0:
        raise InputError(f"system {spec.system_id} has an empty target pool")
    if centroids is None:
        centroids = estimate_centroids(data)
    label = str(spec.system_id)
    scale = spec.post_noise / np.sqrt(spec.dim)

    speaker_targets: Dict[str, int] = {}
    indices = np.empty(len(data), dtype=np.int64)
    sources = np.empty((len(data), spec.dim))
    noise = np.empty((len(data), spec.dim))
    for row, record in enumerate(data.records):
        if record.speaker_id not in centroids:
            raise InputError(f"no speaker embedding for {record.speaker_id!r}")
        x = centroids[record.speaker_id]
        rng = derive_rng(seed, "utt", record.utterance_id)
        noise[row] = rng.standard_normal(spec.dim)
        if spec.selection == "utterance_random":
            index = int(rng.integers(pool.shape[0]))
        elif spec.selection == "speaker_random":
            if record.speaker_id not in speaker_targets:
                speaker_rng = derive_rng(seed, "spk", record.speaker_id)
                speaker_targets[record.speaker_id] = int(speaker_rng.integers(pool.shape[0]))
            index = speaker_targets[record.speaker_id]
        else:
            index = spec.selector.select(x, pool)
        indices[row] = index
        sources[row] = x

    mixed = spec.target_strength * pool[indices] + spec.leak * sources + scale * noise
    outputs = _unit_rows(mixed @ spec.transform().T)

    records = tuple(
        UtteranceRecord(record.utterance_id, record.speaker_id, Embedding(outputs[row]),
                        spec.target_label(int(indices[row])))
        for row, record in enumerate(data.records)
    )
    logger.debug(f"Anonymised {len(records)} utterances with {label} ({spec.selection})")
    return LabeledEmbeddingSet(records, role=data.role, anonymised_by=spec.system_id)
