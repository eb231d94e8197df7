"""
Scenario suites: matched and mismatched attacker/evaluation pairings over one
shared synthetic world, followed by reference-line detection.
"""
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Mapping, Optional, Tuple, TypeVar

from core.errors import ConfigError, HarnessError, InputError, InsufficientDataError, InvariantViolation
from core.types import LabeledEmbeddingSet, SystemId
from services.anonsim import AnonSystemSpec, World, WorldConfig, anonymise_dataset, make_system, make_variant, sample_world, with_selection
from services.attacker import AttackerModel, evaluate_attack, train_attacker
from services.detector import EvaluationPoint, ReferenceLine, Verdict, assess, fit_reference_line, write_points_csv
from services.protocol import TrialProtocol, build_eval_protocol, build_validation_protocol, split_train_validation
from utils.constants import (
    CATEGORIES,
    DEFAULT_MARGIN,
    DEFAULT_NONTARGETS_PER_SPEAKER,
    DEFAULT_NONTARGETS_PER_TEST,
    DEFAULT_PROJECTION_RANK,
    DEFAULT_SHRINKAGE,
    DEFAULT_VALIDATION_ENROLL,
    DEFAULT_VALIDATION_FRACTION,
    SELECTIONS,
    VARIANT_KINDS,
)
from utils.seeding import derive_int

logger = logging.getLogger("privacy_harness.suite")

T = TypeVar("T")

SYSTEM_PARAMETERS = ("leak", "target_strength", "post_noise", "pool_size", "pool_rank", "vocoder_angle")


@dataclass(frozen=True)
class SystemDef:
    """
    Declarative system entry of a suite.

    Root systems (no ``base``) are built independently; derived systems start
    from ``base`` and apply a module swap and/or another selection strategy.
    """
    name: str
    base: Optional[str] = None
    variant: Optional[str] = None
    selection: Optional[str] = None
    parameters: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.variant is not None and self.variant not in VARIANT_KINDS:
            raise ConfigError(f"unknown variant kind {self.variant!r}", f"system.{self.name}.variant")
        if self.selection is not None and self.selection not in SELECTIONS:
            raise ConfigError(f"unknown selection {self.selection!r}", f"system.{self.name}.selection")
        if self.variant is not None and self.base is None:
            raise ConfigError("a variant needs a base system", f"system.{self.name}.base")
        for key in self.parameters:
            if key not in SYSTEM_PARAMETERS:
                raise ConfigError(f"unknown system parameter {key!r}", f"system.{self.name}.{key}")


@dataclass(frozen=True)
class Pairing:
    """Evaluation data of one system attacked by a model trained on another's data."""
    eval_system: str
    attacker_system: str
    category: str = "matched"
    retrain_selector: bool = False
    label: Optional[str] = None

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise ConfigError(f"unknown category {self.category!r}")
        if self.category == "matched" and (self.eval_system != self.attacker_system or self.retrain_selector):
            raise ConfigError(f"matched pairing ({self.eval_system},{self.attacker_system}) must use one system unchanged")
        if self.label is None:
            object.__setattr__(self, "label", f"({self.eval_system},{self.attacker_system})")


@dataclass(frozen=True)
class ScenarioConfig:
    world: WorldConfig
    systems: Mapping[str, SystemDef]
    pairings: Tuple[Pairing, ...]
    master_seed: int = 0
    margin: float = DEFAULT_MARGIN
    projection_rank: int = DEFAULT_PROJECTION_RANK
    shrinkage: float = DEFAULT_SHRINKAGE
    validation_fraction: float = DEFAULT_VALIDATION_FRACTION
    validation_enroll: int = DEFAULT_VALIDATION_ENROLL
    nontargets_per_speaker: int = DEFAULT_NONTARGETS_PER_SPEAKER
    nontargets_per_test: int = DEFAULT_NONTARGETS_PER_TEST
    name: str = "suite"

    def __post_init__(self):
        object.__setattr__(self, "pairings", tuple(self.pairings))
        if not self.pairings:
            raise ConfigError("a suite needs at least one pairing", "pairing")
        for index, pairing in enumerate(self.pairings):
            for system in (pairing.eval_system, pairing.attacker_system):
                if system not in self.systems:
                    raise ConfigError(f"undefined system {system!r}", f"pairing.{index}")
        for definition in self.systems.values():
            if definition.base is not None and definition.base not in self.systems:
                raise ConfigError(f"undefined base system {definition.base!r}", f"system.{definition.name}.base")
        if self.margin < 0:
            raise ConfigError(f"margin must be >= 0, got {self.margin}", "detector.margin")


@dataclass(frozen=True)
class ScenarioResult:
    """
    One EvaluationPoint per pairing (in pairing order), verdicts for the
    non-matched pairings and leave-one-out verdicts for the matched ones.
    """
    points: Tuple[EvaluationPoint, ...]
    verdicts: Tuple[Verdict, ...] = ()
    holdout_verdicts: Tuple[Verdict, ...] = ()
    line: Optional[ReferenceLine] = None
    fit_error: Optional[str] = None
    artifacts: Tuple[str, ...] = ()

    @property
    def matched_points(self) -> List[EvaluationPoint]:
        return [point for point in self.points if point.category == "matched"]

    @property
    def candidate_points(self) -> List[EvaluationPoint]:
        return [point for point in self.points if point.category != "matched"]


def build_systems(definitions: Mapping[str, SystemDef], seed: int, dim: int) -> Dict[str, AnonSystemSpec]:
    """Build every system, resolving derived systems after their bases."""
    built: Dict[str, AnonSystemSpec] = {}
    resolving = set()

    def resolve(name: str) -> AnonSystemSpec:
        if name in built:
            return built[name]
        if name in resolving:
            raise ConfigError(f"system {name!r} derives from itself", f"system.{name}.base")
        resolving.add(name)
        definition = definitions[name]
        if definition.base is None:
            spec = make_system(name, seed, dim=dim, selection=definition.selection or "utterance_random",
                               **definition.parameters)
        else:
            spec = resolve(definition.base)
            if definition.parameters:
                pool_keys = [key for key in definition.parameters if key.startswith("pool_")]
                if pool_keys:
                    raise ConfigError("derived systems share their base's pool", f"system.{name}.{pool_keys[0]}")
                spec = replace(spec, **definition.parameters)
            if definition.variant is not None:
                spec = make_variant(spec, definition.variant, seed)
            if definition.selection is not None:
                spec = with_selection(spec, definition.selection)
            spec = replace(spec, system_id=SystemId(name))
        resolving.discard(name)
        built[name] = spec
        return spec

    for name in definitions:
        resolve(name)
    return built


def anonymisation_seed(master_seed: int, role: str) -> int:
    """
    Seed of the anonymisation run for one data role (``train``, ``enroll`` or
    ``eval-test``). It does not depend on the system, so every system sees the
    same per-utterance draws for a role while the roles stay independent.
    """
    return derive_int(master_seed, "anonymise", role)


@dataclass(frozen=True)
class AttackerRun:
    """Attacker trained on one system's data, with its validation data and anonymised enrollment data."""
    model: AttackerModel
    validation: LabeledEmbeddingSet
    val_protocol: TrialProtocol
    enroll: LabeledEmbeddingSet


def attacker_for(index: int, pairing: Pairing, systems: Mapping[str, AnonSystemSpec],
                 seed: int) -> Tuple[str, AnonSystemSpec]:
    """
    The attacker's system for a pairing and a tag naming it. A retrained
    selector gets a fresh rotation seeded by the pairing index.
    """
    spec = systems[pairing.attacker_system]
    if not pairing.retrain_selector:
        return pairing.attacker_system, spec
    retrained = make_variant(spec, "selector_retrain", derive_int(seed, "pairing", index))
    return f"{pairing.attacker_system}#retrained-{index}", replace(retrained, system_id=spec.system_id)


def run_attacker(spec: AnonSystemSpec, world: World, config: ScenarioConfig, trained_on: SystemId) -> AttackerRun:
    """Anonymise training and enrollment data with ``spec``, split off validation data and train the attacker."""
    seed = config.master_seed
    train_anon = anonymise_dataset(world.train, spec, anonymisation_seed(seed, "train"), world.centroids)
    split = split_train_validation(train_anon, config.validation_fraction, derive_int(seed, "split"))
    model = train_attacker(split.train, config.projection_rank, config.shrinkage, trained_on=trained_on)
    val_protocol = build_validation_protocol(split.validation, config.validation_enroll, config.nontargets_per_speaker,
                                             derive_int(seed, "validation-protocol"))
    enroll = anonymise_dataset(world.eval_enroll, spec, anonymisation_seed(seed, "enroll"), world.centroids)
    return AttackerRun(model, split.validation, val_protocol, enroll)


def anonymise_test(spec: AnonSystemSpec, world: World, config: ScenarioConfig) -> LabeledEmbeddingSet:
    return anonymise_dataset(world.eval_test, spec, anonymisation_seed(config.master_seed, "eval-test"), world.centroids)


def suite_eval_protocol(world: World, config: ScenarioConfig) -> TrialProtocol:
    """Trials depend on utterance and speaker ids only, so every pairing shares one protocol."""
    return build_eval_protocol(world.eval_enroll, world.eval_test, config.nontargets_per_test,
                               derive_int(config.master_seed, "eval-protocol"))


def score_pairing(pairing: Pairing, attacker: AttackerRun, test: LabeledEmbeddingSet,
                  eval_protocol: TrialProtocol) -> EvaluationPoint:
    return evaluate_attack(
        attacker.model, eval_protocol, (attacker.enroll, test), attacker.val_protocol, attacker.validation,
        eval_system=SystemId(pairing.eval_system), attacker_system=SystemId(pairing.attacker_system),
        scenario_label=pairing.label, category=pairing.category,
    )


def run_pairing(index: int, pairing: Pairing, world: World, systems: Mapping[str, AnonSystemSpec],
                config: ScenarioConfig) -> EvaluationPoint:
    """
    Evaluate one pairing on its own.

    Attacker training data and eval enrollment data are anonymised by the
    attacker's system, eval test data by the evaluated system. Each data role
    has its own anonymisation seed, so a given system's eval data is identical
    across pairings while speaker-level mappings still differ between
    enrollment, test and training data.
    """
    _, attacker_spec = attacker_for(index, pairing, systems, config.master_seed)
    attacker = run_attacker(attacker_spec, world, config, SystemId(pairing.attacker_system))
    test = anonymise_test(systems[pairing.eval_system], world, config)
    return score_pairing(pairing, attacker, test, suite_eval_protocol(world, config))


def _run_named(index: int, pairing: Pairing, function: Callable[..., T], *args) -> T:
    try:
        return function(*args)
    except InputError as error:
        raise InputError(f"pairing {index} {pairing.label}: {error}") from error
    except HarnessError as error:
        raise InvariantViolation(f"pairing {index} {pairing.label}: {error}") from error


def _holdout_verdicts(matched: List[EvaluationPoint], margin: float) -> Tuple[Verdict, ...]:
    """Assess each matched point against the line fitted on the others."""
    if len(matched) < 3:
        return ()
    verdicts = []
    for index, point in enumerate(matched):
        try:
            line = fit_reference_line(matched[:index] + matched[index + 1:])
        except InsufficientDataError:
            continue
        verdicts.append(assess(point, line, margin))
    return tuple(verdicts)


def analyse_points(points: Tuple[EvaluationPoint, ...], margin: float) -> ScenarioResult:
    """Fit the reference line on matched points and assess everything else."""
    matched = [point for point in points if point.category == "matched"]
    try:
        line = fit_reference_line(matched)
    except InsufficientDataError as error:
        logger.warning(f"No reference line: {error}")
        return ScenarioResult(points, fit_error=str(error))
    verdicts = tuple(assess(point, line, margin) for point in points if point.category != "matched")
    return ScenarioResult(points, verdicts, _holdout_verdicts(matched, margin), line)


def _map(workers: int, function: Callable[..., T], jobs: List[tuple]) -> List[T]:
    """Apply ``function`` to every argument tuple, in order, on up to ``workers`` threads."""
    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            futures = [executor.submit(function, *job) for job in jobs]
            return [future.result() for future in futures]
    return [function(*job) for job in jobs]


def run_scenario_suite(config: ScenarioConfig, out_dir: Optional[str] = None, workers: int = 1) -> ScenarioResult:
    """
    Run every pairing of ``config`` and assess the results.

    Each distinct attacker is trained once and each evaluated system's test
    data is anonymised once; pairings then only score.

    Args:
        config: Suite description
        out_dir: When given, results table, points, verdicts and scatter are
            written there after all pairings finish
        workers: Number of threads; output does not depend on it

    Returns:
        ScenarioResult
    """
    logger.info(f"Running suite {config.name!r}: {len(config.pairings)} pairings, seed {config.master_seed}")
    world = sample_world(config.world, config.master_seed)
    systems = build_systems(config.systems, config.master_seed, config.world.dim)
    eval_protocol = suite_eval_protocol(world, config)

    attacker_tags, attacker_jobs = [], {}
    test_jobs = {}
    for index, pairing in enumerate(config.pairings):
        tag, spec = attacker_for(index, pairing, systems, config.master_seed)
        attacker_tags.append(tag)
        if tag not in attacker_jobs:
            attacker_jobs[tag] = (index, pairing, run_attacker, spec, world, config, SystemId(pairing.attacker_system))
        if pairing.eval_system not in test_jobs:
            test_jobs[pairing.eval_system] = (index, pairing, anonymise_test, systems[pairing.eval_system], world, config)

    attackers = dict(zip(attacker_jobs, _map(workers, _run_named, list(attacker_jobs.values()))))
    tests = dict(zip(test_jobs, _map(workers, _run_named, list(test_jobs.values()))))
    logger.debug(f"Trained {len(attackers)} attackers, anonymised test data of {len(tests)} systems")

    score_jobs = [
        (index, pairing, score_pairing, pairing, attackers[tag], tests[pairing.eval_system], eval_protocol)
        for index, (pairing, tag) in enumerate(zip(config.pairings, attacker_tags))
    ]
    points = tuple(_map(workers, _run_named, score_jobs))

    result = analyse_points(points, config.margin)
    if out_dir:
        result = replace(result, artifacts=tuple(emit_suite_outputs(result, out_dir)))
    return result


def emit_results_table(result: ScenarioResult, path: str) -> List[str]:
    """
    Write the attacker x evaluation EER_test table to ``path`` and the points
    CSV next to it (``<stem>_points.csv``). Returns both paths.
    """
    from utils.reports import write_results_table

    if not result.points:
        raise InputError("no points to tabulate")
    write_results_table(result.points, path)
    points_path = f"{os.path.splitext(path)[0]}_points.csv"
    write_points_csv(result.points, points_path, with_category=True)
    return [path, points_path]


def emit_suite_outputs(result: ScenarioResult, out_dir: str) -> List[str]:
    from utils.reports import write_scatter_svg, write_verdicts_csv

    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as error:
        raise InputError(f"cannot create {out_dir}: {error}") from error
    artifacts = emit_results_table(result, os.path.join(out_dir, "results.csv"))
    if result.line is not None:
        verdicts_path = os.path.join(out_dir, "verdicts.csv")
        write_verdicts_csv(result.holdout_verdicts + result.verdicts, verdicts_path)
        svg_path = os.path.join(out_dir, "scatter.svg")
        write_scatter_svg(result.matched_points, result.verdicts, result.line, svg_path)
        artifacts.extend([verdicts_path, svg_path])
    return artifacts
