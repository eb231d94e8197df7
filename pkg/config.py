"""
Configuration module for the harness
"""
import logging
import os
from typing import Dict, Mapping, Optional

from dotenv import dotenv_values, load_dotenv

from core.errors import ConfigError, InputError
from services.anonsim import WorldConfig
from services.suite import SYSTEM_PARAMETERS, Pairing, ScenarioConfig, SystemDef

logger = logging.getLogger("privacy_harness.config")

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")

WORLD_KEYS = {
    "dim": int,
    "n_train_speakers": int,
    "n_eval_speakers": int,
    "utterances_per_speaker": int,
    "eval_utterances_per_speaker": int,
    "channel_noise_sigma": float,
    "orthogonal_centroids": bool,
}
SUITE_KEYS = {
    "suite.name": ("name", str),
    "suite.seed": ("master_seed", int),
    "detector.margin": ("margin", float),
    "attacker.k": ("projection_rank", int),
    "attacker.shrinkage": ("shrinkage", float),
    "protocol.validation_fraction": ("validation_fraction", float),
    "protocol.validation_enroll": ("validation_enroll", int),
    "protocol.nontargets_per_speaker": ("nontargets_per_speaker", int),
    "protocol.nontargets_per_test": ("nontargets_per_test", int),
}
INTEGER_SYSTEM_PARAMETERS = ("pool_size", "pool_rank")


class HarnessConfig:
    """Process-level settings read from the environment (and a .env file if present)"""
    def __init__(self, env_file: Optional[str] = None):
        load_dotenv(env_file, override=False)

        # Logging
        self.LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO").strip().upper()
        self.LOG_DIR = os.getenv("LOG_DIR", "logs").strip()

        # Runs
        self.SEED = _convert(os.getenv("HARNESS_SEED", "0"), int, "HARNESS_SEED")
        self.WORKERS = _convert(os.getenv("HARNESS_WORKERS", "1"), int, "HARNESS_WORKERS")

        self._validate()
        self._debug_print()

    def _debug_print(self):
        """Log the effective settings"""
        logger.debug(f"LOG_LEVEL: {self.LOG_LEVEL}")
        logger.debug(f"LOG_DIR: {self.LOG_DIR or 'DISABLED'}")
        logger.debug(f"HARNESS_SEED: {self.SEED}")
        logger.debug(f"HARNESS_WORKERS: {self.WORKERS}")

    def _validate(self):
        """Validate the settings"""
        if self.LOG_LEVEL not in LOG_LEVELS:
            raise ConfigError(f"unknown log level {self.LOG_LEVEL!r}", "LOG_LEVEL")
        if self.WORKERS < 1:
            raise ConfigError(f"must be >= 1, got {self.WORKERS}", "HARNESS_WORKERS")


def _convert(value: Optional[str], kind, key: str):
    if value is None:
        raise ConfigError("missing value", key)
    text = value.strip()
    if kind is bool:
        if text.lower() in ("1", "true", "yes", "on"):
            return True
        if text.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"expected a boolean, got {value!r}", key)
    try:
        return kind(text)
    except ValueError as error:
        raise ConfigError(f"expected {kind.__name__}, got {value!r}", key) from error


def read_config_file(path: str) -> Dict[str, str]:
    """Flat ``key=value`` file; ``#`` starts a comment."""
    if not os.path.isfile(path):
        raise InputError(f"config file not found: {path}")
    values = dotenv_values(path)
    missing = [key for key, value in values.items() if value is None]
    if missing:
        raise ConfigError("key without a value", missing[0])
    return dict(values)


def _parse_pairing(key: str, value: str) -> Pairing:
    fields = [item.strip() for item in value.split(",")]
    if len(fields) < 3:
        raise ConfigError("expected 'eval_system,attacker_system,category[,retrain_selector]'", key)
    options = fields[3:]
    unknown = [option for option in options if option != "retrain_selector"]
    if unknown:
        raise ConfigError(f"unknown pairing option {unknown[0]!r}", key)
    try:
        return Pairing(fields[0], fields[1], fields[2], retrain_selector=bool(options))
    except ConfigError as error:
        raise ConfigError(str(error), key) from error


def _parse_systems(values: Mapping[str, str]) -> Dict[str, SystemDef]:
    raw: Dict[str, Dict[str, str]] = {}
    for key, value in values.items():
        if not key.startswith("system."):
            continue
        name, _, attribute = key[len("system."):].rpartition(".")
        if not name or not attribute:
            raise ConfigError("expected 'system.<name>.<attribute>'", key)
        raw.setdefault(name, {})[attribute] = value

    systems = {}
    for name, attributes in raw.items():
        parameters = {}
        for attribute, value in attributes.items():
            key = f"system.{name}.{attribute}"
            if attribute in ("base", "variant", "selection"):
                continue
            if attribute not in SYSTEM_PARAMETERS:
                raise ConfigError(f"unknown system attribute {attribute!r}", key)
            kind = int if attribute in INTEGER_SYSTEM_PARAMETERS else float
            parameters[attribute] = _convert(value, kind, key)
        systems[name] = SystemDef(
            name,
            base=attributes.get("base"),
            variant=attributes.get("variant"),
            selection=attributes.get("selection"),
            parameters=parameters,
        )
    return systems


def build_scenario_config(values: Mapping[str, str]) -> ScenarioConfig:
    """
    Turn flat dotted keys into a ScenarioConfig.

    Keys: ``suite.*``, ``world.*``, ``attacker.*``, ``protocol.*``,
    ``detector.margin``, ``system.<name>.<attribute>`` and ``pairing.<n>``
    (pairings run in ascending ``n``). See docs/config.md.
    """
    world_args, suite_args, pairings = {}, {}, []
    for key, value in values.items():
        if key.startswith("world."):
            field_name = key[len("world."):]
            if field_name not in WORLD_KEYS:
                raise ConfigError("unknown world key", key)
            world_args[field_name] = _convert(value, WORLD_KEYS[field_name], key)
        elif key in SUITE_KEYS:
            field_name, kind = SUITE_KEYS[key]
            suite_args[field_name] = _convert(value, kind, key)
        elif key.startswith("pairing."):
            order = _convert(key[len("pairing."):], int, key)
            pairings.append((order, _parse_pairing(key, value)))
        elif not key.startswith("system."):
            raise ConfigError("unknown key", key)

    try:
        world = WorldConfig(**world_args)
    except InputError as error:
        raise ConfigError(str(error), "world") from error
    pairings.sort(key=lambda item: item[0])
    config = ScenarioConfig(world, _parse_systems(values), tuple(p for _, p in pairings), **suite_args)
    logger.debug(f"Suite {config.name!r}: {len(config.systems)} systems, {len(config.pairings)} pairings, "
                 f"seed {config.master_seed}, margin {config.margin}")
    return config


def load_suite_config(path: str, overrides: Optional[Mapping[str, str]] = None,
                      defaults: Optional[Mapping[str, str]] = None) -> ScenarioConfig:
    """
    Read a suite file. ``defaults`` fill keys the file leaves out (e.g. the
    seed from HARNESS_SEED); ``overrides`` (CLI flags) replace file values.
    """
    values = dict(defaults or {})
    values.update(read_config_file(path))
    values.update(overrides or {})
    return build_scenario_config(values)
