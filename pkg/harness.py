"""
Core PrivacyHarness class: logging, configuration, command registration and
the mapping from errors to exit codes
"""
import argparse
import logging
import os
import sys
import traceback
from datetime import datetime
from typing import List, Optional

from config import HarnessConfig
from core.errors import HarnessError, InputError, InvariantViolation
from utils.constants import EXIT_INPUT_ERROR, EXIT_INTERNAL_ERROR, EXIT_OK

LOGGER_NAME = "privacy_harness"
LOGGING_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


class HarnessArgumentParser(argparse.ArgumentParser):
    """ArgumentParser that reports usage errors as InputError instead of exiting"""
    def error(self, message):
        raise InputError(f"{self.prog}: {message}")


class PrivacyHarness:
    """Main harness class"""
    def __init__(self, env_file: Optional[str] = None):
        # Load configuration
        self.config = HarnessConfig(env_file)

        # Setup logging
        self.setup_logging(self.config.LOG_LEVEL, self.config.LOG_DIR)
        self.logger.debug("PrivacyHarness initialization started")

        # Register commands
        self.parser = self.build_parser()

    def build_parser(self) -> argparse.ArgumentParser:
        """Create the top-level parser and load all command groups"""
        from commands.attacker_commands import setup_attacker_commands
        from commands.detect_commands import setup_detect_commands
        from commands.protocol_commands import setup_protocol_commands
        from commands.score_commands import setup_score_commands
        from commands.simulate_commands import setup_simulate_commands
        from commands.suite_commands import setup_suite_commands

        parser = HarnessArgumentParser(
            prog="privacy-harness",
            description="Evaluate voice anonymisation privacy and detect mismatched attacker evaluations",
        )
        parser.add_argument("--verbose", action="store_true", help="log at DEBUG level")
        subparsers = parser.add_subparsers(dest="command", metavar="command")
        subparsers.required = True

        setup_simulate_commands(self, subparsers)
        setup_protocol_commands(self, subparsers)
        setup_attacker_commands(self, subparsers)
        setup_score_commands(self, subparsers)
        setup_detect_commands(self, subparsers)
        setup_suite_commands(self, subparsers)

        self.logger.debug(f"Registered commands: {', '.join(sorted(subparsers.choices))}")
        return parser

    def setup_logging(self, level: str = "INFO", log_dir: str = "logs"):
        """Console logging on stderr, plus a dated log file when log_dir is set"""
        logger = logging.getLogger(LOGGER_NAME)
        logger.setLevel(getattr(logging, level, logging.INFO))
        logger.propagate = False
        for handler in list(logger.handlers):
            logger.removeHandler(handler)
            handler.close()

        console_handler = logging.StreamHandler(sys.stderr)
        console_handler.setFormatter(logging.Formatter(LOGGING_FORMAT))
        logger.addHandler(console_handler)

        if log_dir:
            os.makedirs(log_dir, exist_ok=True)
            current_date = datetime.now().strftime('%Y-%m-%d')
            file_handler = logging.FileHandler(os.path.join(log_dir, f"harness_{current_date}.log"))
            file_handler.setFormatter(logging.Formatter(LOGGING_FORMAT))
            logger.addHandler(file_handler)

        self.logger = logger
        self.logger.debug("Logging system initialized")

    def run(self, argv: Optional[List[str]] = None) -> int:
        """Parse ``argv``, dispatch to the command handler and return the exit code"""
        try:
            args = self.parser.parse_args(argv)
            if args.verbose:
                self.logger.setLevel(logging.DEBUG)
            self.logger.debug(f"Running command {args.command}")
            args.handler(args)
            return EXIT_OK
        except Exception as error:
            return self.on_command_error(error)

    def on_command_error(self, error: Exception) -> int:
        """Log an error and select the exit code for its type"""
        self.logger.debug(f"Traceback:\n{''.join(traceback.format_exception(type(error), error, error.__traceback__))}")
        if isinstance(error, InputError):
            self.logger.error(f"Input error: {error}")
            return EXIT_INPUT_ERROR
        if isinstance(error, OSError):
            self.logger.error(f"I/O error: {error}")
            return EXIT_INPUT_ERROR
        if isinstance(error, InvariantViolation):
            self.logger.error(f"Internal invariant violated: {error}")
            return EXIT_INTERNAL_ERROR
        if isinstance(error, HarnessError):
            self.logger.error(f"Harness error: {error}")
            return error.exit_code
        self.logger.error(f"Unexpected error: {error!r}")
        return EXIT_INTERNAL_ERROR
