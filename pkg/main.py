#!/usr/bin/env python3
"""
Main entry point for the privacy evaluation harness
"""
import sys

from core.errors import HarnessError
from harness import PrivacyHarness


def main(argv=None) -> int:
    """Main function to run one harness command"""
    try:
        harness = PrivacyHarness()
    except HarnessError as error:
        print(f"[ERROR] {error}", file=sys.stderr)
        return error.exit_code
    return harness.run(argv)


if __name__ == "__main__":
    sys.exit(main())
