"""
Protocol commands (validation split and trial lists)
"""
import sys

from core.formats import emit_embedding_file, emit_enrollment_file, emit_trial_file, parse_embedding_file
from services.protocol import build_eval_protocol, build_validation_protocol, split_train_validation
from utils.constants import DEFAULT_NONTARGETS_PER_SPEAKER, DEFAULT_NONTARGETS_PER_TEST, DEFAULT_VALIDATION_ENROLL, DEFAULT_VALIDATION_FRACTION

ENROLLMENT_SUFFIX = ".enroll"


def enrollment_list_path(trial_path: str) -> str:
    """Default location of the enrollment list written next to a trial file."""
    return f"{trial_path}{ENROLLMENT_SUFFIX}"


def setup_protocol_commands(harness, subparsers):
    """
    Setup protocol commands

    Args:
        harness: The harness instance
        subparsers: Subparsers action of the top-level parser
    """
    parser = subparsers.add_parser("protocol", help="build validation or evaluation trial protocols")
    parser.add_argument("--mode", choices=("val", "eval"), required=True)
    parser.add_argument("--embeddings", required=True,
                        help="[val] attacker training embeddings to split, [eval] enrollment embeddings")
    parser.add_argument("--test", help="[eval] test embeddings")
    parser.add_argument("--out", required=True, help="trial file to write")
    parser.add_argument("--out-enrollment", help=f"enrollment list (defaults to <out>{ENROLLMENT_SUFFIX})")
    parser.add_argument("--out-train", help="[val] training portion after the split")
    parser.add_argument("--out-validation", help="[val] held-out validation portion")
    parser.add_argument("--fraction", type=float, default=DEFAULT_VALIDATION_FRACTION)
    parser.add_argument("--n-enroll", type=int, default=DEFAULT_VALIDATION_ENROLL)
    parser.add_argument("--nontargets-per-speaker", type=int, default=DEFAULT_NONTARGETS_PER_SPEAKER)
    parser.add_argument("--nontargets-per-test", type=int, default=DEFAULT_NONTARGETS_PER_TEST)
    parser.add_argument("--seed", type=int, help="protocol seed (defaults to HARNESS_SEED)")

    def protocol_command(args):
        seed = args.seed if args.seed is not None else harness.config.SEED
        if args.mode == "val":
            split = split_train_validation(parse_embedding_file(args.embeddings, role="train"), args.fraction, seed)
            protocol = build_validation_protocol(split.validation, args.n_enroll, args.nontargets_per_speaker, seed)
            if args.out_train:
                emit_embedding_file(split.train, args.out_train)
            if args.out_validation:
                emit_embedding_file(split.validation, args.out_validation)
            if protocol.skipped_speakers:
                print(f"skipped speakers: {', '.join(protocol.skipped_speakers)}", file=sys.stderr)
        else:
            if args.test is None:
                parser.error("--mode eval requires --test")
            protocol = build_eval_protocol(
                parse_embedding_file(args.embeddings, role="eval-enroll"),
                parse_embedding_file(args.test, role="eval-test"),
                args.nontargets_per_test,
                seed,
            )
        emit_trial_file(protocol.trials, args.out)
        emit_enrollment_file(protocol.enrollment_spec, args.out_enrollment or enrollment_list_path(args.out))
        targets, nontargets = protocol.counts()
        print(f"enrollments={len(protocol.enrollment_spec)} targets={targets} nontargets={nontargets}")

    parser.set_defaults(handler=protocol_command)
