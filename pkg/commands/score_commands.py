"""
Scoring and EER commands
"""
import os

from commands.protocol_commands import enrollment_list_path
from core.formats import emit_score_file, parse_embedding_file, parse_enrollment_file, parse_score_file, parse_trial_file
from services.attacker import parse_attacker_file
from services.metrics import compute_eer
from services.protocol import TrialProtocol, check_labels
from services.scoring import build_enrollment_models, score_protocol


def speaker_enrollments(enroll, test):
    """One model per enrolled speaker from all of its utterances that are not test utterances."""
    spec = {}
    for speaker, records in enroll.by_speaker().items():
        utterances = tuple(record.utterance_id for record in records if record.utterance_id not in test)
        if utterances:
            spec[speaker] = (speaker, utterances)
    return spec


def setup_score_commands(harness, subparsers):
    """
    Setup scoring commands

    Args:
        harness: The harness instance
        subparsers: Subparsers action of the top-level parser
    """
    score_parser = subparsers.add_parser("score", help="score a trial list with the cosine backend")
    score_parser.add_argument("--protocol", required=True, help="trial list file")
    score_parser.add_argument("--enroll", required=True, help="embeddings of enrollment utterances")
    score_parser.add_argument("--test", required=True, help="embeddings of test utterances")
    score_parser.add_argument("--attacker", help="attacker model file; scores in the projected space")
    score_parser.add_argument("--out", required=True, help="score file to write")
    score_parser.add_argument("--enrollment-list",
                              help="enrollment list file (defaults to <protocol>.enroll when present, "
                                   "else one model per speaker of --enroll)")

    def score_command(args):
        enroll = parse_embedding_file(args.enroll, role="eval-enroll")
        test = parse_embedding_file(args.test, role="eval-test")
        enrollment_list = args.enrollment_list
        if enrollment_list is None and os.path.isfile(enrollment_list_path(args.protocol)):
            enrollment_list = enrollment_list_path(args.protocol)
        if enrollment_list is not None:
            enrollment_spec = parse_enrollment_file(enrollment_list)
        else:
            enrollment_spec = speaker_enrollments(enroll, test)
        protocol = TrialProtocol(enrollment_spec, tuple(parse_trial_file(args.protocol)))
        check_labels(protocol, test)
        projector = parse_attacker_file(args.attacker) if args.attacker else None
        models = build_enrollment_models(protocol.enrollment_spec, enroll)
        scores = score_protocol(protocol, models, test, projector=projector, enrollment_data=enroll)
        emit_score_file(scores, args.out)
        harness.logger.info(f"Scored {len(scores.entries)} trials into {args.out}")

    score_parser.set_defaults(handler=score_command)

    eer_parser = subparsers.add_parser("eer", help="equal error rate of a score file")
    eer_parser.add_argument("--scores", required=True, help="score file")

    def eer_command(args):
        eer = compute_eer(parse_score_file(args.scores))
        print(f"EER={eer.value:.2f}%")

    eer_parser.set_defaults(handler=eer_command)
