"""
Attacker commands
"""
from core.formats import parse_embedding_file
from core.types import SystemId
from services.attacker import emit_attacker_file, train_attacker
from utils.constants import DEFAULT_PROJECTION_RANK, DEFAULT_SHRINKAGE


def setup_attacker_commands(harness, subparsers):
    """
    Setup attacker commands

    Args:
        harness: The harness instance
        subparsers: Subparsers action of the top-level parser
    """
    parser = subparsers.add_parser("train-attacker", help="train the discriminant attacker on anonymised data")
    parser.add_argument("--train", required=True, help="training embedding file")
    parser.add_argument("--out", required=True, help="attacker model file to write")
    parser.add_argument("--k", type=int, default=DEFAULT_PROJECTION_RANK, help="projection rank")
    parser.add_argument("--shrinkage", type=float, default=DEFAULT_SHRINKAGE)
    parser.add_argument("--trained-on", help="system id recorded as provenance (e.g. B3 or B3:vocoder_swap)")

    def train_attacker_command(args):
        trained_on = SystemId.parse(args.trained_on) if args.trained_on else None
        model = train_attacker(parse_embedding_file(args.train, role="train"), args.k, args.shrinkage, trained_on)
        emit_attacker_file(model, args.out)
        print(f"k={model.k} dim={model.dim} trained_on={model.trained_on}")

    parser.set_defaults(handler=train_attacker_command)
