"""
Simulation commands (synthetic worlds and anonymised embedding files)
"""
import os
import re

from config import load_suite_config
from core.formats import emit_embedding_file
from services.anonsim import WorldConfig, anonymise_dataset, sample_world
from services.suite import SystemDef, anonymisation_seed, build_systems


def _file_stem(system_name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]", "_", system_name)


def _anonymised_outputs(prefix, attacker, evaluated, world, seed):
    """Training and enrollment data by the attacker's system, test data by the evaluated one."""
    return [
        (f"{prefix}_train", anonymise_dataset(world.train, attacker, anonymisation_seed(seed, "train"), world.centroids)),
        (f"{prefix}_enroll", anonymise_dataset(world.eval_enroll, attacker, anonymisation_seed(seed, "enroll"), world.centroids)),
        (f"{prefix}_test", anonymise_dataset(world.eval_test, evaluated, anonymisation_seed(seed, "eval-test"), world.centroids)),
    ]


def setup_simulate_commands(harness, subparsers):
    """
    Setup simulation commands

    Args:
        harness: The harness instance
        subparsers: Subparsers action of the top-level parser
    """
    parser = subparsers.add_parser("simulate", help="sample a synthetic world and write embedding files")
    parser.add_argument("--out-dir", required=True, help="directory for train/enroll/test embedding files")
    parser.add_argument("--config", help="suite config providing world.* and system.* keys; without --system "
                                         "every configured system writes anon_<system>_*.emb")
    parser.add_argument("--system", help="also write data anonymised with this system (anon_*.emb)")
    parser.add_argument("--attacker-system", help="anonymise training and enrollment data with this system "
                                                  "(defaults to --system)")
    parser.add_argument("--seed", type=int, help="master seed (overrides suite.seed and HARNESS_SEED)")

    def simulate_command(args):
        if args.config:
            overrides = {"suite.seed": str(args.seed)} if args.seed is not None else {}
            config = load_suite_config(args.config, overrides, {"suite.seed": str(harness.config.SEED)})
            world_config, definitions, seed = config.world, dict(config.systems), config.master_seed
        else:
            world_config, definitions = WorldConfig(), {}
            seed = args.seed if args.seed is not None else harness.config.SEED

        attacker_name = args.attacker_system or args.system
        for name in (args.system, attacker_name):
            if name and name not in definitions:
                definitions[name] = SystemDef(name)
        systems = build_systems(definitions, seed, world_config.dim)

        world = sample_world(world_config, seed)
        outputs = [("train", world.train), ("enroll", world.eval_enroll), ("test", world.eval_test)]
        if args.system:
            outputs += _anonymised_outputs("anon", systems[attacker_name], systems[args.system], world, seed)
        else:
            for name, spec in systems.items():
                outputs += _anonymised_outputs(f"anon_{_file_stem(name)}", spec, spec, world, seed)

        os.makedirs(args.out_dir, exist_ok=True)
        for name, data in outputs:
            path = os.path.join(args.out_dir, f"{name}.emb")
            emit_embedding_file(data, path)
            print(f"{name}\t{len(data)}\t{path}")
        harness.logger.info(f"Simulated world with seed {seed} into {args.out_dir}")

    parser.set_defaults(handler=simulate_command)
