"""``exlab`` command line.

Exit status is 0 on success, 2 for configuration, model and parameter errors,
and 3 for any other failure while running (including I/O errors).
"""
import argparse, json, logging, sys

from . import gridio
from .config import EXPERIMENT_KINDS, ExperimentConfig
from .errors import ConfigError, ExlabError, ModelError
from .exlab import ExLab

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


def _u64(text):
    value = int(text, 0)
    if not 0 <= value < 1 << 64:
        raise argparse.ArgumentTypeError(f"{text} is not a 64-bit unsigned integer")
    return value


def build_parser():
    parser = argparse.ArgumentParser(prog="exlab", description="Excursion-set fluctuation experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    for kind in EXPERIMENT_KINDS:
        p = sub.add_parser(kind, help=f"run a '{kind}' experiment")
        p.add_argument("--config", help="JSON experiment config")
        p.add_argument("--seed", type=_u64, help="master seed (overrides the config)")
        p.add_argument("--workers", type=int, default=1, help="worker processes")
        p.add_argument("--out", help="output directory (overrides the config)")
        p.add_argument("--debug", action="store_true", help="log debug records to stderr")
        if kind == "census":
            p.add_argument("--grid", help="analyse a stored EXLB1 grid instead of fresh samples")
            p.add_argument("--levels", type=float, nargs="+", help="levels (overrides the config)")
    return parser


def _load_config(args):
    if args.config is None and not (args.command == "census" and args.grid):
        raise ConfigError("--config is required.")
    data = {}
    if args.config is not None:
        with open(args.config, "r", encoding="utf-8") as f:
            try:
                data = json.load(f)
            except json.JSONDecodeError as e:
                raise ConfigError(f"Invalid JSON config {args.config}: {e}")
        if not isinstance(data, dict):
            raise ConfigError(f"Config {args.config} is not a JSON object.")
    data.setdefault("kind", args.command)
    if data["kind"] != args.command:
        raise ConfigError(f"Config kind '{data['kind']}' does not match subcommand '{args.command}'.")
    if getattr(args, "grid", None):
        sample = gridio.read_grid(args.grid)
        data.update(model=sample.model_id, R=sample.grid.R, h=sample.grid.h, margin=sample.grid.margin,
                    seed=sample.seed)
    if getattr(args, "levels", None):
        data["levels"] = args.levels
    if args.seed is not None:
        data["seed"] = args.seed
    if args.out is not None:
        data["out_dir"] = args.out
    return ExperimentConfig.from_dict(data)


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.debug:
        logging.basicConfig(level=logging.DEBUG, stream=sys.stderr,
                            format="%(asctime)s %(name)s %(levelname)s %(message)s")
    try:
        config = _load_config(args)
        exlab = ExLab(workers=args.workers)
        manifest = exlab.run(config, grid_path=getattr(args, "grid", None))
    except (ConfigError, ModelError) as e:
        print(f"ERROR: [{args.command}] {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (ExlabError, OSError) as e:
        print(f"ERROR: [{args.command}] {e}", file=sys.stderr)
        return EXIT_RUNTIME
    except ValueError as e:
        print(f"ERROR: [{args.command}] {e}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"{args.command}: wrote {len(manifest.files)} files to {manifest.out_dir} "
          f"(config {manifest.config_hash[:12]})")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
