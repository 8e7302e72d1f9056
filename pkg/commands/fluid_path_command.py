import numpy as np

from tandem_commands import BaseCommand, emit_json, parse_vector
from tandem_sim import fluid_path


class FluidPathCommand(BaseCommand):
    name = "fluid-path"
    help = "Most likely overflow path under the bottleneck rate tilt and its cost (JSON)"

    def add_arguments(self, parser):
        parser.add_argument("--at", help="initial state x0 (default: origin)")
        parser.add_argument("--dt", type=float, default=1e-3, help="Euler step (default 1e-3)")

    def run(self, args, run_config) -> int:
        params = run_config.params
        x0 = parse_vector(args.at, params.J, "at") if args.at else np.zeros(params.J)
        emit_json(fluid_path(params, x0, dt=args.dt).to_dict(), getattr(args, "out", None))
        return 0
