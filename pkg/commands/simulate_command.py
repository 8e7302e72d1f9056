import numpy as np

from tandem_commands import BaseCommand, emit_json, parse_vector
from tandem_sim import PolicySpec, is_estimate, mc_estimate


class SimulateCommand(BaseCommand):
    name = "simulate"
    help = "Monte Carlo estimate of E exp(-n c sigma) under a policy (JSON)"

    def add_arguments(self, parser):
        parser.add_argument("--n", type=int, required=True, help="scale parameter")
        parser.add_argument("--policy", default="serve-all",
                            help="serve-all | bottleneck | idle-all | idle-<j> | custom@<file>")
        parser.add_argument("--paths", type=int, help="number of trajectories")
        parser.add_argument("--seed", type=int, help="master seed")
        parser.add_argument("--at", help="initial state x0 (default: origin)")
        parser.add_argument("--is", dest="importance", action="store_true",
                            help="importance sampling under the bottleneck rate tilt")

    def run(self, args, run_config) -> int:
        params = run_config.params
        x0 = parse_vector(args.at, params.J, "at") if args.at else np.zeros(params.J)
        policy = PolicySpec.parse(args.policy)
        if args.importance:
            estimate = is_estimate(params, args.n, policy, x0, args.paths, args.seed)
        else:
            estimate = mc_estimate(params, args.n, policy, x0, args.paths, args.seed)
        emit_json({"n": args.n, **estimate.to_dict()}, getattr(args, "out", None))
        return 0
