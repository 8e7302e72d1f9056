import numpy as np

from tandem_commands import BaseCommand, emit_csv, parse_vector
from tandem_sim import policy_comparison


class ComparePoliciesCommand(BaseCommand):
    name = "compare-policies"
    help = "Serve-all, bottleneck-only and single-station idling on a shared seed (CSV)"

    def add_arguments(self, parser):
        parser.add_argument("--n", type=int, required=True, help="scale parameter")
        parser.add_argument("--paths", type=int, help="trajectories per policy")
        parser.add_argument("--seed", type=int, help="master seed")
        parser.add_argument("--at", help="initial state x0 (default: origin)")

    def run(self, args, run_config) -> int:
        params = run_config.params
        x0 = parse_vector(args.at, params.J, "at") if args.at else np.zeros(params.J)
        comparison = policy_comparison(params, args.n, x0, args.paths, args.seed)
        emit_csv(comparison.table, getattr(args, "out", None))
        return 0
