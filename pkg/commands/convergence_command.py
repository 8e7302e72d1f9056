import numpy as np

from tandem_commands import BaseCommand, emit_csv, parse_int_list, parse_vector
from tandem_dp import convergence_study


class ConvergenceCommand(BaseCommand):
    name = "convergence"
    help = "V^n(x0) against V(x0) over a list of scales (CSV)"

    def add_arguments(self, parser):
        parser.add_argument("--n-list", default="1,2,4,8,16", help="comma-separated scales")
        parser.add_argument("--at", help="initial state x0 (default: origin)")

    def run(self, args, run_config) -> int:
        params = run_config.params
        x0 = parse_vector(args.at, params.J, "at") if args.at else np.zeros(params.J)
        emit_csv(convergence_study(params, parse_int_list(args.n_list, "n-list"), x0), getattr(args, "out", None))
        return 0
