import numpy as np

from tandem_commands import BaseCommand, emit_csv, emit_json, parse_vector
from tandem_dp import solve
from tandem_value import value_at


class SolveDPCommand(BaseCommand):
    name = "solve-dp"
    help = "Value iteration for V^n on the scaled lattice (JSON, optional CSV table)"

    def add_arguments(self, parser):
        parser.add_argument("--n", type=int, required=True, help="scale parameter")
        parser.add_argument("--warm", action="store_true", help="start from exp(-n V)")
        parser.add_argument("--tol", type=float, help="sup-norm accuracy of W")
        parser.add_argument("--max-iter", type=int, help="iteration bound")
        parser.add_argument("--at", help="report V^n at this state (default: origin)")
        parser.add_argument("--table", help="write the full state table to this CSV file")

    def run(self, args, run_config) -> int:
        params = run_config.params
        x = parse_vector(args.at, params.J, "at") if args.at else np.zeros(params.J)
        result = solve(params, args.n, tol=args.tol, max_iter=args.max_iter, warm=args.warm)
        if args.table:
            emit_csv(result.table(), args.table)

        k = result.grid.nearest(x)
        emit_json(
            {
                "n": args.n,
                "x": x,
                "lattice_point": list(k) if k is not None else None,
                "Vn_at": result.value_at(x),
                "V_at": value_at(x, params),
                "control_at": list(result.control_at(k)) if k is not None else None,
                "states": result.grid.size,
                "iterations": result.iterations,
                "final_delta": result.final_delta,
            },
            getattr(args, "out", None),
        )
        return 0
