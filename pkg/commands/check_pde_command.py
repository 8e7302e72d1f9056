from tandem_commands import BaseCommand, emit_json
from tandem_viscosity import pde_scan


class CheckPDECommand(BaseCommand):
    name = "check-pde"
    help = "Viscosity-solution checks over a grid of the closed rectangle (JSON)"

    def add_arguments(self, parser):
        parser.add_argument("--resolution", type=int, default=21, help="points per axis (default 21)")
        parser.add_argument("--tol", type=float, help="tolerance for equality-type checks")
        parser.add_argument("--samples", type=int, help="random draws per check")
        parser.add_argument("--seed", type=int, help="master seed")

    def run(self, args, run_config) -> int:
        summary = pde_scan(run_config.params, args.resolution, tol=args.tol, samples=args.samples, seed=args.seed)
        emit_json(summary.to_dict(), getattr(args, "out", None))
        return 0 if summary.passed else 3
