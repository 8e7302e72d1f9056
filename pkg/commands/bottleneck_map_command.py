from tandem_commands import BaseCommand, emit_csv
from tandem_value import region_map


class BottleneckMapCommand(BaseCommand):
    name = "bottleneck-map"
    help = "V, minimizing stations and A(x) over a uniform grid of G (CSV)"

    def add_arguments(self, parser):
        parser.add_argument("--resolution", type=int, default=21, help="points per axis (default 21)")

    def run(self, args, run_config) -> int:
        emit_csv(region_map(run_config.params, args.resolution), getattr(args, "out", None))
        return 0
