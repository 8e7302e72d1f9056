from tandem_commands import BaseCommand, emit_csv
from tandem_value import single_server_region_map


class SingleServerRegionsCommand(BaseCommand):
    name = "regions-single-server"
    help = "Priority class over the buffers of the multiclass single-server system (CSV)"
    instance = "single-server"

    def add_arguments(self, parser):
        parser.add_argument("--resolution", type=int, default=21, help="points per axis (default 21)")

    def run(self, args, run_config) -> int:
        emit_csv(single_server_region_map(run_config.params, args.resolution), getattr(args, "out", None))
        return 0
