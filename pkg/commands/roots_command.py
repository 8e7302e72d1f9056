from tandem_commands import BaseCommand, emit_csv
from tandem_roots import roots_table


class RootsCommand(BaseCommand):
    name = "roots"
    help = "Characteristic exponents beta_i with their residuals (CSV)"

    def run(self, args, run_config) -> int:
        emit_csv(roots_table(run_config.params), getattr(args, "out", None))
        return 0
