import numpy as np

from tandem_commands import BaseCommand, emit_json, parse_vector
from tandem_model import BoundaryClass, classify
from tandem_value import gradient, value


class ValueCommand(BaseCommand):
    name = "value"
    help = "V(x), its terms, the minimizing stations and the bottleneck at one state (JSON)"

    def add_arguments(self, parser):
        parser.add_argument("--at", required=True, help="state x1,...,xJ")

    def run(self, args, run_config) -> int:
        params = run_config.params
        x = parse_vector(args.at, params.J, "at")
        breakdown = value(x, params)
        boundary = classify(x, params)

        document = {
            "x": x,
            "boundary": boundary.value,
            "terms": breakdown.terms,
            "V": breakdown.value,
            "argmin": breakdown.argmin,
            "A_of_x": breakdown.a_of_x,
            "bottleneck": breakdown.bottleneck,
        }
        if boundary is BoundaryClass.INTERIOR:
            grad = gradient(x, params)
            document["gradient"] = grad if grad is not None else "nondifferentiable"
        emit_json(document, getattr(args, "out", None))
        return 0
