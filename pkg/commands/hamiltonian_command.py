import logging

import numpy as np

from tandem_commands import BaseCommand, emit_json, parse_vector
from tandem_errors import PreconditionError
from tandem_hamiltonian import (
    H,
    H_u,
    ServiceDecision,
    check_product_relation,
    check_sum_relation,
    isaacs_check,
    optimal_m,
    optimal_u,
)

logger = logging.getLogger("Tandem.Commands")


class HamiltonianCommand(BaseCommand):
    name = "hamiltonian"
    help = "H(p), minimizing rates, forced controls and the rate identities at a co-state (JSON)"

    def add_arguments(self, parser):
        parser.add_argument("--p", required=True, help="co-state p1,...,pJ")
        parser.add_argument("--u", help="control for the sum relation (default: serve wherever allowed)")

    def run(self, args, run_config) -> int:
        params = run_config.params
        p = parse_vector(args.p, params.J, "p")
        decisions = optimal_u(p, params)
        if args.u:
            u = parse_vector(args.u, params.J, "u")
        else:
            u = np.array([0.0 if d is ServiceDecision.IDLE else 1.0 for d in decisions])

        m = optimal_m(p, params)
        try:
            sum_residual = check_sum_relation(u, p, params)
        except PreconditionError as e:
            logger.info(f"Sum relation skipped: {e}")
            sum_residual = None
        isaacs = isaacs_check(p, params)

        emit_json(
            {
                "p": p,
                "H": H(p, params),
                "H_u": H_u(p, u, params),
                "u": u,
                "optimal_m": {"lambda_bar": m.lam_bar, "mu_bar": m.mu_bar},
                "controls": [d.name.lower() for d in decisions],
                "sum_relation_residual": sum_residual,
                "product_relation_residual": check_product_relation(p, params),
                "isaacs": {
                    "sup_inf": isaacs.sup_inf, "inf_sup": isaacs.inf_sup, "gap": isaacs.gap, "method": isaacs.method,
                },
            },
            getattr(args, "out", None),
        )
        return 0
