"""
═══════════════════════════════════════════════════════════════════════════════
FILE: tandem_hamiltonian.py
DESCRIPTION: Running cost, drift and the Hamiltonian at its three levels
             (full, minimized over perturbed rates, maximized over service)
═══════════════════════════════════════════════════════════════════════════════

    H(p, u, m) = c + p.v(u, m) + rho(u, m)
    H(p, u)    = inf_m H(p, u, m) = c + lam (1 - e^-p1) + sum_i u_i mu_i (1 - e^{gamma_i.p})
    H(p)       = sup_u H(p, u)    = c + lam (1 - e^-p1) + sum_i max(0, mu_i (1 - e^{gamma_i.p}))
"""

import logging
from dataclasses import dataclass
from enum import Enum
from itertools import product
from typing import List, Optional, Sequence, Union

import numpy as np

from tandem_config import Config
from tandem_errors import PreconditionError, VerificationError
from tandem_model import NetworkParams, SingleServerParams, as_state, gamma_matrix

logger = logging.getLogger("Tandem.Hamiltonian")

RELATION_RTOL = 1e-9
ISAACS_GAP_FACTOR = 0.05
# controls x rate-grid entries up to which the minimax is taken over the full product grid
ISAACS_PRODUCT_CAP = 2_000_000


@dataclass
class RateVector:
    """Perturbed rates m = (lam_bar, mu_bar_1, ..., mu_bar_J)"""

    lam_bar: float
    mu_bar: np.ndarray

    def as_array(self) -> np.ndarray:
        return np.concatenate([[self.lam_bar], self.mu_bar])

    @classmethod
    def nominal(cls, params: NetworkParams) -> "RateVector":
        return cls(lam_bar=params.lam, mu_bar=params.mu_array.copy())


class ServiceDecision(Enum):
    SERVE = 1
    IDLE = 0
    FREE = "free"


@dataclass
class IsaacsReport:
    sup_inf: float
    inf_sup: float
    gap: float
    H: float
    method: str = "separable"


def ell(x: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """x log x - x + 1 with 0 log 0 = 0, and +inf for negative x"""
    arr = np.asarray(x, dtype=float)
    positive = arr > 0
    safe = np.where(positive, arr, 1.0)
    out = np.where(positive, safe * np.log(safe) - safe + 1.0, np.where(arr == 0, 1.0, np.inf))
    return float(out) if out.ndim == 0 else out


def _controls(u: Sequence[float], J: int) -> np.ndarray:
    arr = as_state(u, J, field="u")
    if np.any(arr < 0) or np.any(arr > 1):
        raise PreconditionError(f"service controls must lie in [0, 1], got {arr.tolist()}")
    return arr


def gamma_dot(p: Sequence[float], params: NetworkParams) -> np.ndarray:
    """(gamma_1.p, ..., gamma_J.p) = (p_1 - p_2, ..., p_{J-1} - p_J, p_J)"""
    arr = as_state(p, params.J, field="p")
    return arr - np.append(arr[1:], 0.0)


def drift(u: Sequence[float], m: RateVector, J: Optional[int] = None) -> np.ndarray:
    """v(u, m) = lam_bar e_1 - sum_i u_i mu_bar_i gamma_i"""
    J = J or len(m.mu_bar)
    u_arr = _controls(u, J)
    v = np.zeros(J)
    v[0] = m.lam_bar
    return v - (u_arr * m.mu_bar) @ gamma_matrix(J)


def running_cost(u: Sequence[float], m: RateVector, params: NetworkParams) -> float:
    """rho(u, m) = lam l(lam_bar/lam) + sum_i u_i mu_i l(mu_bar_i/mu_i)"""
    u_arr = _controls(u, params.J)
    if m.lam_bar < 0 or np.any(m.mu_bar < 0):
        return float("inf")
    mu = params.mu_array
    return float(params.lam * ell(m.lam_bar / params.lam) + np.sum(u_arr * mu * ell(m.mu_bar / mu)))


def H_full(p: Sequence[float], u: Sequence[float], m: RateVector, params: NetworkParams) -> float:
    p_arr = as_state(p, params.J, field="p")
    cost = running_cost(u, m, params)
    if np.isinf(cost):
        return cost
    return float(params.c + p_arr @ drift(u, m, params.J) + cost)


def H_u(p: Sequence[float], u: Sequence[float], params: NetworkParams) -> float:
    p_arr = as_state(p, params.J, field="p")
    u_arr = _controls(u, params.J)
    service = params.mu_array * (1.0 - np.exp(gamma_dot(p_arr, params)))
    return float(params.c + params.lam * (1.0 - np.exp(-p_arr[0])) + np.sum(u_arr * service))


def service_terms(p: Sequence[float], params: NetworkParams) -> np.ndarray:
    """mu_i (1 - e^{gamma_i.p}); station i is worth serving when its term is positive"""
    return params.mu_array * (1.0 - np.exp(gamma_dot(p, params)))


def H(p: Sequence[float], params: NetworkParams) -> float:
    p_arr = as_state(p, params.J, field="p")
    arrival = params.lam * (1.0 - np.exp(-p_arr[0]))
    return float(params.c + arrival + np.sum(np.maximum(0.0, service_terms(p_arr, params))))


def optimal_m(p: Sequence[float], params: NetworkParams) -> RateVector:
    """Minimizing perturbed rates: lam_bar = lam e^-p1, mu_bar_i = mu_i e^{gamma_i.p}"""
    p_arr = as_state(p, params.J, field="p")
    return RateVector(
        lam_bar=float(params.lam * np.exp(-p_arr[0])),
        mu_bar=params.mu_array * np.exp(gamma_dot(p_arr, params)),
    )


def optimal_u(p: Sequence[float], params: NetworkParams) -> List[ServiceDecision]:
    decisions = []
    for term in service_terms(p, params):
        if abs(term) <= Config.FREE_TOL:
            decisions.append(ServiceDecision.FREE)
        elif term > 0:
            decisions.append(ServiceDecision.SERVE)
        else:
            decisions.append(ServiceDecision.IDLE)
    return decisions


# ═══════════════════════════════════════════════════════════════════════════
# RATE IDENTITIES
# ═══════════════════════════════════════════════════════════════════════════

def check_sum_relation(u: Sequence[float], p: Sequence[float], params: NetworkParams) -> float:
    """|lam_bar + sum u_i mu_bar_i - (c + lam + sum u_i mu_i)| at the minimizing rates.

    Requires H(p, u) = 0; raises PreconditionError otherwise.
    """
    u_arr = _controls(u, params.J)
    h = H_u(p, u_arr, params)
    if abs(h) > RELATION_RTOL:
        raise PreconditionError(f"H(p, u) = {h:.3e} is not zero; the sum relation does not apply")

    m = optimal_m(p, params)
    lhs = m.lam_bar + float(np.sum(u_arr * m.mu_bar))
    rhs = params.c + params.lam + float(np.sum(u_arr * params.mu_array))
    residual = abs(lhs - rhs)
    bound = RELATION_RTOL * (params.c + params.total_rate)
    if residual > bound:
        raise VerificationError(f"sum relation residual {residual:.3e} exceeds {bound:.3e}", detail=(lhs, rhs))
    return residual


def check_product_relation(p: Sequence[float], params: NetworkParams) -> float:
    """Relative defect of lam_bar prod mu_bar_i = lam prod mu_i (holds for every p)"""
    m = optimal_m(p, params)
    nominal = params.lam * float(np.prod(params.mu_array))
    perturbed = m.lam_bar * float(np.prod(m.mu_bar))
    residual = abs(perturbed - nominal) / nominal
    if residual > RELATION_RTOL:
        raise VerificationError(f"product relation relative residual {residual:.3e}", detail=(perturbed, nominal))
    return residual


# ═══════════════════════════════════════════════════════════════════════════
# ISAACS CONDITION
# ═══════════════════════════════════════════════════════════════════════════

def control_grid(J: int) -> np.ndarray:
    """Vertices of [0,1]^J plus the midpoints of its edges"""
    vertices = [np.array(v, dtype=float) for v in product((0.0, 1.0), repeat=J)]
    midpoints = []
    for v in vertices:
        for i in range(J):
            if v[i] == 0.0:
                mid = v.copy()
                mid[i] = 0.5
                midpoints.append(mid)
    return np.array(vertices + midpoints)


def isaacs_check(
    p: Sequence[float],
    params: NetworkParams,
    points: Optional[int] = None,
    log_radius: Optional[float] = None,
    product_cap: int = ISAACS_PRODUCT_CAP,
) -> IsaacsReport:
    """Compare sup_u inf_m and inf_m sup_u of H(p, u, m) on finite grids.

    The rate grid is log-uniform around optimal_m(p) in each coordinate.
    While the table of H over controls x rate grid has at most product_cap
    entries both orders are taken over that table directly. Past the cap
    the separable form is used: H(p, u, m) is a sum of one term per rate
    coordinate, so the infimum over the product grid splits per
    coordinate, and the supremum of a function linear in u over a grid
    holding every box vertex is the sum of positive parts.
    """
    points = points or Config.ISAACS_POINTS
    log_radius = Config.ISAACS_LOG_RADIUS if log_radius is None else log_radius
    p_arr = as_state(p, params.J, field="p")
    g = gamma_dot(p_arr, params)
    m_star = optimal_m(p_arr, params)
    scales = np.exp(np.linspace(-log_radius, log_radius, points))

    lam_grid = m_star.lam_bar * scales
    f_arrival = p_arr[0] * lam_grid + params.lam * ell(lam_grid / params.lam)

    mu = params.mu_array
    mu_grid = m_star.mu_bar[:, None] * scales[None, :]
    f_service = -mu_grid * g[:, None] + mu[:, None] * ell(mu_grid / mu[:, None])

    u_grid = control_grid(params.J)
    if len(u_grid) * points ** (params.J + 1) <= product_cap:
        method = "product-grid"
        idx = np.indices((points,) * (params.J + 1)).reshape(params.J + 1, -1)
        service = np.stack([f_service[i, idx[i + 1]] for i in range(params.J)])
        table = params.c + f_arrival[idx[0]][None, :] + u_grid @ service
        sup_inf = float(table.min(axis=1).max())
        inf_sup = float(table.max(axis=0).min())
    else:
        method = "separable"
        sup_inf = params.c + f_arrival.min() + float(np.max(u_grid @ f_service.min(axis=1)))
        inf_sup = params.c + f_arrival.min() + float(np.sum(np.maximum(0.0, f_service).min(axis=1)))

    h = H(p_arr, params)
    report = IsaacsReport(
        sup_inf=float(sup_inf), inf_sup=float(inf_sup), gap=float(abs(inf_sup - sup_inf)), H=h, method=method
    )
    if report.gap > ISAACS_GAP_FACTOR * (1.0 + abs(h)):
        raise VerificationError(f"Isaacs gap {report.gap:.3e} too large", detail=report)
    logger.debug(f"Isaacs check: {report}")
    return report


# ═══════════════════════════════════════════════════════════════════════════
# MULTICLASS SINGLE-SERVER HAMILTONIAN
# ═══════════════════════════════════════════════════════════════════════════

def single_server_H_u(p: Sequence[float], u: Sequence[float], params: SingleServerParams) -> float:
    p_arr = as_state(p, params.J, field="p")
    u_arr = as_state(u, params.J, field="u")
    if np.any(u_arr < 0) or np.sum(u_arr) > 1 + 1e-12:
        raise PreconditionError(f"single-server controls must satisfy u >= 0, sum(u) <= 1, got {u_arr.tolist()}")
    lam = np.asarray(params.lam)
    mu = np.asarray(params.mu)
    return float(params.c + np.sum(lam * (1.0 - np.exp(-p_arr)) + u_arr * mu * (1.0 - np.exp(p_arr))))


def single_server_H(p: Sequence[float], params: SingleServerParams) -> float:
    """Supremum over the simplex: the server goes entirely to the best class, or idles"""
    p_arr = as_state(p, params.J, field="p")
    lam = np.asarray(params.lam)
    mu = np.asarray(params.mu)
    best = float(np.max(mu * (1.0 - np.exp(p_arr))))
    return float(params.c + np.sum(lam * (1.0 - np.exp(-p_arr))) + max(0.0, best))


def single_server_optimal_u(p: Sequence[float], params: SingleServerParams) -> np.ndarray:
    p_arr = as_state(p, params.J, field="p")
    terms = np.asarray(params.mu) * (1.0 - np.exp(p_arr))
    u = np.zeros(params.J)
    j = int(np.argmax(terms))
    if terms[j] > 0:
        u[j] = 1.0
    return u
