"""
═══════════════════════════════════════════════════════════════════════════════
FILE: tandem_roots.py
DESCRIPTION: Characteristic exponents beta_i / alpha_i and the gradient basis b_i
═══════════════════════════════════════════════════════════════════════════════

beta is the unique positive solution of

    c + lam (1 - e^beta) + mu (1 - e^-beta) = 0.

With y = e^beta this is the quadratic lam y^2 - (c + lam + mu) y + mu = 0.
The quadratic equals -c < 0 at y = 1, so its larger root exceeds 1 and
beta = log y > 0.
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Tuple

import numpy as np
import pandas as pd
from scipy.optimize import bisect

from tandem_errors import DomainError, VerificationError
from tandem_model import NetworkParams

logger = logging.getLogger("Tandem.Roots")

RESIDUAL_RTOL = 1e-12
BRACKET = (1e-12, 50.0)


@dataclass(frozen=True)
class RootResult:
    beta: float
    residual: float
    method: str = "quadratic"


def characteristic_residual(beta: float, lam: float, mu: float, c: float) -> float:
    return c + lam * (1.0 - np.exp(beta)) + mu * (1.0 - np.exp(-beta))


def _check_rates(lam: float, mu: float, c: float):
    if lam <= 0:
        raise DomainError(f"arrival rate must be positive (got {lam}); no positive root exists")
    if mu <= 0 or c <= 0:
        raise DomainError(f"service rate and c must be positive (got mu={mu}, c={c})")


def bracketed_root(lam: float, mu: float, c: float) -> RootResult:
    """Bisection on the characteristic residual over a fixed bracket in beta"""
    _check_rates(lam, mu, c)
    lo, hi = BRACKET
    f_lo = characteristic_residual(lo, lam, mu, c)
    f_hi = characteristic_residual(hi, lam, mu, c)
    if np.sign(f_lo) == np.sign(f_hi):
        raise VerificationError(
            f"characteristic equation has no sign change on {BRACKET} (lam={lam}, mu={mu}, c={c})"
        )
    beta = bisect(characteristic_residual, lo, hi, args=(lam, mu, c), xtol=1e-15, maxiter=200)
    return RootResult(beta=float(beta), residual=float(characteristic_residual(beta, lam, mu, c)), method="bisection")


def beta_root(lam: float, mu: float, c: float) -> RootResult:
    """Positive root of the characteristic equation for one station.

    Closed form from the quadratic in y = e^beta, one Newton step, then a
    residual check; falls back to bisection if the check fails.
    """
    _check_rates(lam, mu, c)
    scale = c + lam + mu
    tol = RESIDUAL_RTOL * scale

    disc = scale * scale - 4.0 * lam * mu
    y = (scale + np.sqrt(disc)) / (2.0 * lam)
    beta = float(np.log(y))

    # Newton
    slope = -lam * np.exp(beta) + mu * np.exp(-beta)
    if slope != 0:
        beta -= characteristic_residual(beta, lam, mu, c) / slope
    residual = float(characteristic_residual(beta, lam, mu, c))

    if beta > 0 and abs(residual) <= tol:
        return RootResult(beta=beta, residual=residual)

    logger.warning(f"⚠️ Closed-form root failed residual check ({residual:.3e}); using bisection")
    result = bracketed_root(lam, mu, c)
    if abs(result.residual) > tol:
        raise VerificationError(
            f"root residual {result.residual:.3e} exceeds {tol:.3e}", detail=result
        )
    return result


def alpha_root(lam_i: float, mu_i: float, c: float) -> RootResult:
    """Per-class exponent of the single-server system (same equation, class arrival rate)"""
    return beta_root(lam_i, mu_i, c)


# ═══════════════════════════════════════════════════════════════════════════
# PER-INSTANCE QUANTITIES
# ═══════════════════════════════════════════════════════════════════════════

@lru_cache(maxsize=256)
def _cached_betas(params: NetworkParams) -> Tuple[float, ...]:
    return tuple(beta_root(params.lam, mu_i, params.c).beta for mu_i in params.mu)


def betas(params: NetworkParams) -> np.ndarray:
    """(beta_1, ..., beta_J)"""
    return np.array(_cached_betas(params))


def b_vector(i: int, params: NetworkParams) -> np.ndarray:
    """b_i = beta_i (e_1 + ... + e_i)"""
    if not 1 <= i <= params.J:
        raise DomainError(f"station index {i} out of range [1, {params.J}]")
    b = np.zeros(params.J)
    b[:i] = _cached_betas(params)[i - 1]
    return b


def b_matrix(params: NetworkParams) -> np.ndarray:
    """J x J matrix, row i-1 is b_i (lower triangular)"""
    return np.tril(np.ones((params.J, params.J))) * betas(params)[:, None]


def roots_table(params: NetworkParams) -> pd.DataFrame:
    rows = []
    for i, mu_i in enumerate(params.mu, start=1):
        result = beta_root(params.lam, mu_i, params.c)
        rows.append({"i": i, "mu_i": mu_i, "beta_i": result.beta, "residual": result.residual})
    return pd.DataFrame(rows, columns=["i", "mu_i", "beta_i", "residual"])
