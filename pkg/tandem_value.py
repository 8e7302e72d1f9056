"""
═══════════════════════════════════════════════════════════════════════════════
FILE: tandem_value.py
DESCRIPTION: Explicit value function V(x) = min_i b_i.(z - x), bottleneck sets
             and the multiclass single-server variant
═══════════════════════════════════════════════════════════════════════════════
"""

import logging
from dataclasses import dataclass
from typing import FrozenSet, List, Optional, Sequence

import numpy as np
import pandas as pd

from tandem_config import Config
from tandem_errors import ConfigValidationError, DomainError
from tandem_model import (
    BoundaryClass,
    NetworkParams,
    SingleServerParams,
    active_sets,
    as_state,
    classify,
    grid_points,
    in_closure,
)
from tandem_roots import alpha_root, b_vector, betas
from tandem_workers import chunk_ranges, parallel_map

logger = logging.getLogger("Tandem.Value")


@dataclass
class ValueBreakdown:
    """Per-index terms, their minimum, the minimizers and the bottleneck to serve"""

    terms: np.ndarray
    value: float
    argmin: FrozenSet[int]
    a_of_x: FrozenSet[int]
    bottleneck: int


def _argmin_set(terms: np.ndarray) -> FrozenSet[int]:
    best = float(np.min(terms))
    tol = Config.TIE_RTOL * (1.0 + abs(best))
    return frozenset(int(i) + 1 for i in np.flatnonzero(terms <= best + tol))


def _terms(x: np.ndarray, params: NetworkParams) -> np.ndarray:
    return betas(params) * np.cumsum(params.z_array - x)


def _closure_state(x: Sequence[float], params: NetworkParams) -> np.ndarray:
    arr = as_state(x, params.J)
    if not in_closure(arr, params):
        raise DomainError(f"x={arr.tolist()} lies outside the closed buffer rectangle")
    return arr


# ═══════════════════════════════════════════════════════════════════════════
# BOTTLENECK SETS
# ═══════════════════════════════════════════════════════════════════════════

def a_prime(params: NetworkParams) -> FrozenSet[int]:
    """Stations whose service rate is a running minimum: mu_k <= mu_l for all l < k"""
    mu = params.mu
    return frozenset(k for k in range(1, params.J + 1) if all(mu[k - 1] <= mu[l - 1] for l in range(1, k)))


def _filter_by_full_buffers(candidates: FrozenSet[int], full: FrozenSet[int], mu: Sequence[float], J: int) -> FrozenSet[int]:
    keep = set()
    for i in candidates:
        invalidated = False
        j = i + 1
        # walk the run of full buffers downstream of i
        while j <= J and j in full:
            if mu[i - 1] >= mu[j - 1]:
                invalidated = True
                break
            j += 1
        if not invalidated:
            keep.add(i)
    return frozenset(keep)


def a_of_x(x: Sequence[float], params: NetworkParams) -> FrozenSet[int]:
    """A'(x) minus every i for which some j > i has [i+1, j] inside B(x) and mu_i >= mu_j"""
    sets = active_sets(x, params)
    return _filter_by_full_buffers(a_prime(params), sets.B, params.mu, params.J)


def _a_of_closure(x: np.ndarray, params: NetworkParams) -> FrozenSet[int]:
    sets = active_sets(x, params, require_in_G=False)
    return _filter_by_full_buffers(a_prime(params), sets.B, params.mu, params.J)


# ═══════════════════════════════════════════════════════════════════════════
# VALUE FUNCTION
# ═══════════════════════════════════════════════════════════════════════════

def value(x: Sequence[float], params: NetworkParams) -> ValueBreakdown:
    arr = _closure_state(x, params)
    terms = _terms(arr, params)
    best = float(np.min(terms))
    argmin = _argmin_set(terms)
    a_set = _a_of_closure(arr, params)
    serving = argmin & a_set
    bottleneck = min(serving) if serving else min(argmin)
    return ValueBreakdown(terms=terms, value=best, argmin=argmin, a_of_x=a_set, bottleneck=bottleneck)


def value_at(x: Sequence[float], params: NetworkParams) -> float:
    """V(x) only, without the bookkeeping"""
    return float(np.min(_terms(_closure_state(x, params), params)))


def bottlenecks(x: Sequence[float], params: NetworkParams) -> FrozenSet[int]:
    """Stations to serve at x: minimizers of the value terms that survive the full-buffer filter"""
    breakdown = value(x, params)
    serving = breakdown.argmin & breakdown.a_of_x
    return serving if serving else breakdown.argmin


def restricted_min_check(x: Sequence[float], params: NetworkParams) -> bool:
    """True iff the minimum over all stations equals the minimum over A(x), compared exactly.

    Accepts the closed rectangle, the outflow face included.
    """
    arr = _closure_state(x, params)
    a_set = _a_of_closure(arr, params)
    if not a_set:
        return False
    terms = _terms(arr, params)
    restricted = terms[[i - 1 for i in sorted(a_set)]]
    return bool(np.min(terms) == np.min(restricted))


def gradient(x: Sequence[float], params: NetworkParams) -> Optional[np.ndarray]:
    """DV(x) = -b_j where j is the unique minimizer; None where V has a kink."""
    arr = as_state(x, params.J)
    if classify(arr, params) is not BoundaryClass.INTERIOR:
        raise DomainError(f"gradient requires an interior point, got x={arr.tolist()}")
    argmin = _argmin_set(_terms(arr, params))
    if len(argmin) > 1:
        return None
    (j,) = argmin
    return -b_vector(j, params)


def lipschitz_constant(params: NetworkParams) -> float:
    """max_i i * beta_i: bound on |V(x) - V(y)| per unit of max_j |x_j - y_j|"""
    return float(np.max(betas(params) * np.arange(1, params.J + 1)))


# ═══════════════════════════════════════════════════════════════════════════
# MULTICLASS SINGLE-SERVER SYSTEM
# ═══════════════════════════════════════════════════════════════════════════

def single_server_alphas(params: SingleServerParams) -> np.ndarray:
    return np.array([alpha_root(l, m, params.c).beta for l, m in zip(params.lam, params.mu)])


def _single_server_breakdown(x: Sequence[float], params: SingleServerParams) -> ValueBreakdown:
    arr = as_state(x, params.J)
    z = np.asarray(params.z)
    if np.any(arr < 0) or np.any(arr > z):
        raise DomainError(f"x={arr.tolist()} lies outside the class buffers")
    terms = single_server_alphas(params) * (z - arr)
    argmin = _argmin_set(terms)
    return ValueBreakdown(
        terms=terms,
        value=float(np.min(terms)),
        argmin=argmin,
        a_of_x=frozenset(range(1, params.J + 1)),
        bottleneck=min(argmin),
    )


def single_server_value(x: Sequence[float], params: SingleServerParams) -> ValueBreakdown:
    """V(x) = min_i alpha_i (z_i - x_i); the minimizing class is the one to serve.

    The formula is the value function only when c is large enough; no
    threshold is computed.
    """
    logger.warning("⚠️ Single-server value is valid only for sufficiently large c")
    return _single_server_breakdown(x, params)


# ═══════════════════════════════════════════════════════════════════════════
# REGION MAPS
# ═══════════════════════════════════════════════════════════════════════════

def _join(indices: FrozenSet[int]) -> str:
    return ";".join(str(i) for i in sorted(indices))


def _region_rows(points: np.ndarray, params: NetworkParams) -> List[dict]:
    rows = []
    for x in points:
        breakdown = value(x, params)
        row = {f"x{i + 1}": float(x[i]) for i in range(params.J)}
        row.update(V=breakdown.value, argmin=_join(breakdown.argmin), A_of_x=_join(breakdown.a_of_x))
        rows.append(row)
    return rows


def region_map(params: NetworkParams, resolution: int) -> pd.DataFrame:
    """Grid of G with V, the minimizing stations and A(x); ties show up as multi-index cells"""
    points = grid_points(params, resolution)
    chunks = chunk_ranges(len(points), Config.worker_count())
    parts = parallel_map(lambda r: _region_rows(points[r.start:r.stop], params), chunks)
    columns = [f"x{i + 1}" for i in range(params.J)] + ["V", "argmin", "A_of_x"]
    frame = pd.DataFrame([row for part in parts for row in part], columns=columns)
    logger.info(f"✅ Region map: {len(frame)} points at resolution {resolution}")
    return frame


def single_server_region_map(params: SingleServerParams, resolution: int) -> pd.DataFrame:
    """Priority class (argmin) over a uniform grid of the class buffers"""
    if resolution < 2:
        raise ConfigValidationError("resolution", f"must be >= 2, got {resolution}")
    logger.warning("⚠️ Single-server priority regions are valid only for sufficiently large c")
    axes = [np.linspace(0.0, zi, resolution) for zi in params.z]
    mesh = np.meshgrid(*axes, indexing="ij")
    points = np.stack([m.reshape(-1) for m in mesh], axis=1)

    rows = []
    for x in points:
        breakdown = _single_server_breakdown(x, params)
        row = {f"x{i + 1}": float(x[i]) for i in range(params.J)}
        row.update(V=breakdown.value, priority=_join(breakdown.argmin))
        rows.append(row)
    columns = [f"x{i + 1}" for i in range(params.J)] + ["V", "priority"]
    return pd.DataFrame(rows, columns=columns)
