"""
═══════════════════════════════════════════════════════════════════════════════
FILE: tandem_dp.py
DESCRIPTION: Pre-limit risk-sensitive dynamic program on the scaled lattice.
             Value iteration for W^n(x) = inf E exp(-n c sigma_n) and
             V^n = -(1/n) log W^n
═══════════════════════════════════════════════════════════════════════════════

Conditioning on the first jump of the controlled chain gives, for a fixed
vertex control u,

    W(x) = [lam W(x + e_1/n) + sum_i u_i mu_i 1{x_i > 0} W(x - gamma_i/n)]
           / (c + lam + sum_i u_i mu_i 1{x_i > 0})

with W = 1 once the chain leaves G. The n-factor of the rates cancels in
the ratio.
"""

import logging
import time
from dataclasses import dataclass, field
from itertools import product
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from tandem_config import Config
from tandem_errors import DomainError, IterationLimitError
from tandem_model import NetworkParams, as_state
from tandem_roots import betas, beta_root
from tandem_value import value_at

logger = logging.getLogger("Tandem.DP")

EXIT = None
LATTICE_SLACK = 1e-9

Control = Tuple[int, ...]
PolicyLike = Union[np.ndarray, Callable[[Tuple[int, ...]], Sequence[int]]]


# ═══════════════════════════════════════════════════════════════════════════
# LATTICE
# ═══════════════════════════════════════════════════════════════════════════

class LatticeGrid:
    """States k/n of G^n, stored as integer coordinates k in row-major order"""

    def __init__(self, params: NetworkParams, n: int):
        if n < 1:
            raise DomainError(f"scale n must be >= 1, got {n}")
        self.params = params
        self.n = int(n)
        self.dims = self._axis_counts(params, self.n)
        self.size = int(np.prod(self.dims))
        self.coords = np.indices(self.dims).reshape(params.J, -1).T
        self._build_tables()

    @staticmethod
    def _axis_counts(params: NetworkParams, n: int) -> Tuple[int, ...]:
        counts = []
        for i, zi in enumerate(params.z):
            scaled = n * zi
            if i == 0:
                # strict inequality x_1 < z_1
                nearest = round(scaled)
                counts.append(int(nearest) if abs(scaled - nearest) <= LATTICE_SLACK else int(np.floor(scaled)) + 1)
            else:
                counts.append(int(np.floor(scaled + LATTICE_SLACK)) + 1)
        return tuple(counts)

    def _build_tables(self):
        """Target index per event, with index `size` standing for EXIT"""
        J, k = self.params.J, self.coords
        arrivals = k.copy()
        arrivals[:, 0] += 1
        self.arrival_target = self._targets(arrivals)

        self.service_target = np.empty((J, self.size), dtype=np.int64)
        self.service_active = np.empty((J, self.size), dtype=bool)
        for i in range(J):
            moved = k.copy()
            moved[:, i] -= 1
            if i + 1 < J:
                moved[:, i + 1] += 1
            active = k[:, i] >= 1
            moved[~active] = k[~active]
            self.service_target[i] = np.where(active, self._targets(moved), np.arange(self.size))
            self.service_active[i] = active

    def _targets(self, k: np.ndarray) -> np.ndarray:
        inside = np.all((k >= 0) & (k < np.asarray(self.dims)), axis=1)
        targets = np.full(len(k), self.size, dtype=np.int64)
        targets[inside] = np.ravel_multi_index(tuple(k[inside].T), self.dims)
        return targets

    def index_of(self, k: Sequence[int]) -> int:
        k = tuple(int(v) for v in k)
        if len(k) != self.params.J or any(not 0 <= v < d for v, d in zip(k, self.dims)):
            raise DomainError(f"{k} is not a lattice point of G^n (dims {self.dims})")
        return int(np.ravel_multi_index(k, self.dims))

    def state(self, idx: int) -> np.ndarray:
        return self.coords[idx] / self.n

    def points(self) -> np.ndarray:
        return self.coords / self.n

    def nearest(self, x: Sequence[float]) -> Optional[Tuple[int, ...]]:
        """Nearest lattice coordinates to x, or None when that point is not in G^n"""
        arr = as_state(x, self.params.J)
        k = tuple(int(v) for v in np.rint(arr * self.n))
        if any(not 0 <= v < d for v, d in zip(k, self.dims)):
            return None
        return k


def vertex_controls(J: int) -> List[Control]:
    """All 2^J vertex controls, starting from serve-all"""
    return list(product((1, 0), repeat=J))


def transitions(k: Sequence[int], u: Sequence[int], grid: LatticeGrid) -> List[Tuple[Optional[Tuple[int, ...]], float]]:
    """Outgoing edges of lattice state k under vertex control u: (target or EXIT, unscaled rate)"""
    params = grid.params
    idx = grid.index_of(k)
    if len(u) != params.J or any(v not in (0, 1) for v in u):
        raise DomainError(f"vertex control expected, got {tuple(u)}")
    u = tuple(int(v) for v in u)

    def target(t: int) -> Optional[Tuple[int, ...]]:
        return EXIT if t == grid.size else tuple(int(v) for v in grid.coords[t])

    edges = [(target(grid.arrival_target[idx]), params.lam)]
    for i in range(params.J):
        if u[i] and grid.service_active[i, idx]:
            edges.append((target(grid.service_target[i, idx]), params.mu[i]))
    return edges


# ═══════════════════════════════════════════════════════════════════════════
# BELLMAN OPERATOR
# ═══════════════════════════════════════════════════════════════════════════

def contraction_factor(params: NetworkParams) -> float:
    return params.total_rate / (params.c + params.total_rate)


def _log_ratio(logW_ext: np.ndarray, grid: LatticeGrid, u: np.ndarray) -> np.ndarray:
    """log of the jump-chain ratio for the per-state control rows u (shape (size, J)).

    The numerator is accumulated with logaddexp, so tables far below the
    smallest double (n V^n past ~700) stay finite.
    """
    params = grid.params
    log_num = np.log(params.lam) + logW_ext[grid.arrival_target]
    denominator = np.full(grid.size, params.c + params.lam)
    for i in range(params.J):
        rate = params.mu[i] * np.asarray(u[:, i], dtype=float) * grid.service_active[i]
        active = rate > 0
        term = np.full(grid.size, -np.inf)
        term[active] = np.log(rate[active]) + logW_ext[grid.service_target[i]][active]
        log_num = np.logaddexp(log_num, term)
        denominator = denominator + rate
    return log_num - np.log(denominator)


def log_bellman_update(logW: np.ndarray, grid: LatticeGrid) -> Tuple[np.ndarray, np.ndarray]:
    """bellman_update on log W; EXIT carries log 1 = 0"""
    logW_ext = np.append(logW, 0.0)
    vertices = np.array(vertex_controls(grid.params.J), dtype=np.uint8)
    ratios = np.stack([_log_ratio(logW_ext, grid, np.broadcast_to(v, (grid.size, len(v)))) for v in vertices])
    best = np.argmin(ratios, axis=0)
    return ratios[best, np.arange(grid.size)], vertices[best]


def bellman_update(W: np.ndarray, grid: LatticeGrid) -> Tuple[np.ndarray, np.ndarray]:
    """One synchronous sweep: pointwise minimum of the ratio over vertex controls.

    Returns the new table and the minimizing control per state. Ties go to
    the control listed first, i.e. towards serving.
    """
    logW, policy = log_bellman_update(np.log(np.asarray(W, dtype=float)), grid)
    return np.exp(logW), policy


def policy_update(W: np.ndarray, grid: LatticeGrid, policy: np.ndarray) -> np.ndarray:
    """The ratio under fixed per-state controls; fractional rows in [0, 1]^J are accepted"""
    return np.exp(_log_ratio(np.append(np.log(np.asarray(W, dtype=float)), 0.0), grid, policy))


# ═══════════════════════════════════════════════════════════════════════════
# SOLVER
# ═══════════════════════════════════════════════════════════════════════════

@dataclass
class DPResult:
    grid: LatticeGrid
    W: np.ndarray
    Vn: np.ndarray
    policy: np.ndarray
    iterations: int
    final_delta: float
    elapsed: float = 0.0
    history: List[float] = field(default_factory=list)

    def value_at(self, x: Sequence[float]) -> float:
        """V^n at the lattice point nearest to x (0 if that point has already left G)"""
        k = self.grid.nearest(x)
        return 0.0 if k is None else float(self.Vn[self.grid.index_of(k)])

    def control_at(self, k: Sequence[int]) -> Tuple[int, ...]:
        return tuple(int(v) for v in self.policy[self.grid.index_of(k)])

    def table(self) -> pd.DataFrame:
        J = self.grid.params.J
        frame = pd.DataFrame(self.grid.points(), columns=[f"x{i + 1}" for i in range(J)])
        frame["W"] = self.W
        frame["Vn"] = self.Vn
        for i in range(J):
            frame[f"u{i + 1}"] = self.policy[:, i].astype(int)
        return frame


def _log_warm_start(grid: LatticeGrid) -> np.ndarray:
    params = grid.params
    terms = betas(params) * np.cumsum(params.z_array - grid.points(), axis=1)
    return -grid.n * terms.min(axis=1)


def warm_start(grid: LatticeGrid) -> np.ndarray:
    """exp(-n V(x)) from the explicit limit value function"""
    return np.exp(_log_warm_start(grid))


def _result(grid: LatticeGrid, logW: np.ndarray, policy: np.ndarray, iterations: int, delta: float,
            started: float, history: List[float]) -> DPResult:
    # W underflows to 0 where n V^n passes the double range; Vn comes from log W
    return DPResult(grid, np.exp(logW), -logW / grid.n, policy, iterations, delta, time.time() - started, history)


def _iterate(
    grid: LatticeGrid,
    step: Callable[[np.ndarray], Tuple[np.ndarray, np.ndarray]],
    logW0: np.ndarray,
    tol: float,
    max_iter: int,
) -> DPResult:
    """Sweeps on log W until the relative change max |W' - W| / W' drops below the threshold"""
    rho_bar = contraction_factor(grid.params)
    threshold = tol * (1.0 - rho_bar) / rho_bar
    logW = logW0.copy()
    started = time.time()
    history = []

    for iteration in range(1, max_iter + 1):
        logW_new, policy = step(logW)
        # relative change; bounds the absolute change since 0 < W <= 1
        delta = float(np.max(np.abs(np.expm1(logW - logW_new))))
        logW = logW_new
        history.append(delta)
        if delta <= threshold:
            return _result(grid, logW, policy, iteration, delta, started, history)

    raise IterationLimitError(max_iter, delta, partial=_result(grid, logW, policy, max_iter, delta, started, history))


def solve(
    params: NetworkParams,
    n: int,
    tol: Optional[float] = None,
    max_iter: Optional[int] = None,
    warm: bool = False,
) -> DPResult:
    """Value iteration to the fixed point, sup-norm error at most tol"""
    tol = tol or Config.DP_TOL
    max_iter = max_iter or Config.DP_MAX_ITER
    grid = LatticeGrid(params, n)
    logW0 = _log_warm_start(grid) if warm else np.zeros(grid.size)

    logger.debug(f"Solving DP n={n}: {grid.size} states, warm={warm}")
    result = _iterate(grid, lambda logW: log_bellman_update(logW, grid), logW0, tol, max_iter)
    logger.info(f"✅ DP n={n} converged in {result.iterations} iterations ({result.elapsed:.2f}s)")
    return result


def policy_table(grid: LatticeGrid, policy: PolicyLike) -> np.ndarray:
    """Normalize a state -> control mapping to a (size, J) uint8 table"""
    if callable(policy):
        table = np.array([tuple(policy(tuple(int(v) for v in k))) for k in grid.coords], dtype=np.uint8)
    else:
        table = np.asarray(policy, dtype=np.uint8)
    if table.shape != (grid.size, grid.params.J):
        raise DomainError(f"policy table must have shape {(grid.size, grid.params.J)}, got {table.shape}")
    return table


def evaluate_policy(
    params: NetworkParams,
    n: int,
    policy: PolicyLike,
    tol: Optional[float] = None,
    max_iter: Optional[int] = None,
) -> DPResult:
    """W of a stationary deterministic vertex policy (the same ratio, without the minimum)"""
    tol = tol or Config.DP_TOL
    max_iter = max_iter or Config.DP_MAX_ITER
    grid = LatticeGrid(params, n)
    table = policy_table(grid, policy)
    return _iterate(
        grid, lambda logW: (_log_ratio(np.append(logW, 0.0), grid, table), table), np.zeros(grid.size), tol, max_iter
    )


def single_queue_closed_form(params: NetworkParams, n: int, k: int = 0) -> float:
    """W^n(k/n) for one queue served whenever nonempty.

    W(k) = (a y+^k + b y-^k) / (a y+^N + b y-^N), y+- the roots of
    lam y^2 - (c + lam + mu) y + mu, a = lam y- - c - lam, b = c + lam - lam y+,
    N the number of lattice states.
    """
    if params.J != 1:
        raise DomainError("closed form is for a single queue")
    N = LatticeGrid._axis_counts(params, n)[0]
    if not 0 <= k < N:
        raise DomainError(f"k={k} outside 0..{N - 1}")
    lam, mu, c = params.lam, params.mu[0], params.c
    y_plus = np.exp(beta_root(lam, mu, c).beta)
    y_minus = mu / (lam * y_plus)
    a = lam * y_minus - c - lam
    b = c + lam - lam * y_plus
    # divide through by y+^N to keep the powers bounded
    num = a * y_plus ** (k - N) + b * y_minus ** k * y_plus ** (-N)
    den = a + b * (y_minus / y_plus) ** N
    return float(num / den)


def convergence_study(params: NetworkParams, n_list: Sequence[int], x0: Sequence[float]) -> pd.DataFrame:
    """V^n at the lattice point nearest x0 against V(x0) for each n"""
    limit = value_at(x0, params)
    rows = []
    for n in n_list:
        grid = LatticeGrid(params, n)
        k = grid.nearest(x0)
        if k is None:
            vn = 0.0
        else:
            result = solve(params, n, warm=True)
            vn = float(result.Vn[result.grid.index_of(k)])
        rows.append({"n": int(n), "Vn": vn, "V": limit, "gap": abs(vn - limit)})
        logger.info(f"n={n}: V^n={vn:.8f} V={limit:.8f}")
    return pd.DataFrame(rows, columns=["n", "Vn", "V", "gap"])
