"""
═══════════════════════════════════════════════════════════════════════════════
FILE: tandem_sim.py
DESCRIPTION: Event-driven simulation of the scaled tandem network, naive and
             importance-sampled Monte Carlo for E exp(-n c sigma), policy
             comparisons and the deterministic most-likely overflow path
═══════════════════════════════════════════════════════════════════════════════
"""

import json
import logging
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from tandem_config import Config
from tandem_dp import LatticeGrid
from tandem_errors import ConfigValidationError, DomainError
from tandem_hamiltonian import ell, optimal_m
from tandem_model import BoundaryClass, NetworkParams, as_state, in_domain
from tandem_roots import b_vector
from tandem_value import bottlenecks, value, value_at
from tandem_workers import chunk_ranges, parallel_map

logger = logging.getLogger("Tandem.Sim")

Control = Tuple[int, ...]
Lattice = Tuple[int, ...]


# ═══════════════════════════════════════════════════════════════════════════
# POLICIES
# ═══════════════════════════════════════════════════════════════════════════

class PolicyKind(Enum):
    SERVE_ALL = "serve-all"
    BOTTLENECK_ONLY = "bottleneck"
    IDLE_STATION = "idle-station"
    IDLE_ALL = "idle-all"
    CUSTOM = "custom"


@dataclass
class PolicySpec:
    """Stationary vertex policy on lattice states"""

    kind: PolicyKind
    station: Optional[int] = None
    default: Optional[Control] = None
    states: Dict[Lattice, Control] = field(default_factory=dict)
    _cache: Dict[Tuple[NetworkParams, int, Lattice], Control] = field(default_factory=dict, repr=False, compare=False)

    @property
    def label(self) -> str:
        if self.kind is PolicyKind.IDLE_STATION:
            return f"idle-{self.station}"
        if self.kind is PolicyKind.BOTTLENECK_ONLY:
            return "bottleneck-only"
        return self.kind.value

    def control(self, k: Lattice, params: NetworkParams, n: int) -> Control:
        key = (params, n, k)
        cached = self._cache.get(key)
        if cached is None:
            cached = self._compute(k, params, n)
            self._cache[key] = cached
        return cached

    def _compute(self, k: Lattice, params: NetworkParams, n: int) -> Control:
        J = params.J
        if self.kind is PolicyKind.SERVE_ALL:
            return (1,) * J
        if self.kind is PolicyKind.IDLE_ALL:
            return (0,) * J
        if self.kind is PolicyKind.IDLE_STATION:
            return tuple(0 if i == self.station else 1 for i in range(1, J + 1))
        if self.kind is PolicyKind.BOTTLENECK_ONLY:
            serving = bottlenecks(np.asarray(k, dtype=float) / n, params)
            return tuple(1 if i in serving else 0 for i in range(1, J + 1))
        control = self.states.get(k, self.default)
        if control is None:
            raise DomainError(f"custom policy has no control for state {k} and no default")
        if len(control) != J:
            raise ConfigValidationError("policy", f"control {control} has the wrong length for J={J}")
        return control

    def table(self, grid: LatticeGrid) -> np.ndarray:
        """Per-state control table in lattice order, for the DP policy evaluator"""
        return np.array(
            [self.control(tuple(int(v) for v in k), grid.params, grid.n) for k in grid.coords], dtype=np.uint8
        )

    # factories

    @classmethod
    def serve_all(cls) -> "PolicySpec":
        return cls(PolicyKind.SERVE_ALL)

    @classmethod
    def bottleneck_only(cls) -> "PolicySpec":
        return cls(PolicyKind.BOTTLENECK_ONLY)

    @classmethod
    def idle_station(cls, station: int) -> "PolicySpec":
        return cls(PolicyKind.IDLE_STATION, station=station)

    @classmethod
    def idle_all(cls) -> "PolicySpec":
        return cls(PolicyKind.IDLE_ALL)

    @classmethod
    def custom(cls, default: Optional[Sequence[int]], states: Dict[Lattice, Sequence[int]]) -> "PolicySpec":
        def vertex(u: Sequence[int], where: str) -> Control:
            if any(v not in (0, 1) for v in u):
                raise ConfigValidationError(where, f"vertex control expected, got {list(u)}")
            return tuple(int(v) for v in u)

        return cls(
            PolicyKind.CUSTOM,
            default=vertex(default, "policy.default") if default is not None else None,
            states={tuple(k): vertex(u, f"policy.states[{k}]") for k, u in states.items()},
        )

    @classmethod
    def from_document(cls, data: dict) -> "PolicySpec":
        """{"default": [u...], "states": {"k1,...,kJ": [u...]}} keyed by integer lattice coordinates"""
        if not isinstance(data, dict):
            raise ConfigValidationError("policy", "expected a JSON object")
        states = {}
        for key, u in (data.get("states") or {}).items():
            try:
                states[tuple(int(v) for v in str(key).split(","))] = u
            except ValueError:
                raise ConfigValidationError("policy.states", f"bad state key {key!r}")
        return cls.custom(data.get("default"), states)

    @classmethod
    def from_file(cls, path: str) -> "PolicySpec":
        try:
            with open(path, "r", encoding="utf-8") as f:
                return cls.from_document(json.load(f))
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigValidationError("policy", f"cannot read {path} ({e})") from e

    @classmethod
    def parse(cls, text: str) -> "PolicySpec":
        """CLI form: serve-all | bottleneck | idle-all | idle-<j> | custom@<file>"""
        if text == "serve-all":
            return cls.serve_all()
        if text in ("bottleneck", "bottleneck-only"):
            return cls.bottleneck_only()
        if text == "idle-all":
            return cls.idle_all()
        if text.startswith("idle-"):
            try:
                return cls.idle_station(int(text[len("idle-"):]))
            except ValueError:
                pass
        if text.startswith("custom@"):
            return cls.from_file(text[len("custom@"):])
        raise ConfigValidationError("policy", f"unknown policy {text!r}")


# ═══════════════════════════════════════════════════════════════════════════
# TRAJECTORIES
# ═══════════════════════════════════════════════════════════════════════════

@dataclass
class TrajectoryOutcome:
    sigma: float
    exit_face: BoundaryClass
    jumps: int
    log_weight: float = 0.0


@dataclass
class Estimate:
    mean: float
    stderr: float
    n_traj: int
    v_hat: float
    exit_face_counts: Dict[str, int] = field(default_factory=dict)
    method: str = "naive"
    policy: str = "serve-all"

    def to_dict(self) -> dict:
        return asdict(self)


class _UniformStream:
    """Counter-based uniforms for one trajectory, drawn in blocks"""

    def __init__(self, seed: int, index: int):
        self._rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, index])))
        self._block = np.empty(0)
        self._pos = 0

    def next(self) -> float:
        if self._pos >= len(self._block):
            self._block = self._rng.random(Config.RNG_BLOCK)
            self._pos = 0
        u = self._block[self._pos]
        self._pos += 1
        return float(u)


class BottleneckTilt:
    """Perturbed rates optimal_m(-b_j) with j the least bottleneck at the current state"""

    def __init__(self, params: NetworkParams, n: int):
        self.params = params
        self.n = n
        self._cache: Dict[Lattice, Tuple[float, np.ndarray]] = {}

    def rates(self, k: Lattice) -> Tuple[float, np.ndarray]:
        cached = self._cache.get(k)
        if cached is None:
            j = value(np.asarray(k, dtype=float) / self.n, self.params).bottleneck
            m = optimal_m(-b_vector(j, self.params), self.params)
            cached = (m.lam_bar, m.mu_bar)
            self._cache[k] = cached
        return cached


class IdentityTilt:
    """Nominal rates; turns the importance sampler into the naive one"""

    def __init__(self, params: NetworkParams):
        self._rates = (params.lam, params.mu_array)

    def rates(self, k: Lattice) -> Tuple[float, np.ndarray]:
        return self._rates


def _start_state(params: NetworkParams, n: int, x0: Optional[Sequence[float]]) -> Tuple[LatticeGrid, Lattice]:
    grid = LatticeGrid(params, n)
    k0 = grid.nearest(np.zeros(params.J) if x0 is None else x0)
    if k0 is None:
        raise DomainError(f"initial state {x0} is not in G^n for n={n}")
    return grid, k0


def _run_path(
    params: NetworkParams,
    grid: LatticeGrid,
    policy: PolicySpec,
    k0: Lattice,
    seed: int,
    index: int,
    tilt=None,
) -> TrajectoryOutcome:
    J, n = params.J, grid.n
    dims = grid.dims
    stream = _UniformStream(seed, index)
    k = list(k0)
    sigma = 0.0
    log_weight = 0.0
    jumps = 0
    mu = params.mu

    while True:
        state = tuple(k)
        u = policy.control(state, params, n)
        nominal = [params.lam] + [mu[i] if u[i] and k[i] >= 1 else 0.0 for i in range(J)]
        if tilt is None:
            sampling = nominal
        else:
            lam_bar, mu_bar = tilt.rates(state)
            sampling = [lam_bar] + [float(mu_bar[i]) if nominal[i + 1] > 0 else 0.0 for i in range(J)]

        total = sum(sampling)
        dt = -np.log(1.0 - stream.next()) / (n * total)
        sigma += dt

        target = stream.next() * total
        event = 0
        acc = sampling[0]
        while target >= acc and event < J:
            event += 1
            acc += sampling[event]
        while sampling[event] == 0.0:
            event -= 1
        jumps += 1

        if tilt is not None:
            log_weight += np.log(nominal[event] / sampling[event]) + n * (total - sum(nominal)) * dt

        if event == 0:
            if k[0] + 1 >= dims[0]:
                return TrajectoryOutcome(sigma, BoundaryClass.BOUNDARY_O, jumps, log_weight)
            k[0] += 1
        else:
            i = event - 1
            if i + 1 < J and k[i + 1] + 1 >= dims[i + 1]:
                return TrajectoryOutcome(sigma, BoundaryClass.BOUNDARY_C, jumps, log_weight)
            k[i] -= 1
            if i + 1 < J:
                k[i + 1] += 1


def simulate_path(
    params: NetworkParams,
    n: int,
    policy: PolicySpec,
    seed: int,
    x0: Optional[Sequence[float]] = None,
    index: int = 0,
) -> TrajectoryOutcome:
    """One trajectory from x0 (default: empty network) until the first jump out of G"""
    grid, k0 = _start_state(params, n, x0)
    return _run_path(params, grid, policy, k0, seed, index)


def _estimate(
    params: NetworkParams,
    n: int,
    policy: PolicySpec,
    x0: Optional[Sequence[float]],
    n_traj: int,
    seed: int,
    tilt,
    method: str,
) -> Estimate:
    if n_traj < 2:
        raise DomainError(f"need at least 2 trajectories, got {n_traj}")
    grid, k0 = _start_state(params, n, x0)

    def run_chunk(r: range) -> List[TrajectoryOutcome]:
        return [_run_path(params, grid, policy, k0, seed, i, tilt) for i in r]

    outcomes = [o for part in parallel_map(run_chunk, chunk_ranges(n_traj, Config.worker_count())) for o in part]
    sigma = np.array([o.sigma for o in outcomes])
    log_w = np.array([o.log_weight for o in outcomes])
    samples = np.exp(-n * params.c * sigma + log_w)

    mean = float(np.mean(samples))
    stderr = float(np.std(samples, ddof=1) / np.sqrt(n_traj))
    faces: Dict[str, int] = {}
    for o in outcomes:
        faces[o.exit_face.value] = faces.get(o.exit_face.value, 0) + 1

    v_hat = float(-np.log(mean) / n) if mean > 0 else float("inf")
    logger.info(f"✅ {method} estimate ({policy.label}, n={n}, {n_traj} paths): mean={mean:.6g} ± {stderr:.2g}")
    return Estimate(mean, stderr, n_traj, v_hat, faces, method, policy.label)


def mc_estimate(
    params: NetworkParams,
    n: int,
    policy: PolicySpec,
    x0: Optional[Sequence[float]] = None,
    n_traj: Optional[int] = None,
    seed: Optional[int] = None,
) -> Estimate:
    """Plain Monte Carlo estimate of E exp(-n c sigma)"""
    n_traj = n_traj or Config.MC_PATHS
    seed = Config.DEFAULT_SEED if seed is None else seed
    return _estimate(params, n, policy, x0, n_traj, seed, None, "naive")


def is_estimate(
    params: NetworkParams,
    n: int,
    policy: Optional[PolicySpec] = None,
    x0: Optional[Sequence[float]] = None,
    n_traj: Optional[int] = None,
    seed: Optional[int] = None,
    tilt: str = "bottleneck",
) -> Estimate:
    """Importance-sampled estimate under the bottleneck rate tilt.

    tilt="identity" keeps the nominal rates and reproduces mc_estimate
    exactly for the same seed.
    """
    policy = policy or PolicySpec.serve_all()
    n_traj = n_traj or Config.MC_PATHS
    seed = Config.DEFAULT_SEED if seed is None else seed
    if tilt == "bottleneck":
        change = BottleneckTilt(params, n)
    elif tilt == "identity":
        change = IdentityTilt(params)
    else:
        raise ConfigValidationError("tilt", f"unknown tilt {tilt!r}")
    return _estimate(params, n, policy, x0, n_traj, seed, change, "importance")


# ═══════════════════════════════════════════════════════════════════════════
# POLICY COMPARISON
# ═══════════════════════════════════════════════════════════════════════════

@dataclass
class PolicyComparison:
    table: pd.DataFrame
    idle_bottleneck: int
    bottleneck_gap: float
    idle_bottleneck_gap: float


def _v_interval(est: Estimate, n: int) -> Tuple[float, float]:
    hi_mean = est.mean + 2.0 * est.stderr
    lo_mean = est.mean - 2.0 * est.stderr
    v_low = float(-np.log(hi_mean) / n)
    v_high = float(-np.log(lo_mean) / n) if lo_mean > 0 else float("inf")
    return v_low, v_high


def policy_comparison(
    params: NetworkParams,
    n: int,
    x0: Optional[Sequence[float]] = None,
    n_traj: Optional[int] = None,
    seed: Optional[int] = None,
) -> PolicyComparison:
    """Serve-all, bottleneck-only and every single-station idling policy on a shared seed"""
    x0 = np.zeros(params.J) if x0 is None else as_state(x0, params.J)
    policies = [PolicySpec.serve_all(), PolicySpec.bottleneck_only()]
    policies += [PolicySpec.idle_station(j) for j in range(1, params.J + 1)]

    rows = []
    estimates = {}
    for policy in policies:
        est = mc_estimate(params, n, policy, x0, n_traj, seed)
        estimates[policy.label] = est
        v_low, v_high = _v_interval(est, n)
        rows.append({"policy": policy.label, "mean": est.mean, "stderr": est.stderr,
                     "v_hat": est.v_hat, "v_low": v_low, "v_high": v_high})

    idle_j = value(x0, params).bottleneck
    serve = estimates["serve-all"].v_hat
    comparison = PolicyComparison(
        table=pd.DataFrame(rows, columns=["policy", "mean", "stderr", "v_hat", "v_low", "v_high"]),
        idle_bottleneck=idle_j,
        bottleneck_gap=abs(serve - estimates["bottleneck-only"].v_hat),
        idle_bottleneck_gap=abs(serve - estimates[f"idle-{idle_j}"].v_hat),
    )
    logger.info(
        f"Policy gaps: bottleneck-only {comparison.bottleneck_gap:.4g}, "
        f"idle station {idle_j} {comparison.idle_bottleneck_gap:.4g}"
    )
    return comparison


# ═══════════════════════════════════════════════════════════════════════════
# MOST LIKELY OVERFLOW PATH
# ═══════════════════════════════════════════════════════════════════════════

@dataclass
class FluidPath:
    times: np.ndarray
    states: np.ndarray
    bottlenecks: List[int]
    cost: float
    value: float
    exit_face: BoundaryClass
    exit_time: float

    def to_dict(self) -> dict:
        return {
            "cost": self.cost,
            "V": self.value,
            "exit_face": self.exit_face.value,
            "exit_time": self.exit_time,
            "path": [[float(t)] + [float(v) for v in s] for t, s in zip(self.times, self.states)],
        }


def _reflected_controls(x: np.ndarray, lam_bar: float, mu_bar: np.ndarray, empty_tol: float) -> np.ndarray:
    """Serve-all, cut back at empty queues to the fraction their inflow supports"""
    u = np.ones(len(x))
    inflow = lam_bar
    for i in range(len(x)):
        if x[i] <= empty_tol and mu_bar[i] > inflow:
            u[i] = inflow / mu_bar[i]
        inflow = u[i] * mu_bar[i]
    return u


def fluid_path(
    params: NetworkParams,
    x0: Sequence[float],
    dt: float = 1e-3,
    max_steps: int = 1_000_000,
) -> FluidPath:
    """Euler path of the fluid dynamics under the bottleneck rate tilt, with its accumulated cost.

    The cost is the integral of c + rho(u, m) up to the exit from G.
    """
    x = as_state(x0, params.J).copy()
    if not in_domain(x, params):
        raise DomainError(f"fluid path must start in G, got x0={x.tolist()}")
    z = params.z_array
    mu = params.mu_array
    empty_tol = 1e-12 * float(np.max(z))

    times, states, regions = [0.0], [x.copy()], []
    t, cost = 0.0, 0.0
    face = BoundaryClass.OUTSIDE

    for _ in range(max_steps):
        j = value(x, params).bottleneck
        regions.append(j)
        m = optimal_m(-b_vector(j, params), params)
        u = _reflected_controls(x, m.lam_bar, m.mu_bar, empty_tol)

        v = np.zeros(params.J)
        v[0] = m.lam_bar
        flow = u * m.mu_bar
        v -= flow
        v[1:] += flow[:-1]
        rate = params.c + params.lam * ell(m.lam_bar / params.lam) + float(np.sum(u * mu * ell(m.mu_bar / mu)))

        step = dt
        face = BoundaryClass.OUTSIDE
        if v[0] > 0 and x[0] + v[0] * step >= z[0]:
            step = (z[0] - x[0]) / v[0]
            face = BoundaryClass.BOUNDARY_O
        for i in range(1, params.J):
            if v[i] > 0 and x[i] + v[i] * step > z[i]:
                step = (z[i] - x[i]) / v[i]
                face = BoundaryClass.BOUNDARY_C

        x = np.maximum(x + v * step, 0.0)
        t += step
        cost += rate * step
        times.append(t)
        states.append(x.copy())
        if face is not BoundaryClass.OUTSIDE:
            break
    else:
        raise DomainError(f"fluid path did not leave G within {max_steps} steps")

    limit = value_at(states[0], params)
    logger.info(f"Fluid path: exit via {face.value} at t={t:.4g}, cost {cost:.6g} vs V(x0) {limit:.6g}")
    return FluidPath(np.array(times), np.vstack(states), regions, float(cost), limit, face, t)
