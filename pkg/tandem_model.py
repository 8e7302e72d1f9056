"""
═══════════════════════════════════════════════════════════════════════════════
FILE: tandem_model.py
DESCRIPTION: Problem instances, geometry of the buffer rectangle G, boundary
             classification and the service directions of the tandem network
═══════════════════════════════════════════════════════════════════════════════

The network has J single-server queues in series. Customers arrive at queue 1
with rate lambda, queue i serves with rate mu_i and sends the customer to
queue i+1 (the last queue sends it out of the system). The scaled state lives
in

    G = {x : 0 <= x_1 < z_1, 0 <= x_i <= z_i for i >= 2}

and leaving G is a buffer overflow. Station indices in the public API are
1-based, matching the usual queueing notation; arrays are 0-based inside.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, FrozenSet, Iterable, Sequence, Tuple

import numpy as np

from tandem_errors import ConfigValidationError, DimensionError, DomainError

logger = logging.getLogger("Tandem.Model")

REQUIRED_FIELDS = ("J", "lambda", "mu", "z", "c")


# ═══════════════════════════════════════════════════════════════════════════
# PARAMETER VALIDATION HELPERS
# ═══════════════════════════════════════════════════════════════════════════

def _require(data: Dict[str, Any], name: str) -> Any:
    if name not in data or data[name] is None:
        raise ConfigValidationError(name, "missing required field")
    return data[name]


def _positive_int(value: Any, name: str) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
        if isinstance(value, float) and value.is_integer():
            value = int(value)
        else:
            raise ConfigValidationError(name, f"expected a positive integer, got {value!r}")
    if value < 1:
        raise ConfigValidationError(name, f"must be >= 1, got {value}")
    return int(value)


def _positive_float(value: Any, name: str) -> float:
    try:
        number = float(value)
    except (TypeError, ValueError):
        raise ConfigValidationError(name, f"expected a number, got {value!r}")
    if not np.isfinite(number) or number <= 0:
        raise ConfigValidationError(name, f"must be a positive finite number, got {value!r}")
    return number


def _positive_vector(value: Any, name: str, length: int) -> Tuple[float, ...]:
    if isinstance(value, (str, bytes)) or not isinstance(value, Iterable):
        raise ConfigValidationError(name, f"expected a list of {length} numbers")
    items = list(value)
    if len(items) != length:
        raise ConfigValidationError(name, f"expected {length} entries (J={length}), got {len(items)}")
    return tuple(_positive_float(v, f"{name}[{i + 1}]") for i, v in enumerate(items))


# ═══════════════════════════════════════════════════════════════════════════
# PROBLEM INSTANCES
# ═══════════════════════════════════════════════════════════════════════════

@dataclass(frozen=True)
class NetworkParams:
    """Tandem instance: J queues, arrival rate lam, service rates mu, buffers z, risk parameter c.

    Routing is fixed to tandem (queue i feeds i+1). Instances are immutable
    and hashable so per-instance quantities can be cached.
    """

    J: int
    lam: float
    mu: Tuple[float, ...]
    z: Tuple[float, ...]
    c: float

    def __post_init__(self):
        J = _positive_int(self.J, "J")
        object.__setattr__(self, "J", J)
        object.__setattr__(self, "lam", _positive_float(self.lam, "lambda"))
        object.__setattr__(self, "mu", _positive_vector(self.mu, "mu", J))
        object.__setattr__(self, "z", _positive_vector(self.z, "z", J))
        object.__setattr__(self, "c", _positive_float(self.c, "c"))

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "NetworkParams":
        for name in REQUIRED_FIELDS:
            _require(data, name)
        if "routing" in data and data["routing"] not in (None, "tandem"):
            raise ConfigValidationError("routing", "only tandem routing is supported")
        return cls(J=data["J"], lam=data["lambda"], mu=data["mu"], z=data["z"], c=data["c"])

    def to_dict(self) -> Dict[str, Any]:
        return {"J": self.J, "lambda": self.lam, "mu": list(self.mu), "z": list(self.z), "c": self.c}

    @property
    def mu_array(self) -> np.ndarray:
        return np.asarray(self.mu, dtype=float)

    @property
    def z_array(self) -> np.ndarray:
        return np.asarray(self.z, dtype=float)

    @property
    def total_rate(self) -> float:
        """lambda + sum(mu): the largest total event rate of the network"""
        return self.lam + sum(self.mu)


@dataclass(frozen=True)
class SingleServerParams:
    """Multiclass single-server system: one server shared by J classes, each with its own buffer"""

    J: int
    lam: Tuple[float, ...]
    mu: Tuple[float, ...]
    z: Tuple[float, ...]
    c: float

    def __post_init__(self):
        J = _positive_int(self.J, "J")
        object.__setattr__(self, "J", J)
        object.__setattr__(self, "lam", _positive_vector(self.lam, "lambda", J))
        object.__setattr__(self, "mu", _positive_vector(self.mu, "mu", J))
        object.__setattr__(self, "z", _positive_vector(self.z, "z", J))
        object.__setattr__(self, "c", _positive_float(self.c, "c"))

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SingleServerParams":
        for name in REQUIRED_FIELDS:
            _require(data, name)
        return cls(J=data["J"], lam=data["lambda"], mu=data["mu"], z=data["z"], c=data["c"])

    def to_dict(self) -> Dict[str, Any]:
        return {"J": self.J, "lambda": list(self.lam), "mu": list(self.mu), "z": list(self.z), "c": self.c}


# ═══════════════════════════════════════════════════════════════════════════
# GEOMETRY
# ═══════════════════════════════════════════════════════════════════════════

class BoundaryClass(Enum):
    INTERIOR = "interior"
    BOUNDARY_PLUS = "boundary-plus"
    BOUNDARY_C = "boundary-c"
    BOUNDARY_O = "boundary-o"
    OUTSIDE = "outside"


@dataclass(frozen=True)
class ActiveSets:
    """Empty queues I, full buffers B and the rest O (1-based station indices)"""

    I: FrozenSet[int]
    B: FrozenSet[int]
    O: FrozenSet[int]

    def label(self, i: int) -> str:
        if i in self.I:
            return "I"
        if i in self.B:
            return "B"
        return "O"


def as_state(x: Sequence[float], J: int, field: str = "x") -> np.ndarray:
    """Coerce x to a float vector of length J"""
    arr = np.asarray(x, dtype=float).reshape(-1)
    if arr.shape[0] != J:
        raise DimensionError(J, arr.shape[0], field)
    return arr


def gamma(i: int, J: int) -> np.ndarray:
    """Service direction at station i: the state moves by -gamma_i when station i completes a job."""
    if not 1 <= i <= J:
        raise DomainError(f"station index {i} out of range [1, {J}]")
    g = np.zeros(J, dtype=int)
    g[i - 1] = 1
    if i < J:
        g[i] = -1
    return g


def gamma_matrix(J: int) -> np.ndarray:
    """J x J integer matrix whose row i-1 is gamma_i"""
    return np.vstack([gamma(i, J) for i in range(1, J + 1)])


def in_closure(x: Sequence[float], params: NetworkParams) -> bool:
    arr = as_state(x, params.J)
    return bool(np.all(arr >= 0) and np.all(arr <= params.z_array))


def in_domain(x: Sequence[float], params: NetworkParams) -> bool:
    arr = as_state(x, params.J)
    return in_closure(arr, params) and arr[0] < params.z[0]


def classify(x: Sequence[float], params: NetworkParams) -> BoundaryClass:
    """Tag x as interior, one of the three boundary types, or outside.

    Equality on coordinates is exact: callers pass lattice points or exact
    buffer values.
    """
    arr = as_state(x, params.J)
    z = params.z_array

    if not in_closure(arr, params):
        return BoundaryClass.OUTSIDE
    if arr[0] == z[0]:
        return BoundaryClass.BOUNDARY_O
    if np.any(arr[1:] == z[1:]):
        return BoundaryClass.BOUNDARY_C
    if np.any(arr == 0):
        return BoundaryClass.BOUNDARY_PLUS
    return BoundaryClass.INTERIOR


def active_sets(x: Sequence[float], params: NetworkParams, require_in_G: bool = True) -> ActiveSets:
    arr = as_state(x, params.J)
    if not in_closure(arr, params):
        raise DomainError(f"x={arr.tolist()} lies outside the closed buffer rectangle")
    if require_in_G and arr[0] == params.z[0]:
        raise DomainError(f"x={arr.tolist()} lies on the outflow face x_1 = z_1")

    z = params.z_array
    empty = {i + 1 for i in range(params.J) if arr[i] == 0}
    full = {i + 1 for i in range(params.J) if arr[i] == z[i]} - empty
    other = set(range(1, params.J + 1)) - empty - full
    return ActiveSets(I=frozenset(empty), B=frozenset(full), O=frozenset(other))


def grid_points(params: NetworkParams, resolution: int, include_outflow: bool = False) -> np.ndarray:
    """Uniform grid with `resolution` points per axis, shape (N, J).

    Axis 1 drops the outflow face x_1 = z_1 unless include_outflow is set.
    Endpoints 0 and z_i are hit exactly.
    """
    if resolution < 2:
        raise ConfigValidationError("resolution", f"must be >= 2, got {resolution}")
    axes = []
    for i, zi in enumerate(params.z):
        axis = np.linspace(0.0, zi, resolution)
        if i == 0 and not include_outflow:
            axis = axis[:-1]
        axes.append(axis)
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.reshape(-1) for m in mesh], axis=1)
