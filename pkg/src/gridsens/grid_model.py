"""Linearized swing dynamics of a power grid and line-outage directions.

Pipeline: DC Laplacian (branch weight 1/x) -> Kron reduction onto the
generator buses -> continuous swing model with state ``[delta; omega]``

    d/dt delta = omega
    M d/dt omega = -L_red delta - D omega

-> forward-Euler map ``A_d = I + A_c dt``.

A uniform shift of all rotor angles is an equilibrium of the swing model, so
``A_d`` always has the eigenvalue 1 on ``r = [1; 0]``.  Line flows see only
angle differences, so every outage row annihilates ``r``.  When ``M^-1 D`` is
a multiple of the identity the mean frequency ``[0; 1]`` also decouples and
only drives the mean angle.  The span of these directions is invariant under
``A_d`` and invisible to every outage row, so the analysis runs on the
quotient ``z = U^T x`` with ``U`` an orthonormal basis of its complement.
Output energies ``|C A^k B|`` and ``|C|`` are unchanged by the projection.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.sparse.csgraph import connected_components

from .matpower import GridCase
from .matrix_core import DimensionError, StabilityError, ValidationError, eigenvalues
from .network import AssembledNetwork, network_from_directions

__all__ = [
    "KronReductionError",
    "DegenerateDirectionError",
    "DynamicsConfig",
    "ReducedModel",
    "load_config",
    "build_laplacian",
    "kron_reduce",
    "outage_vector",
    "swing_state_matrix",
    "discretize",
    "helmert_basis",
    "reduce_case",
    "find_branch",
    "outage_direction",
    "build_grid_network",
]


class KronReductionError(ValueError):
    pass


class DegenerateDirectionError(ValueError):
    pass


@dataclass(frozen=True)
class DynamicsConfig:
    delta_t: float = 0.01
    inertia: float | dict = 1.0
    damping: float | dict = 1.0
    contingencies: tuple = ()
    sigma: float = 1.0

    def __post_init__(self):
        if not (isinstance(self.delta_t, (int, float)) and self.delta_t > 0):
            raise ValidationError(f"delta_t must be positive, got {self.delta_t!r}")
        object.__setattr__(self, "contingencies", tuple(self.contingencies))

    @classmethod
    def from_dict(cls, data: dict) -> "DynamicsConfig":
        known = {"delta_t", "inertia", "damping", "contingencies", "sigma"}
        unknown = set(data) - known
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def digest(self) -> str:
        blob = json.dumps({"delta_t": self.delta_t, "inertia": self.inertia,
                           "damping": self.damping, "contingencies": list(self.contingencies),
                           "sigma": self.sigma}, sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()


def load_config(path) -> DynamicsConfig:
    data = json.loads(Path(path).read_text())
    if not isinstance(data, dict):
        raise ValidationError("config must be a JSON object")
    return DynamicsConfig.from_dict(data)


def build_laplacian(case: GridCase) -> np.ndarray:
    """Weighted Laplacian with branch susceptances 1/x, buses in case order."""
    pos = {b: i for i, b in enumerate(case.bus_ids)}
    L = np.zeros((len(pos), len(pos)))
    for k, br in enumerate(case.branches):
        if not br.x > 0:
            raise ValidationError(f"branch {k + 1} ({br.from_bus}-{br.to_bus}) has nonpositive reactance {br.x}")
        i, j, w = pos[br.from_bus], pos[br.to_bus], 1.0 / br.x
        L[i, i] += w
        L[j, j] += w
        L[i, j] -= w
        L[j, i] -= w
    return L


def _isolated_load_islands(L, gen_idx, load_idx) -> list:
    Lll = L[np.ix_(load_idx, load_idx)]
    Llg = L[np.ix_(load_idx, gen_idx)]
    ncomp, labels = connected_components(Lll != 0, directed=False)
    out = []
    for c in range(ncomp):
        members = np.flatnonzero(labels == c)
        if not np.any(Llg[members]):
            out.append([int(load_idx[m]) for m in members])
    return out


def kron_reduce(L, gen_idx, load_idx) -> np.ndarray:
    """Schur complement ``L_gg - L_gl L_ll^{-1} L_lg`` (positions, not bus ids)."""
    L = np.asarray(L, dtype=float)
    gen_idx = np.asarray(gen_idx, dtype=int)
    load_idx = np.asarray(load_idx, dtype=int)
    Lgg = L[np.ix_(gen_idx, gen_idx)]
    if load_idx.size == 0:
        return Lgg.copy()
    islands = _isolated_load_islands(L, gen_idx, load_idx)
    if islands:
        raise KronReductionError(f"load buses at positions {islands[0]} form an island with no generator")
    Lgl = L[np.ix_(gen_idx, load_idx)]
    Lll = L[np.ix_(load_idx, load_idx)]
    red = Lgg - Lgl @ np.linalg.solve(Lll, Lgl.T)
    return 0.5 * (red + red.T)


def outage_vector(L, gen_idx, load_idx, i: int, j: int) -> np.ndarray:
    """``v`` with ``d L_red / d b_ij = v v^T`` for the branch between
    positions ``i`` and ``j``."""
    u = np.zeros(L.shape[0])
    u[i], u[j] = 1.0, -1.0
    ug = u[np.asarray(gen_idx, dtype=int)]
    if len(load_idx) == 0:
        return ug
    load_idx = np.asarray(load_idx, dtype=int)
    Lgl = L[np.ix_(gen_idx, load_idx)]
    Lll = L[np.ix_(load_idx, load_idx)]
    return ug - Lgl @ np.linalg.solve(Lll, u[load_idx])


def _diag(values, size: int, what: str) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    if v.ndim == 2:
        if np.any(v - np.diag(np.diag(v))):
            raise ValidationError(f"{what} must be diagonal")
        v = np.diag(v)
    if v.ndim > 1 or (v.ndim == 1 and v.size != size):
        raise DimensionError(f"{what} has {v.size} entries, expected {size}")
    v = np.broadcast_to(v, (size,)).astype(float)
    if np.any(v <= 0) or not np.all(np.isfinite(v)):
        raise ValidationError(f"{what} entries must be positive")
    return v


def swing_state_matrix(L_red, M, D) -> np.ndarray:
    """Continuous-time ``[[0, I], [-M^-1 L_red, -M^-1 D]]``.

    ``M`` and ``D`` may be diagonal matrices, vectors of the diagonal, or
    scalars.
    """
    L_red = np.asarray(L_red, dtype=float)
    if L_red.ndim != 2 or L_red.shape[0] != L_red.shape[1]:
        raise ValidationError("L_red must be square")
    g = L_red.shape[0]
    m = _diag(M, g, "inertia")
    d = _diag(D, g, "damping")
    A = np.zeros((2 * g, 2 * g))
    A[:g, g:] = np.eye(g)
    A[g:, :g] = -L_red / m[:, None]
    A[g:, g:] = -np.diag(d / m)
    return A


def discretize(A_c, delta_t: float) -> np.ndarray:
    if not delta_t > 0:
        raise ValidationError(f"delta_t must be positive, got {delta_t}")
    A_c = np.asarray(A_c, dtype=float)
    return np.eye(A_c.shape[0]) + A_c * delta_t


def helmert_basis(g: int) -> np.ndarray:
    """Orthonormal ``g x (g-1)`` basis of the vectors summing to zero."""
    H = np.zeros((g, g - 1))
    for k in range(1, g):
        H[:k, k - 1] = 1.0
        H[k, k - 1] = -float(k)
        H[:, k - 1] /= math.sqrt(k * (k + 1))
    return H


@dataclass(frozen=True)
class ReducedModel:
    bus_ids: tuple
    L: np.ndarray
    gen_idx: tuple
    load_idx: tuple
    L_red: np.ndarray
    M: np.ndarray
    D: np.ndarray
    A_c: np.ndarray
    A_d: np.ndarray
    delta_t: float
    basis: np.ndarray = field(repr=False)

    @property
    def gen_buses(self) -> tuple:
        return tuple(self.bus_ids[i] for i in self.gen_idx)

    @property
    def load_buses(self) -> tuple:
        return tuple(self.bus_ids[i] for i in self.load_idx)

    @property
    def A_rel(self) -> np.ndarray:
        """``A_d`` on the quotient by the unobservable rigid-body modes."""
        return self.basis.T @ self.A_d @ self.basis


def _per_bus(value, buses, what: str) -> np.ndarray:
    if isinstance(value, dict):
        table = {str(k): v for k, v in value.items()}
        missing = [b for b in buses if str(b) not in table]
        if missing:
            raise ValidationError(f"{what} missing for generator buses {missing}")
        return np.array([float(table[str(b)]) for b in buses])
    return np.full(len(buses), float(value))


def reduce_case(case: GridCase, config: DynamicsConfig | None = None) -> ReducedModel:
    config = config or DynamicsConfig()
    L = build_laplacian(case)
    ids = case.bus_ids
    gen_idx = tuple(i for i, b in enumerate(case.buses) if b.is_generator)
    load_idx = tuple(i for i, b in enumerate(case.buses) if not b.is_generator)
    L_red = kron_reduce(L, gen_idx, load_idx)
    gen_buses = [ids[i] for i in gen_idx]
    m = _per_bus(config.inertia, gen_buses, "inertia")
    d = _per_bus(config.damping, gen_buses, "damping")
    A_c = swing_state_matrix(L_red, m, d)
    A_d = discretize(A_c, config.delta_t)
    g = len(gen_idx)
    H = helmert_basis(g)
    ratio = d / m
    if np.allclose(ratio, ratio[0], rtol=1e-12, atol=0.0):
        U = np.block([[H, np.zeros((g, g - 1))], [np.zeros((g, g - 1)), H]])
    else:
        U = np.block([[H, np.zeros((g, g))], [np.zeros((g, g - 1)), np.eye(g)]])
    return ReducedModel(bus_ids=ids, L=L, gen_idx=gen_idx, load_idx=load_idx, L_red=L_red,
                        M=np.diag(m), D=np.diag(d), A_c=A_c, A_d=A_d,
                        delta_t=float(config.delta_t), basis=U)


def _parse_line(line) -> tuple[int, int]:
    if isinstance(line, str):
        parts = line.replace(" ", "").split("-")
        if len(parts) != 2:
            raise ValidationError(f"line must look like '37-25', got {line!r}")
        try:
            return int(parts[0]), int(parts[1])
        except ValueError:
            raise ValidationError(f"line must look like '37-25', got {line!r}") from None
    i, j = line
    return int(i), int(j)


def find_branch(case: GridCase, line) -> int:
    """Index of the first branch joining the two buses, in either direction."""
    a, b = _parse_line(line)
    for k, br in enumerate(case.branches):
        if {br.from_bus, br.to_bus} == {a, b} and a != b:
            return k
    raise ValidationError(f"line {a}-{b} not found in case {case.name}")


def outage_direction(case: GridCase, model: ReducedModel, line,
                     delta_t: float | None = None, M=None) -> tuple[np.ndarray, np.ndarray]:
    """Rank-one uncertainty direction ``(Bbar, C)`` of a branch susceptance.

    With ``v`` from :func:`outage_vector`, a perturbation ``db`` of the branch
    susceptance changes ``L_red`` by ``db v v^T``, which enters the Euler map
    as ``db * Bbar C`` with ``Bbar = dt [0; -M^-1 v]`` and ``C = [v^T, 0]``.
    Both are returned in the full ``[delta; omega]`` coordinates.
    """
    find_branch(case, line)
    a, b = _parse_line(line)
    pos = {bid: i for i, bid in enumerate(model.bus_ids)}
    v = outage_vector(model.L, model.gen_idx, model.load_idx, pos[a], pos[b])
    if np.linalg.norm(v) <= 1e-12:
        raise DegenerateDirectionError(f"line {a}-{b} is invisible in the reduced model")
    dt = model.delta_t if delta_t is None else float(delta_t)
    m = np.diag(model.M) if M is None else _diag(M, len(v), "inertia")
    g = len(v)
    B = np.zeros(2 * g)
    B[g:] = -dt * v / m
    C = np.zeros(2 * g)
    C[:g] = v
    return B, C


def build_grid_network(case: GridCase, config: DynamicsConfig | None = None,
                       lines=None, require_stable: bool = True) -> tuple[AssembledNetwork, ReducedModel]:
    """Network over the relative-angle coordinates, one link per line.

    Link ids are the line labels as given (e.g. ``"37-25"``).
    """
    config = config or DynamicsConfig()
    lines = list(config.contingencies if lines is None else lines)
    if not lines:
        raise ValidationError("at least one contingency line is required")
    model = reduce_case(case, config)
    A = model.A_rel
    if require_stable:
        rho = eigenvalues(A).radius
        if rho >= 1.0 - 1e-9:
            raise StabilityError(
                f"discretized swing model is unstable (spectral radius {rho:.9g}); "
                "increase damping or reduce delta_t")
    U = model.basis
    directions, ids = [], []
    for line in lines:
        B, C = outage_direction(case, model, line)
        directions.append((U.T @ B, C @ U, config.sigma))
        a, b = _parse_line(line)
        ids.append(f"{a}-{b}")
    return network_from_directions(A, directions, ids), model
