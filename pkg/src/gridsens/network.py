"""Interconnected linear networks with uncertain links.

Each node ``k`` (numbered from 1) is a single-input single-output system
``x_k+ = A_k x_k + B_k u_k, y_k = C_k x_k``.  A coupling link ``(k, l)``
feeds ``mu * (a * y_k + b * y_l)`` into ``u_k``.  Stacking the node states
gives the compact form

    x+ = A x + sum_{links} delta_kl(t) * Bbar_k * C_kl * x

where ``A = blockdiag(A_k) + sum mu_kl Bbar_k C_kl`` and ``delta_kl`` is zero
mean with standard deviation ``sigma_kl``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from collections.abc import Iterable, Mapping, Sequence

import numpy as np

from .matrix_core import (
    DimensionError,
    ValidationError,
    as_matrix,
    as_vector,
    eigenvalues,
    smallest_singular_value,
    solve_discrete_lyapunov,
)

__all__ = [
    "Subsystem",
    "CouplingLink",
    "UncertainLink",
    "Link",
    "AssembledNetwork",
    "AssumptionReport",
    "build_link_row",
    "build_injection_column",
    "assemble_network",
    "network_from_directions",
    "check_assumptions",
    "is_observable",
    "sigma_vector",
]

OBSERVABILITY_RTOL = 1e-10


@dataclass(frozen=True)
class Subsystem:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        A = as_matrix(self.A, "A_k", square=True)
        n = A.shape[0]
        B = as_vector(self.B, "B_k", n)
        C = as_vector(self.C, "C_k", n)
        if not np.any(B):
            raise ValidationError("B_k must be nonzero")
        if not np.any(C):
            raise ValidationError("C_k must be nonzero")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)

    @property
    def n(self) -> int:
        return self.A.shape[0]


@dataclass(frozen=True)
class CouplingLink:
    source: int
    target: int
    mu: float
    a: float
    b: float

    @property
    def key(self) -> tuple[int, int]:
        return (self.source, self.target)


@dataclass(frozen=True)
class UncertainLink:
    source: int
    target: int
    sigma: float

    def __post_init__(self):
        if not (self.sigma >= 0 and np.isfinite(self.sigma)):
            raise ValidationError(f"sigma must be finite and >= 0, got {self.sigma}")

    @property
    def key(self) -> tuple[int, int]:
        return (self.source, self.target)


@dataclass(frozen=True)
class Link:
    """One uncertainty direction of the compact model."""

    id: str
    B: np.ndarray
    C: np.ndarray
    sigma: float


@dataclass(frozen=True)
class AssembledNetwork:
    A: np.ndarray
    links: tuple[Link, ...] = field(default_factory=tuple)

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    @property
    def link_ids(self) -> tuple[str, ...]:
        return tuple(link.id for link in self.links)

    def link(self, link_id: str) -> Link:
        for link in self.links:
            if link.id == link_id:
                return link
        raise KeyError(f"unknown link {link_id!r}")

    @property
    def sigmas(self) -> np.ndarray:
        return np.array([link.sigma for link in self.links], dtype=float)

    def with_sigmas(self, sigmas) -> "AssembledNetwork":
        s = sigma_vector(self, sigmas)
        links = tuple(Link(l.id, l.B, l.C, float(v)) for l, v in zip(self.links, s))
        return AssembledNetwork(self.A, links)


def sigma_vector(net: AssembledNetwork, sigmas=None) -> np.ndarray:
    """Normalize a sigma assignment (mapping, sequence or None) to an array
    aligned with ``net.links``."""
    if sigmas is None:
        return net.sigmas
    if isinstance(sigmas, Mapping):
        missing = set(net.link_ids) - set(sigmas)
        extra = set(sigmas) - set(net.link_ids)
        if missing or extra:
            raise ValidationError(
                f"sigma keys must match links; missing {sorted(missing)}, extra {sorted(extra)}")
        s = np.array([sigmas[i] for i in net.link_ids], dtype=float)
    else:
        s = np.array(sigmas, dtype=float).reshape(-1)
        if s.size != len(net.links):
            raise DimensionError(f"expected {len(net.links)} sigmas, got {s.size}")
    if not np.all(np.isfinite(s)) or np.any(s < 0):
        raise ValidationError("sigmas must be finite and nonnegative")
    return s


def _check_index(k: int, m: int, what: str) -> None:
    if not (1 <= k <= m):
        raise IndexError(f"{what} index {k} outside [1, {m}]")


def build_link_row(k: int, l: int, a: float, b: float,
                   subsystems: Sequence[Subsystem]) -> np.ndarray:
    """Output row C_kl: ``a*C_k`` in block k, ``b*C_l`` in block l."""
    m = len(subsystems)
    _check_index(k, m, "source")
    _check_index(l, m, "target")
    if k == l:
        raise ValueError(f"link endpoints must differ, got ({k}, {l})")
    n = subsystems[0].n
    row = np.zeros(m * n)
    row[(k - 1) * n:k * n] = a * subsystems[k - 1].C
    row[(l - 1) * n:l * n] = b * subsystems[l - 1].C
    return row


def build_injection_column(k: int, subsystems: Sequence[Subsystem]) -> np.ndarray:
    m = len(subsystems)
    _check_index(k, m, "node")
    n = subsystems[0].n
    col = np.zeros(m * n)
    col[(k - 1) * n:k * n] = subsystems[k - 1].B
    return col


def _validate_direction(b: np.ndarray, c: np.ndarray, what: str) -> None:
    if not np.any(b):
        raise ValidationError(f"{what}: injection column is zero")
    if not np.any(c):
        raise ValidationError(f"{what}: output row is zero")


def assemble_network(subsystems: Sequence[Subsystem],
                     couplings: Iterable[CouplingLink] = (),
                     uncertain_links: Iterable[UncertainLink] = ()) -> AssembledNetwork:
    subsystems = list(subsystems)
    if not subsystems:
        raise ValueError("at least one subsystem is required")
    n = subsystems[0].n
    for i, s in enumerate(subsystems, 1):
        if s.n != n:
            raise DimensionError(f"subsystem {i} has dimension {s.n}, expected {n}")
    m = len(subsystems)
    A = np.zeros((m * n, m * n))
    for i, s in enumerate(subsystems):
        A[i * n:(i + 1) * n, i * n:(i + 1) * n] = s.A

    by_key: dict[tuple[int, int], list[CouplingLink]] = {}
    for c in couplings:
        row = build_link_row(c.source, c.target, c.a, c.b, subsystems)
        A += c.mu * np.outer(build_injection_column(c.source, subsystems), row)
        by_key.setdefault(c.key, []).append(c)

    links = []
    for u in uncertain_links:
        matches = by_key.get(u.key)
        if not matches:
            raise ValidationError(f"uncertain link {u.key} has no coupling")
        if len(matches) > 1:
            raise ValidationError(f"uncertain link {u.key} matches several couplings")
        c = matches[0]
        B = build_injection_column(u.source, subsystems)
        C = build_link_row(c.source, c.target, c.a, c.b, subsystems)
        lid = f"{u.source}-{u.target}"
        _validate_direction(B, C, f"link {lid}")
        links.append(Link(lid, B, C, float(u.sigma)))
    ids = [l.id for l in links]
    if len(set(ids)) != len(ids):
        raise ValidationError("duplicate uncertain link")
    return AssembledNetwork(A, tuple(links))


def network_from_directions(A, directions, ids: Sequence[str] | None = None) -> AssembledNetwork:
    """Wrap a system already in compact form.

    ``directions`` is a sequence of ``(B column, C row, sigma)``.
    """
    A = as_matrix(A, "A", square=True)
    n = A.shape[0]
    directions = list(directions)
    if ids is None:
        ids = [f"L{i}" for i in range(1, len(directions) + 1)]
    if len(ids) != len(directions) or len(set(ids)) != len(ids):
        raise ValidationError("link ids must be unique and match the directions")
    links = []
    for lid, (b, c, sigma) in zip(ids, directions):
        B = as_vector(b, f"B[{lid}]", n)
        C = as_vector(c, f"C[{lid}]", n)
        _validate_direction(B, C, f"link {lid}")
        sigma = float(sigma)
        if not (sigma >= 0 and np.isfinite(sigma)):
            raise ValidationError(f"link {lid}: sigma must be finite and >= 0")
        links.append(Link(str(lid), B, C, sigma))
    return AssembledNetwork(A, tuple(links))


def is_observable(A: np.ndarray, c: np.ndarray, stable: bool | None = None) -> bool:
    """Observability of ``(A, c)``.

    For Schur-stable ``A`` this uses the Gramian: observable iff its smallest
    eigenvalue exceeds 1e-10 times its trace.  Otherwise the Kalman
    observability matrix rank is used.
    """
    A = np.asarray(A, dtype=float)
    c = np.asarray(c, dtype=float).reshape(1, -1)
    n = A.shape[0]
    if stable is None:
        stable = eigenvalues(A).radius < 1.0 - 1e-9
    if stable:
        G = solve_discrete_lyapunov(A, c.T @ c)
        w = np.linalg.eigvalsh(G)
        return bool(w[0] > OBSERVABILITY_RTOL * np.trace(G))
    rows = [c]
    for _ in range(n - 1):
        rows.append(rows[-1] @ A)
    return bool(np.linalg.matrix_rank(np.vstack(rows)) == n)


@dataclass(frozen=True)
class AssumptionReport:
    radius: float
    min_singular: float
    observable: dict

    @property
    def stable(self) -> bool:
        return self.radius < 1.0 - 1e-9

    @property
    def lower_bounded(self) -> bool:
        return self.min_singular > 0.0

    @property
    def ok(self) -> bool:
        return self.stable and self.lower_bounded and all(self.observable.values())

    def failures(self) -> list[str]:
        out = []
        if not self.stable:
            out.append(f"nominal map not Schur stable (radius {self.radius:.6g})")
        if not self.lower_bounded:
            out.append("nominal map is singular")
        out.extend(f"link {k} not observable" for k, v in self.observable.items() if not v)
        return out


def check_assumptions(net: AssembledNetwork) -> AssumptionReport:
    spec = eigenvalues(net.A)
    stable = spec.radius < 1.0 - 1e-9
    obs = {link.id: is_observable(net.A, link.C, stable) for link in net.links}
    return AssumptionReport(radius=spec.radius,
                            min_singular=smallest_singular_value(net.A),
                            observable=obs)
