"""Gramian-based link sensitivities and the interaction index.

For a network with uncertain links ``(Bbar_j, C_j)``:

* the joint Gramian ``P`` solves ``A^T P A - P = -sum_j C_j^T C_j``;
* the single-link Gramian ``P_j`` solves ``A^T P_j A - P_j = -C_j^T C_j``;
* ``F_j = (Bbar_j^T P Bbar_j * |C_j|^2)^(-1/2)`` ranks links when all
  uncertainties act together (larger F: more variance tolerated);
* ``S_j = (Bbar_j^T P_j Bbar_j)^(-1/2)`` is the single-link bound;
* ``I = 1 - <F, S> / (|F| |S|)`` measures how much simultaneous
  uncertainties reorder the links.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .matrix_core import ValidationError, solve_discrete_lyapunov
from .network import AssembledNetwork

__all__ = [
    "DegenerateLinkError",
    "GramianSet",
    "SensitivityReport",
    "joint_gramian",
    "single_link_gramian",
    "gramians",
    "f_indices",
    "s_indices",
    "interaction_index",
    "rank_contingencies",
    "normalize",
    "analyze",
]


class DegenerateLinkError(ValueError):
    def __init__(self, link_id: str, detail: str = "zero quadratic form"):
        super().__init__(f"link {link_id}: {detail}")
        self.link_id = link_id


@dataclass(frozen=True)
class GramianSet:
    joint: np.ndarray
    per_link: dict


@dataclass(frozen=True)
class SensitivityReport:
    F: dict
    S: dict
    I: float
    ranking: tuple
    normalized_F: dict
    normalized_S: dict

    @property
    def s_ranking(self) -> tuple:
        return rank_contingencies(self.S)


def _require_links(net: AssembledNetwork) -> None:
    if not net.links:
        raise ValidationError("network has no uncertain links")


def joint_gramian(net: AssembledNetwork) -> np.ndarray:
    _require_links(net)
    Q = sum(np.outer(l.C, l.C) for l in net.links)
    return solve_discrete_lyapunov(net.A, Q)


def single_link_gramian(net: AssembledNetwork, link_id: str) -> np.ndarray:
    link = net.link(link_id)
    return solve_discrete_lyapunov(net.A, np.outer(link.C, link.C))


def gramians(net: AssembledNetwork, workers: int | None = None) -> GramianSet:
    """Joint and per-link Gramians.  Per-link solves run on ``workers``
    threads when given; the result does not depend on the worker count."""
    _require_links(net)
    ids = net.link_ids
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            mats = list(pool.map(lambda i: single_link_gramian(net, i), ids))
    else:
        mats = [single_link_gramian(net, i) for i in ids]
    return GramianSet(joint=joint_gramian(net), per_link=dict(zip(ids, mats)))


def _quadratic(link_id: str, b: np.ndarray, P: np.ndarray) -> float:
    q = float(b @ P @ b)
    # Relative to the largest possible value |b|^2 |P|.
    if not np.isfinite(q) or q <= 1e-14 * float(b @ b) * max(np.linalg.norm(P, 2), 1e-300):
        raise DegenerateLinkError(link_id)
    return q


def f_indices(net: AssembledNetwork, P: np.ndarray | None = None) -> dict:
    if P is None:
        P = joint_gramian(net)
    out = {}
    for link in net.links:
        q = _quadratic(link.id, link.B, P)
        out[link.id] = 1.0 / np.sqrt(q * float(link.C @ link.C))
    return out


def s_indices(net: AssembledNetwork, grams: GramianSet | None = None) -> dict:
    if grams is None:
        per_link = {l.id: single_link_gramian(net, l.id) for l in net.links}
    else:
        per_link = grams.per_link
    return {l.id: 1.0 / np.sqrt(_quadratic(l.id, l.B, per_link[l.id])) for l in net.links}


def interaction_index(F: dict, S: dict) -> float:
    if not F or not S:
        raise ValueError("interaction index needs nonempty F and S")
    if set(F) != set(S):
        raise ValueError("F and S must have the same links")
    keys = sorted(F)
    f = np.array([F[k] for k in keys], dtype=float)
    s = np.array([S[k] for k in keys], dtype=float)
    if np.any(f <= 0) or np.any(s <= 0):
        raise ValueError("F and S entries must be positive")
    cos = float(f @ s) / (np.linalg.norm(f) * np.linalg.norm(s))
    return float(min(1.0, max(0.0, 1.0 - cos)))


def rank_contingencies(F: dict) -> tuple:
    """Links ordered most critical first (ascending F, ties by id)."""
    return tuple(sorted(F, key=lambda k: (F[k], k)))


def normalize(values: dict) -> dict:
    top = max(values.values())
    return {k: v / top for k, v in values.items()}


def analyze(net: AssembledNetwork, workers: int | None = None) -> SensitivityReport:
    grams = gramians(net, workers=workers)
    F = f_indices(net, grams.joint)
    S = s_indices(net, grams)
    return SensitivityReport(
        F=F,
        S=S,
        I=interaction_index(F, S),
        ranking=rank_contingencies(F),
        normalized_F=normalize(F),
        normalized_S=normalize(S),
    )
