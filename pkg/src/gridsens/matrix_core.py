"""Dense real linear algebra used throughout the package.

Matrices are plain ``numpy.ndarray`` objects of dtype float64.  Everything
entering the package goes through :func:`as_matrix` so that shape and
finiteness are checked once, at the boundary.

Discrete Lyapunov equations are written in observability form::

    A^T P A - P + Q = 0        =>   P = sum_k (A^T)^k Q A^k

Two independent solvers are provided: a Kronecker-vectorized direct solve
(used up to dimension 60) and a squaring ("doubling") iteration.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "DimensionError",
    "StabilityError",
    "ValidationError",
    "Spectrum",
    "as_matrix",
    "as_vector",
    "eigenvalues",
    "spectral_radius",
    "singular_values",
    "smallest_singular_value",
    "solve_discrete_lyapunov",
    "lyapunov_direct",
    "lyapunov_doubling",
    "lyapunov_residual",
    "symmetrize",
]

STABILITY_MARGIN = 1e-9
DIRECT_MAX_DIM = 60


class DimensionError(ValueError):
    """Shapes of the operands do not agree."""


class StabilityError(ValueError):
    """A map that must be Schur stable is not."""


class ValidationError(ValueError):
    """Input violates a numerical precondition (symmetry, PSD, finiteness)."""


@dataclass(frozen=True)
class Spectrum:
    eigenvalues: np.ndarray
    radius: float

    def __len__(self) -> int:
        return len(self.eigenvalues)


def as_matrix(a, name: str = "matrix", square: bool = False) -> np.ndarray:
    m = np.array(a, dtype=float)
    if m.ndim == 0:
        m = m.reshape(1, 1)
    if m.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {m.shape}")
    if square and m.shape[0] != m.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValidationError(f"{name} has non-finite entries")
    return m


def as_vector(v, name: str = "vector", size: int | None = None) -> np.ndarray:
    x = np.array(v, dtype=float).reshape(-1)
    if size is not None and x.size != size:
        raise DimensionError(f"{name} must have length {size}, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise ValidationError(f"{name} has non-finite entries")
    return x


def symmetrize(p: np.ndarray) -> np.ndarray:
    return 0.5 * (p + p.T)


def eigenvalues(a) -> Spectrum:
    """All eigenvalues of a square matrix, with the spectral radius."""
    m = as_matrix(a, "A", square=True)
    # LAPACK geev: Hessenberg reduction followed by shifted QR.
    ev = np.linalg.eigvals(m)
    radius = float(np.max(np.abs(ev))) if ev.size else 0.0
    return Spectrum(eigenvalues=ev, radius=radius)


def spectral_radius(a) -> float:
    return eigenvalues(a).radius


def singular_values(a) -> np.ndarray:
    return np.linalg.svd(as_matrix(a, "A"), compute_uv=False)


def smallest_singular_value(a) -> float:
    s = singular_values(a)
    m = as_matrix(a, "A")
    # Non-square inputs have min(rows, cols) singular values; a tall or wide
    # matrix is never bounded below on the larger space.
    if m.shape[0] != m.shape[1]:
        return 0.0 if m.shape[0] < m.shape[1] else float(s.min())
    return float(s.min()) if s.size else 0.0


def _check_lyapunov_inputs(a, q) -> tuple[np.ndarray, np.ndarray]:
    A = as_matrix(a, "A", square=True)
    Q = as_matrix(q, "Q", square=True)
    if A.shape != Q.shape:
        raise DimensionError(f"A is {A.shape} but Q is {Q.shape}")
    scale = max(1.0, float(np.linalg.norm(Q)))
    if np.max(np.abs(Q - Q.T), initial=0.0) > 1e-12 * scale:
        raise ValidationError("Q is not symmetric")
    if Q.size and np.linalg.eigvalsh(symmetrize(Q)).min() < -1e-10 * scale:
        raise ValidationError("Q is not positive semidefinite")
    rho = spectral_radius(A) if A.size else 0.0
    if rho >= 1.0 - STABILITY_MARGIN:
        raise StabilityError(f"A is not Schur stable (spectral radius {rho:.12g})")
    return A, symmetrize(Q)


def lyapunov_direct(A: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """Solve (I - A^T (x) A^T) vec(P) = vec(Q).  No input checks."""
    n = A.shape[0]
    K = np.eye(n * n) - np.kron(A.T, A.T)
    p = np.linalg.solve(K, Q.reshape(-1))
    return symmetrize(p.reshape(n, n))


def lyapunov_doubling(A: np.ndarray, Q: np.ndarray, tol: float = 1e-14,
                      max_iter: int = 200) -> np.ndarray:
    """Squaring iteration P <- P + A^T P A, A <- A^2.  No input checks.

    After j steps P holds the first 2^j terms of the Neumann series.
    """
    P = Q.copy()
    Ak = A.copy()
    for _ in range(max_iter):
        update = Ak.T @ P @ Ak
        P = P + update
        if np.linalg.norm(update) <= tol * max(1.0, np.linalg.norm(P)):
            break
        Ak = Ak @ Ak
    return symmetrize(P)


def solve_discrete_lyapunov(a, q, method: str = "auto") -> np.ndarray:
    """Solve ``A^T P A - P = -Q`` for a Schur-stable ``A`` and PSD ``Q``.

    ``method`` is ``"direct"``, ``"doubling"`` or ``"auto"`` (direct up to
    dimension 60, doubling above).
    """
    A, Q = _check_lyapunov_inputs(a, q)
    if method == "auto":
        method = "direct" if A.shape[0] <= DIRECT_MAX_DIM else "doubling"
    if method == "direct":
        return lyapunov_direct(A, Q)
    if method == "doubling":
        return lyapunov_doubling(A, Q)
    raise ValueError(f"unknown Lyapunov method {method!r}")


def lyapunov_residual(A, P, Q) -> float:
    """Frobenius norm of ``A^T P A - P + Q``."""
    A = np.asarray(A, dtype=float)
    return float(np.linalg.norm(A.T @ P @ A - P + Q))
