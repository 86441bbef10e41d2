"""Exact mean-square stability of linear systems with multiplicative noise.

The recursion ``x+ = (A + sum_j delta_j Bbar_j C_j) x`` with independent,
zero-mean ``delta_j`` of variance ``sigma_j^2`` is mean-square stable iff the
second-moment operator

    T(P) = A^T P A + sum_j sigma_j^2 (Bbar_j^T P Bbar_j) C_j^T C_j

has spectral radius below one.  ``T`` maps the PSD cone into itself, so its
spectral radius is a (Perron) eigenvalue with a PSD eigenvector.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .matrix_core import StabilityError, ValidationError, as_matrix, spectral_radius
from .network import AssembledNetwork, sigma_vector
from .sensitivity import f_indices, s_indices

__all__ = [
    "Rectangle",
    "RegionResult",
    "GrowthEstimate",
    "second_moment_matrix",
    "apply_second_moment",
    "mss_spectral_radius",
    "feasibility_boundary",
    "scaled_rectangle",
    "propagate_second_moment",
    "monte_carlo_growth",
]

DENSE_MAX_DIM = 30


def second_moment_matrix(net: AssembledNetwork, sigmas=None) -> np.ndarray:
    """Matrix of ``T`` acting on row-major ``vec(P)``."""
    s = sigma_vector(net, sigmas)
    T = np.kron(net.A.T, net.A.T)
    for link, sig in zip(net.links, s):
        if sig:
            T += sig * sig * np.outer(np.kron(link.C, link.C), np.kron(link.B, link.B))
    return T


def apply_second_moment(net: AssembledNetwork, P: np.ndarray, sigmas=None) -> np.ndarray:
    s = sigma_vector(net, sigmas)
    out = net.A.T @ P @ net.A
    for link, sig in zip(net.links, s):
        out += sig * sig * float(link.B @ P @ link.B) * np.outer(link.C, link.C)
    return out


def _power_radius(net, s, tol=1e-10, max_iter=10000) -> float:
    n = net.dim
    P = np.eye(n) / math.sqrt(n)
    est = 0.0
    for _ in range(max_iter):
        TP = apply_second_moment(net, P, s)
        nrm = float(np.linalg.norm(TP))
        if nrm == 0.0:
            return 0.0
        if abs(nrm - est) <= tol * nrm:
            return nrm
        est = nrm
        P = TP / nrm
    return est


def mss_spectral_radius(net: AssembledNetwork, sigmas=None, method: str = "auto") -> float:
    """Spectral radius of the second-moment operator; MSS iff result < 1.

    ``method`` is ``"dense"`` (eigenvalues of the n^2 x n^2 matrix),
    ``"power"`` (power iteration on the PSD cone from the identity), or
    ``"auto"`` (dense up to dimension 30).
    """
    s = sigma_vector(net, sigmas)
    if method == "auto":
        method = "dense" if net.dim <= DENSE_MAX_DIM else "power"
    if method == "dense":
        return spectral_radius(second_moment_matrix(net, s))
    if method == "power":
        return _power_radius(net, s)
    raise ValueError(f"unknown method {method!r}")


@dataclass(frozen=True)
class Rectangle:
    corner: tuple
    area: float


@dataclass(frozen=True)
class RegionResult:
    link_ids: tuple
    angles: np.ndarray
    radii: np.ndarray
    siso_bounds: tuple
    rectangles: dict = field(default_factory=dict)

    @property
    def boundary(self) -> np.ndarray:
        return np.column_stack([self.radii * np.cos(self.angles),
                                self.radii * np.sin(self.angles)])

    @property
    def rays(self) -> list:
        return list(zip(self.angles.tolist(), self.radii.tolist()))


def _bisect_ray(net, direction, hi, tol, method) -> float:
    def rho(r):
        return mss_spectral_radius(net, r * direction, method)

    lo = 0.0
    while rho(hi) < 1.0:
        lo, hi = hi, 2.0 * hi
        if hi > 1e12:
            raise ValidationError("no mean-square boundary along this ray")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if rho(mid) < 1.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def feasibility_boundary(net: AssembledNetwork, n_angles: int = 181, tol: float = 1e-6,
                         workers: int | None = None, method: str = "auto") -> RegionResult:
    """Map the boundary of the mean-square stable set in (sigma_1, sigma_2).

    Radii are found by bisection along ``n_angles`` rays spread uniformly
    over [0, pi/2].  The F-, S- and uniformly weighted rectangles are
    attached under the names ``f_scaled``, ``s_scaled`` and ``uniform``.
    """
    if len(net.links) != 2:
        raise ValidationError(f"region mapping needs exactly 2 uncertain links, got {len(net.links)}")
    if n_angles < 8:
        raise ValueError("n_angles must be at least 8")
    if not tol > 0:
        raise ValueError("tol must be positive")
    nominal = mss_spectral_radius(net, [0.0, 0.0], method)
    if nominal >= 1.0:
        raise StabilityError(f"nominal system is not stable (rho(T) = {nominal:.6g}); no feasible region")

    siso = s_indices(net)
    bounds = (siso[net.link_ids[0]], siso[net.link_ids[1]])
    hi = 10.0 * max(bounds)
    angles = np.linspace(0.0, math.pi / 2, n_angles)
    # Exact axis directions so the end rays carry no cos(pi/2) round-off.
    dirs = [np.array([math.cos(t), math.sin(t)]) for t in angles]
    dirs[0] = np.array([1.0, 0.0])
    dirs[-1] = np.array([0.0, 1.0])

    def solve(d):
        return _bisect_ray(net, d, hi, tol, method)

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            radii = list(pool.map(solve, dirs))
    else:
        radii = [solve(d) for d in dirs]
    region = RegionResult(link_ids=net.link_ids, angles=angles, radii=np.array(radii),
                          siso_bounds=bounds)

    F = f_indices(net)
    f_w = (F[net.link_ids[0]], F[net.link_ids[1]])
    region.rectangles.update({
        "uniform": scaled_rectangle(region, (1.0, 1.0)),
        "f_scaled": scaled_rectangle(region, f_w),
        "s_scaled": scaled_rectangle(region, bounds),
    })
    return region


def scaled_rectangle(region: RegionResult, weights) -> Rectangle:
    """Largest rectangle ``sigma_i / w_i <= s`` inside the sampled region.

    Its corner is where the ray through ``(w_1, w_2)`` meets the boundary
    polyline (linear interpolation between neighbouring rays).
    """
    w1, w2 = (float(w) for w in weights)
    if not (w1 > 0 and w2 > 0):
        raise ValueError("weights must be positive")
    phi = math.atan2(w2, w1)
    angles, pts = region.angles, region.boundary
    i = int(np.searchsorted(angles, phi, side="right")) - 1
    i = min(max(i, 0), len(angles) - 2)
    p, q = pts[i], pts[i + 1]
    d = np.array([w1, w2]) / math.hypot(w1, w2)
    # Solve p + t (q - p) = r d for (t, r).
    M = np.column_stack([q - p, -d])
    if abs(np.linalg.det(M)) < 1e-300:
        r = float(np.linalg.norm(p))
    else:
        t, r = np.linalg.solve(M, -p)
    corner = (float(r * d[0]), float(r * d[1]))
    return Rectangle(corner=corner, area=corner[0] * corner[1])


def propagate_second_moment(net: AssembledNetwork, sigmas, cov0, steps: int) -> np.ndarray:
    """Exact state covariance trajectory ``Sigma_0 .. Sigma_steps``.

    ``Sigma+ = A Sigma A^T + sum_j sigma_j^2 (C_j Sigma C_j^T) Bbar_j Bbar_j^T``
    """
    s = sigma_vector(net, sigmas)
    S = as_matrix(cov0, "Sigma0", square=True)
    if S.shape[0] != net.dim:
        raise ValidationError("Sigma0 dimension does not match the network")
    scale = max(1.0, float(np.linalg.norm(S)))
    if np.max(np.abs(S - S.T)) > 1e-12 * scale or np.linalg.eigvalsh(0.5 * (S + S.T))[0] < -1e-10 * scale:
        raise ValidationError("Sigma0 must be symmetric positive semidefinite")
    if steps < 1:
        raise ValueError("steps must be >= 1")
    out = np.empty((steps + 1, net.dim, net.dim))
    out[0] = S
    A = net.A
    for t in range(steps):
        nxt = A @ S @ A.T
        for link, sig in zip(net.links, s):
            nxt += sig * sig * float(link.C @ S @ link.C) * np.outer(link.B, link.B)
        S = 0.5 * (nxt + nxt.T)
        out[t + 1] = S
    return out


@dataclass(frozen=True)
class GrowthEstimate:
    rate: float
    half_width: float
    log_mean_sq: np.ndarray
    method: str

    @property
    def mean_sq_norm(self) -> np.ndarray:
        return np.exp(self.log_mean_sq)


def _trial_noise(seed: int, trials: int, horizon: int, n_links: int) -> np.ndarray:
    # One stream per trial, keyed by the trial counter.
    out = np.empty((trials, horizon, n_links))
    for i in range(trials):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0, i)))
        out[i] = rng.standard_normal((horizon, n_links))
    return out


def _step(net, X, noise_t, s):
    Z = X @ net.A.T
    for j, link in enumerate(net.links):
        if s[j]:
            Z += (s[j] * noise_t[:, j] * (X @ link.C))[:, None] * link.B[None, :]
    return Z


def _fit_slope(y: np.ndarray, burn_in: int) -> float:
    t = np.arange(y.size)
    return float(np.polyfit(t[burn_in:], y[burn_in:], 1)[0])


def monte_carlo_growth(net: AssembledNetwork, sigmas=None, trials: int = 1000, horizon: int = 100,
                       seed: int = 0, x0=None, burn_in: int | None = None,
                       method: str = "resample") -> GrowthEstimate:
    """Estimate the exponential growth rate of E|x(t)|^2 by simulation.

    Trajectories use i.i.d. Gaussian ``delta_j ~ N(0, sigma_j^2)`` and start
    from the same ``x0`` (default: normalized all-ones vector).  The rate is
    the least-squares slope of ``log E|x(t)|^2`` over ``t >= burn_in``.

    ``method="plain"`` averages |x(t)|^2 over independent trajectories; its
    confidence half-width comes from a bootstrap over trials.  Near the
    stability boundary the mean is carried by rare trajectories and the plain
    average is biased low.

    ``method="resample"`` (default) keeps the population of trajectories
    normalized and resamples it in proportion to the one-step gain
    |x(t+1)|^2 / |x(t)|^2; the product of mean gains is an unbiased estimate
    of E|x(t)|^2.  Its half-width is from batch means of the per-step log
    gains.
    """
    if trials < 1 or horizon < 1:
        raise ValueError("trials and horizon must be positive")
    s = sigma_vector(net, sigmas)
    n = net.dim
    if x0 is None:
        x0 = np.ones(n) / math.sqrt(n)
    x0 = np.asarray(x0, dtype=float).reshape(n)
    if not np.any(x0):
        raise ValueError("x0 must be nonzero")
    if burn_in is None:
        burn_in = horizon // 5
    burn_in = min(burn_in, horizon - 1)
    noise = _trial_noise(seed, trials, horizon, len(net.links))
    x0_sq = float(x0 @ x0)

    if method == "plain":
        X = np.tile(x0, (trials, 1))
        sq = np.empty((trials, horizon + 1))
        sq[:, 0] = x0_sq
        for t in range(horizon):
            X = _step(net, X, noise[:, t], s)
            sq[:, t + 1] = np.einsum("ij,ij->i", X, X)
        with np.errstate(divide="ignore"):
            y = np.log(sq.mean(axis=0))
        rate = _fit_slope(y, burn_in)
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(1,)))
        boots = []
        for _ in range(200):
            idx = rng.integers(0, trials, trials)
            with np.errstate(divide="ignore"):
                boots.append(_fit_slope(np.log(sq[idx].mean(axis=0)), burn_in))
        half = 1.96 * float(np.std(boots, ddof=1))
        return GrowthEstimate(rate, half, y, method)

    if method != "resample":
        raise ValueError(f"unknown method {method!r}")
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(1,)))
    Y = np.tile(x0 / math.sqrt(x0_sq), (trials, 1))
    log_gain = np.zeros(horizon)
    for t in range(horizon):
        Z = _step(net, Y, noise[:, t], s)
        r = np.einsum("ij,ij->i", Z, Z)
        total = float(r.sum())
        if total == 0.0:
            log_gain[t:] = -np.inf
            break
        log_gain[t] = math.log(total / trials)
        cw = np.cumsum(r / total)
        u = (rng.random() + np.arange(trials)) / trials
        idx = np.minimum(np.searchsorted(cw, u), trials - 1)
        Y = Z[idx] / np.sqrt(r[idx])[:, None]
    y = math.log(x0_sq) + np.concatenate([[0.0], np.cumsum(log_gain)])
    if not np.all(np.isfinite(y)):
        return GrowthEstimate(-np.inf, 0.0, y, method)
    rate = _fit_slope(y, burn_in)
    g = log_gain[burn_in:]
    nb = min(10, g.size)
    if nb >= 2:
        batches = np.array([b.mean() for b in np.array_split(g, nb)])
        half = float(stats.t.ppf(0.975, nb - 1) * batches.std(ddof=1) / math.sqrt(nb))
    else:
        half = float("inf")
    return GrowthEstimate(rate, half, y, method)
