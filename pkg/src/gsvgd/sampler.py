"""Particle velocity fields and stochastic baselines.

The deterministic fields all share one structure: evaluate per-particle
quantities (drift, matrices, kernel) from an immutable snapshot of the
ensemble, then combine them.  Velocities are therefore a pure function of the
snapshot; applying them is a separate phase, and evaluation may be
parallelized across the outer particle index.

The main field applies the diffusion Stein operator of the (A, C) dynamics
to the kernel and averages it over the empirical measure:

    v_i = (1/N) sum_j [ f(x_j) k(x_i, x_j) + (A(x_j) + C(x_j)) grad2_k(x_i, x_j) ]

with ``f`` the stationary drift.  The j-sum includes the self term j = i.
Any non-finite intermediate aborts with the offending particle index rather
than being clipped.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.spatial.distance import cdist

from .dynamics import DynamicsSpec
from .errors import NumericalError, UnsupportedDynamicsError
from .kernels import KernelConfig
from .targets import BlockLayout

Array = np.ndarray

# Keep per-chunk kernel blocks at or below this many entries.
_MAX_PAIR_BLOCK = 1 << 22


@dataclass(frozen=True)
class Ensemble:
    """N particle positions plus the block layout of their coordinates."""

    positions: Array
    layout: BlockLayout
    generation: int = 0

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float, copy=True)
        if pos.ndim != 2 or pos.shape[0] < 1:
            raise ValueError("positions must be a nonempty (N, D) array")
        if pos.shape[1] != self.layout.dim:
            raise ValueError(
                f"positions dim {pos.shape[1]} does not match layout dim "
                f"{self.layout.dim}")
        if not np.all(np.isfinite(pos)):
            raise ValueError("positions must be finite")
        object.__setattr__(self, "positions", pos)

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    @property
    def dim(self) -> int:
        return self.positions.shape[1]

    def theta(self) -> Array:
        return self.positions[:, self.layout.theta_slice]

    def r(self) -> Array:
        return self.positions[:, self.layout.r_slice]

    def xi(self) -> Array:
        return self.positions[:, self.layout.xi_slice]

    def with_positions(self, positions: Array, bump: int = 1) -> "Ensemble":
        return replace(self, positions=positions,
                       generation=self.generation + bump)


@dataclass(frozen=True)
class VelocityField:
    """One velocity per particle; construction verifies finiteness."""

    values: Array

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 2:
            raise ValueError("velocity values must be an (N, D) array")
        bad = ~np.all(np.isfinite(vals), axis=1)
        if np.any(bad):
            raise NumericalError("non-finite velocity",
                                 particle=int(np.argmax(bad)))
        object.__setattr__(self, "values", vals)


def _resolve_bandwidth(e: Ensemble, kernel: KernelConfig | None,
                       h: float | None) -> float:
    if h is None:
        if kernel is None:
            raise ValueError(
                "either a kernel config or an explicit bandwidth is required")
        h = kernel.bandwidth(e.positions)
    if not np.isfinite(h):
        raise NumericalError("non-finite kernel bandwidth")
    if h <= 0:
        raise ValueError("bandwidth h must be positive")
    return float(h)


def _check_drift(F: Array) -> Array:
    bad = ~np.all(np.isfinite(F), axis=1)
    if np.any(bad):
        raise NumericalError("non-finite drift", particle=int(np.argmax(bad)))
    return F


def check_positions(positions: Array) -> Array:
    """Raise a NumericalError naming the first non-finite particle, if any."""
    bad = ~np.all(np.isfinite(positions), axis=1)
    if np.any(bad):
        raise NumericalError("non-finite particle position",
                             particle=int(np.argmax(bad)))
    return positions


def _stein_velocity(X: Array, F: Array, M_const: Array | None,
                    M: Array | None, h: float) -> Array:
    """Average the Stein-operator terms over the empirical measure.

    X: (N, D) positions; F: (N, D) drifts; exactly one of M_const (D, D)
    and M (N, D, D) gives the matrix multiplying the kernel gradient.
    """
    n, d = X.shape
    out = np.empty_like(X)
    chunk = max(1, _MAX_PAIR_BLOCK // n)
    if M is not None:
        M_flat = M.reshape(n, d * d)
        Mx = np.einsum("nij,nj->ni", M, X)
    for i0 in range(0, n, chunk):
        i1 = min(i0 + chunk, n)
        Xc = X[i0:i1]
        K = np.exp(-cdist(Xc, X, "sqeuclidean") / h)
        attract = K @ F
        if M_const is not None:
            # sum_j (x_i - x_j) K_ij, then one matrix application per row
            R = Xc * K.sum(axis=1)[:, None] - K @ X
            rep = (2.0 / h) * (R @ M_const.T)
        else:
            S = (K @ M_flat).reshape(i1 - i0, d, d)
            rep = (2.0 / h) * (np.einsum("iab,ib->ia", S, Xc) - K @ Mx)
        out[i0:i1] = (attract + rep) / n
    return out


def gsvgd_velocity(e: Ensemble, target, spec: DynamicsSpec,
                   kernel: KernelConfig | None = None,
                   h: float | None = None) -> VelocityField:
    """Stein-operator velocity field of the (A, C) dynamics.

    Equals the classic kernelized score update when (A, C) = (I, 0); the
    general form weights the stationary drift by the kernel and applies
    (A + C) to the kernel gradient (repulsion).
    """
    h = _resolve_bandwidth(e, kernel, h)
    X = e.positions
    F = _check_drift(spec.drift_many(X, target))
    const = spec.constant_matrices()
    if const is not None:
        vals = _stein_velocity(X, F, const[0] + const[1], None, h)
    else:
        vals = _stein_velocity(X, F, None, spec.A_many(X) + spec.C_many(X), h)
    return VelocityField(vals)


def gsvgd_velocity_alt(e: Ensemble, target, spec: DynamicsSpec,
                       kernel: KernelConfig | None = None,
                       h: float | None = None) -> VelocityField:
    """Alternative field: same drift term, repulsion through A only.

    Drops C from the kernel-gradient term.  The two fields induce the same
    density evolution, but this one keeps rotating at equilibrium instead of
    vanishing, so it is a diagnostic/baseline variant, not the default.
    """
    h = _resolve_bandwidth(e, kernel, h)
    X = e.positions
    F = _check_drift(spec.drift_many(X, target))
    const = spec.constant_matrices()
    if const is not None:
        vals = _stein_velocity(X, F, const[0], None, h)
    else:
        vals = _stein_velocity(X, F, None, spec.A_many(X), h)
    return VelocityField(vals)


def blob_grad_log_density(e: Ensemble, kernel: KernelConfig | None = None,
                          h: float | None = None) -> Array:
    """Kernel-density estimate of the ensemble's score ``grad log rho``.

    Two-term form (the first variation of the KDE-smoothed KL):

        g_i = sum_j grad1_k(x_i, x_j) / sum_j k(x_i, x_j)
            + sum_j [ grad1_k(x_i, x_j) / sum_l k(x_j, x_l) ]

    Denominators are at least ``k(x_i, x_i) = 1``, so no guard is needed.
    For a single particle the estimate is exactly zero.
    """
    h = _resolve_bandwidth(e, kernel, h)
    X = e.positions
    K = np.exp(-cdist(X, X, "sqeuclidean") / h)
    row_sum = K.sum(axis=1)                     # (N,)
    # sum_j grad1_k(x_i, x_j) = -(2/h) (x_i * rowsum_i - K @ X)
    S1 = -(2.0 / h) * (X * row_sum[:, None] - K @ X)
    term1 = S1 / row_sum[:, None]
    inv = 1.0 / row_sum
    term2 = -(2.0 / h) * (X * (K @ inv)[:, None] - K @ (X * inv[:, None]))
    return term1 + term2


def parvi_blob_velocity(e: Ensemble, target, spec: DynamicsSpec,
                        kernel: KernelConfig | None = None,
                        h: float | None = None) -> VelocityField:
    """Blob-smoothed transport field ``(A+C)(grad_logp - g) + div(A+C)``.

    ``g`` is the kernel-density score estimate above.  The divergence term
    vanishes for constant-matrix kinds; for state-dependent kinds it is kept
    so the field equals the stationary drift minus ``(A+C)`` applied to the
    score estimate.
    """
    h = _resolve_bandwidth(e, kernel, h)
    X = e.positions
    ghat = blob_grad_log_density(e, h=h)
    grad = target.grad_many(X)
    resid = grad - ghat
    const = spec.constant_matrices()
    if const is not None:
        M = const[0] + const[1]
        vals = resid @ M.T
    else:
        M = spec.A_many(X) + spec.C_many(X)
        vals = np.einsum("nij,nj->ni", M, resid) + spec.div_many(X)
    return VelocityField(vals)


def mcmc_step(e: Ensemble, target, spec: DynamicsSpec, eps: float,
              rng: np.random.Generator) -> Ensemble:
    """One Euler-Maruyama step of the stochastic dynamics, per particle.

    ``x <- x + eps f(x) + sqrt(2 eps) A(x)^(1/2) xi`` with independent
    standard normal draws consumed in particle-index order.  Requires a
    diagonal diffusion matrix (every catalog kind satisfies this under the
    scalar metric).
    """
    if eps < 0:
        raise ValueError("step size must be nonnegative")
    X = e.positions
    F = _check_drift(spec.drift_many(X, target))
    const = spec.constant_matrices()
    if const is not None:
        A = const[0]
        if np.max(np.abs(A - np.diag(np.diag(A)))) > 1e-12:
            raise UnsupportedDynamicsError(
                "stochastic baseline requires a diagonal diffusion matrix")
        diag = np.broadcast_to(np.diag(A), X.shape)
    else:
        A = spec.A_many(X)
        diag = np.einsum("nii->ni", A).copy()
        off = np.abs(A).sum(axis=(1, 2)) - np.abs(diag).sum(axis=1)
        if np.max(off) > 1e-12:
            raise UnsupportedDynamicsError(
                "stochastic baseline requires a diagonal diffusion matrix")
    noise = rng.standard_normal(X.shape)
    scale = np.sqrt(np.maximum(diag, 0.0))
    new = X + eps * F + np.sqrt(2.0 * eps) * scale * noise
    return e.with_positions(check_positions(new))


def resample_momentum(e: Ensemble, sigma2: float,
                      rng: np.random.Generator) -> Ensemble:
    """Redraw every particle's r block i.i.d. from N(0, sigma2 I).

    Theta and xi blocks are carried over bit for bit.
    """
    if sigma2 <= 0:
        raise ValueError("momentum variance must be positive")
    if not e.layout.has_r:
        raise ValueError("ensemble layout has no momentum block")
    new = e.positions.copy()
    new[:, e.layout.r_slice] = np.sqrt(sigma2) * rng.standard_normal(
        (e.n, e.layout.d_r))
    return e.with_positions(new)
