"""Catalog of drift/diffusion pairs (A, C) for Itō-diffusion samplers.

Every supported dynamics is described by a positive-semidefinite diffusion
matrix ``A(x)`` and a skew-symmetric curl matrix ``C(x)`` on the (possibly
momentum/thermostat-augmented) state.  The stationary drift is

    ``f(x) = (A(x) + C(x)) grad_logp(x) + div(A + C)(x)``,

with the divergence applied row-wise: ``div(M)_i = sum_j dM_ij/dx_j``.

Kinds:
    LD          overdamped Langevin:            A = I, C = 0
    RLD         Riemannian Langevin:            A = Ginv(theta) I, C = 0
    HMC         underdamped (Hamiltonian):      A = blkdiag(0, a I),
                                                C = [[0, -I], [I, 0]]
    NHT         Nose-Hoover thermostat:         3-block form with
                                                (mu sigma2)^-1 diag(r)
                                                couplings between r and xi
    RHMC        Riemannian Hamiltonian:         A = blkdiag(0, Ginv I),
                                                C = [[0, -sqrt(Ginv) I],
                                                     [sqrt(Ginv) I, 0]]
    ThirdOrder  third-order Langevin:           A = blkdiag(0, 0, a I),
                                                C = [[0, -I, 0],
                                                     [I, 0, -g I],
                                                     [0, g I, 0]]

The Riemannian metric is the scalar-times-identity reading
``Ginv(theta) = d_scale * sqrt(|U(theta) + c_offset|)`` with
``U = -logp`` the base target's energy; a floor on the square root keeps the
metric strictly positive.  Matrices are materialized densely; dimensions here
are desk-scale.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .targets import BlockLayout, TargetDensity

Array = np.ndarray

KINDS = ("LD", "RLD", "HMC", "NHT", "RHMC", "ThirdOrder")
_CONSTANT_KINDS = ("LD", "HMC", "ThirdOrder")
_KINDS_WITH_R = ("HMC", "NHT", "RHMC", "ThirdOrder")
_KINDS_WITH_XI = ("NHT", "ThirdOrder")
_RIEMANN_KINDS = ("RLD", "RHMC")


@dataclass(frozen=True)
class RiemannConfig:
    """Scalar metric ``Ginv(theta) = d_scale * sqrt(|U(theta) + c_offset|)``.

    ``U(theta) = -logp(theta)`` is the energy of the base (theta-space)
    target.  The square root is floored at ``sqrt_floor`` so the metric and
    its reciprocal stay finite where ``U + c_offset`` crosses zero.
    """

    base: TargetDensity
    d_scale: float = 1.5
    c_offset: float = 0.5
    sqrt_floor: float = 1e-8

    def __post_init__(self):
        if self.d_scale <= 0:
            raise ValueError("d_scale must be positive (A must stay PSD)")
        if self.sqrt_floor <= 0:
            raise ValueError("sqrt_floor must be positive")

    def metric(self, theta: Array) -> tuple[Array, Array]:
        """Return ``(s, ds)``: the metric scalar per row and its theta-gradient.

        Where the floor is active the gradient is zero (the metric is flat
        there by construction).
        """
        u = -self.base.logp_many(theta) + self.c_offset
        root = np.sqrt(np.abs(u))
        active = root > self.sqrt_floor
        s = self.d_scale * np.maximum(root, self.sqrt_floor)
        du = -self.base.grad_many(theta)
        with np.errstate(divide="ignore", invalid="ignore"):
            ds = self.d_scale * np.sign(u)[:, None] * du / (2.0 * root[:, None])
        ds = np.where(active[:, None], ds, 0.0)
        return s, ds


@dataclass(frozen=True)
class DynamicsSpec:
    """A named (A, C) parametrization bound to a block layout.

    Attributes:
        kind: One of :data:`KINDS`.
        layout: Layout of the state the matrices act on.
        sigma2: Momentum variance of the matching augmented target.
        friction: The scalar ``a`` of the diffusion blocks (HMC, NHT,
            ThirdOrder); also the thermostat reference mean for NHT.
        mu: Thermostat precision (NHT; also the xi-block precision used by
            ThirdOrder augmentation).
        gamma: Third-order coupling strength.
        riemann: Metric configuration, required for RLD and RHMC.
    """

    kind: str
    layout: BlockLayout
    sigma2: float = 1.0
    friction: float = 0.0
    mu: float = 1.0
    gamma: float = 1.0
    riemann: Optional[RiemannConfig] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown dynamics kind '{self.kind}'")
        lo = self.layout
        if self.kind in _KINDS_WITH_R:
            if not lo.has_r or lo.d_r != lo.d_theta:
                raise ValueError(f"{self.kind} needs an r block matching theta")
            if self.sigma2 <= 0:
                raise ValueError("sigma2 must be positive")
        else:
            if lo.has_r:
                raise ValueError(f"{self.kind} acts on a theta-only layout")
        if self.kind in _KINDS_WITH_XI:
            if not lo.has_xi or lo.d_xi != lo.d_theta:
                raise ValueError(f"{self.kind} needs a xi block matching theta")
            if self.mu <= 0:
                raise ValueError("mu must be positive")
        else:
            if lo.has_xi:
                raise ValueError(f"{self.kind} does not use a xi block")
        if self.kind in _RIEMANN_KINDS and self.riemann is None:
            raise ValueError(f"{self.kind} requires a RiemannConfig")
        if self.friction < 0:
            raise ValueError("friction must be nonnegative")

    # -- helpers -------------------------------------------------------------

    @property
    def dim(self) -> int:
        return self.layout.dim

    @property
    def is_constant(self) -> bool:
        """True when A and C do not depend on the state."""
        return self.kind in _CONSTANT_KINDS

    def _check_states(self, X: Array) -> Array:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.dim:
            raise ValueError(f"states have shape {X.shape}, expected (N, {self.dim})")
        return X

    def _metric(self, X: Array) -> tuple[Array, Array]:
        theta = X[:, self.layout.theta_slice]
        return self.riemann.metric(theta)

    def constant_matrices(self) -> tuple[Array, Array] | None:
        """Return (A, C) for state-independent kinds, else None."""
        if not self.is_constant:
            return None
        d = self.dim
        dt = self.layout.d_theta
        A = np.zeros((d, d))
        C = np.zeros((d, d))
        t = np.arange(dt)
        if self.kind == "LD":
            A[t, t] = 1.0
        elif self.kind == "HMC":
            r = dt + t
            A[r, r] = self.friction
            C[t, r] = -1.0
            C[r, t] = 1.0
        else:  # ThirdOrder
            r = dt + t
            x = 2 * dt + t
            A[x, x] = self.friction
            C[t, r] = -1.0
            C[r, t] = 1.0
            C[r, x] = -self.gamma
            C[x, r] = self.gamma
        return A, C

    # -- matrix evaluation ----------------------------------------------------

    def A_many(self, X: Array) -> Array:
        """Diffusion matrices, shape (N, D, D)."""
        X = self._check_states(X)
        n, d = X.shape
        const = self.constant_matrices()
        if const is not None:
            return np.broadcast_to(const[0], (n, d, d))
        dt = self.layout.d_theta
        t = np.arange(dt)
        A = np.zeros((n, d, d))
        if self.kind == "RLD":
            s, _ = self._metric(X)
            idx = np.arange(d)
            A[:, idx, idx] = s[:, None]
        elif self.kind == "RHMC":
            s, _ = self._metric(X)
            r = dt + t
            A[:, r, r] = s[:, None]
        else:  # NHT: constant A, varying C
            r = dt + t
            A[:, r, r] = self.friction
        return A

    def C_many(self, X: Array) -> Array:
        """Curl matrices, shape (N, D, D)."""
        X = self._check_states(X)
        n, d = X.shape
        const = self.constant_matrices()
        if const is not None:
            return np.broadcast_to(const[1], (n, d, d))
        dt = self.layout.d_theta
        t = np.arange(dt)
        C = np.zeros((n, d, d))
        if self.kind == "RLD":
            return C
        if self.kind == "RHMC":
            s, _ = self._metric(X)
            root = np.sqrt(s)
            r = dt + t
            C[:, t, r] = -root[:, None]
            C[:, r, t] = root[:, None]
            return C
        # NHT
        r = dt + t
        x = 2 * dt + t
        coupling = X[:, self.layout.r_slice] / (self.mu * self.sigma2)
        C[:, t, r] = -1.0
        C[:, r, t] = 1.0
        C[:, r, x] = coupling
        C[:, x, r] = -coupling
        return C

    def div_many(self, X: Array) -> Array:
        """Row-wise divergence of A + C, shape (N, D), analytic."""
        X = self._check_states(X)
        n, d = X.shape
        out = np.zeros((n, d))
        if self.is_constant:
            return out
        lo = self.layout
        if self.kind == "NHT":
            # Only the xi rows' r-dependence survives.
            out[:, lo.xi_slice] = -1.0 / (self.mu * self.sigma2)
            return out
        s, ds = self._metric(X)
        if self.kind == "RLD":
            return ds
        # RHMC: theta rows vanish; r rows pick up d(sqrt(s))/dtheta.
        out[:, lo.r_slice] = ds / (2.0 * np.sqrt(s)[:, None])
        return out

    def div_fd(self, x: Array, base_step: float = 1e-5) -> Array:
        """Finite-difference divergence of A + C (validation fallback)."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ValueError(f"state has shape {x.shape}, expected ({self.dim},)")
        d = self.dim
        out = np.zeros(d)
        for j in range(d):
            h = base_step * (1.0 + abs(x[j]))
            xp = x.copy()
            xm = x.copy()
            xp[j] += h
            xm[j] -= h
            Ap, Cp = self.eval_AC(xp)
            Am, Cm = self.eval_AC(xm)
            out += ((Ap + Cp)[:, j] - (Am + Cm)[:, j]) / (2.0 * h)
        return out

    # -- single-state interface -----------------------------------------------

    def eval_AC(self, x: Array) -> tuple[Array, Array]:
        """Dense (A, C) at a single state."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ValueError(f"state has shape {x.shape}, expected ({self.dim},)")
        X = x[None, :]
        return self.A_many(X)[0].copy(), self.C_many(X)[0].copy()

    def divergence(self, x: Array) -> Array:
        """Analytic row-wise divergence of A + C at a single state."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ValueError(f"state has shape {x.shape}, expected ({self.dim},)")
        return self.div_many(x[None, :])[0]

    # -- drift ----------------------------------------------------------------

    def drift_many(self, X: Array, target) -> Array:
        """Stationary drift ``(A+C) grad_logp + div(A+C)`` for each row."""
        X = self._check_states(X)
        if target.dim != self.dim:
            raise ValueError(
                f"target dim {target.dim} does not match dynamics dim {self.dim}")
        grad = target.grad_many(X)
        const = self.constant_matrices()
        if const is not None:
            M = const[0] + const[1]
            return grad @ M.T
        M = self.A_many(X) + self.C_many(X)
        return np.einsum("nij,nj->ni", M, grad) + self.div_many(X)

    def drift(self, target, x: Array) -> Array:
        """Stationary drift at a single state."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ValueError(f"state has shape {x.shape}, expected ({self.dim},)")
        return self.drift_many(x[None, :], target)[0]
