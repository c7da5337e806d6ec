"""Un-normalized target log-densities with analytic gradients.

All targets drop additive normalization constants (``logp`` of a standard
Gaussian at the origin is 0, not ``-D/2 log 2pi``).  Diagnostics therefore
never compare absolute ``logp`` values across different targets.

Targets over a parameter block ``theta`` can be augmented with a Gaussian
momentum block ``r`` and, optionally, a Gaussian thermostat block ``xi``,
producing a product density on the stacked state ``(theta, r, xi)``.
Evaluators are pure and stateless after construction, so they are safe to
call concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

Array = np.ndarray


# ---------------------------------------------------------------------------
# Block layout
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BlockLayout:
    """Half-open index ranges carving a state vector into theta / r / xi.

    The blocks are contiguous, ordered theta then r then xi, and cover
    ``[0, dim)``.  The r and xi ranges may be empty.
    """

    theta_range: tuple[int, int]
    r_range: tuple[int, int]
    xi_range: tuple[int, int]

    def __post_init__(self):
        t0, t1 = self.theta_range
        r0, r1 = self.r_range
        x0, x1 = self.xi_range
        if t0 != 0 or t1 <= t0:
            raise ValueError("theta block must start at 0 and be nonempty")
        if r0 != t1 or r1 < r0:
            raise ValueError("r block must start where theta ends")
        if x0 != r1 or x1 < x0:
            raise ValueError("xi block must start where r ends")

    @classmethod
    def theta_only(cls, d_theta: int) -> "BlockLayout":
        return cls((0, d_theta), (d_theta, d_theta), (d_theta, d_theta))

    @classmethod
    def with_momentum(cls, d_theta: int) -> "BlockLayout":
        return cls((0, d_theta), (d_theta, 2 * d_theta), (2 * d_theta, 2 * d_theta))

    @classmethod
    def with_thermostat(cls, d_theta: int) -> "BlockLayout":
        return cls((0, d_theta), (d_theta, 2 * d_theta), (2 * d_theta, 3 * d_theta))

    @property
    def dim(self) -> int:
        return self.xi_range[1]

    @property
    def d_theta(self) -> int:
        return self.theta_range[1] - self.theta_range[0]

    @property
    def d_r(self) -> int:
        return self.r_range[1] - self.r_range[0]

    @property
    def d_xi(self) -> int:
        return self.xi_range[1] - self.xi_range[0]

    @property
    def has_r(self) -> bool:
        return self.d_r > 0

    @property
    def has_xi(self) -> bool:
        return self.d_xi > 0

    @property
    def theta_slice(self) -> slice:
        return slice(*self.theta_range)

    @property
    def r_slice(self) -> slice:
        return slice(*self.r_range)

    @property
    def xi_slice(self) -> slice:
        return slice(*self.xi_range)


# ---------------------------------------------------------------------------
# Target densities
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TargetDensity:
    """An un-normalized log-density on R^dim with analytic gradient.

    Attributes:
        dim: Dimensionality ``D``.
        logp_fn: Batched evaluator, ``(N, D) -> (N,)``.
        grad_fn: Batched gradient, ``(N, D) -> (N, D)``.
        exact_sampler: Optional ``(rng, n) -> (n, D)`` drawing exact samples;
            present for Gaussian and mixture targets only.
        name: Short identifier used in run configs.
    """

    dim: int
    logp_fn: Callable[[Array], Array]
    grad_fn: Callable[[Array], Array]
    exact_sampler: Optional[Callable[[np.random.Generator, int], Array]] = None
    name: str = "target"

    def _check_point(self, x: Array) -> Array:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ValueError(
                f"point has shape {x.shape}, expected ({self.dim},)")
        if not np.all(np.isfinite(x)):
            raise ValueError("point has non-finite entries")
        return x

    def logp(self, x: Array) -> float:
        """Un-normalized log-density at a single point."""
        x = self._check_point(x)
        return float(self.logp_fn(x[None, :])[0])

    def grad_logp(self, x: Array) -> Array:
        """Analytic gradient of ``logp`` at a single point."""
        x = self._check_point(x)
        return self.grad_fn(x[None, :])[0]

    def logp_many(self, X: Array) -> Array:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.dim:
            raise ValueError(f"batch has shape {X.shape}, expected (N, {self.dim})")
        return self.logp_fn(X)

    def grad_many(self, X: Array) -> Array:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.dim:
            raise ValueError(f"batch has shape {X.shape}, expected (N, {self.dim})")
        return self.grad_fn(X)

    def sample_exact(self, rng: np.random.Generator, n: int) -> Array:
        if self.exact_sampler is None:
            raise ValueError(f"target '{self.name}' has no exact sampler")
        return self.exact_sampler(rng, n)

    @property
    def layout(self) -> BlockLayout:
        return BlockLayout.theta_only(self.dim)


def gaussian(mean: Array, cov: Array, name: str = "gauss") -> TargetDensity:
    """Multivariate Gaussian with the given mean and covariance."""
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    d = mean.shape[0]
    if cov.shape != (d, d):
        raise ValueError("covariance shape does not match mean")
    chol = np.linalg.cholesky(cov)  # raises if not SPD
    prec = np.linalg.inv(cov)
    prec = 0.5 * (prec + prec.T)

    def logp_fn(X: Array) -> Array:
        diff = X - mean
        return -0.5 * np.einsum("ni,ij,nj->n", diff, prec, diff)

    def grad_fn(X: Array) -> Array:
        return -(X - mean) @ prec

    def sampler(rng: np.random.Generator, n: int) -> Array:
        return mean + rng.standard_normal((n, d)) @ chol.T

    return TargetDensity(d, logp_fn, grad_fn, sampler, name)


def standard_gaussian(dim: int) -> TargetDensity:
    """Standard Gaussian N(0, I) in ``dim`` dimensions."""
    return gaussian(np.zeros(dim), np.eye(dim), name="gauss")


def gaussian_mixture(means: Array, weights: Array | None = None,
                     var: float = 1.0) -> TargetDensity:
    """Mixture of isotropic Gaussians with shared per-component variance.

    Log-density is computed with max-subtracted log-sum-exp so that inputs
    with coordinates up to +-50 never overflow.
    """
    means = np.atleast_2d(np.asarray(means, dtype=float))
    k, d = means.shape
    if weights is None:
        weights = np.full(k, 1.0 / k)
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (k,) or np.any(weights <= 0):
        raise ValueError("weights must be positive, one per component")
    weights = weights / weights.sum()
    if var <= 0:
        raise ValueError("component variance must be positive")
    logw = np.log(weights)

    def _terms(X: Array) -> Array:
        diff = X[:, None, :] - means[None, :, :]           # (N, K, D)
        return logw - 0.5 * np.sum(diff ** 2, axis=-1) / var

    def logp_fn(X: Array) -> Array:
        t = _terms(X)
        m = np.max(t, axis=1)
        return m + np.log(np.sum(np.exp(t - m[:, None]), axis=1))

    def grad_fn(X: Array) -> Array:
        t = _terms(X)
        t = t - np.max(t, axis=1, keepdims=True)
        resp = np.exp(t)
        resp /= resp.sum(axis=1, keepdims=True)             # (N, K)
        comp = (means[None, :, :] - X[:, None, :]) / var    # (N, K, D)
        return np.sum(resp[:, :, None] * comp, axis=1)

    def sampler(rng: np.random.Generator, n: int) -> Array:
        idx = rng.choice(k, size=n, p=weights)
        return means[idx] + np.sqrt(var) * rng.standard_normal((n, d))

    return TargetDensity(d, logp_fn, grad_fn, sampler, "gauss_mix")


_CRESCENT_Z = np.array([-2.0, 0.0, 2.0])


def tri_crescent_target() -> TargetDensity:
    """Equal-weight 3-component crescent mixture on R^2.

    Component i has un-normalized log-density
    ``-x**4/10 - (z_i*y - x**2)**2/2`` with ``z_i`` in {-2, 0, 2}.  Note the
    overall minus sign on the squared term: the plus-sign variant blows up at
    infinity and cannot serve as a sampling target, so the decaying form is
    used (the z-set makes it symmetric under ``y -> -y``, and
    ``logp(0, 0) = 0``).  No exact sampler exists for this target.
    """

    def _terms(X: Array) -> Array:
        x, y = X[:, 0], X[:, 1]
        s = _CRESCENT_Z[None, :] * y[:, None] - (x ** 2)[:, None]   # (N, 3)
        return -(x ** 4)[:, None] / 10.0 - 0.5 * s ** 2

    def logp_fn(X: Array) -> Array:
        t = _terms(X)
        m = np.max(t, axis=1)
        return m + np.log(np.sum(np.exp(t - m[:, None]), axis=1)) - np.log(3.0)

    def grad_fn(X: Array) -> Array:
        x, y = X[:, 0], X[:, 1]
        s = _CRESCENT_Z[None, :] * y[:, None] - (x ** 2)[:, None]
        t = -(x ** 4)[:, None] / 10.0 - 0.5 * s ** 2
        t = t - np.max(t, axis=1, keepdims=True)
        w = np.exp(t)
        w /= w.sum(axis=1, keepdims=True)
        dt_dx = -0.4 * (x ** 3)[:, None] + 2.0 * x[:, None] * s
        dt_dy = -_CRESCENT_Z[None, :] * s
        return np.stack([np.sum(w * dt_dx, axis=1),
                         np.sum(w * dt_dy, axis=1)], axis=1)

    return TargetDensity(2, logp_fn, grad_fn, None, "tri_crescent")


# ---------------------------------------------------------------------------
# Augmentation with momentum / thermostat blocks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AugmentedTarget:
    """Product target ``pi(theta) N(r | 0, s2 I) [N(xi | a*1, 1/mu I)]``.

    Duck-types as a :class:`TargetDensity` over the stacked state.  The
    density factorizes, so the theta-block gradient equals the base target's
    gradient at every point.

    Attributes:
        base: Target over the theta block.
        momentum_var: Momentum variance ``s2 > 0``.
        thermostat: Optional ``(friction, mu)`` pair giving the xi block a
            ``N(friction * 1, 1/mu I)`` factor.
        layout: Block layout of the stacked state.
    """

    base: TargetDensity
    momentum_var: float
    thermostat: Optional[tuple[float, float]]
    layout: BlockLayout

    @property
    def dim(self) -> int:
        return self.layout.dim

    @property
    def name(self) -> str:
        return self.base.name + ("+r+xi" if self.thermostat else "+r")

    def _split(self, X: Array):
        lo = self.layout
        return X[:, lo.theta_slice], X[:, lo.r_slice], X[:, lo.xi_slice]

    def logp_fn(self, X: Array) -> Array:
        theta, r, xi = self._split(X)
        out = self.base.logp_many(theta)
        out = out - 0.5 * np.sum(r ** 2, axis=1) / self.momentum_var
        if self.thermostat is not None:
            friction, mu = self.thermostat
            out = out - 0.5 * mu * np.sum((xi - friction) ** 2, axis=1)
        return out

    def grad_fn(self, X: Array) -> Array:
        theta, r, xi = self._split(X)
        out = np.empty_like(X)
        lo = self.layout
        out[:, lo.theta_slice] = self.base.grad_many(theta)
        out[:, lo.r_slice] = -r / self.momentum_var
        if self.thermostat is not None:
            friction, mu = self.thermostat
            out[:, lo.xi_slice] = -mu * (xi - friction)
        return out

    # TargetDensity interface -------------------------------------------------

    def logp(self, x: Array) -> float:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ValueError(f"point has shape {x.shape}, expected ({self.dim},)")
        return float(self.logp_fn(x[None, :])[0])

    def grad_logp(self, x: Array) -> Array:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ValueError(f"point has shape {x.shape}, expected ({self.dim},)")
        return self.grad_fn(x[None, :])[0]

    def logp_many(self, X: Array) -> Array:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.dim:
            raise ValueError(f"batch has shape {X.shape}, expected (N, {self.dim})")
        return self.logp_fn(X)

    def grad_many(self, X: Array) -> Array:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.dim:
            raise ValueError(f"batch has shape {X.shape}, expected (N, {self.dim})")
        return self.grad_fn(X)

    @property
    def exact_sampler(self):
        if self.base.exact_sampler is None:
            return None

        def sampler(rng: np.random.Generator, n: int) -> Array:
            # Draw order: theta, then r, then xi.
            theta = self.base.sample_exact(rng, n)
            r = np.sqrt(self.momentum_var) * rng.standard_normal(
                (n, self.layout.d_r))
            blocks = [theta, r]
            if self.thermostat is not None:
                friction, mu = self.thermostat
                xi = friction + rng.standard_normal(
                    (n, self.layout.d_xi)) / np.sqrt(mu)
                blocks.append(xi)
            return np.concatenate(blocks, axis=1)

        return sampler

    def sample_exact(self, rng: np.random.Generator, n: int) -> Array:
        sampler = self.exact_sampler
        if sampler is None:
            raise ValueError(f"target '{self.name}' has no exact sampler")
        return sampler(rng, n)


def augment_with_momentum(t: TargetDensity, sigma2: float) -> AugmentedTarget:
    """Append a momentum block ``r ~ N(0, sigma2 I)`` to a target."""
    if sigma2 <= 0:
        raise ValueError("momentum variance must be positive")
    return AugmentedTarget(t, float(sigma2), None,
                           BlockLayout.with_momentum(t.dim))


def augment_with_thermostat(t: TargetDensity, sigma2: float,
                            friction: float, mu: float) -> AugmentedTarget:
    """Append momentum ``r ~ N(0, sigma2 I)`` and thermostat
    ``xi ~ N(friction * 1, 1/mu I)`` blocks to a target."""
    if sigma2 <= 0:
        raise ValueError("momentum variance must be positive")
    if mu <= 0:
        raise ValueError("thermostat precision mu must be positive")
    return AugmentedTarget(t, float(sigma2), (float(friction), float(mu)),
                           BlockLayout.with_thermostat(t.dim))
