"""Shared independent oracles for the test suite.

Everything here is deliberately written as plain loops over explicit
formulas so it cannot share a code path with the library implementations it
checks.
"""

import numpy as np


def fd_gradient(f, x, step=1e-5):
    """Central finite-difference gradient of a scalar function."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    for j in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[j] += step
        xm[j] -= step
        out[j] = (f(xp) - f(xm)) / (2.0 * step)
    return out


def rel_err(approx, exact):
    approx = np.asarray(approx, dtype=float)
    exact = np.asarray(exact, dtype=float)
    denom = max(np.max(np.abs(exact)), 1e-12)
    return np.max(np.abs(approx - exact)) / denom


def svgd_reference(positions, grad_logp_fn, h):
    """Classic kernelized score update, direct double loop.

    v_i = (1/N) sum_j [ k(x_i,x_j) grad_logp(x_j) + grad2_k(x_i,x_j) ]
    with k(x,y) = exp(-||x-y||^2/h) and grad2 taken in the second argument.
    """
    positions = np.asarray(positions, dtype=float)
    n, d = positions.shape
    out = np.zeros((n, d))
    for i in range(n):
        acc = np.zeros(d)
        for j in range(n):
            diff = positions[i] - positions[j]
            k = np.exp(-np.dot(diff, diff) / h)
            acc += k * grad_logp_fn(positions[j]) + (2.0 / h) * diff * k
        out[i] = acc / n
    return out


def stein_term(target, spec, x0, y, h):
    """Diffusion Stein operator applied to k(x0, .), evaluated at y.

    Direct formula: f(y) k(x0, y) + (A(y)+C(y)) grad2_k(x0, y).
    """
    x0 = np.asarray(x0, dtype=float)
    y = np.asarray(y, dtype=float)
    A, C = spec.eval_AC(y)
    diff = x0 - y
    k = np.exp(-np.dot(diff, diff) / h)
    f = (A + C) @ target.grad_logp(y) + spec.divergence(y)
    return f * k + (A + C) @ ((2.0 / h) * diff * k)


def gauss_hermite_stein_expectation(target, spec, x0, h, n_nodes=60):
    """E over a standard 2D Gaussian of the Stein term, by tensor quadrature.

    Only valid when the target is the standard Gaussian on (theta, r); the
    probabilists' Hermite rule integrates against exp(-t^2/2).
    """
    nodes, weights = np.polynomial.hermite_e.hermegauss(n_nodes)
    weights = weights / np.sqrt(2.0 * np.pi)
    total = np.zeros(2)
    for a, wa in zip(nodes, weights):
        for b, wb in zip(nodes, weights):
            total += wa * wb * stein_term(target, spec, x0,
                                          np.array([a, b]), h)
    return total
