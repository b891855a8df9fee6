"""Small-disorder expansion around the non-disordered synchronized profile.

At delta = 0 every component equals q0 = e^{x cos}/Z0 with x = 2 K r0 and
Z0 = 2 pi I0(x).  The first-order correction is q^i = q0 (1 + delta omega^i kappa).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .disorder import DisorderLaw, make_law
from .spaces import GridSpec, ProfileField
from .stationary import _cumulative_gl, build_profile, solve_r

__all__ = [
    "Delta0Context",
    "make_context",
    "kappa",
    "kappa_terms",
    "p0_explicit",
    "c_b",
    "b_first_order",
    "v_squared",
    "expansion_error",
    "fit_exponent",
]

_QOPTS = dict(epsabs=1e-13, epsrel=1e-13, limit=400)


@dataclass(frozen=True, eq=False)
class Delta0Context:
    K: float
    r0: float
    x: float
    Z0: float
    theta: np.ndarray
    q0: np.ndarray
    kappa: np.ndarray
    const_terms: tuple  # (third, fourth) terms of kappa; both constant in theta

    @property
    def h(self) -> float:
        return 2 * np.pi / self.theta.size


def _tail_integral(x, theta):
    """G(theta) = int_theta^{2pi} e^{-x cos u} du (scalar theta)."""
    return integrate.quad(lambda u: np.exp(-x * np.cos(u)), theta, 2 * np.pi, **_QOPTS)[0]


def kappa_terms(x: float, Z0: float):
    """The two theta-independent terms of kappa, by adaptive quadrature."""
    m1 = integrate.quad(lambda u: np.exp(x * np.cos(u)) * u, 0, 2 * np.pi, **_QOPTS)[0]
    dbl = integrate.quad(lambda u: np.exp(x * np.cos(u)) * _tail_integral(x, u),
                         0, 2 * np.pi, **_QOPTS)[0]
    return -2.0 * m1 / Z0, -4.0 * np.pi * dbl / Z0**2


def make_context(K: float, n_grid: int = 1024, r0: float | None = None) -> Delta0Context:
    if r0 is None:
        r0 = solve_r(K, 0.0, make_law(1, [1.0], [0.5]))
        if r0 is None:
            raise ValueError(f"K={K} is below the synchronization threshold")
    x = 2 * K * r0
    Z0 = integrate.quad(lambda u: np.exp(x * np.cos(u)), 0, 2 * np.pi, **_QOPTS)[0]
    th = 2 * np.pi * np.arange(n_grid) / n_grid
    q0 = np.exp(x * np.cos(th)) / Z0
    t3, t4 = kappa_terms(x, Z0)
    cum, total = _cumulative_gl(lambda u: np.exp(-x * np.cos(u)), th)
    G = total - cum
    kap = 2 * th + 4 * np.pi * G / Z0 + t3 + t4
    return Delta0Context(float(K), float(r0), float(x), float(Z0), th, q0, kap, (t3, t4))


def kappa(ctx: Delta0Context, theta) -> np.ndarray:
    """kappa at arbitrary points in [0, 2pi] (pointwise quadrature)."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    G = np.array([_tail_integral(ctx.x, t) for t in theta])
    return 2 * theta + 4 * np.pi * G / ctx.Z0 + sum(ctx.const_terms)


def _primitive_values(u: ProfileField):
    """Zero-mean primitive of each component, evaluated on the grid."""
    n = np.arange(u.c.shape[-1], dtype=float)
    n[0] = 1.0
    A, B = -u.s / n, u.c / n
    A[..., 0] = 0.0
    B[..., 0] = 0.0
    return ProfileField.from_coeffs(u.grid, A, B).values


def p0_explicit(ctx: Delta0Context, u: ProfileField) -> float:
    """Tangent projection at delta = 0 written through primitives of u.

    The weight 1 - 2 pi / (Z0^2 q0) integrates to zero, so the free constant of
    each primitive drops out.
    """
    grid = u.grid
    x, Z0 = ctx.x, ctx.Z0
    w = 1.0 - 2 * np.pi * np.exp(-x * np.cos(grid.theta)) / Z0
    U = _primitive_values(u)
    integral = grid.h * (U * w[None, :]).sum(axis=1)
    return float(Z0**2 / (Z0**2 - 4 * np.pi**2) * np.dot(grid.law.lambdas, integral))


def c_b(ctx: Delta0Context) -> float:
    """K r0 Z0^2 / (Z0^2 - 4 pi^2) int sin(theta) kappa q0 dtheta; equals 1."""
    integral = ctx.h * np.sum(np.sin(ctx.theta) * ctx.kappa * ctx.q0)
    return float(ctx.K * ctx.r0 * ctx.Z0**2 / (ctx.Z0**2 - 4 * np.pi**2) * integral)


def b_first_order(law: DisorderLaw, xi, delta: float) -> float:
    xi = np.asarray(xi, dtype=float)
    if abs(xi.sum()) > 1e-9 * max(1.0, np.abs(xi).max()):
        raise ValueError("xi must be balanced")
    return float(delta * np.dot(xi, law.omegas))


def v_squared(law: DisorderLaw, delta: float, coefficients=None) -> dict:
    """Limiting variance of b(xi_N) for i.i.d. disorder.

    xi_N is asymptotically Gaussian with covariance diag(lambda) - lambda lambda^T;
    ``coefficients`` are per-level drift coefficients (default: delta omega).
    """
    lam = law.lambdas
    cov = np.diag(lam) - np.outer(lam, lam)
    first = delta * law.omegas
    b = first if coefficients is None else np.asarray(coefficients, dtype=float)
    return {
        "exact_form": float(b @ cov @ b),
        "first_order": float(first @ cov @ first),
        "delta_sq_sum": float(delta**2 * np.dot(lam, law.omegas**2)),
        "displayed_linear": float(delta * np.dot(lam, law.omegas**2)),
    }


def expansion_error(law: DisorderLaw, K: float, delta: float, grid: GridSpec,
                    ctx: Delta0Context | None = None) -> float:
    """max over levels and grid of |q^i_delta - q0 - delta omega^i kappa q0|."""
    ctx = make_context(K, n_grid=grid.n_grid) if ctx is None else ctx
    if ctx.theta.size != grid.n_grid:
        raise ValueError("context grid and profile grid differ")
    q = build_profile(K, delta, law, grid=grid).values
    pred = ctx.q0[None, :] * (1 + delta * law.omegas[:, None] * ctx.kappa[None, :])
    return float(np.abs(q - pred).max())


def fit_exponent(xs, ys) -> float:
    """Least-squares slope of log y against log x."""
    return float(np.polyfit(np.log(np.asarray(xs)), np.log(np.abs(np.asarray(ys))), 1)[0])
