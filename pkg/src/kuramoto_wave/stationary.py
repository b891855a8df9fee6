"""Synchronized stationary profiles of the disordered Fokker-Planck system."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .disorder import DisorderLaw
from .spaces import GridSpec, ProfileField, convolve_J, default_grid

__all__ = [
    "StationaryProfile",
    "S_delta",
    "S_table",
    "psi_delta",
    "solve_r",
    "build_profile",
    "rotate_profile",
    "fp_rhs_values",
    "stationarity_residual",
    "fixed_point_scan",
    "count_sign_changes",
    "uniform_profile",
]

log = logging.getLogger(__name__)

QUAD_TOL = 1e-12
R_LOW = 1e-6
R_HIGH = 1.0 - 1e-9
_GL_X, _GL_W = np.polynomial.legendre.leggauss(12)


class QuadratureError(RuntimeError):
    pass


def _quad(f, a, b):
    val, err = integrate.quad(f, a, b, epsabs=QUAD_TOL, epsrel=QUAD_TOL, limit=200)
    if not np.isfinite(val) or err > max(1e-9, 1e-9 * abs(val)):
        raise QuadratureError(f"quadrature on [{a}, {b}] reached only {err:.3e}")
    return val


def S_delta(i: int, theta: float, x: float, delta: float, law: DisorderLaw) -> float:
    """Unnormalized stationary density of level ``i`` (signed index) by adaptive quadrature.

    Uses ``(1 - e^{4 pi a}) int_0^theta g + e^{4 pi a} int_0^{2pi} g
    = int_0^theta g + e^{4 pi a} int_theta^{2pi} g`` with a = delta omega^i,
    g(u) = exp(-x cos u - 2 a u), which keeps both terms positive.
    """
    a = delta * law.omegas[int(law.dense(i))]
    g = lambda u: np.exp(-x * np.cos(u) - 2 * a * (u - theta))
    lower = _quad(g, 0.0, theta) if theta > 0 else 0.0
    upper = _quad(g, theta, 2 * np.pi) if theta < 2 * np.pi else 0.0
    return float(np.exp(x * np.cos(theta)) * (lower + np.exp(4 * np.pi * a) * upper))


def _cumulative_gl(fn, theta):
    """int_0^{theta_j} fn on a uniform grid (plus the full period), 12-point Gauss-Legendre per cell."""
    n = theta.size
    h = 2 * np.pi / n
    nodes = theta[:, None] + 0.5 * h * (_GL_X[None, :] + 1.0)
    cell = 0.5 * h * (fn(nodes) @ _GL_W)
    cum = np.concatenate([[0.0], np.cumsum(cell)])
    return cum[:-1], cum[-1]


def S_table(a: float, x: float, theta: np.ndarray) -> np.ndarray:
    """S on a uniform grid for one level with a = delta omega, via a cumulative table.

    S(theta) = e^{x cos theta} [int_0^theta g e^{2a theta} + e^{4 pi a} e^{2a theta} int_theta^{2pi} g]
    with g(u) = e^{-x cos u - 2 a u}; the factor e^{2a theta} is folded into g
    to keep the exponentials bounded.
    """
    cum, total = _cumulative_gl(lambda u: np.exp(-x * np.cos(u) - 2 * a * u), theta)
    tail = total - cum
    return np.exp(x * np.cos(theta) + 2 * a * theta) * (cum + np.exp(4 * np.pi * a) * tail)


def _level_stats(x, delta, law, n_quad):
    th = 2 * np.pi * np.arange(n_quad) / n_quad
    h = 2 * np.pi / n_quad
    S = np.stack([S_table(delta * w, x, th) for w in law.omegas])
    Z = h * S.sum(axis=1)
    return th, S, Z


def psi_delta(x: float, delta: float, law: DisorderLaw, n_quad: int = 1024) -> float:
    """sum_k lambda^k int cos(theta) S^k(theta, x) dtheta / Z^k(x).

    The integrands are smooth and periodic, so the grid rule converges
    geometrically; ``n_quad`` = 1024 is well past saturation for x < 60.
    """
    if x == 0:
        return 0.0
    th, S, Z = _level_stats(x, delta, law, n_quad)
    h = 2 * np.pi / n_quad
    m1 = h * S @ np.cos(th)
    return float(np.dot(law.lambdas, m1 / Z))


def fixed_point_scan(K, delta, law, rs=None, n_quad=1024):
    """g(r) = Psi_delta(2 K r) - r on a grid of r values."""
    rs = np.linspace(R_LOW, R_HIGH, 200) if rs is None else np.asarray(rs)
    return rs, np.array([psi_delta(2 * K * r, delta, law, n_quad) - r for r in rs])


def count_sign_changes(values) -> int:
    sg = np.sign(values)
    sg = sg[sg != 0]
    return int(np.count_nonzero(sg[1:] != sg[:-1]))


def solve_r(K: float, delta: float, law: DisorderLaw, tol: float = 1e-15,
            n_quad: int = 1024, n_scan: int = 64):
    """Positive synchronization level r_delta, or None if there is no sign change.

    Bisection on g(r) = Psi_delta(2Kr) - r over (1e-6, 1 - 1e-9).  A coarse scan
    first locates the bracket; if several sign changes show up, the largest
    root is taken and a warning is logged.
    """
    g = lambda r: psi_delta(2 * K * r, delta, law, n_quad) - r
    rs = np.linspace(R_LOW, R_HIGH, n_scan)
    gs = np.array([g(r) for r in rs])
    idx = np.nonzero(np.sign(gs[:-1]) * np.sign(gs[1:]) < 0)[0]
    if idx.size == 0:
        return None
    if idx.size > 1:
        log.warning("fixed-point map has %d sign changes at K=%g delta=%g", idx.size, K, delta)
    lo, hi = rs[idx[-1]], rs[idx[-1] + 1]
    glo = gs[idx[-1]]
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        gm = g(mid)
        if gm == 0:
            return float(mid)
        if np.sign(gm) == np.sign(glo):
            lo, glo = mid, gm
        else:
            hi = mid
    return float(0.5 * (lo + hi))


@dataclass(frozen=True, eq=False)
class StationaryProfile:
    law: DisorderLaw
    K: float
    delta: float
    r: float
    psi: float
    field: ProfileField
    Z: np.ndarray

    @property
    def grid(self) -> GridSpec:
        return self.field.grid

    @property
    def values(self) -> np.ndarray:
        return self.field.values

    def fixed_point_residual(self, n_quad=1024) -> float:
        return abs(self.r - psi_delta(2 * self.K * self.r, self.delta, self.law, n_quad))


def build_profile(K: float, delta: float, law: DisorderLaw, psi: float = 0.0,
                  grid: GridSpec | None = None, r: float | None = None) -> StationaryProfile:
    """q_{psi,delta}: normalized S^i / Z^i at x = 2 K r_delta, rotated by psi."""
    grid = default_grid(law) if grid is None else grid
    if r is None:
        r = solve_r(K, delta, law)
        if r is None:
            raise ValueError(f"no synchronized solution for K={K}, delta={delta}")
    x = 2 * K * r
    th = grid.theta
    S = np.stack([S_table(delta * w, x, th) for w in law.omegas])
    Z = grid.h * S.sum(axis=1)
    q = ProfileField(grid, S / Z[:, None])
    if psi:
        q = q.rotate(psi)
    drift = np.abs(q.masses - 1.0).max()
    if drift > 1e-9:
        raise ValueError(f"profile normalization drift {drift:.2e}")
    if np.any(q.values <= 0):
        raise ValueError("profile is not strictly positive on the grid")
    return StationaryProfile(law, float(K), float(delta), float(r), float(psi), q, Z)


def rotate_profile(profile: StationaryProfile, psi: float) -> StationaryProfile:
    """Same profile with rotation phase ``psi`` (absolute, not incremental)."""
    f = profile.field.rotate(psi - profile.psi)
    return StationaryProfile(profile.law, profile.K, profile.delta, profile.r, psi, f, profile.Z)


def uniform_profile(grid: GridSpec, K: float, delta: float) -> StationaryProfile:
    vals = np.full((grid.n_levels, grid.n_grid), 1.0 / (2 * np.pi))
    Z = np.full(grid.n_levels, 2 * np.pi)
    return StationaryProfile(grid.law, K, delta, 0.0, 0.0, ProfileField(grid, vals), Z)


def _spectral_d(values, order=1):
    n = values.shape[-1]
    k = np.fft.rfftfreq(n, 1.0 / n)
    F = np.fft.rfft(values, axis=-1) * (1j * k) ** order
    if n % 2 == 0 and order % 2 == 1:
        F[..., -1] = 0.0
    return np.fft.irfft(F, n=n, axis=-1)


def fp_rhs_values(values, law: DisorderLaw, K: float, delta: float):
    """1/2 p'' - (p (sum_k lambda^k J*p^k + delta omega))' on grid samples."""
    drift = np.tensordot(law.lambdas, convolve_J(values, K), axes=(0, 0))
    flux = values * (drift[None, :] + delta * law.omegas[:, None])
    return 0.5 * _spectral_d(values, 2) - _spectral_d(flux, 1)


def stationarity_residual(profile) -> float:
    vals = profile.values
    return float(np.abs(fp_rhs_values(vals, profile.law, profile.K, profile.delta)).max())
