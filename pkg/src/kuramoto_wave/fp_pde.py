"""Mean-field Fokker-Planck system for the disorder-level densities.

    d_t p^i = 1/2 p^i'' - d_theta( p^i (sum_k lambda^k J*p^k + delta omega^i) )

Densities are carried as complex Fourier coefficients p_n (n = 0..M, rfft
normalization divided by the grid size, so p(theta) = sum_n p_n e^{i n theta}).
The interaction field has a single mode, (J*p)_1 = i pi K p_1, so the product
p (J*p) is computed exactly in coefficient space and no dealiasing is needed
beyond dropping mode M+1.  Diffusion and the constant advection are handled by
an integrating factor, the interaction term by classical RK4.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from .linops import OutsideTubeError, distance_to_M, proj_M
from .spaces import GridSpec, ProfileField, norm_Hminus1
from .stationary import fp_rhs_values

__all__ = [
    "PdeState",
    "PdeFailure",
    "from_field",
    "rhs",
    "rhs_values",
    "evolve",
    "distance_to_manifold",
    "decay_rate_to_M",
    "DecayFit",
    "perturb_profile",
]

log = logging.getLogger(__name__)

POSITIVITY_FLOOR = -1e-6


class PdeFailure(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class PdeState:
    grid: GridSpec
    coeffs: np.ndarray  # complex, shape (L, M + 1)
    t: float
    K: float
    delta: float

    @property
    def field(self) -> ProfileField:
        n = self.grid.n_modes
        c = 2 * self.coeffs.real
        s = -2 * self.coeffs.imag
        c[:, 0] = 2 * self.coeffs[:, 0].real
        return ProfileField.from_coeffs(self.grid, c[:, : n + 1], s[:, : n + 1])

    @property
    def masses(self) -> np.ndarray:
        return 2 * np.pi * self.coeffs[:, 0].real

    def min_value(self) -> float:
        return float(self.field.values.min())


def from_field(u: ProfileField, K: float, delta: float, t: float = 0.0) -> PdeState:
    z = 0.5 * (u.c - 1j * u.s)
    z[:, 0] = 0.5 * u.c[:, 0]
    return PdeState(u.grid, z.astype(complex), float(t), float(K), float(delta))


def _interaction(z, lam, K):
    """-i n (p F)_n with F = sum_k lambda^k J*p^k."""
    F1 = 1j * np.pi * K * (lam @ z[:, 1])
    Fm1 = np.conj(F1)
    n = np.arange(z.shape[1])
    prev = np.concatenate([np.conj(z[:, 1:2]), z[:, :-1]], axis=1)  # p_{n-1}
    nxt = np.concatenate([z[:, 1:], np.zeros((z.shape[0], 1))], axis=1)  # p_{n+1}
    prod = F1 * prev + Fm1 * nxt
    return -1j * n * prod


def _linear_symbol(grid, delta):
    n = np.arange(grid.n_modes + 1)
    om = grid.law.omegas
    return -0.5 * n[None, :] ** 2 - 1j * n[None, :] * delta * om[:, None]


def rhs(state: PdeState) -> np.ndarray:
    """Time derivative of the complex coefficients (mass mode is exactly zero)."""
    out = _linear_symbol(state.grid, state.delta) * state.coeffs
    out = out + _interaction(state.coeffs, state.grid.law.lambdas, state.K)
    out[:, 0] = 0.0
    return out


def rhs_values(field: ProfileField, K: float, delta: float) -> np.ndarray:
    """Grid-space right-hand side (shared with the stationary residual)."""
    return fp_rhs_values(field.values, field.grid.law, K, delta)


def evolve(state: PdeState, t_end: float, dt: float | None = None,
           snapshot_times=None, check_every: int = 200):
    """Lawson RK4 up to ``t_end``.

    Returns the final state, or (final, [snapshots]) when ``snapshot_times`` is given.
    """
    grid = state.grid
    M = grid.n_modes
    dt_max = 1.0 / M**2
    dt = dt_max if dt is None else dt
    if dt > dt_max * (1 + 1e-12):
        raise ValueError(f"dt={dt} exceeds the stability limit 1/n_modes^2 = {dt_max}")
    span = t_end - state.t
    if span < 0:
        raise ValueError("t_end is before the current time")
    snaps_t = sorted(snapshot_times) if snapshot_times is not None else []
    lam = grid.law.lambdas
    Lsym = _linear_symbol(grid, state.delta)
    z = state.coeffs.copy()
    t = state.t
    snaps = []
    si = 0
    while si < len(snaps_t) and snaps_t[si] <= t + 1e-12:
        snaps.append(replace(state, coeffs=z.copy(), t=t))
        si += 1
    targets = snaps_t[si:] + [t_end]
    step_count = 0
    for ti, target in enumerate(targets):
        last = ti == len(targets) - 1
        n_steps = int(np.ceil((target - t) / dt - 1e-9))
        if n_steps <= 0:
            if not last:
                snaps.append(replace(state, coeffs=z.copy(), t=t))
            continue
        h = (target - t) / n_steps
        E = np.exp(Lsym * h)
        E2 = np.exp(Lsym * h / 2)
        N = lambda y: _interaction(y, lam, state.K)
        for _ in range(n_steps):
            k1 = N(z)
            a = E2 * (z + 0.5 * h * k1)
            k2 = N(a)
            b = E2 * z + 0.5 * h * k2
            k3 = N(b)
            c = E * z + h * E2 * k3
            k4 = N(c)
            z = E * z + (h / 6) * (E * k1 + 2 * E2 * (k2 + k3) + k4)
            z[:, 0] = state.coeffs[:, 0]
            step_count += 1
            if step_count % check_every == 0:
                _check(replace(state, coeffs=z, t=t))
        t = target
        if not last:
            snaps.append(replace(state, coeffs=z.copy(), t=t))
    final = replace(state, coeffs=z, t=float(t_end))
    _check(final)
    return (final, snaps) if snapshot_times is not None else final


def _check(state):
    if not np.all(np.isfinite(state.coeffs)):
        raise PdeFailure(f"non-finite coefficients at t={state.t:.4f}")
    mn = state.min_value()
    if mn < POSITIVITY_FLOOR:
        raise PdeFailure(f"density went negative (min {mn:.3e}) at t={state.t:.4f}")
    if mn < 0:
        log.info("slightly negative density %.2e at t=%.3f", mn, state.t)


def _state_vector(state):
    c = 2 * state.coeffs.real[:, 1:]
    s = -2 * state.coeffs.imag[:, 1:]
    return np.concatenate([c, s], axis=1).ravel()


def distance_to_manifold(model, state, psi0=None):
    """(distance, psi) with psi = proj_M of the state; coarse phase scan if Newton fails."""
    vec = _state_vector(state)
    try:
        psi = proj_M(model, vec, psi0=psi0)
    except OutsideTubeError:
        grid_psi = np.linspace(0, 2 * np.pi, 256, endpoint=False)
        d = [distance_to_M(model, vec, p) for p in grid_psi]
        psi = float(grid_psi[int(np.argmin(d))])
    return distance_to_M(model, vec, psi), psi


@dataclass
class DecayFit:
    rate: float
    times: np.ndarray
    distances: np.ndarray
    monotone: bool
    accepted: bool


def decay_rate_to_M(model, state0: PdeState, t_fit=(1.0, 8.0), n_points: int = 15,
                    dt: float | None = None, floor: float = 1e-11) -> DecayFit:
    """Exponential rate of dist(p_t, M) over ``t_fit`` (points below ``floor`` dropped)."""
    times = np.linspace(t_fit[0], t_fit[1], n_points)
    _, snaps = evolve(state0, times[-1], dt=dt, snapshot_times=times)
    dists = []
    psi = model.psi
    for s in snaps:
        dval, psi = distance_to_manifold(model, s, psi0=psi)
        dists.append(dval)
    dists = np.array(dists)
    # points at round-off level carry no rate information
    use = dists > floor
    if use.sum() < 4:
        log.warning("fewer than 4 distances above %.0e; decay fit rejected", floor)
        return DecayFit(float("nan"), times, dists, False, False)
    rate = -float(np.polyfit(times[use], np.log(dists[use]), 1)[0])
    monotone = bool(np.all(np.diff(dists[use]) < 0))
    if not monotone:
        log.warning("distance to M is not monotone; decay fit rejected")
    return DecayFit(rate, times, dists, monotone, monotone)


def perturb_profile(field: ProfileField, eps: float, rng, decay: float = 2.0,
                    n_active: int = 8) -> ProfileField:
    """q (1 + a w) with w a random smooth field, mass kept, ||result - q||_{-1,d} = eps.

    Multiplicative perturbations keep sharply peaked profiles positive.
    """
    grid = field.grid
    L = grid.n_levels
    n = np.arange(1, n_active + 1)
    c = np.zeros((L, grid.n_modes + 1))
    s = np.zeros_like(c)
    c[:, 1 : n_active + 1] = rng.standard_normal((L, n_active)) * n ** (-decay)
    s[:, 1 : n_active + 1] = rng.standard_normal((L, n_active)) * n ** (-decay)
    w = ProfileField.from_coeffs(grid, c, s).values
    qw = field.values * w
    qw = qw - field.values * (grid.h * qw.sum(axis=1))[:, None]
    diff = ProfileField(grid, qw)
    a = eps / norm_Hminus1(diff)
    if a * np.abs(w).max() * 2 >= 1:
        log.warning("perturbation amplitude %.2e may break positivity", a)
    return ProfileField(grid, field.values + a * qw)
