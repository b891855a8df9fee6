"""Finite-N rotator dynamics with quenched frequencies, phase tracking and diagnostics.

    d phi_j = delta omega_j dt - (K/N) sum_l sin(phi_j - phi_l) dt + dB_j

The interaction is evaluated in O(N) through the order parameter.  Time is
physical unless a name says ``rescaled`` (physical time divided by sqrt(N)).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .disorder import DisorderSample, make_rng
from .linops import OutsideTubeError, SpectralModel, distance_to_M, mild_terms, proj_M
from .spaces import GridSpec, SignedMeasureField, coeffs_to_vector, to_vector, vector_to_coeffs

__all__ = [
    "RotatorEnsemble",
    "SimConfig",
    "PhaseTrack",
    "InsufficientData",
    "make_ensemble",
    "step",
    "run",
    "empirical_measure",
    "order_parameter",
    "prepare_initial",
    "sample_from_profile",
    "track_phase",
    "simulate_tracked",
    "wave_speed",
    "mild_residual",
    "window_length",
    "mild_residual_windows",
]

log = logging.getLogger(__name__)

# stream indices for the master seed
STREAM_NOISE = 1
STREAM_INITIAL = 2


class InsufficientData(RuntimeError):
    pass


@dataclass(eq=False)
class RotatorEnsemble:
    sample: DisorderSample
    K: float
    delta: float
    phases: np.ndarray
    t: float = 0.0
    rng: np.random.Generator | None = None
    noise_scale: float = 1.0
    _omega: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.phases = np.mod(np.asarray(self.phases, dtype=float), 2 * np.pi)
        if self.phases.shape != (self.sample.N,):
            raise ValueError("one phase per rotator is required")
        self._omega = self.delta * self.sample.omegas

    @property
    def N(self) -> int:
        return self.sample.N


def make_ensemble(sample, K, delta, phases, seed, noise_scale=1.0) -> RotatorEnsemble:
    return RotatorEnsemble(sample, K, delta, phases, 0.0, make_rng(seed, STREAM_NOISE), noise_scale)


def order_parameter(phases) -> complex:
    return complex(np.mean(np.exp(1j * np.asarray(phases))))


def _drift(phases, omega, K):
    C, S = np.cos(phases), np.sin(phases)
    return omega - K * (S * C.mean() - C * S.mean())


def step(ens: RotatorEnsemble, dt: float) -> RotatorEnsemble:
    """One Euler-Maruyama step, in place."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    incr = _drift(ens.phases, ens._omega, ens.K) * dt
    if ens.noise_scale:
        incr += ens.noise_scale * np.sqrt(dt) * ens.rng.standard_normal(ens.N)
    ens.phases = np.mod(ens.phases + incr, 2 * np.pi)
    ens.t += dt
    return ens


def run(ens: RotatorEnsemble, duration: float, dt: float) -> RotatorEnsemble:
    n = int(round(duration / dt))
    if n < 0 or abs(n * dt - duration) > 1e-9 * max(1.0, duration):
        raise ValueError(f"duration {duration} is not a multiple of dt {dt}")
    for _ in range(n):
        step(ens, dt)
    return ens


def empirical_measure(ens_or_phases, grid: GridSpec, sample: DisorderSample | None = None):
    if isinstance(ens_or_phases, RotatorEnsemble):
        phases, sample = ens_or_phases.phases, ens_or_phases.sample
    else:
        phases = np.asarray(ens_or_phases)
    dense = sample.law.dense(sample.assignments)
    atoms = []
    for k in range(sample.law.n_levels):
        a = phases[dense == k]
        if a.size == 0:
            raise ValueError(f"frequency level {int(sample.law.signed(k))} has no rotators")
        atoms.append(a)
    return SignedMeasureField(grid, tuple(atoms))


def sample_from_profile(values, grid: GridSpec, sample: DisorderSample, rng) -> np.ndarray:
    """Inverse-CDF draws, each rotator from its own level's density (grid values)."""
    dense = sample.law.dense(sample.assignments)
    out = np.empty(sample.N)
    th = np.concatenate([grid.theta, [2 * np.pi]])
    for k in range(sample.law.n_levels):
        idx = np.nonzero(dense == k)[0]
        if idx.size == 0:
            continue
        v = np.maximum(values[k], 0.0)
        # trapezoid CDF on the periodic grid
        cell = 0.5 * (v + np.roll(v, -1)) * grid.h
        cdf = np.concatenate([[0.0], np.cumsum(cell)])
        cdf /= cdf[-1]
        out[idx] = np.interp(rng.random(idx.size), cdf, th)
    return np.mod(out, 2 * np.pi)


def prepare_initial(kind: str, sample: DisorderSample, seed: int = 0, profile=None,
                    jitter: float = 0.0, phases=None) -> np.ndarray:
    rng = make_rng(seed, STREAM_INITIAL)
    if kind == "uniform":
        return rng.uniform(0, 2 * np.pi, sample.N)
    if kind == "from_profile":
        if profile is None:
            raise ValueError("from_profile needs a profile")
        vals = profile.values if hasattr(profile, "values") else profile
        out = sample_from_profile(vals, profile.grid, sample, rng)
        if jitter:
            out = out + jitter * rng.standard_normal(sample.N)
        return np.mod(out, 2 * np.pi)
    if kind == "explicit":
        arr = np.asarray(phases, dtype=float)
        if arr.shape != (sample.N,):
            raise ValueError("explicit phases must have length N")
        return arr.copy()
    raise ValueError(f"unknown initial condition kind {kind!r}")


@dataclass
class SimConfig:
    K: float
    delta: float
    N: int
    seed: int = 0
    dt: float = 5e-3
    t_final: float = 5.0  # rescaled
    T: float | None = None
    snapshot_every: int = 0
    ic: str = "from_profile"

    def __post_init__(self):
        if not 0 < self.dt <= 1e-2:
            raise ValueError("dt must lie in (0, 1e-2]")
        if self.T is not None and self.T < 1:
            raise ValueError("window length T must be at least 1")


def window_length(model: SpectralModel, C_L: float, C_P: float) -> float:
    """Smallest T >= 1 with exp(-gap T) <= 1 / (4 C_L C_P)."""
    return float(max(1.0, np.log(4 * C_L * C_P) / model.gap))


@dataclass
class PhaseTrack:
    T: float
    N: int
    times: np.ndarray  # physical window start times
    psi: np.ndarray  # unwrapped phases
    distances: np.ndarray  # distance to q_{psi_{n-1}} sampled at window ends
    stopped: bool
    stop_time: float | None = None
    stop_distance: float | None = None

    @property
    def rescaled_times(self) -> np.ndarray:
        return self.times / np.sqrt(self.N)

    @property
    def n_windows(self) -> int:
        return int(self.psi.size)


def _unwrap_next(prev, new):
    return prev + np.angle(np.exp(1j * (new - prev)))


def _measure_vector(mu):
    return to_vector(mu)


def track_phase(snapshots, model: SpectralModel, T: float, N: int, sigma: float) -> PhaseTrack:
    """Phases psi_n from (time, measure) snapshots at window boundaries n T."""
    times, psis, dists = [], [], []
    prev = None
    stopped, stop_t, stop_d = False, None, None
    for t, mu in snapshots:
        vec = _measure_vector(mu)
        if prev is not None:
            d = distance_to_M(model, vec, prev)
            dists.append(d)
            if d >= sigma:
                stopped, stop_t, stop_d = True, t, d
                break
        try:
            p = proj_M(model, vec, psi0=None if prev is None else prev)
        except OutsideTubeError as exc:
            if prev is None:
                raise OutsideTubeError(f"initial snapshot outside tube: {exc}", exc.distance)
            stopped, stop_t, stop_d = True, t, exc.distance
            break
        if prev is None:
            d0 = distance_to_M(model, vec, p)
            if d0 >= sigma:
                raise OutsideTubeError(f"initial distance {d0:.3e} >= {sigma:.3e}", d0)
        p = p if prev is None else _unwrap_next(prev, p)
        times.append(t)
        psis.append(p)
        prev = p
    return PhaseTrack(T, N, np.array(times), np.array(psis), np.array(dists), stopped, stop_t, stop_d)


def simulate_tracked(ens: RotatorEnsemble, model: SpectralModel, T: float, t_final: float,
                     dt: float, sigma: float, rescaled: bool = True, on_window=None) -> PhaseTrack:
    """Run the ensemble and project at window boundaries, stopping on tube exit.

    ``t_final`` is in rescaled units unless ``rescaled`` is False.
    """
    horizon = t_final * np.sqrt(ens.N) if rescaled else t_final
    n_windows = int(np.floor(horizon / T + 1e-9))
    n_sub = int(round(T / dt))
    h = T / n_sub
    grid = model.grid

    def snaps():
        yield ens.t, empirical_measure(ens, grid)
        for n in range(n_windows):
            for _ in range(n_sub):
                step(ens, h)
            if on_window is not None:
                on_window(n, ens)
            yield ens.t, empirical_measure(ens, grid)

    return track_phase(snaps(), model, T, ens.N, sigma)


def _ols_slope(x, y):
    xm = x - x.mean()
    return float(xm @ (y - y.mean()) / (xm @ xm)), xm


def wave_speed(track: PhaseTrack, burn_in: float = 0.0, min_windows: int = 10):
    """OLS slope of psi against rescaled time, after ``burn_in`` (rescaled).

    The standard error treats the residual as a random walk: the increments'
    scatter about the slope estimates the diffusion coefficient s^2, and the
    exact variance of the OLS slope under Cov(W_i, W_j) = s^2 min(t_i, t_j)
    is reported.
    """
    tau = track.rescaled_times
    keep = tau >= burn_in - 1e-12
    x, y = tau[keep], track.psi[keep]
    if x.size < min_windows:
        raise InsufficientData(f"only {x.size} windows after burn-in (need {min_windows})")
    slope, xm = _ols_slope(x, y)
    dx, dy = np.diff(x), np.diff(y)
    s2 = float(np.sum((dy - slope * dx) ** 2 / dx) / (dx.size - 1))
    w = xm / (xm @ xm)
    t0 = x - x[0]
    cov = s2 * np.minimum.outer(t0, t0)
    stderr = float(np.sqrt(max(w @ cov @ w, 0.0)))
    return slope, stderr


def _rotated_measure(mu: SignedMeasureField, alpha: float, q_field) -> SignedMeasureField:
    return SignedMeasureField(mu.grid, tuple(a + alpha for a in mu.atoms), q_field)


def _derivative_vector(grid, vec):
    c, s = vector_to_coeffs(grid, vec)
    n = np.arange(c.shape[-1])
    return coeffs_to_vector(n * s, -n * c)


def mild_residual(snapshots, model: SpectralModel, xi_N, N: int, psi: float, h: float):
    """||Z_hat(t)||_{-1,d} along one window.

    ``snapshots`` are measures (SignedMeasureField or ProfileField) at t = 0, h, 2h, ...
    relative to the window start; ``psi`` is the window's reference phase.
    Z_hat(t) = nu_t - e^{tL} nu_0 - int_0^t e^{(t-s)L} (D_N - d_theta R_N(nu_s)) ds,
    with nu = mu - q_psi, computed in the frame of ``model`` with a second-order
    exponential quadrature.
    """
    grid = model.grid
    alpha = model.psi - psi
    q_field = model.profile.field
    E = model.expm(h)
    lam = model.eigvals
    with np.errstate(divide="ignore", invalid="ignore"):
        hl = h * lam
        f1 = np.where(np.abs(hl) < 1e-6, h, np.expm1(hl) / lam)
        f2 = np.where(np.abs(hl) < 1e-6, h / 2, (np.expm1(hl) - hl) / (h * lam**2))
    if model._inv_right is None:
        model._inv_right = linalg.inv(model.right)
    V, Vi = model.right, model._inv_right
    Phi1 = np.real((V * f1) @ Vi)
    Phi2 = np.real((V * f2) @ Vi)

    def nu_of(mu):
        if isinstance(mu, SignedMeasureField):
            return _rotated_measure(mu, alpha, q_field)
        return mu.rotate(alpha) - q_field

    def forcing(nu):
        D, R = mild_terms(model, xi_N, N, nu)
        return D - _derivative_vector(grid, R)

    nus = [nu_of(mu) for mu in snapshots]
    vecs = [to_vector(n) for n in nus]
    fs = [forcing(n) for n in nus]
    Z = np.zeros_like(vecs[0])
    out = [0.0]
    for j in range(len(vecs) - 1):
        integral = Phi1 @ fs[j] + Phi2 @ (fs[j + 1] - fs[j])
        Z = E @ Z + vecs[j + 1] - E @ vecs[j] - integral
        out.append(model.norm(Z))
    return np.array(out)


def mild_residual_windows(ens: RotatorEnsemble, model: SpectralModel, T: float, n_windows: int,
                          dt: float, h: float, sigma: float | None = None) -> np.ndarray:
    """sup_t ||Z_hat|| in each of ``n_windows`` consecutive windows of length T."""
    grid = model.grid
    per_h = int(round(h / dt))
    n_h = int(round(T / h))
    if abs(per_h * dt - h) > 1e-12 or abs(n_h * h - T) > 1e-9:
        raise ValueError("T must be a multiple of h and h a multiple of dt")
    sups = []
    psi = None
    for _ in range(n_windows):
        mu0 = empirical_measure(ens, grid)
        psi = proj_M(model, to_vector(mu0), psi0=psi, sigma=sigma)
        snaps = [mu0]
        for _ in range(n_h):
            for _ in range(per_h):
                step(ens, dt)
            snaps.append(empirical_measure(ens, grid))
        sups.append(mild_residual(snaps, model, ens.sample.xi, ens.N, psi, h).max())
    return np.array(sups)
