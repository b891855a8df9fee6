"""Weighted negative Sobolev spaces on the torus, realized on a uniform grid.

Fourier convention (used everywhere in the package)::

    u(theta) = c_0/2 + sum_{n>=1} c_n cos(n theta) + s_n sin(n theta)
    c_n = (1/pi) int u cos(n .),   s_n = (1/pi) int u sin(n .)

Pairings are weighted by the disorder law, ``<u, f>_d = sum_k lambda^k <u^k, f^k>``,
and the H^{-1}_d norm is the exact dual of the H^1_d norm under that pairing:

    ||u||_{-1,d}^2 = pi sum_k lambda^k sum_{n>=1} (c_{n,k}^2 + s_{n,k}^2) / n^2

For a vector of probability measures this is at most sqrt(pi/3).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .disorder import DisorderLaw

__all__ = [
    "GridSpec",
    "ProfileField",
    "SignedMeasureField",
    "PROBABILITY_BOUND",
    "grid_to_coeffs",
    "coeffs_to_grid",
    "eval_coeffs",
    "atom_coeffs",
    "rotate_coeffs",
    "norm_H1",
    "norm_Hminus1",
    "norm_Halpha",
    "inner_Hminus1",
    "convolve_J",
    "weighted_bracket",
    "to_vector",
    "from_vector",
    "vector_weights",
    "write_field_csv",
    "write_fourier_csv",
]

PROBABILITY_BOUND = float(np.sqrt(np.pi / 3.0))


class ZeroMeanError(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    n_grid: int
    n_modes: int
    law: DisorderLaw

    def __post_init__(self):
        if self.n_grid < 4 or self.n_grid & (self.n_grid - 1):
            raise ValueError("n_grid must be a power of two")
        if self.n_modes < 1 or self.n_grid < 4 * self.n_modes:
            raise ValueError("need n_grid >= 4 * n_modes")

    @property
    def theta(self) -> np.ndarray:
        return 2 * np.pi * np.arange(self.n_grid) / self.n_grid

    @property
    def h(self) -> float:
        return 2 * np.pi / self.n_grid

    @property
    def n_levels(self) -> int:
        return self.law.n_levels

    @property
    def modes(self) -> np.ndarray:
        return np.arange(self.n_modes + 1)

    def with_resolution(self, n_grid, n_modes) -> "GridSpec":
        return GridSpec(n_grid, n_modes, self.law)


def default_grid(law: DisorderLaw, n_modes: int = 64, n_grid: int | None = None) -> GridSpec:
    return GridSpec(n_grid or 8 * n_modes, n_modes, law)


# --- transforms -------------------------------------------------------------

def grid_to_coeffs(values, n_modes):
    """(c, s) for n = 0..n_modes along the last axis of ``values``."""
    values = np.asarray(values, dtype=float)
    n = values.shape[-1]
    F = np.fft.rfft(values, axis=-1)[..., : n_modes + 1]
    return 2.0 * F.real / n, -2.0 * F.imag / n


def coeffs_to_grid(c, s, n_grid):
    c = np.asarray(c, dtype=float)
    s = np.asarray(s, dtype=float)
    M = c.shape[-1] - 1
    F = np.zeros(c.shape[:-1] + (n_grid // 2 + 1,), dtype=complex)
    F[..., : M + 1] = 0.5 * n_grid * (c - 1j * s)
    F[..., 0] = 0.5 * n_grid * c[..., 0]
    return np.fft.irfft(F, n=n_grid, axis=-1)


def eval_coeffs(c, s, points):
    """Evaluate one Fourier series (1-d c, s) at arbitrary points."""
    points = np.asarray(points, dtype=float)
    n = np.arange(1, len(c))
    ang = np.multiply.outer(points, n)
    return 0.5 * c[0] + np.cos(ang) @ c[1:] + np.sin(ang) @ s[1:]


def atom_coeffs(phases, n_modes):
    """Exact (c, s) of the probability measure (1/N) sum_j delta_{phase_j}."""
    phases = np.asarray(phases, dtype=float)
    n = np.arange(n_modes + 1)
    z = np.exp(1j * np.multiply.outer(n, phases)).mean(axis=1)
    return z.real / np.pi, z.imag / np.pi


def rotate_coeffs(c, s, alpha):
    """Coefficients of u(. - alpha) from those of u."""
    n = np.arange(c.shape[-1])
    ca, sa = np.cos(n * alpha), np.sin(n * alpha)
    return c * ca - s * sa, s * ca + c * sa


def derivative_coeffs(c, s, order=1):
    n = np.arange(c.shape[-1], dtype=float)
    for _ in range(order):
        c, s = n * s, -n * c
    return c, s


# --- fields -----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ProfileField:
    """Grid samples of a (2d)-vector of functions on the torus.

    ``values`` has shape (2d, n_grid); truncated Fourier coefficients
    ``c``, ``s`` (shape (2d, n_modes + 1)) are computed on construction.
    """
    grid: GridSpec
    values: np.ndarray
    c: np.ndarray = field(init=False, repr=False)
    s: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.n_levels, self.grid.n_grid):
            raise ValueError(f"values shape {v.shape} does not match grid")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        c, s = grid_to_coeffs(v, self.grid.n_modes)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "s", s)

    @classmethod
    def from_coeffs(cls, grid, c, s):
        return cls(grid, coeffs_to_grid(c, s, grid.n_grid))

    @classmethod
    def from_function(cls, grid, fn):
        """``fn(k_dense, theta)`` evaluated on the grid for each component."""
        th = grid.theta
        return cls(grid, np.stack([np.broadcast_to(fn(k, th), th.shape) for k in range(grid.n_levels)]))

    @property
    def zero_mean(self) -> bool:
        scale = max(1.0, float(np.abs(self.c).max()))
        return bool(np.all(np.abs(self.c[:, 0]) <= 1e-12 * scale))

    @property
    def masses(self) -> np.ndarray:
        return np.pi * self.c[:, 0]

    def centered(self) -> "ProfileField":
        return ProfileField(self.grid, self.values - self.values.mean(axis=1, keepdims=True))

    def derivative(self, order: int = 1) -> "ProfileField":
        c, s = derivative_coeffs(self.c, self.s, order)
        return ProfileField.from_coeffs(self.grid, c, s)

    def rotate(self, alpha: float) -> "ProfileField":
        """The field theta -> u(theta - alpha)."""
        g = self.grid
        shift = alpha / g.h
        k = round(shift)
        if abs(shift - k) < 1e-12:
            return ProfileField(g, np.roll(self.values, k, axis=1))
        F = np.fft.rfft(self.values, axis=1)
        n = np.arange(F.shape[1])
        return ProfileField(g, np.fft.irfft(F * np.exp(-1j * n * alpha), n=g.n_grid, axis=1))

    def roundtrip_error(self) -> float:
        back = coeffs_to_grid(self.c, self.s, self.grid.n_grid)
        return float(np.abs(back - self.values).max() / max(1.0, np.abs(self.values).max()))

    def __add__(self, other):
        return ProfileField(self.grid, self.values + other.values)

    def __sub__(self, other):
        if isinstance(other, ProfileField):
            return ProfileField(self.grid, self.values - other.values)
        return NotImplemented

    def __mul__(self, a):
        return ProfileField(self.grid, a * self.values)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class SignedMeasureField:
    """Per-component atom measures, optionally minus a smooth field.

    ``atoms[k]`` holds the atom locations of component k (each atom has mass
    1/len(atoms[k])).  With ``smooth`` given the object is the signed measure
    ``mu - smooth``.  Coefficients are exact atom sums, never smoothed.
    """
    grid: GridSpec
    atoms: tuple
    smooth: ProfileField | None = None
    c: np.ndarray = field(init=False, repr=False)
    s: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if len(self.atoms) != self.grid.n_levels:
            raise ValueError("one atom array per component is required")
        atoms = tuple(np.mod(np.asarray(a, dtype=float), 2 * np.pi) for a in self.atoms)
        for k, a in enumerate(atoms):
            if a.size == 0:
                raise ValueError(f"component {k} has no atoms")
        object.__setattr__(self, "atoms", atoms)
        M = self.grid.n_modes
        c = np.empty((len(atoms), M + 1))
        s = np.empty_like(c)
        for k, a in enumerate(atoms):
            c[k], s[k] = atom_coeffs(a, M)
        if self.smooth is not None:
            c = c - self.smooth.c
            s = s - self.smooth.s
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "s", s)

    def minus(self, profile: ProfileField) -> "SignedMeasureField":
        base = profile if self.smooth is None else self.smooth + profile
        return SignedMeasureField(self.grid, self.atoms, base)

    @property
    def zero_mean(self) -> bool:
        return bool(np.all(np.abs(self.c[:, 0]) <= 1e-12))


# --- norms and pairings -----------------------------------------------------

def _weighted_sum(u, weight_n):
    lam = u.grid.law.lambdas
    w = np.asarray(weight_n, dtype=float)
    return float(np.pi * np.sum(lam[:, None] * w[None, :] * (u.c[:, 1:] ** 2 + u.s[:, 1:] ** 2)))


def _require_zero_mean(u):
    if not u.zero_mean:
        raise ZeroMeanError("field components must have zero mean")


def norm_H1(u: ProfileField) -> float:
    """(sum_k lambda^k int (d/dtheta u^k)^2)^(1/2), derivative taken spectrally."""
    _require_zero_mean(u)
    n = np.arange(1, u.grid.n_modes + 1, dtype=float)
    return np.sqrt(_weighted_sum(u, n**2))


def norm_Hminus1(u) -> float:
    """Dual norm of ``norm_H1`` under the weighted pairing.

    The mass mode is ignored, so probability measures may be passed directly.
    """
    n = np.arange(1, u.grid.n_modes + 1, dtype=float)
    return np.sqrt(_weighted_sum(u, n**-2.0))


def norm_Halpha(u, alpha: float) -> float:
    if not -2.0 <= alpha <= 2.0:
        raise ValueError("alpha must lie in [-2, 2]")
    n = np.arange(1, u.grid.n_modes + 1, dtype=float)
    return np.sqrt(_weighted_sum(u, (1.0 + n**2) ** alpha))


def inner_Hminus1(u, v) -> float:
    lam = u.grid.law.lambdas
    n = np.arange(1, u.grid.n_modes + 1, dtype=float)
    prod = u.c[:, 1:] * v.c[:, 1:] + u.s[:, 1:] * v.s[:, 1:]
    return float(np.pi * np.sum(lam[:, None] * prod / n**2))


def convolve_J(values, K: float, h: float | None = None):
    """(J * u)(theta) = -K int sin(theta - psi) u(psi) dpsi on the grid.

    Works along the last axis; only the first Fourier mode of u survives.
    """
    values = np.asarray(values, dtype=float)
    n = values.shape[-1]
    h = 2 * np.pi / n if h is None else h
    th = 2 * np.pi * np.arange(n) / n
    C = h * values @ np.cos(th)
    S = h * values @ np.sin(th)
    return -K * (np.multiply.outer(C, np.sin(th)) - np.multiply.outer(S, np.cos(th)))


def weighted_bracket(m, F: ProfileField) -> float:
    """sum_k lambda^k <m^k, F^k>; atoms are evaluated exactly."""
    lam = F.grid.law.lambdas
    if isinstance(m, SignedMeasureField):
        total = 0.0
        for k, a in enumerate(m.atoms):
            total += lam[k] * eval_coeffs(F.c[k], F.s[k], a).mean()
        if m.smooth is not None:
            total -= weighted_bracket(m.smooth, F)
        return float(total)
    return float(F.grid.h * np.sum(lam[:, None] * m.values * F.values))


# --- coefficient vectors (basis for operators) ------------------------------

def to_vector(u) -> np.ndarray:
    """Stack [c_1..c_M, s_1..s_M] per component into one flat vector."""
    return np.concatenate([u.c[:, 1:], u.s[:, 1:]], axis=1).ravel()


def from_vector(grid: GridSpec, vec) -> ProfileField:
    c, s = vector_to_coeffs(grid, vec)
    return ProfileField.from_coeffs(grid, c, s)


def vector_to_coeffs(grid: GridSpec, vec):
    """Inverse of ``to_vector``; trailing axis of ``vec`` is the basis axis."""
    vec = np.asarray(vec)
    M, L = grid.n_modes, grid.n_levels
    blocks = vec.reshape(vec.shape[:-1] + (L, 2 * M))
    zeros = np.zeros(blocks.shape[:-1] + (1,))
    c = np.concatenate([zeros, blocks[..., :M]], axis=-1)
    s = np.concatenate([zeros, blocks[..., M:]], axis=-1)
    return c, s


def coeffs_to_vector(c, s) -> np.ndarray:
    return np.concatenate([c[..., 1:], s[..., 1:]], axis=-1).reshape(c.shape[:-2] + (-1,))


def vector_weights(grid: GridSpec, alpha: float = -1.0) -> np.ndarray:
    """Diagonal Gram weights so that ||u||_alpha^2 = sum w v^2 (alpha=-1 uses n^-2)."""
    n = np.arange(1, grid.n_modes + 1, dtype=float)
    wn = n**-2.0 if alpha == -1.0 else (n**2 if alpha == 1.0 else (1 + n**2) ** alpha)
    w = np.pi * grid.law.lambdas[:, None] * np.concatenate([wn, wn])[None, :]
    return w.ravel()


# --- I/O ----------------------------------------------------------------------

def write_field_csv(u: ProfileField, path) -> None:
    law = u.grid.law
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "theta", "value"])
        for j, k in enumerate(law.indices):
            for th, v in zip(u.grid.theta, u.values[j]):
                w.writerow([int(k), repr(float(th)), repr(float(v))])


def write_fourier_csv(u, path) -> None:
    law = u.grid.law
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "n", "c", "s"])
        for j, k in enumerate(law.indices):
            for n in range(u.c.shape[1]):
                w.writerow([int(k), n, repr(float(u.c[j, n])), repr(float(u.s[j, n]))])
