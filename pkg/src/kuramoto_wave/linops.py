"""Galerkin realization of the linearized operator around a synchronized profile.

The discrete space is spanned by the real Fourier modes n = 1..n_modes of each
component (zero-mean fields); vectors are laid out as in ``spaces.to_vector``.
Every operator below acts on such coefficient vectors.

Sign conventions: the tangent projection is normalized by p(d_theta q) = 1.
Because q_psi(theta) = q_0(theta - psi), a tangent perturbation
+eps d_theta q moves the phase by -eps, so ``proj_M(q_psi + h) = psi - p(h) + O(h^2)``
and the phase drift produced by the disorder term D(xi) is ``-p(D(xi))``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .spaces import (
    GridSpec,
    ProfileField,
    SignedMeasureField,
    coeffs_to_grid,
    coeffs_to_vector,
    convolve_J,
    eval_coeffs,
    from_vector,
    grid_to_coeffs,
    rotate_coeffs,
    to_vector,
    vector_to_coeffs,
    vector_weights,
)
from .stationary import StationaryProfile, _spectral_d, build_profile, rotate_profile

__all__ = [
    "SpectralModel",
    "OutsideTubeError",
    "AssemblyError",
    "assemble_L",
    "apply_L",
    "apply_L_adjoint",
    "projection_p",
    "proj_M",
    "distance_to_M",
    "drift_field",
    "drift_b",
    "drift_coefficients",
    "mild_terms",
    "semigroup_apply",
    "estimate_constants",
    "calibrate_tube_radius",
    "parity_split",
]

log = logging.getLogger(__name__)

ZERO_MODE_TOL = 1e-6
COND_LIMIT = 1e8


class AssemblyError(RuntimeError):
    pass


class OutsideTubeError(RuntimeError):
    def __init__(self, msg, distance=None):
        super().__init__(msg)
        self.distance = distance


def _mean_field(profile):
    """F = sum_k lambda^k J * q^k on the grid."""
    return profile.law.lambdas @ convolve_J(profile.values, profile.K)


def _L_values(u, q, F, lam, omegas, K, delta):
    """Pointwise L u on grid values; u has shape (..., L, n)."""
    Ju = np.einsum("...kn,k->...n", convolve_J(u, K), lam)
    flux = u * F + q * Ju[..., None, :]
    return (0.5 * _spectral_d(u, 2) - delta * omegas[:, None] * _spectral_d(u, 1)
            - _spectral_d(flux, 1))


def _Lstar_values(v, q, F, lam, omegas, K, delta):
    dv = _spectral_d(v, 1)
    G = np.einsum("...kn,k->...n", q * dv, lam)  # sum_k lambda^k q^k v^k'
    out = 0.5 * _spectral_d(v, 2) + delta * omegas[:, None] * dv + dv * F
    out = out - convolve_J(G, K)[..., None, :]
    return out - out.mean(axis=-1, keepdims=True)


@dataclass(eq=False)
class SpectralModel:
    profile: StationaryProfile
    matrix: np.ndarray
    eigvals: np.ndarray
    right: np.ndarray
    left: np.ndarray
    zero_index: int
    gap: float
    zero_mode: np.ndarray
    p_vector: np.ndarray
    eig_condition: float
    zero_residual: float
    _inv_right: np.ndarray | None = field(default=None, repr=False)

    @property
    def grid(self) -> GridSpec:
        return self.profile.grid

    @property
    def psi(self) -> float:
        return self.profile.psi

    @property
    def weights(self) -> np.ndarray:
        return vector_weights(self.grid)

    def norm(self, vec) -> float:
        """H^{-1}_d norm of a coefficient vector."""
        return float(np.sqrt(np.sum(self.weights * np.abs(vec) ** 2)))

    def p(self, vec) -> float:
        return float(np.real(np.dot(self.p_vector, vec)))

    def P0(self, vec):
        return self.p(vec) * self.zero_mode

    def Ps(self, vec):
        return vec - self.P0(vec)

    @property
    def P0_matrix(self):
        return np.outer(self.zero_mode, self.p_vector)

    @property
    def nonzero_eigvals(self):
        return np.delete(self.eigvals, self.zero_index)

    def rotate_vector(self, vec, alpha):
        """Coefficient vector of u(. - alpha)."""
        c, s = vector_to_coeffs(self.grid, vec)
        return coeffs_to_vector(*rotate_coeffs(c, s, alpha))

    def p_at(self, psi, vec) -> float:
        """p_{psi}(u) using rotation covariance of the family."""
        return self.p(self.rotate_vector(vec, self.psi - psi))

    def q_vector(self, psi=None) -> np.ndarray:
        v = to_vector(self.profile.field)
        return v if psi is None else self.rotate_vector(v, psi - self.psi)

    def expm(self, t):
        if self.eig_condition <= COND_LIMIT:
            if self._inv_right is None:
                self._inv_right = linalg.inv(self.right)
            return np.real((self.right * np.exp(t * self.eigvals)) @ self._inv_right)
        log.info("eigenbasis condition %.2e: using scaling-and-squaring", self.eig_condition)
        return linalg.expm(t * self.matrix)

    def phi1(self, t):
        """t * phi_1(tL) = int_0^t e^{sL} ds (used by exponential integrators)."""
        lam = self.eigvals
        with np.errstate(divide="ignore", invalid="ignore"):
            f = np.where(np.abs(t * lam) < 1e-8, t, np.expm1(t * lam) / lam)
        if self._inv_right is None:
            self._inv_right = linalg.inv(self.right)
        return np.real((self.right * f) @ self._inv_right)


def _field_batch_matrix(profile, apply):
    grid = profile.grid
    n_basis = grid.n_levels * 2 * grid.n_modes
    c, s = vector_to_coeffs(grid, np.eye(n_basis))
    u = coeffs_to_grid(c, s, grid.n_grid)  # (B, L, n)
    out = apply(u)
    oc, os_ = grid_to_coeffs(out, grid.n_modes)
    return coeffs_to_vector(oc, os_).T  # column j = image of basis vector j


def assemble_L(profile: StationaryProfile, check: bool = True) -> SpectralModel:
    """Galerkin matrix, eigen-decomposition, gap and tangent projection."""
    F = _mean_field(profile)
    args = (profile.values, F, profile.law.lambdas, profile.law.omegas, profile.K, profile.delta)
    A = _field_batch_matrix(profile, lambda u: _L_values(u, *args))
    w, vl, vr = linalg.eig(A, left=True, right=True)
    z = to_vector(profile.field.derivative())
    zero_index = int(np.argmin(np.abs(w)))
    residual = float(np.sqrt(np.sum(vector_weights(profile.grid) * (A @ z) ** 2)))
    if check and residual > ZERO_MODE_TOL:
        raise AssemblyError(f"zero-mode residual {residual:.2e} exceeds {ZERO_MODE_TOL}")
    wl = vl[:, zero_index].conj()
    pairing = wl @ z
    if abs(pairing) < 1e-12:
        raise AssemblyError("left zero eigenvector is orthogonal to the tangent mode")
    p_vec = np.real(wl / pairing)
    others = np.delete(w, zero_index)
    gap = float(-np.max(others.real))
    cond = float(np.linalg.cond(vr))
    return SpectralModel(profile, A, w, vr, vl, zero_index, gap, z, p_vec, cond, residual)


def model_for(K, delta, law, grid=None, psi=0.0):
    return assemble_L(build_profile(K, delta, law, psi=psi, grid=grid))


def _as_vector(model, u):
    if isinstance(u, (ProfileField, SignedMeasureField)):
        return to_vector(u)
    return np.asarray(u, dtype=float)


def apply_L(model: SpectralModel, u: ProfileField) -> ProfileField:
    """Direct pseudospectral evaluation of L u (no matrix)."""
    prof = model.profile
    out = _L_values(u.values, prof.values, _mean_field(prof), prof.law.lambdas,
                    prof.law.omegas, prof.K, prof.delta)
    return ProfileField(u.grid, out)


def apply_L_adjoint(model: SpectralModel, v: ProfileField) -> ProfileField:
    """Adjoint of L for the weighted L^2 pairing, projected to zero mean."""
    prof = model.profile
    out = _Lstar_values(v.values, prof.values, _mean_field(prof), prof.law.lambdas,
                        prof.law.omegas, prof.K, prof.delta)
    return ProfileField(v.grid, out)


def adjoint_matrix(model: SpectralModel) -> np.ndarray:
    """Galerkin matrix of L* (weighted L^2 adjoint)."""
    prof = model.profile
    args = (prof.values, _mean_field(prof), prof.law.lambdas, prof.law.omegas, prof.K, prof.delta)
    return _field_batch_matrix(prof, lambda v: _Lstar_values(v, *args))


def projection_p(model: SpectralModel, u, psi: float | None = None) -> float:
    vec = _as_vector(model, u)
    return model.p(vec) if psi is None else model.p_at(psi, vec)


def distance_to_M(model: SpectralModel, h, psi: float) -> float:
    vec = _as_vector(model, h)
    return model.norm(vec - model.q_vector(psi))


def _initial_phase(model, vec):
    c, s = vector_to_coeffs(model.grid, vec)
    lam = model.grid.law.lambdas
    z = lam @ (c[:, 1] + 1j * s[:, 1])
    zq = lam @ (model.profile.field.c[:, 1] + 1j * model.profile.field.s[:, 1])
    return float(np.angle(z) - np.angle(zq) + model.psi)


def proj_M(model: SpectralModel, h, psi0: float | None = None, tol: float = 1e-10,
           max_iter: int = 50, sigma: float | None = None) -> float:
    """Phase psi with p_psi(h - q_psi) = 0 by damped Newton.

    Raises OutsideTubeError when Newton does not converge (or, with ``sigma``
    given, when the distance to the returned profile exceeds it).
    """
    vec = _as_vector(model, h)
    psi = _initial_phase(model, vec) if psi0 is None else float(psi0)
    q0 = model.q_vector()

    def residual(ps):
        # p_psi(h - q_psi) = p_0(R_{psi0 - psi} h - q_{psi0})
        hr = model.rotate_vector(vec, model.psi - ps)
        return model.p(hr - q0), hr

    f, hr = residual(psi)
    for _ in range(max_iter):
        if abs(f) <= tol:
            break
        # d/dpsi of R_{-psi} h is its theta-derivative
        c, s = vector_to_coeffs(model.grid, hr)
        n = np.arange(c.shape[-1])
        dfdpsi = model.p(coeffs_to_vector(n * s, -n * c))
        if dfdpsi == 0 or not np.isfinite(dfdpsi):
            break
        step = -f / dfdpsi
        lam = 1.0
        for _ in range(30):
            fn, hn = residual(psi + lam * step)
            if abs(fn) < abs(f):
                break
            lam *= 0.5
        psi, f, hr = psi + lam * step, fn, hn
    if not abs(f) <= tol:
        raise OutsideTubeError(f"Newton failed: residual {abs(f):.2e}",
                               distance=distance_to_M(model, vec, psi))
    psi = float(np.mod(psi, 2 * np.pi))
    if sigma is not None:
        dist = distance_to_M(model, vec, psi)
        if dist >= sigma:
            raise OutsideTubeError(f"distance {dist:.3e} >= tube radius {sigma:.3e}", distance=dist)
    return psi


def drift_field(model: SpectralModel, xi, psi: float | None = None) -> np.ndarray:
    """Coefficient vector of D(xi) = -d_theta(q sum_k xi^k J*q^k)."""
    prof = model.profile if psi is None else rotate_profile(model.profile, psi)
    Jq = convolve_J(prof.values, prof.K)
    Q = np.asarray(xi, dtype=float) @ Jq
    D = -_spectral_d(prof.values * Q[None, :], 1)
    return coeffs_to_vector(*grid_to_coeffs(D, model.grid.n_modes))


def drift_coefficients(model: SpectralModel) -> np.ndarray:
    """Per-level coefficients beta_k with b(xi) = sum_k beta_k xi^k (any extension off sum xi = 0)."""
    L = model.grid.n_levels
    return np.array([-model.p(drift_field(model, e)) for e in np.eye(L)])


def drift_b(model: SpectralModel, xi, tol: float = 1e-9) -> float:
    """Phase speed b(xi) on the N^{1/2} time scale: b = -p(D(xi)).

    For a symmetric sample this vanishes and to first order b = delta sum xi^k omega^k.
    """
    xi = np.asarray(xi, dtype=float)
    if abs(xi.sum()) > tol * max(1.0, np.abs(xi).max()):
        raise ValueError(f"xi must be balanced (sum = {xi.sum():.3e})")
    return -model.p(drift_field(model, xi))


def _mult_measure(nu, g_values, grid):
    """Coefficients of nu * g per component; atoms see g exactly through its Fourier series."""
    if not isinstance(nu, SignedMeasureField):
        return grid_to_coeffs(nu.values * g_values, grid.n_modes)
    M = grid.n_modes
    n = np.arange(M + 1)
    c = np.zeros((grid.n_levels, M + 1))
    s = np.zeros_like(c)
    gc, gs = grid_to_coeffs(g_values, grid.n_grid // 2 - 1)
    for k, a in enumerate(nu.atoms):
        ga = eval_coeffs(gc[k], gs[k], a)
        z = (ga[None, :] * np.exp(1j * np.multiply.outer(n, a))).mean(axis=1)
        c[k], s[k] = z.real / np.pi, z.imag / np.pi
    if nu.smooth is not None:
        sc, ss = grid_to_coeffs(nu.smooth.values * g_values, M)
        c, s = c - sc, s - ss
    return c, s


def mild_terms(model: SpectralModel, xi_N, N: int, nu, psi: float | None = None):
    """(D_N, R_N(nu)) as coefficient vectors, for the profile at phase ``psi``.

    D_N = -d(q sum_k (lambda_N^k - lambda^k) J*q^k) and
    R_N = (sum dlam J*q) nu + q sum dlam J*nu^k + (sum lambda_N^k J*nu^k) nu
    with dlam = xi_N / sqrt(N).  R_N is returned undifferentiated.
    """
    grid = model.grid
    prof = model.profile if psi is None else rotate_profile(model.profile, psi)
    lam = grid.law.lambdas
    dlam = np.asarray(xi_N, dtype=float) / np.sqrt(N)
    lamN = lam + dlam
    D = drift_field(model, dlam, psi=prof.psi)
    Jq = dlam @ convolve_J(prof.values, prof.K)
    # J*nu^k only needs the first mode of nu^k
    c1, s1 = nu.c[:, 1], nu.s[:, 1]
    th = grid.theta
    # J*u = -K pi (c1 sin - s1 cos) for u with first-mode coefficients (c1, s1)
    Jnu = -prof.K * np.pi * (np.multiply.outer(c1, np.sin(th)) - np.multiply.outer(s1, np.cos(th)))
    g1 = np.broadcast_to(Jq, (grid.n_levels, grid.n_grid)) + np.broadcast_to(lamN @ Jnu, (grid.n_levels, grid.n_grid))
    rc, rs = _mult_measure(nu, g1, grid)
    qc, qs = grid_to_coeffs(prof.values * (dlam @ Jnu)[None, :], grid.n_modes)
    R = coeffs_to_vector(rc + qc, rs + qs)
    return D, R


def semigroup_apply(model: SpectralModel, t: float, u):
    if t < 0:
        raise ValueError("t must be nonnegative")
    vec = _as_vector(model, u)
    out = vec.copy() if t == 0 else model.expm(t) @ vec
    if isinstance(u, ProfileField):
        return from_vector(model.grid, out)
    return out


def estimate_constants(model: SpectralModel, n_samples: int = 200, times=(0.5, 1, 2, 4, 8),
                       seed: int = 0, decay: float = 1.0):
    """Empirical C_P, C_L over random smooth fields (estimates, not bounds)."""
    rng = np.random.default_rng(seed)
    grid = model.grid
    M = grid.n_modes
    n = np.tile(np.concatenate([np.arange(1, M + 1)] * 2), grid.n_levels)
    P0 = model.P0_matrix
    Ps = np.eye(P0.shape[0]) - P0
    CP, CL = 0.0, 0.0
    exps = [(t, model.expm(t)) for t in times]
    for _ in range(n_samples):
        v = rng.standard_normal(n.size) * n ** (-decay)
        nv = model.norm(v)
        CP = max(CP, model.norm(P0 @ v) / nv, model.norm(Ps @ v) / nv)
        sv = Ps @ v
        ns = model.norm(sv)
        for t, E in exps:
            CL = max(CL, model.norm(E @ sv) / ns * np.exp(model.gap * t))
    return {"C_P": CP, "C_L": max(CL, 1.0)}


def calibrate_tube_radius(model: SpectralModel, n_trials: int = 200, seed: int = 0,
                          radii=None) -> float:
    """Largest radius where proj_M converges on all random perturbations tried."""
    rng = np.random.default_rng(seed)
    radii = np.geomspace(2.0, 0.01, 25) if radii is None else radii
    n = np.tile(np.concatenate([np.arange(1, model.grid.n_modes + 1)] * 2), model.grid.n_levels)
    dirs = rng.standard_normal((n_trials, n.size)) * n ** -1.0
    dirs /= np.array([model.norm(d) for d in dirs])[:, None]
    q = model.q_vector()
    for rad in radii:
        ok = True
        for d in dirs:
            try:
                proj_M(model, q + rad * d, psi0=model.psi)
            except OutsideTubeError:
                ok = False
                break
        if ok:
            return float(rad)
    return 0.0


def parity_split(model: SpectralModel):
    """Permutation + sizes separating even (E) and odd (O) fields.

    E: u^{-i}(-theta) = u^i(theta); O: u^{-i}(-theta) = -u^i(theta).  Returns
    an orthonormal change of basis whose first block spans E (profile at psi=0).
    """
    grid = model.grid
    L, M = grid.n_levels, grid.n_modes
    size = L * 2 * M
    idx = lambda k, part, n: k * 2 * M + part * M + (n - 1)  # part 0: cos, 1: sin
    even, odd = [], []
    for k in range(L // 2, L):
        km = L - 1 - k
        for n in range(1, M + 1):
            for part, sgn in ((0, 1.0), (1, -1.0)):
                # mirror map: cos coefficient kept, sin coefficient negated under theta -> -theta
                e = np.zeros(size)
                o = np.zeros(size)
                e[idx(k, part, n)] = 1.0
                e[idx(km, part, n)] = sgn
                o[idx(k, part, n)] = 1.0
                o[idx(km, part, n)] = -sgn
                even.append(e / np.sqrt(2))
                odd.append(o / np.sqrt(2))
    B = np.array(even + odd).T
    return B, len(even)
