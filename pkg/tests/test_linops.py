import numpy as np
import pytest

from kuramoto_wave.disorder import sample_iid
from kuramoto_wave.spaces import (
    ProfileField, coeffs_to_vector, convolve_J, default_grid, from_vector,
    grid_to_coeffs, to_vector, weighted_bracket,
)
from kuramoto_wave.linops import (
    AssemblyError, OutsideTubeError, adjoint_matrix, apply_L, apply_L_adjoint,
    assemble_L, drift_b, drift_coefficients, estimate_constants, mild_terms,
    model_for, parity_split, projection_p, proj_M, semigroup_apply,
)
from kuramoto_wave.stationary import build_profile


@pytest.fixture(scope="module")
def m0(law1):
    return model_for(2.0, 0.0, law1, grid=default_grid(law1, 32))


@pytest.fixture(scope="module")
def md(law1):
    return model_for(2.0, 0.05, law1, grid=default_grid(law1, 32))


@pytest.fixture(scope="module")
def m2(law2):
    return model_for(5.0, 0.1, law2, grid=default_grid(law2, 32))


def smooth_field(grid, rng, decay=2.0):
    M = grid.n_modes
    w = np.zeros(M + 1)
    w[1:] = np.arange(1.0, M + 1) ** -decay
    c = rng.normal(size=(grid.n_levels, M + 1)) * w
    s = rng.normal(size=(grid.n_levels, M + 1)) * w
    return ProfileField.from_coeffs(grid, c, s)


def test_spectrum_structure(m0, md):
    for m in (m0, md):
        assert abs(m.eigvals[m.zero_index]) < 1e-8
        assert m.gap > 0
        assert np.all(m.nonzero_eigvals.real <= -m.gap + 1e-12)
        # real matrix: spectrum closed under conjugation
        w = np.sort_complex(m.eigvals)
        assert np.allclose(np.sort_complex(w.conj()), w, atol=1e-8)
    # without disorder the resolved spectrum is real; a few spurious pairs sit
    # at the truncation edge |lambda| ~ M^2/2 and move with M
    M = m0.grid.n_modes
    resolved = m0.eigvals[np.abs(m0.eigvals) < M**2 / 4]
    assert np.abs(resolved.imag).max() < 1e-8
    assert np.abs(md.eigvals.imag).max() > 1e-6


def test_gap_resolution_stable(law1):
    gaps = [model_for(2.0, 0.05, law1, grid=default_grid(law1, M)).gap for M in (64, 128)]
    assert abs(gaps[0] - gaps[1]) < 1e-4


def test_coarse_grid_rejected(law1):
    prof = build_profile(6.0, 0.0, law1, grid=default_grid(law1, 4, 16))
    with pytest.raises(AssemblyError):
        assemble_L(prof)


def test_projector_identities(md):
    assert md.p(md.zero_mode) == pytest.approx(1.0, abs=1e-8)
    P0 = md.P0_matrix
    assert np.abs(P0 @ P0 - P0).max() < 1e-8
    v = np.random.default_rng(1).normal(size=P0.shape[0])
    assert np.allclose(md.P0(v) + md.Ps(v), v)
    # p kills every other eigenvector
    others = np.delete(md.right, md.zero_index, axis=1)
    assert np.abs(md.p_vector @ others).max() < 1e-8


def test_zero_mode_annihilated(md):
    dq = md.profile.field.derivative()
    assert md.norm(to_vector(apply_L(md, dq))) < 1e-8
    assert projection_p(md, dq) == pytest.approx(1.0, abs=1e-8)


def test_matrix_matches_direct_application(md, rng):
    for _ in range(100):
        u = smooth_field(md.grid, rng, decay=0.0)
        direct = to_vector(apply_L(md, u))
        assert np.abs(md.matrix @ to_vector(u) - direct).max() <= 1e-8 * max(1, np.abs(direct).max())


def test_high_mode_diffusion_dominates(md):
    g = md.grid
    M = g.n_modes
    u = ProfileField(g, np.stack([np.sin(M * g.theta), 0 * g.theta]))
    Lu = apply_L(md, u)
    ratio = Lu.s[0, M] / (-M**2 / 2)
    assert abs(ratio - 1) < 0.1


def test_adjoint_bracket_symmetry(md, rng):
    for _ in range(20):
        u = smooth_field(md.grid, rng)
        v = smooth_field(md.grid, rng)
        lhs = weighted_bracket(apply_L(md, u), v)
        rhs = weighted_bracket(u, apply_L_adjoint(md, v))
        assert abs(lhs - rhs) <= 1e-8


def test_adjoint_of_constant(md):
    g = md.grid
    v = ProfileField(g, np.ones((g.n_levels, g.n_grid)))
    assert np.abs(apply_L_adjoint(md, v).values).max() < 1e-10


def test_adjoint_spectrum_matches(m0):
    w = np.sort(np.linalg.eigvals(adjoint_matrix(m0)).real)
    assert np.allclose(w, np.sort(m0.eigvals.real), atol=1e-6)


def test_rotation_covariance(law1):
    g = default_grid(law1, 32)
    a = model_for(2.0, 0.05, law1, grid=g)
    b = model_for(2.0, 0.05, law1, grid=g, psi=1.234)
    assert np.allclose(np.sort_complex(a.eigvals), np.sort_complex(b.eigvals), atol=1e-8)
    u = smooth_field(g, np.random.default_rng(0))
    assert b.p(a.rotate_vector(to_vector(u), 1.234)) == pytest.approx(a.p(to_vector(u)), abs=1e-10)


def test_parity_blocks(md):
    B, n_even = parity_split(md)
    A = B.T @ md.matrix @ B
    scale = np.abs(A).max()
    assert np.abs(A[:n_even, n_even:]).max() < 1e-10 * scale
    assert np.abs(A[n_even:, :n_even]).max() < 1e-10 * scale
    assert np.abs(md.p_vector @ B[:, :n_even]).max() < 1e-10


def test_proj_M_exact_and_shifted(md):
    q = md.q_vector()
    assert proj_M(md, q) == pytest.approx(0.0, abs=1e-12)
    g = md.grid
    shifted = ProfileField(g, np.roll(md.profile.values, 1, axis=1))
    assert proj_M(md, shifted) == pytest.approx(g.h, abs=1e-10)
    for psi in (0.7, 3.0, 5.5):
        assert proj_M(md, md.q_vector(psi)) == pytest.approx(psi, abs=1e-10)


def test_proj_M_second_order(md, rng):
    # moving q by h shifts the phase by -p(h) to first order (p(d_theta q) = 1
    # and rotating by +a adds -a d_theta q)
    u = to_vector(smooth_field(md.grid, rng, decay=3.0))
    u /= md.norm(u)
    q = md.q_vector()
    errs = []
    for eps in (1e-2, 1e-3):
        psi = proj_M(md, q + eps * u, psi0=0.0)
        psi = np.angle(np.exp(1j * psi))
        errs.append(abs(psi - (-eps * md.p(u))))
    slope = np.log(errs[0] / errs[1]) / np.log(10)
    assert slope >= 1.9


def test_proj_M_outside_tube(md, rng):
    u = to_vector(smooth_field(md.grid, rng))
    with pytest.raises(OutsideTubeError) as info:
        proj_M(md, md.q_vector() + 0.5 * u / md.norm(u), sigma=1e-3)
    assert info.value.distance > 1e-3


def test_drift_symmetric_and_linear(m2, md, rng):
    assert abs(drift_b(m2, [0.3, -0.3, -0.3, 0.3])) < 1e-10
    assert abs(drift_b(md, [0.0, 0.0])) == 0.0
    with pytest.raises(ValueError):
        drift_b(m2, [1.0, 0.0, 0.0, 0.0])
    for _ in range(10):
        x1 = rng.normal(size=4)
        x1 -= x1.mean()
        x2 = rng.normal(size=4)
        x2 -= x2.mean()
        a, b = rng.normal(size=2)
        lhs = drift_b(m2, a * x1 + b * x2)
        assert abs(lhs - (a * drift_b(m2, x1) + b * drift_b(m2, x2))) <= 1e-10
    beta = drift_coefficients(m2)
    x = np.array([0.2, -0.5, 0.1, 0.2])
    assert beta @ x == pytest.approx(drift_b(m2, x), abs=1e-12)


def test_drift_first_order(law1):
    g = default_grid(law1, 32)
    xi = np.array([-0.5, 0.5])
    gaps = []
    for delta in (0.02, 0.05):
        m = model_for(2.0, delta, law1, grid=g)
        first = delta * xi @ law1.omegas
        gaps.append(abs(drift_b(m, xi) / first - 1))
    assert gaps[1] < 0.01
    assert gaps[0] < gaps[1]


def test_mild_terms_without_fluctuation(md, rng):
    nu = smooth_field(md.grid, rng).centered()
    D, R = mild_terms(md, [0.0, 0.0], 100, nu)
    assert np.abs(D).max() == 0.0
    lam = md.grid.law.lambdas
    g = lam @ convolve_J(nu.values, md.profile.K)
    ref = coeffs_to_vector(*grid_to_coeffs(nu.values * g[None, :], md.grid.n_modes))
    assert np.allclose(R, ref, atol=1e-12)
    # quadratic in nu when xi = 0
    _, R2 = mild_terms(md, [0.0, 0.0], 100, nu * 0.1)
    assert np.allclose(R2, 0.01 * R, atol=1e-14)


def test_mild_terms_N_scaling(m2, law2):
    Cs = []
    for N in (100, 400, 1600):
        xi = sample_iid(law2, N, 3).xi
        D, _ = mild_terms(m2, xi, N, from_vector(m2.grid, np.zeros(m2.matrix.shape[0])))
        Cs.append(m2.norm(D) * np.sqrt(N) / np.abs(xi).max())
    Dk = max(m2.norm(mild_terms(m2, e, 1, from_vector(m2.grid, 0 * m2.zero_mode))[0]) for e in np.eye(4))
    assert max(Cs) <= 4 * Dk
    assert min(Cs) > 0


def test_semigroup(md, rng):
    u = smooth_field(md.grid, rng)
    assert np.allclose(to_vector(semigroup_apply(md, 0.0, u)), to_vector(u))
    z = md.zero_mode
    for t in (0.5, 3.0):
        assert np.allclose(semigroup_apply(md, t, z), z, atol=1e-9)
    with pytest.raises(ValueError):
        semigroup_apply(md, -1.0, u)
    v = md.Ps(to_vector(u))
    norms = [md.norm(semigroup_apply(md, t, v)) for t in (1.0, 2.0, 4.0)]
    rate = -np.polyfit([1.0, 2.0, 4.0], np.log(norms), 1)[0]
    assert rate >= 0.95 * md.gap


def test_constants(md):
    consts = estimate_constants(md, n_samples=20)
    assert consts["C_P"] >= 1.0
    assert consts["C_L"] >= 1.0
    v = md.Ps(np.random.default_rng(2).normal(size=md.zero_mode.size) / np.tile(np.arange(1, 33), 4))
    for t in (1.0, 2.0):
        assert md.norm(md.expm(t) @ v) <= consts["C_L"] * np.exp(-md.gap * t) * md.norm(v) * 1.5
