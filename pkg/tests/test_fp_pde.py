import numpy as np
import pytest

from kuramoto_wave.disorder import sample_iid
from kuramoto_wave.fp_pde import (
    PdeFailure, decay_rate_to_M, distance_to_manifold, evolve, from_field,
    perturb_profile, rhs, rhs_values,
)
from kuramoto_wave.linops import assemble_L
from kuramoto_wave.sde_sim import empirical_measure, make_ensemble, prepare_initial, run
from kuramoto_wave.spaces import (
    ProfileField, SignedMeasureField, default_grid, from_vector, norm_Hminus1,
)
from kuramoto_wave.stationary import build_profile, uniform_profile


@pytest.fixture(scope="module")
def grid(law1):
    return default_grid(law1, 32)


@pytest.fixture(scope="module")
def prof(law1, grid):
    return build_profile(2.0, 0.05, law1, grid=grid)


@pytest.fixture(scope="module")
def model(prof):
    return assemble_L(prof)


def coeff_field(state_like, z):
    return type(state_like)(state_like.grid, z, state_like.t, state_like.K, state_like.delta).field


def cos_bump(grid, amp):
    th = grid.theta
    return ProfileField(grid, np.stack([1 / (2 * np.pi) + amp * np.cos(th)] * grid.n_levels))


def test_rhs_basic(prof, grid):
    st = from_field(prof.field, 2.0, 0.05)
    assert np.abs(rhs(st)).max() < 1e-7
    uni = from_field(uniform_profile(grid, 2.0, 0.05).field, 2.0, 0.05)
    assert np.abs(rhs(uni)).max() == 0.0
    bumped = from_field(perturb_profile(prof.field, 0.05, np.random.default_rng(0)), 2.0, 0.05)
    out = rhs(bumped)
    assert np.all(out[:, 0] == 0)


def test_rhs_matches_grid_form(prof, rng):
    # exact coefficient products vs pseudospectral grid evaluation
    field = perturb_profile(prof.field, 0.05, rng)
    st = from_field(field, 2.0, 0.05)
    dz = rhs(st)
    grid_form = rhs_values(field, 2.0, 0.05)
    assert np.abs(coeff_field(st, dz).values - grid_form).max() < 1e-8 * np.abs(grid_form).max()


def test_profile_is_fixed_point(prof):
    out = evolve(from_field(prof.field, 2.0, 0.05), 10.0)
    assert norm_Hminus1(out.field - prof.field) <= 1e-7
    assert np.allclose(out.masses, 1.0, atol=1e-13)


def test_dt_limit_and_positivity(grid):
    st = from_field(cos_bump(grid, 0.01), 2.0, 0.0)
    with pytest.raises(ValueError):
        evolve(st, 1.0, dt=2.0 / grid.n_modes**2)
    bad = from_field(cos_bump(grid, 0.5), 2.0, 0.0)
    with pytest.raises(PdeFailure):
        evolve(bad, 0.01)


def test_uniform_instability_and_stability(grid):
    amp = 1e-3 / np.pi
    grow = evolve(from_field(cos_bump(grid, amp), 2.0, 0.0), 2.0)
    assert abs(grow.coeffs[0, 1]) > 1.5 * amp / 2
    times = np.linspace(0.0, 4.0, 9)
    _, snaps = evolve(from_field(cos_bump(grid, amp), 0.5, 0.0), 4.0, snapshot_times=times)
    a1 = np.array([abs(s.coeffs[0, 1]) for s in snaps])
    rate = np.polyfit(times, np.log(a1), 1)[0]
    # linearization about uniform: mode-1 rate (K - 1)/2
    assert rate == pytest.approx(-0.25, rel=0.05)


def test_mass_conservation(prof, rng):
    st = from_field(perturb_profile(prof.field, 0.05, rng), 2.0, 0.05)
    out = evolve(st, 3.0)
    assert np.array_equal(out.coeffs[:, 0], st.coeffs[:, 0])


def test_resolution_convergence(law1):
    coarse_g, fine_g = default_grid(law1, 32), default_grid(law1, 64)
    smooth = lambda g: ProfileField.from_function(
        g, lambda k, th: np.exp(2 * np.cos(th - 0.3 * k)) / (2 * np.pi * np.i0(2.0)))
    a = evolve(from_field(smooth(coarse_g), 2.0, 0.05), 5.0)
    b = evolve(from_field(smooth(fine_g), 2.0, 0.05), 5.0)
    M = coarse_g.n_modes
    diff = b.coeffs[:, : M + 1] - a.coeffs
    tail = b.coeffs[:, M + 1 :]
    n = np.arange(1, b.coeffs.shape[1])
    lam = law1.lambdas
    sq = np.concatenate([diff[:, 1:], tail], axis=1)
    # H^{-1}_d norm from complex coefficients: c^2 + s^2 = 4 |p_n|^2
    norm = np.sqrt(np.pi * np.sum(lam[:, None] * 4 * np.abs(sq) ** 2 / n**2))
    assert norm < 1e-8


def test_rotation_equivariance(prof, grid, rng):
    field = perturb_profile(prof.field, 0.05, rng)
    shift = 16
    rolled = ProfileField(grid, np.roll(field.values, shift, axis=1))
    a = evolve(from_field(field, 2.0, 0.05), 1.0).field.values
    b = evolve(from_field(rolled, 2.0, 0.05), 1.0).field.values
    assert np.abs(np.roll(a, shift, axis=1) - b).max() < 1e-10


def test_decay_along_eigenmode(model, prof):
    order = np.argsort(-model.eigvals.real)
    nonzero = [i for i in order if i != model.zero_index]
    j = nonzero[1]
    v = np.real(model.right[:, j])
    v /= model.norm(v)
    field = prof.field + from_vector(model.grid, 1e-4 * v)
    fit = decay_rate_to_M(model, from_field(field, 2.0, 0.05))
    assert fit.accepted
    assert fit.rate == pytest.approx(-model.eigvals[j].real, rel=0.05)


def test_tangent_perturbation_stays_close(model, prof):
    for eps in (1e-3, 1e-4):
        field = prof.field + prof.field.derivative() * eps
        d, psi = distance_to_manifold(model, from_field(field, 2.0, 0.05))
        assert d <= 10 * eps**2


def test_generic_perturbation_rate(model, prof):
    field = perturb_profile(prof.field, 1e-3, np.random.default_rng(5))
    fit = decay_rate_to_M(model, from_field(field, 2.0, 0.05))
    assert fit.accepted
    assert fit.rate >= 0.95 * model.gap


@pytest.mark.slow
def test_pde_sde_consistency(law1, prof, grid):
    # one realization is too noisy for a slope; use the RMS over four seeds
    p0 = perturb_profile(prof.field, 0.02, np.random.default_rng(9))
    pt = evolve(from_field(p0, 2.0, 0.05), 2.0).field
    Ns = [1000, 10_000, 100_000]
    rms = []
    for N in Ns:
        ds = []
        for seed in range(4):
            sample = sample_iid(law1, N, seed)
            phases = prepare_initial("from_profile", sample, seed, p0)
            ens = run(make_ensemble(sample, 2.0, 0.05, phases, seed=seed), 2.0, 2e-3)
            mu = empirical_measure(ens, grid)
            ds.append(norm_Hminus1(SignedMeasureField(grid, mu.atoms, pt)))
        rms.append(np.sqrt(np.mean(np.square(ds))))
    slope = np.polyfit(np.log(Ns), np.log(rms), 1)[0]
    assert -0.65 <= slope <= -0.35
