import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kuramoto_wave.spaces import (
    PROBABILITY_BOUND, GridSpec, ProfileField, SignedMeasureField, ZeroMeanError,
    convolve_J, default_grid, from_vector, inner_Hminus1, norm_H1, norm_Halpha,
    norm_Hminus1, to_vector, vector_weights, weighted_bracket, write_field_csv,
    write_fourier_csv,
)

SQPI = np.sqrt(np.pi)


def field(grid, fn):
    return ProfileField.from_function(grid, lambda k, th: fn(th))


def test_grid_validation(law1):
    with pytest.raises(ValueError):
        GridSpec(100, 10, law1)
    with pytest.raises(ValueError):
        GridSpec(64, 32, law1)


@pytest.mark.parametrize("fn, expected", [
    (lambda th: 0 * th, 0.0),
    (np.cos, SQPI),
    (lambda th: np.cos(3 * th), 3 * SQPI),
])
def test_norm_H1_analytic(grid1, fn, expected):
    assert norm_H1(field(grid1, fn)) == pytest.approx(expected, abs=1e-12)


def test_norm_H1_rejects_mass(grid1):
    with pytest.raises(ZeroMeanError):
        norm_H1(field(grid1, lambda th: 1 + np.cos(th)))


@pytest.mark.parametrize("fn, expected", [
    (lambda th: 0 * th, 0.0),
    (np.cos, SQPI),
    (lambda th: np.sin(2 * th), SQPI / 2),
])
def test_norm_Hminus1_analytic(grid1, fn, expected):
    assert norm_Hminus1(field(grid1, fn)) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("alpha, fn, expected", [
    (0.0, np.sin, SQPI),
    (2.0, np.sin, 2 * SQPI),
    (-2.0, lambda th: np.sin(2 * th), np.sqrt(np.pi / 25)),
])
def test_norm_Halpha_analytic(grid1, alpha, fn, expected):
    assert norm_Halpha(field(grid1, fn), alpha) == pytest.approx(expected, abs=1e-12)


def test_norm_Halpha_range(grid1):
    with pytest.raises(ValueError):
        norm_Halpha(field(grid1, np.sin), 2.5)


def test_probability_bound_single_atoms(grid1):
    # a single atom maximizes every coefficient; brute force over its position
    worst = 0.0
    for phi in np.linspace(0, 2 * np.pi, 97):
        m = SignedMeasureField(grid1, (np.array([phi]), np.array([0.3 * phi])))
        worst = max(worst, norm_Hminus1(m))
        assert np.abs(m.c).max() <= 1 / np.pi + 1e-15
    assert worst <= PROBABILITY_BOUND + 0.01
    assert PROBABILITY_BOUND == pytest.approx(np.sqrt(np.pi / 3))


def test_probability_bound_random_atoms(grid1, rng):
    for _ in range(50):
        n = rng.integers(1, 20)
        m = SignedMeasureField(grid1, tuple(rng.uniform(0, 2 * np.pi, n) for _ in range(2)))
        assert norm_Hminus1(m) <= PROBABILITY_BOUND + 0.01


def test_uniform_atoms_small(grid1):
    atoms = 2 * np.pi * np.arange(256) / 256
    m = SignedMeasureField(grid1, (atoms, atoms))
    assert norm_Hminus1(m) < 1e-12


def test_parseval_roundtrip(grid1, rng):
    M = grid1.n_modes
    c = rng.normal(size=(2, M + 1))
    s = rng.normal(size=(2, M + 1))
    s[:, 0] = 0
    u = ProfileField.from_coeffs(grid1, c, s)
    assert np.allclose(u.c, c, atol=1e-12) and np.allclose(u.s, s, atol=1e-12)
    assert u.roundtrip_error() < 1e-10


def test_duality_inequality(grid1, rng):
    M = grid1.n_modes
    for _ in range(1000):
        decay = np.zeros(M + 1)
        decay[1:] = np.arange(1.0, M + 1) ** -rng.uniform(0, 2)
        cu, su, ch, sh = (rng.normal(size=(2, M + 1)) * decay for _ in range(4))
        u = ProfileField.from_coeffs(grid1, cu, su)
        h = ProfileField.from_coeffs(grid1, ch, sh)
        assert abs(weighted_bracket(u, h)) <= norm_Hminus1(u) * norm_H1(h) * (1 + 1e-12) + 1e-14


def test_convolve_J_cases(grid1):
    th = grid1.theta
    assert np.abs(convolve_J(np.full_like(th, 1 / (2 * np.pi)), 1.0)).max() < 1e-14
    assert np.allclose(convolve_J(np.cos(th) / np.pi, 1.0), -np.sin(th), atol=1e-13)
    assert np.allclose(convolve_J(np.sin(th) / np.pi, 2.0), 2 * np.cos(th), atol=1e-13)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 20), st.floats(-3, 3), st.floats(-3, 3))
def test_convolve_J_kills_higher_modes(n, a, b):
    th = 2 * np.pi * np.arange(128) / 128
    u = a * np.cos(n * th) + b * np.sin(n * th)
    assert np.abs(convolve_J(u, 1.7)).max() < 1e-12


def test_weighted_bracket_atoms(grid1):
    F = field(grid1, np.cos)
    assert weighted_bracket(field(grid1, lambda th: 0 * th), F) == 0.0
    atoms = 2 * np.pi * np.arange(64) / 64
    assert abs(weighted_bracket(SignedMeasureField(grid1, (atoms, atoms)), F)) < 1e-13
    single = SignedMeasureField(grid1, (atoms, np.array([0.0])))
    assert weighted_bracket(single, F) == pytest.approx(0.5, abs=1e-13)
    zero = ProfileField(grid1, np.zeros((2, grid1.n_grid)))
    assert weighted_bracket(single, zero) == 0.0


def test_measure_minus_smooth(grid1):
    atoms = 2 * np.pi * np.arange(64) / 64
    uni = field(grid1, lambda th: np.full_like(th, 1 / (2 * np.pi)))
    m = SignedMeasureField(grid1, (atoms, atoms)).minus(uni)
    assert m.zero_mean
    assert norm_Hminus1(m) < 1e-12


def test_vector_layout_and_weights(grid1, rng):
    v = rng.normal(size=2 * 2 * grid1.n_modes)
    u = from_vector(grid1, v)
    assert np.allclose(to_vector(u), v, atol=1e-12)
    assert np.sum(vector_weights(grid1) * v**2) == pytest.approx(norm_Hminus1(u) ** 2, rel=1e-12)
    assert inner_Hminus1(u, u) == pytest.approx(norm_Hminus1(u) ** 2, rel=1e-12)


def test_rotation_shift(grid1):
    u = field(grid1, lambda th: np.exp(np.cos(th)) - 0)
    quarter = u.rotate(np.pi / 2)
    assert np.allclose(quarter.values, np.roll(u.values, grid1.n_grid // 4, axis=1))
    odd = u.rotate(0.3)
    ref = field(grid1, lambda th: np.exp(np.cos(th - 0.3)))
    assert np.abs(odd.values - ref.values).max() < 1e-10


def test_resolution_independence_of_norms(law1):
    fn = lambda k, th: np.exp(np.sin(th)) - np.i0(1.0)
    vals = [norm_Hminus1(ProfileField.from_function(default_grid(law1, M), fn)) for M in (64, 128)]
    assert vals[0] == pytest.approx(vals[1], rel=1e-12)


def test_csv_writers(tmp_path, grid1):
    u = field(grid1, np.cos)
    write_field_csv(u, tmp_path / "f.csv")
    write_fourier_csv(u, tmp_path / "c.csv")
    lines = (tmp_path / "f.csv").read_text().splitlines()
    assert len(lines) == 1 + 2 * grid1.n_grid
    assert (tmp_path / "c.csv").read_text().splitlines()[0] == "k,n,c,s"
