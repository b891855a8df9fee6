import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kuramoto_wave.disorder import (
    admissibility, from_assignments, make_law, make_rng, read_fixture,
    sample_iid, write_fixture, write_sample_csv,
)


def test_make_law_mirrors_positive_half(law1, law2):
    assert law1.omegas.tolist() == [-1.0, 1.0]
    assert law1.lambdas.tolist() == [0.5, 0.5]
    assert law2.omegas.tolist() == [-10.0, -1.0, 1.0, 10.0]
    assert law2.indices.tolist() == [-2, -1, 1, 2]
    assert make_law(1, [0.5], [0.5]).omegas.tolist() == [-0.5, 0.5]


@pytest.mark.parametrize("om, la", [
    ([0.0], [0.5]),
    ([-1.0], [0.5]),
    ([1.0, 1.0], [0.25, 0.25]),
    ([2.0, 1.0], [0.25, 0.25]),
    ([1.0], [0.4]),
    ([1.0, 2.0], [0.5, 0.0]),
])
def test_make_law_rejects_bad_input(om, la):
    with pytest.raises(ValueError):
        make_law(len(om), om, la)


def test_dense_signed_maps_are_inverse(law2):
    idx = law2.indices
    assert np.array_equal(law2.signed(law2.dense(idx)), idx)
    assert np.array_equal(law2.dense(idx), np.arange(4))


def test_balanced_and_unbalanced_xi(law1):
    s = from_assignments(law1, [1, -1, 1, -1])
    assert np.allclose(s.xi, 0.0)
    s = from_assignments(law1, [1, 1, 1, -1])
    assert s.xi.tolist() == pytest.approx([-0.5, 0.5])
    s = from_assignments(law1, [1] * 10)
    assert s.xi[1] == pytest.approx(np.sqrt(10) * 0.5)


def test_invalid_index_reports_position(law1):
    with pytest.raises(ValueError, match="position 2"):
        from_assignments(law1, [1, -1, 0, 1])


def test_iid_sample_reproducible_and_distinct(law2):
    a = sample_iid(law2, 500, 7)
    b = sample_iid(law2, 500, 7)
    c = sample_iid(law2, 500, 8)
    assert np.array_equal(a.assignments, b.assignments)
    assert not np.array_equal(a.assignments, c.assignments)
    assert a.counts.sum() == 500
    assert abs(a.xi.sum()) <= 1e-10 * np.sqrt(500)


def test_philox_streams_independent():
    x = make_rng(3, 0).random(5)
    y = make_rng(3, 1).random(5)
    assert not np.allclose(x, y)
    assert np.array_equal(x, make_rng(3, 0).random(5))


def test_admissibility_over_seeds(law1):
    worst = max(admissibility(sample_iid(law1, 400, s))["max_abs_xi"] for s in range(100))
    # Gaussian fluctuations of size 0.5; the envelope 400^0.12 is about 2.05
    assert worst < 400 ** 0.125 + 1.0
    assert admissibility(sample_iid(law1, 400, 7))["zeta"] == 0.12


@settings(max_examples=50, deadline=None)
@given(st.lists(st.sampled_from([-2, -1, 1, 2]), min_size=1, max_size=200))
def test_sample_invariants(assignments):
    law = make_law(2, [1.0, 3.0], [0.25, 0.25])
    s = from_assignments(law, assignments)
    assert s.empirical_props.sum() == pytest.approx(1.0, abs=1e-12)
    assert abs(s.xi.sum()) <= 1e-10 * max(1.0, np.sqrt(s.N))
    m = s.mirrored()
    assert np.allclose(m.xi, s.xi[::-1])
    again = from_assignments(law, s.assignments)
    assert np.array_equal(again.counts, s.counts)


def test_fixture_roundtrip(tmp_path, law2):
    s = sample_iid(law2, 40, 11)
    p = tmp_path / "fix.txt"
    write_fixture(s, p)
    assert p.read_text().split("\n")[0] == "2 40 11"
    back = read_fixture(p, law2)
    assert np.array_equal(back.assignments, s.assignments)
    assert back.seed == 11
    write_sample_csv(s, tmp_path / "s.csv")
    assert (tmp_path / "s.csv").read_text().startswith("k,omega,lambda,lambda_N,xi_N")


def test_first_order_drift(law1):
    s = from_assignments(law1, [1, 1, 1, -1])
    assert s.first_order_drift(0.1) == pytest.approx(0.1 * (0.5 * 1 + (-0.5) * -1))
