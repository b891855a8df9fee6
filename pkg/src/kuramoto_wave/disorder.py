"""Finite symmetric disorder laws and quenched frequency samples.

Frequencies are labelled by signed indices ``-d..-1, 1..d``; internally every
array over the levels uses the dense order ``[-d, ..., -1, 1, ..., d]``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "DisorderLaw",
    "DisorderSample",
    "make_law",
    "sample_iid",
    "from_assignments",
    "make_rng",
    "admissibility",
    "write_fixture",
    "read_fixture",
    "write_sample_csv",
]

SUM_TOL = 1e-9


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Counter-based Philox generator; ``stream`` selects an independent key."""
    seed = int(seed) & 0xFFFFFFFFFFFFFFFF
    return np.random.Generator(np.random.Philox(key=[seed, int(stream)]))


@dataclass(frozen=True)
class DisorderLaw:
    d: int
    omegas: np.ndarray
    lambdas: np.ndarray

    def __post_init__(self):
        om = np.asarray(self.omegas, dtype=float)
        la = np.asarray(self.lambdas, dtype=float)
        if om.shape != (2 * self.d,) or la.shape != (2 * self.d,):
            raise ValueError("omegas and lambdas must have 2d entries")
        if not np.array_equal(om[: self.d][::-1], -om[self.d :]):
            raise ValueError("frequencies must satisfy omega^{-i} = -omega^{i}")
        if not np.array_equal(la[: self.d][::-1], la[self.d :]):
            raise ValueError("weights must satisfy lambda^{-i} = lambda^{i}")
        if np.any(la <= 0) or abs(la.sum() - 1.0) > SUM_TOL:
            raise ValueError(f"weights must be positive and sum to 1 (sum={la.sum()!r})")
        om.setflags(write=False)
        la.setflags(write=False)
        object.__setattr__(self, "omegas", om)
        object.__setattr__(self, "lambdas", la)

    @property
    def n_levels(self) -> int:
        return 2 * self.d

    @property
    def indices(self) -> np.ndarray:
        return np.concatenate([np.arange(-self.d, 0), np.arange(1, self.d + 1)])

    def dense(self, signed):
        """Map signed level indices to dense positions 0..2d-1."""
        signed = np.asarray(signed)
        return np.where(signed < 0, signed + self.d, signed + self.d - 1)

    def signed(self, dense):
        dense = np.asarray(dense)
        return np.where(dense < self.d, dense - self.d, dense - self.d + 1)

    def mirror(self, vec):
        """Relabel a per-level vector by k -> -k."""
        return np.asarray(vec)[::-1].copy()

    def __eq__(self, other):
        if not isinstance(other, DisorderLaw):
            return NotImplemented
        return (self.d == other.d and np.array_equal(self.omegas, other.omegas)
                and np.array_equal(self.lambdas, other.lambdas))

    def __hash__(self):
        return hash((self.d, self.omegas.tobytes(), self.lambdas.tobytes()))


def make_law(d: int, positive_omegas, positive_lambdas) -> DisorderLaw:
    """Build the symmetric law from its positive half.

    >>> make_law(1, [1.0], [0.5]).omegas
    array([-1.,  1.])
    """
    pw = np.atleast_1d(np.asarray(positive_omegas, dtype=float))
    pl = np.atleast_1d(np.asarray(positive_lambdas, dtype=float))
    if d < 1 or pw.shape != (d,) or pl.shape != (d,):
        raise ValueError(f"expected {d} positive frequencies and weights")
    if np.any(pw <= 0):
        raise ValueError("frequencies must be strictly positive")
    if np.any(np.diff(pw) <= 0):
        raise ValueError("frequencies must be distinct and strictly increasing")
    if np.any(pl <= 0):
        raise ValueError("weights must be strictly positive")
    if abs(2 * pl.sum() - 1.0) > SUM_TOL:
        raise ValueError(f"2 * sum(positive_lambdas) must equal 1, got {2 * pl.sum()!r}")
    omegas = np.concatenate([-pw[::-1], pw])
    lambdas = np.concatenate([pl[::-1], pl])
    return DisorderLaw(d, omegas, lambdas)


@dataclass(frozen=True)
class DisorderSample:
    law: DisorderLaw
    assignments: np.ndarray
    seed: int | None = None
    scale_exponent: float = 0.5
    counts: np.ndarray = field(init=False)
    empirical_props: np.ndarray = field(init=False)
    xi: np.ndarray = field(init=False)

    def __post_init__(self):
        a = np.asarray(self.assignments, dtype=np.int64)
        a.setflags(write=False)
        object.__setattr__(self, "assignments", a)
        counts = np.bincount(self.law.dense(a), minlength=self.law.n_levels)
        props = counts / a.size
        # exponent other than 1/2 is experimental
        xi = a.size ** self.scale_exponent * (props - self.law.lambdas)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "empirical_props", props)
        object.__setattr__(self, "xi", xi)

    @property
    def N(self) -> int:
        return int(self.assignments.size)

    @property
    def omegas(self) -> np.ndarray:
        """Per-rotator natural frequency omega_j."""
        return self.law.omegas[self.law.dense(self.assignments)]

    def first_order_drift(self, delta: float) -> float:
        return float(delta * np.dot(self.xi, self.law.omegas))

    def mirrored(self) -> "DisorderSample":
        return from_assignments(self.law, -self.assignments)


def from_assignments(law: DisorderLaw, assignments, seed=None) -> DisorderSample:
    a = np.asarray(assignments)
    if a.ndim != 1 or a.size == 0:
        raise ValueError("assignments must be a non-empty 1-d sequence")
    valid = set(law.indices.tolist())
    for pos, idx in enumerate(a.tolist()):
        if idx not in valid:
            raise ValueError(f"invalid level index {idx!r} at position {pos}")
    return DisorderSample(law, a.astype(np.int64), seed=seed)


def sample_iid(law: DisorderLaw, N: int, rng_seed: int) -> DisorderSample:
    """Draw N i.i.d. frequency labels from ``law`` (Philox stream 0 of the seed)."""
    if N < law.n_levels:
        raise ValueError(f"N={N} too small for {law.n_levels} levels")
    rng = make_rng(rng_seed, stream=0)
    dense = rng.choice(law.n_levels, size=N, p=law.lambdas)
    return DisorderSample(law, law.signed(dense).astype(np.int64), seed=int(rng_seed))


def admissibility(sample: DisorderSample, zeta: float = 0.12) -> dict:
    """max_k |xi_N^k| against the N^zeta envelope (diagnostic only)."""
    m = float(np.max(np.abs(sample.xi)))
    bound = sample.N ** zeta
    return {"max_abs_xi": m, "bound": bound, "zeta": zeta, "within": m <= bound}


def write_fixture(sample: DisorderSample, path) -> None:
    path = Path(path)
    seed = -1 if sample.seed is None else sample.seed
    lines = [f"{sample.law.d} {sample.N} {seed}"]
    lines += [str(int(i)) for i in sample.assignments]
    path.write_text("\n".join(lines) + "\n")


def read_fixture(path, law: DisorderLaw) -> DisorderSample:
    rows = Path(path).read_text().split("\n")
    d, N, seed = (int(x) for x in rows[0].split())
    if d != law.d:
        raise ValueError(f"fixture has d={d}, law has d={law.d}")
    a = [int(x) for x in rows[1:] if x.strip()]
    if len(a) != N:
        raise ValueError(f"fixture header says N={N}, found {len(a)} entries")
    return from_assignments(law, a, seed=None if seed < 0 else seed)


def write_sample_csv(sample: DisorderSample, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "omega", "lambda", "lambda_N", "xi_N"])
        law = sample.law
        for j, k in enumerate(law.indices):
            w.writerow([int(k), repr(float(law.omegas[j])), repr(float(law.lambdas[j])),
                        repr(float(sample.empirical_props[j])), repr(float(sample.xi[j]))])
