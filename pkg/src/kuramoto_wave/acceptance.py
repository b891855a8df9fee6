"""The twelve acceptance checks, each returning a ``CriterionResult``.

The ``fast`` suite holds the deterministic checks (1-7); ``full`` adds the
stochastic ensembles (8-12).
"""
from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import optimize, special

from . import asymptotics as asy
from . import fp_pde, linops
from . import sde_sim as sim
from .disorder import DisorderSample, from_assignments, make_law, make_rng, sample_iid
from .spaces import ProfileField, SignedMeasureField, default_grid, from_vector, norm_Hminus1
from .stationary import build_profile, solve_r

__all__ = ["CriterionResult", "CRITERIA", "SUITES", "run_criterion", "run_suite", "write_verdicts",
           "bessel_ratio_root"]


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    summary: str
    runtime: float = 0.0
    budget: float = 0.0
    details: dict = field(default_factory=dict)

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return f"[{flag}] #{self.number:2d} {self.name}: {self.summary} ({self.runtime:.1f}s)"


def bessel_ratio_root(K: float, tol: float = 1e-15):
    """Positive root of I1(2Kr)/I0(2Kr) = r by bracketing, or None when K <= 1."""
    g = lambda r: special.i1e(2 * K * r) / special.i0e(2 * K * r) - r
    lo, hi = 1e-6, 1 - 1e-9
    if g(lo) <= 0:
        return None
    return optimize.brentq(g, lo, hi, xtol=tol, rtol=4 * np.finfo(float).eps, maxiter=500)


# shared configurations ------------------------------------------------------

LAW1 = make_law(1, [1.0], [0.5])
LAW_WAVE = make_law(1, [0.5], [0.5])  # delta folded into omega, delta = 1
LAW2 = make_law(2, [0.5, 1.0], [0.25, 0.25])
K_WAVE = 4.0
DT = 5e-3


@lru_cache(maxsize=None)
def _model(K, delta, law_key, n_modes=64, psi=0.0):
    law = {"law1": LAW1, "wave": LAW_WAVE, "law2": LAW2}[law_key]
    grid = default_grid(law, n_modes)
    return linops.assemble_L(build_profile(K, delta, law, psi=psi, grid=grid))


@lru_cache(maxsize=None)
def _wave_setup():
    model = _model(K_WAVE, 1.0, "wave", 32)
    consts = linops.estimate_constants(model, n_samples=100)
    T = sim.window_length(model, consts["C_L"], consts["C_P"])
    sigma = linops.calibrate_tube_radius(model, n_trials=50)
    return model, T, sigma, consts


def _smooth_random_fields(grid, rng, count, decay=2.0):
    n = np.tile(np.concatenate([np.arange(1, grid.n_modes + 1)] * 2), grid.n_levels)
    return rng.standard_normal((count, n.size)) * n ** (-decay)


def _tracked_speed(sample: DisorderSample, seed: int, t_final=5.0):
    model, T, sigma, _ = _wave_setup()
    ph = sim.prepare_initial("from_profile", sample, seed, profile=model.profile.field)
    ens = sim.make_ensemble(sample, K_WAVE, 1.0, ph, seed)
    track = sim.simulate_tracked(ens, model, T, t_final, DT, sigma)
    burn = 5.0 / model.gap / np.sqrt(sample.N)
    speed, err = sim.wave_speed(track, burn_in=burn)
    return speed, err, track


# criteria -------------------------------------------------------------------

def c01_fixed_point():
    errs = {}
    for K in (1.5, 2.0, 4.0):
        errs[K] = abs(solve_r(K, 0.0, LAW1) - bessel_ratio_root(K))
    none_at_1 = solve_r(1.0, 0.0, LAW1) is None
    ok = max(errs.values()) <= 1e-10 and none_at_1
    return ok, f"max |r - oracle| = {max(errs.values()):.2e}, K=1 root absent: {none_at_1}", {
        "errors": errs}


def c02_cb_identity():
    vals = {K: asy.c_b(asy.make_context(K)) for K in (1.2, 2.0, 4.0)}
    dev = max(abs(v - 1) for v in vals.values())
    return dev <= 1e-8, f"max |c_b - 1| = {dev:.2e}", {"c_b": vals}


def c03_symmetric_null(n_modes=64):
    rng = make_rng(3, 0)
    worst = 0.0
    for key in ("law1", "law2"):
        m = _model(2.0, 0.05, key, n_modes) if key == "law1" else _model(3.0, 0.1, key, n_modes)
        d = m.grid.law.d
        for _ in range(100):
            half = rng.standard_normal(d)
            xi = np.concatenate([half[::-1], half])
            # symmetric vectors are rarely balanced; the linear form is used directly
            worst = max(worst, abs(m.p(linops.drift_field(m, xi))))
            if d > 1:
                xb = xi - xi.mean()
                xb = 0.5 * (xb + xb[::-1])
                worst = max(worst, abs(linops.drift_b(m, xb - xb.mean())))
    return worst <= 1e-10, f"max |b(symmetric xi)| = {worst:.2e}", {"max_abs": worst}


def c04_first_order_drift(n_modes=64):
    xi = np.array([-0.5, 0.5])
    deltas = (0.01, 0.02, 0.04)
    errs = [abs(linops.drift_b(_model(2.0, d, "law1", n_modes), xi) - asy.b_first_order(LAW1, xi, d))
            for d in deltas]
    e = asy.fit_exponent(deltas, errs)
    return e >= 1.9, f"defect exponent {e:.3f} (errors {', '.join(f'{x:.2e}' for x in errs)})", {
        "errors": errs, "exponent": e}


def c05_expansion(n_modes=64):
    deltas = (0.01, 0.02, 0.04)
    grid = default_grid(LAW1, n_modes)
    ctx = asy.make_context(2.0, n_grid=grid.n_grid)
    errs = [asy.expansion_error(LAW1, 2.0, d, grid, ctx) for d in deltas]
    e = asy.fit_exponent(deltas, errs)
    return e >= 1.9, f"sup-norm defect exponent {e:.3f}", {"errors": errs, "exponent": e}


def c06_projection(n_modes=64):
    m = _model(2.0, 0.0, "law1", n_modes)
    grid = m.grid
    ctx = asy.make_context(2.0, n_grid=grid.n_grid, r0=m.profile.r)
    rng = make_rng(6, 0)
    diffs = []
    for v in _smooth_random_fields(grid, rng, 50):
        u = from_vector(grid, v)
        diffs.append(abs(m.p(v) - asy.p0_explicit(ctx, u)))
    # quadratic error of proj_M along a smooth direction at delta > 0
    mp = _model(2.0, 0.05, "law1", n_modes, 0.3)
    u = ProfileField.from_function(mp.grid, lambda k, t: np.cos(t) + 0.5 * np.sin(3 * t + k))
    v = linops._as_vector(mp, u)
    v = v / mp.norm(v)
    q = mp.q_vector()
    eps = (1e-2, 1e-3)
    errs = [abs(linops.proj_M(mp, q + e * v) - mp.psi + e * mp.p(v)) for e in eps]
    expo = asy.fit_exponent(eps, errs)
    ok = max(diffs) <= 1e-6 and expo >= 1.9
    return ok, f"max |p - p0| = {max(diffs):.2e}, proj_M error exponent {expo:.3f}", {
        "max_diff": max(diffs), "exponent": expo}


def c07_gap_and_decay(n_modes=32):
    m = _model(2.0, 0.05, "law1", n_modes)
    lam0 = abs(m.eigvals[m.zero_index])
    r = m.right[:, m.zero_index]
    z = m.zero_mode
    w = m.weights
    a, b = np.sqrt(w) * r, np.sqrt(w) * z
    a = a / np.linalg.norm(a)
    b = b / np.linalg.norm(b)
    # sine of the angle from the component orthogonal to b (stable for tiny angles)
    angle = float(np.arcsin(min(1.0, np.linalg.norm(a - np.vdot(b, a) * b))))
    n_near = int(np.sum(np.abs(m.eigvals.real) < 0.5 * m.gap))
    rng = make_rng(7, 0)
    pert = fp_pde.perturb_profile(m.profile.field, 1e-3, rng)
    fit = fp_pde.decay_rate_to_M(m, fp_pde.from_field(pert, m.profile.K, m.profile.delta))
    ok = (lam0 <= 1e-6 and angle <= 1e-4 and n_near == 1 and m.gap > 0
          and fit.rate >= 0.95 * m.gap)
    return ok, (f"|lambda0| = {lam0:.1e}, angle {angle:.1e}, gap {m.gap:.4f}, "
                f"PDE rate {fit.rate:.4f}"), {"gap": m.gap, "rate": fit.rate, "angle": angle}


def c08_traveling_wave(n_samples=10, n_noise=3, N=400):
    model, T, sigma, _ = _wave_setup()
    rows = []
    for i in range(n_samples):
        sample = sample_iid(LAW_WAVE, N, 800 + i)
        b = linops.drift_b(model, sample.xi)
        first = asy.b_first_order(LAW_WAVE, sample.xi, 1.0)
        sp, er = [], []
        for j in range(n_noise):
            s, e, _ = _tracked_speed(sample, 10_000 + 100 * i + j)
            sp.append(s)
            er.append(e)
        speed = float(np.mean(sp))
        err = float(np.sqrt(np.sum(np.square(er))) / n_noise)
        rows.append({"sample": i, "xi1": float(sample.xi[1]), "b": b, "first_order": first,
                     "speed": speed, "stderr": err, "agree": bool(abs(speed - b) <= 3 * err),
                     "sign_ok": bool(abs(first) <= 2 * err or np.sign(speed) == np.sign(first))})
    n_agree = sum(r["agree"] for r in rows)
    sign_ok = all(r["sign_ok"] for r in rows)
    ok = n_agree >= int(np.ceil(0.8 * n_samples)) and sign_ok
    return ok, f"{n_agree}/{n_samples} within 3 stderr, signs consistent: {sign_ok}", {
        "rows": rows, "T": T, "sigma": sigma}


def balanced_sample(law, N, xi1):
    """d=1 sample with N^1 = N/2 + xi1 sqrt(N) exactly (rounded)."""
    n_plus = int(round(N / 2 + xi1 * np.sqrt(N)))
    a = np.array([1] * n_plus + [-1] * (N - n_plus))
    return from_assignments(law, a)


def c09_n_scaling(Ns=(100, 400, 1600), n_seeds=4, xi1=1.0):
    speeds = []
    for N in Ns:
        sample = balanced_sample(LAW_WAVE, N, xi1)
        vals = [_tracked_speed(sample, 9000 + s)[0] for s in range(n_seeds)]
        speeds.append(float(np.mean(vals)) / np.sqrt(N))  # rescaled -> physical
    e = asy.fit_exponent(Ns, speeds)
    return -0.65 <= e <= -0.35, f"physical-speed exponent {e:.3f}", {"speeds": speeds, "exponent": e}


def c10_noise_scaling(Ns=(100, 400, 1600), n_seeds=3, n_windows=5):
    m = _model(2.0, 0.05, "law1", 32)
    sups = []
    for N in Ns:
        vals = []
        for seed in range(n_seeds):
            smp = sample_iid(LAW1, N, 100 + seed)
            ph = sim.prepare_initial("from_profile", smp, seed, profile=m.profile.field)
            ens = sim.make_ensemble(smp, 2.0, 0.05, ph, 200 + seed)
            vals.append(sim.mild_residual_windows(ens, m, 2.0, n_windows, DT, 0.05).mean())
        sups.append(float(np.mean(vals)))
    e = asy.fit_exponent(Ns, sups)
    return -0.55 <= e <= -0.35, f"sup ||Z|| exponent {e:.3f}", {"sups": sups, "exponent": e}


def c11_chaos(Ns=(1000, 10_000, 100_000), n_seeds=12, t=2.0, dt=2e-3):
    grid = default_grid(LAW1, 64)
    p0 = ProfileField.from_function(
        grid, lambda k, th: np.exp(np.cos(th)) / (2 * np.pi * special.i0(1.0)) + 0 * k)
    pt = fp_pde.evolve(fp_pde.from_field(p0, 2.0, 0.05), t).field
    rms = []
    for N in Ns:
        d = []
        for seed in range(n_seeds):
            smp = sample_iid(LAW1, N, seed)
            ens = sim.make_ensemble(smp, 2.0, 0.05,
                                    sim.prepare_initial("from_profile", smp, seed, profile=p0), seed)
            sim.run(ens, t, dt)
            mu = sim.empirical_measure(ens, grid)
            d.append(norm_Hminus1(SignedMeasureField(grid, mu.atoms, pt)))
        rms.append(float(np.sqrt(np.mean(np.square(d)))))
    e = asy.fit_exponent(Ns, rms)
    return -0.6 <= e <= -0.4, f"distance exponent {e:.3f}", {"rms": rms, "exponent": e}


def c12_symmetric_quench(N=400, n_seeds=5):
    sample = from_assignments(LAW_WAVE, np.tile([-1, 1], N // 2))
    rows = []
    for s in range(n_seeds):
        speed, err, _ = _tracked_speed(sample, 12_000 + s)
        rows.append((speed, err, abs(speed) <= 3 * err))
    n_ok = sum(r[2] for r in rows)
    worst = max(abs(r[0]) / r[1] for r in rows)
    return n_ok == n_seeds, f"{n_ok}/{n_seeds} seeds with |speed| <= 3 stderr (max ratio {worst:.2f})", {
        "rows": rows}


CRITERIA = {
    1: ("fixed-point correctness", c01_fixed_point, 1),
    2: ("c_b identity", c02_cb_identity, 5),
    3: ("symmetric-drift null", c03_symmetric_null, 30),
    4: ("first-order drift", c04_first_order_drift, 120),
    5: ("expansion of q_delta", c05_expansion, 60),
    6: ("projection consistency", c06_projection, 120),
    7: ("spectral gap and decay", c07_gap_and_decay, 300),
    8: ("traveling wave at desk scale", c08_traveling_wave, 45 * 60),
    9: ("N-scaling of the wave", c09_n_scaling, 60 * 60),
    10: ("noise-term scaling", c10_noise_scaling, 30 * 60),
    11: ("propagation of chaos", c11_chaos, 20 * 60),
    12: ("perfectly symmetric quench", c12_symmetric_quench, 15 * 60),
}

SUITES = {"fast": tuple(range(1, 8)), "full": tuple(range(1, 13))}


def run_criterion(number: int) -> CriterionResult:
    name, fn, budget = CRITERIA[number]
    t0 = time.perf_counter()
    try:
        ok, summary, details = fn()
    except Exception as exc:  # a crash is a failed criterion, reported as such
        ok, summary, details = False, f"error: {type(exc).__name__}: {exc}", {}
    return CriterionResult(number, name, bool(ok), summary, time.perf_counter() - t0, budget, details)


def run_suite(suite: str, echo=print):
    if suite not in SUITES:
        raise ValueError(f"unknown suite {suite!r}; choose from {sorted(SUITES)}")
    results = []
    for n in SUITES[suite]:
        res = run_criterion(n)
        if echo is not None:
            echo(res.line())
        results.append(res)
    return results


def write_verdicts(results, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["criterion", "name", "passed", "runtime_s", "budget_s", "summary"])
        for r in results:
            w.writerow([r.number, r.name, int(r.passed), f"{r.runtime:.3f}", r.budget, r.summary])
