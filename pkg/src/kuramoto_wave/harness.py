"""Experiment drivers behind the command-line subcommands.

Every driver writes CSV/text outputs into an output directory plus a
``manifest.json`` describing the run.  Randomness flows from one master seed:
the disorder sample uses Philox stream 0, the thermal noise stream 1 and the
initial phases stream 2 (see ``disorder.make_rng``); replicas k of an
experiment use the master seed plus k.
"""
from __future__ import annotations

import csv
import json
import logging
import platform
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import asymptotics as asy
from . import fp_pde, linops
from . import sde_sim as sim
from .config import ExperimentConfig, dump_config
from .disorder import make_law, read_fixture, sample_iid, write_fixture, write_sample_csv
from .spaces import default_grid, write_field_csv, write_fourier_csv
from .stationary import (build_profile, fixed_point_scan, psi_delta, solve_r,
                         stationarity_residual)

__all__ = [
    "ExperimentManifest",
    "NumericalFailure",
    "run_stationary",
    "run_spectrum",
    "run_drift",
    "run_simulate",
    "run_pde",
    "run_expand",
    "run_reproduce",
]

log = logging.getLogger(__name__)


class NumericalFailure(RuntimeError):
    pass


@dataclass
class ExperimentManifest:
    command: str
    config: str
    seeds: dict
    derived: dict = field(default_factory=dict)
    outputs: list = field(default_factory=list)
    version: str = __version__
    platform: str = field(default_factory=platform.platform)
    wall_clock_s: float = 0.0

    def write(self, out_dir: Path) -> Path:
        path = Path(out_dir) / "manifest.json"
        path.write_text(json.dumps(asdict(self), indent=2, default=_jsonable) + "\n")
        return path


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, complex):
        return [x.real, x.imag]
    return str(x)


class _Run:
    """Collects outputs and timing for one command."""

    def __init__(self, command, cfg: ExperimentConfig, out_dir, seed):
        self.out = Path(out_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        self.t0 = time.perf_counter()
        self.manifest = ExperimentManifest(command, dump_config(cfg), {"master": int(seed)})

    def path(self, name) -> Path:
        p = self.out / name
        p.parent.mkdir(parents=True, exist_ok=True)
        self.manifest.outputs.append(str(Path(name)))
        return p

    def finish(self) -> ExperimentManifest:
        self.manifest.wall_clock_s = time.perf_counter() - self.t0
        self.manifest.write(self.out)
        return self.manifest


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in r])


def _profile(cfg, law=None, psi=0.0):
    law = cfg.law() if law is None else law
    r = solve_r(cfg.K, cfg.delta, law)
    if r is None:
        raise NumericalFailure(f"no synchronized profile at K={cfg.K}, delta={cfg.delta}")
    return build_profile(cfg.K, cfg.delta, law, psi=psi, grid=default_grid(law, cfg.n_modes), r=r)


def _model(cfg):
    try:
        return linops.assemble_L(_profile(cfg))
    except linops.AssemblyError as exc:
        raise NumericalFailure(str(exc)) from exc


def _sample(cfg, law, seed):
    if cfg.sample_file:
        return read_fixture(cfg.sample_file, law)
    return sample_iid(law, cfg.N, seed)


# --- subcommands ---------------------------------------------------------------

def run_stationary(cfg: ExperimentConfig, out_dir, seed: int = 0) -> ExperimentManifest:
    run = _Run("stationary", cfg, out_dir, seed)
    law = cfg.law()
    rs, g = fixed_point_scan(cfg.K, cfg.delta, law)
    _write_rows(run.path("fixed_point.csv"), ["r", "Psi", "Psi_minus_r"],
                [(r, gv + r, gv) for r, gv in zip(rs, g)])
    prof = _profile(cfg)
    write_field_csv(prof.field, run.path("profile.csv"))
    write_fourier_csv(prof.field, run.path("profile_fourier.csv"))
    run.manifest.derived.update(r_delta=prof.r, fixed_point_residual=prof.fixed_point_residual(),
                                stationarity_residual=stationarity_residual(prof))
    return run.finish()


def run_spectrum(cfg: ExperimentConfig, out_dir, seed: int = 0) -> ExperimentManifest:
    run = _Run("spectrum", cfg, out_dir, seed)
    m = _model(cfg)
    order = np.argsort(-m.eigvals.real)
    _write_rows(run.path("eigenvalues.csv"), ["re", "im"],
                [(m.eigvals[i].real, m.eigvals[i].imag) for i in order])
    consts = linops.estimate_constants(m, seed=seed)
    sigma = linops.calibrate_tube_radius(m, seed=seed)
    run.manifest.derived.update(r_delta=m.profile.r, gamma_L=m.gap, zero_residual=m.zero_residual,
                                sigma=sigma, **consts)
    return run.finish()


def run_drift(cfg: ExperimentConfig, out_dir, seed: int = 0) -> ExperimentManifest:
    run = _Run("drift", cfg, out_dir, seed)
    law = cfg.law()
    m = _model(cfg)
    if cfg.xi:
        xi = np.asarray(cfg.xi)
    else:
        smp = _sample(cfg, law, seed)
        xi = smp.xi
        write_sample_csv(smp, run.path("sample.csv"))
    b = linops.drift_b(m, xi)
    first = asy.b_first_order(law, xi, cfg.delta)
    coeffs = linops.drift_coefficients(m)
    _write_rows(run.path("drift.csv"), ["k", "xi", "omega", "beta_k"],
                [(int(k), x, w, c) for k, x, w, c in zip(law.indices, xi, law.omegas, coeffs)])
    (run.path("drift.txt")).write_text(f"b {b!r}\nfirst_order {first!r}\n")
    run.manifest.derived.update(b=b, first_order=first, gamma_L=m.gap)
    return run.finish()


def run_simulate(cfg: ExperimentConfig, out_dir, seed: int = 0) -> ExperimentManifest:
    run = _Run("simulate", cfg, out_dir, seed)
    law = cfg.law()
    m = _model(cfg)
    consts = linops.estimate_constants(m, seed=seed)
    T = cfg.T if cfg.T is not None else sim.window_length(m, consts["C_L"], consts["C_P"])
    sigma = linops.calibrate_tube_radius(m, seed=seed)
    smp = _sample(cfg, law, seed)
    write_fixture(smp, run.path("sample.txt"))
    ph = sim.prepare_initial(cfg.ic, smp, seed, profile=m.profile.field)
    ens = sim.make_ensemble(smp, cfg.K, cfg.delta, ph, seed)

    def snap(n, e):
        if cfg.snapshot_every and (n + 1) % cfg.snapshot_every == 0:
            mu = sim.empirical_measure(e, m.grid)
            write_fourier_csv(mu, run.path(f"snapshots/window_{n + 1:05d}.csv"))

    try:
        track = sim.simulate_tracked(ens, m, T, cfg.t_final, cfg.dt, sigma, on_window=snap)
    except linops.OutsideTubeError as exc:
        raise NumericalFailure(f"initial condition outside the tube: {exc}") from exc
    dists = np.concatenate([[np.nan], track.distances[: track.n_windows - 1]])
    _write_rows(run.path("track.csv"), ["n", "T_n", "psi_n", "dist", "in_tube"],
                [(n, t, p, d, 1) for n, (t, p, d) in enumerate(zip(track.times, track.psi, dists))])
    b = linops.drift_b(m, smp.xi)
    first = asy.b_first_order(law, smp.xi, cfg.delta)
    burn = 5.0 / m.gap / np.sqrt(smp.N)
    try:
        slope, err = sim.wave_speed(track, burn_in=burn)
    except sim.InsufficientData as exc:
        log.warning("%s", exc)
        slope, err = float("nan"), float("nan")
    run.path("speed.txt").write_text(
        f"slope {slope!r}\nstderr {err!r}\nb {b!r}\nfirst_order {first!r}\n")
    run.manifest.seeds.update(disorder=seed, noise_stream=sim.STREAM_NOISE,
                              initial_stream=sim.STREAM_INITIAL)
    run.manifest.derived.update(r_delta=m.profile.r, gamma_L=m.gap, sigma=sigma, T=T,
                                burn_in_rescaled=burn, stopped=track.stopped, **consts)
    return run.finish()


def run_pde(cfg: ExperimentConfig, out_dir, seed: int = 0) -> ExperimentManifest:
    run = _Run("pde", cfg, out_dir, seed)
    m = _model(cfg)
    pert = fp_pde.perturb_profile(m.profile.field, cfg.epsilon, np.random.default_rng(seed))
    state = fp_pde.from_field(pert, cfg.K, cfg.delta)
    times = np.linspace(0, cfg.t_end, 11)
    try:
        _, snaps = fp_pde.evolve(state, cfg.t_end, snapshot_times=times)
        fit = fp_pde.decay_rate_to_M(m, state)
    except fp_pde.PdeFailure as exc:
        raise NumericalFailure(str(exc)) from exc
    for s in snaps:
        write_field_csv(s.field, run.path(f"snapshots/t_{s.t:08.3f}.csv"))
    _write_rows(run.path("decay.csv"), ["t", "distance"], zip(fit.times, fit.distances))
    run.path("decay.txt").write_text(
        f"rate {fit.rate!r}\ngamma_L {m.gap!r}\nmonotone {fit.monotone}\n")
    run.manifest.derived.update(gamma_L=m.gap, decay_rate=fit.rate, fit_accepted=fit.accepted)
    return run.finish()


def run_expand(cfg: ExperimentConfig, out_dir, seed: int = 0) -> ExperimentManifest:
    run = _Run("expand", cfg, out_dir, seed)
    law = cfg.law()
    grid = default_grid(law, cfg.n_modes)
    ctx = asy.make_context(cfg.K, n_grid=grid.n_grid)
    cb = asy.c_b(ctx)
    xi = np.asarray(cfg.xi) if cfg.xi else np.concatenate(
        [-np.ones(law.d)[::-1], np.ones(law.d)]) / (2 * law.d)
    rows = []
    for d in cfg.deltas:
        m = linops.assemble_L(build_profile(cfg.K, d, law, grid=grid))
        v2 = asy.v_squared(law, d, linops.drift_coefficients(m))
        rows.append((d, asy.expansion_error(law, cfg.K, d, grid, ctx), linops.drift_b(m, xi),
                     asy.b_first_order(law, xi, d), cb, v2["exact_form"], v2["first_order"]))
    _write_rows(run.path("expand.csv"),
                ["delta", "q_defect_sup", "b_full", "b_first_order", "c_b", "v2_full", "v2_first"],
                rows)
    ds = [r[0] for r in rows]
    if len(ds) >= 2:
        run.manifest.derived.update(
            q_defect_exponent=asy.fit_exponent(ds, [r[1] for r in rows]),
            b_defect_exponent=asy.fit_exponent(ds, [abs(r[2] - r[3]) for r in rows]))
    run.manifest.derived.update(c_b=cb, r0=ctx.r0)
    return run.finish()


# --- figure data ---------------------------------------------------------------

def _fig1(run, seed):
    law = make_law(2, [1.0, 10.0], [0.25, 0.25])
    K, delta = 5.0, 0.1
    rs = np.linspace(0.0, 1.0, 201)
    psi = [psi_delta(2 * K * r, delta, law) for r in rs]
    _write_rows(run.path("fig1_fixed_point.csv"), ["r", "Psi_delta_2Kr"], zip(rs, psi))
    r = solve_r(K, delta, law)
    prof = build_profile(K, delta, law, grid=default_grid(law, 64), r=r)
    write_field_csv(prof.field, run.path("fig1_profile.csv"))
    run.manifest.derived.update(K=K, delta=delta, r_delta=r, crossings=[0.0, r])


def _fig2(run, seed, n_bins=64, t_end=None, every=1.0):
    law = make_law(1, [1.0], [0.5])
    K, N = 6.0, 600
    smp = sample_iid(law, N, seed)
    write_fixture(smp, run.path("fig2_sample.txt"))
    ens = sim.make_ensemble(smp, K, 1.0, sim.prepare_initial("uniform", smp, seed), seed)
    t_end = 5 * np.sqrt(N) if t_end is None else t_end
    edges = np.linspace(0, 2 * np.pi, n_bins + 1)
    rows = []
    n_snap = int(round(t_end / every))
    for j in range(n_snap + 1):
        if j:
            sim.run(ens, every, 5e-3)
        hist, _ = np.histogram(ens.phases, bins=edges, density=True)
        r = abs(sim.order_parameter(ens.phases))
        rows += [(ens.t, 0.5 * (edges[i] + edges[i + 1]), hist[i], r) for i in range(n_bins)]
    _write_rows(run.path("fig2_density.csv"), ["t", "theta", "density", "order_parameter"], rows)
    run.manifest.derived.update(K=K, N=N, xi=smp.xi.tolist(),
                                r_delta=solve_r(K, 1.0, law))


def _fig3(run, seed, n_real=6):
    law = make_law(1, [0.5], [0.5])
    K, N = 4.0, 400
    m = linops.assemble_L(build_profile(K, 1.0, law, grid=default_grid(law, 32)))
    consts = linops.estimate_constants(m, n_samples=100, seed=seed)
    T = sim.window_length(m, consts["C_L"], consts["C_P"])
    sigma = linops.calibrate_tube_radius(m, n_trials=50, seed=seed)
    rows, info = [], []
    for k in range(n_real):
        smp = sample_iid(law, N, seed + k)
        ph = sim.prepare_initial("from_profile", smp, seed + k, profile=m.profile.field)
        ens = sim.make_ensemble(smp, K, 1.0, ph, seed + k)
        tr = sim.simulate_tracked(ens, m, T, 5.0, 5e-3, sigma)
        rows += [(k, t, p) for t, p in zip(tr.rescaled_times, tr.psi)]
        info.append({"realization": k, "xi1": float(smp.xi[1]), "b": linops.drift_b(m, smp.xi),
                     "stopped": tr.stopped})
    _write_rows(run.path("fig3_tracks.csv"), ["realization", "t_rescaled", "psi"], rows)
    run.manifest.derived.update(K=K, N=N, T=T, sigma=sigma, gamma_L=m.gap, realizations=info)


FIGURES = {"fig1": _fig1, "fig2": _fig2, "fig3": _fig3}


def run_reproduce(figure_id: str, out_dir, seed: int = 0, cfg: ExperimentConfig | None = None):
    if figure_id not in FIGURES:
        raise ValueError(f"unknown figure {figure_id!r}; choose from {sorted(FIGURES)}")
    run = _Run(f"reproduce {figure_id}", cfg or ExperimentConfig(), out_dir, seed)
    FIGURES[figure_id](run, seed)
    return run.finish()
