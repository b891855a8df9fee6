"""Experiment configuration: INI files with a fixed schema.

Example::

    [law]
    d = 1
    omegas = 1.0          ; positive half, comma separated
    lambdas = 0.5

    [model]
    K = 2.0
    delta = 0.05
    n_modes = 64

    [sim]
    N = 400
    seed = 0
    dt = 0.005
    T = auto              ; window length, 'auto' uses fitted constants
    t_final = 5.0         ; in units of sqrt(N)
    ic = from_profile     ; uniform | from_profile
    snapshot_every = 0    ; windows between snapshot CSVs, 0 disables

    [drift]
    xi =                  ; explicit xi (dense order), empty -> use a sample
    sample_file =         ; fixture path, empty -> draw i.i.d. with sim.seed

    [pde]
    t_end = 10.0
    epsilon = 0.001

    [expand]
    deltas = 0.01, 0.02, 0.04
"""
from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field, fields
from pathlib import Path

from .disorder import DisorderLaw, make_law

__all__ = ["ExperimentConfig", "load_config", "parse_config", "dump_config", "ConfigError"]


class ConfigError(ValueError):
    pass


def _floats(text):
    text = text.strip()
    return tuple(float(x) for x in text.split(",")) if text else ()


def _fmt_floats(vals):
    return ", ".join(repr(float(v)) for v in vals)


def _opt_float(text):
    text = text.strip()
    return None if text in ("", "auto") else float(text)


# key -> (section, parser, formatter)
_SCHEMA = {
    "d": ("law", int, str),
    "omegas": ("law", _floats, _fmt_floats),
    "lambdas": ("law", _floats, _fmt_floats),
    "K": ("model", float, repr),
    "delta": ("model", float, repr),
    "n_modes": ("model", int, str),
    "N": ("sim", int, str),
    "seed": ("sim", int, str),
    "dt": ("sim", float, repr),
    "T": ("sim", _opt_float, lambda v: "auto" if v is None else repr(v)),
    "t_final": ("sim", float, repr),
    "ic": ("sim", str, str),
    "snapshot_every": ("sim", int, str),
    "xi": ("drift", _floats, _fmt_floats),
    "sample_file": ("drift", str, str),
    "t_end": ("pde", float, repr),
    "epsilon": ("pde", float, repr),
    "deltas": ("expand", _floats, _fmt_floats),
}


@dataclass
class ExperimentConfig:
    d: int = 1
    omegas: tuple = (1.0,)
    lambdas: tuple = (0.5,)
    K: float = 2.0
    delta: float = 0.05
    n_modes: int = 64
    N: int = 400
    seed: int = 0
    dt: float = 5e-3
    T: float | None = None
    t_final: float = 5.0
    ic: str = "from_profile"
    snapshot_every: int = 0
    xi: tuple = ()
    sample_file: str = ""
    t_end: float = 10.0
    epsilon: float = 1e-3
    deltas: tuple = (0.01, 0.02, 0.04)
    extra: dict = field(default_factory=dict, compare=False)

    def law(self) -> DisorderLaw:
        return make_law(self.d, self.omegas, self.lambdas)

    def validate(self):
        try:
            self.law()
        except ValueError as exc:
            raise ConfigError(f"[law] {exc}") from exc
        if self.K <= 0:
            raise ConfigError("K must be positive")
        if self.delta < 0:
            raise ConfigError("delta must be nonnegative")
        if not 0 < self.dt <= 1e-2:
            raise ConfigError("dt must lie in (0, 0.01]")
        if self.T is not None and self.T < 1:
            raise ConfigError("T must be at least 1")
        if self.ic not in ("uniform", "from_profile"):
            raise ConfigError(f"unknown ic {self.ic!r}")
        if self.xi and len(self.xi) != 2 * self.d:
            raise ConfigError(f"xi needs {2 * self.d} entries")
        return self


def parse_config(text: str) -> ExperimentConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    known = {f.name for f in fields(ExperimentConfig)}
    values = {}
    for section in cp.sections():
        for key, raw in cp.items(section):
            if key not in _SCHEMA:
                raise ConfigError(f"unknown key {section}.{key}")
            sec, parse, _ = _SCHEMA[key]
            if sec != section:
                raise ConfigError(f"key {key!r} belongs in [{sec}], found in [{section}]")
            try:
                values[key] = parse(raw)
            except ValueError as exc:
                raise ConfigError(f"bad value for {section}.{key}: {raw!r}") from exc
    assert set(values) <= known
    return ExperimentConfig(**values).validate()


def load_config(path) -> ExperimentConfig:
    return parse_config(Path(path).read_text())


def dump_config(cfg: ExperimentConfig) -> str:
    cp = configparser.ConfigParser()
    cp.optionxform = str
    for key, (section, _, fmt) in _SCHEMA.items():
        if not cp.has_section(section):
            cp.add_section(section)
        cp.set(section, key, fmt(getattr(cfg, key)))
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()
