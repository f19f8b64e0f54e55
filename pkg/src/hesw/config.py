"""Run configuration: flat INI sections parsed into one frozen record.

The format is plain key = value under [grid], [time], [init], [solver]
and [output].  Every numeric default is the one the verification suite
runs with; a config file only has to name what it changes.  Parsing
failures raise ConfigError with the file and section/key spelled out.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields
from pathlib import Path

from . import dtn
from .evolution import INVERSE_MODES, SCHEMES

INIT_KINDS = ("mode", "gaussian", "file")

TAU = 6.283185307179586476925287


class ConfigError(Exception):
    """A config file did not parse or failed validation."""


@dataclass
class RunConfig:
    # [grid]
    n: int = 128
    length: float = TAU
    depth: float = dtn.DEFAULT_DEPTH
    nz: int = dtn.DEFAULT_NZ
    # [time]
    t_final: float = 0.1
    dt: float = 1e-3
    scheme: str = "exp-rk4"
    picard_tol: float = 1e-12
    picard_max_iter: int = 25
    # [init]
    init_kind: str = "mode"
    amplitudes: tuple = (0.05,)
    wavenumbers: tuple = (2,)
    width: float = 0.0
    path: str = ""
    # [solver]
    dtn_tol: float = 1e-10
    inverse_mode: str = "fixed_point"
    inverse_tol: float = 1e-10
    # [output]
    out_dir: str = "out"
    snapshot_every: int = 10
    diagnostics_every: int = 5
    l2_guard: float = 10.0

    def validate(self) -> "RunConfig":
        def need(cond, msg):
            if not cond:
                raise ConfigError(msg)

        need(self.n >= 8 and self.n % 2 == 0, f"grid.n must be even >= 8, got {self.n}")
        need(self.length > 0, f"grid.length must be positive, got {self.length}")
        need(self.depth > 0, f"grid.depth must be positive, got {self.depth}")
        need(self.nz >= 8, f"grid.nz must be at least 8, got {self.nz}")
        need(self.t_final >= 0, f"time.t_final must be nonnegative, got {self.t_final}")
        need(self.dt > 0, f"time.dt must be positive, got {self.dt}")
        need(self.scheme in SCHEMES,
             f"time.scheme must be one of {SCHEMES}, got {self.scheme!r}")
        need(self.picard_tol > 0, "time.picard_tol must be positive")
        need(self.picard_max_iter >= 1, "time.picard_max_iter must be at least 1")
        need(self.init_kind in INIT_KINDS,
             f"init.kind must be one of {INIT_KINDS}, got {self.init_kind!r}")
        if self.init_kind == "mode":
            need(len(self.amplitudes) == len(self.wavenumbers) > 0,
                 "init.amplitudes and init.wavenumbers must be equal-length, nonempty")
            need(all(k >= 1 for k in self.wavenumbers),
                 "init.wavenumbers must be positive integers")
        if self.init_kind == "gaussian":
            need(self.width > 0, "init.width must be positive for gaussian data")
        if self.init_kind == "file":
            need(bool(self.path), "init.path is required for file data")
        need(self.dtn_tol > 0, "solver.dtn_tol must be positive")
        need(self.inverse_mode in INVERSE_MODES,
             f"solver.inverse_mode must be one of {INVERSE_MODES}, "
             f"got {self.inverse_mode!r}")
        need(self.inverse_tol > 0, "solver.inverse_tol must be positive")
        need(self.snapshot_every >= 1, "output.snapshot_every must be at least 1")
        need(self.diagnostics_every >= 1, "output.diagnostics_every must be at least 1")
        need(self.l2_guard > 0, "output.l2_guard must be positive")
        return self

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            out[f.name] = list(value) if isinstance(value, tuple) else value
        return out


# section -> (key, attribute, converter)
def _int(s): return int(s)
def _float(s): return float(s)
def _str(s): return s.strip()


def _int_list(s):
    return tuple(int(tok) for tok in s.replace(",", " ").split())


def _float_list(s):
    return tuple(float(tok) for tok in s.replace(",", " ").split())


_LAYOUT = {
    "grid": {"n": ("n", _int), "length": ("length", _float),
             "depth": ("depth", _float), "nz": ("nz", _int)},
    "time": {"t_final": ("t_final", _float), "dt": ("dt", _float),
             "scheme": ("scheme", _str), "picard_tol": ("picard_tol", _float),
             "picard_max_iter": ("picard_max_iter", _int)},
    "init": {"kind": ("init_kind", _str),
             "amplitudes": ("amplitudes", _float_list),
             "wavenumbers": ("wavenumbers", _int_list),
             "width": ("width", _float), "path": ("path", _str)},
    "solver": {"dtn_tol": ("dtn_tol", _float),
               "inverse_mode": ("inverse_mode", _str),
               "inverse_tol": ("inverse_tol", _float)},
    "output": {"dir": ("out_dir", _str),
               "snapshot_every": ("snapshot_every", _int),
               "diagnostics_every": ("diagnostics_every", _int),
               "l2_guard": ("l2_guard", _float)},
}


def parse_config(text: str, origin: str = "<config>") -> RunConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text, source=origin)
    except configparser.Error as exc:
        raise ConfigError(f"{origin}: {exc}") from exc

    cfg = RunConfig()
    for section in parser.sections():
        if section not in _LAYOUT:
            raise ConfigError(f"{origin}: unknown section [{section}]")
        for key, raw in parser.items(section):
            if key not in _LAYOUT[section]:
                raise ConfigError(f"{origin}: unknown key {key!r} in [{section}]")
            attr, convert = _LAYOUT[section][key]
            try:
                setattr(cfg, attr, convert(raw))
            except ValueError as exc:
                raise ConfigError(
                    f"{origin}: [{section}] {key} = {raw!r}: {exc}") from exc
    try:
        return cfg.validate()
    except ConfigError as exc:
        raise ConfigError(f"{origin}: {exc}") from exc


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, origin=str(path))
