"""Run configuration parsing and on-disk formats.

Config files are flat ``key = value`` lines with ``#`` comments.  Fields
are stored in a fixed little-endian binary layout so dumps are portable;
all writes go through a temp file and an atomic rename.
"""

from __future__ import annotations

import os
import struct
import tempfile
from dataclasses import dataclass, fields

import numpy as np

from .grid import SpectralGrid

MAGIC = b"SPN1"
VERSION = 1


class ConfigError(ValueError):
    """Malformed or inconsistent run configuration."""


class FieldFormatError(ValueError):
    """Corrupt or incompatible binary field file."""


@dataclass
class RunConfig:
    command: str | None = None
    d: int = 1
    L: float = 16.0
    N: int = 128
    beta_n: float | None = None
    beta_s: float | None = None
    gamma: tuple = (1.0,)
    M: float = 0.0
    nev: int = 40
    tol_ground: float = 1e-12
    tol_eig: float = 1e-10
    epsilon: float = 0.1
    t: float = 0.0
    out: str = "."
    ground: str | None = None
    modes: tuple = (1,)


_PARSERS = {
    "command": str,
    "d": int,
    "L": float,
    "N": int,
    "beta_n": float,
    "beta_s": float,
    "gamma": lambda s: tuple(float(p) for p in s.split(",")),
    "M": float,
    "nev": int,
    "tol_ground": float,
    "tol_eig": float,
    "epsilon": float,
    "t": float,
    "out": str,
    "ground": str,
    "modes": lambda s: tuple(int(p) for p in s.split(",")),
}


def parse_config(text: str) -> RunConfig:
    """Parse ``key = value`` lines into a validated RunConfig.

    Unknown keys, malformed values and constraint violations are
    reported with their line number.
    """
    cfg = RunConfig()
    gamma_set = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', "
                              f"got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _PARSERS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            parsed = _PARSERS[key](value)
        except (TypeError, ValueError) as err:
            raise ConfigError(
                f"line {lineno}: bad value for {key!r}: {err}") from err
        if key == "gamma":
            gamma_set = True
        setattr(cfg, key, parsed)
        _validate_key(cfg, key, lineno)
    if not gamma_set:
        cfg.gamma = (1.0,) * cfg.d
    if len(cfg.gamma) != cfg.d:
        raise ConfigError(
            f"gamma has {len(cfg.gamma)} entries for d = {cfg.d}")
    return cfg


def _validate_key(cfg: RunConfig, key: str, lineno: int) -> None:
    if key == "N" and (cfg.N < 4 or cfg.N % 2 != 0):
        raise ConfigError(f"line {lineno}: N must be even and >= 4, "
                          f"got {cfg.N}")
    if key == "d" and cfg.d not in (1, 2, 3):
        raise ConfigError(f"line {lineno}: d must be 1, 2 or 3, got {cfg.d}")
    if key == "L" and cfg.L <= 0:
        raise ConfigError(f"line {lineno}: L must be positive, got {cfg.L}")
    if key == "M" and not -1.0 < cfg.M < 1.0:
        raise ConfigError(f"line {lineno}: M must lie in (-1, 1), "
                          f"got {cfg.M}")
    if key == "gamma" and any(g <= 0 for g in cfg.gamma):
        raise ConfigError(f"line {lineno}: trap frequencies must be "
                          f"positive, got {cfg.gamma}")
    if key == "nev" and cfg.nev < 1:
        raise ConfigError(f"line {lineno}: nev must be >= 1, got {cfg.nev}")
    if key in ("tol_ground", "tol_eig", "epsilon") and \
            getattr(cfg, key) < 0:
        raise ConfigError(f"line {lineno}: {key} must be nonnegative")
    if key == "modes" and any(i < 1 for i in cfg.modes):
        raise ConfigError(f"line {lineno}: mode indices are 1-based")


def serialize_config(cfg: RunConfig) -> str:
    """Inverse of :func:`parse_config` up to formatting."""
    lines = []
    for f in fields(cfg):
        value = getattr(cfg, f.name)
        if value is None:
            continue
        if isinstance(value, tuple):
            value = ",".join(repr(v) for v in value)
        lines.append(f"{f.name} = {value}")
    return "\n".join(lines) + "\n"


def _atomic_write(path: str, payload: bytes) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-spn1-")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_field(path: str, grid: SpectralGrid, data: np.ndarray) -> None:
    """Persist a stack of grid fields in the fixed binary layout.

    Layout: magic "SPN1", u32 version, u32 d, u32 N, f64 L, u32 ncomp,
    u8 is_complex, then float64 node values per component in row-major
    order (complex values interleaved re, im).  Little-endian.
    """
    arr = np.asarray(data)
    if arr.shape[-grid.d:] != grid.shape:
        raise ValueError(f"field shape {arr.shape} does not match grid")
    ncomp = 1 if arr.ndim == grid.d else int(np.prod(arr.shape[:-grid.d]))
    arr = arr.reshape((ncomp,) + grid.shape)
    is_complex = np.iscomplexobj(arr)
    header = MAGIC + struct.pack("<IIIdIB", VERSION, grid.d, grid.N,
                                 grid.L, ncomp, 1 if is_complex else 0)
    if is_complex:
        flat = np.ascontiguousarray(arr, dtype="<c16")
    else:
        flat = np.ascontiguousarray(arr, dtype="<f8")
    _atomic_write(path, header + flat.tobytes())


def read_field(path: str) -> tuple:
    """Read a field file back as (grid, array)."""
    with open(path, "rb") as handle:
        blob = handle.read()
    if blob[:4] != MAGIC:
        raise FieldFormatError(f"{path}: bad magic {blob[:4]!r}")
    head_size = 4 + struct.calcsize("<IIIdIB")
    if len(blob) < head_size:
        raise FieldFormatError(f"{path}: truncated header")
    version, d, n, half_width, ncomp, is_complex = struct.unpack(
        "<IIIdIB", blob[4:head_size])
    if version != VERSION:
        raise FieldFormatError(f"{path}: unsupported version {version}")
    grid = SpectralGrid(d=d, L=half_width, N=n)
    dtype = np.dtype("<c16") if is_complex else np.dtype("<f8")
    expected = ncomp * grid.dof_scalar * dtype.itemsize
    body = blob[head_size:]
    if len(body) != expected:
        raise FieldFormatError(
            f"{path}: expected {expected} data bytes, got {len(body)}")
    arr = np.frombuffer(body, dtype=dtype).reshape((ncomp,) + grid.shape)
    if ncomp == 1:
        arr = arr[0]
    return grid, arr.copy()


def write_spectrum_csv(path: str, grid: SpectralGrid, spectrum) -> None:
    """One row per mode: index, omega, block residuals, norm check."""
    rows = ["index,omega,residual_plus,residual_minus,norm_check"]
    ordered = sorted(spectrum.pairs, key=lambda p: p.omega)
    for idx, pair in enumerate(ordered, start=1):
        r_plus, r_minus = pair.residual if pair.residual else \
            (float("nan"), float("nan"))
        norm_check = float((grid.inner(pair.u, pair.u)
                            - grid.inner(pair.v, pair.v)).real)
        rows.append(f"{idx},{pair.omega:.17g},{r_plus:.17g},"
                    f"{r_minus:.17g},{norm_check:.17g}")
    _atomic_write(path, ("\n".join(rows) + "\n").encode())
