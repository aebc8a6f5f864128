"""Binary grid files, decay-curve CSV and checksums.

All binary formats are little-endian: an 8-byte magic, ``u32`` version,
a fixed header and then the raw sample block.

``PSIGRID1``  ``u64 n, f64 x_min, f64 dx, f64 hbar`` + ``n`` complex samples
``RHOGRID1``  same header + ``n*n`` complex samples, row-major
``WIGGRID1``  ``u64 n_x, u64 n_p, f64 x_min, dx, p_min, dp, hbar`` + ``n_x*n_p`` reals, x-major
"""
from __future__ import annotations

import csv
import hashlib
import os
import struct
from pathlib import Path
from typing import Union

import numpy as np

from .grid import DensityMatrix, GridSpec, WaveFunction
from .wigner import DecayCurve, WignerGrid

__all__ = [
    "FormatError",
    "write_psi",
    "read_psi",
    "write_rho",
    "read_rho",
    "write_wigner",
    "read_wigner",
    "read_state",
    "write_curve_csv",
    "read_curve_csv",
    "sha256",
    "CSV_HEADER",
]

VERSION = 1
_PSI = struct.Struct("<8sIQddd")
_WIG = struct.Struct("<8sIQQddddd")
_C16 = np.dtype("<c16")
_F8 = np.dtype("<f8")
CSV_HEADER = ("delta_x", "delta_p", "overlap_abs", "overlap_re", "overlap_im")

PathLike = Union[str, os.PathLike]


class FormatError(ValueError):
    """Malformed grid file; ``offset`` is the byte position of the problem."""

    def __init__(self, path, offset: int, message: str):
        super().__init__(f"{path}: byte {offset}: {message}")
        self.path = str(path)
        self.offset = offset


def _write(path: PathLike, header: bytes, block: np.ndarray) -> None:
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(block.tobytes(order="C"))


def _read_header(path: PathLike, data: bytes, layout: struct.Struct, magic: bytes) -> tuple:
    if len(data) < 8 or data[:8] != magic:
        found = data[:8]
        raise FormatError(path, 0, f"bad magic {found!r}, expected {magic!r}")
    if len(data) < layout.size:
        raise FormatError(path, len(data), f"truncated header ({len(data)} of {layout.size} bytes)")
    fields = layout.unpack_from(data)
    if fields[1] != VERSION:
        raise FormatError(path, 8, f"unsupported version {fields[1]}")
    return fields


def _payload(path: PathLike, data: bytes, offset: int, count: int, dtype: np.dtype) -> np.ndarray:
    need = offset + count * dtype.itemsize
    if len(data) != need:
        at = min(len(data), need)
        raise FormatError(path, at, f"payload is {len(data) - offset} bytes, expected {need - offset}")
    return np.frombuffer(data, dtype=dtype, count=count, offset=offset)


def _grid(path: PathLike, n: int, x_min: float, dx: float, hbar: float) -> GridSpec:
    try:
        return GridSpec(n, x_min, dx, hbar)
    except ValueError as exc:
        raise FormatError(path, 12, f"invalid grid header: {exc}") from exc


def write_psi(path: PathLike, psi: WaveFunction) -> None:
    g = psi.grid
    _write(path, _PSI.pack(b"PSIGRID1", VERSION, g.n, g.x_min, g.dx, g.hbar), psi.amp.astype(_C16))


def read_psi(path: PathLike) -> WaveFunction:
    data = Path(path).read_bytes()
    _, _, n, x_min, dx, hbar = _read_header(path, data, _PSI, b"PSIGRID1")
    g = _grid(path, n, x_min, dx, hbar)
    return WaveFunction(g, _payload(path, data, _PSI.size, n, _C16))


def write_rho(path: PathLike, rho: DensityMatrix) -> None:
    g = rho.grid
    _write(path, _PSI.pack(b"RHOGRID1", VERSION, g.n, g.x_min, g.dx, g.hbar), rho.rho.astype(_C16))


def read_rho(path: PathLike) -> DensityMatrix:
    data = Path(path).read_bytes()
    _, _, n, x_min, dx, hbar = _read_header(path, data, _PSI, b"RHOGRID1")
    g = _grid(path, n, x_min, dx, hbar)
    return DensityMatrix(g, _payload(path, data, _PSI.size, n * n, _C16).reshape(n, n))


def write_wigner(path: PathLike, w: WignerGrid) -> None:
    g = w.grid
    head = _WIG.pack(b"WIGGRID1", VERSION, g.n, w.n_p, g.x_min, g.dx, w.p_min, w.dp, g.hbar)
    _write(path, head, w.values.astype(_F8))


def read_wigner(path: PathLike) -> WignerGrid:
    data = Path(path).read_bytes()
    _, _, n_x, n_p, x_min, dx, p_min, dp, hbar = _read_header(path, data, _WIG, b"WIGGRID1")
    g = _grid(path, n_x, x_min, dx, hbar)
    vals = _payload(path, data, _WIG.size, n_x * n_p, _F8).reshape(n_x, n_p)
    return WignerGrid(g, n_p, p_min, dp, vals)


def read_state(path: PathLike) -> Union[WaveFunction, DensityMatrix]:
    """Load a ``PSIGRID1`` or ``RHOGRID1`` file, chosen by its magic."""
    with open(path, "rb") as fh:
        magic = fh.read(8)
    if magic == b"PSIGRID1":
        return read_psi(path)
    if magic == b"RHOGRID1":
        return read_rho(path)
    raise FormatError(path, 0, f"bad magic {magic!r}, expected PSIGRID1 or RHOGRID1")


def write_curve_csv(path: PathLike, curve: DecayCurve) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(CSV_HEADER)
        for (dx, dp), z in zip(curve.deltas, curve.z):
            out.writerow([repr(float(dx)), repr(float(dp)), repr(float(abs(z))),
                          repr(float(z.real)), repr(float(z.imag))])


def read_curve_csv(path: PathLike) -> DecayCurve:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != CSV_HEADER:
        raise ValueError(f"{path}: expected header {','.join(CSV_HEADER)}")
    body = np.array([[float(v) for v in r] for r in rows[1:]]).reshape(-1, 5)
    deltas = body[:, :2]
    z = body[:, 3] + 1j * body[:, 4]
    s = np.hypot(deltas[:, 0], deltas[:, 1])
    return DecayCurve(deltas, z, s)


def sha256(path: PathLike) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()
