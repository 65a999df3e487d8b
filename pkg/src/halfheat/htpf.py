"""HTPF field files and coefficient stacks.

Layout (all little-endian): magic ``HTPF``, u16 version (= 1), u8 rank
(= d + 1), rank u64 sample counts with time first, rank f64 periods, then
the float64 samples in row-major order.  Coefficient matrices are written
as one HTPF file per entry plus a JSON sidecar holding the tag, delta and
generator parameters.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .coefficients import Coefficients, Ellipticity
from .grid import Field, Grid, make_grid

__all__ = ["write_field", "read_field", "write_coefficients", "read_coefficients"]

_MAGIC = b"HTPF"
_VERSION = 1


def write_field(path: str | Path, field: Field) -> None:
    grid = field.grid
    rank = grid.d + 1
    sizes = (grid.n_t, *grid.n_x)
    periods = (grid.l_t, *grid.l_x)
    header = _MAGIC + struct.pack("<HB", _VERSION, rank)
    header += struct.pack(f"<{rank}Q", *sizes)
    header += struct.pack(f"<{rank}d", *periods)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(field.data, dtype="<f8").tobytes())


def read_field(path: str | Path) -> Field:
    raw = Path(path).read_bytes()
    if raw[:4] != _MAGIC:
        raise ValueError(f"{path}: not an HTPF file (bad magic {raw[:4]!r})")
    version, rank = struct.unpack_from("<HB", raw, 4)
    if version != _VERSION:
        raise ValueError(f"{path}: unsupported HTPF version {version}")
    if not 2 <= rank <= 4:
        raise ValueError(f"{path}: rank {rank} outside supported range 2..4")
    off = 7
    sizes = struct.unpack_from(f"<{rank}Q", raw, off)
    off += 8 * rank
    periods = struct.unpack_from(f"<{rank}d", raw, off)
    off += 8 * rank
    count = int(np.prod(sizes))
    expected = off + 8 * count
    if len(raw) != expected:
        raise ValueError(
            f"{path}: payload size mismatch (file {len(raw)} bytes, header implies {expected})"
        )
    data = np.frombuffer(raw, dtype="<f8", count=count, offset=off).reshape(sizes)
    grid = make_grid(
        d=rank - 1, n_t=sizes[0], n_x=sizes[1:], l_t=periods[0], l_x=periods[1:]
    )
    return Field(grid, data.astype(np.float64))


def write_coefficients(stem: str | Path, coeffs: Coefficients) -> Path:
    """Write one HTPF per matrix entry plus ``<stem>.json``; returns the sidecar path."""
    stem = Path(stem)
    d = coeffs.grid.d
    files = {}
    for i in range(d):
        for j in range(d):
            name = f"{stem.name}_{i + 1}{j + 1}.htpf"
            write_field(stem.with_name(name), Field(coeffs.grid, coeffs.data[i, j]))
            files[f"a{i + 1}{j + 1}"] = name
    sidecar = stem.with_suffix(".json")
    meta = {
        "tag": coeffs.tag,
        "delta": coeffs.ellipticity.delta,
        "files": files,
        "generator": coeffs.generator or {},
    }
    sidecar.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return sidecar


def read_coefficients(sidecar: str | Path) -> Coefficients:
    sidecar = Path(sidecar)
    meta = json.loads(sidecar.read_text())
    entries = {}
    grid: Grid | None = None
    for key, name in meta["files"].items():
        fld = read_field(sidecar.with_name(name))
        grid = fld.grid
        entries[key] = fld.data
    assert grid is not None
    d = grid.d
    data = np.empty((d, d, *grid.shape))
    for i in range(d):
        for j in range(d):
            data[i, j] = entries[f"a{i + 1}{j + 1}"]
    return Coefficients(
        grid=grid,
        data=data,
        tag=meta["tag"],
        ellipticity=Ellipticity(float(meta["delta"])),
        generator=meta.get("generator") or None,
    )
