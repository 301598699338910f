"""Reader and writer for the GFLD/1 field file format.

Layout: one UTF-8 JSON header line, then little-endian float64 data in
row-major point order with components innermost.  Symmetric storage
("sym2", "riem4") writes only the independent components.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from confcov.errors import ValidationError
from confcov.geometry.fields import (
    CO,
    CONTRA,
    MetricField,
    OneFormField,
    Riemann4Field,
    ScalarField,
    SymTensor2Field,
    VectorField,
)
from confcov.geometry.grid import Grid

MAGIC = "GFLD"
VERSION = 1


def _describe(field):
    if isinstance(field, ScalarField):
        return 0, "co", "none"
    if isinstance(field, (OneFormField, VectorField)):
        return 1, field.variance, "none"
    if isinstance(field, SymTensor2Field):
        return 2, field.variance, "sym2"
    if isinstance(field, Riemann4Field):
        return 4, "co", "riem4"
    raise TypeError(f"cannot serialize {type(field).__name__}")


def to_bytes(field) -> bytes:
    rank, variance, sym = _describe(field)
    grid = field.grid
    header = {
        "magic": MAGIC,
        "version": VERSION,
        "n": grid.n,
        "shape": list(grid.shape),
        "periods": list(grid.periods),
        "rank": rank,
        "variance": variance,
        "sym": sym,
    }
    vals = field.values if rank else field.values[None]
    data = np.ascontiguousarray(np.moveaxis(vals, 0, -1), dtype="<f8")
    return (json.dumps(header, separators=(",", ":")) + "\n").encode("utf-8") + data.tobytes()


def write_field(path, field) -> None:
    Path(path).write_bytes(to_bytes(field))


def from_bytes(blob: bytes, metric: bool = False):
    """Decode a GFLD/1 blob.

    With ``metric=True`` a covariant rank-2 field is returned as a
    :class:`MetricField` (and checked for positivity).
    """
    nl = blob.find(b"\n")
    if nl < 0:
        raise ValidationError("GFLD: missing header line")
    try:
        header = json.loads(blob[:nl].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ValidationError(f"GFLD: bad header: {exc}") from None
    if header.get("magic") != MAGIC or header.get("version") != VERSION:
        raise ValidationError("GFLD: wrong magic or version")
    grid = Grid(tuple(header["shape"]), tuple(header["periods"]))
    if header["n"] != grid.n:
        raise ValidationError("GFLD: n inconsistent with shape")
    rank, variance, sym = header["rank"], header["variance"], header["sym"]
    n = grid.n
    if rank == 0:
        ncomp = 1
    elif rank == 1:
        ncomp = n
    elif rank == 2:
        ncomp = n * (n + 1) // 2 if sym == "sym2" else n * n
    elif rank == 4:
        if sym != "riem4":
            raise ValidationError("GFLD: rank-4 fields must use riem4 storage")
        m = n * (n - 1) // 2
        ncomp = m * (m + 1) // 2
    else:
        raise ValidationError(f"GFLD: unsupported rank {rank}")
    data = np.frombuffer(blob, dtype="<f8", offset=nl + 1)
    if data.size != ncomp * grid.npoints:
        raise ValidationError(
            f"GFLD: expected {ncomp * grid.npoints} values, found {data.size}"
        )
    vals = np.moveaxis(data.reshape(grid.shape + (ncomp,)), -1, 0).astype(np.float64)
    if rank == 0:
        return ScalarField(grid, vals[0])
    if rank == 1:
        return (OneFormField if variance == CO else VectorField)(grid, vals)
    if rank == 2:
        if variance not in (CO, CONTRA):
            raise ValidationError("GFLD: mixed rank-2 tensors are not symmetric fields")
        if sym != "sym2":
            full = vals.reshape((n, n) + grid.shape)
            if not np.array_equal(full, full.swapaxes(0, 1)):
                raise ValidationError("GFLD: rank-2 data is not symmetric")
            field = SymTensor2Field.from_full(grid, full, variance)
        else:
            field = SymTensor2Field(grid, vals, variance)
        if metric:
            return MetricField.from_sym(field)
        return field
    return Riemann4Field(grid, vals)


def read_field(path, metric: bool = False):
    return from_bytes(Path(path).read_bytes(), metric=metric)
