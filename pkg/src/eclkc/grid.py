"""Scalar fields on regular grids, samples of such fields, and the FLDB file format.

Grid spacing is one in every axis. A boolean mask marks the domain; locations
outside it behave as if the field were -inf there.
"""
from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Optional, Sequence

import numpy as np

PROVENANCES = ("raw", "standardized_residual", "bootstrap_replicate")


class FieldValidationError(ValueError):
    """Raised when a field or a sample violates its data invariants."""


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


def _first_bad_index(bad: np.ndarray) -> tuple:
    flat = int(np.flatnonzero(bad.ravel())[0])
    return tuple(int(i) for i in np.unravel_index(flat, bad.shape))


@dataclass(frozen=True)
class GridField:
    """A scalar field sampled on a 1D, 2D or 3D integer lattice.

    ``values`` is stored as an array of the grid's shape (row-major when
    flattened). ``mask`` is None for a full rectangular domain.
    """

    values: np.ndarray
    mask: Optional[np.ndarray] = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim not in (1, 2, 3):
            raise FieldValidationError(f"fields must be 1D, 2D or 3D, got {values.ndim}D")
        if values.size == 0 or min(values.shape) < 1:
            raise FieldValidationError("field shape must be positive in every axis")
        mask = self.mask
        if mask is not None:
            mask = np.asarray(mask, dtype=bool)
            if mask.shape != values.shape:
                if mask.size != values.size:
                    raise FieldValidationError(
                        f"mask has {mask.size} entries, field has {values.size}")
                mask = mask.reshape(values.shape)
            bad = ~np.isfinite(values) & mask
        else:
            bad = ~np.isfinite(values)
        if bad.any():
            idx = _first_bad_index(bad)
            raise FieldValidationError(f"non-finite value inside the domain at index {idx}")
        object.__setattr__(self, "values", _readonly(values))
        object.__setattr__(self, "mask", None if mask is None else _readonly(mask))

    @classmethod
    def from_flat(cls, shape: Sequence[int], values, mask=None) -> "GridField":
        shape = tuple(int(s) for s in shape)
        values = np.asarray(values, dtype=np.float64).ravel()
        if values.size != int(np.prod(shape)):
            raise FieldValidationError(
                f"length mismatch: shape {list(shape)} needs {int(np.prod(shape))} values, got {values.size}")
        if mask is not None:
            mask = np.asarray(mask, dtype=bool).ravel()
            if mask.size != values.size:
                raise FieldValidationError(
                    f"length mismatch: mask has {mask.size} entries, expected {values.size}")
            mask = mask.reshape(shape)
        return cls(values.reshape(shape), mask)

    @property
    def dim(self) -> int:
        return self.values.ndim

    @property
    def shape(self) -> tuple:
        return self.values.shape

    @property
    def domain(self) -> np.ndarray:
        """Boolean array of in-domain locations (all True without a mask)."""
        if self.mask is None:
            return np.ones(self.shape, dtype=bool)
        return self.mask

    def masked_values(self) -> np.ndarray:
        """Values with out-of-domain locations replaced by -inf."""
        if self.mask is None:
            return self.values
        return np.where(self.mask, self.values, -np.inf)

    def __eq__(self, other):
        if not isinstance(other, GridField):
            return NotImplemented
        if self.shape != other.shape:
            return False
        if (self.mask is None) != (other.mask is None):
            return False
        if self.mask is not None and not np.array_equal(self.mask, other.mask):
            return False
        return self.values.tobytes() == other.values.tobytes()

    __hash__ = None


def flatten_index(index: Sequence[int], shape: Sequence[int]) -> int:
    return int(np.ravel_multi_index(tuple(index), tuple(shape)))


def unflatten_index(flat: int, shape: Sequence[int]) -> tuple:
    return tuple(int(i) for i in np.unravel_index(flat, tuple(shape)))


@dataclass(frozen=True)
class FieldSample:
    """N fields over one shared domain, stacked as an array of shape (N, *shape)."""

    data: np.ndarray
    mask: Optional[np.ndarray] = None
    provenance: str = "raw"
    centered: Optional[bool] = field(default=None, compare=False)

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim not in (2, 3, 4):
            raise FieldValidationError("sample data must have shape (N, *grid_shape) with a 1-3D grid")
        if data.shape[0] < 1:
            raise FieldValidationError("a sample needs at least one field")
        if self.provenance not in PROVENANCES:
            raise FieldValidationError(f"unknown provenance {self.provenance!r}")
        mask = self.mask
        if mask is not None:
            mask = np.asarray(mask, dtype=bool)
            if mask.shape != data.shape[1:]:
                raise FieldValidationError("mask shape differs from the fields' shape")
            bad = ~np.isfinite(data) & mask
        else:
            bad = ~np.isfinite(data)
        if bad.any():
            idx = _first_bad_index(bad)
            raise FieldValidationError(f"non-finite value inside the domain at field {idx[0]}, index {idx[1:]}")
        object.__setattr__(self, "data", _readonly(data))
        object.__setattr__(self, "mask", None if mask is None else _readonly(mask))

    @classmethod
    def from_fields(cls, fields: Sequence[GridField], provenance: str = "raw") -> "FieldSample":
        fields = list(fields)
        if not fields:
            raise FieldValidationError("a sample needs at least one field")
        first = fields[0]
        for k, f in enumerate(fields[1:], start=1):
            if f.shape != first.shape:
                raise FieldValidationError(f"field {k} has shape {f.shape}, expected {first.shape}")
            if (f.mask is None) != (first.mask is None) or (
                    f.mask is not None and not np.array_equal(f.mask, first.mask)):
                raise FieldValidationError(f"field {k} has a different mask")
        return cls(np.stack([f.values for f in fields]), first.mask, provenance)

    def __len__(self) -> int:
        return self.data.shape[0]

    def __getitem__(self, n: int) -> GridField:
        return GridField(self.data[n], self.mask)

    def __iter__(self) -> Iterator[GridField]:
        for n in range(len(self)):
            yield self[n]

    @property
    def shape(self) -> tuple:
        return self.data.shape[1:]

    @property
    def dim(self) -> int:
        return self.data.ndim - 1

    @property
    def domain(self) -> np.ndarray:
        if self.mask is None:
            return np.ones(self.shape, dtype=bool)
        return self.mask

    def masked_data(self) -> np.ndarray:
        if self.mask is None:
            return self.data
        return np.where(self.mask, self.data, -np.inf)


# ---------------------------------------------------------------------------
# FLDB: one JSON header line, optional mask bytes, little-endian float64 values.

def _header_bytes(f: GridField) -> bytes:
    header = {"dim": f.dim, "shape": list(f.shape), "mask": f.mask is not None, "dtype": "f64le"}
    return (json.dumps(header, separators=(",", ":")) + "\n").encode("utf-8")


def field_to_bytes(f: GridField) -> bytes:
    parts = [_header_bytes(f)]
    if f.mask is not None:
        parts.append(f.mask.astype(np.uint8).tobytes(order="C"))
    parts.append(f.values.astype("<f8").tobytes(order="C"))
    return b"".join(parts)


def field_from_bytes(raw: bytes) -> GridField:
    nl = raw.find(b"\n")
    if nl < 0:
        raise FieldValidationError("malformed header: no newline terminator")
    try:
        header = json.loads(raw[:nl].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FieldValidationError(f"malformed header: {exc}") from None
    if not isinstance(header, dict) or not {"dim", "shape", "mask", "dtype"} <= header.keys():
        raise FieldValidationError("malformed header: needs keys dim, shape, mask, dtype")
    if header["dtype"] != "f64le":
        raise FieldValidationError(f"malformed header: unsupported dtype {header['dtype']!r}")
    shape = header["shape"]
    if (not isinstance(shape, list) or len(shape) != header["dim"]
            or not all(isinstance(s, int) and s > 0 for s in shape)):
        raise FieldValidationError("malformed header: shape must list dim positive integers")
    size = int(np.prod(shape))
    payload = raw[nl + 1:]
    mask = None
    if header["mask"]:
        if len(payload) < size:
            raise FieldValidationError(f"length mismatch: mask needs {size} bytes, got {len(payload)}")
        mbytes = np.frombuffer(payload[:size], dtype=np.uint8)
        if np.any(mbytes > 1):
            raise FieldValidationError("malformed mask payload: bytes must be 0 or 1")
        mask = mbytes.astype(bool)
        payload = payload[size:]
    if len(payload) != 8 * size:
        raise FieldValidationError(
            f"length mismatch: header shape {shape} needs {size} values, payload holds {len(payload) / 8:g}")
    values = np.frombuffer(payload, dtype="<f8").astype(np.float64)
    return GridField.from_flat(shape, values, mask)


def load_field(path) -> GridField:
    return field_from_bytes(Path(path).read_bytes())


def save_field(f: GridField, path) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(field_to_bytes(f))
    os.replace(tmp, path)


def export_csv(f: GridField, path) -> None:
    """Write a 2D field as CSV, one row per index along the first axis."""
    if f.dim != 2:
        raise FieldValidationError("CSV export is only defined for 2D fields")
    vals = f.masked_values()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        for row in vals:
            w.writerow([repr(float(v)) for v in row])


@dataclass(frozen=True)
class DomainEC:
    l0: int


def domain_ec(mask, connectivity=None) -> DomainEC:
    """Euler characteristic of the cubical complex spanned by a boolean mask."""
    from .ec import binary_ec

    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise FieldValidationError("empty domain: mask has no true cells")
    return DomainEC(binary_ec(mask, connectivity))
