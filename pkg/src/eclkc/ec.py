"""Euler characteristic curves of superlevel sets {f >= u} on cubical grids.

Two cubical complexes are supported. With the face-adjacency rules (4 in 2D,
6 in 3D, the only rule in 1D) grid points are vertices and a k-cube is present
when all of its corners are. With the full-adjacency rules (8 in 2D, 26 in 3D)
every grid point is a closed pixel/voxel, so diagonal neighbours touch.

``ec_curve`` builds the exact step function from the filtration values of all
cells; ``ec_curve(..., method="local")`` runs the neighbourhood scan over grid
points instead; ``ec_oracle`` thresholds and counts cells directly and is the
reference both are tested against.
"""
from __future__ import annotations

import csv
import itertools
import json
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Union

import numpy as np
from scipy import ndimage

from .grid import FieldSample, FieldValidationError, GridField


@dataclass(frozen=True)
class Connectivity:
    name: str
    dim: int
    closed: bool  # True: pixels/voxels are closed cells (full adjacency)


_RULES = {
    (1, "line"): Connectivity("line", 1, False),
    (2, "vertex4"): Connectivity("vertex4", 2, False),
    (2, "vertex8"): Connectivity("vertex8", 2, True),
    (3, "face6"): Connectivity("face6", 3, False),
    (3, "full26"): Connectivity("full26", 3, True),
}
_ALIASES = {2: "line", 4: "vertex4", 8: "vertex8", 6: "face6", 26: "full26"}
_DEFAULTS = {1: "line", 2: "vertex4", 3: "face6"}


def resolve_connectivity(conn, dim: int) -> Connectivity:
    """Map None, a rule name, or a neighbour count (4, 8, 6, 26) to a rule for ``dim``."""
    if isinstance(conn, Connectivity):
        if conn.dim != dim:
            raise ValueError(f"connectivity {conn.name} is not admissible for {dim}D fields")
        return conn
    if conn is None:
        name = _DEFAULTS[dim]
    elif isinstance(conn, str) and conn.isdigit():
        name = _ALIASES.get(int(conn), conn)
    elif isinstance(conn, (int, np.integer)):
        name = _ALIASES.get(int(conn), str(conn))
    else:
        name = conn
    if dim == 1 and name in ("vertex4", "vertex8", "face6", "full26"):
        name = "line"
    try:
        return _RULES[(dim, name)]
    except KeyError:
        raise ValueError(f"connectivity {conn!r} is not admissible for {dim}D fields") from None


# ---------------------------------------------------------------------------
# Binary Euler characteristic (reference counting on a doubled grid)

def _parity_sign(shape) -> np.ndarray:
    odd = sum((np.arange(n) % 2).reshape([-1 if i == k else 1 for i in range(len(shape))])
              for k, n in enumerate(shape))
    return np.where(np.asarray(odd) % 2 == 0, 1, -1)


def binary_ec(b, connectivity=None) -> int:
    """Euler characteristic V - E + F (- C) of the complex spanned by a boolean array.

    Cells live on a doubled grid where a coordinate is odd along the axes the
    cell extends in; a cell is present if all (face rules) or any (full rules)
    of its adjacent grid points are true.
    """
    b = np.asarray(b, dtype=bool)
    rule = resolve_connectivity(connectivity, b.ndim)
    if not rule.closed:
        shape = tuple(2 * n - 1 for n in b.shape)
        g = np.ones(shape, dtype=np.uint8)
        g[tuple(slice(None, None, 2) for _ in shape)] = b
        present = ndimage.minimum_filter(g, size=3, mode="constant", cval=1)
    else:
        shape = tuple(2 * n + 1 for n in b.shape)
        g = np.zeros(shape, dtype=np.uint8)
        g[tuple(slice(1, None, 2) for _ in shape)] = b
        present = ndimage.maximum_filter(g, size=3, mode="constant", cval=0)
    return int(np.sum(present.astype(np.int64) * _parity_sign(shape)))


def local_ec(neighborhood, connectivity=None) -> int:
    """Euler characteristic of a binary 3x3 (or 3, or 3x3x3) neighbourhood."""
    nb = np.asarray(neighborhood, dtype=bool)
    if any(n != 3 for n in nb.shape):
        raise ValueError(f"neighbourhood must have side 3 in every axis, got shape {nb.shape}")
    return binary_ec(nb, connectivity)


def ec_oracle(field: GridField, u: float, connectivity=None) -> int:
    """EC of the superlevel set {f >= u}, counted directly on the thresholded grid."""
    return binary_ec(field.domain & (field.values >= u), connectivity)


# ---------------------------------------------------------------------------
# Cell filtration

def cell_filtration(data: np.ndarray, connectivity) -> list:
    """Filtration values of every cell of the complex, grouped by cell type.

    ``data`` has shape (B, *grid) with out-of-domain locations already set to
    -inf. Returns a list of (values, sign) with values of shape (B, ...) and
    sign = (-1)**(cell dimension). A cell enters the superlevel filtration at
    the min (face rules) or max (full rules) of its adjacent grid values.
    """
    dim = data.ndim - 1
    rule = resolve_connectivity(connectivity, dim)
    out = []
    if not rule.closed:
        for k in range(dim + 1):
            for axes in itertools.combinations(range(dim), k):
                val = None
                for shift in itertools.product((0, 1), repeat=k):
                    sl = [slice(None)] * (dim + 1)
                    for ax in range(dim):
                        if ax in axes:
                            t = shift[axes.index(ax)]
                            sl[ax + 1] = slice(t, data.shape[ax + 1] - 1 + t)
                    piece = data[tuple(sl)]
                    val = piece if val is None else np.minimum(val, piece)
                out.append((val, (-1) ** k))
    else:
        pad = [(0, 0)] + [(1, 1)] * dim
        padded = np.pad(data, pad, constant_values=-np.inf)
        for k in range(dim + 1):
            # k = number of axes along which the cell is a boundary (lower-dim) position
            for axes in itertools.combinations(range(dim), k):
                val = None
                for shift in itertools.product((0, 1), repeat=k):
                    sl = [slice(None)]
                    for ax in range(dim):
                        n = data.shape[ax + 1]
                        if ax in axes:
                            t = shift[axes.index(ax)]
                            sl.append(slice(t, t + n + 1))
                        else:
                            sl.append(slice(1, n + 1))
                    piece = padded[tuple(sl)]
                    val = piece if val is None else np.maximum(val, piece)
                out.append((val, (-1) ** (dim - k)))
    return out



def ec_values(data: np.ndarray, u, mask=None, connectivity=None) -> np.ndarray:
    """EC of {f_n >= u_k} for a stack of fields, shape (N, *grid) -> (N, K).

    Counts, with sign, the cells whose entry level is at least u; cheaper than
    building full curves when only a few thresholds are needed.
    """
    data = np.asarray(data, dtype=np.float64)
    u = np.atleast_1d(np.asarray(u, dtype=np.float64))
    if mask is not None:
        data = np.where(np.asarray(mask, bool), data, -np.inf)
    out = np.zeros((data.shape[0], u.size), dtype=np.int64)
    for vals, sign in cell_filtration(data, connectivity):
        v = vals.reshape(data.shape[0], -1)
        for k, uk in enumerate(u):
            out[:, k] += sign * np.count_nonzero(v >= uk, axis=1)
    return out

@dataclass(frozen=True)
class ECCurve:
    """Piecewise-constant EC curve u -> chi({f >= u}).

    The curve equals ``l0`` for u <= crit_values[0] and jumps by ``deltas[m]``
    once u exceeds crit_values[m].
    """

    l0: int
    crit_values: np.ndarray
    deltas: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.crit_values, dtype=np.float64)
        d = np.asarray(self.deltas, dtype=np.int64)
        if c.shape != d.shape or c.ndim != 1:
            raise ValueError("crit_values and deltas must be 1D arrays of equal length")
        if c.size > 1 and not np.all(np.diff(c) > 0):
            raise ValueError("crit_values must be strictly increasing")
        if np.any(d == 0):
            raise ValueError("deltas must be nonzero")
        if int(d.sum()) != -int(self.l0):
            raise ValueError(f"deltas sum to {int(d.sum())}, expected {-int(self.l0)}")
        c.setflags(write=False)
        d.setflags(write=False)
        object.__setattr__(self, "crit_values", c)
        object.__setattr__(self, "deltas", d)
        object.__setattr__(self, "l0", int(self.l0))

    @property
    def levels(self) -> np.ndarray:
        """a_0..a_{M+1}: curve values on (-inf,u_0], (u_0,u_1], ..., (u_M, inf)."""
        return self.l0 + np.concatenate([[0], np.cumsum(self.deltas)])

    def evaluate(self, u):
        u = np.asarray(u, dtype=np.float64)
        idx = np.searchsorted(self.crit_values, u, side="left")
        out = self.levels[idx]
        return int(out) if out.ndim == 0 else out

    __call__ = evaluate

    def to_csv(self, path) -> None:
        """Write ``u,delta,chi_after`` rows and a JSON sidecar ``<path>.json``."""
        after = self.levels[1:]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["u", "delta", "chi_after"])
            for u, d, a in zip(self.crit_values, self.deltas, after):
                w.writerow([repr(float(u)), int(d), int(a)])
        with open(str(path) + ".json", "w") as fh:
            json.dump({"l0": self.l0, "m": int(self.crit_values.size)}, fh)


def _curve_from_cells(cells) -> ECCurve:
    vals, signs = [], []
    for v, s in cells:
        v = v.ravel()
        v = v[np.isfinite(v)]
        vals.append(v)
        signs.append(np.full(v.size, s, dtype=np.int64))
    vals = np.concatenate(vals)
    signs = np.concatenate(signs)
    l0 = int(signs.sum())
    uniq, inv = np.unique(vals, return_inverse=True)
    jumps = -np.bincount(inv, weights=signs, minlength=uniq.size).astype(np.int64)
    keep = jumps != 0
    return ECCurve(l0, uniq[keep], jumps[keep])


def _strict_ranks(field: GridField) -> np.ndarray:
    """Rank of each in-domain point under (value, row-major index); -1 outside."""
    flat = field.values.ravel()
    inside = field.domain.ravel()
    idx = np.flatnonzero(inside)
    order = idx[np.argsort(flat[idx], kind="stable")]
    ranks = np.full(flat.size, -1, dtype=np.int64)
    ranks[order] = np.arange(order.size)
    return ranks.reshape(field.shape)


def _rank_neighborhoods(ranks: np.ndarray, points: np.ndarray) -> np.ndarray:
    """(len(points), 3**D) array of ranks around each point; -1 outside the grid."""
    dim = ranks.ndim
    padded = np.pad(ranks, 1, constant_values=-1)
    offsets = np.array(list(itertools.product((-1, 0, 1), repeat=dim)))
    coords = points[:, None, :] + 1 + offsets[None, :, :]
    return padded[tuple(coords[..., ax] for ax in range(dim))]


def ec_delta_at(field: GridField, index: Sequence[int], connectivity=None) -> int:
    """Change of the EC when the level sweeps down past ``field[index]``.

    Computed as E(nbhd >= center) - E(nbhd > center) with ties broken by
    row-major index, so a new component (local maximum) gives +1.
    """
    index = tuple(int(i) for i in index)
    if len(index) != field.dim or any(not 0 <= i < n for i, n in zip(index, field.shape)):
        raise IndexError(f"index {index} outside the grid {field.shape}")
    if not field.domain[index]:
        raise FieldValidationError(f"index {index} lies outside the domain mask")
    ranks = _strict_ranks(field)
    nb = _rank_neighborhoods(ranks, np.array([index]))[0].reshape((3,) * field.dim)
    r = ranks[index]
    return local_ec(nb >= r, connectivity) - local_ec(nb > r, connectivity)


_LUT_CACHE: dict = {}


def _local_lut(rule: Connectivity) -> np.ndarray:
    if rule.name not in _LUT_CACHE:
        k = 3 ** rule.dim
        bits = ((np.arange(2 ** k)[:, None] >> np.arange(k)) & 1).astype(bool)
        _LUT_CACHE[rule.name] = np.array(
            [local_ec(b.reshape((3,) * rule.dim), rule) for b in bits], dtype=np.int64)
    return _LUT_CACHE[rule.name]


def _local_deltas(field: GridField, rule: Connectivity):
    ranks = _strict_ranks(field)
    points = np.argwhere(field.domain)
    nb = _rank_neighborhoods(ranks, points)
    r = ranks[tuple(points.T)][:, None]
    if rule.dim <= 2:
        lut = _local_lut(rule)
        weights = 1 << np.arange(nb.shape[1])
        return lut[(nb >= r) @ weights] - lut[(nb > r) @ weights], points
    shape = (3,) * rule.dim
    d = np.array([local_ec(ge.reshape(shape), rule) - local_ec(gt.reshape(shape), rule)
                  for ge, gt in zip(nb >= r, nb > r)], dtype=np.int64)
    return d, points


def ec_curve(field: GridField, connectivity=None, method: str = "cells") -> ECCurve:
    """Exact EC curve of the superlevel filtration of ``field``.

    ``method="cells"`` collects the entry level of every cell; ``"local"``
    scans grid points and evaluates the local topology change in each 3^D
    neighbourhood. Both merge equal critical values by summing their jumps.
    """
    if not field.domain.any():
        raise FieldValidationError("empty domain: mask has no true cells")
    rule = resolve_connectivity(connectivity, field.dim)
    if method == "cells":
        return _curve_from_cells(cell_filtration(field.masked_values()[None], rule))
    if method != "local":
        raise ValueError(f"unknown method {method!r}")
    d, points = _local_deltas(field, rule)
    vals = field.values[tuple(points.T)]
    l0 = int(d.sum())
    uniq, inv = np.unique(vals, return_inverse=True)
    jumps = -np.bincount(inv, weights=d, minlength=uniq.size).astype(np.int64)
    keep = jumps != 0
    return ECCurve(l0, uniq[keep], jumps[keep])


# ---------------------------------------------------------------------------
# Averages of EC curves

@dataclass(frozen=True)
class StepAverage:
    """Pointwise mean of N EC curves, itself a step function.

    Jumps are kept as integer sums over the N curves so that partial sums are
    exact; ``deltas`` gives them divided by N.
    """

    l0: float
    crit_values: np.ndarray
    sums: np.ndarray
    n: int

    @property
    def deltas(self) -> np.ndarray:
        return self.sums / self.n

    def evaluate(self, u):
        u = np.asarray(u, dtype=np.float64)
        totals = round(self.l0 * self.n) + np.concatenate([[0], np.cumsum(self.sums)])
        out = (totals / self.n)[np.searchsorted(self.crit_values, u, side="left")]
        return float(out) if out.ndim == 0 else out

    __call__ = evaluate


def average_curves(curves: Sequence[ECCurve]) -> StepAverage:
    curves = list(curves)
    if not curves:
        raise ValueError("need at least one curve")
    vals = np.concatenate([c.crit_values for c in curves])
    dels = np.concatenate([c.deltas for c in curves]).astype(np.int64)
    uniq, inv = np.unique(vals, return_inverse=True)
    total = np.zeros(uniq.size, dtype=np.int64)
    np.add.at(total, inv, dels)
    keep = total != 0
    n = len(curves)
    l0 = sum(c.l0 for c in curves) / n
    return StepAverage(l0, uniq[keep], total[keep], n)


def ec_curve_average(sample: Union[FieldSample, Iterable[ECCurve]], connectivity=None) -> StepAverage:
    """Sample-average EC curve over all fields of a sample (or precomputed curves)."""
    if isinstance(sample, FieldSample):
        curves = [ec_curve(f, connectivity) for f in sample]
    else:
        curves = list(sample)
    return average_curves(curves)
