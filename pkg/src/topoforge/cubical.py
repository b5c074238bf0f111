"""Sublevel filtration of the cubical complex of a volume and its persistence.

Cells live on the doubled "bitmap" lattice of shape (2nx-1, 2ny-1, 2nz-1):
even coordinates are grid vertices, odd coordinates span edges/squares/voxels
(cell dimension = number of odd coordinates). Each cell's filtration value is
the max over its vertices (V-construction), so faces never enter later than
cofaces. The total cell order is ascending (value, dimension, lexicographic
bitmap coordinate); both the fast path and the naive oracle use it, which
pins tie-breaking and makes their pairings identical.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._reduce import reduce_columns, unionfind_pairs
from .grid import VolumeGrid

NAIVE_CELL_GUARD = 100_000


@dataclass(frozen=True)
class FilteredCubicalComplex:
    grid: VolumeGrid
    bitmap: np.ndarray  # (2nx-1, 2ny-1, 2nz-1) cell filtration values

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.grid.dims

    @property
    def max_value(self) -> float:
        return float(self.grid.values.max())

    def cell_value(self, anchor, mask) -> float:
        i, j, k = anchor
        mx, my, mz = mask
        return float(self.bitmap[2 * i + mx, 2 * j + my, 2 * k + mz])

    def cell_counts(self) -> tuple[int, int, int, int]:
        nx, ny, nz = self.dims
        n_v = nx * ny * nz
        n_e = (nx - 1) * ny * nz + nx * (ny - 1) * nz + nx * ny * (nz - 1)
        n_s = nx * (ny - 1) * (nz - 1) + (nx - 1) * ny * (nz - 1) + (nx - 1) * (ny - 1) * nz
        n_c = (nx - 1) * (ny - 1) * (nz - 1)
        return n_v, n_e, n_s, n_c

    def total_cells(self) -> int:
        return sum(self.cell_counts())


@dataclass(frozen=True)
class PersistencePair:
    dim: int
    birth: float
    death: float  # +inf for essential classes
    birth_cell: int  # bitmap linear index
    death_cell: int  # -1 for essential classes

    @property
    def persistence(self) -> float:
        return self.death - self.birth


@dataclass(frozen=True)
class PersistenceDiagramSet:
    """Persistence pairs of a filtered volume, stored columnwise."""

    dim: np.ndarray  # int8
    birth: np.ndarray
    death: np.ndarray  # +inf for essential
    birth_cell: np.ndarray
    death_cell: np.ndarray  # -1 for essential
    grid_dims: tuple[int, int, int]
    bounds: tuple
    value_range: tuple[float, float]

    def __len__(self) -> int:
        return len(self.dim)

    def select(self, dim: int) -> "PersistenceDiagramSet":
        m = self.dim == dim
        return PersistenceDiagramSet(
            self.dim[m], self.birth[m], self.death[m],
            self.birth_cell[m], self.death_cell[m],
            self.grid_dims, self.bounds, self.value_range,
        )

    def pairs(self):
        for i in range(len(self.dim)):
            yield PersistencePair(
                int(self.dim[i]), float(self.birth[i]), float(self.death[i]),
                int(self.birth_cell[i]), int(self.death_cell[i]),
            )

    def canonical(self):
        """Pair multiset as a sorted tuple list, for exact comparison."""
        rows = [
            (int(d), float(b), float(dd), int(bc), int(dc))
            for d, b, dd, bc, dc in zip(
                self.dim, self.birth, self.death, self.birth_cell, self.death_cell
            )
        ]
        return sorted(rows)


def build_filtration(grid: VolumeGrid) -> FilteredCubicalComplex:
    """V-construction: cell value = max over the cell's vertices."""
    vals = np.asarray(grid.values, float)
    nx, ny, nz = grid.dims
    bitmap = np.empty((2 * nx - 1, 2 * ny - 1, 2 * nz - 1))
    bitmap[0::2, 0::2, 0::2] = vals
    bitmap[1::2, 0::2, 0::2] = np.maximum(vals[:-1], vals[1:])
    even_y = bitmap[:, 0::2, 0::2]
    bitmap[:, 1::2, 0::2] = np.maximum(even_y[:, :-1], even_y[:, 1:])
    even_z = bitmap[:, :, 0::2]
    bitmap[:, :, 1::2] = np.maximum(even_z[:, :, :-1], even_z[:, :, 1:])
    bitmap.setflags(write=False)
    return FilteredCubicalComplex(grid, bitmap)


def _cell_tables(cx: FilteredCubicalComplex):
    """Per-dimension sorted cell lists and a rank lookup over the bitmap."""
    bm = cx.bitmap
    shape = bm.shape
    flat = bm.ravel()
    parities = [np.arange(s, dtype=np.int8) % 2 for s in shape]
    cell_dim = (
        parities[0][:, None, None] + parities[1][None, :, None] + parities[2][None, None, :]
    ).ravel()
    cells = []
    rank = np.empty(flat.size, np.int64)
    for d in range(4):
        lin = np.flatnonzero(cell_dim == d)
        order = np.lexsort((lin, flat[lin]))
        lin = lin[order]
        cells.append(lin)
        rank[lin] = np.arange(lin.size)
    return flat, cells, rank


def _facet_ranks(cells_d: np.ndarray, shape, rank: np.ndarray, width: int) -> np.ndarray:
    """Row ranks of the facets of each cell, sorted ascending per row."""
    strides = np.array([shape[1] * shape[2], shape[2], 1], np.int64)
    x = cells_d // strides[0]
    rem = cells_d % strides[0]
    y = rem // strides[1]
    z = rem % strides[1]
    coords = (x, y, z)
    out = np.empty((cells_d.size, width), np.int64)
    filled = np.zeros(cells_d.size, np.int64)
    for axis in range(3):
        idx = np.flatnonzero((coords[axis] % 2) == 1)
        if idx.size == 0:
            continue
        pos = filled[idx]
        lin = cells_d[idx]
        out[idx, pos] = rank[lin - strides[axis]]
        out[idx, pos + 1] = rank[lin + strides[axis]]
        filled[idx] += 2
    out.sort(axis=1)
    return out


def compute_persistence(
    cx: FilteredCubicalComplex, include_dim3: bool = False
) -> PersistenceDiagramSet:
    """Persistence pairs of the sublevel filtration over Z/2.

    Dim 0 is paired by union-find (elder rule); dims 1 and 2 by twist/clearing
    column reduction processed top-down so death columns already paired as
    births are skipped. Zero-persistence pairs are retained.
    """
    flat, cells, rank = _cell_tables(cx)
    shape = cx.bitmap.shape

    edge_vertices = _facet_ranks(cells[1], shape, rank, 2)
    paired_vertex, roots = unionfind_pairs(edge_vertices, cells[0].size)

    bnd3 = _facet_ranks(cells[3], shape, rank, 6)
    no_skip = np.zeros(cells[3].size, bool)
    pair_row3 = reduce_columns(bnd3, no_skip, cells[2].size)

    squares_cleared = np.zeros(cells[2].size, bool)
    squares_cleared[pair_row3[pair_row3 >= 0]] = True
    bnd2 = _facet_ranks(cells[2], shape, rank, 4)
    pair_row2 = reduce_columns(bnd2, squares_cleared, cells[1].size)

    dims_out, births, deaths, bcells, dcells = [], [], [], [], []

    def emit(dim, birth_lin, death_lin):
        dims_out.append(np.full(birth_lin.size, dim, np.int8))
        births.append(flat[birth_lin])
        bcells.append(birth_lin)
        if death_lin is None:
            deaths.append(np.full(birth_lin.size, np.inf))
            dcells.append(np.full(birth_lin.size, -1, np.int64))
        else:
            deaths.append(flat[death_lin])
            dcells.append(death_lin)

    # dim 0
    neg_edges = np.flatnonzero(paired_vertex >= 0)
    emit(0, cells[0][paired_vertex[neg_edges]], cells[1][neg_edges])
    root_ranks = np.flatnonzero(roots == np.arange(cells[0].size))
    emit(0, cells[0][root_ranks], None)

    # dim 1
    died1 = np.flatnonzero(pair_row2 >= 0)
    emit(1, cells[1][pair_row2[died1]], cells[2][died1])
    positive_edges = paired_vertex < 0
    pivoted_edges = np.zeros(cells[1].size, bool)
    pivoted_edges[pair_row2[died1]] = True
    ess1 = np.flatnonzero(positive_edges & ~pivoted_edges)
    emit(1, cells[1][ess1], None)

    # dim 2
    died2 = np.flatnonzero(pair_row3 >= 0)
    emit(2, cells[2][pair_row3[died2]], cells[3][died2])
    ess2 = np.flatnonzero(~squares_cleared & (pair_row2 < 0))
    emit(2, cells[2][ess2], None)

    # dim 3: a sublevel set of a box complex has no 3-cycles, so voxels never
    # birth anything; kept for the counting identity when requested
    ess3 = np.flatnonzero(pair_row3 < 0)
    if include_dim3 or ess3.size:
        emit(3, cells[3][ess3], None)

    return PersistenceDiagramSet(
        np.concatenate(dims_out),
        np.concatenate(births),
        np.concatenate(deaths),
        np.concatenate(bcells),
        np.concatenate(dcells),
        cx.dims,
        cx.grid.bounds,
        (float(cx.grid.values.min()), float(cx.grid.values.max())),
    )


def compute_persistence_naive(cx: FilteredCubicalComplex) -> PersistenceDiagramSet:
    """Textbook full column reduction, no twist/clearing. Oracle for the fast path."""
    if cx.total_cells() > NAIVE_CELL_GUARD:
        raise ValueError("complex too large for the naive oracle (> %d cells)" % NAIVE_CELL_GUARD)
    bm = cx.bitmap
    shape = bm.shape
    flat = bm.ravel()
    strides = (shape[1] * shape[2], shape[2], 1)

    def coords(lin):
        x, rem = divmod(lin, strides[0])
        y, z = divmod(rem, strides[1])
        return x, y, z

    entries = []
    for lin in range(flat.size):
        x, y, z = coords(lin)
        d = x % 2 + y % 2 + z % 2
        entries.append((flat[lin], d, lin))
    entries.sort()
    position = {lin: i for i, (_, _, lin) in enumerate(entries)}

    low_to_col: dict[int, set] = {}
    pair_of: dict[int, int] = {}
    for pos, (_, d, lin) in enumerate(entries):
        if d == 0:
            continue
        x, y, z = coords(lin)
        column = set()
        for axis, c in enumerate((x, y, z)):
            if c % 2 == 1:
                column ^= {position[lin - strides[axis]], position[lin + strides[axis]]}
        while column:
            low = max(column)
            if low in low_to_col:
                column ^= low_to_col[low]
            else:
                low_to_col[low] = set(column)
                pair_of[low] = pos
                break

    death_positions = set(pair_of.values())
    dims_out, births, deaths, bcells, dcells = [], [], [], [], []
    for pos, (value, d, lin) in enumerate(entries):
        if pos in pair_of:
            dpos = pair_of[pos]
            dims_out.append(d)
            births.append(value)
            bcells.append(lin)
            deaths.append(entries[dpos][0])
            dcells.append(entries[dpos][2])
        elif pos not in death_positions:
            dims_out.append(d)
            births.append(value)
            bcells.append(lin)
            deaths.append(np.inf)
            dcells.append(-1)
    return PersistenceDiagramSet(
        np.asarray(dims_out, np.int8),
        np.asarray(births, float),
        np.asarray(deaths, float),
        np.asarray(bcells, np.int64),
        np.asarray(dcells, np.int64),
        cx.dims,
        cx.grid.bounds,
        (float(cx.grid.values.min()), float(cx.grid.values.max())),
    )


def betti_at(pds: PersistenceDiagramSet, t: float) -> tuple[int, int, int]:
    alive = (pds.birth <= t) & (t < pds.death)
    return tuple(int(np.sum(alive & (pds.dim == d))) for d in range(3))


def betti_at_full(pds: PersistenceDiagramSet, t: float) -> tuple[int, int, int, int]:
    alive = (pds.birth <= t) & (t < pds.death)
    return tuple(int(np.sum(alive & (pds.dim == d))) for d in range(4))


def euler_characteristic_at(cx: FilteredCubicalComplex, t: float) -> int:
    """Alternating sum of sublevel cell counts V - E + F - C."""
    bm = cx.bitmap
    shape = bm.shape
    parities = [np.arange(s, dtype=np.int8) % 2 for s in shape]
    cell_dim = (
        parities[0][:, None, None] + parities[1][None, :, None] + parities[2][None, None, :]
    )
    sub = bm <= t
    chi = 0
    for d in range(4):
        chi += (1 if d % 2 == 0 else -1) * int(np.sum(sub & (cell_dim == d)))
    return chi


# ---------------------------------------------------------------------------
# diagram TSV format

def write_diagram(
    path, pds: PersistenceDiagramSet, include_dim3=False, drop_zero=True, extra_header=()
) -> None:
    nx, ny, nz = pds.grid_dims
    lines = ["# topoforge-pd v1 dims=%dx%dx%d" % (nx, ny, nz)]
    for extra in extra_header:
        lines.append("# " + extra)
    order = np.lexsort((pds.death, pds.birth, pds.dim))
    for i in order:
        d = int(pds.dim[i])
        if d > 2 and not include_dim3:
            continue
        if drop_zero and pds.birth[i] == pds.death[i]:
            continue
        death = "inf" if np.isinf(pds.death[i]) else repr(float(pds.death[i]))
        lines.append("%d\t%s\t%s" % (d, repr(float(pds.birth[i])), death))
    with open(path, "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")


def read_diagram(path):
    """Returns (grid dims, (n, 3) array of [dim, birth, death]) from TSV."""
    dims = None
    rows = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                if "topoforge-pd" in line and "dims=" in line:
                    spec = line.split("dims=")[1].split()[0]
                    dims = tuple(int(x) for x in spec.split("x"))
                continue
            d, b, dd = line.split("\t")
            rows.append((int(d), float(b), np.inf if dd == "inf" else float(dd)))
    return dims, np.asarray(rows, float).reshape(-1, 3)
