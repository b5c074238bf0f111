"""Dense scalar volumes on axis-aligned boxes and the VGRD binary container."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

MAGIC = b"VGRD"
VERSION = 1

DEFAULT_BOUNDS = ((-0.5, -0.5, -0.5), (0.5, 0.5, 0.5))


@dataclass(frozen=True)
class VolumeGrid:
    """Scalar raster over an axis-aligned box.

    `values` is indexed [i, j, k] for the lattice point (x_i, y_j, z_k);
    the lattice includes both bound faces, so spacing is (max-min)/(n-1).
    """

    dims: tuple[int, int, int]
    bounds: tuple[tuple[float, float, float], tuple[float, float, float]] = DEFAULT_BOUNDS
    values: np.ndarray = field(default=None)

    def __post_init__(self):
        nx, ny, nz = self.dims
        if nx < 2 or ny < 2 or nz < 2:
            raise ValueError("grid dims must be >= 2 per axis")
        lo, hi = np.asarray(self.bounds[0], float), np.asarray(self.bounds[1], float)
        if not np.all(lo < hi):
            raise ValueError("bounds min must be < max componentwise")
        vals = np.asarray(self.values)
        if vals.shape != (nx, ny, nz):
            raise ValueError("values shape %s does not match dims %s" % (vals.shape, self.dims))
        if not np.all(np.isfinite(vals)):
            raise ValueError("grid values must be finite")
        object.__setattr__(self, "values", vals)
        vals.setflags(write=False)

    @property
    def spacing(self) -> np.ndarray:
        lo, hi = np.asarray(self.bounds[0]), np.asarray(self.bounds[1])
        return (hi - lo) / (np.asarray(self.dims) - 1)

    def axes(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        lo, hi = self.bounds
        return tuple(np.linspace(lo[a], hi[a], self.dims[a]) for a in range(3))

    def lattice_points(self) -> np.ndarray:
        """All lattice points as an (nx*ny*nz, 3) array, x varying fastest."""
        xs, ys, zs = self.axes()
        gx, gy, gz = np.meshgrid(xs, ys, zs, indexing="ij")
        pts = np.stack([gx, gy, gz], axis=-1)
        return pts.reshape(-1, 3, order="F")


def occupancy(grid: VolumeGrid) -> VolumeGrid:
    """Binary occupancy from an SDF grid: 1 where value <= 0, else 0.

    An already-binary grid is its own occupancy (idempotence); re-applying
    the sign rule to indicator values would flip the outside.
    """
    vals = grid.values
    binary = np.all((vals == 0.0) | (vals == 1.0))
    if binary and np.any(vals == 1.0) and np.any(vals == 0.0):
        # an indicator grid is its own occupancy; constant grids are read as SDF
        return grid
    occ = np.where(vals <= 0.0, 1.0, 0.0)
    return VolumeGrid(grid.dims, grid.bounds, occ)


def write_vgrd(path, grid: VolumeGrid) -> None:
    nx, ny, nz = grid.dims
    lo, hi = grid.bounds
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<IIII", VERSION, nx, ny, nz))
        f.write(struct.pack("<6f", *lo, *hi))
        f.write(np.asarray(grid.values, "<f4").flatten(order="F").tobytes())


def read_vgrd(path) -> VolumeGrid:
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != MAGIC:
            raise ValueError("bad magic in %s" % path)
        version, nx, ny, nz = struct.unpack("<IIII", f.read(16))
        if version != VERSION:
            raise ValueError("unsupported VGRD version %d" % version)
        lo_hi = struct.unpack("<6f", f.read(24))
        raw = f.read(4 * nx * ny * nz)
        if len(raw) != 4 * nx * ny * nz:
            raise ValueError("truncated VGRD payload in %s" % path)
    vals = np.frombuffer(raw, "<f4").astype(np.float64)
    vals = vals.reshape((nx, ny, nz), order="F")
    return VolumeGrid((nx, ny, nz), (tuple(lo_hi[:3]), tuple(lo_hi[3:])), vals)


def write_matrix_vgrd(path, mat: np.ndarray) -> None:
    """Store a 2D matrix in the VGRD container with nz=1 (rows -> y, cols -> x).

    The nz=1 planar form is a container convention only; in-memory VolumeGrid
    used for filtration keeps the >=2 per-axis requirement.
    """
    mat = np.asarray(mat, float)
    rows, cols = mat.shape
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<IIII", VERSION, cols, rows, 1))
        f.write(struct.pack("<6f", 0.0, 0.0, 0.0, float(cols), float(rows), 1.0))
        f.write(np.asarray(mat.T, "<f4").flatten(order="F").tobytes())


def read_matrix_vgrd(path) -> np.ndarray:
    with open(path, "rb") as f:
        if f.read(4) != MAGIC:
            raise ValueError("bad magic in %s" % path)
        version, nx, ny, nz = struct.unpack("<IIII", f.read(16))
        if version != VERSION or nz != 1:
            raise ValueError("not a planar matrix container: %s" % path)
        f.read(24)
        raw = f.read(4 * nx * ny)
    vals = np.frombuffer(raw, "<f4").astype(np.float64)
    return vals.reshape((nx, ny), order="F").T.copy()
