"""Tensor meshes for 2D resistivity modelling.

Coordinate conventions used throughout the package:

* x runs along the survey line, z is depth (positive downward), the ground
  surface is the top edge of the mesh at z = 0.
* ``hz`` is ordered top to bottom, so cell row 0 is the shallowest.
* Model vectors are flattened row-major with rows = depth slices:
  ``flat = iz * nx + ix``.  :class:`GridIndexMap` is the single owner of
  that rule; every consumer (network output, difference operators, file
  I/O) goes through it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class TensorMesh2D:
    """Rectilinear mesh defined by per-axis cell-width lists.

    ``origin_x`` is the x coordinate of the left mesh edge (padding
    included); ``surface_z`` is the depth of the top edge, always 0 for a
    surface survey.
    """

    hx: np.ndarray
    hz: np.ndarray
    origin_x: float
    surface_z: float = 0.0

    def __post_init__(self):
        hx = np.asarray(self.hx, dtype=float)
        hz = np.asarray(self.hz, dtype=float)
        if hx.ndim != 1 or hz.ndim != 1 or hx.size == 0 or hz.size == 0:
            raise ValueError("hx and hz must be non-empty 1D width lists")
        if np.any(hx <= 0) or np.any(hz <= 0):
            raise ValueError("all cell widths must be strictly positive")
        object.__setattr__(self, "hx", hx)
        object.__setattr__(self, "hz", hz)
        hx.setflags(write=False)
        hz.setflags(write=False)

    @property
    def nx(self) -> int:
        return self.hx.size

    @property
    def nz(self) -> int:
        return self.hz.size

    @property
    def n_cells(self) -> int:
        return self.nx * self.nz

    @property
    def x_edges(self) -> np.ndarray:
        return self.origin_x + np.concatenate(([0.0], np.cumsum(self.hx)))

    @property
    def z_edges(self) -> np.ndarray:
        """Depths of horizontal edges, increasing downward from the surface."""
        return self.surface_z + np.concatenate(([0.0], np.cumsum(self.hz)))

    @property
    def shape(self) -> tuple[int, int]:
        """(nz, nx), the grid shape used for images of the model."""
        return (self.nz, self.nx)


@dataclass(frozen=True)
class GridIndexMap:
    """Bijection between (ix, iz) grid coordinates and flat model indices.

    Flattening is row-major over depth slices: row 0 is the shallowest,
    ``flat = iz * nx + ix``.
    """

    nx: int
    nz: int
    ordering: str = "row-major-shallow-first"

    def __post_init__(self):
        if self.nx < 1 or self.nz < 1:
            raise ValueError("grid dimensions must be >= 1")

    @property
    def n_cells(self) -> int:
        return self.nx * self.nz

    def flatten(self, ix: int, iz: int) -> int:
        if not (0 <= ix < self.nx and 0 <= iz < self.nz):
            raise ValueError(f"grid index ({ix}, {iz}) outside {self.nx}x{self.nz}")
        return iz * self.nx + ix

    def unflatten(self, k: int) -> tuple[int, int]:
        if not (0 <= k < self.n_cells):
            raise ValueError(f"flat index {k} outside [0, {self.n_cells})")
        return (k % self.nx, k // self.nx)

    def to_grid(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values)
        if values.size != self.n_cells:
            raise ValueError(f"expected {self.n_cells} values, got {values.size}")
        return values.reshape(self.nz, self.nx)

    def to_vector(self, grid: np.ndarray) -> np.ndarray:
        grid = np.asarray(grid)
        if grid.shape != (self.nz, self.nx):
            raise ValueError(f"expected shape {(self.nz, self.nx)}, got {grid.shape}")
        return grid.reshape(-1)


def build_mesh(n_core_x: int, n_core_z: int, dx: float, dz: float,
               n_pad: int, factor: float, origin_x: float | None = None) -> TensorMesh2D:
    """Core + geometrically expanding padding mesh.

    Padding is added on both lateral sides and at the bottom (none at the
    surface); the k-th padding cell is ``core_width * factor**k``.  By
    default the core region is centered on x = 0 so a survey line centered
    on the origin sits over the core.
    """
    if n_core_x < 1 or n_core_z < 1:
        raise ValueError("core cell counts must be >= 1")
    if n_pad < 0:
        raise ValueError("padding cell count must be >= 0")
    if dx <= 0 or dz <= 0:
        raise ValueError("cell sizes must be positive")
    if factor < 1.0:
        raise ValueError("padding expansion factor must be >= 1")

    pad_x = dx * factor ** np.arange(1, n_pad + 1)
    pad_z = dz * factor ** np.arange(1, n_pad + 1)
    hx = np.concatenate([pad_x[::-1], np.full(n_core_x, float(dx)), pad_x])
    hz = np.concatenate([np.full(n_core_z, float(dz)), pad_z])
    if origin_x is None:
        origin_x = -0.5 * n_core_x * dx - pad_x.sum()
    return TensorMesh2D(hx=hx, hz=hz, origin_x=float(origin_x))


def cell_centers(mesh: TensorMesh2D) -> tuple[np.ndarray, np.ndarray]:
    """Per-axis cell center coordinates (x positions, z depths)."""
    xc = mesh.x_edges[:-1] + 0.5 * mesh.hx
    zc = mesh.z_edges[:-1] + 0.5 * mesh.hz
    return xc, zc
