"""Synthetic scenario builders, noise injection, and scale presets.

Two scales are provided: ``full`` (200 x 25 core cells, 700 m line, the
configuration all headline runs use) and ``desk`` (50 x 12 core cells,
200 m line) for fast end-to-end checks.  Target geometry numbers are
documented estimates chosen to produce the intended structures, not
measured values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .mesh import GridIndexMap, TensorMesh2D, build_mesh, cell_centers
from .survey import Survey, build_dipole_dipole_survey


@dataclass(frozen=True)
class DikeGeometry:
    """Dipping planar conductor: a band of the given width around an axis
    that crosses (x_top, depth_top) and descends at ``dip_degrees`` from
    horizontal (90 = vertical)."""

    x_top: float
    depth_top: float
    depth_bottom: float
    width: float
    dip_degrees: float

    def __post_init__(self):
        if not 0.0 < self.dip_degrees <= 90.0:
            raise ValueError("dip must lie in (0, 90] degrees")
        if self.depth_bottom <= self.depth_top:
            raise ValueError("dike bottom must be below its top")
        if self.width <= 0:
            raise ValueError("dike width must be positive")


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    n_core_x: int = 200
    n_core_z: int = 25
    dx: float = 5.0
    dz: float = 5.0
    n_pad: int = 7
    pad_factor: float = 1.5
    line_length: float = 700.0
    station_spacing: float = 25.0
    max_receivers: int = 24
    background_sigma: float = 0.01
    layer_sigma: float = 0.02
    target_sigma: float = 0.1
    layer_thickness: float = 0.0  # 0 disables the near-surface layer
    dike: DikeGeometry | None = None
    cylinders: tuple[tuple[float, float, float], ...] = ()  # (x, depth, radius)
    noise_rel: float = 0.05
    noise_seed: int = 0

    def mesh(self) -> TensorMesh2D:
        return build_mesh(self.n_core_x, self.n_core_z, self.dx, self.dz,
                          self.n_pad, self.pad_factor)

    def survey(self) -> Survey:
        return build_dipole_dipole_survey(self.line_length, self.station_spacing,
                                          self.max_receivers,
                                          x0=-0.5 * self.line_length)

    def index_map(self) -> GridIndexMap:
        mesh = self.mesh()
        return GridIndexMap(nx=mesh.nx, nz=mesh.nz)

    def core_bounds(self):
        """(x_min, x_max, depth_max) of the core region."""
        half = 0.5 * self.n_core_x * self.dx
        return -half, half, self.n_core_z * self.dz

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in (
            "name", "n_core_x", "n_core_z", "dx", "dz", "n_pad", "pad_factor",
            "line_length", "station_spacing", "max_receivers",
            "background_sigma", "layer_sigma", "target_sigma",
            "layer_thickness", "noise_rel", "noise_seed")}
        d["dike"] = None if self.dike is None else [
            self.dike.x_top, self.dike.depth_top, self.dike.depth_bottom,
            self.dike.width, self.dike.dip_degrees]
        d["cylinders"] = [list(c) for c in self.cylinders]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioSpec":
        d = dict(d)
        dike = d.pop("dike", None)
        cyl = d.pop("cylinders", [])
        return cls(dike=None if dike is None else DikeGeometry(*dike),
                   cylinders=tuple(tuple(c) for c in cyl), **d)


def _validate_geometry(spec: ScenarioSpec) -> None:
    x_min, x_max, depth_max = spec.core_bounds()
    if spec.layer_thickness > depth_max:
        raise ValueError("near-surface layer extends below the core mesh")
    if spec.dike is not None:
        dk = spec.dike
        theta = math.radians(dk.dip_degrees)
        run = (dk.depth_bottom - dk.depth_top) / math.tan(theta)
        for x in (dk.x_top, dk.x_top + run):
            if not (x_min + dk.width / 2 <= x <= x_max - dk.width / 2):
                raise ValueError("dike extends outside the core mesh")
        if dk.depth_bottom > depth_max:
            raise ValueError("dike extends below the core mesh")
    for cx, cz, r in spec.cylinders:
        if not (x_min + r <= cx <= x_max - r) or cz - r < 0 or cz + r > depth_max:
            raise ValueError("cylinder extends outside the core mesh")


def paint_model(spec: ScenarioSpec) -> np.ndarray:
    """Log-conductivity on the full mesh, painted by cell-center membership."""
    _validate_geometry(spec)
    mesh = spec.mesh()
    xc, zc = cell_centers(mesh)
    x = np.broadcast_to(xc[None, :], mesh.shape)
    z = np.broadcast_to(zc[:, None], mesh.shape)

    # Cell centers landing exactly on a region boundary must paint
    # consistently; the tolerance absorbs float noise in sin/cos.
    tol = 1e-9
    model = np.full(mesh.shape, np.log(spec.background_sigma))
    if spec.layer_thickness > 0:
        model[z < spec.layer_thickness] = np.log(spec.layer_sigma)
    if spec.dike is not None:
        dk = spec.dike
        theta = math.radians(dk.dip_degrees)
        # perpendicular distance to the dike axis
        dist = np.abs((x - dk.x_top) * math.sin(theta)
                      - (z - dk.depth_top) * math.cos(theta))
        inside = ((dist <= dk.width / 2 + tol)
                  & (z >= dk.depth_top - tol) & (z <= dk.depth_bottom + tol))
        model[inside] = np.log(spec.target_sigma)
    for cx, cz_, r in spec.cylinders:
        inside = (x - cx) ** 2 + (z - cz_) ** 2 <= r * r + tol
        model[inside] = np.log(spec.target_sigma)
    return model.reshape(-1)


_DESK = dict(n_core_x=50, n_core_z=12, line_length=200.0)


def build_case1(dip_degrees: float = 45.0, scale: str = "full"):
    """Conductive dike under a less conductive near-surface layer.

    Background 0.01 S/m, layer 0.02 S/m, dike 0.1 S/m.  Returns
    (ScenarioSpec, log-conductivity model).
    """
    if scale == "full":
        spec = ScenarioSpec(
            name=f"case1-dip{dip_degrees:g}",
            layer_thickness=20.0,
            dike=DikeGeometry(x_top=0.0, depth_top=20.0, depth_bottom=120.0,
                              width=25.0, dip_degrees=dip_degrees))
    elif scale == "desk":
        spec = ScenarioSpec(
            name=f"case1-desk-dip{dip_degrees:g}", **_DESK,
            layer_thickness=15.0,
            dike=DikeGeometry(x_top=0.0, depth_top=15.0, depth_bottom=50.0,
                              width=20.0, dip_degrees=dip_degrees))
    else:
        raise ValueError(f"unknown scale {scale!r}")
    return spec, paint_model(spec)


def build_case2(two_cylinders: bool = False, scale: str = "full"):
    """Compact targets in close proximity, all at 0.1 S/m over 0.01 S/m.

    Variant A (default): a cylinder next to a dipping dike.  Variant B
    (``two_cylinders``): two disjoint cylinders.
    """
    if scale == "full":
        if two_cylinders:
            spec = ScenarioSpec(name="case2.2",
                                cylinders=((-60.0, 60.0, 25.0), (60.0, 60.0, 25.0)))
        else:
            spec = ScenarioSpec(
                name="case2.1",
                cylinders=((-75.0, 60.0, 25.0),),
                dike=DikeGeometry(x_top=50.0, depth_top=20.0, depth_bottom=120.0,
                                  width=25.0, dip_degrees=45.0))
    elif scale == "desk":
        if two_cylinders:
            spec = ScenarioSpec(name="case2.2-desk", **_DESK,
                                cylinders=((-45.0, 28.0, 12.0), (45.0, 28.0, 12.0)))
        else:
            spec = ScenarioSpec(
                name="case2.1-desk", **_DESK,
                cylinders=((-45.0, 30.0, 12.0),),
                dike=DikeGeometry(x_top=25.0, depth_top=10.0, depth_bottom=50.0,
                                  width=15.0, dip_degrees=45.0))
    else:
        raise ValueError(f"unknown scale {scale!r}")
    return spec, paint_model(spec)


def add_noise(d: np.ndarray, rel: float, seed: int):
    """Gaussian noise with per-datum std = rel * |d|; returns (noisy, std)."""
    if rel < 0:
        raise ValueError("relative noise must be >= 0")
    d = np.asarray(d, dtype=float)
    std = rel * np.abs(d)
    if rel == 0:
        return d.copy(), std
    rng = np.random.default_rng(seed)
    return d + std * rng.standard_normal(d.size), std
