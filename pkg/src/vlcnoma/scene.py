"""Room geometry, surface discretization and Lambertian photometry.

Coordinates: origin at a floor corner, x along the room length, y along the
width, z up. All lengths are in metres.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

from .exceptions import DomainError

SURFACES = ("floor", "ceiling", "wall_x0", "wall_x1", "wall_y0", "wall_y1")

_UNIT_TOL = 1e-12


def as_vec3(v) -> np.ndarray:
    arr = np.asarray(v, dtype=float).reshape(-1)
    if arr.shape != (3,):
        raise DomainError(f"expected a 3-vector, got shape {np.shape(v)}")
    return arr


def unit(v) -> np.ndarray:
    arr = as_vec3(v)
    n = np.linalg.norm(arr)
    if n == 0:
        raise DomainError("cannot normalise the zero vector")
    return arr / n


def lambertian_order_from_semiangle(half_power_semiangle: float) -> float:
    """Lambertian order ``m = -ln 2 / ln cos(semiangle)`` for a semiangle in degrees."""
    if not 0.0 < half_power_semiangle < 90.0:
        raise DomainError(f"half-power semiangle must be in (0, 90) degrees, got {half_power_semiangle}")
    return -math.log(2.0) / math.log(math.cos(math.radians(half_power_semiangle)))


def lambertian_intensity(m, phi):
    """Normalised radiant intensity ``(m+1)/(2 pi) cos^m(phi)`` in 1/sr.

    Zero for emission angles beyond pi/2. Integrates to one over the
    forward hemisphere.
    """
    m = np.asarray(m, dtype=float)
    if np.any(m <= 0):
        raise DomainError("Lambertian order must be positive")
    phi = np.asarray(phi, dtype=float)
    c = np.cos(phi)
    out = np.where(phi <= np.pi / 2, (m + 1.0) / (2.0 * np.pi) * np.power(np.clip(c, 0.0, None), m), 0.0)
    return out if out.ndim else float(out)


def orientation_from_angles(elevation: float, azimuth: float) -> np.ndarray:
    """Unit vector for an elevation above the horizontal and an azimuth from +x (degrees)."""
    if not -90.0 <= elevation <= 90.0:
        raise DomainError(f"elevation must be within [-90, 90], got {elevation}")
    if not 0.0 <= azimuth < 360.0:
        raise DomainError(f"azimuth must be within [0, 360), got {azimuth}")
    el = math.radians(elevation)
    az = math.radians(azimuth)
    return np.array([math.cos(el) * math.cos(az), math.cos(el) * math.sin(az), math.sin(el)])


def angles_from_orientation(v) -> tuple[float, float]:
    """Inverse of :func:`orientation_from_angles`; returns (elevation, azimuth) in degrees."""
    x, y, z = unit(v)
    el = math.degrees(math.atan2(z, math.hypot(x, y)))
    az = math.degrees(math.atan2(y, x)) % 360.0
    return el, az


@dataclass(frozen=True)
class Room:
    length: float = 8.0
    width: float = 4.0
    height: float = 3.0
    wall_reflectivity: float = 0.8
    ceiling_reflectivity: float = 0.8
    floor_reflectivity: float = 0.3

    def __post_init__(self):
        for name in ("length", "width", "height"):
            if not getattr(self, name) > 0:
                raise DomainError(f"room {name} must be positive, got {getattr(self, name)}")
        for name in ("wall_reflectivity", "ceiling_reflectivity", "floor_reflectivity"):
            r = getattr(self, name)
            if not 0.0 <= r <= 1.0:
                raise DomainError(f"room {name} must be within [0, 1], got {r}")

    @property
    def centroid(self) -> np.ndarray:
        return np.array([self.length / 2, self.width / 2, self.height / 2])

    def contains(self, point, tol: float = 1e-9) -> bool:
        p = as_vec3(point)
        upper = np.array([self.length, self.width, self.height])
        return bool(np.all(p >= -tol) and np.all(p <= upper + tol))

    def surface_area(self, surface: str) -> float:
        L, W, H = self.length, self.width, self.height
        return {"floor": L * W, "ceiling": L * W,
                "wall_x0": W * H, "wall_x1": W * H,
                "wall_y0": L * H, "wall_y1": L * H}[surface]

    def reflectivity(self, surface: str) -> float:
        if surface == "floor":
            return self.floor_reflectivity
        if surface == "ceiling":
            return self.ceiling_reflectivity
        return self.wall_reflectivity


@dataclass(frozen=True)
class SurfaceElement:
    center: np.ndarray
    normal: np.ndarray
    area: float
    reflectivity: float
    lambertian_order: float = 1.0
    surface: str = ""


class ElementArray(Sequence):
    """Struct-of-arrays store for surface elements.

    Indexing yields :class:`SurfaceElement` views so the collection can be
    used anywhere a list of elements is expected, while the tracer works on
    the packed arrays directly.
    """

    def __init__(self, centers, normals, areas, reflectivity, lambertian_order, surface_index, surface_names=SURFACES):
        self.centers = np.ascontiguousarray(centers, dtype=float).reshape(-1, 3)
        self.normals = np.ascontiguousarray(normals, dtype=float).reshape(-1, 3)
        n = len(self.centers)
        self.areas = np.broadcast_to(np.asarray(areas, dtype=float), (n,)).copy()
        self.reflectivity = np.broadcast_to(np.asarray(reflectivity, dtype=float), (n,)).copy()
        self.lambertian_order = np.broadcast_to(np.asarray(lambertian_order, dtype=float), (n,)).copy()
        self.surface_index = np.broadcast_to(np.asarray(surface_index, dtype=np.int64), (n,)).copy()
        self.surface_names = tuple(surface_names)
        for arr in (self.centers, self.normals, self.areas, self.reflectivity, self.lambertian_order, self.surface_index):
            arr.flags.writeable = False

    @classmethod
    def from_elements(cls, elements: Iterable[SurfaceElement]) -> "ElementArray":
        elements = list(elements)
        if not elements:
            return cls(np.empty((0, 3)), np.empty((0, 3)), [], [], [], [], ())
        names: list[str] = []
        idx = []
        for e in elements:
            if e.surface not in names:
                names.append(e.surface)
            idx.append(names.index(e.surface))
        return cls([e.center for e in elements], [e.normal for e in elements],
                   [e.area for e in elements], [e.reflectivity for e in elements],
                   [e.lambertian_order for e in elements], idx, names)

    def __len__(self) -> int:
        return len(self.centers)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self[j] for j in range(*i.indices(len(self)))]
        return SurfaceElement(self.centers[i].copy(), self.normals[i].copy(), float(self.areas[i]),
                              float(self.reflectivity[i]), float(self.lambertian_order[i]),
                              self.surface_names[self.surface_index[i]] if self.surface_names else "")

    def __iter__(self) -> Iterator[SurfaceElement]:
        for i in range(len(self)):
            yield self[i]

    def on_surface(self, surface: str) -> np.ndarray:
        """Boolean mask of the elements belonging to ``surface``."""
        if surface not in self.surface_names:
            return np.zeros(len(self), dtype=bool)
        return self.surface_index == self.surface_names.index(surface)


def tile_edges(extent: float, size: float) -> np.ndarray:
    ratio = extent / size
    n = int(round(ratio))
    if n < 1 or abs(ratio - n) > 1e-9 * max(1.0, ratio):
        n = max(1, math.ceil(ratio))
    edges = np.arange(n + 1, dtype=float) * size
    edges[-1] = extent
    # degenerate clip: ceil() may leave a sliver edge <= previous edge
    return edges if np.all(np.diff(edges) > 0) else np.linspace(0.0, extent, n + 1)


def _resolve_surfaces(surfaces) -> tuple[str, ...]:
    if surfaces is None or surfaces == "all":
        return SURFACES
    if surfaces == "walls+ceiling":
        return tuple(s for s in SURFACES if s != "floor")
    if isinstance(surfaces, str):
        surfaces = (surfaces,)
    out = tuple(surfaces)
    for s in out:
        if s not in SURFACES:
            raise DomainError(f"unknown surface {s!r}; expected one of {SURFACES}")
    return out


def discretize(room: Room, element_size: float, surfaces="all", lambertian_order: float = 1.0) -> ElementArray:
    """Tile the selected room surfaces with square elements of side ``element_size``.

    When the size does not divide a surface dimension the last row/column is
    clipped, so element areas always sum to the surface area. ``surfaces`` is
    ``"all"``, ``"walls+ceiling"`` or an iterable of names from
    :data:`SURFACES`.
    """
    if not element_size > 0:
        raise DomainError(f"element size must be positive, got {element_size}")
    L, W, H = room.length, room.width, room.height
    # (u-axis, v-axis, fixed axis, fixed value, inward normal)
    layout = {
        "floor": (0, 1, 2, 0.0, (0, 0, 1)),
        "ceiling": (0, 1, 2, H, (0, 0, -1)),
        "wall_x0": (1, 2, 0, 0.0, (1, 0, 0)),
        "wall_x1": (1, 2, 0, L, (-1, 0, 0)),
        "wall_y0": (0, 2, 1, 0.0, (0, 1, 0)),
        "wall_y1": (0, 2, 1, W, (0, -1, 0)),
    }
    extent = (L, W, H)
    centers, normals, areas, rho, sidx = [], [], [], [], []
    for surface in _resolve_surfaces(surfaces):
        ua, va, fa, fv, nrm = layout[surface]
        eu = tile_edges(extent[ua], element_size)
        ev = tile_edges(extent[va], element_size)
        cu = 0.5 * (eu[:-1] + eu[1:])
        cv = 0.5 * (ev[:-1] + ev[1:])
        du = np.diff(eu)
        dv = np.diff(ev)
        gu, gv = np.meshgrid(cu, cv, indexing="ij")
        c = np.empty((gu.size, 3))
        c[:, ua] = gu.ravel()
        c[:, va] = gv.ravel()
        c[:, fa] = fv
        centers.append(c)
        normals.append(np.tile(np.asarray(nrm, dtype=float), (gu.size, 1)))
        areas.append(np.outer(du, dv).ravel())
        rho.append(np.full(gu.size, room.reflectivity(surface)))
        sidx.append(np.full(gu.size, SURFACES.index(surface)))
    if not centers:
        return ElementArray(np.empty((0, 3)), np.empty((0, 3)), [], [], [], [], SURFACES)
    return ElementArray(np.concatenate(centers), np.concatenate(normals), np.concatenate(areas),
                        np.concatenate(rho), lambertian_order, np.concatenate(sidx), SURFACES)


@dataclass(frozen=True)
class AccessPoint:
    position: np.ndarray
    orientation: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, -1.0]))
    lambertian_order: float = 1.0
    transmit_power: float = 1.9
    efficiency: float = 1.0
    id: str = "AP"

    def __post_init__(self):
        object.__setattr__(self, "position", as_vec3(self.position))
        o = as_vec3(self.orientation)
        if abs(np.linalg.norm(o) - 1.0) > _UNIT_TOL:
            o = unit(o)
        object.__setattr__(self, "orientation", o)
        if not self.transmit_power > 0:
            raise DomainError(f"transmit power must be positive, got {self.transmit_power}")
        if not self.lambertian_order > 0:
            raise DomainError(f"Lambertian order must be positive, got {self.lambertian_order}")
        if not 0.0 < self.efficiency <= 1.0:
            raise DomainError(f"efficiency must be within (0, 1], got {self.efficiency}")


class Scene:
    """A room discretized for first- and second-order tracing.

    The element-pair kernel used for second-order reflections is built on
    first use and cached; it depends only on the room, never on access point
    or receiver placement.
    """

    def __init__(self, room: Room, first_order_size: float = 0.05, second_order_size: float = 0.20,
                 include_floor: bool = True, element_order: float = 1.0):
        self.room = room
        self.first_order_size = first_order_size
        self.second_order_size = second_order_size
        self.include_floor = include_floor
        self.element_order = element_order
        surfaces = "all" if include_floor else "walls+ceiling"
        self.first_order_elements = discretize(room, first_order_size, surfaces, element_order)
        self.second_order_elements = discretize(room, second_order_size, surfaces, element_order)
        self._kernel = None
        self._kernel_lock = threading.Lock()

    @property
    def pair_kernel(self):
        with self._kernel_lock:
            if self._kernel is None:
                from .raytrace import PairKernel
                self._kernel = PairKernel(self.second_order_elements)
        return self._kernel
