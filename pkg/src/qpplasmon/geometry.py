"""Smooth closed inclusion boundaries in the unit cell and their quadrature grids."""

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import GeometryError

CLEARANCE = 0.05


@dataclass(frozen=True, eq=False)
class BoundaryCurve:
    """A closed curve sampled at N equispaced parameter values.

    The parametrization runs counter-clockwise, so the outward normal is
    the tangent rotated clockwise.

    Attributes
    ----------
    param : ndarray, shape (N,)
        Parameter values t_j = 2 pi j / N.
    nodes : ndarray, shape (N, 2)
    d1, d2 : ndarray, shape (N, 2)
        First and second derivatives of the parametrization.
    tangents, normals : ndarray, shape (N, 2)
        Unit tangent and outward unit normal.
    speeds : ndarray, shape (N,)
        |dx/dt|.
    weights : ndarray, shape (N,)
        Trapezoid weights speeds * 2 pi / N.
    center : ndarray, shape (2,)
    radial : callable
        r(theta) for star-shaped curves about ``center``.
    kind : str
    """

    param: np.ndarray
    nodes: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    tangents: np.ndarray
    normals: np.ndarray
    speeds: np.ndarray
    weights: np.ndarray
    center: np.ndarray
    radial: Callable
    kind: str

    @property
    def n(self):
        return self.nodes.shape[0]

    @property
    def curvature(self):
        cross = self.d1[:, 0] * self.d2[:, 1] - self.d1[:, 1] * self.d2[:, 0]
        return cross / self.speeds ** 3

    @property
    def node_spacing(self):
        return float(np.max(self.weights))

    def perimeter(self):
        return float(np.sum(self.weights))

    def area(self):
        """Enclosed area from the divergence theorem, 1/2 * integral of x . normal."""
        return 0.5 * float(np.sum(np.sum(self.nodes * self.normals, axis=1) * self.weights))

    def contains(self, points):
        """Inside test for points, using the star-shaped polar description."""
        p = np.asarray(points, dtype=float)
        rel = p - self.center
        theta = np.arctan2(rel[..., 1], rel[..., 0])
        return np.hypot(rel[..., 0], rel[..., 1]) < self.radial(theta)

    def distance(self, points, periodic=True):
        """Distance from points to the curve, optionally modulo the lattice.

        The curve is resampled on a 16x finer trapezoid grid and the
        nearest sample refined by a few Newton steps in the parameter.
        """
        p = np.atleast_2d(np.asarray(points, dtype=float))
        if periodic:
            p = self.center + (p - self.center) - np.round(p - self.center)
        fine = np.linspace(0.0, 2 * np.pi, 16 * self.n, endpoint=False)
        xs, d1s, d2s = self._eval_param(fine)
        dist = np.empty(p.shape[0])
        for s in range(0, p.shape[0], 2048):
            chunk = p[s:s + 2048]
            diff = chunk[:, None, :] - xs[None, :, :]
            j = np.argmin(np.einsum("ijk,ijk->ij", diff, diff), axis=1)
            t = fine[j]
            for _ in range(4):
                x, d1, d2 = self._eval_param(t)
                rel = x - chunk
                f1 = np.sum(rel * d1, axis=1)
                f2 = np.sum(d1 * d1, axis=1) + np.sum(rel * d2, axis=1)
                t = t - f1 / np.where(np.abs(f2) > 1e-14, f2, 1e-14)
            x, _, _ = self._eval_param(t)
            dist[s:s + 2048] = np.hypot(*(x - chunk).T)
        return dist

    def _eval_param(self, t):
        return self._param_fn(t)

    def resample(self, n):
        """Same curve with a different node count."""
        return _build(self._param_fn, n, self.center, self.radial, self.kind)


def _build(param_fn, n, center, radial, kind):
    if n % 2 or n < 16:
        raise GeometryError(f"node count must be even and >= 16, got {n}")
    t = 2 * np.pi * np.arange(n) / n
    x, d1, d2 = param_fn(t)
    speeds = np.hypot(d1[:, 0], d1[:, 1])
    tangents = d1 / speeds[:, None]
    normals = np.stack([tangents[:, 1], -tangents[:, 0]], axis=1)
    curve = BoundaryCurve(
        param=t, nodes=x, d1=d1, d2=d2, tangents=tangents, normals=normals,
        speeds=speeds, weights=speeds * 2 * np.pi / n, center=np.asarray(center, dtype=float),
        radial=radial, kind=kind)
    object.__setattr__(curve, "_param_fn", param_fn)
    _check_clearance(curve)
    return curve


def _check_clearance(curve):
    fine = np.linspace(0, 2 * np.pi, 8 * curve.n, endpoint=False)
    x, _, _ = curve._param_fn(fine)
    lo = float(np.min(x))
    hi = float(np.max(x))
    if lo < CLEARANCE - 1e-12 or hi > 1.0 - CLEARANCE + 1e-12:
        raise GeometryError(
            f"curve leaves the unit cell with clearance {CLEARANCE}: coordinates span [{lo:.4f}, {hi:.4f}]")


def _star_param(center, base_radius, amplitude, lobes, semi=(1.0, 1.0)):
    c = np.asarray(center, dtype=float)
    a, b = semi

    def fn(t):
        rho = base_radius * (1.0 + amplitude * np.cos(lobes * t))
        drho = -base_radius * amplitude * lobes * np.sin(lobes * t)
        ddrho = -base_radius * amplitude * lobes ** 2 * np.cos(lobes * t)
        ct, st = np.cos(t), np.sin(t)
        x = np.stack([c[0] + a * rho * ct, c[1] + b * rho * st], axis=1)
        d1 = np.stack([a * (drho * ct - rho * st), b * (drho * st + rho * ct)], axis=1)
        d2 = np.stack([a * (ddrho * ct - 2 * drho * st - rho * ct),
                       b * (ddrho * st + 2 * drho * ct - rho * st)], axis=1)
        return x, d1, d2

    return fn


def make_circle(center, radius, N):
    """Circle of the given radius sampled at N equispaced angles.

    Raises
    ------
    GeometryError
        If the circle comes within 0.05 of the cell boundary or N is odd or < 16.
    """
    if not radius > 0:
        raise GeometryError("radius must be positive")
    fn = _star_param(center, radius, 0.0, 0)
    return _build(fn, int(N), center, lambda th: np.full(np.shape(th), float(radius)), "circle")


def make_ellipse(center, semi_axes, N):
    """Ellipse (a cos t, b sin t) about ``center``."""
    a, b = (float(s) for s in semi_axes)
    if not (a > 0 and b > 0):
        raise GeometryError("semi-axes must be positive")
    fn = _star_param(center, 1.0, 0.0, 0, semi=(a, b))

    def radial(th):
        return a * b / np.sqrt((b * np.cos(th)) ** 2 + (a * np.sin(th)) ** 2)

    return _build(fn, int(N), center, radial, "ellipse")


def make_star(center, base_radius, amplitude, lobes, N):
    """Star r(t) = base_radius (1 + amplitude cos(lobes t)).

    ``amplitude`` is relative to ``base_radius`` and must stay below 1/2 so
    the curve is simple.
    """
    if not base_radius > 0:
        raise GeometryError("base radius must be positive")
    if not 0 <= amplitude < 0.5:
        raise GeometryError(f"star amplitude {amplitude} risks self-intersection (need < 0.5)")
    lobes = int(lobes)
    fn = _star_param(center, base_radius, amplitude, lobes)

    def radial(th):
        return base_radius * (1.0 + amplitude * np.cos(lobes * th))

    return _build(fn, int(N), center, radial, "star")


def make_curve(geom):
    """Build a curve from a geometry block (dict) as used by the CLI."""
    kind = geom.get("kind")
    center = geom.get("center", (0.5, 0.5))
    n = int(geom.get("N", 128))
    if kind == "circle":
        return make_circle(center, float(geom["radius"]), n)
    if kind == "ellipse":
        return make_ellipse(center, geom["semi_axes"], n)
    if kind == "star":
        return make_star(center, float(geom["base_radius"]), float(geom["amplitude"]),
                         int(geom["lobes"]), n)
    raise GeometryError(f"unknown geometry kind {kind!r}")


def winding_number(curve, point):
    """Winding number of the sampled curve about ``point``."""
    rel = curve.nodes - np.asarray(point, dtype=float)
    ang = np.arctan2(rel[:, 1], rel[:, 0])
    step = np.diff(np.concatenate([ang, ang[:1]]))
    step = (step + np.pi) % (2 * np.pi) - np.pi
    return int(np.rint(step.sum() / (2 * np.pi)))


@dataclass(frozen=True)
class InteriorGrid:
    """Uniform grid points strictly inside a curve.

    Attributes
    ----------
    points : ndarray, shape (P, 2)
    cell_area : float
        spacing^2.
    """

    points: np.ndarray
    cell_area: float

    @property
    def total_area(self):
        return self.cell_area * self.points.shape[0]


def inradius(curve):
    """Distance from the center to the nearest boundary node (star-shaped curves)."""
    return float(np.min(np.hypot(*(curve.nodes - curve.center).T)))


def interior_grid(curve, spacing):
    """Cell-centred square grid clipped to the inside of ``curve``.

    Raises
    ------
    GeometryError
        If the spacing exceeds a quarter of the inradius or no point survives.
    """
    spacing = float(spacing)
    if not 0 < spacing <= inradius(curve) / 4 + 1e-15:
        raise GeometryError(f"spacing {spacing} must be positive and at most inradius/4")
    lo = np.min(curve.nodes, axis=0) - spacing
    hi = np.max(curve.nodes, axis=0) + spacing
    # align cell centres with the curve centre so the grid is symmetric
    c = curve.center
    i0 = np.floor((lo - c) / spacing)
    i1 = np.ceil((hi - c) / spacing)
    xs = c[0] + (np.arange(i0[0], i1[0] + 1) + 0.5) * spacing
    ys = c[1] + (np.arange(i0[1], i1[1] + 1) + 0.5) * spacing
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    pts = np.stack([X.ravel(), Y.ravel()], axis=1)
    pts = pts[curve.contains(pts)]
    if pts.shape[0] == 0:
        raise GeometryError("interior grid is empty")
    return InteriorGrid(points=pts, cell_area=spacing * spacing)
