"""Model geometries, coordinate charts and chart-adapted magnetic gauges.

Every chart is orthogonal, so the Riemannian data reduce to two diagonal
metric factors ``g11, g22`` and the volume density ``sqrt(g11 * g22)``.
The gauge potential ``A`` of each chart satisfies ``dA = theta * vol``.

Charts and their coordinates ``(q1, q2)``:

==================  ==========  =====================================
chart               coords      hyperbolic metric
==================  ==========  =====================================
CARTESIAN           (x, y)      (Euclidean only) dx^2 + dy^2
UPPER_HALF_PLANE    (x, y)      (dx^2 + dy^2) / y^2
GEODESIC_POLAR      (s, phi)    ds^2 + sinh(s)^2 dphi^2
FERMI               (s, t)      ds^2 + cosh(s)^2 dt^2
==================  ==========  =====================================

In the Fermi chart ``s`` is the signed distance to the reference geodesic
``s = 0`` and ``t`` the arclength along it.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np


class DomainError(ValueError):
    """A point or region lies outside the validity region of its chart."""


class GeometryKind(enum.Enum):
    EUCLIDEAN = "euclidean"
    HYPERBOLIC = "hyperbolic"

    @property
    def scalar_curvature(self) -> float:
        return 0.0 if self is GeometryKind.EUCLIDEAN else -2.0

    @classmethod
    def parse(cls, value) -> "GeometryKind":
        if isinstance(value, cls):
            return value
        return cls(str(value).strip().lower())


class Chart(enum.Enum):
    CARTESIAN = "cartesian"
    UPPER_HALF_PLANE = "upper_half_plane"
    GEODESIC_POLAR = "geodesic_polar"
    FERMI = "fermi"

    @classmethod
    def parse(cls, value) -> "Chart":
        if isinstance(value, cls):
            return value
        return cls(str(value).strip().lower())


_ALLOWED = {
    GeometryKind.EUCLIDEAN: {Chart.CARTESIAN, Chart.GEODESIC_POLAR, Chart.FERMI},
    GeometryKind.HYPERBOLIC: {Chart.UPPER_HALF_PLANE, Chart.GEODESIC_POLAR, Chart.FERMI},
}


@dataclass(frozen=True)
class GaugeChart:
    """A chart on E or H together with the fixed gauge for field strength ``theta``."""

    geometry: GeometryKind
    chart: Chart
    theta: float

    def __post_init__(self):
        object.__setattr__(self, "geometry", GeometryKind.parse(self.geometry))
        object.__setattr__(self, "chart", Chart.parse(self.chart))
        object.__setattr__(self, "theta", float(self.theta))
        if self.chart not in _ALLOWED[self.geometry]:
            raise ValueError(f"chart {self.chart.value} is not available on {self.geometry.value}")

    @property
    def hyperbolic(self) -> bool:
        return self.geometry is GeometryKind.HYPERBOLIC

    def with_theta(self, theta: float) -> "GaugeChart":
        return GaugeChart(self.geometry, self.chart, theta)

    # -- validity ---------------------------------------------------------
    def valid(self, q1, q2) -> np.ndarray:
        q1 = np.asarray(q1, dtype=float)
        q2 = np.asarray(q2, dtype=float)
        ok = np.isfinite(q1) & np.isfinite(q2)
        if self.chart is Chart.UPPER_HALF_PLANE:
            ok &= q2 > 0
        elif self.chart is Chart.GEODESIC_POLAR:
            ok &= q1 > 0
        return ok

    def check(self, q1, q2) -> None:
        if not np.all(self.valid(q1, q2)):
            raise DomainError(f"point(s) outside the validity region of the {self.chart.value} chart")

    # -- Riemannian data ----------------------------------------------------
    def metric(self, q1, q2):
        """Return ``(g11, g22, volume density)`` evaluated without validity checks."""
        q1 = np.asarray(q1, dtype=float)
        q2 = np.asarray(q2, dtype=float)
        one = np.ones(np.broadcast(q1, q2).shape)
        c = self.chart
        if c is Chart.CARTESIAN:
            return one, one.copy(), one.copy()
        if c is Chart.UPPER_HALF_PLANE:
            g = one / q2**2
            return g, g.copy(), g.copy()
        if c is Chart.GEODESIC_POLAR:
            j = (np.sinh(q1) if self.hyperbolic else q1) * one
            return one, j**2, j
        # Fermi
        j = (np.cosh(q1) if self.hyperbolic else one) * one
        return one, j**2, j

    def potential(self, q1, q2):
        """Gauge 1-form components ``(A1, A2)`` evaluated without validity checks."""
        q1 = np.asarray(q1, dtype=float)
        q2 = np.asarray(q2, dtype=float)
        zero = np.zeros(np.broadcast(q1, q2).shape)
        th = self.theta
        c = self.chart
        if c is Chart.CARTESIAN:
            return zero, th * q1 + zero
        if c is Chart.UPPER_HALF_PLANE:
            return th / q2 + zero, zero
        if c is Chart.GEODESIC_POLAR:
            a = np.cosh(q1) - 1.0 if self.hyperbolic else 0.5 * q1**2
            return zero, th * a + zero
        a = np.sinh(q1) if self.hyperbolic else q1
        return zero, th * a + zero

    def plaquette_area(self, q1a, q1b, q2a, q2b):
        """Exact Riemannian area of the coordinate rectangle ``[q1a,q1b] x [q2a,q2b]``."""
        q1a, q1b, q2a, q2b = (np.asarray(v, dtype=float) for v in (q1a, q1b, q2a, q2b))
        d1 = q1b - q1a
        d2 = q2b - q2a
        c = self.chart
        if c is Chart.CARTESIAN:
            return d1 * d2
        if c is Chart.UPPER_HALF_PLANE:
            return d1 * (1.0 / q2a - 1.0 / q2b)
        if c is Chart.GEODESIC_POLAR:
            if self.hyperbolic:
                return (np.cosh(q1b) - np.cosh(q1a)) * d2
            return 0.5 * (q1b**2 - q1a**2) * d2
        if self.hyperbolic:
            return (np.sinh(q1b) - np.sinh(q1a)) * d2
        return d1 * d2

    def hyperboloid(self, q1, q2):
        """Embed hyperbolic chart points in the hyperboloid model ``-x0^2 + x1^2 + x2^2 = -1``."""
        q1 = np.asarray(q1, dtype=float)
        q2 = np.asarray(q2, dtype=float)
        c = self.chart
        if c is Chart.UPPER_HALF_PLANE:
            r2 = q1**2 + q2**2
            return np.stack([(r2 + 1) / (2 * q2), q1 / q2, (r2 - 1) / (2 * q2)])
        if c is Chart.GEODESIC_POLAR:
            return np.stack([np.cosh(q1) + 0 * q2, np.sinh(q1) * np.cos(q2), np.sinh(q1) * np.sin(q2)])
        if c is Chart.FERMI:
            return np.stack([np.cosh(q1) * np.cosh(q2), np.cosh(q1) * np.sinh(q2), np.sinh(q1) + 0 * q2])
        raise ValueError("hyperboloid embedding needs a hyperbolic chart")

    def euclidean_xy(self, q1, q2):
        q1 = np.asarray(q1, dtype=float)
        q2 = np.asarray(q2, dtype=float)
        if self.chart is Chart.CARTESIAN:
            return q1 + 0 * q2, q2 + 0 * q1
        if self.chart is Chart.GEODESIC_POLAR:
            return q1 * np.cos(q2), q1 * np.sin(q2)
        # Euclidean Fermi chart: t runs along the x axis, s is the height
        return q2 + 0 * q1, q1 + 0 * q2


def _point(chart: GaugeChart, p):
    q1, q2 = (float(v) for v in p)
    chart.check(q1, q2)
    return q1, q2


def metric_weights(chart: GaugeChart, p) -> tuple[float, float, float]:
    """Diagonal metric coefficients and volume density at ``p``."""
    q1, q2 = _point(chart, p)
    g11, g22, vol = chart.metric(q1, q2)
    return float(g11), float(g22), float(vol)


def gauge_potential(chart: GaugeChart, p) -> tuple[float, float]:
    q1, q2 = _point(chart, p)
    a1, a2 = chart.potential(q1, q2)
    return float(a1), float(a2)


def edge_integrals(chart: GaugeChart, q1, q2, gauge_gradient: Optional[Callable] = None):
    """Midpoint-rule integrals of ``A`` along the edges of a tensor grid.

    ``q1`` and ``q2`` are the grid lines. Returns ``(a1, a2)`` where
    ``a1[i, j]`` integrates along the q1-edge from node ``(i, j)`` to
    ``(i+1, j)`` (shape ``(n1-1, n2)``) and ``a2[i, j]`` along the q2-edge
    from ``(i, j)`` to ``(i, j+1)`` (shape ``(n1, n2-1)``).

    ``gauge_gradient(q1, q2) -> (d1chi, d2chi)`` is added to ``A`` before
    integration, for gauge-freedom studies.
    """
    q1 = np.asarray(q1, dtype=float)
    q2 = np.asarray(q2, dtype=float)
    m1 = 0.5 * (q1[1:] + q1[:-1])
    m2 = 0.5 * (q2[1:] + q2[:-1])
    A1, _ = chart.potential(m1[:, None], q2[None, :])
    _, A2 = chart.potential(q1[:, None], m2[None, :])
    if gauge_gradient is not None:
        A1 = A1 + gauge_gradient(m1[:, None], q2[None, :])[0]
        A2 = A2 + gauge_gradient(q1[:, None], m2[None, :])[1]
    return A1 * np.diff(q1)[:, None], A2 * np.diff(q2)[None, :]


def plaquette_fluxes(a1, a2) -> np.ndarray:
    """Counter-clockwise loop sums of edge integrals, shape ``(n1-1, n2-1)``."""
    return a1[:, :-1] + a2[1:, :] - a1[:, 1:] - a2[:-1, :]


def verify_flux(chart: GaugeChart, q1, q2, gauge_gradient: Optional[Callable] = None) -> float:
    """Maximum relative mismatch between plaquette loop sums of ``A`` and ``theta * area``.

    With ``theta == 0`` the absolute mismatch is returned instead.
    """
    q1 = np.asarray(q1, dtype=float)
    q2 = np.asarray(q2, dtype=float)
    Q1, Q2 = np.meshgrid(q1, q2, indexing="ij")
    chart.check(Q1, Q2)
    a1, a2 = edge_integrals(chart, q1, q2, gauge_gradient)
    loop = plaquette_fluxes(a1, a2)
    area = chart.plaquette_area(q1[:-1, None], q1[1:, None], q2[None, :-1], q2[None, 1:])
    target = chart.theta * area
    if chart.theta == 0:
        return float(np.max(np.abs(loop - target)))
    return float(np.max(np.abs(loop - target) / np.abs(target)))


def geodesic_distance_array(chart: GaugeChart, p1, p2, q1, q2) -> np.ndarray:
    """Vectorized model distance between chart points ``(p1, p2)`` and ``(q1, q2)``."""
    if chart.hyperbolic:
        if chart.chart is Chart.UPPER_HALF_PLANE:
            p1, p2, q1, q2 = (np.asarray(v, dtype=float) for v in (p1, p2, q1, q2))
            chord = np.sqrt((p1 - q1) ** 2 + (p2 - q2) ** 2)
            return 2.0 * np.arcsinh(chord / (2.0 * np.sqrt(p2 * q2)))
        X = chart.hyperboloid(p1, p2)
        Y = chart.hyperboloid(q1, q2)
        # cosh d = -<X, Y>; the chord form 4 sinh^2(d/2) = |X - Y|^2 is used when it is better conditioned
        inner = X[0] * Y[0] - X[1] * Y[1] - X[2] * Y[2]
        D = X - Y
        chord2 = np.maximum(-D[0] ** 2 + D[1] ** 2 + D[2] ** 2, 0.0)
        small = inner < 2.0
        return np.where(small, 2.0 * np.arcsinh(0.5 * np.sqrt(chord2)),
                        np.arccosh(np.maximum(inner, 1.0)))
    x1, y1 = chart.euclidean_xy(p1, p2)
    x2, y2 = chart.euclidean_xy(q1, q2)
    return np.hypot(x1 - x2, y1 - y2)


def geodesic_distance(chart: GaugeChart, p, q) -> float:
    p1, p2 = _point(chart, p)
    q1, q2 = _point(chart, q)
    return float(geodesic_distance_array(chart, p1, p2, q1, q2))
