import math

import numpy as np
import pytest

from landaulab.geometry import (Chart, DomainError, GaugeChart, GeometryKind, edge_integrals, gauge_potential,
                                geodesic_distance, metric_weights, plaquette_fluxes, verify_flux)


def chi_gradient(q1, q2):
    # gradient of chi = 0.3 sin(q1) sin(2 q2)
    return 0.3 * np.cos(q1) * np.sin(2 * q2), 0.6 * np.sin(q1) * np.cos(2 * q2)


def test_curvature():
    assert GeometryKind.EUCLIDEAN.scalar_curvature == 0
    assert GeometryKind.HYPERBOLIC.scalar_curvature == -2
    assert GeometryKind.parse("Hyperbolic") is GeometryKind.HYPERBOLIC


def test_chart_availability():
    with pytest.raises(ValueError):
        GaugeChart("hyperbolic", "cartesian", 1.0)
    with pytest.raises(ValueError):
        GaugeChart("euclidean", "upper_half_plane", 1.0)


def test_metric_weights_examples():
    assert metric_weights(GaugeChart("euclidean", "cartesian", 1), (3.0, -7.0)) == (1, 1, 1)
    assert metric_weights(GaugeChart("hyperbolic", "upper_half_plane", 1), (0, 2)) == pytest.approx((0.25, 0.25, 0.25))
    g = metric_weights(GaugeChart("hyperbolic", "geodesic_polar", 1), (1.0, 0.3))
    assert g == pytest.approx((1.0, 1.3810978455418157, 1.1752011936438014))
    assert metric_weights(GaugeChart("euclidean", "fermi", 1), (0.5, 2)) == (1, 1, 1)
    assert metric_weights(GaugeChart("hyperbolic", "fermi", 1), (1.0, 2)) == pytest.approx(
        (1, math.cosh(1) ** 2, math.cosh(1)))


def test_metric_outside_domain():
    with pytest.raises(DomainError):
        metric_weights(GaugeChart("hyperbolic", "upper_half_plane", 1), (0, -1))
    with pytest.raises(DomainError):
        gauge_potential(GaugeChart("hyperbolic", "geodesic_polar", 1), (-0.5, 0))


def test_gauge_potential_examples():
    assert gauge_potential(GaugeChart("euclidean", "cartesian", 1), (2, 5)) == (0, 2)
    assert gauge_potential(GaugeChart("hyperbolic", "geodesic_polar", 2), (1e-300, 0)) == (0, 0)
    assert gauge_potential(GaugeChart("hyperbolic", "upper_half_plane", 1), (3, 2)) == (0.5, 0)
    assert gauge_potential(GaugeChart("hyperbolic", "fermi", 2), (1.0, 0)) == pytest.approx((0, 2 * math.sinh(1)))
    assert gauge_potential(GaugeChart("euclidean", "fermi", 2), (1.5, 0)) == (0, 3)


def test_volume_positive():
    rng = np.random.default_rng(1)
    for geo, chart in [("hyperbolic", "upper_half_plane"), ("hyperbolic", "geodesic_polar"), ("hyperbolic", "fermi"),
                       ("euclidean", "geodesic_polar"), ("euclidean", "fermi"), ("euclidean", "cartesian")]:
        ch = GaugeChart(geo, chart, 1.0)
        q1 = rng.uniform(0.01, 5, 200) if chart == "geodesic_polar" else rng.uniform(-5, 5, 200)
        q2 = rng.uniform(0.01, 5, 200)
        assert np.all(ch.metric(q1, q2)[2] > 0)


def test_flux_cartesian_exact():
    ch = GaugeChart("euclidean", "cartesian", 1.0)
    assert verify_flux(ch, np.arange(6.0), np.arange(5.0)) < 1e-14


def test_flux_upper_half_plane():
    ch = GaugeChart("hyperbolic", "upper_half_plane", 2.2)
    x = np.arange(0, 0.5, 0.01)
    y = np.arange(0.9, 1.1, 0.01)
    assert verify_flux(ch, x, y) < 1e-3


@pytest.mark.parametrize("geo,chart,box", [
    ("hyperbolic", "geodesic_polar", ((0.5, 1.0), (0, 0.5))),
    ("hyperbolic", "fermi", ((0, 0.5), (0, 0.5))),
    ("hyperbolic", "upper_half_plane", ((0, 0.5), (0.9, 1.4))),
    ("euclidean", "cartesian", ((0, 0.5), (0, 0.5))),
    ("euclidean", "geodesic_polar", ((0.5, 1.0), (0, 0.5))),
    ("euclidean", "fermi", ((0, 0.5), (0, 0.5))),
])
def test_flux_second_order(geo, chart, box):
    # chart gauges integrate exactly; a smooth gauge term exposes the midpoint-rule order
    ch = GaugeChart(geo, chart, 1.0)
    res = []
    for h in (0.02, 0.01, 0.005):
        q1 = np.arange(box[0][0], box[0][1] + 1e-12, h)
        q2 = np.arange(box[1][0], box[1][1] + 1e-12, h)
        assert verify_flux(ch, q1, q2) < 1e-12
        res.append(verify_flux(ch, q1, q2, chi_gradient))
    ratios = [res[0] / res[1], res[1] / res[2]]
    assert all(3.5 < r < 4.5 for r in ratios), ratios


def test_gauge_freedom_discrete():
    ch = GaugeChart("hyperbolic", "fermi", 1.7)
    q1 = np.linspace(-1, 1, 15)
    q2 = np.linspace(0, 2, 11)
    a1, a2 = edge_integrals(ch, q1, q2)
    chi = np.random.default_rng(3).normal(size=(15, 11))
    b1 = a1 + np.diff(chi, axis=0)
    b2 = a2 + np.diff(chi, axis=1)
    assert np.allclose(plaquette_fluxes(a1, a2), plaquette_fluxes(b1, b2), rtol=0, atol=1e-13)


def test_distance_examples():
    assert geodesic_distance(GaugeChart("euclidean", "cartesian", 0), (0, 0), (3, 4)) == pytest.approx(5)
    uhp = GaugeChart("hyperbolic", "upper_half_plane", 0)
    assert geodesic_distance(uhp, (0, 1), (0, math.e)) == pytest.approx(1, abs=1e-14)
    assert geodesic_distance(uhp, (0.3, 2), (0.3, 2)) == 0


def test_distance_charts_agree():
    # the same pair of hyperbolic points in three charts
    fermi = GaugeChart("hyperbolic", "fermi", 0)
    polar = GaugeChart("hyperbolic", "geodesic_polar", 0)
    uhp = GaugeChart("hyperbolic", "upper_half_plane", 0)
    assert geodesic_distance(fermi, (0, 0), (0, 1.3)) == pytest.approx(1.3)
    assert geodesic_distance(fermi, (0, 0), (0.7, 0)) == pytest.approx(0.7)
    assert geodesic_distance(polar, (1.0, 0), (2.0, math.pi)) == pytest.approx(3.0)
    # cosh d = 1 + |dp|^2 / (2 y1 y2)
    d = geodesic_distance(uhp, (0.2, 0.5), (1.4, 3.0))
    assert math.cosh(d) == pytest.approx(1 + (1.2**2 + 2.5**2) / (2 * 0.5 * 3.0))
    # Fermi point (s, t) lies at distance |s| from the geodesic s=0
    assert geodesic_distance(fermi, (1.1, 0.4), (0, 0.4)) == pytest.approx(1.1)


def test_distance_small_separation_accuracy():
    fermi = GaugeChart("hyperbolic", "fermi", 0)
    assert geodesic_distance(fermi, (3.0, 0), (3.0 + 1e-9, 0)) == pytest.approx(1e-9, rel=1e-6)
