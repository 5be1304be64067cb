from types import SimpleNamespace

import numpy as np
import pytest
import scipy.sparse as sp

from landaulab.assemble import BoundaryProfile, assemble_magnetic_laplacian, build_domain
from landaulab.analysis import cluster_levels
from landaulab.channels import build_channel_problem, build_radial_problem, solve_lowest
from landaulab.eigensolve import (EigenRequest, dense_window, eigs_window, solve_tridiagonal, sturm_count,
                                  tridiagonal_to_sparse)
from landaulab.geometry import GaugeChart


def tridiag(d, e):
    return SimpleNamespace(diagonal=np.asarray(d, float), offdiagonal=np.asarray(e, float))


def test_free_laplacian_sine_modes():
    n = 4000
    h = np.pi / (n + 1)
    res = solve_tridiagonal(tridiag(np.full(n, 2 / h**2), np.full(n - 1, -1 / h**2)), EigenRequest.lowest(3))
    assert res.eigenvalues == pytest.approx([1, 4, 9], abs=1e-5)
    assert res.all_converged


def test_harmonic_oscillator():
    n, L = 40000, 12.0
    h = 2 * L / (n + 1)
    s = -L + h * np.arange(1, n + 1)
    res = solve_tridiagonal(tridiag(2 / h**2 + s**2, np.full(n - 1, -1 / h**2)), EigenRequest.lowest(3))
    assert res.eigenvalues == pytest.approx([1, 3, 5], abs=1e-6)


def test_diagonal_only():
    d = np.array([3.0, -1.0, 2.0, 0.5])
    res = solve_tridiagonal(tridiag(d, np.zeros(3)), EigenRequest.lowest(4))
    assert np.array_equal(res.eigenvalues, np.sort(d))


def test_sturm_count_matches_dense():
    rng = np.random.default_rng(0)
    d, e = rng.normal(size=50), rng.normal(size=49)
    vals = np.linalg.eigvalsh(np.diag(d) + np.diag(e, 1) + np.diag(e, -1))
    for x in (-3.0, -0.2, 0.0, 1.1, 5.0):
        assert sturm_count(d, e, x) == int(np.sum(vals < x))


def test_tridiagonal_window_mode_complete():
    p = build_radial_problem("hyperbolic", 2.2, 0, 400, 20)
    res = solve_tridiagonal(p, EigenRequest.window(2.0, 8.0))
    dense = dense_window(p.dense(), 2.0, 8.0)
    assert res.complete
    assert np.allclose(res.eigenvalues, dense, atol=1e-10)


def test_tridiagonal_window_max_count():
    p = build_radial_problem("hyperbolic", 2.2, 0, 400, 20)
    res = solve_tridiagonal(p, EigenRequest.window(2.0, 50.0, max_count=3))
    assert len(res.eigenvalues) == 3 and not res.complete


def test_request_validation():
    with pytest.raises(ValueError):
        EigenRequest.window(2.0, 1.0)
    with pytest.raises(ValueError):
        EigenRequest.lowest(0)
    with pytest.raises(ValueError):
        EigenRequest("sideways")


def test_diagonal_operator_window():
    d = np.arange(1000, dtype=float) * 0.01
    res = eigs_window(sp.diags(d), EigenRequest.window(2.005, 2.505))
    assert np.allclose(res.eigenvalues, d[(d >= 2.005) & (d <= 2.505)], atol=1e-12)
    assert res.complete and res.all_converged


def test_singular_shift_is_jittered():
    d = np.arange(200, dtype=float)
    res = eigs_window(sp.diags(d), EigenRequest.window(49.0, 51.0))
    assert np.allclose(res.eigenvalues, [49, 50, 51])
    assert res.meta["shifts"][0] != 50.0


@pytest.mark.parametrize("factory", [
    lambda: build_radial_problem("hyperbolic", 2.2, 1, 400, 20),
    lambda: build_channel_problem("hyperbolic", 2.2, 1.0, "neumann", 300, 12),
    lambda: build_channel_problem("euclidean", 1.0, 2.0, "dirichlet", 200, 10),
])
def test_window_solver_matches_dense(factory):
    p = factory()
    for lo, hi in ((2.0, 6.0), (5.0, 30.0)):
        res = eigs_window(tridiagonal_to_sparse(p), EigenRequest.window(lo, hi))
        assert res.complete
        dense = dense_window(p.dense(), lo, hi)
        assert len(res.eigenvalues) == len(dense)
        assert np.allclose(res.eigenvalues, dense, rtol=0, atol=1e-10)


def test_lowest_mode_sparse():
    p = build_radial_problem("euclidean", 1.0, 0, 1500, 20)
    res = eigs_window(tridiagonal_to_sparse(p), EigenRequest.lowest(3))
    assert np.allclose(res.eigenvalues, solve_lowest(p, 3).eigenvalues, atol=1e-9)


def test_window_guard_marks_incomplete():
    d = np.linspace(0, 1, 500)
    res = eigs_window(sp.diags(d), EigenRequest.window(0.0, 1.0, max_count=20))
    assert not res.complete
    assert len(res.eigenvalues) <= 20


def test_determinism_and_metadata():
    mesh = build_domain(GaugeChart("hyperbolic", "fermi", 2.2), ((0, 3), (0, 2)), shape=(40, 20), periodic=True)
    op = assemble_magnetic_laplacian(mesh, bloch_phase=0.4)
    req = EigenRequest.window(2.3, 4.5, vectors=True, seed=11)
    a, b = eigs_window(op, req), eigs_window(op, req)
    assert np.array_equal(a.eigenvalues, b.eigenvalues)
    assert a.meta["seed"] == 11
    assert np.all(a.residuals <= 1e-8)


def test_disjoint_windows_union():
    mesh = build_domain(GaugeChart("euclidean", "cartesian", 1.0), ((0, 6), (0, 6)), BoundaryProfile.none(), h=0.15)
    op = assemble_magnetic_laplacian(mesh)
    whole = eigs_window(op, EigenRequest.window(0.5, 3.5)).eigenvalues
    parts = np.concatenate([eigs_window(op, EigenRequest.window(lo, hi)).eigenvalues
                            for lo, hi in ((0.5, 1.5), (1.5 + 1e-12, 2.5), (2.5 + 1e-12, 3.5))])
    assert np.allclose(np.sort(parts), whole, atol=1e-10)


def test_landau_cluster_count_per_area():
    # oracle: the bulk margin d seen by radial sectors of a disc of radius R predicts
    # the number of box states in the lowest cluster as theta (L - 2d)^2 / (2 pi)
    R, tol = 10.0, 0.02
    count = sum(abs(solve_lowest(build_radial_problem("euclidean", 1.0, ell, 1000, R), 1).eigenvalues[0] - 1) <= tol
                for ell in range(120))
    margin = R - np.sqrt(2 * count)
    L = 12.0
    mesh = build_domain(GaugeChart("euclidean", "cartesian", 1.0), ((0, L), (0, L)), BoundaryProfile.none(), h=0.1)
    res = eigs_window(assemble_magnetic_laplacian(mesh), EigenRequest.window(0.5, 3.5))
    assert res.complete
    clusters = cluster_levels(res.eigenvalues, tol)
    first = clusters[0]
    assert first.center == pytest.approx(1.0, abs=5e-3)
    predicted = (L - 2 * margin) ** 2 / (2 * np.pi)
    assert abs(first.multiplicity - predicted) <= 1.5
    # the rest of (1, 3) holds truncation-edge states
    assert np.sum((res.eigenvalues > 1.05) & (res.eigenvalues < 2.95)) > 0
