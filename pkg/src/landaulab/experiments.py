"""Experiment pipelines composing the solver modules.

Each pipeline returns a plain result object holding arrays, reports and a
``checks`` mapping of named boolean verdicts.  Persistence and provenance
live in :mod:`landaulab.lab`.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import analysis
from .assemble import (TRUNCATION, BoundaryProfile, assemble_magnetic_laplacian, build_domain)
from .channels import (NEUMANN, build_radial_problem, default_k_grid, parse_bc, solve_lowest, sweep_bands)
from .eigensolve import EigenRequest, eigs_window
from .geometry import GaugeChart, GeometryKind

log = logging.getLogger(__name__)


def default_s_max(geometry, theta: float) -> float:
    """Radial truncation: 20 magnetic lengths in the Euclidean case, 20 otherwise."""
    geometry = GeometryKind.parse(geometry)
    if geometry is GeometryKind.EUCLIDEAN and theta != 0:
        return 20.0 / math.sqrt(abs(theta))
    return 20.0


# -- bulk levels ---------------------------------------------------------------------


@dataclass
class BulkLevelsResult:
    geometry: GeometryKind
    theta: float
    reference: analysis.ReferenceSpectrum
    eigenvalues: dict  # ell -> sorted array
    level_table: list  # (m, reference, computed, error)
    spurious: np.ndarray
    minimum: float
    residual: float
    checks: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    def all_eigenvalues(self) -> np.ndarray:
        return np.sort(np.concatenate(list(self.eigenvalues.values())))


def bulk_levels(geometry, theta: float, n: int = 2000, s_max: Optional[float] = None,
                ells: Sequence[int] = (0, 1, 2, 3), levels: int = 3, level_tol: float = 1e-3,
                lower_tol: float = 5e-3, tolerance: float = 1e-8) -> BulkLevelsResult:
    """Radial spectra over several angular sectors compared with the closed-form levels.

    Euclidean runs check the lowest ``levels`` rungs; hyperbolic runs check
    every discrete level.
    """
    geometry = GeometryKind.parse(geometry)
    s_max = default_s_max(geometry, theta) if s_max is None else float(s_max)
    ref = analysis.closed_form_spectrum(geometry, theta, euclidean_levels=levels)
    count = len(ref.discrete_levels) + 4
    eig = {}
    residual = 0.0
    for ell in ells:
        spec = solve_lowest(build_radial_problem(geometry, theta, int(ell), n, s_max), count, tolerance)
        eig[int(ell)] = spec.eigenvalues
        residual = max(residual, spec.residual_bound)
    allev = np.sort(np.concatenate(list(eig.values())))
    table = []
    for m, lam in enumerate(ref.discrete_levels):
        near = allev[np.argmin(np.abs(allev - lam))]
        table.append((m, float(lam), float(near), float(abs(near - lam))))
    if ref.continuum_start is not None:
        cut = ref.continuum_start - level_tol
    else:
        cut = ref.discrete_levels[-1] + level_tol if ref.discrete_levels else -math.inf
    below = allev[allev < cut]
    lv = np.asarray(ref.discrete_levels)
    spurious = below[np.min(np.abs(below[:, None] - lv[None, :]), axis=1) > level_tol] if len(lv) else below
    checks = {
        "levels_match": all(row[3] < level_tol for row in table),
        "no_spurious_levels": len(spurious) == 0,
        "lower_bound": bool(allev.min() >= abs(theta) - lower_tol),
        "solver_residuals": residual <= tolerance,
    }
    return BulkLevelsResult(geometry, float(theta), ref, eig, table, spurious, float(allev.min()), residual,
                            checks, {"n": int(n), "s_max": s_max, "ells": [int(v) for v in ells]})


# -- half-plane bands ------------------------------------------------------------------


def default_window(geometry, theta: float) -> tuple:
    """Coverage window strictly above the lowest level.

    Hyperbolic: up to 0.4 past the continuum edge; Euclidean: up to just
    below the fourth level.
    """
    geometry = GeometryKind.parse(geometry)
    a = abs(theta)
    if geometry is GeometryKind.HYPERBOLIC:
        return (a + 0.05, 0.25 + theta * theta + 0.4)
    return (a + 0.05, 7 * a - 0.05)


def default_channel_grid(geometry, theta: float) -> tuple:
    """``(n, s_max)`` for channel sweeps; Euclidean wells sit at ``k/theta`` and need room."""
    geometry = GeometryKind.parse(geometry)
    if geometry is GeometryKind.HYPERBOLIC:
        return 2000, 20.0
    return 3500, 70.0


@dataclass
class HalfplaneResult:
    bc: str
    bands: object  # BandStructure
    coverage: analysis.CoverageReport
    verdict: analysis.GapFillingVerdict
    minimum: float
    checks: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)


def halfplane_bands(geometry, theta: float, bc, k_min: float = -10.0, k_max: float = 60.0,
                    n: Optional[int] = None, s_max: Optional[float] = None, bands: Optional[int] = None,
                    window: Optional[tuple] = None, delta: float = 0.05, refine: Optional[float] = None,
                    lower_tol: float = 5e-3, threads: int = 1) -> HalfplaneResult:
    """Adaptive boundary-momentum sweep and the gap-filling verdict for one boundary condition.

    The lower bound ``E >= |theta|`` is a verdict for Dirichlet runs only;
    for Neumann runs it is recorded as a diagnostic, since Neumann edge
    bands are not bounded below by the lowest level.
    """
    geometry = GeometryKind.parse(geometry)
    bc = parse_bc(bc)
    dn, ds = default_channel_grid(geometry, theta)
    n = dn if n is None else int(n)
    s_max = ds if s_max is None else float(s_max)
    window = default_window(geometry, theta) if window is None else tuple(map(float, window))
    if bands is None:
        bands = 8 if geometry is GeometryKind.HYPERBOLIC else 5
    refine = delta if refine is None else refine
    grid = default_k_grid(geometry, theta, k_min, k_max, n, s_max)
    bs = sweep_bands(geometry, theta, bc, grid, bands, n, s_max, refine=refine,
                     energy_cap=window[1] + 0.5, threads=threads)
    cov = analysis.band_coverage(bs, window, delta)
    rungs = 1
    if theta != 0:
        rungs = max(1, int(math.ceil((window[1] / abs(theta) - 1) / 2)) + 1)
    ref = analysis.closed_form_spectrum(geometry, theta, euclidean_levels=rungs)
    verdict = analysis.gap_filling_verdict(ref, cov)
    minimum = float(np.nanmin(bs.bands))
    above = minimum >= abs(theta) - lower_tol
    checks = {"gap_filling": verdict.passed, "no_failed_samples": not bool(np.any(bs.failed))}
    diagnostics = {"samples": len(bs.k), "largest_uncovered": cov.largest_uncovered_width,
                   "continuity_ratio": bs.continuity_ratio(), "minimum": minimum}
    if bc == NEUMANN:
        diagnostics["lower_bound_holds"] = bool(above)
    else:
        checks["lower_bound"] = bool(above)
    return HalfplaneResult(bc, bs, cov, verdict, minimum, checks, diagnostics)


# -- two-dimensional boundary cell -------------------------------------------------------


def default_cell_window(theta: float) -> tuple:
    """Hyperbolic gap between the two lowest levels, shrunk by 0.1 on each side."""
    ref = analysis.closed_form_spectrum(GeometryKind.HYPERBOLIC, theta)
    lv = ref.discrete_levels
    top = lv[1] if len(lv) > 1 else ref.continuum_start
    return (abs(theta) + 0.1, top - 0.1)


@dataclass
class CellResult:
    theta: float
    profile: BoundaryProfile
    mesh: object
    states: list  # (phase, subwindow, E, boundary_fraction, truncation_fraction, attribution)
    windows: list  # (index, lo, hi, states, best_fraction, passes)
    eigenvalues: dict  # phase -> sorted eigenvalues found in the whole window
    complete: bool
    max_residual: float
    checks: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)


def boundary_cell(theta: float = 2.2, geometry="hyperbolic", profile: Optional[BoundaryProfile] = None,
                  bc="dirichlet", s_range: tuple = (-1.3, 4.5), period: float = 4.0,
                  shape: tuple = (250, 200), phases: int = 8, window: Optional[tuple] = None,
                  subwindows: int = 10, cutoff: Optional[float] = None, threshold: float = 0.8,
                  tolerance: float = 1e-8, max_count: int = 500, seed: int = 0,
                  threads: int = 1, lower_tol: float = 5e-3) -> CellResult:
    """Bloch-periodic cell along the boundary with shift-invert window solves.

    The region ``s >= profile(t)`` is meshed in Fermi coordinates over one
    period in ``t``; the Bloch phase runs over ``phases`` equally spaced
    values.  Every eigenvalue in each subwindow is computed and its mass
    within ``cutoff`` of the physical boundary recorded.
    """
    profile = BoundaryProfile.geodesic() if profile is None else profile
    window = default_cell_window(theta) if window is None else tuple(map(float, window))
    cutoff = 3.0 / math.sqrt(abs(theta)) if cutoff is None else float(cutoff)
    chart = GaugeChart(geometry, "fermi", float(theta))
    mesh = build_domain(chart, (s_range, (0.0, period)), profile, shape=shape, periodic=True)
    near_phys = mesh.distance_to_physical_boundary() <= cutoff
    near_trunc = mesh.distance_to_truncation_boundary() <= cutoff
    w = mesh.volume_weights
    edges = np.linspace(window[0], window[1], subwindows + 1)
    phase_values = 2 * np.pi * np.arange(phases) / phases

    def solve_phase(args):
        p, phi = args
        op = assemble_magnetic_laplacian(mesh, bc=bc, bloch_phase=phi)
        rows, found, complete, resid = [], [], True, 0.0
        for j in range(subwindows):
            lo, hi = edges[j], edges[j + 1]
            req = EigenRequest.window(lo, hi, max_count=max_count, tolerance=tolerance, vectors=True,
                                      seed=seed + 1000 * p + j)
            res = eigs_window(op, req)
            complete = complete and res.all_converged
            if len(res.eigenvalues) == 0:
                continue
            resid = max(resid, float(res.residuals.max()))
            # keep half-open subwindows so a value on a shared edge is counted once
            keep = res.eigenvalues < hi if j < subwindows - 1 else np.ones(len(res.eigenvalues), bool)
            vals = res.eigenvalues[keep]
            f = op.physical(res.eigenvectors[:, keep])
            fp = analysis.localization_fractions(f, w, near_phys)
            ft = analysis.localization_fractions(f, w, near_trunc)
            for E, a, b in zip(vals, fp, ft):
                rows.append((float(phi), j, float(E), float(a), float(b), analysis.attribute_state(a, b)))
            found.append(vals)
        return rows, (np.sort(np.concatenate(found)) if found else np.empty(0)), complete, resid

    jobs = list(enumerate(phase_values))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(solve_phase, jobs))
    else:
        results = [solve_phase(j) for j in jobs]
    states = [row for r in results for row in r[0]]
    eigen = {float(phi): r[1] for (_, phi), r in zip(jobs, results)}
    complete = all(r[2] for r in results)
    resid = max((r[3] for r in results), default=0.0)
    windows = []
    for j in range(subwindows):
        fr = [s[3] for s in states if s[1] == j]
        best = max(fr, default=0.0)
        windows.append((j, float(edges[j]), float(edges[j + 1]), len(fr), float(best), bool(best >= threshold)))
    # the link phase theta*b(s)*h_t must stay below pi/2, where the lattice potential turns over
    b = np.sinh if chart.hyperbolic else (lambda v: v)
    lattice_phase = abs(theta) * float(b(max(abs(s_range[0]), abs(s_range[1])))) * mesh.h2 / 2
    if lattice_phase >= math.pi / 2:
        log.warning("lattice phase %.3f reaches pi/2: spurious states near the far edge", lattice_phase)
    checks = {"boundary_states_in_every_subwindow": all(wi[5] for wi in windows),
              "lower_bound": all(s[2] >= abs(theta) - lower_tol for s in states),
              "solver_complete": complete}
    diagnostics = {"nodes": mesh.size, "shape": list(mesh.shape), "cutoff": cutoff, "threshold": threshold,
                   "lattice_phase_max": lattice_phase, "lattice_aliasing": bool(lattice_phase >= math.pi / 2),
                   "window": list(window), "phases": phases, "max_residual": resid,
                   "attribution": {k: sum(1 for s in states if s[5] == k)
                                   for k in ("physical", "truncation", "unattributed", "bulk")},
                   "truncation_nodes": int(np.sum(mesh.kind == TRUNCATION))}
    return CellResult(float(theta), profile, mesh, states, windows, eigen, complete, resid, checks, diagnostics)


# -- supersymmetric ladder ------------------------------------------------------------------


@dataclass
class SusyLadderResult:
    theta: float
    ladder: list
    susy: analysis.SusyReport
    spectra: tuple  # (union over sectors for theta, for theta - 1)
    checks: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)


def susy_ladder(theta: float, n: int = 2000, s_max: float = 20.0, ells: Sequence[int] = (0, 1, 2, 3),
                tol: float = 2e-3, tolerance: float = 1e-8) -> SusyLadderResult:
    """Closed-form ladder identity plus numerical partner check between ``theta`` and ``theta - 1``."""
    geometry = GeometryKind.HYPERBOLIC
    ref_a = analysis.closed_form_spectrum(geometry, theta)
    ref_b = analysis.closed_form_spectrum(geometry, theta - 1.0)
    ladder = analysis.ladder_identity_check(ref_a, ref_b)
    spectra = []
    residual = 0.0
    for th in (theta, theta - 1.0):
        count = len(analysis.closed_form_spectrum(geometry, th).discrete_levels) + 4
        vals = []
        for ell in ells:
            spec = solve_lowest(build_radial_problem(geometry, th, int(ell), n, s_max), count, tolerance)
            vals.append(spec.eigenvalues)
            residual = max(residual, spec.residual_bound)
        spectra.append(np.sort(np.concatenate(vals)))
    report = analysis.susy_partner_check(spectra[0], spectra[1], theta, tol)
    checks = {"ladder_identity": all(row[3] for row in ladder), "susy_partners": report.passed,
              "solver_residuals": residual <= tolerance}
    return SusyLadderResult(float(theta), ladder, report, tuple(spectra), checks,
                            {"max_mismatch": report.max_mismatch, "zero_modes": report.zero_modes})
