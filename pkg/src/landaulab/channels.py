"""Separated-variable channel problems and boundary-momentum band sweeps.

A channel operator has the form

    f  ->  -(1/J) (J f')' + V(s) f,        s in (0, S_max),

with Jacobian ``J`` and magnetic potential ``V``.  It is discretized in
conservative (flux) form on the half-cell grid ``s_j = (j + 1/2) h`` and
then symmetrized with ``g = J^{1/2} f``, which turns it into a standard
symmetric tridiagonal matrix.  The extra potential produced by the
similarity transform is carried implicitly by the flux form.  At ``s = 0``
the face Jacobian of the radial problem vanishes, so no condition is
needed there.

Boundary conditions act on the untransformed function ``f`` at the face
``s = 0`` through a ghost node: Dirichlet uses ``f_{-1} = -f_0``,
Neumann ``f_{-1} = f_0``.  The outer face ``s = S_max`` is always Dirichlet.
"""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .geometry import GeometryKind

log = logging.getLogger(__name__)

DIRICHLET = "dirichlet"
NEUMANN = "neumann"
NOT_APPLICABLE = "not_applicable"


class ParameterError(ValueError):
    pass


def parse_bc(bc) -> str:
    value = str(bc).strip().lower()
    if value in ("d", DIRICHLET):
        return DIRICHLET
    if value in ("n", NEUMANN):
        return NEUMANN
    raise ParameterError(f"unknown boundary condition {bc!r}")


@dataclass(frozen=True)
class Tridiag1DProblem:
    diagonal: np.ndarray
    offdiagonal: np.ndarray
    h: float
    offset: bool
    geometry: GeometryKind
    theta: float
    sector: tuple  # ("l", int) or ("k", float)
    boundary_condition: str
    s_max: float
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.diagonal)

    @property
    def nodes(self) -> np.ndarray:
        shift = 0.5 if self.offset else 0.0
        return (np.arange(self.n) + shift) * self.h

    def dense(self) -> np.ndarray:
        return (np.diag(self.diagonal) + np.diag(self.offdiagonal, 1)
                + np.diag(self.offdiagonal, -1))

    def describe(self) -> dict:
        return {
            "geometry": self.geometry.value,
            "theta": self.theta,
            "sector": list(self.sector),
            "boundary_condition": self.boundary_condition,
            "n": self.n,
            "h": self.h,
            "s_max": self.s_max,
            **self.meta,
        }


@dataclass
class Spectrum1D:
    eigenvalues: np.ndarray
    residual_bound: float
    meta: dict


def _check(n, s_max):
    if int(n) != n or n < 16:
        raise ParameterError(f"need n >= 16 grid points, got {n}")
    if not s_max > 0:
        raise ParameterError(f"truncation length must be positive, got {s_max}")


def _assemble(J, potential, n, s_max, face0):
    h = s_max / n
    s = (np.arange(n) + 0.5) * h
    faces = np.arange(n + 1) * h
    Jf = J(faces)
    Jc = J(s)
    scale = 1.0 / (h * h * Jc)
    diag = (Jf[:-1] + Jf[1:]) * scale + potential(s, Jc)
    # face0 = +1 doubles the s=0 flux (Dirichlet ghost), -1 cancels it (Neumann)
    diag[0] += face0 * Jf[0] * scale[0]
    diag[-1] += Jf[-1] * scale[-1]
    off = -Jf[1:-1] / (h * h * np.sqrt(Jc[:-1] * Jc[1:]))
    return diag, off, h


def build_radial_problem(geometry, theta: float, ell: int, n: int, s_max: float) -> Tridiag1DProblem:
    """Angular-momentum sector ``ell`` of the bulk Landau Hamiltonian in geodesic polar gauge."""
    geometry = GeometryKind.parse(geometry)
    _check(n, s_max)
    theta = float(theta)
    if geometry is GeometryKind.HYPERBOLIC:
        J = np.sinh
        a = lambda s: 2.0 * np.sinh(0.5 * s) ** 2  # cosh(s) - 1 without cancellation
    else:
        J = lambda s: np.asarray(s, dtype=float)
        a = lambda s: 0.5 * s * s

    def potential(s, Jc):
        return ((ell - theta * a(s)) / Jc) ** 2

    diag, off, h = _assemble(J, potential, int(n), float(s_max), 0.0)
    return Tridiag1DProblem(diag, off, h, True, geometry, theta, ("l", int(ell)),
                            NOT_APPLICABLE, float(s_max))


def build_channel_problem(geometry, theta: float, k: float, bc, n: int, s_max: float,
                          t_spacing: Optional[float] = None) -> Tridiag1DProblem:
    """Boundary-momentum channel ``k`` of the half-plane ``s >= 0`` in Fermi gauge.

    ``t_spacing`` replaces ``(k - theta b)^2`` by its lattice counterpart
    ``(2 sin(h_t (k - theta b) / 2) / h_t)^2``, matching a 2D mesh with
    that spacing along the boundary.
    """
    geometry = GeometryKind.parse(geometry)
    bc = parse_bc(bc)
    _check(n, s_max)
    theta = float(theta)
    k = float(k)
    if geometry is GeometryKind.HYPERBOLIC:
        J, b = np.cosh, np.sinh
    else:
        J = lambda s: np.ones_like(np.asarray(s, dtype=float))
        b = lambda s: np.asarray(s, dtype=float)

    def potential(s, Jc):
        q = k - theta * b(s)
        if t_spacing is not None:
            q = 2.0 * np.sin(0.5 * t_spacing * q) / t_spacing
        return (q / Jc) ** 2

    face0 = 1.0 if bc == DIRICHLET else -1.0
    diag, off, h = _assemble(J, potential, int(n), float(s_max), face0)
    meta = {"neumann_convention": "normal derivative of the untransformed function"} if bc == NEUMANN else {}
    if t_spacing is not None:
        meta["t_spacing"] = float(t_spacing)
    return Tridiag1DProblem(diag, off, h, True, geometry, theta, ("k", k), bc, float(s_max), meta)


def solve_lowest(problem: Tridiag1DProblem, count: int, tolerance: float = 1e-8) -> Spectrum1D:
    from .eigensolve import EigenRequest, solve_tridiagonal

    res = solve_tridiagonal(problem, EigenRequest.lowest(count, tolerance=tolerance))
    return Spectrum1D(res.eigenvalues, float(np.max(res.residuals, initial=0.0)), problem.describe())


# -- band structures -------------------------------------------------------


@dataclass
class BandStructure:
    k: np.ndarray
    bands: np.ndarray  # shape (len(k), nbands), sorted per row
    boundary_condition: str
    theta: float
    geometry: GeometryKind
    meta: dict = field(default_factory=dict)
    failed: np.ndarray = None  # per-k failure flags

    def __post_init__(self):
        if self.failed is None:
            self.failed = np.zeros(len(self.k), dtype=bool)

    @property
    def nbands(self) -> int:
        return self.bands.shape[1]

    def lipschitz_bound(self) -> float:
        # Hellmann-Feynman with Cauchy-Schwarz: |dE/dk| <= 2 sqrt(E) (J >= 1 on channel problems)
        emax = float(np.nanmax(self.bands)) if self.bands.size else 0.0
        return 2.0 * math.sqrt(max(emax, 0.0))

    def continuity_ratio(self) -> float:
        """Largest ``|dE| / (L dk)`` over adjacent samples; at most 1 for a continuous band family."""
        if len(self.k) < 2:
            return 0.0
        dk = np.diff(self.k)[:, None]
        jumps = np.abs(np.diff(self.bands, axis=0))
        return float(np.nanmax(jumps / (self.lipschitz_bound() * dk)))

    def to_csv(self, path) -> Path:
        path = Path(path)
        header = ",".join(["k"] + [f"E_{m}" for m in range(self.nbands)])
        rows = np.column_stack([self.k, self.bands])
        np.savetxt(path, rows, delimiter=",", header=header, comments="", fmt="%.17g")
        sidecar = path.with_suffix(".json")
        sidecar.write_text(json.dumps(self.metadata(), indent=2, sort_keys=True) + "\n")
        return path

    def metadata(self) -> dict:
        return {
            "geometry": self.geometry.value,
            "theta": self.theta,
            "boundary_condition": self.boundary_condition,
            "nbands": self.nbands,
            "samples": len(self.k),
            "failed_k": [float(v) for v in self.k[self.failed]],
            **self.meta,
        }

    @classmethod
    def from_csv(cls, path) -> "BandStructure":
        path = Path(path)
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        meta = json.loads(path.with_suffix(".json").read_text())
        extra = {key: v for key, v in meta.items()
                 if key not in ("geometry", "theta", "boundary_condition", "nbands", "samples", "failed_k")}
        failed = np.isin(data[:, 0], meta.get("failed_k", []))
        return cls(data[:, 0], data[:, 1:], meta["boundary_condition"], meta["theta"],
                   GeometryKind.parse(meta["geometry"]), extra, failed)


def default_k_grid(geometry, theta: float, k_min: float, k_max: float, n: int, s_max: float) -> np.ndarray:
    """Uniform grid whose well-centre displacement per step is at most ``h n / 100``."""
    GeometryKind.parse(geometry)
    step_s = s_max / 100.0
    # centre is k/theta (Euclidean) or arcsinh(k/theta) (hyperbolic); both move at most dk/|theta|
    dk = abs(theta) * step_s if theta != 0 else step_s
    count = max(2, int(math.ceil((k_max - k_min) / dk)) + 1)
    return np.linspace(k_min, k_max, count)


def _solve_k(args):
    geometry, theta, k, bc, n, s_max, nbands, t_spacing = args
    try:
        spec = solve_lowest(build_channel_problem(geometry, theta, k, bc, n, s_max, t_spacing), nbands)
        return spec.eigenvalues, False
    except Exception as exc:  # flagged per k, sweep continues
        log.warning("channel solve failed at k=%g: %s", k, exc)
        return np.full(nbands, np.nan), True


def sweep_bands(geometry, theta: float, bc, k_grid: Sequence[float], bands: int, n: int, s_max: float,
                refine: Optional[float] = None, max_samples: int = 20000, energy_cap: Optional[float] = None,
                threads: int = 1, t_spacing: Optional[float] = None) -> BandStructure:
    """Lowest ``bands`` eigenvalues of the channel problem for every ``k`` in ``k_grid``.

    With ``refine`` set, midpoints are inserted wherever some band jumps by
    more than ``refine`` between neighbouring samples (ignoring pairs that
    lie entirely above ``energy_cap``) until no such pair remains or
    ``max_samples`` is reached.
    """
    geometry = GeometryKind.parse(geometry)
    bc = parse_bc(bc)
    k = np.asarray(k_grid, dtype=float)
    if k.ndim != 1 or np.any(np.diff(k) < 0):
        raise ParameterError("k_grid must be a sorted 1D array")

    def solve_many(ks):
        jobs = [(geometry, theta, float(v), bc, n, s_max, bands, t_spacing) for v in ks]
        if threads > 1 and len(jobs) > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                out = list(pool.map(_solve_k, jobs))
        else:
            out = [_solve_k(j) for j in jobs]
        return np.array([o[0] for o in out]).reshape(len(ks), bands), np.array([o[1] for o in out], dtype=bool)

    E, failed = solve_many(k)
    rounds = 0
    while refine is not None and len(k) < max_samples:
        jumps = np.abs(np.diff(E, axis=0))
        mask = jumps > refine
        if energy_cap is not None:
            mask &= np.minimum(E[:-1], E[1:]) <= energy_cap
        bad = np.nonzero(mask.any(axis=1))[0]
        if len(bad) == 0:
            break
        bad = bad[: max_samples - len(k)]
        mids = 0.5 * (k[bad] + k[bad + 1])
        Em, fm = solve_many(mids)
        order = np.argsort(np.concatenate([k, mids]), kind="stable")
        k = np.concatenate([k, mids])[order]
        E = np.concatenate([E, Em])[order]
        failed = np.concatenate([failed, fm])[order]
        rounds += 1
    meta = {"n": int(n), "s_max": float(s_max), "h": float(s_max) / int(n), "refine": refine,
            "refinement_rounds": rounds, "energy_cap": energy_cap,
            "trust_max": trust_max(geometry, theta, float(s_max) / int(n))}
    if bc == NEUMANN:
        meta["neumann_convention"] = "normal derivative of the untransformed function"
    if t_spacing is not None:
        meta["t_spacing"] = t_spacing
    return BandStructure(k, E, bc, float(theta), geometry, meta, failed)


def trust_max(geometry, theta: float, h: float) -> float:
    """Energy above which half-plane band data are not trusted for coverage.

    Hyperbolic: one unit past the continuum edge (truncated continuum
    states crowd there); both geometries: ``E h^2 <= 0.05`` discretization limit.
    """
    geometry = GeometryKind.parse(geometry)
    limit = 0.05 / (h * h)
    if geometry is GeometryKind.HYPERBOLIC:
        limit = min(limit, 0.25 + theta * theta + 1.0)
    return float(limit)


# -- truncation studies ----------------------------------------------------


def continuum_threshold(geometry, theta: float) -> Optional[float]:
    geometry = GeometryKind.parse(geometry)
    if geometry is GeometryKind.HYPERBOLIC:
        return 0.25 + theta * theta
    return None if theta != 0 else 0.0


@dataclass
class TruncationStudy:
    s_max: np.ndarray
    spectra: list  # one sorted eigenvalue array per s_max
    threshold: float
    bound_shift: float  # max change of sub-threshold eigenvalues across s_max
    exponents: np.ndarray  # fitted power of (E_j - threshold) ~ S_max^p for the lowest continuum states

    @property
    def continuum_discretized(self) -> bool:
        return bool(len(self.exponents)) and bool(np.all(np.abs(self.exponents + 2.0) < 0.5))


def truncation_study(geometry, theta: float, ell: int, s_max_values: Sequence[float], h: float,
                     count: int = 12, continuum_states: int = 3) -> TruncationStudy:
    """Radial spectra at fixed spacing ``h`` for several truncation lengths.

    Sub-threshold eigenvalues (bound states) must be insensitive to
    ``S_max``, while the first states above the continuum edge should move
    like ``S_max^-2``.
    """
    thr = continuum_threshold(geometry, theta)
    s_vals = np.asarray(s_max_values, dtype=float)
    spectra = []
    for S in s_vals:
        n = int(round(S / h))
        spectra.append(solve_lowest(build_radial_problem(geometry, theta, ell, n, n * h), count).eigenvalues)
    below = [sp[sp < thr] for sp in spectra]
    nb = min(len(b) for b in below)
    bound_shift = 0.0
    if nb:
        stack = np.array([b[:nb] for b in below])
        bound_shift = float(np.max(stack.max(axis=0) - stack.min(axis=0)))
    above = [sp[sp >= thr][:continuum_states] for sp in spectra]
    na = min(len(a) for a in above)
    exps = []
    for j in range(na):
        y = np.log(np.array([a[j] for a in above]) - thr)
        exps.append(np.polyfit(np.log(s_vals), y, 1)[0])
    return TruncationStudy(s_vals, spectra, float(thr), bound_shift, np.array(exps))
