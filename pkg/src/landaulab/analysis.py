"""Reference spectra, level clustering, band coverage and gap-filling verdicts."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .geometry import GeometryKind

FILLED = "FILLED"
NOT_FILLED = "NOT-FILLED"
NOT_TESTED = "NOT-TESTED"


@dataclass(frozen=True)
class ReferenceSpectrum:
    geometry: GeometryKind
    theta: float
    discrete_levels: tuple
    continuum_start: Optional[float]
    m_max: Optional[int]

    def level(self, m: int) -> float:
        return self.discrete_levels[m]

    def bulk_gaps(self) -> list:
        """Open gaps above the lowest level: between levels, then up to the continuum."""
        lv = list(self.discrete_levels)
        gaps = [(lv[i], lv[i + 1]) for i in range(len(lv) - 1)]
        if lv and self.continuum_start is not None and self.continuum_start > lv[-1]:
            gaps.append((lv[-1], self.continuum_start))
        return gaps

    def to_dict(self) -> dict:
        out = asdict(self)
        out["geometry"] = self.geometry.value
        out["discrete_levels"] = list(self.discrete_levels)
        return out


def hyperbolic_level(m: int, theta: float) -> float:
    return (2 * m + 1) * abs(theta) - m * (m + 1)


def closed_form_spectrum(geometry, theta: float, euclidean_levels: int = 12) -> ReferenceSpectrum:
    """Landau levels and continuum edge of the bulk operator.

    The Euclidean ladder is infinite; the first ``euclidean_levels`` rungs
    are listed.
    """
    geometry = GeometryKind.parse(geometry)
    theta = float(theta)
    a = abs(theta)
    if geometry is GeometryKind.EUCLIDEAN:
        if theta == 0:
            return ReferenceSpectrum(geometry, theta, (), 0.0, None)
        levels = tuple((2 * m + 1) * a for m in range(euclidean_levels))
        return ReferenceSpectrum(geometry, theta, levels, None, None)
    levels = []
    m = 0
    while m < a - 0.5:
        levels.append(hyperbolic_level(m, theta))
        m += 1
    m_max = len(levels) - 1 if levels else None
    return ReferenceSpectrum(geometry, theta, tuple(levels), 0.25 + theta * theta, m_max)


# -- clustering ----------------------------------------------------------------


@dataclass
class LandauCluster:
    center: float
    members: np.ndarray
    spread: float

    @property
    def multiplicity(self) -> int:
        return len(self.members)


def cluster_levels(ev: Sequence[float], tol: float) -> list:
    """Greedy grouping of sorted eigenvalues: a value joins the open cluster if
    it lies within ``tol`` of that cluster's smallest member."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    ev = np.sort(np.asarray(ev, dtype=float))
    clusters = []
    start = 0
    for i in range(1, len(ev) + 1):
        if i == len(ev) or ev[i] - ev[start] > tol:
            members = ev[start:i]
            clusters.append(LandauCluster(float(members.mean()), members, float(members[-1] - members[0])))
            start = i
    return clusters if len(ev) else []


# -- coverage ------------------------------------------------------------------


@dataclass
class CoverageReport:
    window: tuple
    delta: float
    covered: list
    uncovered: list
    warnings: list = field(default_factory=list)
    localization: dict = field(default_factory=dict)

    @property
    def largest_gap(self) -> tuple:
        if not self.uncovered:
            return (None, None, 0.0)
        a, b = max(self.uncovered, key=lambda iv: iv[1] - iv[0])
        return (a, b, b - a)

    @property
    def largest_uncovered_width(self) -> float:
        return self.largest_gap[2]

    def fully_covered(self, resolution: Optional[float] = None) -> bool:
        return self.largest_uncovered_width < (self.delta if resolution is None else resolution)

    def uncovered_within(self, lo: float, hi: float) -> float:
        """Largest uncovered width inside ``[lo, hi]``."""
        widths = [min(b, hi) - max(a, lo) for a, b in self.uncovered if min(b, hi) > max(a, lo)]
        return max(widths, default=0.0)

    def to_text(self) -> str:
        a, b, w = self.largest_gap
        lines = [f"window [{self.window[0]:g}, {self.window[1]:g}] at resolution {self.delta:g}",
                 f"covered pieces {len(self.covered)}, largest uncovered width {w:.4g}"]
        if w > 0:
            lines[-1] += f" at ({a:.4f}, {b:.4f})"
        lines += [f"warning: {m}" for m in self.warnings]
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        a, b, w = self.largest_gap
        return {"window": list(self.window), "delta": self.delta,
                "covered": [list(iv) for iv in self.covered], "uncovered": [list(iv) for iv in self.uncovered],
                "largest_uncovered": {"lo": a, "hi": b, "width": w}, "warnings": list(self.warnings),
                "localization": self.localization}


def merge_intervals(intervals) -> list:
    ivs = sorted((float(a), float(b)) for a, b in intervals)
    out = []
    for a, b in ivs:
        if out and a <= out[-1][1]:
            out[-1] = (out[-1][0], max(out[-1][1], b))
        else:
            out.append((a, b))
    return out


def coverage_from_intervals(intervals, window, delta, warnings=()) -> CoverageReport:
    lo, hi = map(float, window)
    covered = []
    for a, b in merge_intervals(intervals):
        a, b = max(a, lo), min(b, hi)
        if b >= a:
            covered.append((a, b))
    covered = merge_intervals(covered)
    uncovered = []
    cursor = lo
    for a, b in covered:
        if a > cursor:
            uncovered.append((cursor, a))
        cursor = max(cursor, b)
    if cursor < hi:
        uncovered.append((cursor, hi))
    return CoverageReport((lo, hi), float(delta), covered, uncovered, list(warnings))


def band_intervals(bands, delta: float) -> list:
    """Energy intervals swept by each band between adjacent samples closer than ``delta``."""
    E = np.asarray(bands.bands if hasattr(bands, "bands") else bands, dtype=float)
    failed = getattr(bands, "failed", np.zeros(len(E), dtype=bool))
    out = []
    for m in range(E.shape[1]):
        col = E[:, m]
        ok = np.isfinite(col) & ~failed
        for i in range(len(col)):
            if ok[i]:
                out.append((col[i], col[i]))
        pair = ok[:-1] & ok[1:] & (np.abs(np.diff(col)) < delta)
        for i in np.nonzero(pair)[0]:
            out.append((min(col[i], col[i + 1]), max(col[i], col[i + 1])))
    return out


def band_coverage(bands, window, delta: float) -> CoverageReport:
    """Union of swept band intervals, bridged only across sampling jumps below ``delta``."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    warnings = []
    trust = getattr(bands, "meta", {}).get("trust_max")
    if trust is not None and window[1] > trust:
        warnings.append(f"window top {window[1]:g} lies above the trusted range {trust:g}")
    if getattr(bands, "failed", None) is not None and np.any(bands.failed):
        warnings.append(f"{int(np.sum(bands.failed))} k-samples failed and were skipped")
    return coverage_from_intervals(band_intervals(bands, delta), window, delta, warnings)


def spectrum_coverage(eigenvalues, window, delta: float) -> CoverageReport:
    """Coverage by a point spectrum: each value covers ``delta/2`` on either side."""
    ev = np.asarray(eigenvalues, dtype=float)
    return coverage_from_intervals([(v - 0.5 * delta, v + 0.5 * delta) for v in ev], window, delta)


# -- verdicts ------------------------------------------------------------------


@dataclass
class GapVerdict:
    gap: tuple
    tested: tuple
    uncovered_width: float
    status: str


@dataclass
class GapFillingVerdict:
    gaps: list
    delta: float

    @property
    def passed(self) -> bool:
        tested = [g for g in self.gaps if g.status != NOT_TESTED]
        return bool(tested) and all(g.status == FILLED for g in tested)

    def to_text(self) -> str:
        lines = [f"{'gap':<24} {'tested':<24} {'uncovered':>10}  status"]
        for g in self.gaps:
            width = "-" if g.status == NOT_TESTED else f"{g.uncovered_width:.4g}"
            lines.append(f"{_iv(g.gap):<24} {_iv(g.tested):<24} {width:>10}  {g.status}")
        lines.append(f"overall: {'PASS' if self.passed else 'FAIL'} (resolution {self.delta:g})")
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {"passed": self.passed, "delta": self.delta,
                "gaps": [{"gap": list(g.gap), "tested": list(g.tested), "uncovered_width": g.uncovered_width,
                          "status": g.status} for g in self.gaps]}


def _iv(iv) -> str:
    a, b = iv
    return f"({a:.4f}, {'inf' if math.isinf(b) else f'{b:.4f}'})"


def gap_filling_verdict(bulk: ReferenceSpectrum, halfplane: CoverageReport,
                        delta: Optional[float] = None) -> GapFillingVerdict:
    """Per bulk gap above the lowest level: is the part inside the coverage window filled?"""
    delta = halfplane.delta if delta is None else float(delta)
    lo, hi = halfplane.window
    out = []
    for a, b in bulk.bulk_gaps():
        ta, tb = max(a, lo), min(b, hi)
        if tb <= ta:
            out.append(GapVerdict((a, b), (ta, tb), float("nan"), NOT_TESTED))
            continue
        width = halfplane.uncovered_within(ta, tb)
        out.append(GapVerdict((a, b), (ta, tb), width, FILLED if width < delta else NOT_FILLED))
    if bulk.continuum_start is not None and hi > bulk.continuum_start:
        ta = max(lo, bulk.continuum_start)
        width = halfplane.uncovered_within(ta, hi)
        out.append(GapVerdict((bulk.continuum_start, math.inf), (ta, hi), width,
                              FILLED if width < delta else NOT_FILLED))
    return GapFillingVerdict(out, delta)


# -- localization ----------------------------------------------------------------


def boundary_localization(vec, mesh, cutoff: float, distances: Optional[np.ndarray] = None) -> float:
    """Volume-weighted probability mass of ``vec`` within ``cutoff`` of the physical boundary.

    ``vec`` holds function values on the nodes of ``mesh`` (use
    ``op.physical(g)`` for symmetrized eigenvectors).  Precomputed
    ``distances`` skip the geometric search.
    """
    d = mesh.distance_to_physical_boundary() if distances is None else distances
    mass = mesh.volume_weights * np.abs(np.asarray(vec)) ** 2
    total = mass.sum()
    if total == 0:
        raise ValueError("zero vector")
    return float(mass[d <= cutoff].sum() / total)


def localization_fractions(vectors, weights, near_mask) -> np.ndarray:
    """Vectorized mass fractions of several function-valued columns on a node mask."""
    V = np.asarray(vectors)
    mass = weights[:, None] * np.abs(V) ** 2
    return mass[near_mask].sum(axis=0) / mass.sum(axis=0)


def attribute_state(physical_fraction: float, truncation_fraction: float) -> str:
    """Attribute a gap state to the physical or truncation boundary, or neither."""
    if 0.4 < physical_fraction < 0.6 and 0.4 < truncation_fraction < 0.6:
        return "unattributed"
    if physical_fraction >= 0.6 and physical_fraction > truncation_fraction:
        return "physical"
    if truncation_fraction >= 0.6 and truncation_fraction > physical_fraction:
        return "truncation"
    if physical_fraction < 0.4 and truncation_fraction < 0.4:
        return "bulk"
    return "unattributed"


# -- ladder and supersymmetry ---------------------------------------------------------


def ladder_identity_check(ref_a: ReferenceSpectrum, ref_b: ReferenceSpectrum, tol: float = 1e-12) -> list:
    """Check ``lambda_{m,theta} - 2 theta + 1 == lambda_{m-1,theta-1}`` for ``1 <= m <= m_max``."""
    theta = ref_a.theta
    if abs(ref_b.theta - (theta - 1.0)) > 1e-12:
        raise ValueError("second spectrum must belong to theta - 1")
    out = []
    for m in range(1, len(ref_a.discrete_levels)):
        lhs = ref_a.discrete_levels[m] - 2 * theta + 1
        rhs = ref_b.discrete_levels[m - 1] if m - 1 < len(ref_b.discrete_levels) else float("nan")
        out.append((m, lhs, rhs, bool(abs(lhs - rhs) <= tol)))
    return out


@dataclass
class SusyReport:
    theta: float
    threshold: float
    side_a: list  # nonzero values of spec(H_theta) - theta below threshold
    side_b: list  # values of spec(H_{theta-1}) + theta - 1 below threshold
    zero_modes: int
    max_mismatch: float
    unmatched: list
    passed: bool

    def to_dict(self) -> dict:
        return asdict(self)


def susy_partner_check(spec_a, spec_b, theta: float, tol: float, zero_tol: Optional[float] = None,
                       threshold: Optional[float] = None, cluster_tol: Optional[float] = None) -> SusyReport:
    """Compare the nonzero spectra of ``H_theta - theta`` and ``H_{theta-1} + theta - 1``.

    Only values below the common continuum edge ``1/4 + theta^2 - theta``
    (hyperbolic) are compared; values within ``zero_tol`` of zero on side A
    are kernel states and have no partner.
    """
    zero_tol = tol if zero_tol is None else zero_tol
    cluster_tol = tol if cluster_tol is None else cluster_tol
    thr = 0.25 + theta * theta - theta if threshold is None else threshold
    margin = 2 * tol
    a = np.asarray(spec_a, dtype=float) - theta
    b = np.asarray(spec_b, dtype=float) + theta - 1.0
    a = a[a < thr - margin]
    b = b[b < thr - margin]
    zeros = int(np.sum(np.abs(a) <= zero_tol))
    a = a[np.abs(a) > zero_tol]
    ca = [c.center for c in cluster_levels(a, cluster_tol)] if len(a) else []
    cb = [c.center for c in cluster_levels(b, cluster_tol)] if len(b) else []
    mismatch = 0.0
    unmatched = []
    for x in ca:
        d = min((abs(x - y) for y in cb), default=math.inf)
        if d > tol:
            unmatched.append(("A", x))
        mismatch = max(mismatch, d)
    for y in cb:
        d = min((abs(x - y) for x in ca), default=math.inf)
        if d > tol:
            unmatched.append(("B", y))
        mismatch = max(mismatch, d)
    return SusyReport(float(theta), float(thr), ca, cb, zeros, float(mismatch), unmatched, not unmatched)


def lower_bound_violations(eigenvalues, theta: float, tol: float) -> np.ndarray:
    """Eigenvalues below ``|theta| - tol``."""
    ev = np.asarray(eigenvalues, dtype=float)
    return ev[ev < abs(theta) - tol]
