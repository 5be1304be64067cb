"""Link-phase discretization of magnetic Laplacians on (perturbed) half-planes.

Nodes sit at cell centres of a uniform grid in mesh coordinates.  Every
edge ``i -> j`` carries the weight ``c = vol * g^{mu mu} / h_mu^2`` taken at
the edge midpoint and the unit-modulus link factor ``exp(-i a_ij)``, where
``a_ij`` is the midpoint-rule integral of ``A`` along the edge.  The
operator acting on functions ``f`` is

    (H f)_i = (1/w_i) sum_j c_ij (f_i - exp(-i a_ij) f_j),

with ``w_i`` the node volume weight, and is stored symmetrized as
``W^{1/2} H W^{-1/2}``.  A neighbour missing across the physical boundary
acts as a ghost node (Dirichlet ``-f_i``, Neumann ``+f_i``); missing
neighbours outside the box are always Dirichlet ghosts.

Upper-half-plane meshes use the coordinates ``(x, u = ln y)``.  A mesh may
be periodic in the second coordinate; assembly then takes a Bloch phase
``phi`` with ``f(q2 + period) = exp(i phi) f(q2)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .channels import DIRICHLET, parse_bc
from .geometry import Chart, DomainError, GaugeChart, geodesic_distance_array

INTERIOR = 0
PHYSICAL = 1
TRUNCATION = 2


@dataclass(frozen=True)
class BoundaryProfile:
    """The boundary ``q1 = height(q2)`` of ``W = {q1 >= height(q2)}``.

    ``kind`` is one of ``none`` (no physical boundary), ``geodesic``
    (``q1 = 0``), ``sinusoidal`` (``amplitude * sin(2 pi q2 / wavelength)``)
    or ``step`` (``heights[i]`` on ``[breaks[i], breaks[i+1])``).
    """

    kind: str = "geodesic"
    amplitude: float = 0.0
    wavelength: float = 1.0
    breaks: tuple = ()
    heights: tuple = ()

    def __post_init__(self):
        if self.kind not in ("none", "geodesic", "sinusoidal", "step"):
            raise ValueError(f"unknown profile kind {self.kind!r}")
        if self.kind == "sinusoidal" and not self.wavelength > 0:
            raise ValueError("wavelength must be positive")
        if self.kind == "step" and (len(self.breaks) != len(self.heights) or not self.breaks):
            raise ValueError("step profile needs matching breaks and heights")

    @classmethod
    def none(cls):
        return cls("none")

    @classmethod
    def geodesic(cls):
        return cls("geodesic")

    @classmethod
    def sinusoidal(cls, amplitude, wavelength):
        return cls("sinusoidal", float(amplitude), float(wavelength))

    @classmethod
    def step(cls, breaks, heights):
        return cls("step", breaks=tuple(map(float, breaks)), heights=tuple(map(float, heights)))

    @property
    def has_boundary(self) -> bool:
        return self.kind != "none"

    def height(self, q2) -> np.ndarray:
        q2 = np.asarray(q2, dtype=float)
        if self.kind == "none":
            return np.full(q2.shape, -np.inf)
        if self.kind == "geodesic":
            return np.zeros(q2.shape)
        if self.kind == "sinusoidal":
            return self.amplitude * np.sin(2 * np.pi * q2 / self.wavelength)
        idx = np.clip(np.searchsorted(np.asarray(self.breaks), q2, side="right") - 1, 0, len(self.breaks) - 1)
        return np.asarray(self.heights)[idx]

    def describe(self) -> dict:
        out = {"kind": self.kind}
        if self.kind == "sinusoidal":
            out.update(amplitude=self.amplitude, wavelength=self.wavelength)
        if self.kind == "step":
            out.update(breaks=list(self.breaks), heights=list(self.heights))
        return out

    def is_geodesic(self) -> bool:
        return self.kind == "geodesic" or (self.kind == "sinusoidal" and self.amplitude == 0.0)


@dataclass
class DomainMesh:
    chart: GaugeChart
    profile: BoundaryProfile
    m1: np.ndarray  # node lines, mesh coordinates
    m2: np.ndarray
    h1: float
    h2: float
    box: tuple  # ((m1_lo, m1_hi), (m2_lo, m2_hi)) in mesh coordinates
    inside: np.ndarray  # (n1, n2) bool
    index: np.ndarray  # (n1, n2) int, -1 outside W
    kind: np.ndarray  # per node: INTERIOR / PHYSICAL / TRUNCATION
    periodic: bool = False
    log_q2: bool = False

    @property
    def size(self) -> int:
        return int(self.inside.sum())

    @property
    def shape(self) -> tuple:
        return self.inside.shape

    @property
    def period(self) -> float:
        return self.box[1][1] - self.box[1][0]

    def to_chart(self, m1, m2):
        m2 = np.asarray(m2, dtype=float)
        return np.asarray(m1, dtype=float), (np.exp(m2) if self.log_q2 else m2)

    def node_coords(self):
        """Chart coordinates of the nodes in W, in operator ordering."""
        I, J = np.nonzero(self.inside)
        return self.to_chart(self.m1[I], self.m2[J])

    def node_mesh_coords(self):
        I, J = np.nonzero(self.inside)
        return self.m1[I], self.m2[J]

    def metric(self, m1, m2):
        """``(g11, g22, vol)`` in mesh coordinates."""
        q1, q2 = self.to_chart(m1, m2)
        g11, g22, vol = self.chart.metric(q1, q2)
        if self.log_q2:
            # dq2/du = q2
            return g11, g22 * q2**2, vol * q2
        return g11, g22, vol

    def potential(self, m1, m2, gauge_gradient=None):
        q1, q2 = self.to_chart(m1, m2)
        a1, a2 = self.chart.potential(q1, q2)
        if gauge_gradient is not None:
            d1, d2 = gauge_gradient(q1, q2)
            a1 = a1 + d1
            a2 = a2 + d2
        if self.log_q2:
            a2 = a2 * q2
        return a1, a2

    @property
    def volume_weights(self) -> np.ndarray:
        return self.metric(*self.node_mesh_coords())[2]

    def nodes_of_kind(self, kind) -> np.ndarray:
        return self.kind == kind

    # -- distances -----------------------------------------------------------
    def distance_to_physical_boundary(self) -> np.ndarray:
        """Geodesic distance from every node in W to the physical boundary curve."""
        if not self.profile.has_boundary:
            raise DomainError("mesh has no physical boundary")
        q1, q2 = self.node_coords()
        ch = self.chart
        if self.profile.is_geodesic():
            if ch.chart is Chart.FERMI or ch.chart is Chart.CARTESIAN:
                return np.abs(q1)
            if ch.chart is Chart.UPPER_HALF_PLANE:
                return np.arcsinh(np.abs(q1) / q2)
        # sample the curve at a quarter of the finer spacing
        lo, hi = self.box[1]
        if self.periodic:
            lo, hi = lo - self.period, hi + self.period
        step = 0.25 * min(self.h1, self.h2)
        c2 = np.linspace(lo, hi, int(np.ceil((hi - lo) / step)) + 1)
        c1 = self.profile.height(c2 if not self.periodic else self._wrap(c2))
        cq1, cq2 = self.to_chart(c1, c2)
        return _min_distance(ch, q1, q2, cq1, cq2)

    def distance_to_truncation_boundary(self) -> np.ndarray:
        """Distance to the nearest truncation-boundary node (``inf`` if there is none)."""
        q1, q2 = self.node_coords()
        mask = self.kind == TRUNCATION
        if not mask.any():
            return np.full(len(q1), np.inf)
        return _min_distance(self.chart, q1, q2, q1[mask], q2[mask])

    def _wrap(self, m2):
        lo = self.box[1][0]
        return lo + np.mod(m2 - lo, self.period)


def _min_distance(chart, q1, q2, c1, c2, chunk=256):
    out = np.full(len(q1), np.inf)
    for start in range(0, len(c1), chunk):
        d = geodesic_distance_array(chart, q1[:, None], q2[:, None], c1[None, start:start + chunk],
                                    c2[None, start:start + chunk])
        out = np.minimum(out, d.min(axis=1))
    return out


def build_domain(chart: GaugeChart, region, profile: BoundaryProfile = None, h=None, shape=None,
                 periodic: bool = False) -> DomainMesh:
    """Cell-centred mesh of ``W = {q1 >= profile(q2)}`` inside a coordinate box.

    ``region = ((q1_lo, q1_hi), (q2_lo, q2_hi))`` in chart coordinates.  On
    the upper half-plane chart the second coordinate is meshed in
    ``ln y``.  Give either a spacing ``h`` (scalar or pair, in mesh
    coordinates) or a node count ``shape = (n1, n2)``.
    """
    profile = profile if profile is not None else BoundaryProfile.geodesic()
    (a1, b1), (a2, b2) = (tuple(map(float, r)) for r in region)
    if not (a1 < b1 and a2 < b2):
        raise DomainError("empty coordinate box")
    log_q2 = chart.chart is Chart.UPPER_HALF_PLANE
    if log_q2:
        if a2 <= 0:
            raise DomainError("upper half-plane box needs y > 0")
        a2, b2 = np.log(a2), np.log(b2)
    if shape is not None:
        n1, n2 = (int(v) for v in shape)
    elif h is not None:
        h_1, h_2 = (h, h) if np.isscalar(h) else h
        if not (h_1 > 0 and h_2 > 0):
            raise DomainError("spacing must be positive")
        n1 = max(1, int(round((b1 - a1) / h_1)))
        n2 = max(1, int(round((b2 - a2) / h_2)))
    else:
        raise ValueError("give h or shape")
    if periodic and n2 < 3:
        raise DomainError("periodic meshes need at least 3 nodes along q2")
    h1 = (b1 - a1) / n1
    h2 = (b2 - a2) / n2
    m1 = a1 + (np.arange(n1) + 0.5) * h1
    m2 = a2 + (np.arange(n2) + 0.5) * h2

    probe1 = np.array([a1, b1, a1, b1])
    probe2 = np.array([a2, a2, b2, b2])
    pq1, pq2 = (probe1, np.exp(probe2)) if log_q2 else (probe1, probe2)
    if chart.chart is Chart.GEODESIC_POLAR:
        pq1 = np.where(pq1 == a1, m1[0], pq1)  # the box face itself may touch the pole
    if not np.all(chart.valid(pq1, pq2)):
        raise DomainError("coordinate box leaves the chart validity region")

    M1, M2 = np.meshgrid(m1, m2, indexing="ij")
    inside = M1 >= profile.height(M2)
    if not inside.any():
        raise DomainError("no mesh node lies in W")
    index = -np.ones(inside.shape, dtype=int)
    index[inside] = np.arange(int(inside.sum()))

    kind_grid = np.full(inside.shape, INTERIOR)
    for _, _, src, nb_kind in _neighbours(inside, profile, m1, m2, h1, h2, periodic):
        phys = nb_kind == PHYSICAL
        trunc = nb_kind == TRUNCATION
        kind_grid[src[0][phys], src[1][phys]] = PHYSICAL
        t_only = trunc & (kind_grid[src[0], src[1]] != PHYSICAL)
        kind_grid[src[0][t_only], src[1][t_only]] = TRUNCATION
    return DomainMesh(chart, profile, m1, m2, h1, h2, ((a1, b1), (a2, b2)), inside, index,
                      kind_grid[inside], periodic, log_q2)


def _neighbours(inside, profile, m1, m2, h1, h2, periodic):
    """For each of the four directions yield ``(direction, wrapped, source, neighbour kind)``.

    The neighbour kind is ``INTERIOR`` for an existing node in W, ``PHYSICAL``
    for a neighbour across the profile and ``TRUNCATION`` for a neighbour
    outside the box on the W side.
    """
    n1, n2 = inside.shape
    I, J = np.nonzero(inside)
    for d1, d2 in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        i2 = I + d1
        j2 = J + d2
        wrapped = np.zeros(len(I), dtype=bool)
        if periodic and d2:
            wrapped = (j2 < 0) | (j2 >= n2)
            j2 = np.mod(j2, n2)
        inbox = (i2 >= 0) & (i2 < n1) & (j2 >= 0) & (j2 < n2)
        exists = np.zeros(len(I), dtype=bool)
        exists[inbox] = inside[i2[inbox], j2[inbox]]
        # position of the missing neighbour decides its nature
        p1 = m1[0] + i2 * h1
        p2 = m2[0] + j2 * h2
        across = p1 < profile.height(p2)
        nb = np.where(exists, INTERIOR, np.where(across, PHYSICAL, TRUNCATION))
        yield (d1, d2), wrapped, (I, J), nb


@dataclass
class SparseHermitianOperator:
    matrix: sp.csr_matrix
    weights: np.ndarray
    mesh: Optional[DomainMesh] = None
    meta: dict = field(default_factory=dict)

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def physical(self, g) -> np.ndarray:
        """Map symmetrized eigenvectors back to function values ``f = W^{-1/2} g``."""
        g = np.asarray(g)
        scale = 1.0 / np.sqrt(self.weights)
        return g * (scale[:, None] if g.ndim == 2 else scale)

    def conjugate(self) -> "SparseHermitianOperator":
        return replace(self, matrix=self.matrix.conj().tocsr(), meta={**self.meta, "conjugated": True})

    def hermiticity_defect(self) -> float:
        diff = self.matrix - self.matrix.conj().T
        return float(abs(diff).max()) if diff.nnz else 0.0

    def dump(self, path) -> Path:
        """Write ``row col re im`` lines plus a ``.json`` metadata sidecar."""
        path = Path(path)
        coo = self.matrix.tocoo()
        order = np.lexsort((coo.col, coo.row))
        data = np.column_stack([coo.row[order], coo.col[order], coo.data.real[order], coo.data.imag[order]])
        np.savetxt(path, data, fmt=["%d", "%d", "%.17g", "%.17g"])
        meta = {"dimension": self.dimension, "nnz": int(coo.nnz), "format": "row col re im (0-based)",
                **{k: v for k, v in self.meta.items() if _jsonable(v)}}
        path.with_suffix(".json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
        return path

    @classmethod
    def load(cls, path) -> "SparseHermitianOperator":
        path = Path(path)
        meta = json.loads(path.with_suffix(".json").read_text())
        data = np.loadtxt(path, ndmin=2)
        n = meta["dimension"]
        mat = sp.csr_matrix((data[:, 2] + 1j * data[:, 3], (data[:, 0].astype(int), data[:, 1].astype(int))),
                            shape=(n, n))
        return cls(mat, np.ones(n), None, meta)


def _jsonable(v):
    try:
        json.dumps(v)
        return True
    except TypeError:
        return False


def _hermitian(n, rows, cols, vals, diag):
    """Assemble from strictly off-diagonal upper entries so that ``H == H^H`` bitwise."""
    upper = rows < cols
    r = np.where(upper, rows, cols)
    c = np.where(upper, cols, rows)
    v = np.where(upper, vals, np.conj(vals))
    U = sp.coo_matrix((v, (r, c)), shape=(n, n)).tocsr()
    U.sum_duplicates()
    H = U + U.conj().T + sp.diags(diag.astype(complex), format="csr")
    H = H.tocsr()
    H.sort_indices()
    return H


def assemble_magnetic_laplacian(mesh: DomainMesh, theta: Optional[float] = None, bc=DIRICHLET,
                                bloch_phase: float = 0.0,
                                gauge_gradient: Optional[Callable] = None) -> SparseHermitianOperator:
    """Symmetrized link-phase magnetic Laplacian on the mesh.

    ``gauge_gradient(q1, q2) -> (d1chi, d2chi)`` (chart coordinates) is added
    to the chart gauge before integrating along edges.
    """
    bc = parse_bc(bc)
    if theta is not None and float(theta) != mesh.chart.theta:
        mesh = replace(mesh, chart=mesh.chart.with_theta(theta))
    theta = mesh.chart.theta
    n = mesh.size
    w = mesh.volume_weights
    diag = np.zeros(n)
    rows, cols, vals = [], [], []
    ghost = 2.0 if bc == DIRICHLET else 0.0
    for (d1, d2), wrapped, (I, J), nb in _neighbours(mesh.inside, mesh.profile, mesh.m1, mesh.m2,
                                                     mesh.h1, mesh.h2, mesh.periodic):
        mid1 = mesh.m1[I] + 0.5 * d1 * mesh.h1
        mid2 = mesh.m2[J] + 0.5 * d2 * mesh.h2
        g11, g22, vol = mesh.metric(mid1, mid2)
        a1, a2 = mesh.potential(mid1, mid2, gauge_gradient)
        if d1:
            c = vol / (g11 * mesh.h1**2)
            a = a1 * d1 * mesh.h1
        else:
            c = vol / (g22 * mesh.h2**2)
            a = a2 * d2 * mesh.h2
        src = mesh.index[I, J]
        diag_add = np.where(nb == INTERIOR, c,
                            np.where(nb == PHYSICAL, ghost * c, 2.0 * c))
        np.add.at(diag, src, diag_add / w[src])
        # each existing edge is entered once, from its forward end
        forward = (nb == INTERIOR) & ((d1 > 0) | (d2 > 0))
        if forward.any():
            i2 = np.mod(I + d1, mesh.shape[0]) if d1 else I
            j2 = np.mod(J + d2, mesh.shape[1])
            dst = mesh.index[i2[forward], j2[forward]]
            link = np.exp(-1j * a[forward])
            if mesh.periodic and d2:
                link = link * np.where(wrapped[forward], np.exp(1j * d2 * bloch_phase), 1.0)
            s = src[forward]
            rows.append(s)
            cols.append(dst)
            vals.append(-c[forward] * link / np.sqrt(w[s] * w[dst]))
    rows = np.concatenate(rows) if rows else np.empty(0, int)
    cols = np.concatenate(cols) if cols else np.empty(0, int)
    vals = np.concatenate(vals) if vals else np.empty(0, complex)
    H = _hermitian(n, rows, cols, vals, diag)
    meta = {"theta": theta, "bc": bc, "profile": mesh.profile.describe(), "chart": mesh.chart.chart.value,
            "geometry": mesh.chart.geometry.value, "shape": list(mesh.shape), "h": [mesh.h1, mesh.h2],
            "periodic": mesh.periodic, "bloch_phase": float(bloch_phase)}
    return SparseHermitianOperator(H, w, mesh, meta)


def gauge_transform(op: SparseHermitianOperator, chi) -> SparseHermitianOperator:
    """Conjugate by the diagonal unitary ``exp(i chi)``."""
    chi = np.asarray(chi, dtype=float)
    if chi.shape != (op.dimension,):
        raise ValueError("chi must give one value per node")
    coo = sp.triu(op.matrix, k=1).tocoo()
    phase = np.exp(1j * (chi[coo.row] - chi[coo.col]))
    H = _hermitian(op.dimension, coo.row, coo.col, coo.data * phase, op.matrix.diagonal().real)
    return replace(op, matrix=H, meta={**op.meta, "gauge_transformed": True})


def plaquette_link_fluxes(op: SparseHermitianOperator) -> np.ndarray:
    """Loop sums ``-arg`` of link products around every fully interior plaquette.

    With link factors ``exp(-i a)`` the loop sum of ``a`` is the magnetic
    flux, ``theta * area`` up to midpoint-rule error, wrapped into ``(-pi, pi]``.
    """
    mesh = op.mesh
    H = op.matrix
    idx = mesh.index
    n1, n2 = mesh.shape
    jmax = n2 if mesh.periodic else n2 - 1
    out = []
    for i in range(n1 - 1):
        for j in range(jmax):
            jn = (j + 1) % n2
            a, b, c, d = idx[i, j], idx[i + 1, j], idx[i + 1, jn], idx[i, jn]
            if min(a, b, c, d) < 0:
                continue
            # symmetrized entries H_ij = -c exp(-i a_ij) / sqrt(w_i w_j); the positive prefactor drops out
            prod = (-H[a, b]) * (-H[b, c]) * (-H[c, d]) * (-H[d, a])
            out.append(-np.angle(prod))
    return np.array(out)


def plaquette_areas(mesh: DomainMesh) -> np.ndarray:
    """Exact areas of the node plaquettes matching :func:`plaquette_link_fluxes` ordering."""
    n1, n2 = mesh.shape
    jmax = n2 if mesh.periodic else n2 - 1
    out = []
    for i in range(n1 - 1):
        for j in range(jmax):
            jn = (j + 1) % n2
            if min(mesh.index[i, j], mesh.index[i + 1, j], mesh.index[i + 1, jn], mesh.index[i, jn]) < 0:
                continue
            lo2 = mesh.m2[j]
            hi2 = lo2 + mesh.h2
            q1a, q1b = mesh.m1[i], mesh.m1[i + 1]
            _, y_lo = mesh.to_chart(0.0, lo2)
            _, y_hi = mesh.to_chart(0.0, hi2)
            out.append(float(mesh.chart.plaquette_area(q1a, q1b, y_lo, y_hi)))
    return np.array(out)
