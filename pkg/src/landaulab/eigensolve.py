"""Eigenvalue engines with residual certificates.

Tridiagonal problems go to LAPACK bisection + inverse iteration
(``scipy.linalg.eigh_tridiagonal``), with an independent Sturm-sequence
count certifying window completeness.  Sparse Hermitian operators use
shift-invert Lanczos (ARPACK) on a sparse LU factorization.  A window is
complete once the ``k`` eigenvalues nearest the shift include one outside
the window, so the search doubles ``k`` until that happens.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

log = logging.getLogger(__name__)

LOWEST = "lowest"
WINDOW = "window"


@dataclass(frozen=True)
class EigenRequest:
    mode: str
    count: int = 0
    lo: float = -np.inf
    hi: float = np.inf
    max_count: int = 500
    tolerance: float = 1e-8
    max_iterations: int = 10000
    vectors: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.mode == LOWEST and self.count < 1:
            raise ValueError("count must be at least 1")
        if self.mode == WINDOW:
            if not self.lo < self.hi:
                raise ValueError("window needs lo < hi")
            if self.max_count < 1:
                raise ValueError("max_count must be at least 1")
        if self.mode not in (LOWEST, WINDOW):
            raise ValueError(f"unknown mode {self.mode!r}")

    @classmethod
    def lowest(cls, count, **kw) -> "EigenRequest":
        return cls(LOWEST, count=int(count), **kw)

    @classmethod
    def window(cls, lo, hi, max_count=500, **kw) -> "EigenRequest":
        return cls(WINDOW, lo=float(lo), hi=float(hi), max_count=int(max_count), **kw)


@dataclass
class EigenResult:
    eigenvalues: np.ndarray
    residuals: np.ndarray
    converged: np.ndarray
    eigenvectors: Optional[np.ndarray] = None
    complete: bool = True
    meta: dict = field(default_factory=dict)

    @property
    def all_converged(self) -> bool:
        return bool(np.all(self.converged)) and self.complete

    def certified(self) -> np.ndarray:
        """Eigenvalues whose residual certificate passed."""
        return self.eigenvalues[self.converged]


def sturm_count(diagonal, offdiagonal, x: float) -> int:
    """Number of eigenvalues of the symmetric tridiagonal matrix strictly below ``x``."""
    d = np.asarray(diagonal, dtype=float)
    e2 = np.asarray(offdiagonal, dtype=float) ** 2
    tiny = np.finfo(float).tiny
    count = 0
    q = d[0] - x
    if q < 0:
        count += 1
    for i in range(1, len(d)):
        if q == 0:
            q = tiny
        q = d[i] - x - e2[i - 1] / q
        if q < 0:
            count += 1
    return count


def _residuals_tridiag(d, e, vals, vecs, norm):
    tv = d[:, None] * vecs
    tv[:-1] += e[:, None] * vecs[1:]
    tv[1:] += e[:, None] * vecs[:-1]
    return np.linalg.norm(tv - vecs * vals[None, :], axis=0) / norm


def solve_tridiagonal(problem, request: EigenRequest) -> EigenResult:
    """Dense symmetric tridiagonal solve; ``problem`` needs ``diagonal`` and ``offdiagonal``."""
    d = np.asarray(problem.diagonal, dtype=float)
    e = np.asarray(problem.offdiagonal, dtype=float)
    n = len(d)
    if n < 2:
        raise ValueError("need n >= 2")
    norm = max(float(np.max(np.abs(d) + np.r_[np.abs(e), 0] + np.r_[0, np.abs(e)])), np.finfo(float).tiny)
    complete = True
    if request.mode == LOWEST:
        top = min(request.count, n) - 1
        vals, vecs = sla.eigh_tridiagonal(d, e, select="i", select_range=(0, top))
    else:
        expected = sturm_count(d, e, np.nextafter(request.hi, np.inf)) - sturm_count(d, e, request.lo)
        if expected == 0:
            vals, vecs = np.empty(0), np.empty((n, 0))
        else:
            lo_i = sturm_count(d, e, request.lo)
            hi_i = min(lo_i + min(expected, request.max_count), n) - 1
            vals, vecs = sla.eigh_tridiagonal(d, e, select="i", select_range=(lo_i, hi_i))
            keep = (vals >= request.lo) & (vals <= request.hi)
            vals, vecs = vals[keep], vecs[:, keep]
        complete = len(vals) == expected
    res = _residuals_tridiag(d, e, vals, vecs, norm)
    conv = res <= request.tolerance
    return EigenResult(vals, res, conv, vecs if request.vectors else None, complete,
                       {"solver": "eigh_tridiagonal", "norm": norm})


def tridiagonal_to_sparse(problem) -> sp.csr_matrix:
    d = np.asarray(problem.diagonal, dtype=float)
    e = np.asarray(problem.offdiagonal, dtype=float)
    return sp.diags([e, d, e], [-1, 0, 1], format="csr")


def _norm_estimate(A) -> float:
    # max absolute row sum bounds the spectral norm of a Hermitian matrix
    return max(float(np.max(np.asarray(abs(A).sum(axis=1)).ravel())), np.finfo(float).tiny)


def _factor(A, sigma):
    n = A.shape[0]
    M = (A - sigma * sp.identity(n, dtype=A.dtype, format="csc")).tocsc()
    return spla.splu(M)


def eigs_window(op, request: EigenRequest, initial_k: int = 16) -> EigenResult:
    """Eigenpairs of a sparse Hermitian operator inside a window, or the lowest ``count``.

    ``op`` may be a scipy sparse matrix, a dense array, or any object with a
    ``matrix`` attribute.
    """
    A = getattr(op, "matrix", op)
    A = sp.csr_matrix(A)
    n = A.shape[0]
    norm = _norm_estimate(A)
    rng = np.random.default_rng(request.seed)
    dtype = np.complex128 if np.iscomplexobj(A.data) else np.float64

    if request.mode == LOWEST:
        # Gershgorin lower bound: the nearest eigenvalues to it are the lowest ones
        radii = np.asarray(abs(A).sum(axis=1)).ravel() - np.abs(A.diagonal())
        sigma = float(np.min(A.diagonal().real - radii)) - 1e-3 * norm
        want = min(request.count, n)
        radius = np.inf
    else:
        sigma = 0.5 * (request.lo + request.hi)
        radius = 0.5 * (request.hi - request.lo)
        want = min(max(initial_k, 4), request.max_count + 1, n)

    shifts = []
    lu = None
    for attempt in range(4):
        try:
            lu = _factor(A, sigma)
            break
        except RuntimeError:
            jitter = 1e-7 * (1 + attempt) * max(norm, 1.0) * (rng.random() - 0.5)
            log.info("singular shift %g, jittering by %g", sigma, jitter)
            sigma += jitter
    shifts.append(sigma)
    if lu is None:
        return EigenResult(np.empty(0), np.empty(0), np.empty(0, bool), None, False,
                           {"error": "factorization failed", "shifts": shifts, "seed": request.seed})
    opinv = spla.LinearOperator((n, n), matvec=lu.solve, dtype=dtype)

    complete = True
    while True:
        if want >= n - 1:
            vals, vecs = np.linalg.eigh(A.toarray())
            if request.mode == LOWEST:
                vals, vecs = vals[:want], vecs[:, :want]
            solver = "dense"
            break
        else:
            v0 = rng.standard_normal(n)
            if dtype is np.complex128:
                v0 = v0 + 1j * rng.standard_normal(n)
            ncv = min(n, max(2 * want + 1, want + 32))
            try:
                vals, vecs = spla.eigsh(A, k=want, sigma=sigma, OPinv=opinv, which="LM", v0=v0, ncv=ncv,
                                        tol=0.0, maxiter=request.max_iterations)
            except spla.ArpackNoConvergence as exc:
                vals, vecs = exc.eigenvalues, exc.eigenvectors
                complete = False
            solver = "shift-invert-lanczos"
        dist = np.abs(vals - sigma)
        if request.mode == LOWEST:
            break
        if len(vals) and dist.max() > radius:
            break
        if want > request.max_count:
            complete = False
            break
        want = min(2 * want, request.max_count + 1, n)

    order = np.argsort(vals)
    vals, vecs = vals[order], vecs[:, order]
    if request.mode == WINDOW:
        keep = (vals >= request.lo) & (vals <= request.hi)
        vals, vecs = vals[keep], vecs[:, keep]
        if len(vals) > request.max_count:
            vals, vecs = vals[: request.max_count], vecs[:, : request.max_count]
            complete = False
    res = np.linalg.norm(A @ vecs - vecs * vals[None, :], axis=0) / norm if len(vals) else np.empty(0)
    conv = res <= request.tolerance
    return EigenResult(vals, res, conv, vecs if request.vectors else None, complete,
                       {"solver": solver, "shifts": shifts, "seed": request.seed, "norm": norm})


def dense_window(op, lo: float, hi: float) -> np.ndarray:
    """Reference: all eigenvalues in ``[lo, hi]`` by full dense diagonalization."""
    A = getattr(op, "matrix", op)
    A = A.toarray() if sp.issparse(A) else np.asarray(A)
    vals = np.linalg.eigvalsh(A)
    return vals[(vals >= lo) & (vals <= hi)]
