"""Reduced eigenproblem on the basic domain with DtN boundary terms.

The branches are replaced by the boundary operators T_i(lam), whose
spectral coefficients on Gamma_i are g_n coth(g_n a_i).  For fixed lam
the linear problem

    (grad u, grad w) + sum_i (T_i(lam) u, w) = mu (u, w)

has a smallest eigenvalue mu_1(lam), nonincreasing in lam; a trapped mode
exists iff mu_1(pi^2) < pi^2 and then lam* = mu_1(lam*).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .eigensolver import PI2, SolverError, assemble, richardson, smallest_eigenpairs
from .geometry import Mesh, WaveguideSpec, generate_mesh
from .transverse import DEFAULT_MODES, UNIT, dtn_coefficient

log = logging.getLogger(__name__)

__all__ = [
    "BoundaryProjection", "ReducedProblem", "FixedPointResult", "boundary_projections",
    "mu1", "verify_monotone", "fixed_point", "summarize", "ReducedSummary", "MONOTONE_RTOL",
]

MONOTONE_RTOL = 1e-9
_DENSE_LIMIT = 3000
_GX, _GW = np.polynomial.legendre.leggauss(8)


@dataclass(frozen=True)
class BoundaryProjection:
    """Rows p_n with p_n . u = (u on Gamma_i, psi_n) for nodal P1 fields u."""
    branch: int
    P: np.ndarray            # (N, n_nodes), nonzero only on interface nodes
    nodes: np.ndarray        # interface node indices

    @property
    def N(self) -> int:
        return self.P.shape[0]


def boundary_projections(mesh: Mesh, N: int = DEFAULT_MODES) -> list[BoundaryProjection]:
    """Edgewise Gauss quadrature of hat functions against psi_1..psi_N."""
    out = []
    n = np.arange(1, N + 1)
    lam = (_GX + 1) / 2
    for i, (s, idx) in enumerate(mesh.interfaces):
        s = np.asarray(s)
        L = np.diff(s)
        q = s[:-1, None] + lam[None, :] * L[:, None]          # (edges, 8)
        w = _GW[None, :] * L[:, None] / 2
        psi = UNIT.psi(n[:, None, None], q[None])              # (N, edges, 8)
        left = np.sum(psi * (w * (1 - lam))[None], axis=2)     # hat of the left node
        right = np.sum(psi * (w * lam)[None], axis=2)
        P = np.zeros((N, mesh.n_nodes))
        np.add.at(P.T, idx[:-1], left.T)
        np.add.at(P.T, idx[1:], right.T)
        out.append(BoundaryProjection(i, P, np.asarray(idx)))
    return out


@dataclass(frozen=True)
class FixedPointResult:
    value: float | None
    iterations: int
    mu1_at_pi2: float
    history: tuple = ()

    @property
    def over_pi2(self):
        return None if self.value is None else self.value / PI2


class ReducedProblem:
    """K_Omega, M_Omega and the interface projections for one spec and mesh size.

    dtn maps (n, lam, a) to the boundary coefficient; the default is the
    exact g_n coth(g_n a).  Overriding it is only meant for negative controls.
    """

    def __init__(self, spec: WaveguideSpec, h: float, N: int = DEFAULT_MODES,
                 refine: int = 0, dtn=None):
        if N < 1:
            raise ValueError("truncation N must be >= 1")
        if not spec.branches:
            raise ValueError("reduced problem needs at least one branch")
        self.spec, self.h, self.N = spec, h, N
        self.mesh = generate_mesh(spec, h, region="basic_only", refine=refine)
        self.K, self.M = assemble(self.mesh)
        free = self.mesh.free
        self.projections = [p.P[:, free] for p in boundary_projections(self.mesh, N)]
        self.dtn = dtn or dtn_coefficient
        self.evaluations = 0

    @property
    def lengths(self):
        return self.spec.lengths

    def coefficients(self, lam: float) -> list[np.ndarray]:
        n = np.arange(1, self.N + 1)
        return [np.asarray(self.dtn(n, lam, a), dtype=float) for a in self.lengths]

    def boundary_matrix(self, lam: float):
        """B(lam) = sum_i P_i^T diag(c_i(lam)) P_i, sparse on interface dofs."""
        B = None
        for P, c in zip(self.projections, self.coefficients(lam)):
            Ps = sp.csr_matrix(P)
            term = Ps.T @ sp.diags(c) @ Ps
            B = term if B is None else B + term
        return B.tocsc()

    def mu1(self, lam: float) -> float:
        if not 0 < lam <= PI2 * (1 + 1e-12):
            raise ValueError(f"reduced problem needs 0 < lam <= pi^2, got {lam}")
        self.evaluations += 1
        A = (self.K + self.boundary_matrix(lam)).tocsc()
        coeffs = self.coefficients(lam)
        definite = all(np.all(c >= 0) for c in coeffs)
        if definite and A.shape[0] > 4:
            mu, _, _ = smallest_eigenpairs(A, self.M, k=1)
            return float(mu[0])
        if A.shape[0] > _DENSE_LIMIT:
            raise SolverError("indefinite boundary part on a large mesh")
        from scipy.linalg import eigh
        w = eigh(A.toarray(), self.M.toarray(), eigvals_only=True, subset_by_index=[0, 0])
        return float(w[0])

    def verify_monotone(self, grid, rtol: float = MONOTONE_RTOL):
        """(nonincreasing?, samples) for mu_1 on an increasing lam grid."""
        grid = np.asarray(grid, dtype=float)
        if np.any(np.diff(grid) <= 0):
            raise ValueError("lam grid must be strictly increasing")
        mus = np.array([self.mu1(x) for x in grid])
        ok = bool(np.all(np.diff(mus) <= rtol * np.abs(mus[1:])))
        return ok, list(zip(grid.tolist(), mus.tolist()))

    def fixed_point(self, tol: float = 1e-10, max_iter: int = 200) -> FixedPointResult:
        """Bisection on g(lam) = mu_1(lam) - lam over (lam_lo, pi^2]."""
        history = []

        def g(x):
            m = self.mu1(x)
            history.append((x, m))
            return m - x

        g_hi = g(PI2)
        mu_pi2 = g_hi + PI2
        if g_hi >= 0:
            return FixedPointResult(None, 0, mu_pi2, tuple(history))
        lo = PI2 / 2
        g_lo = g(lo)
        halvings = 0
        while g_lo <= 0:
            halvings += 1
            if halvings > 20:
                raise SolverError("no lam_lo with mu_1(lam_lo) > lam_lo after 20 halvings")
            lo /= 2
            g_lo = g(lo)
        hi = PI2
        it = 0
        mid, g_mid = hi, g_hi
        while abs(g_mid) >= tol * PI2 and it < max_iter:
            mid = 0.5 * (lo + hi)
            g_mid = g(mid)
            if g_mid > 0:
                lo = mid
            else:
                hi = mid
            it += 1
            if hi - lo <= 4 * np.finfo(float).eps * hi:
                break
        return FixedPointResult(mid, it, mu_pi2, tuple(history))


def mu1(lam: float, spec: WaveguideSpec, h: float, N: int = DEFAULT_MODES) -> float:
    return ReducedProblem(spec, h, N).mu1(lam)


def verify_monotone(spec: WaveguideSpec, h: float, N: int = DEFAULT_MODES, grid=None):
    grid = np.linspace(PI2 / 20, PI2, 20) if grid is None else grid
    return ReducedProblem(spec, h, N).verify_monotone(grid)


@dataclass
class ReducedSummary:
    mu1_at_pi2: float
    fixed_point: float | None
    iterations: int
    N: int
    h: float
    monotone_check: bool
    extrapolated: float | None = None
    samples: list = field(default_factory=list)

    def to_dict(self) -> dict:
        d = {"mu1_at_pi2": self.mu1_at_pi2, "fixed_point": self.fixed_point,
             "iterations": self.iterations, "N": self.N, "h": self.h,
             "monotone_check": self.monotone_check}
        if self.fixed_point is not None:
            d["fixed_point_over_pi2"] = self.fixed_point / PI2
        if self.extrapolated is not None:
            d["extrapolated"] = self.extrapolated
            d["extrapolated_over_pi2"] = self.extrapolated / PI2
        return d


def fixed_point(spec: WaveguideSpec, h: float, N: int = DEFAULT_MODES, tol: float = 1e-10,
                extrapolate: bool = False) -> FixedPointResult:
    """lam* with mu_1(lam*) = lam*, or value None when mu_1(pi^2) >= pi^2.

    With extrapolate the fixed points at h and h/2 are combined by Richardson.
    """
    res = ReducedProblem(spec, h, N).fixed_point(tol)
    if not extrapolate or res.value is None:
        return res
    fine = ReducedProblem(spec, h, N, refine=1).fixed_point(tol)
    if fine.value is None:
        return fine
    val = float(richardson(res.value, fine.value))
    return FixedPointResult(val, res.iterations + fine.iterations, fine.mu1_at_pi2,
                            fine.history)


def summarize(spec: WaveguideSpec, h: float, N: int = DEFAULT_MODES, grid_points: int = 20,
              tol: float = 1e-10, extrapolate: bool = False) -> ReducedSummary:
    prob = ReducedProblem(spec, h, N)
    ok, samples = prob.verify_monotone(np.linspace(PI2 / grid_points, PI2, grid_points))
    fp = prob.fixed_point(tol)
    extra = None
    if extrapolate and fp.value is not None:
        extra = fixed_point(spec, h, N, tol, extrapolate=True).value
    return ReducedSummary(fp.mu1_at_pi2, fp.value, fp.iterations, N, h, ok, extra, samples)

