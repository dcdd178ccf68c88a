"""P1 finite elements for the Dirichlet Laplacian on a full waveguide."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .geometry import Mesh, WaveguideSpec, generate_mesh
from .transverse import decay_profile, fit_decay_rate, loglinear_slope

log = logging.getLogger(__name__)

PI2 = math.pi ** 2
DEGENERATE_RTOL = 1e-8

__all__ = [
    "SolverError", "BracketError", "SpectrumResult", "assemble", "element_matrices",
    "smallest_eigenpairs", "solve_mesh", "solve_domain", "find_a_min",
    "localization_verdict", "richardson", "default_h", "PI2",
]


class SolverError(RuntimeError):
    pass


class BracketError(ValueError):
    """lambda_1 - pi^2 has the same sign at both ends of the bracket."""


def element_matrices(mesh: Mesh):
    """Full (unconstrained) P1 stiffness and lumped-free mass matrices."""
    p = mesh.nodes[mesh.triangles]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    area = 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
    if np.any(area < 1e-14):
        raise SolverError(f"degenerate triangle (min area {area.min():.3e})")
    # edge vectors opposite each vertex
    e = np.stack([p[:, 2] - p[:, 1], p[:, 0] - p[:, 2], p[:, 1] - p[:, 0]], axis=1)
    Ke = np.einsum("tik,tjk->tij", e, e) / (4 * area)[:, None, None]
    Me = (np.ones((3, 3)) + np.eye(3))[None] * (area / 12)[:, None, None]
    rows = np.repeat(mesh.triangles, 3, axis=1).ravel()
    cols = np.tile(mesh.triangles, (1, 3)).ravel()
    n = mesh.n_nodes
    K = sp.coo_matrix((Ke.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    M = sp.coo_matrix((Me.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    return K, M


def assemble(mesh: Mesh, eliminate: bool = True):
    """Stiffness and mass matrices; Dirichlet rows/columns removed if eliminate."""
    K, M = element_matrices(mesh)
    if not eliminate:
        return K, M
    free = mesh.free
    return K[free][:, free].tocsc(), M[free][:, free].tocsc()


def _start_vector(n, seed=12345):
    # fixed linear congruential fill, bit-reproducible across platforms
    a, c, m = 1103515245, 12345, 2 ** 31
    x = np.empty(n)
    state = seed
    for k in range(min(n, 64)):
        state = (a * state + c) % m
        x[k] = state / m
    if n > 64:
        x[64:] = np.resize(x[:64], n - 64) + np.linspace(0, 1, n - 64)
    return x - 0.25


@dataclass
class SpectrumResult:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray        # node-indexed, shape (n_nodes, k)
    h: float
    residuals: np.ndarray
    mesh: Mesh | None = None
    extrapolated: np.ndarray | None = None
    coarse: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)

    @property
    def over_pi2(self) -> np.ndarray:
        return self.eigenvalues / PI2

    @property
    def best(self) -> np.ndarray:
        """Extrapolated eigenvalues when available, else the raw ones."""
        return self.extrapolated if self.extrapolated is not None else self.eigenvalues

    @property
    def best_over_pi2(self) -> np.ndarray:
        return self.best / PI2

    @property
    def degenerate_pairs(self):
        lam = self.eigenvalues
        return [(k, k + 1) for k in range(len(lam) - 1)
                if abs(lam[k + 1] - lam[k]) <= DEGENERATE_RTOL * abs(lam[k])]


def smallest_eigenpairs(K, M, k: int = 1, tol: float = 1e-8, sigma: float = 0.0):
    """k smallest eigenpairs of K x = lam M x by shift-invert Lanczos.

    Returns (eigenvalues, vectors with x^T M x = 1, residual norms).
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    n = K.shape[0]
    if k >= n - 1:
        lam, X = _dense(K, M)
        lam, X = lam[:k], X[:, :k]
    else:
        try:
            lu = spla.splu(sp.csc_matrix(K - sigma * M), permc_spec="COLAMD")
        except RuntimeError as exc:
            raise SolverError(f"factorization failed: {exc}") from exc
        op = spla.LinearOperator((n, n), matvec=lu.solve, dtype=float)
        ncv = min(n, max(2 * k + 1, 20))
        try:
            lam, X = spla.eigsh(K, k=k, M=M, sigma=sigma, which="LM", OPinv=op,
                                v0=_start_vector(n), tol=1e-13, ncv=ncv, maxiter=5000)
        except spla.ArpackNoConvergence as exc:
            raise SolverError(f"no convergence: {exc}") from exc
        order = np.argsort(lam)
        lam, X = lam[order], X[:, order]
    # M-normalize and fix sign (largest component positive) for determinism
    for j in range(X.shape[1]):
        x = X[:, j]
        x = x / math.sqrt(float(x @ (M @ x)))
        if x[np.argmax(np.abs(x))] < 0:
            x = -x
        X[:, j] = x
    R = K @ X - (M @ X) * lam
    res = np.linalg.norm(R, axis=0) / np.linalg.norm(X, axis=0)
    if np.any(res > tol * max(1.0, float(np.max(np.abs(lam))))):
        log.warning("eigen residuals %s exceed tol %g", res, tol)
    return lam, X, res


def _dense(K, M):
    from scipy.linalg import eigh
    return eigh(K.toarray(), M.toarray())


def solve_mesh(mesh: Mesh, k: int = 1, tol: float = 1e-8) -> SpectrumResult:
    K, M = assemble(mesh)
    lam, X, res = smallest_eigenpairs(K, M, k, tol)
    full = np.zeros((mesh.n_nodes, k))
    full[mesh.free] = X
    return SpectrumResult(lam, full, mesh.h, res, mesh, metadata=dict(mesh.metadata))


def richardson(coarse, fine):
    """Cancel the O(h^2) term from eigenvalues at h and h/2."""
    return (4.0 * np.asarray(fine) - np.asarray(coarse)) / 3.0


def default_h(spec: WaveguideSpec) -> float:
    return 1 / 48 if spec.basic.kind == "quarter_disk" else 1 / 32


def solve_domain(spec: WaveguideSpec, h: float | None = None, k: int = 1,
                 extrapolate: bool = True, tol: float = 1e-8) -> SpectrumResult:
    """Eigenpairs on the mesh at h/2, with Richardson values from (h, h/2).

    The returned eigenvectors live on the finer mesh.
    """
    h = default_h(spec) if h is None else h
    if not extrapolate:
        return solve_mesh(generate_mesh(spec, h), k, tol)
    coarse = solve_mesh(generate_mesh(spec, h), k, tol)
    fine = solve_mesh(generate_mesh(spec, h, refine=1), k, tol)
    fine.coarse = coarse.eigenvalues
    fine.extrapolated = richardson(coarse.eigenvalues, fine.eigenvalues)
    fine.metadata["h_coarse"] = h
    fine.metadata["extrapolation_error"] = np.abs(fine.extrapolated - fine.eigenvalues)
    return fine


def find_a_min(family, bracket, h: float | None = None, atol: float = 5e-3,
               max_iter: int = 60):
    """Branch length where the extrapolated lambda_1(a) crosses pi^2.

    family maps a length to a WaveguideSpec; lambda_1 decreases with a.
    Returns (a_min, history) with history a list of (a, lambda_1/pi^2).
    """
    history = []

    def g(a):
        spec = family(a)
        r = solve_domain(spec, h, k=1)
        val = float(r.best[0] / PI2)
        history.append((a, val))
        log.info("a = %.6f  lambda_1/pi^2 = %.6f", a, val)
        return val - 1.0

    lo, hi = map(float, bracket)
    glo, ghi = g(lo), g(hi)
    if glo * ghi > 0:
        raise BracketError(f"no sign change on [{lo}, {hi}]: "
                           f"lambda_1/pi^2 - 1 = {glo:.4g}, {ghi:.4g}")
    it = 0
    while hi - lo > atol and it < max_iter:
        mid = 0.5 * (lo + hi)
        gm = g(mid)
        if gm == 0:
            return mid, history
        if (gm > 0) == (glo > 0):
            lo, glo = mid, gm
        else:
            hi, ghi = mid, gm
        it += 1
    # linear interpolation inside the final bracket
    a = lo - glo * (hi - lo) / (ghi - glo)
    return a, history


@dataclass
class ModeVerdict:
    index: int
    eigenvalue: float
    trapped: bool
    profiles: list = field(default_factory=list)   # per branch (x, I)
    slopes: list = field(default_factory=list)      # log-linear mid-branch slopes
    rates: list = field(default_factory=list)       # fitted sinh-model decay rates

    @property
    def over_pi2(self):
        return self.eigenvalue / PI2


def localization_verdict(result: SpectrumResult, spec: WaveguideSpec | None = None,
                         nu1: float = PI2):
    """Trapped iff lambda_k < nu_1; trapped modes get decay profiles per branch."""
    spec = spec or result.mesh.spec
    lam = result.best
    out = []
    for j, val in enumerate(lam):
        v = ModeVerdict(j, float(val), bool(val < nu1))
        if v.trapped and result.mesh is not None and result.mesh.branch_grids:
            vec = result.eigenvectors[:, j]
            for i, br in enumerate(spec.branches):
                x, I = decay_profile(result.mesh, vec, i)
                v.profiles.append((x, I))
                v.slopes.append(loglinear_slope(x, I, br.length))
                v.rates.append(fit_decay_rate(x, I, br.length))
        out.append(v)
    return out
