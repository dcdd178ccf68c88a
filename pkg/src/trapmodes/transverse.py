"""Cross-section analysis of a rectangular branch.

Mode functions psi_n(s) = sqrt(2/b) sin(pi n s / b) with energies
nu_n = (pi n / b)^2.  A trace with coefficients c_n = (U, psi_n) on the
interface continues into a branch of length a as

    u(t, s) = sum_n c_n sinh(g_n (a - t)) / sinh(g_n a) psi_n(s),
    g_n = sqrt(nu_n - lam),

with sin in place of sinh for the oscillatory modes lam > nu_n.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "TransverseBasis", "BranchTrace", "UNIT", "gamma", "dtn_coefficient",
    "evaluate_branch_mode", "trace_coefficients", "cross_section_norm",
    "decay_profile", "fit_decay_rate", "loglinear_slope", "decay_rate_bound",
    "DEFAULT_MODES",
]

DEFAULT_MODES = 32
_TAYLOR_CUTOFF = 1e-4


@dataclass(frozen=True)
class TransverseBasis:
    width: float = 1.0

    def __post_init__(self):
        if not self.width > 0:
            raise ValueError("cross-section width must be positive")

    def nu(self, n):
        n = np.asarray(n, dtype=float)
        return (np.pi * n / self.width) ** 2

    def psi(self, n, s):
        n = np.asarray(n, dtype=float)
        return math.sqrt(2.0 / self.width) * np.sin(np.pi * n * np.asarray(s) / self.width)


UNIT = TransverseBasis(1.0)


@dataclass(frozen=True)
class BranchTrace:
    """Mode coefficients c_n = (U|Gamma_i, psi_n) of one interface trace."""
    branch: int
    coeffs: np.ndarray
    basis: TransverseBasis = UNIT

    @property
    def N(self) -> int:
        return len(self.coeffs)

    @property
    def tail(self) -> float:
        return float(abs(self.coeffs[-1])) if self.N else 0.0


def gamma(n, lam, basis: TransverseBasis = UNIT):
    """Longitudinal exponent of mode n.

    Returns (magnitude, oscillatory): magnitude is sqrt(nu_n - lam) when
    lam <= nu_n, otherwise sqrt(lam - nu_n) with oscillatory set.
    """
    d = basis.nu(n) - lam
    osc = d < 0
    mag = np.sqrt(np.abs(d))
    if np.ndim(mag) == 0:
        return float(mag), bool(osc)
    return mag, osc


def _x_coth(g, a):
    """g * coth(g a), continuous at g = 0 where it equals 1/a."""
    g = np.asarray(g, dtype=float)
    ga = g * a
    small = np.abs(ga) < _TAYLOR_CUTOFF
    out = np.empty_like(ga)
    big = ~small
    out[big] = g[big] / np.tanh(ga[big])
    z = ga[small] ** 2
    out[small] = (1.0 + z / 3.0 - z * z / 45.0) / a
    return out


def dtn_coefficient(n, lam, a, basis: TransverseBasis = UNIT):
    """Spectral coefficient g_n coth(g_n a) of the branch DtN operator.

    Valid for lam <= nu_n; at g_n = 0 this is the removable limit 1/a.
    """
    if not a > 0:
        raise ValueError(f"branch length must be positive, got {a}")
    d = basis.nu(n) - np.asarray(lam, dtype=float)
    if np.any(d < -1e-12 * np.maximum(1.0, np.abs(basis.nu(n)))):
        raise ValueError("dtn_coefficient requires lam <= nu_n")
    out = _x_coth(np.sqrt(np.maximum(d, 0.0)), a)
    return float(out) if out.ndim == 0 else out


def evaluate_branch_mode(trace: BranchTrace, lam, a, x, y):
    """Field in the branch at distance x from the interface, across-coordinate y."""
    if trace.N == 0:
        raise ValueError("empty trace (N = 0)")
    n = np.arange(1, trace.N + 1)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    g, osc = gamma(n, lam, trace.basis)
    g = np.atleast_1d(g)
    osc = np.atleast_1d(osc)
    xb = x[..., None]
    ratio = np.empty(np.broadcast_shapes(xb.shape, g.shape))
    ex = g * a
    with np.errstate(over="ignore", invalid="ignore"):
        # sinh(g(a-x))/sinh(g a) written stably as exp(-g x)(1-e^{-2g(a-x)})/(1-e^{-2ga})
        decay = np.exp(-g * xb) * (-np.expm1(-2 * g * (a - xb))) / (-np.expm1(-2 * ex))
        linear = (a - xb) / a + 0 * g
        wave = np.sin(g * (a - xb)) / np.sin(ex)
    zero = g * a < 1e-12
    ratio = np.where(osc, wave, np.where(zero, linear, decay))
    modes = trace.basis.psi(n, y[..., None])
    return np.sum(trace.coeffs * ratio * modes, axis=-1)


def trace_coefficients(values, s, N: int = DEFAULT_MODES, basis: TransverseBasis = UNIT):
    """Project a piecewise-linear trace (values at nodes s) onto psi_1..psi_N.

    Uses 8-point Gauss rules per edge, exact up to the sine resolution.
    """
    values = np.asarray(values, dtype=float)
    s = np.asarray(s, dtype=float)
    xg, wg = np.polynomial.legendre.leggauss(8)
    lo, hi = s[:-1], s[1:]
    L = hi - lo
    q = lo[:, None] + (xg[None, :] + 1) * L[:, None] / 2
    lam = (xg + 1) / 2
    f = values[:-1, None] * (1 - lam) + values[1:, None] * lam
    w = wg[None, :] * L[:, None] / 2
    n = np.arange(1, N + 1)
    psi = basis.psi(n[:, None, None], q[None])
    return np.sum(psi * (f * w)[None], axis=(1, 2))


def _line_values(grid, vec, x):
    t = grid.t
    if x < -1e-12 or x > t[-1] + 1e-12:
        raise ValueError(f"x = {x} outside branch [0, {t[-1]}]")
    k = int(np.clip(np.searchsorted(t, x, side="right") - 1, 0, len(t) - 2))
    w = (x - t[k]) / (t[k + 1] - t[k])
    w = min(max(w, 0.0), 1.0)
    return (1 - w) * vec[grid.nodes[k]] + w * vec[grid.nodes[k + 1]]


def _l2_line(u, s):
    ds = np.diff(s)
    return float(np.sum(ds * (u[:-1] ** 2 + u[:-1] * u[1:] + u[1:] ** 2) / 3.0))


def cross_section_norm(mesh, vec, i: int, x: float) -> float:
    """Squared L2 norm of a nodal field across branch i at distance x."""
    if not 0 <= i < len(mesh.branch_grids):
        raise IndexError(f"branch {i} absent from mesh")
    grid = mesh.branch_grids[i]
    return _l2_line(_line_values(grid, np.asarray(vec), x), grid.s)


def decay_profile(mesh, vec, i: int, x=None):
    """(x, I(x)) on the mesh lines of branch i, or on the supplied x."""
    grid = mesh.branch_grids[i]
    xs = grid.t if x is None else np.asarray(x, dtype=float)
    vals = np.array([cross_section_norm(mesh, vec, i, float(xx)) for xx in xs])
    return np.asarray(xs), vals


def decay_rate_bound(lam, basis: TransverseBasis = UNIT) -> float:
    """Decay rate 2 sqrt(nu_1 - lam) of the cross-section norm."""
    nu1 = float(basis.nu(1))
    if lam > nu1:
        raise ValueError("no exponential regime for lam > nu_1")
    return 2.0 * math.sqrt(nu1 - lam)


def _mid(x, a):
    return (x >= 0.25 * a - 1e-12) & (x <= 0.75 * a + 1e-12)


def loglinear_slope(x, I, a) -> float:
    """Least-squares slope of log I over the middle half of a branch."""
    x = np.asarray(x)
    m = _mid(x, a) & (np.asarray(I) > 0)
    return float(np.polyfit(x[m], np.log(np.asarray(I)[m]), 1)[0])


def fit_decay_rate(x, I, a) -> float:
    """Fitted decay rate 2g of I(x) = C sinh^2(g (a - x)) over the middle half.

    For long branches this is minus the log-linear slope; the sinh form
    removes the bending of log I caused by the Dirichlet end at x = a.
    """
    from scipy.optimize import minimize_scalar

    x = np.asarray(x)
    I = np.asarray(I)
    m = _mid(x, a) & (I > 0)
    xm, logI = x[m], np.log(I[m])

    def resid(g):
        model = 2 * np.log(np.sinh(g * (a - xm)))
        c = np.mean(logI - model)
        return float(np.sum((logI - model - c) ** 2))

    g0 = max(-loglinear_slope(x, I, a) / 2, 1e-3)
    res = minimize_scalar(resid, bounds=(1e-6, 4 * g0 + 10), method="bounded",
                          options={"xatol": 1e-10})
    return 2.0 * float(res.x)
