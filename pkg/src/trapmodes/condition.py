"""Variational sufficient condition for a trapped mode.

For a trial function v on the basic domain (vanishing on its exterior
boundary) and unit-width branches of lengths a_i,

    sum_i sigma_i / a_i  <  beta - sum_i kappa_i coth(a_i sqrt(nu_2 - nu_1))

guarantees lambda_1 < nu_1, where

    beta    = nu_1 (v, v) - (grad v, grad v)
    sigma_i = (v, psi_1)^2 on Gamma_i
    kappa_i = sum_{n>=2} sqrt(nu_n - nu_1) (v, psi_n)^2 on Gamma_i

with orthonormal cross-section modes psi_n.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .geometry import SIDES, WaveguideSpec
from .transverse import UNIT, TransverseBasis, dtn_coefficient

__all__ = [
    "TrialFunction", "AnalyticCoefficients", "ConditionCoefficients", "ConditionReport",
    "ConditionError", "coefficients", "check", "threshold_eta", "a_threshold",
    "l_shape_trial", "square_trial", "cross_trial", "bent_trial", "l_shape_3d_coefficients",
    "trial_catalog", "rayleigh_quotient", "trial_quotient", "trial_fixed_point",
    "DEFAULT_EPS_COTH",
]

PI = math.pi
PI2 = PI * PI
DEFAULT_EPS_COTH = 1e-3


class ConditionError(ValueError):
    pass


@dataclass(frozen=True)
class AnalyticCoefficients:
    vv: float                                   # (v, v) on the basic domain
    gg: float                                   # (grad v, grad v)
    projection: Callable[[str, np.ndarray], np.ndarray]   # side, n -> (v, psi_n)


@dataclass(frozen=True)
class TrialFunction:
    name: str
    value: Callable
    gradient: Callable
    basic: str                                  # "unit_square" | "quarter_disk"
    analytic: AnalyticCoefficients | None = None
    singular_at_origin: bool = False


@dataclass
class ConditionCoefficients:
    beta: float
    sigma: list
    kappa: list
    truncation: int
    tail_bound: float
    vv: float | None = None
    nu1: float = PI2
    gap: float = PI * math.sqrt(3.0)            # sqrt(nu_2 - nu_1)
    projections: list | None = None             # per branch (v, psi_n), n = 1..N


@dataclass
class ConditionReport:
    beta: float
    sigma: list
    kappa: list
    lhs: float
    rhs: float
    satisfied: bool
    eta: float | None
    a_th: float | None
    mu_of_v: float | None
    decay_lower_bound: float | None
    truncation: int
    tail_bound: float

    def to_dict(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------------------
# catalog trial functions (basic domain [-1, 0]^2 or the quarter disk)


def _side_param(side):
    (ox, oy), (tx, ty), _ = SIDES[side]
    return lambda s: (ox + s * tx, oy + s * ty)


def l_shape_trial() -> TrialFunction:
    """(1 + x) sin(pi y) + (1 + y) sin(pi x) on the unit square."""

    def value(x, y):
        return (1 + x) * np.sin(PI * y) + (1 + y) * np.sin(PI * x)

    def gradient(x, y):
        return (np.sin(PI * y) + PI * (1 + y) * np.cos(PI * x),
                PI * (1 + x) * np.cos(PI * y) + np.sin(PI * x))

    def projection(side, n):
        n = np.asarray(n)
        # trace is -sin(pi s) on east/north, identically zero on west/south
        if side in ("east", "north"):
            return np.where(n == 1, -math.sqrt(0.5), 0.0)
        return np.zeros(n.shape)

    return TrialFunction("l_shape", value, gradient, "unit_square",
                         AnalyticCoefficients(1 / 3 + 2 / PI2, PI2 / 3 + 1, projection))


def square_trial() -> TrialFunction:
    """sin(pi x) sin(pi y): the Dirichlet ground state of the square."""

    def value(x, y):
        return np.sin(PI * x) * np.sin(PI * y)

    def gradient(x, y):
        return PI * np.cos(PI * x) * np.sin(PI * y), PI * np.sin(PI * x) * np.cos(PI * y)

    return TrialFunction("square", value, gradient, "unit_square",
                         AnalyticCoefficients(0.25, PI2 / 2,
                                              lambda side, n: np.zeros(np.shape(n))))


def cross_trial() -> TrialFunction:
    """x (1 + x) + y (1 + y), vanishing only at the four corners."""

    def value(x, y):
        return x * (1 + x) + y * (1 + y)

    def gradient(x, y):
        return 1 + 2 * np.asarray(x, dtype=float), 1 + 2 * np.asarray(y, dtype=float)

    def projection(side, n):
        # trace s (s - 1) on every side
        n = np.asarray(n, dtype=float)
        return -math.sqrt(2.0) * 2 * (1 - (-1.0) ** n) / (PI * n) ** 3

    return TrialFunction("cross", value, gradient, "unit_square",
                         AnalyticCoefficients(11 / 90, 2 / 3, projection))


def bent_trial(alpha: float = 1 / 3, closed_form: bool = True) -> TrialFunction:
    """sin(pi r) / r^alpha on the quarter disk centred at the inner corner."""
    if not 0 < alpha < 1:
        raise ConditionError("bent trial needs 0 < alpha < 1")

    def value(x, y):
        r = np.hypot(x, y)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.sin(PI * r) / r ** alpha
        return np.where(r > 0, out, 0.0)

    def gradient(x, y):
        r = np.hypot(x, y)
        with np.errstate(divide="ignore", invalid="ignore"):
            dr = PI * np.cos(PI * r) / r ** alpha - alpha * np.sin(PI * r) / r ** (1 + alpha)
            gx, gy = dr * x / r, dr * y / r
        return np.where(r > 0, gx, 0.0), np.where(r > 0, gy, 0.0)

    analytic = None
    if closed_form:
        from . import bentstrip

        def projection(side, n):
            n = np.atleast_1d(np.asarray(n))
            return math.sqrt(2.0) * bentstrip.sine_projections(alpha, n)

        analytic = AnalyticCoefficients(bentstrip.norm_squared(alpha),
                                        bentstrip.gradient_norm_squared(alpha), projection)
    return TrialFunction(f"bent_strip(alpha={alpha:g})", value, gradient, "quarter_disk",
                         analytic, singular_at_origin=True)


def trial_catalog() -> dict:
    return {"l_shape": l_shape_trial, "square": square_trial, "cross": cross_trial,
            "bent_strip": bent_trial}


def l_shape_3d_coefficients() -> ConditionCoefficients:
    """Closed-form coefficients of the 3D L-shape (unit-cube basic domain).

    Trial [(1+x) sin(pi y) + (1+y) sin(pi x)] sin(pi z); square cross-section
    modes psi_mn = 2 sin(pi m y) sin(pi n z), nu_mn = pi^2 (m^2 + n^2).
    """
    vv = 1 / 6 + 1 / PI2
    gg = PI2 / 3 + 1.5
    nu1 = 2 * PI2
    proj = 0.5
    return ConditionCoefficients(nu1 * vv - gg, [proj ** 2] * 2, [0.0, 0.0], 0, 0.0, vv,
                                 nu1=nu1, gap=PI * math.sqrt(3.0))


# ---------------------------------------------------------------------------
# quadrature


def _gauss(n=12):
    x, w = np.polynomial.legendre.leggauss(n)
    return (x + 1) / 2, w / 2


def _panels(edges, n=12):
    """Nodes/weights of a composite Gauss rule over consecutive panel edges."""
    x, w = _gauss(n)
    edges = np.asarray(edges, dtype=float)
    lo, L = edges[:-1], np.diff(edges)
    return (lo[:, None] + L[:, None] * x).ravel(), (L[:, None] * w).ravel()


def _graded(m, depth, ends=(True, False), ratio=0.15):
    """m uniform panels on [0, 1] with geometric refinement at chosen ends."""
    e = np.linspace(0.0, 1.0, m + 1)
    extra = []
    if ends[0]:
        extra.extend(e[1] * ratio ** np.arange(1, depth + 1))
    if ends[1]:
        extra.extend(1 - (1 - e[-2]) * ratio ** np.arange(1, depth + 1))
    return np.unique(np.concatenate([e, extra]))


def _domain_integrals(trial: TrialFunction, level: int):
    """((v, v), (grad v, grad v)) with a rule of refinement level `level`."""
    m = 2 ** (level + 1)
    if trial.basic == "unit_square":
        x, w = _panels(np.linspace(-1, 0, m + 1))
        X, Y = np.meshgrid(x, x, indexing="ij")
        W = np.outer(w, w)
        v = trial.value(X, Y)
        gx, gy = trial.gradient(X, Y)
        return float(np.sum(W * v * v)), float(np.sum(W * (gx * gx + gy * gy)))
    if trial.basic == "quarter_disk":
        depth = 4 * (level + 1) if trial.singular_at_origin else 0
        r, wr = _panels(_graded(m, depth))
        th, wt = _panels(np.linspace(np.pi, 1.5 * np.pi, m + 1))
        R, T = np.meshgrid(r, th, indexing="ij")
        W = np.outer(wr * r, wt)
        X, Y = R * np.cos(T), R * np.sin(T)
        v = trial.value(X, Y)
        gx, gy = trial.gradient(X, Y)
        return float(np.sum(W * v * v)), float(np.sum(W * (gx * gx + gy * gy)))
    raise ConditionError(f"no quadrature for basic domain {trial.basic!r}")


def _boundary_projections(trial: TrialFunction, side: str, N: int, level: int):
    m = max(16, 2 * N) * 2 ** level
    depth = 4 * (level + 1) if trial.singular_at_origin else 0
    # the quarter-disk centre (origin) is at s = 1 on both catalog sides
    s, w = _panels(_graded(m, depth, ends=(False, True)))
    x, y = _side_param(side)(s)
    f = trial.value(x, y)
    n = np.arange(1, N + 1)
    return UNIT.psi(n[:, None], s[None]) @ (f * w)


def _converged(fun, rtol=1e-10, max_level=7):
    prev = np.asarray(fun(0), dtype=float)
    for level in range(1, max_level + 1):
        cur = np.asarray(fun(level), dtype=float)
        scale = max(float(np.max(np.abs(cur))), 1e-300)
        if np.max(np.abs(cur - prev)) <= rtol * scale:
            return cur
        prev = cur
    raise ConditionError("quadrature did not converge (trial energy may diverge)")


_SIDE_OF_BASIC = {"unit_square": ("unit_square", "truncated_square", "coupled_square"),
                  "quarter_disk": ("quarter_disk",)}


def check_admissible(trial: TrialFunction, spec: WaveguideSpec, samples: int = 1000,
                     atol: float = 1e-10) -> bool:
    """Sample the exterior boundary of the basic domain; v must vanish there."""
    attached = {b.attachment for b in spec.branches}
    pts = []
    k = max(samples // 4, 1)
    s = (np.arange(k) + 0.5) / k
    if trial.basic == "quarter_disk":
        th = np.pi + 0.5 * np.pi * (np.arange(samples) + 0.5) / samples
        pts.append(np.column_stack([np.cos(th), np.sin(th)]))
        for side in ("east", "north"):
            if side not in attached:
                pts.append(np.column_stack(_side_param(side)(s)))
    else:
        for side in SIDES:
            if side not in attached:
                pts.append(np.column_stack(_side_param(side)(s)))
        pts.append(np.array([[0, 0], [-1, 0], [0, -1], [-1, -1]], dtype=float))
    P = np.concatenate(pts)
    return bool(np.all(np.abs(trial.value(P[:, 0], P[:, 1])) < atol))


def _tail_estimate(terms: np.ndarray) -> float:
    """Integral-comparison estimate of sum_{n>N} from a power-law envelope."""
    N = len(terms) + 1                       # terms indexed n = 2..N
    n = np.arange(2, N + 1)
    big = float(np.max(terms, initial=0.0))
    if big <= 1e-20:
        return 0.0
    sel = (n >= N // 2) & (terms > 1e-14 * big)   # drop rounding-level terms
    if not np.any(sel):
        return 0.0
    if sel.sum() < 2:
        return float(terms[sel][-1]) * N
    p = -np.polyfit(np.log(n[sel]), np.log(terms[sel]), 1)[0]
    C = float(np.max(terms[sel] * n[sel] ** p))
    if p <= 1.0:
        return math.inf
    return float(C * N ** (1 - p) / (p - 1))


def coefficients(trial: TrialFunction, spec: WaveguideSpec, N: int = 32,
                 use_analytic: bool = True, basis: TransverseBasis = UNIT) -> ConditionCoefficients:
    """beta, sigma_i, kappa_i of a trial function for the branches of spec."""
    if N < 2:
        raise ConditionError("truncation N must be >= 2")
    if spec.basic.kind not in _SIDE_OF_BASIC[trial.basic]:
        raise ConditionError(f"trial {trial.name} lives on {trial.basic}, "
                             f"spec basic domain is {spec.basic.kind}")
    if not check_admissible(trial, spec):
        raise ConditionError(f"trial {trial.name} does not vanish on the exterior boundary")
    n = np.arange(1, N + 1)
    nu = basis.nu(n)
    if use_analytic and trial.analytic is not None:
        vv, gg = trial.analytic.vv, trial.analytic.gg
        projs = [np.asarray(trial.analytic.projection(b.attachment, n), dtype=float)
                 for b in spec.branches]
    else:
        vv, gg = _converged(lambda lv: _domain_integrals(trial, lv))
        projs = [_converged(lambda lv, side=b.attachment: _boundary_projections(trial, side, N, lv))
                 for b in spec.branches]
    beta = float(nu[0] * vv - gg)
    weights = np.sqrt(nu[1:] - nu[0])
    sigma = [float(p[0] ** 2) for p in projs]
    kappa, tail = [], 0.0
    for p in projs:
        terms = weights * p[1:] ** 2
        kappa.append(float(np.sum(terms)))
        tail = max(tail, _tail_estimate(terms))
    return ConditionCoefficients(beta, sigma, kappa, N, tail, float(vv), float(nu[0]),
                                 float(math.sqrt(nu[1] - nu[0])), projs)


def _coth(x):
    return 1.0 / np.tanh(x)


def check(coeffs: ConditionCoefficients, a) -> ConditionReport:
    """Evaluate the sufficient condition for branch lengths a (scalar: all equal)."""
    a = [float(x) for x in np.atleast_1d(a)]
    if len(a) == 1:
        a = a * len(coeffs.sigma)
    if len(a) != len(coeffs.sigma):
        raise ConditionError(f"expected {len(coeffs.sigma)} branch lengths, got {len(a)}")
    if any(x <= 0 for x in a):
        raise ConditionError("branch lengths must be positive")
    lhs = sum(s / x for s, x in zip(coeffs.sigma, a))
    rhs = coeffs.beta - float(sum(k * _coth(x * coeffs.gap) for k, x in zip(coeffs.kappa, a)))
    satisfied = bool(lhs < rhs)
    eta = a_th = None
    if _equal_sigma(coeffs):
        eta = threshold_eta(coeffs, 0.0)
        try:
            a_th = a_threshold(coeffs)
        except ConditionError:
            a_th = None
    mu = rayleigh_quotient(coeffs, a)
    decay = None
    if satisfied and coeffs.vv:
        decay = 2.0 * math.sqrt((rhs - lhs) / coeffs.vv)
    return ConditionReport(coeffs.beta, list(coeffs.sigma), list(coeffs.kappa), lhs, rhs,
                           satisfied, eta, a_th, mu, decay, coeffs.truncation, coeffs.tail_bound)


def rayleigh_quotient(coeffs: ConditionCoefficients, a) -> float | None:
    """mu(v) with the lambda = nu_1 DtN terms, mode by mode when available."""
    if not coeffs.vv:
        return None
    a = np.broadcast_to(np.asarray(a, dtype=float), (len(coeffs.sigma),))
    energy = coeffs.nu1 * coeffs.vv - coeffs.beta
    if coeffs.projections is not None:
        for p, x in zip(coeffs.projections, a):
            n = np.arange(1, len(p) + 1)
            g = np.sqrt(UNIT.nu(n[1:]) - UNIT.nu(1))
            energy += p[0] ** 2 / x + float(np.sum(g * _coth(g * x) * p[1:] ** 2))
    else:
        for s, k, x in zip(coeffs.sigma, coeffs.kappa, a):
            energy += s / x + k * _coth(x * coeffs.gap)
    return float(energy / coeffs.vv)


def trial_quotient(coeffs: ConditionCoefficients, a, lam: float) -> float:
    """Reduced Rayleigh quotient of the trial with the DtN terms taken at lam."""
    if coeffs.projections is None or not coeffs.vv:
        raise ConditionError("trial quotient needs per-mode projections")
    a = np.broadcast_to(np.asarray(a, dtype=float), (len(coeffs.sigma),))
    energy = coeffs.nu1 * coeffs.vv - coeffs.beta
    for p, x in zip(coeffs.projections, a):
        n = np.arange(1, len(p) + 1)
        energy += float(np.sum(dtn_coefficient(n, lam, x) * p ** 2))
    return float(energy / coeffs.vv)


def trial_fixed_point(coeffs: ConditionCoefficients, a, xtol: float = 1e-12) -> float | None:
    """lam_v with trial_quotient(lam_v) = lam_v, or None when none lies below nu_1.

    Since mu_1(lam) <= trial_quotient(lam) for every lam, lambda_1 <= lam_v,
    and lam_v >= mu(v) because the quotient decreases in lam.
    """
    hi = coeffs.nu1
    if trial_quotient(coeffs, a, hi) >= hi:
        return None
    lo = 0.0
    while hi - lo > xtol * coeffs.nu1:
        mid = 0.5 * (lo + hi)
        if trial_quotient(coeffs, a, mid) > mid:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _equal_sigma(coeffs, rtol=1e-12):
    s = coeffs.sigma
    return len(s) > 0 and all(abs(x - s[0]) <= rtol * max(abs(s[0]), 1e-300) for x in s)


def threshold_eta(coeffs: ConditionCoefficients, eps_coth: float = DEFAULT_EPS_COTH) -> float:
    """Threshold eta: sum 1/a_i < eta suffices when coth is replaced by 1 + eps."""
    if not _equal_sigma(coeffs):
        raise ConditionError("eta is defined only for equal sigma_i; use check()")
    if eps_coth < 0:
        raise ConditionError("eps_coth must be >= 0")
    s = coeffs.sigma[0]
    return coeffs.beta / s - (1 + eps_coth) / s * sum(coeffs.kappa)


def a_threshold(coeffs: ConditionCoefficients, M: int | None = None,
                xtol: float = 1e-13) -> float:
    """Common branch length a_th solving M/a = beta/s - (sum kappa/s) coth(a gap)."""
    M = len(coeffs.sigma) if M is None else M
    if not _equal_sigma(coeffs):
        raise ConditionError("a_threshold needs equal sigma_i")
    s, beta, K = coeffs.sigma[0], coeffs.beta, sum(coeffs.kappa) * M / len(coeffs.kappa)
    if beta - K <= 0 or s <= 0:
        raise ConditionError("condition can never hold: beta - sum kappa <= 0")
    if K == 0:
        return M * s / beta

    def f(a):
        return beta / s - K / s * _coth(a * coeffs.gap) - M / a

    lo, hi = 1e-12, 1.0
    while f(hi) <= 0:
        hi *= 2
        if hi > 1e12:
            raise ConditionError("no positive root for a_th")
    while hi - lo > xtol * hi:
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)
