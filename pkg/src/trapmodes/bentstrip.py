"""Closed-form coefficients for the bent strip with trial sin(pi r) / r^alpha.

Everything reduces to the singular cosine integral

    w_nu(q) = int_0^1 r^(-nu) cos(q r) dr,        nu < 1,

and its tail w~_nu(q) = int_1^inf r^(-nu) cos(q r) dr, related through
w_nu(q) = q^(nu-1) G(nu) - w~_nu(q) with
G(nu) = sqrt(pi) Gamma((1-nu)/2) / (2^nu Gamma(nu/2)).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

__all__ = [
    "w_nu", "w_tilde", "w_tilde_bounds", "mellin_factor", "si_limit",
    "norm_squared", "gradient_norm_squared", "beta_sigma_bent", "sine_projections",
    "d_coefficients", "e_bounds", "kappa_bound", "kappa_direct", "eta",
    "maximize_eta", "BentCoefficients", "bent_coefficients", "scan",
]

PI = math.pi
_GL_X, _GL_W = np.polynomial.legendre.leggauss(20)
_GL_X = (_GL_X + 1) / 2
_GL_W = _GL_W / 2
_HALF_BAND = 1e-6
_RATIO = 0.1


def _composite(f, edges):
    lo, L = edges[:-1], np.diff(edges)
    t = lo[:, None] + L[:, None] * _GL_X
    return float(np.sum(f(t) * (L[:, None] * _GL_W)))


def w_nu(nu: float, q: float) -> float:
    """int_0^1 r^-nu cos(q r) dr to about 1e-13.

    For 0 < nu < 1 the piece [0, r0], r0 ~ 1/q, uses the substitution
    t = r^(1-nu), which turns the integrand into the bounded
    cos(q t^p) / (1 - nu), p = 1/(1-nu); the rest is smooth and integrated
    directly on panels graded geometrically away from r0.  For nu <= 0 the
    integrand is bounded and only grading toward r = 0 is needed.
    """
    if nu >= 1:
        raise ValueError(f"w_nu diverges for nu >= 1 (nu = {nu})")
    q = abs(float(q))
    width = 1.0 / (int(math.ceil(q / PI)) + 8)
    if nu > 0:
        p = 1.0 / (1.0 - nu)
        r0 = min(width, 1.0 / (q + 1.0))
        t0 = r0 ** (1.0 - nu)
        # t^p steepens as nu -> 1: about p panels keep the rule accurate
        m = int(math.ceil(p)) + 2
        inner = t0 * np.unique(np.concatenate([[0.0], _RATIO ** np.arange(12, 0, -1) / m,
                                               np.arange(1, m + 1) / m]))
        head = _composite(lambda t: np.cos(q * t ** p), inner) * p
        grade = r0 * 2.0 ** np.arange(0, 60)
        grade = grade[grade < width]
        edges = np.unique(np.concatenate([grade, np.arange(1, int(round(1 / width)) + 1) * width]))
        edges = edges[edges >= r0]
        return head + _composite(lambda r: r ** (-nu) * np.cos(q * r), edges)
    edges = np.linspace(0.0, 1.0, int(round(1 / width)) + 1)
    grade = edges[1] * _RATIO ** np.arange(1, 16)
    edges = np.unique(np.concatenate([[0.0], grade, edges]))
    return _composite(lambda r: r ** (-nu) * np.cos(q * r), edges)


def mellin_factor(nu: float) -> float:
    """sqrt(pi) Gamma((1-nu)/2) / (2^nu Gamma(nu/2)) = q^(1-nu) int_0^inf r^-nu cos(qr) dr."""
    return math.sqrt(PI) * special.gamma((1 - nu) / 2) / (2 ** nu * special.gamma(nu / 2))


def w_tilde(nu: float, q: float) -> float:
    """Oscillatory tail int_1^inf r^-nu cos(q r) dr (Fourier-integral quadrature)."""
    val, _ = integrate.quad(lambda u: (1.0 + u) ** (-nu), 0.0, np.inf, weight="cos",
                            wvar=q, limlst=200)
    val2, _ = integrate.quad(lambda u: (1.0 + u) ** (-nu), 0.0, np.inf, weight="sin",
                             wvar=q, limlst=200)
    # cos(q (1 + u)) = cos q cos qu - sin q sin qu
    return math.cos(q) * val - math.sin(q) * val2


def w_tilde_bounds(nu: float, q):
    """Two-term integration-by-parts bracket of w~_nu at q = pi k (sin q = 0)."""
    q = np.asarray(q, dtype=float)
    c = np.cos(q)
    A = nu * (nu + 1) * (nu + 2)
    lower = nu * c / q ** 2 - A * (c + 1) / q ** 4
    upper = nu * c / q ** 2 - A * (c - 1) / q ** 4
    return lower, upper


def si_limit() -> float:
    """lim_{nu->0} w_nu(2 pi) / nu = Si(2 pi) / (2 pi)."""
    return float(special.sici(2 * PI)[0] / (2 * PI))


def _w_ratio(alpha):
    """w_{2 alpha - 1}(2 pi) / (2 alpha - 1), continuous through alpha = 1/2."""
    nu = 2 * alpha - 1
    if abs(alpha - 0.5) < _HALF_BAND:
        return si_limit()
    return w_nu(nu, 2 * PI) / nu


def norm_squared(alpha: float) -> float:
    """(v, v) over the quarter disk."""
    return PI / 4 * (1 / (2 * (1 - alpha)) - w_nu(2 * alpha - 1, 2 * PI))


def gradient_norm_squared(alpha: float) -> float:
    """(grad v, grad v) over the quarter disk."""
    return PI ** 3 / 4 * (1 / (2 * (1 - alpha)) - _w_ratio(alpha))


def beta_sigma_bent(alpha: float):
    """(beta, sigma) of v_alpha in closed form; sigma is per branch (both equal).

    beta = pi^2 (v,v) - (grad v, grad v) = (pi^3/4) (2 - 2 alpha) w_{2a-1}(2pi)/(2a-1).
    """
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    beta = PI ** 3 / 4 * (2 - 2 * alpha) * _w_ratio(alpha)
    sigma = 0.5 * (1 / (1 - alpha) - w_nu(alpha, 2 * PI)) ** 2
    return beta, sigma


def sine_projections(alpha: float, n) -> np.ndarray:
    """(v, sin(pi n r)) on a straight side, n >= 1."""
    n = np.atleast_1d(np.asarray(n))
    out = np.empty(n.shape, dtype=float)
    for k, m in enumerate(n.ravel()):
        if m == 1:
            out.flat[k] = 0.5 * (1 / (1 - alpha) - w_nu(alpha, 2 * PI))
        else:
            out.flat[k] = 0.5 * (w_nu(alpha, PI * (m - 1)) - w_nu(alpha, PI * (m + 1)))
    return out


def d_coefficients(alpha: float, n) -> np.ndarray:
    """Leading (whole-line) part d_n of the projections, n >= 2."""
    n = np.asarray(n, dtype=float)
    C = PI ** (alpha - 0.5) * special.gamma((1 - alpha) / 2) / (
        2 ** (1 + alpha) * special.gamma(alpha / 2))
    return C * ((n - 1) ** (alpha - 1) - (n + 1) ** (alpha - 1))


def e_bounds(alpha: float, n):
    """(e_n^-, e_n^+) bracketing e_n = d_n - (v, sin(pi n r)), n >= 2."""
    n = np.asarray(n, dtype=float)
    lo1, hi1 = w_tilde_bounds(alpha, PI * (n - 1))
    lo2, hi2 = w_tilde_bounds(alpha, PI * (n + 1))
    return 0.5 * (lo1 - hi2), 0.5 * (hi1 - lo2)


def _prefactor(alpha):
    return PI ** (alpha - 0.5) * special.gamma((1 - alpha) / 2) / (
        2 ** (1 + alpha) * special.gamma(alpha / 2))


def _tails(alpha, N):
    """Integral-comparison bounds of sum_{n>N} for A1, |A2|, A3."""
    C = abs(_prefactor(alpha))
    E = alpha / PI ** 2 + 2 * alpha * (alpha + 1) * (alpha + 2) / PI ** 4
    D = 2 * C * (1 - alpha)          # |d_n| <= D (n-1)^(alpha-2)
    f = 1 + 1 / N                    # sqrt(n^2-1) <= n <= f (n-1)
    t1 = f * D ** 2 * (N - 1) ** (2 * alpha - 2) / (2 - 2 * alpha)
    t2 = f * D * E * (N - 1) ** (alpha - 2) / (2 - alpha)
    t3 = f * E ** 2 / (2 * (N - 1) ** 2)
    return t1, t2, t3


def kappa_bound(alpha: float, N: int = 1000):
    """Upper bound 2 pi (A1 - 2 A2^- + A3^+) on kappa_i; returns (kappa, tail)."""
    if N < 200:
        raise ValueError("kappa_bound needs N >= 200")
    n = np.arange(2, N + 1, dtype=float)
    root = np.sqrt(n * n - 1)
    d = d_coefficients(alpha, n)
    e_lo, e_hi = e_bounds(alpha, n)
    A1 = float(np.sum(root * d * d))
    A2 = float(np.sum(root * d * e_lo))
    A3 = float(np.sum(root * e_hi * e_hi))
    t1, t2, t3 = _tails(alpha, N)
    return 2 * PI * (A1 - 2 * A2 + A3), 2 * PI * (t1 + 2 * t2 + t3)


def kappa_direct(alpha: float, N: int = 1000):
    """kappa_i by quadrature of each projection and plain summation; (kappa, tail)."""
    n = np.arange(2, N + 1)
    q = PI * np.arange(1, N + 2)
    w = np.array([w_nu(alpha, x) for x in q])
    p = 0.5 * (w[:-2] - w[2:])
    kappa = 2 * PI * float(np.sum(np.sqrt(n * n - 1.0) * p * p))
    t1, t2, t3 = _tails(alpha, N)
    return kappa, 2 * PI * (t1 + 2 * t2 + t3)


def eta(alpha: float, method: str = "bound", eps_coth: float = 0.0, N: int = 1000) -> float:
    """Threshold eta(alpha) for the two-branch bent strip."""
    beta, sigma = beta_sigma_bent(alpha)
    if method == "bound":
        kappa, _ = kappa_bound(alpha, N)
    elif method == "direct":
        kappa, _ = kappa_direct(alpha, N)
    else:
        raise ValueError(f"unknown method {method!r}")
    return beta / sigma - 2 * (1 + eps_coth) * kappa / sigma


def maximize_eta(method: str = "bound", eps_coth: float = 0.0, N: int = 1000,
                 interval=(0.05, 0.95), xtol: float = 1e-4):
    """Golden-section maximization of eta over alpha. Returns (alpha*, eta*, a_th)."""
    invphi = (math.sqrt(5) - 1) / 2
    a, b = interval
    f = lambda al: eta(al, method, eps_coth, N)  # noqa: E731
    c, d = b - invphi * (b - a), a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > xtol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    best = f(x)
    return x, best, 2.0 / best


@dataclass
class BentCoefficients:
    alpha: float
    beta: float
    sigma: float
    vv: float
    d: np.ndarray
    e_minus: np.ndarray
    e_plus: np.ndarray
    A1: float
    A2_minus: float
    A3_plus: float
    kappa_bound: float
    kappa_direct: float
    tail: float
    eta_bound: float
    eta_direct: float
    w_values: dict = field(default_factory=dict)


def bent_coefficients(alpha: float, N: int = 1000, eps_coth: float = 0.0) -> BentCoefficients:
    beta, sigma = beta_sigma_bent(alpha)
    n = np.arange(2, N + 1, dtype=float)
    root = np.sqrt(n * n - 1)
    d = d_coefficients(alpha, n)
    e_lo, e_hi = e_bounds(alpha, n)
    A1, A2, A3 = (float(np.sum(root * d * d)), float(np.sum(root * d * e_lo)),
                  float(np.sum(root * e_hi * e_hi)))
    kb, tail = kappa_bound(alpha, N)
    kd, _ = kappa_direct(alpha, N)
    return BentCoefficients(
        alpha, beta, sigma, norm_squared(alpha), d, e_lo, e_hi, A1, A2, A3, kb, kd, tail,
        beta / sigma - 2 * (1 + eps_coth) * kb / sigma,
        beta / sigma - 2 * (1 + eps_coth) * kd / sigma,
        {"w_alpha(2pi)": w_nu(alpha, 2 * PI), "w_2alpha-1(2pi)": w_nu(2 * alpha - 1, 2 * PI)})


def scan(alphas, N: int = 1000, eps_coth: float = 0.0):
    """Rows (alpha, beta, sigma, kappa_bound, kappa_direct, eta_bound, eta_direct, a_th)."""
    rows = []
    for al in alphas:
        c = bent_coefficients(float(al), N, eps_coth)
        a_th = 2.0 / c.eta_bound if c.eta_bound > 0 else math.inf
        rows.append((c.alpha, c.beta, c.sigma, c.kappa_bound, c.kappa_direct,
                     c.eta_bound, c.eta_direct, a_th))
    return rows
