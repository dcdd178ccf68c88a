"""Structural properties that hold independently of any reference value."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trapmodes import bentstrip
from trapmodes import condition as C
from trapmodes.eigensolver import PI2, solve_domain, solve_mesh
from trapmodes.geometry import build_domain, generate_mesh
from trapmodes.reduced import ReducedProblem
from trapmodes.transverse import UNIT, TransverseBasis, dtn_coefficient, gamma

CHAIN_CASES = [
    ("l_shape", (2, 2), C.l_shape_trial, 1 / 16),
    ("l_shape", (1.5, 3), C.l_shape_trial, 1 / 16),
    ("cross", (5, 5, 5, 5), C.cross_trial, 1 / 16),
    ("cross", (1, 2, 3, 4), C.cross_trial, 1 / 16),
    ("bent_strip", (6, 6), C.bent_trial, 1 / 24),
]


@pytest.mark.parametrize("name,params,trial,h", CHAIN_CASES)
def test_rayleigh_chain(name, params, trial, h):
    """mu_1(nu_1) <= mu(v) <= lam_v and lambda_1 <= lam_v.

    lam_v solves q_v(lam) = lam for the trial quotient with the DtN terms at
    lam; it bounds lambda_1 because mu_1(lam) <= q_v(lam) for every lam.
    """
    spec = build_domain(name, params)
    co = C.coefficients(trial(), spec)
    rep = C.check(co, spec.lengths)
    lam_v = C.trial_fixed_point(co, spec.lengths)
    assert rep.mu_of_v is not None and lam_v is not None
    assert rep.mu_of_v <= lam_v
    lam1 = solve_domain(spec, h).best[0]
    assert lam1 <= lam_v * (1 + 1e-3)
    m = ReducedProblem(spec, h).mu1(PI2)
    assert m <= rep.mu_of_v * (1 + 1e-3)


def test_rayleigh_value_alone_does_not_bound_lambda1():
    # mu(v) freezes the DtN terms at nu_1, which undercounts the branch energy
    # below the cut-off, so it may sit under the true eigenvalue
    spec = build_domain("l_shape", (2, 2))
    rep = C.check(C.coefficients(C.l_shape_trial(), spec), spec.lengths)
    assert solve_domain(spec, 1 / 16).best[0] > rep.mu_of_v


@pytest.mark.parametrize("name,params,trial", [
    ("l_shape", (1, 1), C.l_shape_trial), ("cross", (1, 1, 1, 1), C.cross_trial)])
@settings(max_examples=25, deadline=None)
@given(a=st.floats(0.2, 30.0), lam=st.floats(0.05, 0.95), d=st.floats(0.01, 0.05))
def test_trial_quotient_decreasing_in_lambda(name, params, trial, a, lam, d):
    co = C.coefficients(trial(), build_domain(name, params))
    assert C.trial_quotient(co, a, (lam + d) * PI2) <= C.trial_quotient(co, a, lam * PI2)


def test_domain_monotonicity_in_ell():
    ells = [0.0, 0.25, 0.5, 0.75, 1.0]
    lam = [solve_domain(build_domain("truncated_l", (e, 1, 1)), 1 / 16).best[0] for e in ells]
    assert all(x > y for x, y in zip(lam, lam[1:]))


def test_branch_length_monotonicity_nested_meshes():
    # lengths on the mesh lattice give nested P1 spaces, so the discrete
    # eigenvalues are exactly nonincreasing
    h = 1 / 8
    lam = [solve_mesh(generate_mesh(build_domain("l_shape", (a, a)), h), 1).eigenvalues[0]
           for a in (0.5, 1.0, 1.5, 2.0, 3.0)]
    assert all(x >= y - 1e-10 * x for x, y in zip(lam, lam[1:]))


@settings(max_examples=40, deadline=None)
@given(a=st.lists(st.floats(0.05, 50.0), min_size=4, max_size=4),
       i=st.integers(0, 3), f=st.floats(1.0, 5.0))
def test_condition_monotone_in_each_length(a, i, f):
    co = C.coefficients(C.cross_trial(), build_domain("cross", (1, 1, 1, 1)))
    before = C.check(co, a)
    longer = list(a)
    longer[i] *= f
    after = C.check(co, longer)
    assert after.lhs <= before.lhs and after.rhs >= before.rhs
    if before.satisfied:
        assert after.satisfied


@settings(max_examples=12, deadline=None)
@given(alpha=st.floats(0.05, 0.95))
def test_kappa_direct_below_bound(alpha):
    kb, tb = bentstrip.kappa_bound(alpha, 400)
    kd, td = bentstrip.kappa_direct(alpha, 400)
    assert kd <= kb + tb + td


@pytest.mark.parametrize("width", [1.0, 0.5, 2.0])
def test_transverse_orthonormality(width):
    basis = TransverseBasis(width)
    x, w = np.polynomial.legendre.leggauss(200)
    s = (x + 1) * width / 2
    w = w * width / 2
    n = np.arange(1, 21)
    P = basis.psi(n[:, None], s[None])
    assert np.allclose((P * w) @ P.T, np.eye(20), atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(n=st.integers(1, 30), lam=st.floats(0.0, 0.999))
def test_dtn_long_branch_limit(n, lam):
    g, _ = gamma(n, lam * PI2)
    assert dtn_coefficient(n, lam * PI2, 200.0) == pytest.approx(g, rel=1e-12)
    assert dtn_coefficient(n, lam * PI2, 0.5) >= g


@settings(max_examples=50, deadline=None)
@given(a=st.floats(0.1, 20.0))
def test_dtn_cutoff_limit(a):
    # at lam = nu_1 the first coefficient is the removable limit 1 / a
    assert dtn_coefficient(1, UNIT.nu(1), a) == pytest.approx(1 / a, rel=1e-12)
    near = dtn_coefficient(1, UNIT.nu(1) * (1 - 1e-12), a)
    assert near == pytest.approx(1 / a, rel=1e-6)
