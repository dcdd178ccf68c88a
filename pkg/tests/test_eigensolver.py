import math

import numpy as np
import pytest
import scipy.sparse as sp

from trapmodes import condition as C
from trapmodes.eigensolver import (PI2, BracketError, SolverError, assemble, element_matrices,
                                   find_a_min, localization_verdict, richardson,
                                   smallest_eigenpairs, solve_domain, solve_mesh)
from trapmodes.geometry import build_domain, generate_mesh


def test_constant_in_stiffness_kernel():
    K, M = element_matrices(generate_mesh(build_domain("cross", (1, 1, 1, 1)), 1 / 8))
    one = np.ones(K.shape[0])
    assert np.max(np.abs(K @ one)) < 1e-12
    assert one @ (M @ one) == pytest.approx(5.0, abs=1e-12)


def test_mass_total_is_area_for_disk():
    mesh = generate_mesh(build_domain("bent_strip", (1, 1)), 1 / 16)
    _, M = element_matrices(mesh)
    one = np.ones(M.shape[0])
    assert one @ (M @ one) == pytest.approx(mesh.area(), abs=1e-12)


def test_assembly_symmetric_positive_definite():
    K, M = assemble(generate_mesh(build_domain("l_shape", (1, 1)), 1 / 8))
    assert abs(K - K.T).max() < 1e-14
    assert abs(M - M.T).max() < 1e-14
    assert np.all(np.linalg.eigvalsh(K.toarray()) > 0)


def test_degenerate_triangle_rejected():
    mesh = generate_mesh(build_domain("unit_square"), 1 / 4)
    nodes = mesh.nodes.copy()
    t = mesh.triangles[0]
    nodes[t[2]] = 0.5 * (nodes[t[0]] + nodes[t[1]])
    bad = type(mesh)(nodes, mesh.triangles, mesh.dirichlet, mesh.interfaces, mesh.h,
                     mesh.region, mesh.spec)
    with pytest.raises(SolverError):
        element_matrices(bad)


def test_unit_square_extrapolated():
    r = solve_domain(build_domain("unit_square"), 1 / 32)
    assert r.best_over_pi2[0] == pytest.approx(2.0, rel=2e-3)
    assert r.eigenvalues[0] < r.coarse[0]       # convergence from above
    # raw P1 error is O(h^2) with constant close to lambda / 12 on this pattern
    err = r.coarse[0] / (2 * PI2) - 1
    assert err == pytest.approx(2 * PI2 / 12 / 32 ** 2 * 1.25, rel=0.1)


@pytest.mark.xfail(strict=True, reason="raw P1 error at h=1/32 is 2.14e-3; only the "
                                       "extrapolated value meets 2e-3")
def test_unit_square_raw_h32_within_2e3():
    raw = solve_mesh(generate_mesh(build_domain("unit_square"), 1 / 32), 1)
    assert abs(raw.eigenvalues[0] / (2 * PI2) - 1) < 2e-3


def test_rectangle_spectrum_and_verdict():
    a = 2.0
    spec = build_domain("rectangle", (a,))
    r = solve_domain(spec, 1 / 16, k=3)
    exact = [PI2 * (1 + 1 / (a + 1) ** 2), PI2 * (1 + 4 / (a + 1) ** 2), PI2 * (1 + 9 / (a + 1) ** 2)]
    assert np.allclose(r.best, exact, rtol=2e-3)
    assert not any(v.trapped for v in localization_verdict(r, spec))


def test_eigenpair_contract():
    spec = build_domain("l_shape", (1, 1))
    mesh = generate_mesh(spec, 1 / 16)
    K, M = assemble(mesh)
    lam, X, res = smallest_eigenpairs(K, M, 4)
    assert np.all(np.diff(lam) >= 0)
    assert np.all(res < 1e-8)
    assert np.allclose(X.T @ (M @ X), np.eye(4), atol=1e-10)
    lam2, X2, _ = smallest_eigenpairs(K, M, 4)
    assert np.array_equal(lam, lam2) and np.array_equal(X, X2)
    with pytest.raises(ValueError):
        smallest_eigenpairs(K, M, 0)


def test_dense_fallback_small():
    K = sp.csc_matrix(np.diag([3.0, 1.0, 2.0]))
    M = sp.identity(3, format="csc")
    lam, X, _ = smallest_eigenpairs(K, M, 2)
    assert np.allclose(lam, [1.0, 2.0])


def test_richardson():
    # exact for a pure h^2 error
    assert richardson(1.0 + 4e-2, 1.0 + 1e-2) == pytest.approx(1.0)


def test_cross_degenerate_pair_fixed_h():
    r = solve_mesh(generate_mesh(build_domain("cross", (2, 2, 2, 2)), 1 / 16), 3)
    assert abs(r.eigenvalues[2] - r.eigenvalues[1]) <= 1e-6 * r.eigenvalues[1]
    assert (1, 2) in r.degenerate_pairs


def test_refinement_decreases_eigenvalues():
    for spec in (build_domain("l_shape", (1, 1)), build_domain("truncated_l", (0.5, 1, 1))):
        lam = [solve_mesh(generate_mesh(spec, 1 / 8, refine=r), 2).eigenvalues for r in range(3)]
        assert np.all(lam[1] < lam[0]) and np.all(lam[2] < lam[1])


@pytest.mark.parametrize("name,params,trial", [
    ("l_shape", (2, 2), C.l_shape_trial), ("cross", (1, 1, 1, 1), C.cross_trial),
    ("bent_strip", (4, 4), C.bent_trial),
])
def test_rayleigh_upper_bound_chain(name, params, trial):
    spec = build_domain(name, params)
    co = C.coefficients(trial(), spec)
    rep = C.check(co, spec.lengths)
    lam_v = C.trial_fixed_point(co, spec.lengths)
    assert rep.mu_of_v <= lam_v < PI2
    lam = solve_domain(spec, 1 / 16 if name != "bent_strip" else 1 / 24).best[0]
    assert lam <= lam_v * (1 + 1e-3)


def test_find_a_min_bracket_error():
    fam = lambda a: build_domain("truncated_l", (0, a, a))  # noqa: E731
    with pytest.raises(BracketError):
        find_a_min(fam, (0.5, 3.0), 1 / 8)


def test_find_a_min_coarse_l_shape():
    fam = lambda a: build_domain("l_shape", (a, a))  # noqa: E731
    a, hist = find_a_min(fam, (0.5, 1.5), 1 / 8, atol=1e-2)
    assert 0.78 < a < 0.9
    lo = [v for x, v in hist if x < a]
    hi = [v for x, v in hist if x > a]
    assert all(v > 1 for v in lo) and all(v < 1 for v in hi)


def test_localization_verdict_profiles():
    spec = build_domain("cross", (3, 3, 3, 3))
    r = solve_domain(spec, 1 / 16, k=2)
    v = localization_verdict(r, spec)
    assert v[0].trapped and not v[1].trapped
    assert len(v[0].profiles) == 4 and len(v[0].rates) == 4
    pred = 2 * math.sqrt(PI2 - v[0].eigenvalue)
    assert all(abs(x / pred - 1) < 0.05 for x in v[0].rates)
