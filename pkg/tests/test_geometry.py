import math

import numpy as np
import pytest

from trapmodes.geometry import (GeometryError, build_domain, generate_mesh, interface_trace,
                                read_mesh, write_mesh)


def _conforming(mesh):
    counts = np.array(list(mesh.edge_counts().values()))
    return np.all((counts == 1) | (counts == 2))


def test_catalog_areas():
    assert build_domain("l_shape", (1, 1)).area == pytest.approx(3.0)
    assert build_domain("bent_strip", (0, 0)).area == pytest.approx(math.pi / 4)
    assert build_domain("cross", (5, 5, 5, 5)).area == pytest.approx(21.0)
    assert build_domain("bent_strip", (0, 0)).branches == ()


@pytest.mark.parametrize("name,params", [
    ("nope", ()), ("l_shape", (1, -1)), ("truncated_l", (1.5, 1, 1)),
    ("coupled_cross", (2.0, 1, 1, 1, 1)), ("l_shape", (1,)), ("unit_square", (1,)),
])
def test_build_domain_errors(name, params):
    with pytest.raises(GeometryError):
        build_domain(name, params)


def test_lattice_count_l_shape():
    m = generate_mesh(build_domain("l_shape", (1, 1)), 1 / 8)
    # three 8x8 cell squares sharing two 9-node edges
    assert m.n_nodes == 3 * 81 - 2 * 9
    assert m.area() == pytest.approx(3.0, abs=1e-12)


def test_unit_square_area_exact():
    m = generate_mesh(build_domain("unit_square"), 1 / 16)
    assert abs(m.area() - 1.0) < 1e-12


def test_bent_strip_area_second_order():
    exact = math.pi / 4 + 4
    errs = [abs(generate_mesh(build_domain("bent_strip", (2, 2)), h).area() - exact)
            for h in (1 / 8, 1 / 16, 1 / 32)]
    assert errs[0] / errs[1] == pytest.approx(4, rel=0.05)
    assert errs[1] / errs[2] == pytest.approx(4, rel=0.05)


@pytest.mark.parametrize("name,params", [
    ("l_shape", (1, 2)), ("cross", (1, 1, 1, 1)), ("bent_strip", (1, 1.5)),
    ("truncated_l", (0.5, 1, 1)), ("truncated_l", (0, 1, 1)), ("coupled_cross", (0.5, 1, 1, 1, 1)),
    ("rectangle", (2,)), ("quarter_disk", ()), ("right_triangle", ()),
])
@pytest.mark.parametrize("region", ["full_domain", "basic_only"])
def test_mesh_invariants(name, params, region):
    spec = build_domain(name, params)
    if region == "basic_only" and not spec.branches:
        return
    m = generate_mesh(spec, 1 / 8, region=region)
    assert np.all(m.signed_areas() > 0)
    assert _conforming(m)
    area = spec.area if region == "full_domain" else spec.basic.area
    tol = 0.02 if spec.basic.kind == "quarter_disk" else 1e-12
    assert m.area() == pytest.approx(area, abs=tol)
    for i, br in enumerate(spec.branches):
        tr = interface_trace(m, i)
        pts = m.nodes[tr.nodes]
        t, s = br.to_local(pts[:, 0], pts[:, 1])
        assert np.max(np.abs(t)) < 1e-12
        assert np.allclose(s, tr.s, atol=1e-12)
        assert tr.dirichlet[0] and tr.dirichlet[-1]
        if region == "basic_only":
            assert not np.any(tr.dirichlet[1:-1])


def test_interface_trace_examples():
    m = generate_mesh(build_domain("l_shape", (1, 1)), 1 / 8, region="basic_only")
    tr = interface_trace(m, 0)
    assert len(tr) == 9
    assert np.allclose(tr.s, np.arange(9) / 8)
    x, y = m.nodes[tr.nodes].T
    v = (1 + x) * np.sin(np.pi * y) + (1 + y) * np.sin(np.pi * x)
    # the east interface runs from (0,-1) to (0,0): s = 1/2 at y = -1/2
    assert abs(v[4]) == pytest.approx(1.0)
    assert abs(v[0]) < 1e-15 and abs(v[-1]) < 1e-15
    with pytest.raises(IndexError):
        interface_trace(m, 2)


def test_h_validation():
    spec = build_domain("l_shape", (1, 1))
    with pytest.raises(GeometryError):
        generate_mesh(spec, 0.5)
    with pytest.raises(GeometryError):
        generate_mesh(spec, 0.3)
    with pytest.raises(GeometryError):
        generate_mesh(spec, 1 / 8, region="somewhere")


def test_refinement_nests_rectilinear():
    spec = build_domain("cross", (1, 1.5, 1, 1))
    coarse = generate_mesh(spec, 1 / 8)
    fine = generate_mesh(spec, 1 / 8, refine=1)
    fine_keys = {tuple(np.round(p * 1024).astype(int)) for p in fine.nodes}
    assert all(tuple(np.round(p * 1024).astype(int)) in fine_keys for p in coarse.nodes)


def test_truncated_one_is_l_shape():
    a = generate_mesh(build_domain("truncated_l", (1, 1, 2)), 1 / 8)
    b = generate_mesh(build_domain("l_shape", (1, 2)), 1 / 8)
    assert np.array_equal(a.nodes, b.nodes)
    assert np.array_equal(a.triangles, b.triangles)
    assert np.array_equal(a.dirichlet, b.dirichlet)


def test_truncated_zero_is_triangle():
    a = generate_mesh(build_domain("truncated_l", (0, 0, 0)), 1 / 8)
    b = generate_mesh(build_domain("right_triangle"), 1 / 8)
    assert np.array_equal(a.nodes, b.nodes) and np.array_equal(a.triangles, b.triangles)


def test_coupled_open_matches_cross():
    a = generate_mesh(build_domain("coupled_cross", (math.sqrt(2), 1, 1, 1, 1)), 1 / 8)
    b = generate_mesh(build_domain("cross", (1, 1, 1, 1)), 1 / 8)
    assert np.array_equal(a.nodes, b.nodes)
    assert np.array_equal(a.triangles, b.triangles)
    assert np.array_equal(a.dirichlet, b.dirichlet)


def test_coupled_closed_splits_domain():
    m = generate_mesh(build_domain("coupled_cross", (0, 1, 1, 1, 1)), 1 / 8)
    x, y = m.nodes.T
    on_diag = np.abs(x + y + 1) < 1e-12
    assert np.all(m.dirichlet[on_diag])
    # no triangle straddles the barrier
    side = np.sign(np.round(x + y + 1, 12))[m.triangles]
    assert not np.any((side.max(axis=1) > 0) & (side.min(axis=1) < 0))


def test_coupled_snapping_reported():
    m = generate_mesh(build_domain("coupled_cross", (0.5, 1, 1, 1, 1)), 1 / 8)
    assert m.metadata["snapped"]
    assert abs(m.metadata["eps_effective"] - 0.5) <= math.sqrt(2) / 8
    exact = generate_mesh(build_domain("coupled_cross", (math.sqrt(2) / 2, 1, 1, 1, 1)), 1 / 8)
    assert not exact.metadata["snapped"]


def test_mesh_roundtrip(tmp_path):
    m = generate_mesh(build_domain("l_shape", (1, 1)), 1 / 4)
    path = tmp_path / "mesh.txt"
    write_mesh(m, path)
    assert path.read_text().splitlines()[0] == f"nodes {m.n_nodes} triangles {m.n_triangles}"
    nodes, tris, dirichlet, interfaces = read_mesh(path)
    assert np.array_equal(nodes, m.nodes)
    assert np.array_equal(tris, m.triangles)
    assert set(dirichlet.tolist()) == set(np.flatnonzero(m.dirichlet).tolist())
    assert len(interfaces) == 2


def test_mesh_is_immutable():
    m = generate_mesh(build_domain("l_shape", (1, 1)), 1 / 4)
    with pytest.raises(ValueError):
        m.nodes[0, 0] = 1.0
