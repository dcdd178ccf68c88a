"""Geometry catalog and structured triangulations of finite waveguides.

Every catalog domain is a basic domain inside the square [-1, 0]^2 with
unit-width rectangular branches glued to its sides:

    east   x = 0,  branch along +x      north  y = 0,  branch along +y
    west   x = -1, branch along -x      south  y = -1, branch along -y

Inside a branch a point is addressed by (t, s): t >= 0 is the distance from
the interface and s in [0, 1] the position across it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SIDES", "BranchSpec", "BasicDomainSpec", "WaveguideSpec", "Mesh",
    "BranchGrid", "InterfaceTrace", "GeometryError", "build_domain",
    "generate_mesh", "interface_trace", "write_mesh", "read_mesh", "CATALOG",
]

SQRT2 = math.sqrt(2.0)

# side -> (origin of s=0, tangent (s direction), outward normal (t direction))
SIDES: dict[str, tuple[tuple[float, float], tuple[float, float], tuple[float, float]]] = {
    "east": ((0.0, -1.0), (0.0, 1.0), (1.0, 0.0)),
    "north": ((-1.0, 0.0), (1.0, 0.0), (0.0, 1.0)),
    "west": ((-1.0, -1.0), (0.0, 1.0), (-1.0, 0.0)),
    "south": ((-1.0, -1.0), (1.0, 0.0), (0.0, -1.0)),
}

BASIC_KINDS = ("unit_square", "quarter_disk", "truncated_square",
               "right_triangle", "coupled_square")


class GeometryError(ValueError):
    """Invalid geometry request (bad name, parameters or resolution)."""


@dataclass(frozen=True)
class BranchSpec:
    length: float
    attachment: str
    width: float = 1.0

    def __post_init__(self):
        if not self.length > 0:
            raise GeometryError(f"branch length must be positive, got {self.length}")
        if self.width != 1.0:
            raise GeometryError("catalog branches have unit width")
        if self.attachment not in SIDES:
            raise GeometryError(f"unknown attachment side {self.attachment!r}")

    @property
    def axis(self):
        """(origin, tangent, normal) of the local branch frame."""
        return SIDES[self.attachment]

    def to_global(self, t, s):
        (ox, oy), (tx, ty), (nx, ny) = self.axis
        t = np.asarray(t, dtype=float)
        s = np.asarray(s, dtype=float)
        return ox + s * tx + t * nx, oy + s * ty + t * ny

    def to_local(self, x, y):
        (ox, oy), (tx, ty), (nx, ny) = self.axis
        dx = np.asarray(x, dtype=float) - ox
        dy = np.asarray(y, dtype=float) - oy
        return dx * nx + dy * ny, dx * tx + dy * ty


@dataclass(frozen=True)
class BasicDomainSpec:
    kind: str
    param: float | None = None

    def __post_init__(self):
        if self.kind not in BASIC_KINDS:
            raise GeometryError(f"unknown basic domain {self.kind!r}")
        if self.kind == "truncated_square":
            if self.param is None or not 0.0 <= self.param <= 1.0:
                raise GeometryError("truncated_square needs 0 <= ell <= 1")
        elif self.kind == "coupled_square":
            if self.param is None or not 0.0 <= self.param <= SQRT2 + 1e-12:
                raise GeometryError("coupled_square needs 0 <= eps <= sqrt(2)")
        elif self.param is not None:
            raise GeometryError(f"{self.kind} takes no parameter")

    @property
    def area(self) -> float:
        if self.kind == "quarter_disk":
            return math.pi / 4
        if self.kind == "right_triangle":
            return 0.5
        if self.kind == "truncated_square":
            return 1.0 - 0.5 * (1.0 - self.param) ** 2
        return 1.0

    def contains(self, x, y):
        """Vectorized membership test of points in the open basic domain."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        inside = (x > -1) & (x < 0) & (y > -1) & (y < 0)
        if self.kind == "quarter_disk":
            inside &= x * x + y * y < 1
        elif self.kind == "right_triangle":
            inside &= x + y > -1
        elif self.kind == "truncated_square":
            inside &= x + y > -1 - self.param
        return inside


@dataclass(frozen=True)
class WaveguideSpec:
    name: str
    basic: BasicDomainSpec
    branches: tuple[BranchSpec, ...] = ()
    params: tuple[float, ...] = ()

    def __post_init__(self):
        sides = [b.attachment for b in self.branches]
        if len(set(sides)) != len(sides):
            raise GeometryError("branch attachments must be pairwise disjoint")
        if self.basic.kind == "coupled_square" and self.basic.param == 0 and not self.branches:
            raise GeometryError("closed barrier without branches is disconnected")

    @property
    def M(self) -> int:
        return len(self.branches)

    @property
    def lengths(self) -> tuple[float, ...]:
        return tuple(b.length for b in self.branches)

    @property
    def area(self) -> float:
        return self.basic.area + sum(b.length * b.width for b in self.branches)


def _lengths(name, params, count):
    if len(params) != count:
        raise GeometryError(f"{name} expects {count} lengths, got {len(params)}")
    for a in params:
        if a < 0:
            raise GeometryError(f"negative branch length {a}")
    return [float(a) for a in params]


def _branches(lengths, sides):
    return tuple(BranchSpec(a, side) for a, side in zip(lengths, sides) if a > 0)


_TWO = ("east", "north")
_FOUR = ("east", "north", "west", "south")

CATALOG = ("l_shape", "cross", "bent_strip", "truncated_l", "coupled_cross",
           "rectangle", "quarter_disk", "right_triangle", "unit_square")


def build_domain(name: str, params=()) -> WaveguideSpec:
    """Build a catalog waveguide. Zero-length branches are omitted.

    >>> build_domain("l_shape", (1, 1)).area
    3.0
    """
    params = tuple(float(p) for p in params)
    if name == "l_shape":
        basic, br = BasicDomainSpec("unit_square"), _branches(_lengths(name, params, 2), _TWO)
    elif name == "cross":
        basic, br = BasicDomainSpec("unit_square"), _branches(_lengths(name, params, 4), _FOUR)
    elif name == "bent_strip":
        basic, br = BasicDomainSpec("quarter_disk"), _branches(_lengths(name, params, 2), _TWO)
    elif name == "truncated_l":
        if len(params) != 3:
            raise GeometryError("truncated_l expects (ell, a1, a2)")
        basic = BasicDomainSpec("truncated_square", params[0])
        br = _branches(_lengths(name, params[1:], 2), _TWO)
    elif name == "coupled_cross":
        if len(params) != 5:
            raise GeometryError("coupled_cross expects (eps, a1, a2, a3, a4)")
        basic = BasicDomainSpec("coupled_square", params[0])
        br = _branches(_lengths(name, params[1:], 4), _FOUR)
    elif name == "rectangle":
        basic, br = BasicDomainSpec("unit_square"), _branches(_lengths(name, params, 1), ("east",))
    elif name in ("quarter_disk", "right_triangle", "unit_square"):
        if params:
            raise GeometryError(f"{name} takes no parameters")
        basic, br = BasicDomainSpec(name), ()
    else:
        raise GeometryError(f"unknown catalog domain {name!r}")
    return WaveguideSpec(name, basic, br, params)


# ---------------------------------------------------------------------------
# meshes


@dataclass(frozen=True)
class BranchGrid:
    """Node lines of a meshed branch: nodes[k, j] sits at (t[k], s[j])."""
    t: np.ndarray
    s: np.ndarray
    nodes: np.ndarray


@dataclass(frozen=True)
class InterfaceTrace:
    s: np.ndarray
    nodes: np.ndarray
    dirichlet: np.ndarray

    def __iter__(self):
        return iter(zip(self.s.tolist(), self.nodes.tolist()))

    def __len__(self):
        return len(self.s)


@dataclass(frozen=True)
class Mesh:
    nodes: np.ndarray
    triangles: np.ndarray
    dirichlet: np.ndarray          # bool mask over nodes
    interfaces: tuple              # per branch: (s, node index) sorted by s
    h: float
    region: str
    spec: WaveguideSpec
    branch_grids: tuple = ()
    metadata: dict = field(default_factory=dict)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def signed_areas(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def area(self) -> float:
        return float(self.signed_areas().sum())

    def edge_counts(self) -> dict:
        """Map sorted edge (i, j) -> number of incident triangles."""
        e = np.sort(self.triangles[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1)
        uniq, counts = np.unique(e, axis=0, return_counts=True)
        return {tuple(k): int(c) for k, c in zip(uniq.tolist(), counts)}

    @property
    def free(self) -> np.ndarray:
        return np.flatnonzero(~self.dirichlet)


def _freeze(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


def _lattice_count(h: float) -> int:
    K = 1.0 / h
    k = int(round(K))
    if abs(K - k) > 1e-9 * K:
        raise GeometryError(f"h = {h} must divide the unit branch width")
    return k


def _anti(ij, offset):
    """Union-jack rule: the cell splits along its anti-diagonal iff ij - offset is even."""
    return (np.asarray(ij) - offset) % 2 == 0


def _square_tris(K, offset, keep=None):
    """Union-jack split of the K x K lattice on [-1, 0]^2.

    Cells whose lattice index sum has the parity of offset split along the
    anti-diagonal, the others along the diagonal; for even K the pattern has
    the full symmetry of the square.  keep(i + j, upper) filters triangles.
    """
    tris = []
    for i in range(K):
        for j in range(K):
            p00, p10, p01, p11 = (i, j), (i + 1, j), (i, j + 1), (i + 1, j + 1)
            if _anti(i + j, offset):
                pair = ((p00, p10, p01), 0), ((p10, p11, p01), 1)
            else:
                pair = ((p00, p10, p11), 0), ((p00, p11, p01), 0)
            for tri, up in pair:
                if keep is None or keep(i + j, up):
                    tris.append(tri)
    pts = np.array([v for t in tris for v in t], dtype=float) / K - 1.0
    return pts.reshape(-1, 3, 2)


def _quarter_disk_tris(K):
    """Ring-structured triangulation of the quarter disk with K radial rings.

    Ring k (radius k/K) carries 2k equal angular segments, so the two straight
    sides get nodes at spacing 1/K and the arc nodes lie exactly on r = 1.
    """
    rings = [np.array([[0.0, 0.0]])]
    angles = [np.array([0.0])]
    for k in range(1, K + 1):
        r = k / K
        j = np.arange(2 * k + 1)
        th = (np.pi / 2) * j / (2 * k)
        pts = np.column_stack([-r * np.cos(th), -r * np.sin(th)])
        pts[0] = (-r, 0.0)          # exact points on the interfaces
        pts[-1] = (0.0, -r)
        rings.append(pts)
        angles.append(th)
    tris = []
    for k in range(K):
        A, B, ta, tb = rings[k], rings[k + 1], angles[k], angles[k + 1]
        if k == 0:
            for j in range(len(B) - 1):
                tris.append((A[0], B[j], B[j + 1]))
            continue
        i = j = 0
        while i < len(A) - 1 or j < len(B) - 1:
            if i == len(A) - 1 or (j < len(B) - 1 and tb[j + 1] <= ta[i + 1]):
                tris.append((A[i], B[j], B[j + 1]))
                j += 1
            else:
                tris.append((A[i], B[j], A[i + 1]))
                i += 1
    return np.array(tris, dtype=float)


def _branch_tris(branch: BranchSpec, nt: int, ns: int, offset=None):
    """Structured branch cells; offset selects the union-jack pattern of the
    basic-domain lattice, None a uniform global anti-diagonal split."""
    t = np.linspace(0.0, branch.length, nt + 1)
    s = np.arange(ns + 1) / ns
    T, S = np.meshgrid(t, s, indexing="ij")
    X, Y = branch.to_global(T, S)
    P = np.stack([X, Y], axis=-1)
    p00, p10 = P[:-1, :-1], P[1:, :-1]
    p01, p11 = P[:-1, 1:], P[1:, 1:]
    # does the local diagonal p10-p01 run along the global anti-diagonal?
    d = (p01 - p10)[0, 0]
    local_anti = d[0] * d[1] < 0
    if offset is None:
        anti = np.full(p00.shape[:2], True)
    else:
        xc, yc = branch.to_global(min(0.5 / ns, 0.5 * t[1]), 0.5 / ns)
        base = math.floor((xc + 1) * ns) + math.floor((yc + 1) * ns)
        k, j = np.meshgrid(np.arange(nt), np.arange(ns), indexing="ij")
        anti = _anti(base + k + j, offset)
    split_b = anti == local_anti          # split along p10-p01
    A1 = np.stack([p00, p10, p01], axis=2)
    A2 = np.stack([p10, p11, p01], axis=2)
    B1 = np.stack([p00, p10, p11], axis=2)
    B2 = np.stack([p00, p11, p01], axis=2)
    first = np.where(split_b[..., None, None], A1, B1).reshape(-1, 3, 2)
    second = np.where(split_b[..., None, None], A2, B2).reshape(-1, 3, 2)
    return np.concatenate([first, second]), t, s, P


def _pattern_offset(basic: BasicDomainSpec, K: int):
    """Lattice parity offset of the union-jack pattern, None for the disk.

    The offset puts an anti-diagonal edge on the cut line x + y = -1 - ell
    (ell = 0 for the square, the triangle and the coupling barrier).
    """
    if basic.kind == "quarter_disk":
        return None
    if basic.kind in ("truncated_square", "right_triangle"):
        ell = 0.0 if basic.kind == "right_triangle" else basic.param
        m = int(round(K * (1.0 - ell)))
        if m > 0:                     # m = 0: no cut, keep the square's pattern
            return m - 1
    return K - 1


def _basic_tris(basic: BasicDomainSpec, K: int, meta: dict):
    kind = basic.kind
    offset = _pattern_offset(basic, K)
    if kind in ("unit_square", "coupled_square"):
        return _square_tris(K, offset)
    if kind == "quarter_disk":
        return _quarter_disk_tris(K)
    ell = 0.0 if kind == "right_triangle" else basic.param
    m_exact = K * (1.0 - ell)
    m = int(round(m_exact))
    if abs(m - m_exact) > 1e-9:
        meta["ell_snapped"] = 1.0 - m / K
        meta["snapped"] = True
    return _square_tris(K, offset, keep=lambda ij, up: ij + up >= m)


class _Keys:
    """Integer point keys on a grid 1024 times finer than the mesh lattice.

    Lattice points map to exact multiples of 1024, so the same point computed
    along different routes (ulp differences) always gets the same key.
    """

    def __init__(self, K, pts):
        self.scale = 1024.0 * K
        k = np.round(pts * self.scale).astype(np.int64)
        self.lo = k.min(axis=0) - 1
        self.span = int(k[:, 1].max() - self.lo[1] + 2)

    def __call__(self, pts):
        k = np.round(np.asarray(pts).reshape(-1, 2) * self.scale).astype(np.int64) - self.lo
        return k[:, 0] * self.span + k[:, 1]


def _merge(tri_pts, K):
    flat = tri_pts.reshape(-1, 2)
    keyf = _Keys(K, flat)
    uniq, inv = np.unique(keyf(flat), return_inverse=True)
    nodes = np.zeros((len(uniq), 2))
    nodes[inv] = flat
    return nodes, inv.reshape(-1, 3), uniq, keyf


def _boundary_edges(tri, n):
    e = np.sort(tri[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1)
    code = e[:, 0].astype(np.int64) * n + e[:, 1]
    uniq, counts = np.unique(code, return_counts=True)
    b = uniq[counts == 1]
    return np.column_stack([b // n, b % n])


def generate_mesh(spec: WaveguideSpec, h: float, region: str = "full_domain",
                  refine: int = 0) -> Mesh:
    """Structured P1 triangulation of the full waveguide or its basic domain.

    The unit branch width is split into 1/h cells (times 2**refine); along a
    branch of length a the cell count is ceil(a/h) (times 2**refine), so a
    refinement level exactly nests the coarser mesh for rectilinear domains.
    """
    if not h > 0 or h > 0.25 + 1e-12:
        raise GeometryError(f"h must satisfy 0 < h <= 1/4, got {h}")
    if region not in ("full_domain", "basic_only"):
        raise GeometryError(f"unknown region {region!r}")
    K0 = _lattice_count(h)
    K = K0 * 2 ** refine
    meta: dict = {"K": K, "snapped": False}
    parts = [_basic_tris(spec.basic, K, meta)]
    branch_pts = []
    if region == "full_domain":
        for br in spec.branches:
            nt = max(1, math.ceil(br.length / h - 1e-9)) * 2 ** refine
            tris, t, s, P = _branch_tris(br, nt, K, _pattern_offset(spec.basic, K))
            parts.append(tris)
            branch_pts.append((t, s, P))
    tri_pts = np.concatenate(parts)
    nodes, tri, keys, keyf = _merge(tri_pts, K)

    # orient counter-clockwise
    p = nodes[tri]
    d1, d2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
    neg = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0] < 0
    tri[neg] = tri[neg][:, [0, 2, 1]]

    def lookup(pts):
        k = keyf(pts)
        idx = np.searchsorted(keys, k)
        if np.any(idx >= len(keys)) or np.any(keys[np.minimum(idx, len(keys) - 1)] != k):
            raise GeometryError("point not found among mesh nodes")
        return idx

    # Dirichlet: nodes on boundary edges of the triangulation
    bnd_edges = _boundary_edges(tri, len(nodes))
    dirichlet = np.zeros(len(nodes), dtype=bool)

    interfaces = []
    s_grid = np.arange(K + 1) / K
    for br in spec.branches:
        gx, gy = br.to_global(np.zeros_like(s_grid), s_grid)
        idx = lookup(np.column_stack([gx, gy]))
        interfaces.append((_freeze(s_grid.copy()), _freeze(idx)))

    if region == "basic_only":
        # interface interiors carry the natural (DtN) condition
        on_iface = np.zeros(len(nodes), dtype=bool)
        for _, idx in interfaces:
            on_iface[idx[1:-1]] = True
        dirichlet[bnd_edges.ravel()] = True
        dirichlet[on_iface] = False
    else:
        dirichlet[bnd_edges.ravel()] = True

    if spec.basic.kind == "coupled_square":
        eps = spec.basic.param
        lo = int(round(K * (0.5 - eps / (2 * SQRT2))))
        hi = int(round(K * (0.5 + eps / (2 * SQRT2))))
        eps_eff = (hi - lo) * SQRT2 / K
        meta["eps_effective"] = eps_eff
        if abs(eps_eff - eps) > 1e-9:
            meta["snapped"] = True
        i = np.arange(K + 1)
        diag = lookup(np.column_stack([-1.0 + i / K, -i / K]))
        closed = (i <= lo) | (i >= hi)
        dirichlet[diag[closed]] = True

    grids = []
    if region == "full_domain":
        for t, s, P in branch_pts:
            grids.append(BranchGrid(_freeze(t), _freeze(s),
                                    _freeze(lookup(P).reshape(len(t), len(s)))))

    return Mesh(_freeze(nodes), _freeze(tri), _freeze(dirichlet), tuple(interfaces),
                h / 2 ** refine, region, spec, tuple(grids), meta)


def interface_trace(mesh: Mesh, i: int) -> InterfaceTrace:
    """Interface nodes of branch i sorted by arclength, endpoints flagged."""
    if not 0 <= i < len(mesh.interfaces):
        raise IndexError(f"branch index {i} out of range (M = {len(mesh.interfaces)})")
    s, idx = mesh.interfaces[i]
    return InterfaceTrace(s, idx, np.asarray(mesh.dirichlet)[idx])


# ---------------------------------------------------------------------------
# plain-text export


def write_mesh(mesh: Mesh, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"nodes {mesh.n_nodes} triangles {mesh.n_triangles}\n")
        for x, y in mesh.nodes:
            fh.write(f"{x:.17g} {y:.17g}\n")
        for a, b, c in mesh.triangles:
            fh.write(f"{a} {b} {c}\n")
        d = np.flatnonzero(mesh.dirichlet)
        fh.write(f"dirichlet {len(d)}\n")
        fh.write(" ".join(map(str, d)) + "\n")
        for k, (s, idx) in enumerate(mesh.interfaces):
            fh.write(f"interface {k} {len(idx)}\n")
            fh.write(" ".join(map(str, idx)) + "\n")


def read_mesh(path):
    """Read back (nodes, triangles, dirichlet indices, interface index lists)."""
    with open(path) as fh:
        head = fh.readline().split()
        n, t = int(head[1]), int(head[3])
        nodes = np.array([fh.readline().split() for _ in range(n)], dtype=float)
        tris = np.array([fh.readline().split() for _ in range(t)], dtype=int)
        fh.readline()
        line = fh.readline().split()
        dirichlet = np.array(line, dtype=int)
        interfaces = []
        while True:
            hdr = fh.readline()
            if not hdr:
                break
            interfaces.append(np.array(fh.readline().split(), dtype=int))
    return nodes, tris, dirichlet, interfaces
