"""Admissible TPFA meshes in 1D/2D and the piecewise-constant function framework.

A mesh is a flat, array-oriented structure: one record per cell and one per
edge.  Interior edges know both adjacent cells, boundary edges only one.  The
transmissibility tau = m(sigma)/d_sigma is precomputed per edge.  In 1D the
edge measure is taken as 1, so tau = 1/d_sigma and the scheme reduces to the
classical three-point stencil.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Mesh",
    "DiscreteField",
    "MeshError",
    "AdmissibilityReport",
    "build_uniform_1d",
    "build_from_triangulation",
    "check_admissibility",
    "project_cell_averages",
    "mean_value",
    "lebesgue_norm",
    "discrete_seminorm",
    "approximate_gradient",
    "dump_mesh",
]

# Relative geometric tolerance for degeneracy / orthogonality checks.
_GEOM_TOL = 1e-12


class MeshError(ValueError):
    """Invalid or inadmissible mesh input."""


@dataclass(eq=False)
class Mesh:
    """Immutable TPFA mesh. All arrays are index-aligned per cell / per edge.

    Edge orientation: ``edge_cells[e] = (K, L)`` with ``L = -1`` on the
    boundary; ``edge_normal[e]`` is the unit normal pointing out of ``K``.
    ``edge_signed_dist[e]`` holds the signed distances from ``x_K`` (and
    ``x_L`` for interior edges) to the edge hyperplane; negative values mean
    the cell center lies on the wrong side (e.g. circumcenter outside an
    obtuse triangle).
    """

    dim: int
    cell_volumes: np.ndarray          # (n,)
    cell_centers: np.ndarray          # (n, dim)
    edge_cells: np.ndarray            # (m, 2) int, L = -1 for boundary
    edge_measure: np.ndarray          # (m,)
    edge_distance: np.ndarray         # (m,) d_sigma
    edge_tau: np.ndarray              # (m,) m(sigma)/d_sigma
    edge_normal: np.ndarray           # (m, dim), outward from first cell
    edge_signed_dist: np.ndarray      # (m, 2), signed dist(x_K, sigma); nan for missing L
    diamond_volume: np.ndarray        # (m,) volume of the dual cell spanning the edge
    size: float                       # max cell diameter
    # optional triangulation provenance, kept for VTK export / quadrature
    vertices: np.ndarray | None = None
    cells_vertices: np.ndarray | None = None
    # derived, filled in __post_init__
    n_cells: int = field(init=False)
    n_edges: int = field(init=False)
    domain_measure: float = field(init=False)
    interior: np.ndarray = field(init=False)          # (m,) bool
    interior_edges: np.ndarray = field(init=False)    # indices into edges
    boundary_edges: np.ndarray = field(init=False)
    int_K: np.ndarray = field(init=False)             # first cell of each interior edge
    int_L: np.ndarray = field(init=False)
    int_tau: np.ndarray = field(init=False)

    def __post_init__(self):
        self.n_cells = len(self.cell_volumes)
        self.n_edges = len(self.edge_measure)
        if np.any(self.cell_volumes <= 0):
            raise MeshError("non-positive cell volume")
        if np.any(self.edge_tau <= 0) or np.any(self.edge_distance <= 0):
            raise MeshError("degenerate transmissibility")
        self.domain_measure = float(self.cell_volumes.sum())
        self.interior = self.edge_cells[:, 1] >= 0
        self.interior_edges = np.flatnonzero(self.interior)
        self.boundary_edges = np.flatnonzero(~self.interior)
        self.int_K = self.edge_cells[self.interior_edges, 0]
        self.int_L = self.edge_cells[self.interior_edges, 1]
        self.int_tau = self.edge_tau[self.interior_edges]
        self._check_topology()
        # lazy caches (assembly pattern, Poisson factorization) owned by linsolve
        self._caches: dict = {}

    def _check_topology(self):
        counts = np.zeros(self.n_cells, dtype=np.int64)
        np.add.at(counts, self.edge_cells[:, 0], 1)
        np.add.at(counts, self.int_L, 1)
        if np.any(counts == 0):
            raise MeshError("cell without edges")
        tau = self.edge_tau
        expected = self.edge_measure / self.edge_distance
        if np.max(np.abs(tau - expected)) > _GEOM_TOL * np.max(tau):
            raise MeshError("transmissibility inconsistent with m(sigma)/d_sigma")

    def cell_edges(self, k: int) -> np.ndarray:
        """Edge indices incident to cell k (interior and boundary)."""
        return np.flatnonzero((self.edge_cells[:, 0] == k) | (self.edge_cells[:, 1] == k))

    def neighbors(self, k: int) -> np.ndarray:
        e = self.edge_cells[self.interior_edges]
        out = np.concatenate([e[e[:, 0] == k, 1], e[e[:, 1] == k, 0]])
        return np.sort(out)

    def is_connected(self) -> bool:
        label = np.arange(self.n_cells)
        # union-find over interior edges
        def find(i):
            while label[i] != i:
                label[i] = label[label[i]]
                i = label[i]
            return i
        for a, b in zip(self.int_K, self.int_L):
            ra, rb = find(a), find(b)
            if ra != rb:
                label[ra] = rb
        return len({find(i) for i in range(self.n_cells)}) == 1

    def field(self, values) -> "DiscreteField":
        return DiscreteField(np.asarray(values, dtype=float), self)

    def constant_field(self, c: float) -> "DiscreteField":
        return DiscreteField(np.full(self.n_cells, float(c)), self)


@dataclass
class DiscreteField:
    """One real value per cell (an element of the piecewise-constant space)."""

    values: np.ndarray
    mesh: Mesh

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.mesh.n_cells,):
            raise ValueError(
                f"field length {self.values.shape} does not match cell count {self.mesh.n_cells}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field contains non-finite values")

    def _coerce(self, other):
        if isinstance(other, DiscreteField):
            if other.mesh is not self.mesh:
                raise ValueError("fields live on different meshes")
            return other.values
        return other

    def __add__(self, other):
        return DiscreteField(self.values + self._coerce(other), self.mesh)

    def __sub__(self, other):
        return DiscreteField(self.values - self._coerce(other), self.mesh)

    def __mul__(self, other):
        return DiscreteField(self.values * self._coerce(other), self.mesh)

    __rmul__ = __mul__

    def copy(self) -> "DiscreteField":
        return DiscreteField(self.values.copy(), self.mesh)


@dataclass
class AdmissibilityReport:
    ok: bool
    worst_ratio: float
    offending_edges: list  # (edge index, cell index, ratio)


def build_uniform_1d(a: float, b: float, n_cells: int) -> Mesh:
    """Uniform 1D mesh on [a, b]; edge measure 1, so interior tau = n/(b-a)."""
    if not (np.isfinite(a) and np.isfinite(b)):
        raise MeshError("non-finite interval bounds")
    if not a < b:
        raise MeshError("need a < b")
    if n_cells < 2:
        raise MeshError("need at least 2 cells")
    n = int(n_cells)
    h = (b - a) / n
    centers = a + h * (np.arange(n) + 0.5)
    volumes = np.full(n, h)

    m = n + 1  # n-1 interior edges + 2 boundary edges
    edge_cells = np.empty((m, 2), dtype=np.int64)
    measure = np.ones(m)
    dist = np.empty(m)
    normal = np.empty((m, 1))
    signed = np.full((m, 2), np.nan)
    diamond = np.empty(m)
    # interior edges 0..n-2 between cells i and i+1
    edge_cells[: n - 1, 0] = np.arange(n - 1)
    edge_cells[: n - 1, 1] = np.arange(1, n)
    dist[: n - 1] = h
    normal[: n - 1, 0] = 1.0
    signed[: n - 1, 0] = h / 2
    signed[: n - 1, 1] = h / 2
    diamond[: n - 1] = h
    # boundary edges: last two entries (at a, then at b)
    edge_cells[n - 1] = (0, -1)
    edge_cells[n] = (n - 1, -1)
    dist[n - 1 :] = h / 2
    normal[n - 1, 0] = -1.0
    normal[n, 0] = 1.0
    signed[n - 1 :, 0] = h / 2
    diamond[n - 1 :] = h / 2

    return Mesh(
        dim=1,
        cell_volumes=volumes,
        cell_centers=centers.reshape(-1, 1),
        edge_cells=edge_cells,
        edge_measure=measure,
        edge_distance=dist,
        edge_tau=measure / dist,
        edge_normal=normal,
        edge_signed_dist=signed,
        diamond_volume=diamond,
        size=h,
    )


def _circumcenters(p0, p1, p2):
    """Circumcenters of triangles given vertex arrays (nt, 2) each."""
    d = 2.0 * (
        p0[:, 0] * (p1[:, 1] - p2[:, 1])
        + p1[:, 0] * (p2[:, 1] - p0[:, 1])
        + p2[:, 0] * (p0[:, 1] - p1[:, 1])
    )
    s0 = (p0 ** 2).sum(axis=1)
    s1 = (p1 ** 2).sum(axis=1)
    s2 = (p2 ** 2).sum(axis=1)
    ux = (s0 * (p1[:, 1] - p2[:, 1]) + s1 * (p2[:, 1] - p0[:, 1]) + s2 * (p0[:, 1] - p1[:, 1])) / d
    uy = (s0 * (p2[:, 0] - p1[:, 0]) + s1 * (p0[:, 0] - p2[:, 0]) + s2 * (p1[:, 0] - p0[:, 0])) / d
    return np.stack([ux, uy], axis=1)


def build_from_triangulation(vertices, triangles) -> Mesh:
    """TPFA mesh over a conforming triangulation; cell centers are circumcenters.

    Raises MeshError on non-conforming input, zero-area triangles, or a
    (near-)zero center distance across an edge, e.g. two right triangles
    whose circumcenters coincide.
    """
    verts = np.asarray(vertices, dtype=float)
    tris = np.asarray(triangles, dtype=np.int64)
    if verts.ndim != 2 or verts.shape[1] != 2:
        raise MeshError("vertices must be an (n, 2) array")
    if tris.ndim != 2 or tris.shape[1] != 3:
        raise MeshError("triangles must be an (n, 3) index array")
    if tris.min(initial=0) < 0 or tris.max(initial=-1) >= len(verts):
        raise MeshError("triangle index out of range")

    p0, p1, p2 = verts[tris[:, 0]], verts[tris[:, 1]], verts[tris[:, 2]]
    cross = (p1[:, 0] - p0[:, 0]) * (p2[:, 1] - p0[:, 1]) - (p1[:, 1] - p0[:, 1]) * (
        p2[:, 0] - p0[:, 0]
    )
    areas = 0.5 * np.abs(cross)
    scale = max(verts.max() - verts.min(), 1.0)
    if np.any(areas <= _GEOM_TOL * scale ** 2):
        raise MeshError("degenerate (zero-area) triangle")
    centers = _circumcenters(p0, p1, p2)
    centroids = (p0 + p1 + p2) / 3.0

    # gather unique edges: key = sorted vertex pair
    edge_map: dict[tuple[int, int], list[int]] = {}
    for t in range(len(tris)):
        a, b, c = tris[t]
        for u, v in ((a, b), (b, c), (c, a)):
            key = (u, v) if u < v else (v, u)
            edge_map.setdefault(key, []).append(t)

    n_edges = len(edge_map)
    edge_cells = np.empty((n_edges, 2), dtype=np.int64)
    measure = np.empty(n_edges)
    dist = np.empty(n_edges)
    normal = np.empty((n_edges, 2))
    signed = np.full((n_edges, 2), np.nan)
    diamond = np.empty(n_edges)

    h = 0.0
    for e, ((u, v), owners) in enumerate(sorted(edge_map.items())):
        if len(owners) > 2:
            raise MeshError(f"non-conforming triangulation: edge {u}-{v} shared by {len(owners)} triangles")
        k = owners[0]
        ell = owners[1] if len(owners) == 2 else -1
        edge_cells[e] = (k, ell)
        pa, pb = verts[u], verts[v]
        mvec = pb - pa
        mlen = float(np.hypot(mvec[0], mvec[1]))
        measure[e] = mlen
        mid = 0.5 * (pa + pb)
        nrm = np.array([mvec[1], -mvec[0]]) / mlen
        if np.dot(nrm, mid - centroids[k]) < 0:
            nrm = -nrm
        normal[e] = nrm
        signed[e, 0] = np.dot(mid - centers[k], nrm)
        if ell >= 0:
            dvec = centers[ell] - centers[k]
            dist[e] = float(np.hypot(dvec[0], dvec[1]))
            if dist[e] <= _GEOM_TOL * scale:
                raise MeshError(
                    f"degenerate transmissibility: coincident circumcenters across edge {u}-{v}"
                )
            # admissibility requires x_K x_L orthogonal to the edge
            tangent = mvec / mlen
            if abs(np.dot(dvec, tangent)) > 1e-8 * dist[e]:
                raise MeshError(f"center segment not orthogonal to edge {u}-{v}")
            signed[e, 1] = np.dot(mid - centers[ell], -nrm)
            diamond[e] = mlen * dist[e] / 2.0
        else:
            d_b = abs(signed[e, 0])
            if d_b <= _GEOM_TOL * scale:
                raise MeshError(
                    f"degenerate transmissibility: circumcenter on boundary edge {u}-{v}"
                )
            dist[e] = d_b
            diamond[e] = mlen * d_b / 2.0

    side = np.stack(
        [
            np.linalg.norm(p1 - p0, axis=1),
            np.linalg.norm(p2 - p1, axis=1),
            np.linalg.norm(p0 - p2, axis=1),
        ]
    )
    h = float(side.max())

    return Mesh(
        dim=2,
        cell_volumes=areas,
        cell_centers=centers,
        edge_cells=edge_cells,
        edge_measure=measure,
        edge_distance=dist,
        edge_tau=measure / dist,
        edge_normal=normal,
        edge_signed_dist=signed,
        diamond_volume=diamond,
        size=h,
        vertices=verts,
        cells_vertices=tris,
    )


def check_admissibility(mesh: Mesh, zeta: float) -> AdmissibilityReport:
    """Check dist(x_K, sigma) >= zeta * d_sigma for every cell/edge pair.

    Distances are signed: a center on the wrong side of its edge (obtuse
    triangle with circumcenter outside) yields a negative ratio and fails.
    """
    if not 0 < zeta <= 1:
        raise ValueError("zeta must lie in (0, 1]")
    ratios_k = mesh.edge_signed_dist[:, 0] / mesh.edge_distance
    pairs = [(e, int(mesh.edge_cells[e, 0]), r) for e, r in enumerate(ratios_k)]
    ratios_l = mesh.edge_signed_dist[mesh.interior_edges, 1] / mesh.edge_distance[mesh.interior_edges]
    pairs += [
        (int(e), int(mesh.edge_cells[e, 1]), r)
        for e, r in zip(mesh.interior_edges, ratios_l)
    ]
    worst = min(r for _, _, r in pairs)
    offending = [(e, k, float(r)) for e, k, r in pairs if r < zeta - 1e-14]
    return AdmissibilityReport(ok=not offending, worst_ratio=float(worst), offending_edges=offending)


# Gauss-Legendre nodes are exact to degree 2p-1; triangle rules below are the
# standard symmetric rules of the stated degree.
_TRI_RULES = {
    1: (np.array([[1 / 3, 1 / 3, 1 / 3]]), np.array([1.0])),
    2: (
        np.array([[2 / 3, 1 / 6, 1 / 6], [1 / 6, 2 / 3, 1 / 6], [1 / 6, 1 / 6, 2 / 3]]),
        np.array([1 / 3, 1 / 3, 1 / 3]),
    ),
    4: (
        np.array(
            [
                [0.108103018168070, 0.445948490915965, 0.445948490915965],
                [0.445948490915965, 0.108103018168070, 0.445948490915965],
                [0.445948490915965, 0.445948490915965, 0.108103018168070],
                [0.816847572980459, 0.091576213509771, 0.091576213509771],
                [0.091576213509771, 0.816847572980459, 0.091576213509771],
                [0.091576213509771, 0.091576213509771, 0.816847572980459],
            ]
        ),
        np.array(
            [
                0.223381589678011,
                0.223381589678011,
                0.223381589678011,
                0.109951743655322,
                0.109951743655322,
                0.109951743655322,
            ]
        ),
    ),
    5: (
        np.array(
            [
                [1 / 3, 1 / 3, 1 / 3],
                [0.059715871789770, 0.470142064105115, 0.470142064105115],
                [0.470142064105115, 0.059715871789770, 0.470142064105115],
                [0.470142064105115, 0.470142064105115, 0.059715871789770],
                [0.797426985353087, 0.101286507323456, 0.101286507323456],
                [0.101286507323456, 0.797426985353087, 0.101286507323456],
                [0.101286507323456, 0.101286507323456, 0.797426985353087],
            ]
        ),
        np.array(
            [
                0.225,
                0.132394152788506,
                0.132394152788506,
                0.132394152788506,
                0.125939180544827,
                0.125939180544827,
                0.125939180544827,
            ]
        ),
    ),
}


def project_cell_averages(f, mesh: Mesh, quadrature_order: int = 4) -> DiscreteField:
    """Per-cell Gauss quadrature of f; exact for polynomials up to the order.

    1D: f(x) with x an array.  2D: f(x, y).  The default rule integrates
    quartics exactly.
    """
    if quadrature_order < 1:
        raise ValueError("quadrature_order must be >= 1")
    if mesh.dim == 1:
        p = (quadrature_order + 2) // 2
        nodes, weights = np.polynomial.legendre.leggauss(p)
        centers = mesh.cell_centers[:, 0]
        half = mesh.cell_volumes / 2.0
        xs = centers[:, None] + half[:, None] * nodes[None, :]
        vals = np.asarray(f(xs), dtype=float)
        if not np.all(np.isfinite(vals)):
            raise ValueError("non-finite sample from initial datum")
        avg = (vals * weights[None, :]).sum(axis=1) / 2.0
        return DiscreteField(avg, mesh)

    if mesh.vertices is None or mesh.cells_vertices is None:
        raise MeshError("2D projection needs the triangulation provenance")
    degree = min((d for d in sorted(_TRI_RULES) if d >= quadrature_order), default=None)
    if degree is None:
        raise ValueError("quadrature_order > 5 not supported on triangles")
    bary, weights = _TRI_RULES[degree]
    tris = mesh.cells_vertices
    pts = mesh.vertices[tris]  # (nt, 3, 2)
    # quadrature points: (nt, q, 2)
    q = np.einsum("qj,tjd->tqd", bary, pts)
    vals = np.asarray(f(q[:, :, 0], q[:, :, 1]), dtype=float)
    if not np.all(np.isfinite(vals)):
        raise ValueError("non-finite sample from initial datum")
    avg = (vals * weights[None, :]).sum(axis=1)
    return DiscreteField(avg, mesh)


def mean_value(w: DiscreteField) -> float:
    """Volume-weighted mean over the domain."""
    m = w.mesh
    return float(np.dot(m.cell_volumes, w.values) / m.domain_measure)


def lebesgue_norm(w: DiscreteField, q: float) -> float:
    if q == np.inf:
        return float(np.max(np.abs(w.values)))
    if q < 1:
        raise ValueError("q must be >= 1")
    m = w.mesh
    return float(np.dot(m.cell_volumes, np.abs(w.values) ** q) ** (1.0 / q))


def discrete_seminorm(w: DiscreteField, q: float) -> float:
    """Discrete W^{1,q} seminorm; boundary edges contribute zero differences."""
    if q < 1:
        raise ValueError("q must be >= 1")
    m = w.mesh
    jumps = np.abs(w.values[m.int_L] - w.values[m.int_K])
    d = m.edge_distance[m.interior_edges]
    msig = m.edge_measure[m.interior_edges]
    return float(np.sum(msig * d * (jumps / d) ** q) ** (1.0 / q))


def approximate_gradient(w: DiscreteField) -> np.ndarray:
    """Piecewise-constant gradient on the dual (diamond) cells, one row per edge."""
    m = w.mesh
    grad = np.zeros((m.n_edges, m.dim))
    ie = m.interior_edges
    jump = w.values[m.int_L] - w.values[m.int_K]
    coef = m.edge_measure[ie] / m.diamond_volume[ie] * jump
    grad[ie] = coef[:, None] * m.edge_normal[ie]
    return grad


def dump_mesh(mesh: Mesh, path) -> None:
    """Plain-text dump (cells, edges, tau) used for golden-file comparisons."""
    with open(path, "w") as fh:
        fh.write(f"dim {mesh.dim}\n")
        fh.write(f"cells {mesh.n_cells}\n")
        for k in range(mesh.n_cells):
            center = " ".join(repr(float(c)) for c in mesh.cell_centers[k])
            fh.write(f"{k} {float(mesh.cell_volumes[k])!r} {center}\n")
        fh.write(f"edges {mesh.n_edges}\n")
        for e in range(mesh.n_edges):
            k, ell = mesh.edge_cells[e]
            fh.write(
                f"{e} {k} {ell} {float(mesh.edge_measure[e])!r} "
                f"{float(mesh.edge_distance[e])!r} {float(mesh.edge_tau[e])!r}\n"
            )
