"""Built-in 2D mesh generators: spring-relaxed Delaunay triangulations over a
polygonal disk and a square.  Only meshes that pass the admissibility check
are returned."""

from __future__ import annotations

import numpy as np
from scipy.spatial import Delaunay

from .mesh import Mesh, MeshError, build_from_triangulation, check_admissibility

__all__ = ["disk_mesh", "square_mesh", "delaunay_mesh", "disk_points", "square_points"]


def delaunay_mesh(points: np.ndarray, zeta: float = 0.02) -> Mesh:
    """Triangulate a convex point cloud and build the TPFA mesh; reject the
    result if any center sits closer than zeta * d_sigma to one of its edges."""
    tri = Delaunay(points)
    mesh = build_from_triangulation(tri.points, tri.simplices)
    report = check_admissibility(mesh, zeta)
    if not report.ok:
        raise MeshError(
            f"generated mesh fails the admissibility check "
            f"(worst ratio {report.worst_ratio:.4f}, {len(report.offending_edges)} edges)"
        )
    return mesh


def _hex_lattice(h: float, extent: float) -> np.ndarray:
    """Equilateral (hexagonal) lattice with spacing h covering [-extent, extent]^2."""
    row = h * np.sqrt(3) / 2
    n = int(np.ceil(extent / row)) + 1
    pts = []
    for j in range(-n, n + 1):
        y = j * row
        offset = 0.5 * h * (j % 2)
        xs = offset + h * np.arange(-n - 1, n + 2)
        pts.append(np.column_stack([xs, np.full(len(xs), y)]))
    return np.vstack(pts)


def _relax(pts: np.ndarray, project, n_fixed: int, n_iter: int = 150, step: float = 0.2) -> np.ndarray:
    """Uniform spring relaxation: each Delaunay edge repels with force
    max(l0 - L, 0), l0 set 20% above the RMS length, so interior pressure
    pushes points onto the boundary, where `project` keeps them.  The first
    n_fixed points (e.g. square corners) never move.  Deterministic."""
    pts = pts.copy()
    for _ in range(n_iter):
        simp = Delaunay(pts).simplices
        edges = np.unique(
            np.sort(
                np.concatenate([simp[:, [0, 1]], simp[:, [1, 2]], simp[:, [2, 0]]]), axis=1
            ),
            axis=0,
        )
        vec = pts[edges[:, 1]] - pts[edges[:, 0]]
        length = np.hypot(vec[:, 0], vec[:, 1])
        length = np.maximum(length, 1e-300)
        l0 = 1.2 * np.sqrt(np.mean(length ** 2))
        force = (np.maximum(l0 - length, 0.0) / length)[:, None] * vec
        disp = np.zeros_like(pts)
        np.add.at(disp, edges[:, 0], -force)
        np.add.at(disp, edges[:, 1], force)
        disp[:n_fixed] = 0.0
        pts += step * disp
        pts[n_fixed:] = project(pts[n_fixed:])
    return pts


def disk_points(
    radius: float,
    boundary_points: int,
    n_iter: int = 150,
    rotation: float = 0.0,
    shift=(0.0, 0.0),
) -> np.ndarray:
    """Relaxed point cloud for the disk; boundary_points fixes the target
    spacing (the polygonal boundary resolution emerges at about that count)."""
    if boundary_points < 8:
        raise ValueError("need at least 8 boundary points")
    h = 2 * np.pi * radius / boundary_points
    lattice = _hex_lattice(h, radius) + h * np.asarray(shift)
    keep = np.hypot(lattice[:, 0], lattice[:, 1]) <= radius - 0.4 * h
    theta = 2 * np.pi * (np.arange(boundary_points) + rotation) / boundary_points
    ring = np.column_stack([radius * np.cos(theta), radius * np.sin(theta)])

    def project(p):
        r = np.hypot(p[:, 0], p[:, 1])
        out = r > radius
        if np.any(out):
            p[out] *= (radius / r[out])[:, None]
        return p

    return _relax(np.vstack([ring, lattice[keep]]), project, n_fixed=0, n_iter=n_iter)


def disk_mesh(radius: float = 1.0, boundary_points: int = 256, zeta: float = 0.02) -> Mesh:
    """Disk mesh via relaxation, with a deterministic retry ladder over ring
    rotation and lattice shift."""
    attempts = [
        (0.0, (0.0, 0.0)),
        (0.37, _SHIFTS[0]),
        (0.19, _SHIFTS[1]),
        (0.53, _SHIFTS[2]),
    ]
    last: Exception | None = None
    for rotation, shift in attempts:
        try:
            pts = disk_points(radius, boundary_points, rotation=rotation, shift=shift)
            return delaunay_mesh(pts, zeta)
        except MeshError as exc:
            last = exc
    raise MeshError(f"disk mesh generation failed for {boundary_points} boundary points: {last}")


# deterministic symmetry-breaking lattice shifts; mirror-symmetric clouds relax
# into co-circular trapezoids whose circumcenters coincide
_SHIFTS = ((0.1234, 0.0678), (0.3171, 0.1412), (0.0712, 0.2893))


def square_points(
    edge: float,
    spacing: float,
    n_iter: int = 150,
    shift=(0.1234, 0.0678),
    margin: float = 0.7,
) -> np.ndarray:
    """Relaxed point cloud for [0, edge]^2.

    Each corner is pinned together with its two first side points at distance
    s and a diagonal guard at (0.6s, 0.6s): the guard keeps the corner split
    into two acute triangles and blocks the Delaunay edge between the side
    points, which would otherwise carry a right angle (circumcenter on it).
    """
    if spacing <= 0 or spacing >= edge:
        raise ValueError("need 0 < spacing < edge")
    per_side = max(4, int(round(edge / spacing)))
    s = edge / per_side
    fixed = []
    for cx, cy in ((0, 0), (edge, 0), (0, edge), (edge, edge)):
        ex = 1.0 if cx == 0 else -1.0
        ey = 1.0 if cy == 0 else -1.0
        fixed += [
            (cx, cy),
            (cx + ex * s, cy),
            (cx, cy + ey * s),
            (cx + ex * 0.6 * s, cy + ey * 0.6 * s),
        ]
    fixed = np.array(fixed)

    ticks = edge * np.arange(2, per_side - 1) / per_side  # skip the pinned first ticks
    sides = np.vstack(
        [
            np.column_stack([ticks, np.zeros_like(ticks)]),
            np.column_stack([ticks, np.full_like(ticks, edge)]),
            np.column_stack([np.zeros_like(ticks), ticks]),
            np.column_stack([np.full_like(ticks, edge), ticks]),
        ]
    )
    lattice = _hex_lattice(spacing, edge) + edge / 2 + spacing * np.asarray(shift)
    inside = np.all((lattice > margin * spacing) & (lattice < edge - margin * spacing), axis=1)
    lattice = lattice[inside]
    # keep free points away from the pinned corner clusters
    for q in fixed:
        lattice = lattice[np.hypot(lattice[:, 0] - q[0], lattice[:, 1] - q[1]) > 0.8 * s]

    def project(p):
        return np.clip(p, 0.0, edge)

    pts = np.vstack([fixed, sides, lattice])
    return _relax(pts, project, n_fixed=len(fixed), n_iter=n_iter)


def square_mesh(edge: float = 10.0, spacing: float = 0.3, zeta: float = 0.02) -> Mesh:
    """Square mesh via relaxation; retries a deterministic ladder of lattice
    margins / shifts / small spacing perturbations until the admissibility
    gate is satisfied."""
    attempts = [
        (1.0, 0.7, _SHIFTS[0]),
        (1.0, 0.3, _SHIFTS[0]),
        (1.0, 1.0, _SHIFTS[0]),
        (1.024, 0.7, _SHIFTS[1]),
        (1.024, 0.3, _SHIFTS[1]),
        (0.976, 0.7, _SHIFTS[2]),
        (0.976, 0.3, _SHIFTS[2]),
        (1.048, 1.0, _SHIFTS[0]),
    ]
    last: Exception | None = None
    for factor, margin, shift in attempts:
        try:
            pts = square_points(edge, spacing * factor, shift=shift, margin=margin)
            return delaunay_mesh(pts, zeta)
        except MeshError as exc:
            last = exc
    raise MeshError(f"square mesh generation failed for spacing {spacing}: {last}")
