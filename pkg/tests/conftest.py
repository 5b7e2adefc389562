import numpy as np
import pytest

from chemofv.mesh import Mesh, build_from_triangulation, build_uniform_1d


def build_1d_from_breakpoints(xs) -> Mesh:
    """Nonuniform 1D mesh from sorted breakpoints (test helper)."""
    xs = np.asarray(xs, dtype=float)
    n = len(xs) - 1
    widths = np.diff(xs)
    centers = 0.5 * (xs[:-1] + xs[1:])
    m = n + 1
    edge_cells = np.empty((m, 2), dtype=np.int64)
    measure = np.ones(m)
    dist = np.empty(m)
    normal = np.empty((m, 1))
    signed = np.full((m, 2), np.nan)
    diamond = np.empty(m)
    edge_cells[: n - 1, 0] = np.arange(n - 1)
    edge_cells[: n - 1, 1] = np.arange(1, n)
    dist[: n - 1] = centers[1:] - centers[:-1]
    normal[: n - 1, 0] = 1.0
    signed[: n - 1, 0] = widths[:-1] / 2
    signed[: n - 1, 1] = widths[1:] / 2
    diamond[: n - 1] = dist[: n - 1]
    edge_cells[n - 1] = (0, -1)
    edge_cells[n] = (n - 1, -1)
    dist[n - 1] = widths[0] / 2
    dist[n] = widths[-1] / 2
    normal[n - 1, 0] = -1.0
    normal[n, 0] = 1.0
    signed[n - 1, 0] = widths[0] / 2
    signed[n, 0] = widths[-1] / 2
    diamond[n - 1] = widths[0] / 2
    diamond[n] = widths[-1] / 2
    return Mesh(
        dim=1,
        cell_volumes=widths,
        cell_centers=centers.reshape(-1, 1),
        edge_cells=edge_cells,
        edge_measure=measure,
        edge_distance=dist,
        edge_tau=measure / dist,
        edge_normal=normal,
        edge_signed_dist=signed,
        diamond_volume=diamond,
        size=float(widths.max()),
    )


def equilateral_mesh() -> Mesh:
    verts = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, np.sqrt(3) / 2]])
    return build_from_triangulation(verts, [[0, 1, 2]])


def rhombus_mesh() -> Mesh:
    s3 = np.sqrt(3) / 2
    verts = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, s3], [1.5, s3]])
    return build_from_triangulation(verts, [[0, 1, 2], [1, 3, 2]])


def hexagon_mesh() -> Mesh:
    theta = np.pi / 3 * np.arange(6)
    verts = np.vstack([[0.0, 0.0], np.column_stack([np.cos(theta), np.sin(theta)])])
    tris = [[0, 1 + i, 1 + (i + 1) % 6] for i in range(6)]
    return build_from_triangulation(verts, tris)


def small_mesh_collection():
    """Connected meshes with at most 8 cells, 1D and 2D."""
    meshes = [build_uniform_1d(0.0, 1.0, n) for n in range(2, 9)]
    rng = np.random.default_rng(7)
    for n in (3, 5, 8):
        xs = np.concatenate([[0.0], np.sort(rng.uniform(0.1, 0.9, n - 1)), [1.0]])
        meshes.append(build_1d_from_breakpoints(xs))
    meshes += [equilateral_mesh(), rhombus_mesh(), hexagon_mesh()]
    return meshes


@pytest.fixture(scope="session")
def small_meshes():
    return small_mesh_collection()


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)
