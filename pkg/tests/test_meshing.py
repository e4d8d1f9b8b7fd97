import numpy as np
import pytest

from plateflow import meshing
from plateflow.meshing import OMEGA, S_WALL, build_cube_mesh, build_square_mesh, refine


@pytest.mark.parametrize("level,count", [(1, 4), (2, 16), (4, 64), (8, 256), (16, 1024)])
def test_square_element_counts(level, count):
    mesh = build_square_mesh(level)
    assert mesh.num_triangles == count == 4 * level ** 2


@pytest.mark.parametrize("level,count", [(1, 24), (2, 192), (4, 1536), (8, 12288)])
def test_cube_element_counts(level, count):
    mesh = build_cube_mesh(level)
    assert mesh.num_tets == count == 24 * level ** 3


def test_square_level1_entities():
    mesh = build_square_mesh(1)
    assert mesh.num_vertices == 5
    assert mesh.num_edges == 8
    corner_set = {(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0), (0.5, 0.5)}
    assert set(map(tuple, mesh.vertices)) == corner_set


@pytest.mark.parametrize("level", [1, 2, 3, 8])
def test_square_area_partition(level):
    mesh = build_square_mesh(level)
    areas = mesh.areas()
    assert np.all(areas > 0)
    assert abs(areas.sum() - 1.0) < 1e-12


@pytest.mark.parametrize("level", [1, 2, 3])
def test_cube_volume_partition(level):
    mesh = build_cube_mesh(level)
    vols = mesh.volumes()
    assert np.all(vols > 0)
    assert abs(vols.sum() - 1.0) < 1e-12
    v = mesh.vertices
    assert v[:, 0].min() >= 0 and v[:, 0].max() <= 1
    assert v[:, 1].min() >= 0 and v[:, 1].max() <= 1
    assert v[:, 2].min() >= -1 and v[:, 2].max() <= 0


@pytest.mark.parametrize("level", [1, 2, 4])
def test_square_edge_sharing(level):
    mesh = build_square_mesh(level)
    counts = np.bincount(mesh.tri_edges.ravel(), minlength=mesh.num_edges)
    assert set(counts) <= {1, 2}
    assert np.array_equal(counts == 1, mesh.boundary_edge)


def _face_areas(mesh, tag):
    tri = mesh.vertices[mesh.boundary_faces(tag)]
    a = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
    return 0.5 * np.linalg.norm(a, axis=1)


@pytest.mark.parametrize("level", [1, 2, 3])
def test_cube_boundary_tags(level):
    mesh = build_cube_mesh(level)
    assert abs(_face_areas(mesh, OMEGA).sum() - 1.0) < 1e-12
    assert abs(_face_areas(mesh, S_WALL).sum() - 5.0) < 1e-12
    omega = mesh.boundary_faces(OMEGA)
    assert np.all(np.abs(mesh.vertices[omega][:, :, 2]) < 1e-13)


@pytest.mark.parametrize("level", [1, 2, 4])
def test_trace_conformity_with_square_mesh(level):
    cube = build_cube_mesh(level)
    square = build_square_mesh(level)
    top = np.unique(cube.boundary_faces(OMEGA).ravel())
    got = {tuple(np.round(p, 14)) for p in cube.vertices[top][:, :2]}
    want = {tuple(np.round(p, 14)) for p in square.vertices}
    assert got == want


def test_refine_families():
    squares = refine((1, 2, 4), dim=2)
    assert [m.num_triangles for m in squares] == [4, 16, 64]
    cubes = refine((1, 2), dim=3)
    assert [m.num_tets for m in cubes] == [24, 192]
    single = refine((3,), dim=2)[0]
    assert single.num_triangles == build_square_mesh(3).num_triangles
    with pytest.raises(ValueError):
        refine((2, 2), dim=2)
    with pytest.raises(ValueError):
        refine((), dim=2)


def test_invalid_levels_rejected():
    for bad in (0, -1):
        with pytest.raises(ValueError):
            build_square_mesh(bad)
        with pytest.raises(ValueError):
            build_cube_mesh(bad)
    with pytest.raises(ValueError):
        build_square_mesh(meshing._MAX_LEVEL + 1)


def test_locate_finds_containing_triangle(rng):
    mesh = build_square_mesh(3)
    pts = rng.random((200, 2))
    tri_ids = mesh.locate(pts)
    c = mesh.vertices[mesh.triangles[tri_ids]]
    # barycentric coordinates of each point must be nonnegative
    for k in range(200):
        T = np.column_stack([c[k, 1] - c[k, 0], c[k, 2] - c[k, 0]])
        lam = np.linalg.solve(T, pts[k] - c[k, 0])
        assert lam.min() > -1e-12 and lam.sum() < 1 + 1e-12
    with pytest.raises(ValueError):
        mesh.locate(np.array([[1.5, 0.5]]))


def test_meshes_are_immutable():
    mesh = build_square_mesh(2)
    with pytest.raises(ValueError):
        mesh.vertices[0, 0] = 7.0
