import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from slmosaic.errors import CanvasOverflow, DegenerateCloud
from slmosaic.frames import Frame
from slmosaic.geometry import Homography2D, RigidTransform3D, image_corners
from slmosaic.mosaic import (
    assemble_cloud,
    build_mosaic,
    chain_globals,
    induced_global_homographies,
    mesh_and_texture,
    read_ply_vertices,
    render_mosaic_2d,
    triangulate_cloud,
    write_ply,
)
from slmosaic.triangulation import LaserObservation


def rigid():
    a = st.floats(-0.05, 0.05)
    t = st.floats(-1, 1)
    return st.builds(lambda *v: RigidTransform3D.from_vertex([v[0], v[1], v[2], *np.degrees(v[3:])]), t, t, t, a, a, a)


def test_single_frame_chain_is_identity():
    g3, g2 = chain_globals([])
    assert len(g3) == 1 and np.allclose(g3[0].matrix4(), np.eye(4)) and g2[0] == Homography2D.identity()


def test_constant_translations_accumulate():
    step = RigidTransform3D(0, 0, 0, (0.3, 0, 0))
    g3, g2 = chain_globals([(step, Homography2D.translation(2, 0))] * 99)
    assert np.linalg.norm(g3[-1].D) == pytest.approx(29.7)
    assert np.allclose(g2[-1].apply([0.0, 0.0]), [198, 0])


@settings(max_examples=20)
@given(st.lists(rigid(), min_size=1, max_size=8))
def test_chain_matches_direct_product(pairs):
    g3, _ = chain_globals([(T, Homography2D.identity()) for T in pairs])
    M = np.eye(4)
    for k, T in enumerate(pairs, start=1):
        M = M @ T.matrix4()  # T^{1,2} T^{2,3} ... left to right
        assert np.allclose(g3[k].matrix4(), M, atol=1e-9)


def frame_with(index, points, image=None, mask=None):
    image = np.zeros((10, 10, 3), dtype=np.uint8) if image is None else image
    mask = np.ones(image.shape[:2], dtype=bool) if mask is None else mask
    obs = [LaserObservation(i, (0.0, 0.0), tuple(p), 0.0) for i, p in enumerate(points)]
    return Frame(index, image, tuple(obs), mask)


def test_cloud_order_and_single_frame():
    pts = np.array([[0, 0, 30.0], [1, 0, 30.0], [0, 1, 30.0]])
    f1 = frame_with(1, pts)
    cloud, ids = assemble_cloud([f1], [RigidTransform3D.identity()])
    assert np.array_equal(cloud, pts) and ids.tolist() == [[1, 0], [1, 1], [1, 2]]
    f2 = frame_with(2, pts)
    cloud, ids = assemble_cloud([f1, f2], [RigidTransform3D.identity(), RigidTransform3D(0, 0, 0, (5, 0, 0))])
    assert np.allclose(cloud[3:], pts + [5, 0, 0]) and ids[3].tolist() == [2, 0]


def test_square_gives_two_triangles():
    sq = np.array([[0, 0, 30.0], [1, 0, 30.0], [1, 1, 30.0], [0, 1, 30.0]])
    faces = triangulate_cloud(sq)
    assert len(faces) == 2
    area = sum(0.5 * np.linalg.norm(np.cross(sq[b] - sq[a], sq[c] - sq[a])) for a, b, c in faces)
    assert area == pytest.approx(1.0)
    with pytest.raises(DegenerateCloud):
        triangulate_cloud(np.array([[0, 0, 1.0], [1, 1, 1], [2, 2, 1], [3, 3, 1]]))
    with pytest.raises(DegenerateCloud):
        triangulate_cloud(sq[:2])


def test_long_edges_are_dropped():
    grid = np.array([[x, y, 30.0] for x in range(5) for y in range(5)], dtype=float)
    far = np.vstack([grid, [[40.0, 2.0, 30.0]]])
    faces = triangulate_cloud(far)
    assert 25 not in faces
    assert len(triangulate_cloud(grid)) == 32


def test_mosaic_single_frame(plane_run):
    _, frames, _ = plane_run
    m = render_mosaic_2d(frames[:1], [Homography2D.identity()])
    f = frames[0]
    assert m.image.shape == f.image.shape and m.offset == (0, 0)
    assert np.array_equal(m.image[f.dot_mask], f.image[f.dot_mask])
    assert not m.filled[~f.dot_mask].any() and m.holes.sum() == (~f.dot_mask).sum()


def test_integer_translation_is_seam_free():
    rng = np.random.default_rng(0)
    world = rng.integers(0, 256, (40, 70, 3), dtype=np.uint8)
    a = Frame(1, world[:, :50].copy(), (), np.ones((40, 50), dtype=bool))
    b = Frame(2, world[:, 20:].copy(), (), np.ones((40, 50), dtype=bool))
    m = render_mosaic_2d([a, b], [Homography2D.identity(), Homography2D.translation(20, 0)])
    assert np.array_equal(m.image, world) and m.filled.all() and m.n_holes == 0


def test_dots_are_filled_from_the_next_frame():
    rng = np.random.default_rng(1)
    world = rng.integers(0, 256, (40, 70, 3), dtype=np.uint8)
    mask_a = np.ones((40, 50), dtype=bool)
    mask_a[10:13, 30:33] = False
    a_img = world[:, :50].copy()
    a_img[~mask_a] = (0, 255, 0)
    a = Frame(1, a_img, (), mask_a)
    b = Frame(2, world[:, 20:].copy(), (), np.ones((40, 50), dtype=bool))
    m = render_mosaic_2d([a, b], [Homography2D.identity(), Homography2D.translation(20, 0)])
    assert np.array_equal(m.image, world)


def test_canvas_overflow(plane_run):
    _, frames, _ = plane_run
    with pytest.raises(CanvasOverflow):
        render_mosaic_2d(frames[:2], [Homography2D.identity(), Homography2D.translation(1e5, 1e5)])
    with pytest.raises(CanvasOverflow):
        render_mosaic_2d(frames[:1], [Homography2D.identity()], max_pixels=100)


def test_face_colours_and_vertices_audit(plane_run):
    scene, frames, gt = plane_run
    K = scene.camera
    m = build_mosaic(frames, list(zip(gt.pairs, induced_global_homographies(frames, [RigidTransform3D.identity()] * 4, K)[1:])), K)
    mesh = m.mesh
    assert len(m.cloud) == sum(len(f.observations) for f in frames)
    # every vertex is a cloud point
    assert np.array_equal(mesh.vertices, m.cloud)
    by_index = {f.index: (f, T) for f, T in zip(frames, m.global_3d)}
    last = frames[-1].index
    for face, color, owner in zip(mesh.faces, mesh.colors, mesh.face_frame):
        assert owner in by_index
        f, T = by_index[owner]
        c = T.inverse().apply(mesh.vertices[face].mean(axis=0))
        x = int(np.floor(K.fx * c[0] / c[2] + K.u + 0.5))
        y = int(np.floor(K.fy * c[1] / c[2] + K.v + 0.5))
        assert np.array_equal(f.image[y, x], color)
        assert owner == last or f.dot_mask[y, x]
    # plane phantom: every face normal is parallel to the true normal
    normal = gt.poses[0].rotation.T @ [0.0, 0.0, 1.0]
    cosines = np.abs(mesh.normals() @ normal)
    assert np.degrees(np.arccos(np.clip(cosines.min(), -1, 1))) < 2.0


def test_chaining_2d_agrees_with_3d_on_a_plane(plane_run):
    scene, frames, gt = plane_run
    K = scene.camera
    # pairwise homographies induced by the true motions
    pair_h = [induced_global_homographies([f], [T], K)[0] for f, T in zip(frames[1:], gt.pairs)]
    g3, g2 = chain_globals(list(zip(gt.pairs, pair_h)))
    direct = induced_global_homographies(frames, g3, K)
    corners = image_corners(K.width, K.height)
    for a, b in zip(g2, direct):
        assert np.max(np.linalg.norm(a.apply(corners) - b.apply(corners), axis=1)) < 0.5


def test_ply_round_trip(tmp_path):
    v = np.random.default_rng(2).normal(size=(6, 3))
    write_ply(tmp_path / "c.ply", v, np.array([[0, 1, 2], [3, 4, 5]]), np.array([[1, 2, 3], [4, 5, 6]]))
    text = (tmp_path / "c.ply").read_text()
    assert "element face 2" in text and "3 3 4 5 4 5 6" in text
    assert np.allclose(read_ply_vertices(tmp_path / "c.ply"), v, atol=1e-8)
    write_ply(tmp_path / "p.ply", v)
    assert "element face" not in (tmp_path / "p.ply").read_text()
