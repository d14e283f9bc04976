"""Global chaining, textured point cloud / mesh and the 2D mosaic.

Global transforms take viewpoint k into the frame of viewpoint 1:
``T^{k,g} = T^{1,2} o T^{2,3} o ... o T^{k-1,k}``, computed recursively as
``T^{k,g} = T^{k-1,g} o T^{k-1,k}``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import Delaunay, QhullError

from .errors import CanvasOverflow, DegenerateCloud, EmptyPointSet
from .frames import Frame
from .geometry import CameraIntrinsics, Homography2D, RigidTransform3D, image_corners
from .imaging import _bilinear

MAX_CANVAS_PIXELS = 16384 * 16384
EDGE_CUTOFF_FACTOR = 5.0


def chain_globals(pairwise) -> tuple[list[RigidTransform3D], list[Homography2D]]:
    """``pairwise`` lists ``(T3D^{k-1,k}, T2D^{k-1,k})`` for k = 2..K."""
    g3 = [RigidTransform3D.identity()]
    g2 = [Homography2D.identity()]
    for t3, t2 in pairwise:
        g3.append(g3[-1].compose(t3))
        g2.append(g2[-1].compose(t2))
    return g3, g2


def assemble_cloud(frames, global_3d) -> tuple[np.ndarray, np.ndarray]:
    """Laser points of every frame in the frame of viewpoint 1.

    Returns ``(points (N, 3), ids (N, 2))`` where ``ids`` holds ``(k, i)``,
    ordered by frame then ray index.
    """
    pts, ids = [], []
    for frame, T in zip(frames, global_3d):
        order = sorted(frame.observations, key=lambda o: o.index)
        if not order:
            continue
        pts.append(T.apply(np.array([o.point for o in order], dtype=float)))
        ids.append(np.array([(frame.index, o.index) for o in order], dtype=np.int64))
    if not pts:
        return np.zeros((0, 3)), np.zeros((0, 2), dtype=np.int64)
    return np.concatenate(pts), np.concatenate(ids)


@dataclass
class Mesh:
    vertices: np.ndarray
    faces: np.ndarray
    colors: np.ndarray
    face_frame: np.ndarray = field(repr=False)

    def normals(self) -> np.ndarray:
        v = self.vertices[self.faces]
        n = np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0])
        return n / np.linalg.norm(n, axis=1, keepdims=True)


def dominant_plane(points) -> tuple[np.ndarray, np.ndarray]:
    """Centroid and principal axes (rows, last = normal) of ``points``."""
    p = np.asarray(points, dtype=float)
    c = p.mean(axis=0)
    _, s, vt = np.linalg.svd(p - c, full_matrices=False)
    if len(s) < 2 or s[1] <= 1e-9 * max(s[0], 1e-300):
        raise DegenerateCloud("points are collinear")
    if vt.shape[0] < 3:
        vt = np.vstack([vt, np.cross(vt[0], vt[1])])
    return c, vt


def triangulate_cloud(points, cutoff: float = EDGE_CUTOFF_FACTOR) -> np.ndarray:
    """Delaunay triangles over the dominant-plane projection of ``points``,
    dropping faces with an edge longer than ``cutoff`` times the median edge."""
    p = np.asarray(points, dtype=float)
    if len(p) < 3:
        raise DegenerateCloud("need at least 3 points to mesh")
    c, axes = dominant_plane(p)
    uv = (p - c) @ axes[:2].T
    try:
        faces = Delaunay(uv).simplices.astype(np.int64)
    except QhullError as exc:
        raise DegenerateCloud(f"triangulation failed: {exc}") from None
    v = p[faces]
    edges = np.linalg.norm(v - v[:, [1, 2, 0]], axis=2)
    scale = np.median(edges)
    n = np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0])
    # collinear samples (e.g. one dot seen along the motion line) give flat slivers
    keep = np.all(edges <= cutoff * scale, axis=1) & (np.linalg.norm(n, axis=1) > 1e-9 * scale**2)
    faces, n = faces[keep], n[keep]
    # orient faces consistently with the plane normal
    flip = n @ axes[2] < 0
    faces[flip] = faces[flip][:, [0, 2, 1]]
    return faces


def face_colors(vertices, faces, frames, global_3d, K: CameraIntrinsics):
    """Colour of each face from the first frame that sees its centroid.

    A frame sees a centroid when it lies in front of the camera and projects
    inside the image on a pixel outside the laser-dot mask (the last frame
    may contribute dot pixels). The nearest pixel is copied. Faces that no
    frame sees get colour 0 and frame index -1.
    """
    centroids = np.asarray(vertices)[faces].mean(axis=1)
    colors = np.zeros((len(faces), 3), dtype=np.uint8)
    owner = np.full(len(faces), -1, dtype=np.int64)
    pending = np.ones(len(faces), dtype=bool)
    last = len(frames) - 1
    for j, (frame, T) in enumerate(zip(frames, global_3d)):
        if not pending.any():
            break
        idx = np.flatnonzero(pending)
        local = T.inverse().apply(centroids[idx])
        z = local[:, 2]
        front = z > 0
        zs = np.where(front, z, 1.0)
        x = np.floor(K.fx * local[:, 0] / zs + K.u + 0.5)
        y = np.floor(K.fy * local[:, 1] / zs + K.v + 0.5)
        h, w = frame.image.shape[:2]
        ok = front & (x >= 0) & (x <= w - 1) & (y >= 0) & (y <= h - 1)
        xi = np.where(ok, x, 0).astype(np.int64)
        yi = np.where(ok, y, 0).astype(np.int64)
        if j != last:
            ok &= frame.dot_mask[yi, xi]
        hit = idx[ok]
        colors[hit] = frame.image[yi[ok], xi[ok]]
        owner[hit] = frame.index
        pending[hit] = False
    return colors, owner


def mesh_and_texture(cloud, frames, global_3d, K: CameraIntrinsics) -> Mesh:
    vertices = np.asarray(cloud, dtype=float)
    faces = triangulate_cloud(vertices)
    colors, owner = face_colors(vertices, faces, frames, global_3d, K)
    return Mesh(vertices, faces, colors, owner)


@dataclass
class Mosaic2D:
    """Composite image in the pixel frame of viewpoint 1 shifted by ``offset``:
    canvas pixel ``(c, r)`` shows mosaic point ``(c + offset[0], r + offset[1])``.
    ``holes`` marks pixels inside some frame footprint that no frame could fill
    (laser dots of the last frame)."""

    image: np.ndarray
    filled: np.ndarray
    holes: np.ndarray
    offset: tuple[int, int]

    @property
    def n_holes(self) -> int:
        return int(self.holes.sum())


def render_mosaic_2d(frames, global_2d, max_pixels: int = MAX_CANVAS_PIXELS) -> Mosaic2D:
    """First-wins composition; dot pixels are left for later frames."""
    if not frames:
        raise EmptyPointSet("no frames to composite")
    boxes = []
    for frame, H in zip(frames, global_2d):
        c = H.apply(image_corners(*frame.size))
        boxes.append((np.floor(c.min(axis=0) + 1e-9), np.ceil(c.max(axis=0) - 1e-9)))
    lo = np.min([b[0] for b in boxes], axis=0).astype(np.int64)
    hi = np.max([b[1] for b in boxes], axis=0).astype(np.int64)
    width, height = (hi - lo + 1).tolist()
    if width * height > max_pixels:
        raise CanvasOverflow(f"mosaic canvas {width}x{height} exceeds {max_pixels} pixels")

    canvas = np.zeros((height, width, 3), dtype=np.uint8)
    filled = np.zeros((height, width), dtype=bool)
    covered = np.zeros((height, width), dtype=bool)
    for frame, H, (b0, b1) in zip(frames, global_2d, boxes):
        x0, y0 = (b0.astype(np.int64) - lo).tolist()
        x1, y1 = (b1.astype(np.int64) - lo).tolist()
        yy, xx = np.mgrid[y0 : y1 + 1, x0 : x1 + 1]
        todo = ~filled[y0 : y1 + 1, x0 : x1 + 1]
        if not todo.any():
            continue
        pts = np.stack([xx[todo] + lo[0], yy[todo] + lo[1]], axis=-1).astype(float)
        src = H.inverse().apply(pts)
        sx, sy = src[:, 0], src[:, 1]
        _, inside = _bilinear(frame.gray, sx, sy, None)
        _, usable = _bilinear(frame.gray, sx, sy, frame.dot_mask)
        rgb = np.stack([_bilinear(frame.image[..., c], sx, sy, None)[0] for c in range(3)], axis=-1)
        rows, cols = yy[todo], xx[todo]
        covered[rows[inside], cols[inside]] = True
        rows, cols = rows[usable], cols[usable]
        canvas[rows, cols] = np.clip(np.floor(rgb[usable] + 0.5), 0, 255).astype(np.uint8)
        filled[rows, cols] = True
    return Mosaic2D(canvas, filled, covered & ~filled, (int(lo[0]), int(lo[1])))


def induced_global_homographies(frames, global_3d, K: CameraIntrinsics) -> list[Homography2D]:
    """Homography induced by each chained rigid transform on its frame's laser points."""
    from .registration import induced_homography

    return [induced_homography(T, K, f.points3d, f.dots2d) for f, T in zip(frames, global_3d)]


def write_ply(path, vertices, faces=None, colors=None) -> None:
    """ASCII PLY with vertices in mm and optional per-face RGB."""
    v = np.asarray(vertices, dtype=float).reshape(-1, 3)
    f = np.zeros((0, 3), dtype=np.int64) if faces is None else np.asarray(faces, dtype=np.int64)
    lines = ["ply", "format ascii 1.0", f"element vertex {len(v)}", "property double x", "property double y", "property double z"]
    if len(f):
        lines += [f"element face {len(f)}", "property list uchar int vertex_indices"]
        if colors is not None:
            lines += ["property uchar red", "property uchar green", "property uchar blue"]
    lines.append("end_header")
    lines += [f"{x:.9g} {y:.9g} {z:.9g}" for x, y, z in v]
    for j, tri in enumerate(f):
        row = f"3 {tri[0]} {tri[1]} {tri[2]}"
        if colors is not None:
            r, g, b = (int(c) for c in colors[j])
            row += f" {r} {g} {b}"
        lines.append(row)
    Path(path).write_text("\n".join(lines) + "\n")


def read_ply_vertices(path) -> np.ndarray:
    """Vertex coordinates of an ASCII PLY written by ``write_ply``."""
    lines = Path(path).read_text().splitlines()
    n = next(int(line.split()[2]) for line in lines if line.startswith("element vertex"))
    start = lines.index("end_header") + 1
    return np.array([[float(x) for x in line.split()[:3]] for line in lines[start : start + n]]).reshape(-1, 3)


@dataclass
class Mosaic:
    global_3d: list[RigidTransform3D]
    global_2d: list[Homography2D]
    cloud: np.ndarray
    cloud_ids: np.ndarray
    mesh: Mesh | None
    mosaic_2d: Mosaic2D | None


def build_mosaic(frames: list[Frame], pairwise, K: CameraIntrinsics, max_pixels: int = MAX_CANVAS_PIXELS) -> Mosaic:
    g3, g2 = chain_globals(pairwise)
    cloud, ids = assemble_cloud(frames, g3)
    try:
        mesh = mesh_and_texture(cloud, frames, g3, K)
    except DegenerateCloud:
        mesh = None
    try:
        flat = render_mosaic_2d(frames, g2, max_pixels)
    except CanvasOverflow:
        # chained homographies of a strongly curved scan can diverge; keep the 3D result
        flat = None
    return Mosaic(g3, g2, cloud, ids, mesh, flat)
