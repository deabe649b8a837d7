"""Polyhedral meshes: data model, geometry, JSON ingestion and built-in generators.

A mesh is a set of planar polygonal faces and a set of cells, each cell being
a list of faces with an orientation sign such that ``sign * face_normal`` points
out of the cell.
"""

from __future__ import annotations

import itertools
import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import GeometryError, MeshParseError, TopologyError

PLANARITY_TOL = 1e-9


def _polygon_geometry(pts: np.ndarray):
    """Area vector, area, centroid of a planar polygon given as an ordered loop."""
    ref = pts.mean(axis=0)
    a = pts - ref
    b = np.roll(a, -1, axis=0)
    tri_vec = 0.5 * np.cross(a, b)
    area_vec = tri_vec.sum(axis=0)
    area = np.linalg.norm(area_vec)
    if area <= 0.0:
        raise GeometryError("degenerate face with zero area")
    normal = area_vec / area
    tri_area = tri_vec @ normal
    tri_cent = (a + b) / 3.0
    centroid = ref + (tri_area[:, None] * tri_cent).sum(axis=0) / tri_area.sum()
    return normal, area, centroid


def _diameter(pts: np.ndarray) -> float:
    d = pts[:, None, :] - pts[None, :, :]
    return float(np.sqrt((d * d).sum(axis=-1)).max())


def face_frame(normal: np.ndarray) -> np.ndarray:
    """Orthonormal in-plane frame (t1, t2) of a face with unit normal ``normal``."""
    j = int(np.argmin(np.abs(normal)))
    e = np.zeros(3)
    e[j] = 1.0
    t1 = e - (e @ normal) * normal
    t1 /= np.linalg.norm(t1)
    t2 = np.cross(normal, t1)
    return np.stack([t1, t2])


@dataclass(frozen=True)
class MeshStats:
    h: float
    n_cells: int
    n_interior_faces: int
    regularity: float


@dataclass(eq=False)
class PolyMesh:
    vertices: np.ndarray
    faces: list
    cell_faces: list
    cell_signs: list
    face_normal: np.ndarray
    face_area: np.ndarray
    face_centroid: np.ndarray
    face_diameter: np.ndarray
    face_frame: np.ndarray
    face_cells: list
    face_boundary: np.ndarray
    cell_volume: np.ndarray
    cell_centroid: np.ndarray
    cell_diameter: np.ndarray
    cell_star: np.ndarray
    cell_vertices: list

    @property
    def n_cells(self) -> int:
        return len(self.cell_faces)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    @property
    def h(self) -> float:
        return float(self.cell_diameter.max())

    @property
    def interior_faces(self) -> np.ndarray:
        return np.flatnonzero(~self.face_boundary)

    @property
    def boundary_faces(self) -> np.ndarray:
        return np.flatnonzero(self.face_boundary)

    def outward_normal(self, cell: int, local_face: int) -> np.ndarray:
        f = self.cell_faces[cell][local_face]
        return self.cell_signs[cell][local_face] * self.face_normal[f]

    def is_tetrahedron(self, cell: int) -> bool:
        fs = self.cell_faces[cell]
        return len(fs) == 4 and all(len(self.faces[f]) == 3 for f in fs)

    def translated(self, shift) -> "PolyMesh":
        shift = np.asarray(shift, dtype=float)
        return PolyMesh.from_connectivity(
            self.vertices + shift, self.faces, self.cell_faces, self.cell_signs
        )

    def scaled(self, factor: float) -> "PolyMesh":
        """Homothety about the origin; ``factor`` must be positive."""
        if factor <= 0:
            raise ValueError("scale factor must be positive")
        return PolyMesh.from_connectivity(
            self.vertices * factor, self.faces, self.cell_faces, self.cell_signs
        )

    @classmethod
    def from_connectivity(cls, vertices, faces, cell_faces, cell_signs) -> "PolyMesh":
        """Build a mesh and compute all geometry; validates topology and orientation."""
        vertices = np.asarray(vertices, dtype=float)
        if vertices.ndim != 2 or vertices.shape[1] != 3:
            raise MeshParseError("vertices must be an (n, 3) array")
        faces = [np.asarray(f, dtype=np.int64) for f in faces]
        cell_faces = [np.asarray(c, dtype=np.int64) for c in cell_faces]
        cell_signs = [np.asarray(s, dtype=float) for s in cell_signs]
        nf = len(faces)
        nv = len(vertices)

        normals = np.empty((nf, 3))
        areas = np.empty(nf)
        centroids = np.empty((nf, 3))
        diams = np.empty(nf)
        frames = np.empty((nf, 2, 3))
        for i, f in enumerate(faces):
            if len(f) < 3 or f.min() < 0 or f.max() >= nv:
                raise MeshParseError(f"face {i} has invalid vertex list")
            pts = vertices[f]
            n, a, c = _polygon_geometry(pts)
            hf = _diameter(pts)
            if np.abs((pts - c) @ n).max() > PLANARITY_TOL * hf:
                raise TopologyError(f"face {i} is not planar")
            normals[i], areas[i], centroids[i], diams[i] = n, a, c, hf
            frames[i] = face_frame(n)

        face_cells = [[] for _ in range(nf)]
        face_sign_seen = [[] for _ in range(nf)]
        for t, (fs, ss) in enumerate(zip(cell_faces, cell_signs)):
            if len(fs) != len(ss):
                raise MeshParseError(f"cell {t}: face and sign lists differ in length")
            for f, s in zip(fs, ss):
                if f < 0 or f >= nf:
                    raise MeshParseError(f"cell {t} references unknown face {f}")
                face_cells[f].append(t)
                face_sign_seen[f].append(s)
        for f in range(nf):
            if len(face_cells[f]) not in (1, 2):
                raise TopologyError(f"face {f} is adjacent to {len(face_cells[f])} cells")
            if len(face_cells[f]) == 2 and face_sign_seen[f][0] == face_sign_seen[f][1]:
                raise TopologyError(f"face {f} has the same orientation in both cells")
        boundary = np.array([len(fc) == 1 for fc in face_cells])

        nc = len(cell_faces)
        vols = np.empty(nc)
        cents = np.empty((nc, 3))
        cdiam = np.empty(nc)
        cverts = []
        for t, (fs, ss) in enumerate(zip(cell_faces, cell_signs)):
            vids = np.unique(np.concatenate([faces[f] for f in fs]))
            cverts.append(vids)
            closure = (ss[:, None] * areas[fs, None] * normals[fs]).sum(axis=0)
            if np.linalg.norm(closure) > 1e-12 * areas[fs].sum():
                raise TopologyError(f"cell {t} boundary is not closed")
            p = vertices[vids].mean(axis=0)
            vol = 0.0
            mom = np.zeros(3)
            for f, s in zip(fs, ss):
                pts = vertices[faces[f]]
                c = centroids[f]
                for a, b in zip(pts, np.roll(pts, -1, axis=0)):
                    v = s * np.dot(np.cross(a - c, b - c), c - p) / 6.0
                    vol += v
                    mom += v * (a + b + c + p) / 4.0
            if vol <= 0.0:
                raise GeometryError(f"cell {t} has non-positive volume {vol:g}")
            vols[t] = vol
            cents[t] = mom / vol
            cdiam[t] = _diameter(vertices[vids])

        mesh = cls(
            vertices=vertices,
            faces=faces,
            cell_faces=cell_faces,
            cell_signs=cell_signs,
            face_normal=normals,
            face_area=areas,
            face_centroid=centroids,
            face_diameter=diams,
            face_frame=frames,
            face_cells=face_cells,
            face_boundary=boundary,
            cell_volume=vols,
            cell_centroid=cents,
            cell_diameter=cdiam,
            cell_star=cents.copy(),
            cell_vertices=cverts,
        )
        mesh._check_star_shaped()
        return mesh

    def _check_star_shaped(self):
        for t in range(self.n_cells):
            s = self.cell_star[t]
            for f, sg in zip(self.cell_faces[t], self.cell_signs[t]):
                d = (self.vertices[self.faces[f]] - s) @ (sg * self.face_normal[f])
                if d.min() <= 0.0:
                    warnings.warn(f"cell {t} may not be star-shaped about its centroid")
                    return


def single_cell_mesh(vertices, faces) -> PolyMesh:
    """One convex cell; face orientation is fixed up from the vertex average."""
    vertices = np.asarray(vertices, dtype=float)
    center = vertices.mean(axis=0)
    signs = []
    for f in faces:
        n, _, c = _polygon_geometry(vertices[list(f)])
        signs.append(1.0 if n @ (c - center) > 0 else -1.0)
    return PolyMesh.from_connectivity(vertices, faces, [list(range(len(faces)))], [signs])


def reference_tetrahedron() -> PolyMesh:
    v = [[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]]
    return single_cell_mesh(v, [[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]])


_HEX_FACES = [[0, 3, 2, 1], [4, 5, 6, 7], [0, 1, 5, 4], [2, 3, 7, 6], [0, 4, 7, 3], [1, 2, 6, 5]]


def _hex_corners():
    return np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0],
                     [0, 0, 1], [1, 0, 1], [1, 1, 1], [0, 1, 1]], dtype=float)


def unit_cube_cell() -> PolyMesh:
    return single_cell_mesh(_hex_corners(), _HEX_FACES)


def hexahedron_cell(matrix, shift=(0.0, 0.0, 0.0)) -> PolyMesh:
    """Affine image of the unit cube (planar faces by construction)."""
    v = _hex_corners() @ np.asarray(matrix, dtype=float).T + np.asarray(shift, dtype=float)
    return single_cell_mesh(v, _HEX_FACES)


def tetrahedron_cell(points) -> PolyMesh:
    return single_cell_mesh(points, [[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]])


def voronoi_cell(rng, n_neighbours: int = 24) -> PolyMesh:
    """Single bounded Voronoi cell around the origin for randomly placed neighbours."""
    from scipy.spatial import Voronoi

    dirs = rng.normal(size=(n_neighbours, 3))
    dirs /= np.linalg.norm(dirs, axis=1)[:, None]
    pts = np.vstack([np.zeros(3), dirs * rng.uniform(0.8, 1.2, size=(n_neighbours, 1))])
    vor = Voronoi(pts)
    region = vor.regions[vor.point_region[0]]
    if -1 in region or len(region) == 0:
        return voronoi_cell(rng, n_neighbours + 8)
    faces = []
    used = {}
    for (p, q), rv in zip(vor.ridge_points, vor.ridge_vertices):
        if 0 not in (p, q):
            continue
        other = q if p == 0 else p
        n = pts[other] - pts[0]
        n /= np.linalg.norm(n)
        vv = vor.vertices[rv]
        c = vv.mean(axis=0)
        t1, t2 = face_frame(n)
        ang = np.arctan2((vv - c) @ t2, (vv - c) @ t1)
        loop = [used.setdefault(rv[i], len(used)) for i in np.argsort(ang)]
        faces.append(loop)
    verts = np.empty((len(used), 3))
    for gid, lid in used.items():
        verts[lid] = vor.vertices[gid]
    return single_cell_mesh(verts, faces)


def _assemble_from_cell_vertex_faces(vertices, cells_face_loops) -> PolyMesh:
    """Build connectivity from per-cell lists of face vertex loops, deduplicating faces."""
    face_index = {}
    faces = []
    cell_faces = []
    cell_signs = []
    for loops in cells_face_loops:
        vids = np.unique(np.concatenate([np.asarray(l) for l in loops]))
        center = vertices[vids].mean(axis=0)
        fs, ss = [], []
        for loop in loops:
            key = tuple(sorted(loop))
            if key not in face_index:
                face_index[key] = len(faces)
                faces.append(list(loop))
            f = face_index[key]
            n, _, c = _polygon_geometry(vertices[faces[f]])
            fs.append(f)
            ss.append(1.0 if n @ (c - center) > 0 else -1.0)
        cell_faces.append(fs)
        cell_signs.append(ss)
    return PolyMesh.from_connectivity(vertices, faces, cell_faces, cell_signs)


def _grid_vertices(n: int):
    g = np.linspace(0.0, 1.0, n + 1)
    x, y, z = np.meshgrid(g, g, g, indexing="ij")
    verts = np.stack([x.ravel(), y.ravel(), z.ravel()], axis=1)

    def vid(i, j, k):
        return (i * (n + 1) + j) * (n + 1) + k

    return verts, vid


def build_cube_tet_mesh(n: int) -> PolyMesh:
    """Unit cube split into n^3 subcubes, each cut into 6 Kuhn tetrahedra."""
    if n < 1:
        raise ValueError("n must be >= 1")
    verts, vid = _grid_vertices(n)
    cells = []
    for i, j, k in itertools.product(range(n), repeat=3):
        for perm in itertools.permutations(range(3)):
            idx = [i, j, k]
            path = [vid(*idx)]
            for axis in perm:
                idx[axis] += 1
                path.append(vid(*idx))
            cells.append([[path[a] for a in tri] for tri in itertools.combinations(range(4), 3)])
    return _assemble_from_cell_vertex_faces(verts, cells)


def build_cube_hex_mesh(n: int) -> PolyMesh:
    """Unit cube split into n^3 hexahedral cells."""
    if n < 1:
        raise ValueError("n must be >= 1")
    verts, vid = _grid_vertices(n)
    cells = []
    for i, j, k in itertools.product(range(n), repeat=3):
        corners = [vid(i + a, j + b, k + c) for a, b, c in
                   [(0, 0, 0), (1, 0, 0), (1, 1, 0), (0, 1, 0),
                    (0, 0, 1), (1, 0, 1), (1, 1, 1), (0, 1, 1)]]
        cells.append([[corners[v] for v in f] for f in _HEX_FACES])
    return _assemble_from_cell_vertex_faces(verts, cells)


def load_mesh(path) -> PolyMesh:
    """Read a mesh from the JSON format (1-based, sign-carrying face references in cells)."""
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise MeshParseError(f"{path}: {exc}") from exc
    try:
        vertices = np.asarray(doc["vertices"], dtype=float)
        faces = [[int(v) for v in f] for f in doc["faces"]]
        raw_cells = doc["cells"]
    except (KeyError, TypeError, ValueError) as exc:
        raise MeshParseError(f"{path}: malformed mesh document ({exc})") from exc
    cell_faces, cell_signs = [], []
    for c in raw_cells:
        if any(int(x) == 0 for x in c):
            raise MeshParseError(f"{path}: face reference 0 is invalid (1-based)")
        cell_faces.append([abs(int(x)) - 1 for x in c])
        cell_signs.append([1.0 if int(x) > 0 else -1.0 for x in c])
    return PolyMesh.from_connectivity(vertices, faces, cell_faces, cell_signs)


def save_mesh(mesh: PolyMesh, path) -> None:
    cells = [
        [int(s) * (int(f) + 1) for f, s in zip(fs, ss)]
        for fs, ss in zip(mesh.cell_faces, mesh.cell_signs)
    ]
    doc = {
        "vertices": mesh.vertices.tolist(),
        "faces": [[int(v) for v in f] for f in mesh.faces],
        "cells": cells,
    }
    Path(path).write_text(json.dumps(doc))


def inradius(mesh: PolyMesh, t: int) -> float:
    if mesh.is_tetrahedron(t):
        return 3.0 * mesh.cell_volume[t] / mesh.face_area[mesh.cell_faces[t]].sum()
    s = mesh.cell_star[t]
    fs = mesh.cell_faces[t]
    return float(np.abs(((mesh.face_centroid[fs] - s) * mesh.face_normal[fs]).sum(axis=1)).min())


def compute_stats(mesh: PolyMesh) -> MeshStats:
    rho = max(mesh.cell_diameter[t] / inradius(mesh, t) for t in range(mesh.n_cells))
    return MeshStats(
        h=mesh.h,
        n_cells=mesh.n_cells,
        n_interior_faces=int((~mesh.face_boundary).sum()),
        regularity=float(rho),
    )
