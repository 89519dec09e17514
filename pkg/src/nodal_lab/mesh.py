"""Triangle meshes for the model surfaces: generation, refinement, measure, OFF I/O.

Three geometries are supported:

* ``embedded-3d``: vertices are points in R^3 (the icosphere).
* ``flat-torus``: 2D vertices in [0, Lx) x [0, Ly) with periodic identification;
  every edge vector is taken as the minimum image, so lengths and areas are
  those of the quotient metric.
* ``planar``: 2D vertices in the plane (disk, square).

A flat-torus mesh may also carry a boundary (a nodal strip, the periodic strip).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components

from .errors import (
    EmptyDomainError,
    InvalidArgumentError,
    ResourceError,
)

EMBEDDED = "embedded-3d"
FLAT_TORUS = "flat-torus"
PLANAR = "planar"
GEOMETRIES = (EMBEDDED, FLAT_TORUS, PLANAR)

MAX_ICOSPHERE_DEPTH = 8
MAX_FACES = 20 * 4**MAX_ICOSPHERE_DEPTH


@dataclass(frozen=True, eq=False)
class TriMesh:
    vertices: np.ndarray
    faces: np.ndarray
    geometry: str = EMBEDDED
    period: tuple[float, float] | None = None
    meta: dict = field(default_factory=dict)
    # index of each vertex in the mesh this one was extracted from
    parent_index: np.ndarray | None = None

    def __post_init__(self):
        v = np.ascontiguousarray(self.vertices, dtype=float)
        f = np.ascontiguousarray(self.faces, dtype=np.int64).reshape(-1, 3)
        if self.geometry not in GEOMETRIES:
            raise InvalidArgumentError(f"unknown geometry {self.geometry!r}")
        dim = 3 if self.geometry == EMBEDDED else 2
        if v.ndim != 2 or v.shape[1] != dim:
            raise InvalidArgumentError(f"{self.geometry} mesh needs {dim}D vertices, got shape {v.shape}")
        if f.size and (f.min() < 0 or f.max() >= len(v)):
            raise InvalidArgumentError("face index out of range")
        if self.geometry == FLAT_TORUS:
            if self.period is None:
                raise InvalidArgumentError("flat-torus mesh needs a period (Lx, Ly)")
            object.__setattr__(self, "period", (float(self.period[0]), float(self.period[1])))
        v.setflags(write=False)
        f.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "faces", f)

    # -- basic geometry -------------------------------------------------

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    def wrap(self, d: np.ndarray) -> np.ndarray:
        """Minimum-image representative of displacement vectors (identity off the torus)."""
        if self.geometry != FLAT_TORUS:
            return d
        L = np.asarray(self.period)
        return d - L * np.round(d / L)

    def displacement(self, i, j) -> np.ndarray:
        """Vector from vertex i to vertex j (vectorized)."""
        return self.wrap(self.vertices[j] - self.vertices[i])

    def canonical(self, p: np.ndarray) -> np.ndarray:
        """Reduce positions into the fundamental domain (torus only)."""
        if self.geometry != FLAT_TORUS:
            return p
        return np.mod(p, np.asarray(self.period))

    @cached_property
    def face_areas(self) -> np.ndarray:
        f = self.faces
        e1 = self.displacement(f[:, 0], f[:, 1])
        e2 = self.displacement(f[:, 0], f[:, 2])
        if self.dim == 3:
            a = 0.5 * np.linalg.norm(np.cross(e1, e2), axis=1)
        else:
            a = 0.5 * np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
        a.setflags(write=False)
        return a

    @cached_property
    def total_area(self) -> float:
        return float(self.face_areas.sum())

    # -- combinatorics --------------------------------------------------

    @cached_property
    def _edge_data(self):
        f = self.faces
        half = np.stack([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]], axis=1).reshape(-1, 2)
        key = np.sort(half, axis=1)
        edges, inverse, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
        face_edges = inverse.reshape(-1, 3)
        return edges, face_edges, counts

    @property
    def edges(self) -> np.ndarray:
        """Unique undirected edges (E, 2), sorted lexicographically."""
        return self._edge_data[0]

    @property
    def face_edges(self) -> np.ndarray:
        """Edge ids of each face, in the order (v0v1, v1v2, v2v0)."""
        return self._edge_data[1]

    @property
    def edge_face_counts(self) -> np.ndarray:
        return self._edge_data[2]

    @cached_property
    def boundary_edges(self) -> np.ndarray:
        return self.edges[self.edge_face_counts == 1]

    @cached_property
    def boundary_vertices(self) -> np.ndarray:
        return np.unique(self.boundary_edges)

    @property
    def is_closed(self) -> bool:
        return len(self.boundary_edges) == 0

    @cached_property
    def edge_lengths(self) -> np.ndarray:
        e = self.edges
        return np.linalg.norm(self.displacement(e[:, 0], e[:, 1]), axis=1)

    @property
    def mean_edge_length(self) -> float:
        return float(self.edge_lengths.mean())

    def euler_characteristic(self) -> int:
        used = np.unique(self.faces)
        return int(len(used) - len(self.edges) + len(self.faces))

    def adjacency(self, weighted: bool = False) -> sparse.csr_matrix:
        """Symmetric vertex adjacency, optionally weighted by edge length."""
        e = self.edges
        w = self.edge_lengths if weighted else np.ones(len(e))
        n = self.n_vertices
        a = sparse.coo_matrix((np.r_[w, w], (np.r_[e[:, 0], e[:, 1]], np.r_[e[:, 1], e[:, 0]])), shape=(n, n))
        return a.tocsr()

    def boundary_loops(self) -> int:
        """Number of connected components of the boundary edge graph."""
        b = self.boundary_edges
        if len(b) == 0:
            return 0
        verts, idx = np.unique(b, return_inverse=True)
        idx = idx.reshape(-1, 2)
        g = sparse.coo_matrix((np.ones(len(b)), (idx[:, 0], idx[:, 1])), shape=(len(verts), len(verts)))
        n, _ = connected_components(g, directed=False)
        return int(n)

    def validate(self) -> None:
        """Raise InvalidArgumentError if any structural invariant fails."""
        counts = self.edge_face_counts
        if np.any(counts > 2):
            raise InvalidArgumentError("non-manifold edge (more than two incident faces)")
        if np.any(self.face_areas <= 0):
            bad = int(np.flatnonzero(self.face_areas <= 0)[0])
            raise InvalidArgumentError(f"face {bad} has non-positive area")
        f = self.faces
        directed = np.stack([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]], axis=1).reshape(-1, 2)
        _, c = np.unique(directed, axis=0, return_counts=True)
        if np.any(c > 1):
            raise InvalidArgumentError("inconsistent orientation: a directed edge appears twice")
        if self.dim == 2:
            e1 = self.displacement(f[:, 0], f[:, 1])
            e2 = self.displacement(f[:, 0], f[:, 2])
            signed = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
            if not (np.all(signed > 0) or np.all(signed < 0)):
                raise InvalidArgumentError("planar faces do not share one orientation")


@dataclass(frozen=True, eq=False)
class VolumeMeasure:
    """Lumped vertex probability masses; m_g(A) is a plain weight sum."""

    weights: np.ndarray
    total_area: float

    def of(self, mask) -> float:
        return float(self.weights[mask].sum())


def normalized_measure(mesh: TriMesh) -> VolumeMeasure:
    lumped = np.zeros(mesh.n_vertices)
    np.add.at(lumped, mesh.faces.ravel(), np.repeat(mesh.face_areas / 3.0, 3))
    total = mesh.total_area
    return VolumeMeasure(weights=lumped / total, total_area=total)


# -- generators ----------------------------------------------------------


def _icosahedron():
    # pole-up orientation: vertex 0 at the north pole, two staggered rings of five
    z = 1.0 / np.sqrt(5.0)
    rho = 2.0 / np.sqrt(5.0)
    verts = [(0.0, 0.0, 1.0)]
    for k in range(5):
        a = 2 * np.pi * k / 5
        verts.append((rho * np.cos(a), rho * np.sin(a), z))
    for k in range(5):
        a = 2 * np.pi * k / 5 + np.pi / 5
        verts.append((rho * np.cos(a), rho * np.sin(a), -z))
    verts.append((0.0, 0.0, -1.0))
    faces = []
    for k in range(5):
        u0, u1 = 1 + k, 1 + (k + 1) % 5
        l0, l1 = 6 + k, 6 + (k + 1) % 5
        faces += [(0, u0, u1), (u0, l0, u1), (u1, l0, l1), (11, l1, l0)]
    v = np.array(verts)
    f = np.array(faces)
    # orient outward
    n = np.cross(v[f[:, 1]] - v[f[:, 0]], v[f[:, 2]] - v[f[:, 0]])
    flip = np.einsum("ij,ij->i", n, v[f].mean(axis=1)) < 0
    f[flip] = f[flip][:, ::-1]
    return v, f


def generate_icosphere(depth: int) -> TriMesh:
    """Loop-split icosahedron projected onto the unit sphere; 20 * 4**depth faces."""
    if depth < 0:
        raise InvalidArgumentError("depth must be nonnegative")
    if depth > MAX_ICOSPHERE_DEPTH:
        raise ResourceError(f"icosphere depth {depth} exceeds guard {MAX_ICOSPHERE_DEPTH}")
    v, f = _icosahedron()
    mesh = TriMesh(v, f, EMBEDDED, meta={"shape": "icosphere", "depth": 0})
    for _ in range(depth):
        mesh = refine(mesh)
    return mesh


def generate_flat_torus(nx: int, ny: int, Lx: float = 1.0, Ly: float = 1.0) -> TriMesh:
    """Regular nx-by-ny grid on the flat torus, each cell split along its (i,j)-(i+1,j+1) diagonal."""
    if nx < 3 or ny < 3:
        raise InvalidArgumentError("flat torus needs nx, ny >= 3")
    if 2 * nx * ny > MAX_FACES:
        raise ResourceError("torus grid exceeds the face guard")
    i, j = np.meshgrid(np.arange(nx), np.arange(ny), indexing="xy")
    verts = np.column_stack([i.ravel() * Lx / nx, j.ravel() * Ly / ny])

    def vid(a, b):
        return (a % nx) + nx * (b % ny)

    ii, jj = i.ravel(), j.ravel()
    a, b, c, d = vid(ii, jj), vid(ii + 1, jj), vid(ii + 1, jj + 1), vid(ii, jj + 1)
    faces = np.concatenate([np.column_stack([a, b, c]), np.column_stack([a, c, d])])
    return TriMesh(verts, faces, FLAT_TORUS, period=(Lx, Ly),
                   meta={"shape": "torus", "nx": nx, "ny": ny})


def generate_square(n: int, L: float = 1.0) -> TriMesh:
    """Planar square [0, L]^2 with an n-by-n right-isosceles grid."""
    if n < 1:
        raise InvalidArgumentError("square needs n >= 1")
    if 2 * n * n > MAX_FACES:
        raise ResourceError("square grid exceeds the face guard")
    i, j = np.meshgrid(np.arange(n + 1), np.arange(n + 1), indexing="xy")
    verts = np.column_stack([i.ravel(), j.ravel()]) * (L / n)
    ci, cj = np.meshgrid(np.arange(n), np.arange(n), indexing="xy")
    ci, cj = ci.ravel(), cj.ravel()
    a = ci + (n + 1) * cj
    b, c, d = a + 1, a + n + 2, a + n + 1
    faces = np.concatenate([np.column_stack([a, b, c]), np.column_stack([a, c, d])])
    return TriMesh(verts, faces, PLANAR, meta={"shape": "square", "L": L, "n": n})


def generate_disk(depth: int, R: float = 1.0) -> TriMesh:
    """Planar disk of radius R: a hexagon fan refined `depth` times with boundary projection."""
    if depth < 0:
        raise InvalidArgumentError("depth must be nonnegative")
    if 6 * 4**depth > MAX_FACES:
        raise ResourceError(f"disk depth {depth} exceeds the face guard")
    ang = np.arange(6) * np.pi / 3
    verts = np.vstack([[0.0, 0.0], np.column_stack([R * np.cos(ang), R * np.sin(ang)])])
    faces = np.array([(0, 1 + k, 1 + (k + 1) % 6) for k in range(6)])
    mesh = TriMesh(verts, faces, PLANAR, meta={"shape": "disk", "radius": R, "depth": 0})
    for _ in range(depth):
        mesh = refine(mesh)
    return mesh


def generate_strip(width: float = 1.0, n_across: int = 16, n_along: int = 16,
                   length: float = 1.0) -> TriMesh:
    """Strip [0, width] x (R / length Z): periodic along y, Dirichlet sides at x = 0 and x = width.

    Built as the closed column range of a flat torus of width 2*width, so it keeps the
    flat-torus geometry tag and its quotient metric.
    """
    if n_across < 1:
        raise InvalidArgumentError("strip needs n_across >= 1")
    torus = generate_flat_torus(2 * n_across, n_along, 2 * width, length)
    col = np.rint(torus.vertices[:, 0] / (width / n_across)).astype(int)
    sub = extract_submesh(torus, np.flatnonzero(col <= n_across))
    return TriMesh(sub.vertices, sub.faces, FLAT_TORUS, period=sub.period,
                   meta={"shape": "strip", "width": width, "n_across": n_across,
                         "n_along": n_along, "length": length})


# -- operations on meshes -----------------------------------------------------


def refine(mesh: TriMesh) -> TriMesh:
    """Uniform 1-to-4 split. Icosphere midpoints are re-projected to the unit sphere and
    disk boundary midpoints to the disk's circle."""
    if 4 * mesh.n_faces > MAX_FACES:
        raise ResourceError("refinement exceeds the face guard")
    edges = mesh.edges
    nv = mesh.n_vertices
    mid = mesh.vertices[edges[:, 0]] + 0.5 * mesh.displacement(edges[:, 0], edges[:, 1])
    mid = mesh.canonical(mid)
    shape = mesh.meta.get("shape")
    if shape == "icosphere":
        mid /= np.linalg.norm(mid, axis=1, keepdims=True)
    elif shape == "disk":
        bmask = mesh.edge_face_counts == 1
        r = np.linalg.norm(mid[bmask], axis=1, keepdims=True)
        mid[bmask] *= mesh.meta["radius"] / r
    verts = np.vstack([mesh.vertices, mid])
    f = mesh.faces
    fe = mesh.face_edges + nv
    m01, m12, m20 = fe[:, 0], fe[:, 1], fe[:, 2]
    faces = np.concatenate([
        np.column_stack([f[:, 0], m01, m20]),
        np.column_stack([f[:, 1], m12, m01]),
        np.column_stack([f[:, 2], m20, m12]),
        np.column_stack([m01, m12, m20]),
    ])
    meta = dict(mesh.meta)
    if "depth" in meta:
        meta["depth"] = meta["depth"] + 1
    for key in ("nx", "ny", "n", "n_across", "n_along"):
        if key in meta:
            meta[key] = 2 * meta[key]
    return TriMesh(verts, faces, mesh.geometry, period=mesh.period, meta=meta)


def extract_submesh(mesh: TriMesh, vertex_subset) -> TriMesh:
    """Mesh induced by the faces whose three vertices all lie in `vertex_subset`.

    Vertices are renumbered in increasing parent order; ``parent_index`` maps back.
    """
    keep = np.zeros(mesh.n_vertices, dtype=bool)
    keep[np.asarray(vertex_subset, dtype=np.int64)] = True
    fmask = keep[mesh.faces].all(axis=1)
    if not fmask.any():
        raise EmptyDomainError("vertex subset induces no face")
    faces = mesh.faces[fmask]
    used = np.unique(faces)
    remap = np.full(mesh.n_vertices, -1, dtype=np.int64)
    remap[used] = np.arange(len(used))
    parent = used if mesh.parent_index is None else mesh.parent_index[used]
    meta = {k: v for k, v in mesh.meta.items() if k != "shape"}
    meta["submesh_of"] = mesh.meta.get("shape")
    return TriMesh(mesh.vertices[used], remap[faces], mesh.geometry, period=mesh.period,
                   meta=meta, parent_index=parent)


# -- OFF import / export ------------------------------------------------------


def sidecar_path(path) -> Path:
    return Path(path).with_suffix(".json")


def write_off(mesh: TriMesh, path) -> None:
    path = Path(path)
    v = mesh.vertices
    if v.shape[1] == 2:
        v = np.column_stack([v, np.zeros(len(v))])
    lines = ["OFF", f"{len(v)} {mesh.n_faces} 0"]
    lines += [f"{x!r} {y!r} {z!r}" for x, y, z in v.tolist()]
    lines += [f"3 {a} {b} {c}" for a, b, c in mesh.faces.tolist()]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    if mesh.geometry == FLAT_TORUS:
        Lx, Ly = mesh.period
        sidecar_path(path).write_text(
            json.dumps({"geometry": "flat-torus", "Lx": Lx, "Ly": Ly}) + "\n", encoding="utf-8")


def read_off(path) -> TriMesh:
    path = Path(path)
    tokens = []
    for line in path.read_text(encoding="utf-8").splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            tokens.append(line.split())
    if not tokens or tokens[0][0] != "OFF":
        raise InvalidArgumentError(f"{path}: missing OFF header")
    head = tokens[0][1:] or tokens[1]
    offset = 1 if tokens[0][1:] else 2
    nv, nf = int(head[0]), int(head[1])
    rows = tokens[offset:]
    if len(rows) < nv + nf:
        raise InvalidArgumentError(f"{path}: truncated OFF body")
    verts = np.array([[float(x) for x in r[:3]] for r in rows[:nv]])
    faces = []
    for r in rows[nv:nv + nf]:
        if int(r[0]) != 3:
            raise InvalidArgumentError(f"{path}: only triangular faces are supported")
        faces.append([int(x) for x in r[1:4]])
    faces = np.array(faces, dtype=np.int64).reshape(-1, 3)
    side = sidecar_path(path)
    if side.exists():
        info = json.loads(side.read_text(encoding="utf-8"))
        if info.get("geometry") == "flat-torus":
            return TriMesh(verts[:, :2], faces, FLAT_TORUS, period=(info["Lx"], info["Ly"]))
    if np.all(verts[:, 2] == 0.0):
        return TriMesh(verts[:, :2], faces, PLANAR)
    meta = {}
    if np.allclose(np.linalg.norm(verts, axis=1), 1.0, atol=1e-12):
        meta["shape"] = "icosphere"
    return TriMesh(verts, faces, EMBEDDED, meta=meta)
