"""Nodal sets, nodal domains, graph-geodesic distance fields and tube profiles."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components, dijkstra

from .errors import (
    DegenerateFieldError,
    EmptyDomainError,
    GridRangeError,
    InvalidArgumentError,
)
from .geodesic import FastMarching
from .mesh import FLAT_TORUS, TriMesh, VolumeMeasure

DEFAULT_ZERO_TOL = 1e-9
R_GRID_POINTS = 60
R_GRID_C = 5.0


@dataclass(frozen=True, eq=False)
class NodalSet:
    """Zero set of a P1 field.

    Nodal points are numbered crossings first (0..n_crossings-1), then zero
    vertices; `positions` and `segments` use that numbering.
    """

    edge_ids: np.ndarray
    edge_vertices: np.ndarray  # (nc, 2) endpoints (u, v) of each crossed edge
    t: np.ndarray  # crossing parameter along u -> v
    zero_vertices: np.ndarray
    positions: np.ndarray
    segments: np.ndarray  # (S, 2) pairs of nodal-point ids

    @property
    def n_crossings(self) -> int:
        return len(self.edge_ids)

    @property
    def n_points(self) -> int:
        return len(self.positions)

    @property
    def is_empty(self) -> bool:
        return self.n_points == 0


@dataclass(frozen=True, eq=False)
class DomainLabeling:
    labels: np.ndarray  # -1 on zero vertices
    signs: np.ndarray  # per domain, +1 / -1
    count: int

    def vertices_of(self, domain: int) -> np.ndarray:
        return np.flatnonzero(self.labels == domain)


@dataclass(frozen=True, eq=False)
class DistanceField:
    values: np.ndarray


@dataclass(frozen=True, eq=False)
class TubeProfile:
    """mu(r) = m_g({d > r}) sampled on an ascending r-grid.

    `evaluator`, when present, gives mu at any r inside the grid range (exact step
    function for discrete profiles, the closed form for oracle profiles).
    """

    r: np.ndarray
    mu: np.ndarray
    evaluator: Callable[[np.ndarray], np.ndarray] | None = None
    dist: np.ndarray | None = None
    weights: np.ndarray | None = None

    def at(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if np.any(r > self.r[-1] * (1 + 1e-12) + 1e-15) or np.any(r < 0):
            raise GridRangeError(f"r outside the profile grid [0, {self.r[-1]:.6g}]")
        if self.evaluator is not None:
            return self.evaluator(r)
        return np.interp(r, self.r, self.mu)

    def to_csv(self) -> str:
        lines = ["r,mu"] + [f"{r!r},{m!r}" for r, m in zip(self.r.tolist(), self.mu.tolist())]
        return "\n".join(lines) + "\n"


def sign_pattern(field: np.ndarray, zero_tol: float = DEFAULT_ZERO_TOL) -> np.ndarray:
    field = np.asarray(field, dtype=float)
    scale = np.max(np.abs(field)) if field.size else 0.0
    if scale == 0.0:
        raise DegenerateFieldError("field is identically zero")
    s = np.sign(field).astype(np.int8)
    s[np.abs(field) <= zero_tol * scale] = 0
    return s


def extract_nodal_set(mesh: TriMesh, field, zero_tol: float = DEFAULT_ZERO_TOL) -> NodalSet:
    field = np.asarray(field, dtype=float)
    if field.shape != (mesh.n_vertices,):
        raise InvalidArgumentError("field length does not match the mesh")
    s = sign_pattern(field, zero_tol)
    edges = mesh.edges
    crossed = np.flatnonzero(s[edges[:, 0]] * s[edges[:, 1]] < 0)
    u, v = edges[crossed, 0], edges[crossed, 1]
    t = field[u] / (field[u] - field[v])
    pos = mesh.vertices[u] + t[:, None] * mesh.displacement(u, v)
    pos = mesh.canonical(pos)
    zeros = np.flatnonzero(s == 0)
    positions = np.vstack([pos, mesh.vertices[zeros]]) if len(zeros) else pos

    # nodal point id for each edge crossing / zero vertex
    edge_point = np.full(len(edges), -1, dtype=np.int64)
    edge_point[crossed] = np.arange(len(crossed))
    vert_point = np.full(mesh.n_vertices, -1, dtype=np.int64)
    vert_point[zeros] = len(crossed) + np.arange(len(zeros))
    pts = np.concatenate([edge_point[mesh.face_edges], vert_point[mesh.faces]], axis=1)
    segs = set()
    for row in pts[(pts >= 0).sum(axis=1) >= 2]:
        ids = sorted(int(x) for x in row if x >= 0)
        for i in range(len(ids)):
            for j in range(i + 1, len(ids)):
                segs.add((ids[i], ids[j]))
    segments = np.array(sorted(segs), dtype=np.int64).reshape(-1, 2)
    return NodalSet(crossed, np.column_stack([u, v]), t, zeros, positions, segments)


def nodal_domains(mesh: TriMesh, field, zero_tol: float = DEFAULT_ZERO_TOL) -> DomainLabeling:
    """Connected components of {phi > 0} and {phi < 0} over same-sign mesh edges."""
    s = sign_pattern(np.asarray(field, dtype=float), zero_tol)
    e = mesh.edges
    same = (s[e[:, 0]] == s[e[:, 1]]) & (s[e[:, 0]] != 0)
    e = e[same]
    n = mesh.n_vertices
    g = sparse.coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(n, n))
    _, comp = connected_components(g, directed=False)
    labels = np.full(n, -1, dtype=np.int64)
    nonzero = np.flatnonzero(s != 0)
    # renumber by first vertex occurrence for determinism
    _, first = np.unique(comp[nonzero], return_index=True)
    order = np.argsort(first)
    remap = {int(comp[nonzero][first[k]]): rank for rank, k in enumerate(order)}
    labels[nonzero] = [remap[int(c)] for c in comp[nonzero]]
    count = len(remap)
    signs = np.zeros(count, dtype=np.int8)
    signs[labels[nonzero]] = s[nonzero]
    return DomainLabeling(labels, signs, count)


# -- distances -----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class AugmentedGraph:
    """Mesh vertices plus nodal crossing points, for graph-geodesic distances."""

    graph: sparse.csr_matrix
    n_vertices: int
    nodal: NodalSet | None

    def nodal_node_ids(self) -> np.ndarray:
        """Graph node id of every nodal point, in NodalSet numbering."""
        if self.nodal is None:
            return np.empty(0, dtype=np.int64)
        nc = self.nodal.n_crossings
        return np.concatenate([self.n_vertices + np.arange(nc), self.nodal.zero_vertices])

    def distances_from(self, sources, limit: float = np.inf) -> np.ndarray:
        sources = np.asarray(sources, dtype=np.int64)
        if sources.size == 0:
            raise InvalidArgumentError("empty source set")
        return dijkstra(self.graph, directed=False, indices=sources, min_only=True, limit=limit)


def _dedup_edges(i, j, w, n) -> sparse.csr_matrix:
    a, b = np.minimum(i, j), np.maximum(i, j)
    keep = a != b
    a, b, w = a[keep], b[keep], w[keep]
    order = np.lexsort((w, b, a))
    a, b, w = a[order], b[order], w[order]
    first = np.ones(len(a), dtype=bool)
    first[1:] = (a[1:] != a[:-1]) | (b[1:] != b[:-1])
    a, b, w = a[first], b[first], w[first]
    # explicit zeros would be dropped as non-edges
    w = np.maximum(w, 1e-300)
    return sparse.csr_matrix((w, (a, b)), shape=(n, n))


def _length(mesh: TriMesh, p, q) -> np.ndarray:
    return np.linalg.norm(mesh.wrap(q - p), axis=1)


def build_augmented_graph(mesh: TriMesh, nodal: NodalSet | None = None) -> AugmentedGraph:
    """Mesh edges, split at crossings, plus in-face links from each crossing to the
    face's vertices and to the other crossings of the face."""
    edges = mesh.edges
    lengths = mesh.edge_lengths
    nv = mesh.n_vertices
    if nodal is None or nodal.n_crossings == 0:
        g = _dedup_edges(edges[:, 0], edges[:, 1], lengths, nv)
        return AugmentedGraph(g, nv, nodal)
    nc = nodal.n_crossings
    crossed = np.zeros(len(edges), dtype=bool)
    crossed[nodal.edge_ids] = True
    I, J, W = [edges[~crossed, 0]], [edges[~crossed, 1]], [lengths[~crossed]]
    cid = nv + np.arange(nc)
    elen = lengths[nodal.edge_ids]
    I += [nodal.edge_vertices[:, 0], cid]
    J += [cid, nodal.edge_vertices[:, 1]]
    W += [nodal.t * elen, (1.0 - nodal.t) * elen]
    cpos = nodal.positions[:nc]
    edge_cross = np.full(len(edges), -1, dtype=np.int64)
    edge_cross[nodal.edge_ids] = np.arange(nc)
    fc = edge_cross[mesh.face_edges]  # crossing on each face edge or -1
    for slot in range(3):
        rows = np.flatnonzero(fc[:, slot] >= 0)
        c = fc[rows, slot]
        for corner in range(3):
            vtx = mesh.faces[rows, corner]
            I.append(nv + c)
            J.append(vtx)
            W.append(_length(mesh, cpos[c], mesh.vertices[vtx]))
        for other in range(slot + 1, 3):
            both = rows[fc[rows, other] >= 0]
            c1, c2 = fc[both, slot], fc[both, other]
            I.append(nv + c1)
            J.append(nv + c2)
            W.append(_length(mesh, cpos[c1], cpos[c2]))
    g = _dedup_edges(np.concatenate(I), np.concatenate(J), np.concatenate(W), nv + nc)
    return AugmentedGraph(g, nv, nodal)


def distance_to_set(mesh: TriMesh, sources, method: str = "fmm", engine=None) -> DistanceField:
    """Distance from a NodalSet or from a set of vertex ids.

    method="fmm" (default) uses the fast-marching engine seeded with exact in-face
    distances; method="graph" runs Dijkstra on the augmented graph.  `engine` may pass
    a prebuilt FastMarching or AugmentedGraph for repeated queries on one mesh.
    """
    is_nodal = isinstance(sources, NodalSet)
    if is_nodal and sources.is_empty:
        raise InvalidArgumentError("empty nodal set: no distance sources")
    if not is_nodal:
        sources = np.unique(np.asarray(sources, dtype=np.int64))
        if sources.size == 0:
            raise InvalidArgumentError("empty source set")
    if method == "fmm":
        engine = engine if engine is not None else FastMarching(mesh)
        d = engine.from_nodal(sources) if is_nodal else engine.from_vertices(sources)
    elif method == "graph":
        if engine is None:
            engine = build_augmented_graph(mesh, sources if is_nodal else None)
        src = engine.nodal_node_ids() if is_nodal else sources
        d = engine.distances_from(src)[: mesh.n_vertices]
    else:
        raise InvalidArgumentError(f"unknown distance method {method!r}")
    if is_nodal:
        d[sources.zero_vertices] = 0.0
    return DistanceField(d)


# -- tube profiles -------------------------------------------------------------


def default_r_grid(lam: float, n: int = R_GRID_POINTS, C: float = R_GRID_C) -> np.ndarray:
    if lam <= 0:
        raise InvalidArgumentError("default r-grid needs a positive eigenvalue")
    return np.linspace(0.0, 1.2 * C / np.sqrt(lam), n)


def _check_grid(r_grid) -> np.ndarray:
    r = np.asarray(r_grid, dtype=float)
    if r.ndim != 1 or r.size == 0 or np.any(np.diff(r) < 0):
        raise InvalidArgumentError("r-grid must be a nonempty ascending list")
    return r


def step_mu(dist: np.ndarray, weights: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
    """Exact r -> sum{w_i : d_i > r}."""
    order = np.argsort(dist, kind="stable")
    d_sorted = dist[order]
    tail = np.concatenate([np.cumsum(weights[order][::-1])[::-1], [0.0]])

    def mu(r):
        r = np.asarray(r, dtype=float)
        return tail[np.searchsorted(d_sorted, r, side="right")]

    return mu


def tube_profile(dist: DistanceField, measure: VolumeMeasure, r_grid) -> TubeProfile:
    r = _check_grid(r_grid)
    d = np.asarray(dist.values, dtype=float)
    fn = step_mu(d, measure.weights)
    return TubeProfile(r, fn(r), fn, d, measure.weights)


def oracle_profile(curve, r_grid) -> TubeProfile:
    r = _check_grid(r_grid)
    return TubeProfile(r, curve(r), curve)


def boundary_distance(mesh: TriMesh, method: str = "fmm") -> DistanceField:
    if mesh.is_closed:
        raise InvalidArgumentError("closed mesh has no boundary")
    return distance_to_set(mesh, mesh.boundary_vertices, method=method)


def boundary_distance_profile(mesh: TriMesh, measure: VolumeMeasure, r_grid,
                              method: str = "fmm") -> TubeProfile:
    return tube_profile(boundary_distance(mesh, method), measure, r_grid)


def sup_gap(profile: TubeProfile, curve) -> float:
    return float(np.max(np.abs(profile.mu - curve(profile.r))))


# -- nodal domains as meshes -------------------------------------------------------


def nodal_domain_mesh(mesh: TriMesh, field, domain: int,
                      labeling: DomainLabeling | None = None,
                      zero_tol: float = DEFAULT_ZERO_TOL) -> TriMesh:
    """Closure of one nodal domain as a mesh with boundary on the nodal set.

    Faces are clipped along the P1 zero level set, so the boundary runs through the
    edge crossings and zero vertices rather than staircasing along mesh edges.
    """
    field = np.asarray(field, dtype=float)
    labeling = labeling if labeling is not None else nodal_domains(mesh, field, zero_tol)
    if not 0 <= domain < labeling.count:
        raise EmptyDomainError(f"no nodal domain {domain}")
    s = sign_pattern(field, zero_tol)
    sgn = int(labeling.signs[domain])
    inside = labeling.labels == domain
    nodal = extract_nodal_set(mesh, field, zero_tol)
    edge_cross = np.full(len(mesh.edges), -1, dtype=np.int64)
    edge_cross[nodal.edge_ids] = np.arange(nodal.n_crossings)

    verts = [mesh.vertices]
    nv = mesh.n_vertices
    cross_pos = nodal.positions[: nodal.n_crossings]
    faces = []
    for fi, (tri, fe) in enumerate(zip(mesh.faces, mesh.face_edges)):
        ss = s[tri] * sgn
        member = inside[tri] | (ss == 0)
        if not inside[tri].any():
            continue
        if np.all(ss >= 0) and member.all():
            faces.append(tuple(tri))
            continue
        # walk the triangle boundary, keeping the domain side of the zero line
        poly = []
        for k in range(3):
            a, b = tri[k], tri[(k + 1) % 3]
            if ss[k] > 0 and inside[a] or ss[k] == 0:
                poly.append(a)
            c = edge_cross[fe[k]]
            if c >= 0:
                poly.append(nv + c)
        if len(poly) >= 3:
            for k in range(1, len(poly) - 1):
                faces.append((poly[0], poly[k], poly[k + 1]))
    if not faces:
        raise EmptyDomainError(f"nodal domain {domain} contains no face")
    allv = np.vstack([mesh.vertices, cross_pos]) if len(cross_pos) else mesh.vertices
    parent = np.concatenate([np.arange(nv), np.full(len(allv) - nv, -1)])
    faces = np.array(faces, dtype=np.int64)
    probe = TriMesh(allv, faces, mesh.geometry, period=mesh.period)
    # drop slivers produced by crossings within rounding distance of a vertex
    faces = faces[probe.face_areas > 1e-14 * probe.total_area]
    used = np.unique(faces)
    remap = np.full(len(allv), -1, dtype=np.int64)
    remap[used] = np.arange(len(used))
    return TriMesh(allv[used], remap[faces], mesh.geometry, period=mesh.period,
                   meta={"nodal_domain": int(domain)}, parent_index=parent[used])


# -- export ----------------------------------------------------------------------


def nodal_set_to_json(mesh: TriMesh, nodal: NodalSet) -> dict:
    """Line-segment soup; on the torus the second endpoint is unwrapped next to the first."""
    p = nodal.positions
    a, b = p[nodal.segments[:, 0]], p[nodal.segments[:, 1]]
    b = a + mesh.wrap(b - a)
    return {
        "geometry": mesh.geometry,
        "period": list(mesh.period) if mesh.geometry == FLAT_TORUS else None,
        "n_crossings": nodal.n_crossings,
        "zero_vertices": nodal.zero_vertices.tolist(),
        "segments": [[pa, pb] for pa, pb in zip(a.tolist(), b.tolist())],
    }


def write_nodal_set(mesh: TriMesh, nodal: NodalSet, path) -> None:
    Path(path).write_text(json.dumps(nodal_set_to_json(mesh, nodal)) + "\n", encoding="utf-8")


def write_profile_csv(profile: TubeProfile, path) -> None:
    Path(path).write_text(profile.to_csv(), encoding="utf-8")
