"""Fast-marching distance engine on triangle meshes.

Vertices are finalized in Dijkstra order; each newly finalized vertex relaxes its
neighbours by edge length and, where the third corner of a face is already final,
by the planar-wavefront update across that face.  Edge lengths are intrinsic
(minimum image on the flat torus), so the same code serves every geometry.

Sources are seeded with their exact in-face Euclidean distance to the source set,
which makes straight nodal lines and polygon boundaries exact up to rounding.
"""
from __future__ import annotations

import heapq

import numpy as np
from numba import njit

from .errors import InvalidArgumentError
from .mesh import TriMesh


@njit(cache=True)
def _march(vf_ptr, vf_idx, faces, flen, d0, limit):
    n = d0.shape[0]
    d = d0.copy()
    known = np.zeros(n, dtype=np.bool_)
    heap = [(0.0, 0)]
    heap.pop()
    for i in range(n):
        if d[i] < np.inf:
            heap.append((d[i], i))
    heapq.heapify(heap)
    while len(heap) > 0:
        dv, v = heapq.heappop(heap)
        if known[v] or dv > d[v]:
            continue
        if dv > limit:
            break
        known[v] = True
        for p in range(vf_ptr[v], vf_ptr[v + 1]):
            f = vf_idx[p]
            iv = 0
            for k in range(3):
                if faces[f, k] == v:
                    iv = k
            for s in range(1, 3):
                iw = (iv + s) % 3
                iu = (iv + 3 - s) % 3
                w = faces[f, iw]
                if known[w]:
                    continue
                u = faces[f, iu]
                b = flen[f, iu]  # |vw|, opposite u
                cand = dv + b
                if known[u]:
                    c = flen[f, iw]  # |vu|
                    a = flen[f, iv]  # |uw|
                    du = d[u]
                    nx = (du - dv) / c
                    if -1.0 < nx < 1.0:
                        ny = np.sqrt(1.0 - nx * nx)
                        xw = (b * b + c * c - a * a) / (2.0 * c)
                        yw2 = b * b - xw * xw
                        if yw2 > 0.0:
                            yw = np.sqrt(yw2)
                            foot = xw - nx * yw / ny
                            if 0.0 <= foot <= c:
                                tri = dv + nx * xw + ny * yw
                                if tri < cand:
                                    cand = tri
                if cand < d[w]:
                    d[w] = cand
                    heapq.heappush(heap, (cand, w))
    for i in range(n):
        if not known[i]:
            d[i] = np.inf
    return d


def _point_segment(p, a, b):
    ab = b - a
    denom = float(ab @ ab)
    t = 0.0 if denom == 0.0 else min(1.0, max(0.0, float((p - a) @ ab) / denom))
    return float(np.linalg.norm(p - (a + t * ab)))


class FastMarching:
    """Precomputed incidence and intrinsic face geometry for one mesh."""

    def __init__(self, mesh: TriMesh):
        self.mesh = mesh
        f = mesh.faces
        self.faces = np.ascontiguousarray(f, dtype=np.int64)
        flen = np.empty((len(f), 3))
        for k in range(3):
            i, j = f[:, (k + 1) % 3], f[:, (k + 2) % 3]
            flen[:, k] = np.linalg.norm(mesh.displacement(i, j), axis=1)
        self.flen = flen
        order = np.argsort(f.ravel(), kind="stable")
        self.vf_idx = (order // 3).astype(np.int64)
        counts = np.bincount(f.ravel(), minlength=mesh.n_vertices)
        self.vf_ptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        # corner positions relative to corner 0 (unwrapped on the torus)
        self.local = np.stack([np.zeros((len(f), mesh.dim)),
                               mesh.displacement(f[:, 0], f[:, 1]),
                               mesh.displacement(f[:, 0], f[:, 2])], axis=1)
        self._edge_faces = None

    def run(self, seeds: np.ndarray, limit: float = np.inf) -> np.ndarray:
        seeds = np.asarray(seeds, dtype=float)
        if not np.any(np.isfinite(seeds)):
            raise InvalidArgumentError("empty source set")
        return _march(self.vf_ptr, self.vf_idx, self.faces, self.flen, seeds, float(limit))

    # -- seeding ------------------------------------------------------------

    def from_vertices(self, ids, limit: float = np.inf) -> np.ndarray:
        seeds = np.full(self.mesh.n_vertices, np.inf)
        ids = np.asarray(ids, dtype=np.int64)
        if ids.size == 0:
            raise InvalidArgumentError("empty source set")
        seeds[ids] = 0.0
        return self.run(seeds, limit)

    def _crossing_local(self, face, slot, nodal, c):
        """Position of crossing c (on face edge `slot`) in the face's local frame."""
        u, _ = nodal.edge_vertices[c]
        t = nodal.t[c]
        a, b = slot, (slot + 1) % 3
        Pa, Pb = self.local[face, a], self.local[face, b]
        if self.faces[face, a] == u:
            return Pa + t * (Pb - Pa)
        return Pb + t * (Pa - Pb)

    def nodal_seeds(self, nodal) -> np.ndarray:
        mesh = self.mesh
        seeds = np.full(mesh.n_vertices, np.inf)
        seeds[nodal.zero_vertices] = 0.0
        edge_cross = np.full(len(mesh.edges), -1, dtype=np.int64)
        edge_cross[nodal.edge_ids] = np.arange(nodal.n_crossings)
        fc = edge_cross[mesh.face_edges]
        is_zero = np.zeros(mesh.n_vertices, dtype=bool)
        is_zero[nodal.zero_vertices] = True
        touched = np.flatnonzero((fc >= 0).any(axis=1) | is_zero[self.faces].any(axis=1))
        for face in touched:
            pts = [self._crossing_local(face, s, nodal, fc[face, s]) for s in range(3) if fc[face, s] >= 0]
            pts += [self.local[face, k] for k in range(3) if is_zero[self.faces[face, k]]]
            for k in range(3):
                P = self.local[face, k]
                if len(pts) == 1:
                    dist = float(np.linalg.norm(P - pts[0]))
                else:
                    dist = min(_point_segment(P, pts[i], pts[j])
                               for i in range(len(pts)) for j in range(i + 1, len(pts)))
                v = self.faces[face, k]
                if dist < seeds[v]:
                    seeds[v] = dist
        return seeds

    def from_nodal(self, nodal, limit: float = np.inf) -> np.ndarray:
        if nodal.is_empty:
            raise InvalidArgumentError("empty nodal set: no distance sources")
        return self.run(self.nodal_seeds(nodal), limit)

    def from_nodal_point(self, nodal, point: int, limit: float = np.inf) -> np.ndarray:
        """Distances from a single nodal point (crossing or zero vertex)."""
        mesh = self.mesh
        seeds = np.full(mesh.n_vertices, np.inf)
        if point >= nodal.n_crossings:
            seeds[nodal.zero_vertices[point - nodal.n_crossings]] = 0.0
            return self.run(seeds, limit)
        if self._edge_faces is None:
            fe = mesh.face_edges.ravel()
            order = np.argsort(fe, kind="stable")
            self._edge_faces = (order, np.searchsorted(fe[order], np.arange(len(mesh.edges) + 1)))
        order, ptr = self._edge_faces
        e = nodal.edge_ids[point]
        for flat in order[ptr[e]:ptr[e + 1]]:
            face, slot = divmod(int(flat), 3)
            x = self._crossing_local(face, slot, nodal, point)
            for k in range(3):
                v = self.faces[face, k]
                seeds[v] = min(seeds[v], float(np.linalg.norm(self.local[face, k] - x)))
        return self.run(seeds, limit)

    def at_nodal_points(self, values: np.ndarray, nodal) -> np.ndarray:
        """Linear interpolation of a vertex field at every nodal point."""
        u, v = nodal.edge_vertices[:, 0], nodal.edge_vertices[:, 1]
        cross = (1.0 - nodal.t) * values[u] + nodal.t * values[v]
        return np.concatenate([cross, values[nodal.zero_vertices]])
