"""Discrete Laplace-Beltrami operator (cotangent stiffness, lumped mass) and eigensolvers.

Sign convention: S is positive semidefinite and eigenpairs solve S phi = lambda D phi
with lambda >= 0.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg
from scipy import sparse
from scipy.sparse.linalg import ArpackNoConvergence, eigsh

from .errors import (
    AssemblyError,
    ConvergenceError,
    InvalidArgumentError,
    UnderResolvedDomainError,
)
from .mesh import TriMesh

RESIDUAL_TOL = 1e-8
DENSE_LIMIT = 400


@dataclass(frozen=True, eq=False)
class OperatorPair:
    stiffness: sparse.csr_matrix
    mass: np.ndarray  # diagonal of D, unnormalized lumped areas
    total_area: float
    faces: np.ndarray
    face_cot: np.ndarray  # half-cotangent weight of each face edge (v0v1, v1v2, v2v0)
    face_areas: np.ndarray

    @property
    def n(self) -> int:
        return len(self.mass)

    @property
    def mass_matrix(self) -> sparse.dia_matrix:
        return sparse.diags(self.mass)


@dataclass(frozen=True, eq=False)
class EigenPair:
    lam: float
    field: np.ndarray
    residual: float


def assemble(mesh: TriMesh) -> OperatorPair:
    f = mesh.faces
    areas = mesh.face_areas
    if np.any(areas <= 0):
        bad = int(np.flatnonzero(areas <= 0)[0])
        raise AssemblyError(f"degenerate face {bad} (vertices {f[bad].tolist()}) has zero area")
    # cotangent of the angle opposite each face edge: edge (i, j) is opposite vertex k
    cots = np.empty((len(f), 3))
    for slot, (i, j, k) in enumerate(((0, 1, 2), (1, 2, 0), (2, 0, 1))):
        u = mesh.displacement(f[:, k], f[:, i])
        v = mesh.displacement(f[:, k], f[:, j])
        dot = np.einsum("ij,ij->i", u, v)
        cots[:, slot] = dot / (2.0 * areas)  # |u x v| = 2 * area
    half = 0.5 * cots
    I = np.concatenate([f[:, 0], f[:, 1], f[:, 2]])
    J = np.concatenate([f[:, 1], f[:, 2], f[:, 0]])
    W = np.concatenate([half[:, 0], half[:, 1], half[:, 2]])
    n = mesh.n_vertices
    off = sparse.coo_matrix((-W, (I, J)), shape=(n, n))
    off = off + off.T
    diag = -np.asarray(off.sum(axis=1)).ravel()
    S = (off + sparse.diags(diag)).tocsr()
    S.sum_duplicates()
    mass = np.zeros(n)
    np.add.at(mass, f.ravel(), np.repeat(areas / 3.0, 3))
    if np.any(mass <= 0):
        raise AssemblyError("isolated vertex with zero lumped mass")
    return OperatorPair(S, mass, float(areas.sum()), f.copy(), half, np.asarray(areas).copy())


def _default_start(n: int) -> np.ndarray:
    # fixed, nonsymmetric start vector so runs are reproducible
    return 1.0 + 0.5 * np.cos(0.7 * np.arange(n)) + 0.25 * np.sin(1.3 * np.arange(n) ** 0.5)


def _solve_pencil(S: sparse.csr_matrix, d: np.ndarray, k: int, sigma: float,
                  maxiter: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    n = S.shape[0]
    if k < 1:
        raise InvalidArgumentError("k must be positive")
    if k >= n:
        raise InvalidArgumentError(f"k={k} must be smaller than the problem size {n}")
    if n <= DENSE_LIMIT:
        w, V = scipy.linalg.eigh(S.toarray(), np.diag(d), subset_by_index=[0, k - 1])
        return w, V
    try:
        w, V = eigsh(S.tocsc(), k=k, M=sparse.diags(d).tocsc(), sigma=sigma, which="LM",
                     v0=_default_start(n), tol=0.0, maxiter=maxiter)
    except ArpackNoConvergence as exc:
        raise ConvergenceError(f"shift-invert Lanczos did not converge: {exc}") from exc
    # Rayleigh-Ritz on the converged block gives D-orthonormal Ritz vectors
    Ss = V.T @ (S @ V)
    Ds = V.T @ (d[:, None] * V)
    Ss, Ds = 0.5 * (Ss + Ss.T), 0.5 * (Ds + Ds.T)
    w, Y = scipy.linalg.eigh(Ss, Ds)
    return w, V @ Y


def _finish(S, d, total_area, w, V, sign_fix=True) -> list[EigenPair]:
    order = np.argsort(w, kind="stable")
    pairs = []
    residuals = []
    for idx in order:
        phi = V[:, idx]
        norm = np.sqrt(phi @ (d * phi) / total_area)
        phi = phi / norm
        if sign_fix:
            lead = int(np.argmax(np.abs(phi) > 0.5 * np.abs(phi).max()))
            if phi[lead] < 0:
                phi = -phi
        lam = float(phi @ (S @ phi)) / float(phi @ (d * phi))
        lam = max(lam, 0.0) if abs(lam) < 1e-12 else lam
        Dphi = d * phi
        res = np.linalg.norm(S @ phi - lam * Dphi) / np.linalg.norm(Dphi)
        residuals.append(res)
        pairs.append(EigenPair(lam, phi, float(res)))
    bad = [r for r in residuals if r > RESIDUAL_TOL]
    if bad:
        raise ConvergenceError(f"eigen-residual {max(bad):.3e} exceeds {RESIDUAL_TOL}", residuals)
    return pairs


def smallest_eigenpairs(ops: OperatorPair, k: int, maxiter: int | None = None) -> list[EigenPair]:
    """k smallest generalized eigenpairs of (S, D), ascending, fields with unit m_g-norm."""
    sigma = -1.0 / ops.total_area
    w, V = _solve_pencil(ops.stiffness, ops.mass, k, sigma, maxiter)
    return _finish(ops.stiffness, ops.mass, ops.total_area, w, V)


def _interior(mesh: TriMesh) -> np.ndarray:
    if mesh.is_closed:
        raise InvalidArgumentError("Dirichlet problem needs a mesh with boundary")
    interior = np.ones(mesh.n_vertices, dtype=bool)
    interior[mesh.boundary_vertices] = False
    idx = np.flatnonzero(interior)
    if len(idx) == 0:
        raise UnderResolvedDomainError("domain has no interior vertex")
    return idx


def dirichlet_eigenpairs(mesh: TriMesh, k: int, ops: OperatorPair | None = None) -> list[EigenPair]:
    """k smallest Dirichlet eigenpairs; fields are extended by zero on the boundary."""
    ops = assemble(mesh) if ops is None else ops
    idx = _interior(mesh)
    if k > len(idx):
        raise UnderResolvedDomainError(f"only {len(idx)} interior vertices for k={k}")
    S = ops.stiffness[idx][:, idx].tocsr()
    d = ops.mass[idx]
    if k == len(idx):
        w, V = scipy.linalg.eigh(S.toarray(), np.diag(d))
    else:
        w, V = _solve_pencil(S, d, k, sigma=0.0)
    inner = _finish(S, d, ops.total_area, w, V)
    out = []
    for p in inner:
        full = np.zeros(mesh.n_vertices)
        full[idx] = p.field
        out.append(EigenPair(p.lam, full, p.residual))
    return out


def dirichlet_lambdak(mesh: TriMesh, k: int) -> float:
    if k < 1:
        raise InvalidArgumentError("k is 1-based and must be >= 1")
    return dirichlet_eigenpairs(mesh, k)[k - 1].lam


def dirichlet_lambda1(mesh: TriMesh) -> float:
    return dirichlet_lambdak(mesh, 1)


def rayleigh_quotient(ops: OperatorPair, field: np.ndarray) -> float:
    field = np.asarray(field, dtype=float)
    return float(field @ (ops.stiffness @ field)) / float(field @ (ops.mass * field))


def dirichlet_energy_density(ops: OperatorPair, field: np.ndarray) -> np.ndarray:
    """Per-vertex |grad phi|^2: face values area-averaged over each vertex star.

    The face value is the exact P1 energy of the face divided by its area, so the
    lumped-measure integral of the result reproduces phi^T S phi / v_g(M).
    """
    field = np.asarray(field, dtype=float)
    if field.shape != (ops.n,):
        raise InvalidArgumentError(f"field has shape {field.shape}, expected ({ops.n},)")
    f = ops.faces
    diffs = np.stack([field[f[:, 0]] - field[f[:, 1]],
                      field[f[:, 1]] - field[f[:, 2]],
                      field[f[:, 2]] - field[f[:, 0]]], axis=1)
    face_energy = np.sum(ops.face_cot * diffs**2, axis=1)
    num = np.zeros(ops.n)
    den = np.zeros(ops.n)
    np.add.at(num, f.ravel(), np.repeat(face_energy, 3))
    np.add.at(den, f.ravel(), np.repeat(ops.face_areas, 3))
    return np.maximum(num / den, 0.0)


def eigenpairs_to_json(pairs: list[EigenPair]) -> dict:
    return {
        "lambda": [p.lam for p in pairs],
        "fields": [p.field.tolist() for p in pairs],
        "residuals": [p.residual for p in pairs],
    }


def write_eigenpairs(pairs: list[EigenPair], path) -> None:
    Path(path).write_text(json.dumps(eigenpairs_to_json(pairs)) + "\n", encoding="utf-8")


def read_eigenpairs(path) -> list[EigenPair]:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return [EigenPair(float(l), np.asarray(f, dtype=float), float(r))
            for l, f, r in zip(data["lambda"], data["fields"], data["residuals"])]
