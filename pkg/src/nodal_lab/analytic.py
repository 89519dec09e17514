"""Closed-form eigenfunctions and tube-measure oracles on the model surfaces."""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import lpmv

from .errors import (
    GeometryMismatchError,
    InvalidArgumentError,
    UnsupportedOracleError,
)
from .mesh import EMBEDDED, FLAT_TORUS, TriMesh

SPHERE = "unit-sphere"
TORUS = "flat-torus"

J01 = 2.404825557695773  # first zero of J0
J11 = 3.831705970207512  # first zero of J1


@dataclass(frozen=True)
class AnalyticMode:
    surface: str
    index: tuple
    lam: float
    phase: float = 0.0
    period: tuple[float, float] = (1.0, 1.0)

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if self.surface == SPHERE:
            l, m = self.index
            x, y, z = points.T
            z = np.clip(z / np.linalg.norm(points, axis=1), -1.0, 1.0)
            if m == 0:
                return legendre(l, z)
            az = np.arctan2(y, x)
            plm = lpmv(abs(m), l, z)
            return plm * (np.cos(m * az) if m > 0 else np.sin(-m * az))
        kx, ky = self.index
        Lx, Ly = self.period
        return np.cos(2 * np.pi * (kx * points[:, 0] / Lx + ky * points[:, 1] / Ly) + self.phase)

    @property
    def wavenumber(self) -> float:
        """|k| in cycles per unit length (torus modes)."""
        kx, ky = self.index
        Lx, Ly = self.period
        return math.hypot(kx / Lx, ky / Ly)

    def spec(self) -> str:
        if self.surface == SPHERE:
            return f"sphere:l={self.index[0]},m={self.index[1]}"
        s = f"torus:kx={self.index[0]},ky={self.index[1]},phase={self.phase!r}"
        if self.period != (1.0, 1.0):
            s += f",Lx={self.period[0]!r},Ly={self.period[1]!r}"
        return s


def sphere_harmonic(l: int, m: int = 0) -> AnalyticMode:
    if l < 0 or abs(m) > l:
        raise InvalidArgumentError(f"need 0 <= |m| <= l, got l={l}, m={m}")
    return AnalyticMode(SPHERE, (int(l), int(m)), float(l * (l + 1)))


def torus_mode(kx: int, ky: int = 0, phase: float = 0.0, Lx: float = 1.0, Ly: float = 1.0) -> AnalyticMode:
    lam = 4 * np.pi**2 * ((kx / Lx) ** 2 + (ky / Ly) ** 2)
    return AnalyticMode(TORUS, (int(kx), int(ky)), float(lam), float(phase), (float(Lx), float(Ly)))


_MODE_RE = re.compile(r"^\s*(sphere|torus)\s*:(.*)$")


def parse_mode(text: str) -> AnalyticMode:
    """Parse "sphere:l=5,m=0" or "torus:kx=3,ky=0,phase=0[,Lx=..,Ly=..]"."""
    match = _MODE_RE.match(text)
    if not match:
        raise InvalidArgumentError(f"bad mode spec {text!r}")
    kind, rest = match.groups()
    params = {}
    for item in filter(None, (s.strip() for s in rest.split(","))):
        if "=" not in item:
            raise InvalidArgumentError(f"bad mode parameter {item!r} in {text!r}")
        key, value = (s.strip() for s in item.split("=", 1))
        params[key] = value
    try:
        if kind == "sphere":
            unknown = set(params) - {"l", "m"}
            if unknown or "l" not in params:
                raise InvalidArgumentError(f"sphere mode needs l (and optional m): {text!r}")
            return sphere_harmonic(int(params["l"]), int(params.get("m", 0)))
        unknown = set(params) - {"kx", "ky", "phase", "Lx", "Ly"}
        if unknown:
            raise InvalidArgumentError(f"unknown torus mode parameters {sorted(unknown)}")
        return torus_mode(int(params.get("kx", 0)), int(params.get("ky", 0)),
                          float(params.get("phase", 0.0)),
                          float(params.get("Lx", 1.0)), float(params.get("Ly", 1.0)))
    except ValueError as exc:
        if isinstance(exc, InvalidArgumentError):
            raise
        raise InvalidArgumentError(f"bad number in mode spec {text!r}") from exc


def sample(mode: AnalyticMode, mesh: TriMesh) -> np.ndarray:
    if mode.surface == SPHERE:
        if mesh.geometry != EMBEDDED or not np.allclose(np.linalg.norm(mesh.vertices, axis=1), 1.0, atol=1e-9):
            raise GeometryMismatchError("sphere mode needs a mesh with vertices on the unit sphere")
    else:
        if mesh.geometry != FLAT_TORUS or not np.allclose(mesh.period, mode.period):
            raise GeometryMismatchError(f"torus mode with period {mode.period} does not match mesh")
    return mode.evaluate(mesh.vertices)


# -- Legendre polynomials -----------------------------------------------------


def legendre(l: int, x) -> np.ndarray:
    return _legendre_and_derivative(l, x)[0]


def _legendre_and_derivative(l: int, x):
    x = np.asarray(x, dtype=float)
    p0, p1 = np.ones_like(x), x.copy()
    if l == 0:
        return p0, np.zeros_like(x)
    for n in range(2, l + 1):
        p0, p1 = p1, ((2 * n - 1) * x * p1 - (n - 1) * p0) / n
    with np.errstate(divide="ignore", invalid="ignore"):
        dp = l * (x * p1 - p0) / (x**2 - 1)
    return p1, dp


def legendre_zeros(l: int, tol: float = 1e-13, max_iter: int = 100) -> np.ndarray:
    """Zeros of P_l in ascending order, Newton iteration from Chebyshev nodes."""
    if l < 1:
        return np.empty(0)
    x = np.cos(np.pi * (np.arange(1, l + 1) - 0.5) / l)
    for _ in range(max_iter):
        p, dp = _legendre_and_derivative(l, x)
        step = p / dp
        x = x - step
        if np.max(np.abs(step)) < tol:
            break
    else:
        raise RuntimeError(f"Legendre zeros of degree {l} did not converge")
    return np.sort(x)


# -- oracle curves ------------------------------------------------------------


@dataclass(frozen=True)
class OracleCurve:
    """r -> m_g(M minus B_r(A)) in closed form; `r_cover` is where it first reaches 0."""

    description: str
    fn: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    r_cover: float

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        return np.clip(self.fn(r), 0.0, 1.0)


def tube_complement_oracle(mode: AnalyticMode) -> OracleCurve:
    if mode.lam == 0:
        raise UnsupportedOracleError("constant mode has no nodal set")
    if mode.surface == TORUS:
        # nodal set: parallel closed geodesics spaced 1/(2|k|) apart
        k = mode.wavenumber
        return OracleCurve(f"torus {mode.spec()}: 1 - 4|k|r",
                           lambda r: np.maximum(0.0, 1.0 - 4.0 * k * r), 1.0 / (4.0 * k))
    l, m = mode.index
    if m != 0:
        raise UnsupportedOracleError("tube oracle needs a zonal sphere harmonic (m = 0)")
    theta = np.sort(np.arccos(legendre_zeros(l)))
    gaps = np.diff(theta) / 2.0

    def fn(r):
        r = np.asarray(r, dtype=float)
        cap_n = np.where(theta[0] > r, (1.0 - np.cos(np.maximum(theta[0] - r, 0.0))) / 2.0, 0.0)
        cap_s = np.where(np.pi - theta[-1] > r, (1.0 + np.cos(np.minimum(theta[-1] + r, np.pi))) / 2.0, 0.0)
        total = cap_n + cap_s
        for a, b in zip(theta[:-1], theta[1:]):
            lo, hi = a + r, b - r
            total = total + np.where(hi > lo, (np.cos(lo) - np.cos(np.maximum(hi, lo))) / 2.0, 0.0)
        return total

    r_cover = float(max(theta[0], np.pi - theta[-1], gaps.max() if len(gaps) else 0.0))
    return OracleCurve(f"sphere {mode.spec()}: latitude bands", fn, r_cover)


def boundary_oracle(shape: str, size: float = 1.0) -> tuple[OracleCurve, float]:
    """Tube complement of the boundary and exact first Dirichlet eigenvalue.

    shape is "disk" (size = radius R), "square" (side L) or "strip" (width w).
    """
    s = float(size)
    if shape == "disk":
        return OracleCurve(f"disk R={s!r}: (1 - r/R)^2",
                           lambda r: np.maximum(0.0, 1.0 - r / s) ** 2, s), J01**2 / s**2
    if shape == "square":
        return OracleCurve(f"square L={s!r}: (1 - 2r/L)^2",
                           lambda r: np.maximum(0.0, 1.0 - 2.0 * r / s) ** 2, s / 2), 2 * np.pi**2 / s**2
    if shape == "strip":
        return OracleCurve(f"strip w={s!r}: 1 - 2r/w",
                           lambda r: np.maximum(0.0, 1.0 - 2.0 * r / s), s / 2), np.pi**2 / s**2
    raise UnsupportedOracleError(f"no boundary oracle for shape {shape!r}")


def dirichlet_exact(shape: str, size: float = 1.0, k: int = 1) -> float:
    """Exact k-th Dirichlet eigenvalue for the first few levels of the model shapes."""
    if shape == "square":
        vals = sorted(np.pi**2 * (a * a + b * b) / size**2 for a in range(1, 12) for b in range(1, 12))
        return float(vals[k - 1])
    if shape == "disk" and k in (1, 2, 3):
        return float([J01, J11, J11][k - 1] ** 2 / size**2)
    if shape == "strip" and k == 1:
        return float(np.pi**2 / size**2)
    raise UnsupportedOracleError(f"no exact Dirichlet eigenvalue {k} for {shape!r}")
