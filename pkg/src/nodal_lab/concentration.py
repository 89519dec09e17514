"""Inequality checks, the nodal-ball construction, and empirical constant fits."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from .errors import (
    EmptyDomainError,
    GridRangeError,
    GuardError,
    InvalidArgumentError,
)
from .geodesic import FastMarching
from .mesh import TriMesh, VolumeMeasure
from .nodal import DistanceField, NodalSet, TubeProfile, extract_nodal_set

log = logging.getLogger(__name__)

DEFAULT_KAPPA = 2.0
DEFAULT_C_BALL = math.pi / 2
DEFAULT_C_THRESH = 8.0


@dataclass(frozen=True)
class CheckRecord:
    x: object
    lhs: float
    rhs: float
    tol: float = 0.0
    label: str | None = None
    extra: dict = field(default_factory=dict)

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    @property
    def passed(self) -> bool:
        return self.slack >= -self.tol

    def to_dict(self) -> dict:
        d = {"x": _num(self.x), "lhs": _num(self.lhs), "rhs": _num(self.rhs),
             "slack": _num(self.slack), "pass": bool(self.passed)}
        if self.label is not None:
            d["label"] = self.label
        d.update({k: _num(v) for k, v in self.extra.items()})
        return d


@dataclass
class CheckReport:
    check: str
    lam: float | None
    records: list[CheckRecord]
    tol_h: float = 0.0
    fitted_constant: float | None = None
    mesh: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)
    extra_checks: dict = field(default_factory=dict)

    @property
    def pass_all(self) -> bool:
        return all(r.passed for r in self.records) and all(self.extra_checks.values())

    @property
    def max_violation(self) -> float:
        return max([0.0] + [-r.slack for r in self.records])

    def to_dict(self) -> dict:
        return {
            "check": self.check,
            "lambda": _num(self.lam),
            "mesh": {k: _num(v) for k, v in self.mesh.items()},
            "tol_h": _num(self.tol_h),
            "records": [r.to_dict() for r in self.records],
            "fitted_constant": _num(self.fitted_constant),
            "pass_all": self.pass_all,
            "max_violation": _num(self.max_violation),
            "params": {k: _num(v) for k, v in self.params.items()},
            "extra": {k: _num(v) for k, v in self.extra.items()},
            "extra_checks": {k: bool(v) for k, v in self.extra_checks.items()},
        }

    def to_csv(self) -> str:
        lines = ["x,lhs,rhs,slack,pass"]
        for r in self.records:
            x = r.x if not isinstance(r.x, (tuple, list)) else ";".join(repr(float(v)) for v in r.x)
            x = repr(float(x)) if isinstance(x, (int, float, np.floating)) else str(x)
            lines.append(f"{x},{float(r.lhs)!r},{float(r.rhs)!r},{float(r.slack)!r},{str(r.passed).lower()}")
        return "\n".join(lines) + "\n"


def _num(v):
    """JSON-safe scalar: numpy -> python, non-finite -> None."""
    if isinstance(v, (list, tuple)):
        return [_num(x) for x in v]
    if isinstance(v, dict):
        return {k: _num(x) for k, x in v.items()}
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else None
    return v


def mesh_info(mesh: TriMesh | None) -> dict:
    if mesh is None:
        return {"h": 0.0, "depth": None}
    depth = mesh.meta.get("depth", mesh.meta.get("nx", mesh.meta.get("n")))
    return {"h": mesh.mean_edge_length, "depth": depth}


def discretization_allowance(mesh: TriMesh, lam: float, kappa: float = DEFAULT_KAPPA) -> float:
    """tol_h = kappa * h * sqrt(lambda), h the mean edge length."""
    return kappa * mesh.mean_edge_length * math.sqrt(max(lam, 0.0))


# -- tube-measure inequalities ---------------------------------------------------


def _exp_decay_report(name, profile: TubeProfile, lam: float, tol_h: float, mesh=None) -> CheckReport:
    if lam <= 0:
        raise InvalidArgumentError(f"{name}: eigenvalue must be positive, got {lam}")
    s = math.sqrt(lam)
    recs = [CheckRecord(float(r), float(m), math.exp(1.0 - s * r), tol_h)
            for r, m in zip(profile.r, profile.mu)]
    return CheckReport(name, lam, recs, tol_h, mesh=mesh_info(mesh))


def check_nodal_concentration(profile: TubeProfile, lam: float, tol_h: float = 0.0,
                              mesh: TriMesh | None = None) -> CheckReport:
    """m_g(M minus B_r(nodal set)) <= exp(1 - sqrt(lambda) r) on every grid r."""
    return _exp_decay_report("nodal-tube", profile, lam, tol_h, mesh)


def check_boundary_decay(profile: TubeProfile, lambda1D: float, tol_h: float = 0.0,
                         mesh: TriMesh | None = None) -> CheckReport:
    """m_g(M minus B_r(boundary)) <= exp(1 - sqrt(lambda_1^D) r)."""
    return _exp_decay_report("boundary", profile, lambda1D, tol_h, mesh)


def default_iteration_pairs(r_max: float, n_r: int = 20, n_eps: int = 10) -> list[tuple[float, float]]:
    rs = np.linspace(0.0, 0.6 * r_max, n_r + 1)[1:]
    es = np.linspace(0.0, 0.4 * r_max, n_eps + 1)[1:]
    return [(float(r), float(e)) for r in rs for e in es]


def check_iteration_inequality(profile: TubeProfile, lambda1D: float, pairs, tol_h: float = 0.0,
                               mesh: TriMesh | None = None) -> CheckReport:
    """(1 + eps^2 lambda_1^D) mu(r + eps) <= mu(r) for each (r, eps)."""
    if lambda1D <= 0:
        raise InvalidArgumentError("iteration inequality needs a positive Dirichlet eigenvalue")
    recs = []
    for r, eps in pairs:
        if r <= 0 or eps <= 0:
            raise InvalidArgumentError("iteration pairs need r, eps > 0")
        if r + eps > profile.r[-1] * (1 + 1e-12):
            raise GridRangeError(f"r + eps = {r + eps:.6g} beyond the profile grid")
        lhs = (1.0 + eps * eps * lambda1D) * float(profile.at(r + eps))
        recs.append(CheckRecord((float(r), float(eps)), lhs, float(profile.at(r)), tol_h))
    return CheckReport("iteration", lambda1D, recs, tol_h, mesh=mesh_info(mesh))


# -- boundary separation -----------------------------------------------------------


def profile_quantile(profile: TubeProfile, eta: float) -> float:
    """sup{r : mu(r) >= eta}.

    Exact for discrete profiles (from the stored distances) and for closed-form
    profiles (bisection); otherwise the largest grid point with mu >= eta.
    """
    if profile.dist is not None:
        order = np.argsort(-profile.dist, kind="stable")
        cum = np.cumsum(profile.weights[order])
        d = profile.dist[order]
        pos = d > 0
        if not pos.any() or cum[pos][-1] < eta * (1 - 1e-12):
            return 0.0
        idx = int(np.searchsorted(cum, eta * (1 - 1e-12)))
        return float(max(d[idx], 0.0))
    if profile.evaluator is not None:
        f = lambda r: float(profile.evaluator(np.array(r))) - eta
        lo, hi = 0.0, float(profile.r[-1])
        if f(lo) < 0:
            return 0.0
        if f(hi) >= 0:
            return hi
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if f(mid) >= 0:
                lo = mid
            else:
                hi = mid
        return lo
    ok = profile.r[profile.mu >= eta]
    return float(ok.max()) if ok.size else 0.0


def bsep_k1(profile: TubeProfile, eta: float, lambda1D: float, tol_h: float = 0.0) -> tuple[float, CheckRecord]:
    """Boundary separation distance for one set, with its log(e/eta)/sqrt(lambda_1^D) bound."""
    if not 0.0 < eta < 1.0:
        raise InvalidArgumentError(f"eta must lie in (0, 1), got {eta}")
    if lambda1D <= 0:
        raise InvalidArgumentError("bsep bound needs a positive Dirichlet eigenvalue")
    value = profile_quantile(profile, eta)
    bound = math.log(math.e / eta) / math.sqrt(lambda1D)
    return value, CheckRecord(float(eta), value, bound, tol_h, label="bsep-k1")


def check_bsep(profile: TubeProfile, etas, lambda1D: float, tol_h: float = 0.0,
               mesh: TriMesh | None = None) -> CheckReport:
    recs = [bsep_k1(profile, eta, lambda1D, tol_h)[1] for eta in etas]
    return CheckReport("bsep", lambda1D, recs, tol_h, mesh=mesh_info(mesh))


@dataclass
class BSepCandidate:
    value: float
    sets: list[np.ndarray]
    record: CheckRecord
    lambda_k: float


def _set_distance(engine: FastMarching, members: np.ndarray) -> np.ndarray:
    return engine.from_vertices(np.flatnonzero(members))


def _greedy_pack(engine, weights, d_bdry, etas, D):
    n = len(weights)
    allowed = d_bdry >= D
    d_prev = np.full(n, np.inf)
    blocked = np.zeros(n, dtype=bool)
    sets = []
    for eta in etas:
        avail = allowed & ~blocked
        if weights[avail].sum() < eta:
            return None
        score = np.where(avail, np.minimum(d_bdry, d_prev), -np.inf)
        seed = int(np.argmax(score))
        d_seed = engine.from_vertices([seed])
        cand = np.flatnonzero(avail)
        cand = cand[np.lexsort((cand, d_seed[cand]))]
        cum = np.cumsum(weights[cand])
        take = cand[: int(np.searchsorted(cum, eta * (1 - 1e-12))) + 1]
        members = np.zeros(n, dtype=bool)
        members[take] = True
        d_set = _set_distance(engine, members)
        blocked |= d_set < D
        d_prev = np.minimum(d_prev, d_set)
        sets.append((members, d_set))
    return sets


def _separation(sets, d_bdry):
    value = min(float(d_bdry[m].min()) for m, _ in sets)
    for a in range(len(sets)):
        for b in range(len(sets)):
            if a != b:
                value = min(value, float(sets[a][1][sets[b][0]].min()))
    return value


def bsep_k_candidate(mesh: TriMesh, measure: VolumeMeasure, etas, k: int | None = None,
                     lambda_k: float | None = None, engine: FastMarching | None = None,
                     tol_h: float = 0.0, iterations: int = 30) -> BSepCandidate:
    """Greedy lower bound on BSep(M; eta_1..eta_k) with the 2/sqrt(lambda_k^D min eta) check.

    For a trial separation D each set is grown around the vertex farthest from the
    boundary and from earlier sets, restricted to points at distance >= D from both;
    D is bisected and the best realized separation is returned.
    """
    from .spectral import dirichlet_lambdak

    etas = [float(e) for e in etas]
    k = len(etas) if k is None else int(k)
    if k < 1 or len(etas) != k:
        raise InvalidArgumentError("need k >= 1 masses eta_1..eta_k")
    if any(e <= 0 for e in etas):
        raise InvalidArgumentError("masses eta must be positive")
    engine = engine if engine is not None else FastMarching(mesh)
    lam_k = dirichlet_lambdak(mesh, k) if lambda_k is None else float(lambda_k)
    bound = 2.0 / math.sqrt(lam_k * min(etas))
    d_bdry = engine.from_vertices(mesh.boundary_vertices)
    w = measure.weights
    best, best_sets = 0.0, []
    if sum(etas) < 1.0:
        lo, hi = 0.0, float(d_bdry.max())
        for _ in range(iterations):
            D = 0.5 * (lo + hi)
            sets = _greedy_pack(engine, w, d_bdry, etas, D)
            if sets is None:
                hi = D
                continue
            lo = D
            sep = _separation(sets, d_bdry)
            if sep > best:
                best, best_sets = sep, [np.flatnonzero(m) for m, _ in sets]
    rec = CheckRecord(float(min(etas)), best, bound, tol_h, label=f"bsep-k{k}")
    return BSepCandidate(best, best_sets, rec, lam_k)


# -- the nodal-ball construction ------------------------------------------------------


@dataclass
class OmegaConstruction:
    R: float
    energy_radius: float
    clamped: bool
    centers: np.ndarray  # nodal-point ids
    center_positions: np.ndarray
    energies: np.ndarray
    tau: float
    J: np.ndarray  # bool per center
    omega: np.ndarray  # bool per vertex
    omega_prime: np.ndarray
    measure_omega: float
    measure_omega_prime: float
    jprime_ball_measure: float
    multiplicity: int
    inclusion_constant: float
    h_max: float
    covers_tube: bool
    min_center_separation: float
    norm2: float
    xi: float
    lam: float

    def summary(self) -> dict:
        return {
            "R": self.R, "energy_radius": self.energy_radius, "clamped": self.clamped,
            "n_centers": int(len(self.centers)), "n_J": int(self.J.sum()),
            "tau": self.tau, "measure_omega": self.measure_omega,
            "measure_omega_prime": self.measure_omega_prime,
            "jprime_ball_measure": self.jprime_ball_measure,
            "multiplicity": self.multiplicity, "inclusion_constant": self.inclusion_constant,
            "covers_tube": self.covers_tube, "min_center_separation": self.min_center_separation,
            "norm2": self.norm2,
        }


def lambda_guard(c_ball: float = DEFAULT_C_BALL, dim: int = 2) -> float:
    return max((10.0 * c_ball) ** 2, dim - 1.0)


def _check_guard(lam, c_ball, ricci_lower, dim):
    # The guard is stated in the scale where Ric >= -(n-1).  With Ric >= 0 any
    # shrinking of the metric keeps that hypothesis and raises lambda, so only a
    # negative lower bound pins the scale.
    if ricci_lower >= 0:
        return
    lam_scaled = lam * (dim - 1.0) / abs(ricci_lower)
    guard = lambda_guard(c_ball, dim)
    if lam_scaled < guard:
        raise GuardError(f"lambda = {lam:.6g} (rescaled {lam_scaled:.6g}) is below the guard {guard:.6g}")


def _diameter(engine: FastMarching) -> float:
    d0 = engine.from_vertices([0])
    d1 = engine.from_vertices([int(np.argmax(d0))])
    return float(d1.max())


def construct_cm_omega(mesh: TriMesh, measure: VolumeMeasure, field, nodal: NodalSet | None,
                       lam: float, xi: float, c_ball: float = DEFAULT_C_BALL,
                       c_thresh: float = DEFAULT_C_THRESH, ops=None, ricci_lower: float = 0.0,
                       dim: int = 2, engine: FastMarching | None = None) -> OmegaConstruction:
    """Maximal disjoint R-balls on the nodal set, energy filter, and the set Omega.

    R = c_ball / sqrt(lambda).  Energy averages use balls of radius
    min(20R, diam/4), never below 3R.
    """
    from .spectral import assemble, dirichlet_energy_density

    if not 0.0 < xi < 1.0:
        raise InvalidArgumentError(f"xi must lie in (0, 1), got {xi}")
    if lam <= 0:
        raise InvalidArgumentError("construction needs a positive eigenvalue")
    _check_guard(lam, c_ball, ricci_lower, dim)
    field = np.asarray(field, dtype=float)
    nodal = nodal if nodal is not None else extract_nodal_set(mesh, field)
    if nodal.is_empty:
        raise EmptyDomainError("field has a strict sign: empty nodal set")
    engine = engine if engine is not None else FastMarching(mesh)
    ops = ops if ops is not None else assemble(mesh)
    w = measure.weights

    R = c_ball / math.sqrt(lam)
    rho = 20.0 * R
    diam = _diameter(engine)
    clamped = rho > diam / 4.0
    if clamped:
        rho = max(diam / 4.0, 3.0 * R)
        log.warning("energy balls clamped from radius %.4g to %.4g (diameter %.4g)", 20 * R, rho, diam)
    limit = max(3.0 * R, rho) + float(mesh.edge_lengths.max())

    pos = mesh.canonical(nodal.positions)
    ids = np.arange(nodal.n_points)
    order = np.lexsort((ids,) + tuple(pos[:, k] for k in reversed(range(pos.shape[1]))))
    to_center = np.full(nodal.n_points, np.inf)
    centers, dists = [], []
    for q in order:
        if to_center[q] > 2.0 * R:
            dq = engine.from_nodal_point(nodal, int(q), limit)
            centers.append(int(q))
            dists.append(dq)
            to_center = np.minimum(to_center, engine.at_nodal_points(dq, nodal))
    centers = np.array(centers, dtype=np.int64)
    dist = np.array(dists)

    # pairwise separation of centers, measured from each center's distance field
    sep = np.inf
    for i, di in enumerate(dists):
        at = engine.at_nodal_points(di, nodal)[centers]
        at[i] = np.inf
        sep = min(sep, float(at.min()))

    energy = dirichlet_energy_density(ops, field)
    in_ball = dist <= rho
    ball_mass = in_ball @ w
    energies = (in_ball @ (w * energy)) / ball_mass
    norm2 = float(w @ field**2)
    tau = c_thresh * (lam / xi) * norm2
    J = energies <= tau
    near = dist <= 3.0 * R
    omega = near[J].any(axis=0) if J.any() else np.zeros(mesh.n_vertices, dtype=bool)
    omega_p = near[~J].any(axis=0) if (~J).any() else np.zeros(mesh.n_vertices, dtype=bool)
    multiplicity = int(in_ball.sum(axis=0).max())

    d_nodal = engine.from_nodal(nodal)
    d_nodal[nodal.zero_vertices] = 0.0
    covers = bool(np.all((omega | omega_p)[d_nodal <= R]))
    scale = math.sqrt(lam / xi) * math.sqrt(norm2)
    sel = omega & (d_nodal > 0)
    inclusion = float(np.max(np.abs(field[sel]) / (scale * d_nodal[sel]))) if sel.any() else 0.0

    return OmegaConstruction(
        R=R, energy_radius=rho, clamped=clamped, centers=centers,
        center_positions=pos[centers], energies=energies, tau=tau, J=J,
        omega=omega, omega_prime=omega_p, measure_omega=float(w[omega].sum()),
        measure_omega_prime=float(w[omega_p].sum()),
        jprime_ball_measure=float(ball_mass[~J].sum()), multiplicity=multiplicity,
        inclusion_constant=inclusion, h_max=float(mesh.edge_lengths.max()), covers_tube=covers, min_center_separation=sep,
        norm2=norm2, xi=xi, lam=lam)


def omega_report(con: OmegaConstruction, mesh: TriMesh | None = None) -> CheckReport:
    recs = [CheckRecord(con.xi, 1.0 - con.xi, con.measure_omega, label="measure-omega")]
    # centers on parallel lines exactly 2R apart are separated only up to O(h)
    checks = {"covers_tube": con.covers_tube,
              "disjoint_balls": con.min_center_separation > 2.0 * con.R - con.h_max}
    return CheckReport("cm-omega", con.lam, recs, 0.0, fitted_constant=con.inclusion_constant,
                       mesh=mesh_info(mesh), extra=con.summary(), extra_checks=checks)


# -- restricted tail and moments --------------------------------------------------------


def l2_norm(field, measure: VolumeMeasure) -> float:
    field = np.asarray(field, dtype=float)
    return math.sqrt(float(measure.weights @ field**2))


def tail_constant(field, omega, measure: VolumeMeasure, xi: float) -> float:
    """Largest C with m_g(Omega and {|phi| > r}) <= exp(1 - C sqrt(xi) r / ||phi||_2) for all r > 0."""
    field = np.abs(np.asarray(field, dtype=float))
    norm = l2_norm(field, measure)
    mask = np.asarray(omega, dtype=bool) & (field > 0)
    a, w = field[mask], measure.weights[mask]
    if a.size == 0:
        return math.inf
    order = np.argsort(-a, kind="stable")
    a, cum = a[order], np.cumsum(w[order])
    # for each distinct level t, the mass of {|phi| >= t} is the cumsum at its last tie
    last = np.r_[a[1:] != a[:-1], True]
    t, mass = a[last], cum[last]
    with np.errstate(over="ignore", divide="ignore"):
        return float(np.min((1.0 - np.log(mass)) * norm / (math.sqrt(xi) * t)))


def check_restricted_tail(field, omega, measure: VolumeMeasure, xi: float, C: float | None = None,
                          r_grid=None, tol: float = 0.0, mesh: TriMesh | None = None) -> CheckReport:
    field = np.asarray(field, dtype=float)
    omega = np.asarray(omega, dtype=bool)
    if not 0.0 < xi <= 1.0:
        raise InvalidArgumentError("xi must lie in (0, 1]")
    norm = l2_norm(field, measure)
    if norm == 0:
        raise InvalidArgumentError("field has zero L2 norm")
    fitted = tail_constant(field, omega, measure, xi)
    C = fitted if C is None else float(C)
    if r_grid is None:
        r_grid = np.linspace(0.0, 1.05 * np.abs(field).max(), 60)
    absf = np.abs(field)
    recs = []
    for r in np.asarray(r_grid, dtype=float):
        lhs = float(measure.weights[omega & (absf > r)].sum())
        rhs = math.exp(1.0 - C * math.sqrt(xi) * r / norm)
        recs.append(CheckRecord(float(r), lhs, rhs, tol))
    return CheckReport("tail", None, recs, tol, fitted_constant=fitted, mesh=mesh_info(mesh),
                       params={"xi": xi, "C": C, "norm2": norm, "measure_omega": float(measure.weights[omega].sum())})


def chebyshev_tail(field, measure: VolumeMeasure, r: float) -> tuple[float, float]:
    """(m_g{|phi| > r}, ||phi||_2^2 / r^2)."""
    if r <= 0:
        raise InvalidArgumentError("Chebyshev bound needs r > 0")
    field = np.asarray(field, dtype=float)
    lhs = float(measure.weights[np.abs(field) > r].sum())
    return lhs, float(measure.weights @ field**2) / (r * r)


def check_chebyshev(field, measure: VolumeMeasure, r_grid, mesh: TriMesh | None = None) -> CheckReport:
    recs = []
    for r in r_grid:
        lhs, rhs = chebyshev_tail(field, measure, float(r))
        recs.append(CheckRecord(float(r), lhs, rhs))
    return CheckReport("chebyshev", None, recs, 0.0, mesh=mesh_info(mesh))


_LANCZOS_G = 7.0
_LANCZOS = (
    0.99999999999980993, 676.5203681218851, -1259.1392167224028, 771.32342877765313,
    -176.61502916214059, 12.507343278686905, -0.13857109526572012,
    9.9843695780195716e-6, 1.5056327351493116e-7,
)


def log_gamma(x: float) -> float:
    """log Gamma(x) for x > 0 by the Lanczos approximation (g = 7, nine terms)."""
    if x <= 0:
        raise InvalidArgumentError("log_gamma needs x > 0")
    if x < 0.5:
        # reflection
        return math.log(math.pi / math.sin(math.pi * x)) - log_gamma(1.0 - x)
    x -= 1.0
    s = _LANCZOS[0]
    for i in range(1, 9):
        s += _LANCZOS[i] / (x + i)
    t = x + _LANCZOS_G + 0.5
    return 0.5 * math.log(2 * math.pi) + (x + 0.5) * math.log(t) - t + math.log(s)


def gamma(x: float) -> float:
    return math.exp(log_gamma(x))


def lp_bound(p: float, norm: float, C: float, xi: float) -> float:
    """e Gamma(p+1)^(1/p) ||phi||_2 / (C sqrt(xi))."""
    return math.e * math.exp(log_gamma(p + 1.0) / p) * norm / (C * math.sqrt(xi))


def cavalieri_bound(p: float, norm: float, C: float, xi: float, mass: float = 1.0) -> float:
    """(p * int_0^inf min(mass, e^(1 - a r)) r^(p-1) dr)^(1/p), a = C sqrt(xi)/||phi||_2.

    Integrates the exponential tail bound numerically, capped by the total mass of Omega.
    Works in s = a r with the integrand scaled by e Gamma(p+1), so large p cannot overflow.
    """
    a = C * math.sqrt(xi) / norm
    log_mass = math.log(min(max(mass, 1e-300), 1.0))
    log_scale = 1.0 + log_gamma(p + 1.0)

    def f(s):
        if s <= 0.0:
            return 0.0
        return p * math.exp(min(log_mass, 1.0 - s) + (p - 1.0) * math.log(s) - log_scale)

    s0 = 1.0 - log_mass
    peak = max(s0, p - 1.0)
    total = quad(f, 0.0, s0, limit=200)[0]
    if peak > s0:
        total += quad(f, s0, peak, limit=200)[0]
    total += quad(f, peak, np.inf, limit=200)[0]
    return math.exp((log_scale + math.log(total)) / p) / a


def check_restricted_lp(field, omega, measure: VolumeMeasure, p_list, xi: float, C: float,
                        tol: float = 0.0, mesh: TriMesh | None = None) -> CheckReport:
    field = np.asarray(field, dtype=float)
    omega = np.asarray(omega, dtype=bool)
    norm = l2_norm(field, measure)
    mass = float(measure.weights[omega].sum())
    recs, cav_ok = [], True
    for p in p_list:
        p = float(p)
        if p < 1:
            raise InvalidArgumentError(f"moment order p must be >= 1, got {p}")
        lhs = float(measure.weights[omega] @ np.abs(field[omega]) ** p) ** (1.0 / p)
        rhs = lp_bound(p, norm, C, xi)
        cav = cavalieri_bound(p, norm, C, xi, mass)
        cav_ok &= cav <= rhs * (1 + 1e-12)
        recs.append(CheckRecord(p, lhs, rhs, tol, extra={"rhs_cavalieri": cav}))
    return CheckReport("lp", None, recs, tol, fitted_constant=C, mesh=mesh_info(mesh),
                       params={"xi": xi, "C": C, "norm2": norm, "measure_omega": mass},
                       extra_checks={"cavalieri_le_closed_form": bool(cav_ok)})


# -- constant fits -----------------------------------------------------------------------


def covering_constant(source, lam: float) -> float:
    """c with R = c / sqrt(lambda) the covering radius of the nodal set."""
    if hasattr(source, "r_cover"):
        r = source.r_cover
    elif isinstance(source, DistanceField):
        r = float(np.max(source.values))
    else:
        r = float(np.max(np.asarray(source, dtype=float)))
    return r * math.sqrt(lam)


def fit_empirical_constant(items, target: str) -> float:
    """Extremal constant that makes every supplied inequality hold, binding at one record.

    target "tail-C": items are tail reports; returns the smallest admissible C.
    target "inclusion-C": items are OmegaConstructions or cm-omega reports; returns the largest C-hat.
    target "lemma31-c": items are (curve | DistanceField | distances, lambda) pairs; returns the largest c.
    """
    items = list(items)
    if not items:
        raise InvalidArgumentError("no inputs to fit")
    if target == "tail-C":
        values = []
        for rep in items:
            norm, xi = rep.params["norm2"], rep.params["xi"]
            for rec in rep.records:
                if rec.lhs > 0 and rec.x > 0:
                    values.append((1.0 - math.log(rec.lhs)) * norm / (math.sqrt(xi) * rec.x))
            if rep.fitted_constant is not None:
                values.append(rep.fitted_constant)
        if not values:
            raise InvalidArgumentError("no binding tail record to fit")
        return float(min(values))
    if target == "inclusion-C":
        vals = [it.inclusion_constant if isinstance(it, OmegaConstruction) else it.fitted_constant
                for it in items]
        return float(max(vals))
    if target == "lemma31-c":
        return float(max(covering_constant(src, lam) for src, lam in items))
    raise InvalidArgumentError(f"unknown fit target {target!r}")
