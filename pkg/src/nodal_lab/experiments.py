"""Experiment configs, model construction, single checks and named suites.

Everything here is deterministic: the same config produces the same report dict.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from . import analytic, concentration as conc, mesh as meshmod, nodal, spectral
from .errors import InvalidArgumentError, UnsupportedOracleError

CHECKS = ("nodal-tube", "boundary", "iteration", "bsep", "cm-omega", "tail", "lp", "chebyshev")
SHAPES = ("disk", "square", "strip")
TIERS = ("discrete", "oracle")

DEFAULT_DEPTH = {"sphere": 5, "disk": 5}
DEFAULT_N = {"torus": 128, "square": 64, "strip": 32}
DEFAULT_ETAS = (0.05, 0.1, 0.25, 0.5, 0.9)
DEFAULT_P = (1.0, 2.0, 4.0, 8.0, 16.0)


@dataclass
class ExperimentConfig:
    check: str = "nodal-tube"
    mode: str | None = None
    shape: str | None = None
    mesh: str | None = None
    eig: str | None = None
    index: int = 1
    depth: int | None = None
    n: int | None = None
    size: float = 1.0
    tier: str = "discrete"
    method: str = "fmm"
    xi: float = 0.1
    eta: list = field(default_factory=lambda: list(DEFAULT_ETAS))
    k: int = 1
    p: list = field(default_factory=lambda: list(DEFAULT_P))
    r_grid: list | None = None
    n_r: int = nodal.R_GRID_POINTS
    c_ball: float = conc.DEFAULT_C_BALL
    c_thresh: float = conc.DEFAULT_C_THRESH
    kappa: float = conc.DEFAULT_KAPPA
    C: float | None = None
    ricci_lower: float | None = None

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise InvalidArgumentError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**data)
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        return asdict(self)

    def validate(self) -> None:
        if self.check not in CHECKS:
            raise InvalidArgumentError(f"unknown check {self.check!r}; choose from {', '.join(CHECKS)}")
        if self.tier not in TIERS:
            raise InvalidArgumentError(f"tier must be one of {TIERS}")
        if self.shape is not None and self.shape not in SHAPES:
            raise InvalidArgumentError(f"shape must be one of {SHAPES}")
        if not 0.0 < float(self.xi) < 1.0:
            raise InvalidArgumentError("xi must lie in (0, 1)")
        self.eta = [float(e) for e in np.atleast_1d(self.eta)]
        if any(not 0.0 < e < 1.0 for e in self.eta):
            raise InvalidArgumentError("every eta must lie in (0, 1)")
        self.p = [float(p) for p in np.atleast_1d(self.p)]
        if self.r_grid is not None:
            r = [float(x) for x in self.r_grid]
            if any(b < a for a, b in zip(r, r[1:])):
                raise InvalidArgumentError("r_grid must be sorted ascending")
            self.r_grid = r
        if self.k < 1:
            raise InvalidArgumentError("k must be >= 1")


# -- models ---------------------------------------------------------------------------


@dataclass
class Model:
    mesh: meshmod.TriMesh | None
    field: np.ndarray | None
    lam: float
    mode: analytic.AnalyticMode | None = None
    ricci_lower: float = 0.0


def build_mesh_for_mode(mode: analytic.AnalyticMode, cfg: ExperimentConfig) -> meshmod.TriMesh:
    if mode.surface == analytic.SPHERE:
        return meshmod.generate_icosphere(cfg.depth if cfg.depth is not None else DEFAULT_DEPTH["sphere"])
    n = cfg.n if cfg.n is not None else DEFAULT_N["torus"]
    return meshmod.generate_flat_torus(n, n, *mode.period)


def build_shape(shape: str, cfg: ExperimentConfig) -> meshmod.TriMesh:
    if shape == "disk":
        return meshmod.generate_disk(cfg.depth if cfg.depth is not None else DEFAULT_DEPTH["disk"], cfg.size)
    n = cfg.n if cfg.n is not None else DEFAULT_N[shape]
    if shape == "square":
        return meshmod.generate_square(n, cfg.size)
    return meshmod.generate_strip(cfg.size, n, n)


def field_model(cfg: ExperimentConfig, need_mesh: bool = True) -> Model:
    """Eigenfunction model from an analytic mode or from a mesh + eigenpair file."""
    if cfg.mode:
        mode = analytic.parse_mode(cfg.mode)
        ricci = 1.0 if mode.surface == analytic.SPHERE else 0.0
        if cfg.ricci_lower is not None:
            ricci = cfg.ricci_lower
        if not need_mesh:
            return Model(None, None, mode.lam, mode, ricci)
        mesh = build_mesh_for_mode(mode, cfg)
        return Model(mesh, analytic.sample(mode, mesh), mode.lam, mode, ricci)
    if cfg.mesh and cfg.eig:
        mesh = meshmod.read_off(cfg.mesh)
        pairs = spectral.read_eigenpairs(cfg.eig)
        if not 0 <= cfg.index < len(pairs):
            raise InvalidArgumentError(f"eigenpair index {cfg.index} outside 0..{len(pairs) - 1}")
        pair = pairs[cfg.index]
        if len(pair.field) != mesh.n_vertices:
            raise InvalidArgumentError("eigenpair field does not match the mesh")
        return Model(mesh, pair.field, pair.lam, None, cfg.ricci_lower or 0.0)
    raise InvalidArgumentError("need --mode, or --mesh together with --eig")


def _r_grid(cfg: ExperimentConfig, lam: float) -> np.ndarray:
    if cfg.r_grid is not None:
        return np.asarray(cfg.r_grid)
    return nodal.default_r_grid(lam, cfg.n_r)


# -- single checks --------------------------------------------------------------------


def _nodal_tube(cfg):
    model = field_model(cfg, need_mesh=cfg.tier == "discrete")
    curve = None
    if model.mode is not None:
        try:
            curve = analytic.tube_complement_oracle(model.mode)
        except UnsupportedOracleError:
            curve = None
    grid = _r_grid(cfg, model.lam)
    if cfg.tier == "oracle":
        if curve is None:
            raise UnsupportedOracleError("oracle tier needs a torus mode or a zonal sphere mode")
        rep = conc.check_nodal_concentration(nodal.oracle_profile(curve, grid), model.lam)
        rep.extra["oracle"] = curve.description
        return rep
    ns = nodal.extract_nodal_set(model.mesh, model.field)
    dist = nodal.distance_to_set(model.mesh, ns, method=cfg.method)
    prof = nodal.tube_profile(dist, meshmod.normalized_measure(model.mesh), grid)
    tol = conc.discretization_allowance(model.mesh, model.lam, cfg.kappa)
    rep = conc.check_nodal_concentration(prof, model.lam, tol, model.mesh)
    if curve is not None:
        rep.extra["sup_gap"] = nodal.sup_gap(prof, curve)
    return rep


def _boundary_setup(cfg):
    if cfg.shape is None:
        raise InvalidArgumentError(f"check {cfg.check} needs --shape")
    curve, lam_exact = analytic.boundary_oracle(cfg.shape, cfg.size)
    if cfg.tier == "oracle":
        return None, curve, lam_exact, None, 0.0
    mesh = build_shape(cfg.shape, cfg)
    lam1 = spectral.dirichlet_lambda1(mesh)
    return mesh, curve, lam1, lam_exact, conc.discretization_allowance(mesh, lam1, cfg.kappa)


def _boundary_profile(cfg, mesh, curve, lam1):
    grid = _r_grid(cfg, lam1)
    if mesh is None:
        return nodal.oracle_profile(curve, grid)
    return nodal.boundary_distance_profile(mesh, meshmod.normalized_measure(mesh), grid, cfg.method)


def _annotate_boundary(rep, prof, curve, lam1, lam_exact):
    rep.extra["oracle"] = curve.description
    if lam_exact is not None:
        rep.extra["lambda1_exact"] = lam_exact
        rep.extra["lambda1_rel_err"] = abs(lam1 / lam_exact - 1.0)
        rep.extra["sup_gap"] = nodal.sup_gap(prof, curve)
    return rep


def _boundary(cfg):
    mesh, curve, lam1, lam_exact, tol = _boundary_setup(cfg)
    prof = _boundary_profile(cfg, mesh, curve, lam1)
    rep = conc.check_boundary_decay(prof, lam1, tol, mesh)
    return _annotate_boundary(rep, prof, curve, lam1, lam_exact)


def _iteration(cfg):
    mesh, curve, lam1, lam_exact, tol = _boundary_setup(cfg)
    prof = _boundary_profile(cfg, mesh, curve, lam1)
    pairs = conc.default_iteration_pairs(float(prof.r[-1]))
    rep = conc.check_iteration_inequality(prof, lam1, pairs, tol, mesh)
    return _annotate_boundary(rep, prof, curve, lam1, lam_exact)


def _bsep(cfg):
    if cfg.k > 1:
        if cfg.shape is None:
            raise InvalidArgumentError("bsep needs --shape")
        if cfg.tier == "oracle":
            raise UnsupportedOracleError("k-set separation has no closed-form oracle")
        mesh = build_shape(cfg.shape, cfg)
        etas = cfg.eta if len(cfg.eta) == cfg.k else [min(cfg.eta)] * cfg.k
        cand = conc.bsep_k_candidate(mesh, meshmod.normalized_measure(mesh), etas, cfg.k)
        rep = conc.CheckReport("bsep", cand.lambda_k, [cand.record], 0.0, mesh=conc.mesh_info(mesh))
        rep.extra["k"] = cfg.k
        rep.extra["etas"] = etas
        return rep
    mesh, curve, lam1, lam_exact, tol = _boundary_setup(cfg)
    prof = _boundary_profile(cfg, mesh, curve, lam1)
    rep = conc.check_bsep(prof, cfg.eta, lam1, tol, mesh)
    return _annotate_boundary(rep, prof, curve, lam1, lam_exact)


def _omega(cfg, model, measure):
    ns = nodal.extract_nodal_set(model.mesh, model.field)
    return conc.construct_cm_omega(model.mesh, measure, model.field, ns, model.lam, cfg.xi,
                                   cfg.c_ball, cfg.c_thresh, ricci_lower=model.ricci_lower)


def _cm_omega(cfg):
    model = field_model(cfg)
    measure = meshmod.normalized_measure(model.mesh)
    return conc.omega_report(_omega(cfg, model, measure), model.mesh)


def _tail(cfg):
    model = field_model(cfg)
    measure = meshmod.normalized_measure(model.mesh)
    con = _omega(cfg, model, measure)
    rep = conc.check_restricted_tail(model.field, con.omega, measure, cfg.xi, cfg.C,
                                     cfg.r_grid, mesh=model.mesh)
    rep.lam = model.lam
    rep.extra["measure_omega"] = con.measure_omega
    return rep


def _lp(cfg):
    model = field_model(cfg)
    measure = meshmod.normalized_measure(model.mesh)
    con = _omega(cfg, model, measure)
    C = cfg.C if cfg.C is not None else conc.tail_constant(model.field, con.omega, measure, cfg.xi)
    rep = conc.check_restricted_lp(model.field, con.omega, measure, cfg.p, cfg.xi, C, mesh=model.mesh)
    rep.lam = model.lam
    return rep


def _chebyshev(cfg):
    model = field_model(cfg)
    measure = meshmod.normalized_measure(model.mesh)
    if cfg.r_grid is not None:
        grid = [r for r in cfg.r_grid if r > 0]
    else:
        grid = np.linspace(0.0, 1.05 * np.abs(model.field).max(), cfg.n_r + 1)[1:]
    rep = conc.check_chebyshev(model.field, measure, grid, model.mesh)
    rep.lam = model.lam
    return rep


_RUNNERS = {
    "nodal-tube": _nodal_tube, "boundary": _boundary, "iteration": _iteration, "bsep": _bsep,
    "cm-omega": _cm_omega, "tail": _tail, "lp": _lp, "chebyshev": _chebyshev,
}


def run_check(cfg: ExperimentConfig) -> conc.CheckReport:
    cfg.validate()
    rep = _RUNNERS[cfg.check](cfg)
    rep.params["config"] = cfg.to_dict()
    return rep


# -- suites -----------------------------------------------------------------------------

TORUS_K = (1, 2, 3, 5)
SPHERE_L = (1, 3, 5, 8)


def _torus(k):
    return f"torus:kx={k},ky=0,phase=0"


def _sphere(l):
    return f"sphere:l={l},m=0"


def paper_core_entries() -> list[tuple[str, ExperimentConfig]]:
    out = []
    modes = [_torus(k) for k in TORUS_K] + [_sphere(l) for l in SPHERE_L]
    for tier in ("oracle", "discrete"):
        for m in modes:
            out.append((f"nodal-tube {tier} {m}", ExperimentConfig("nodal-tube", mode=m, tier=tier)))
    for check in ("boundary", "iteration"):
        for shape in ("disk", "square"):
            for tier in ("oracle", "discrete"):
                out.append((f"{check} {tier} {shape}", ExperimentConfig(check, shape=shape, tier=tier)))
    for shape in SHAPES:
        for tier in ("oracle", "discrete"):
            out.append((f"bsep {tier} {shape}", ExperimentConfig("bsep", shape=shape, tier=tier)))
    return out


def cm_entries() -> list[tuple[str, ExperimentConfig]]:
    out = []
    for k in (2, 3, 5):
        for xi in (0.1, 0.3):
            m = _torus(k)
            for check in ("cm-omega", "tail", "lp"):
                out.append((f"{check} {m} xi={xi}", ExperimentConfig(check, mode=m, xi=xi, n=64)))
    for l in (3, 5):
        out.append((f"chebyshev {_sphere(l)}", ExperimentConfig("chebyshev", mode=_sphere(l), depth=4)))
    return out


LADDER_TORUS_N = (32, 64, 128)
LADDER_SPHERE_DEPTH = (3, 4, 5)
LADDER_DISK_DEPTH = (3, 4, 5)
LADDER_SQUARE_N = (16, 32, 64)


def convergence_ladders() -> list[tuple[str, list[ExperimentConfig]]]:
    out = []
    for k in TORUS_K:
        out.append((_torus(k), [ExperimentConfig("nodal-tube", mode=_torus(k), n=n) for n in LADDER_TORUS_N]))
    for l in SPHERE_L:
        out.append((_sphere(l), [ExperimentConfig("nodal-tube", mode=_sphere(l), depth=d)
                                 for d in LADDER_SPHERE_DEPTH]))
    out.append(("boundary disk", [ExperimentConfig("boundary", shape="disk", depth=d) for d in LADDER_DISK_DEPTH]))
    out.append(("boundary square", [ExperimentConfig("boundary", shape="square", n=n) for n in LADDER_SQUARE_N]))
    return out


def resolve_jobs(jobs: int | None) -> int:
    if jobs is None:
        jobs = int(os.environ.get("NODAL_LAB_JOBS", "1") or 1)
    return max(1, int(jobs))


def _run_all(cfgs, jobs):
    if jobs <= 1:
        return [run_check(c) for c in cfgs]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(run_check, cfgs))  # map keeps submission order


def nodal_domain_ladder(ns=LADDER_TORUS_N, k: int = 2) -> list[dict]:
    """First Dirichlet eigenvalue of one strip nodal domain of cos(2 pi k x)."""
    mode = analytic.torus_mode(k)
    rows = []
    for n in ns:
        mesh = meshmod.generate_flat_torus(n, n)
        f = analytic.sample(mode, mesh)
        lab = nodal.nodal_domains(mesh, f)
        dom = nodal.nodal_domain_mesh(mesh, f, 0, lab)
        lam1 = spectral.dirichlet_lambda1(dom)
        rows.append({"level": n, "h": mesh.mean_edge_length, "lambda1": lam1,
                     "rel_err": abs(lam1 / mode.lam - 1.0), "domains": lab.count})
    return rows


def run_suite(name: str, jobs: int | None = None) -> dict:
    jobs = resolve_jobs(jobs)
    if name in ("paper-core", "cm"):
        entries = paper_core_entries() if name == "paper-core" else cm_entries()
        reports = _run_all([c for _, c in entries], jobs)
        items = [{"name": n, "report": r.to_dict()} for (n, _), r in zip(entries, reports)]
        return {"suite": name, "pass_all": all(r.pass_all for r in reports), "entries": items}
    if name == "convergence":
        ladders = convergence_ladders()
        flat = [c for _, cs in ladders for c in cs]
        reports = iter(_run_all(flat, jobs))
        rows, ok = [], True
        for label, cs in ladders:
            gaps = []
            for c in cs:
                r = next(reports)
                level = c.depth if c.depth is not None else c.n
                gap = r.extra["sup_gap"]
                gaps.append(gap)
                rows.append({"ladder": label, "level": level, "h": r.mesh["h"], "tol_h": r.tol_h,
                             "sup_gap": gap, "pass_all": r.pass_all})
                ok &= r.pass_all
            ok &= all(b < a for a, b in zip(gaps, gaps[1:]))
        dom = nodal_domain_ladder()
        errs = [d["rel_err"] for d in dom]
        ok &= all(b < a for a, b in zip(errs, errs[1:])) and errs[-1] < 0.03
        return {"suite": name, "pass_all": bool(ok), "ladders": rows, "nodal_domain": dom}
    raise InvalidArgumentError(f"unknown suite {name!r}; choose from paper-core, cm, convergence")


def convergence_csv(result: dict) -> str:
    lines = ["ladder,level,h,tol_h,sup_gap,pass"]
    for r in result["ladders"]:
        lines.append(f"{r['ladder']},{r['level']},{r['h']!r},{r['tol_h']!r},{r['sup_gap']!r},"
                     f"{str(r['pass_all']).lower()}")
    return "\n".join(lines) + "\n"


def with_overrides(cfg: ExperimentConfig, **kw) -> ExperimentConfig:
    return replace(cfg, **{k: v for k, v in kw.items() if v is not None})


def lemma31_fit(modes: list[str], tier: str = "oracle", cfg: ExperimentConfig | None = None) -> tuple[float, list]:
    """Covering constant c with R = c/sqrt(lambda), fitted over the given modes."""
    cfg = cfg or ExperimentConfig()
    items, per = [], []
    for spec in modes:
        mode = analytic.parse_mode(spec)
        if tier == "oracle":
            src = analytic.tube_complement_oracle(mode)
        else:
            mesh = build_mesh_for_mode(mode, cfg)
            ns = nodal.extract_nodal_set(mesh, analytic.sample(mode, mesh))
            src = nodal.distance_to_set(mesh, ns, method=cfg.method)
        items.append((src, mode.lam))
        per.append({"mode": spec, "c": conc.covering_constant(src, mode.lam)})
    return conc.fit_empirical_constant(items, "lemma31-c"), per

