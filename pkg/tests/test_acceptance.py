"""Acceptance criteria, each at its stated tolerance and runtime budget.

Every test appends one PASS/FAIL line that is echoed in the terminal summary.
"""
import math
import time

import numpy as np
import pytest

from nodal_lab import analytic as A, cli, concentration as C, experiments as ex, mesh as M, nodal as N, spectral as S

from .conftest import ACCEPTANCE_LINES

TORUS_K = (1, 2, 3, 5)
SPHERE_L = (1, 3, 5, 8)


def report(number, ok, elapsed, budget, detail):
    ok = bool(ok) and elapsed < budget
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} ({elapsed:.2f}s / {budget:.0f}s) {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def modes():
    return [A.torus_mode(k) for k in TORUS_K] + [A.sphere_harmonic(l) for l in SPHERE_L]


def mode_mesh(mode, level):
    if mode.surface == A.SPHERE:
        return M.generate_icosphere(level)
    return M.generate_flat_torus(level, level)


def discrete_report(mode, level):
    mesh = mode_mesh(mode, level)
    f = A.sample(mode, mesh)
    dist = N.distance_to_set(mesh, N.extract_nodal_set(mesh, f))
    prof = N.tube_profile(dist, M.normalized_measure(mesh), N.default_r_grid(mode.lam))
    tol = C.discretization_allowance(mesh, mode.lam)
    return C.check_nodal_concentration(prof, mode.lam, tol, mesh), prof


def test_criterion_1_oracle_tier():
    t = time.perf_counter()
    fails = []
    for mode in modes():
        curve = A.tube_complement_oracle(mode)
        rep = C.check_nodal_concentration(N.oracle_profile(curve, N.default_r_grid(mode.lam)), mode.lam, 0.0)
        assert len(rep.records) == 60 and rep.tol_h == 0.0
        if not rep.pass_all:
            fails.append(mode.spec())
    ok = report(1, not fails, time.perf_counter() - t, 1,
                f"8 oracle curves x 60 r, zero tolerance; failures: {fails or 'none'}")
    assert ok


def test_criterion_2_discrete_tier():
    t = time.perf_counter()
    ladders = {A.TORUS: (32, 64, 128), A.SPHERE: (3, 4, 5)}
    problems, gaps_text = [], []
    for mode in modes():
        curve = A.tube_complement_oracle(mode)
        gaps = []
        for level in ladders[mode.surface]:
            rep, prof = discrete_report(mode, level)
            gaps.append(N.sup_gap(prof, curve))
            if level == ladders[mode.surface][-1] and not rep.pass_all:
                problems.append(f"{mode.spec()} fails with tol_h")
        if not all(b < a for a, b in zip(gaps, gaps[1:])):
            problems.append(f"{mode.spec()} gaps not decreasing {gaps}")
        gaps_text.append(f"{mode.spec().split(',phase')[0]}:" + "/".join(f"{g:.3f}" for g in gaps))
    ok = report(2, not problems, time.perf_counter() - t, 120,
                f"sup-gaps {' '.join(gaps_text)}; problems: {problems or 'none'}")
    assert ok


def test_criterion_3_boundary_and_iteration():
    t = time.perf_counter()
    cases = {"disk": M.generate_disk(5), "square": M.generate_square(64)}
    problems, text = [], []
    for shape, mesh in cases.items():
        curve, exact = A.boundary_oracle(shape)
        lam1 = S.dirichlet_lambda1(mesh)
        rel = abs(lam1 / exact - 1)
        if rel > 0.02:
            problems.append(f"{shape} lambda1 off by {rel:.3%}")
        tol = C.discretization_allowance(mesh, lam1)
        prof = N.boundary_distance_profile(mesh, M.normalized_measure(mesh), N.default_r_grid(lam1))
        dec = C.check_boundary_decay(prof, lam1, tol, mesh)
        pairs = C.default_iteration_pairs(float(prof.r[-1]))
        assert len(pairs) == 200
        it = C.check_iteration_inequality(prof, lam1, pairs, tol, mesh)
        # oracle tier of the same inequalities, exact
        oprof = N.oracle_profile(curve, N.default_r_grid(exact))
        odec = C.check_boundary_decay(oprof, exact)
        oit = C.check_iteration_inequality(oprof, exact, C.default_iteration_pairs(float(oprof.r[-1])))
        for name, rep in (("decay", dec), ("iteration", it), ("oracle decay", odec), ("oracle iteration", oit)):
            if not rep.pass_all:
                problems.append(f"{shape} {name}")
        excess = max(0.0, max(-r.slack for r in it.records + dec.records))
        text.append(f"{shape} lambda1={lam1:.4f} ({rel:.2%}), largest excess {excess:.2e} vs tol_h {tol:.3f}")
    ok = report(3, not problems, time.perf_counter() - t, 60, f"{'; '.join(text)}; problems: {problems or 'none'}")
    assert ok


def test_criterion_4_nodal_domain_eigenvalue():
    t = time.perf_counter()
    rows = ex.nodal_domain_ladder((32, 64, 128), k=2)
    errs = [r["rel_err"] for r in rows]
    ok = errs[-1] < 0.03 and all(b < a for a, b in zip(errs, errs[1:]))
    ok = report(4, ok, time.perf_counter() - t, 60,
                f"strip domain lambda1 / 16pi^2 errors {' '.join(f'{e:.2%}' for e in errs)} on 32/64/128")
    assert ok


def test_criterion_5_boundary_separation():
    t = time.perf_counter()
    etas = (0.05, 0.1, 0.25, 0.5, 0.9)
    meshes = {"disk": M.generate_disk(5), "square": M.generate_square(64), "strip": M.generate_strip(1.0, 32, 32)}
    problems = []
    for shape, mesh in meshes.items():
        curve, exact = A.boundary_oracle(shape)
        if not C.check_bsep(N.oracle_profile(curve, N.default_r_grid(exact)), etas, exact).pass_all:
            problems.append(f"{shape} oracle")
        lam1 = S.dirichlet_lambda1(mesh)
        prof = N.boundary_distance_profile(mesh, M.normalized_measure(mesh), N.default_r_grid(lam1))
        if not C.check_bsep(prof, etas, lam1, C.discretization_allowance(mesh, lam1), mesh).pass_all:
            problems.append(f"{shape} discrete")
    square = M.generate_square(32)
    meas = M.normalized_measure(square)
    lam = [p.lam for p in S.dirichlet_eigenpairs(square, 3)]
    sq_prof = N.boundary_distance_profile(square, meas, N.default_r_grid(lam[0]))
    cands = []
    for k in (1, 2, 3):
        cand = C.bsep_k_candidate(square, meas, [0.1] * k, lambda_k=lam[k - 1])
        cands.append(f"k={k}: {cand.value:.3f} <= {cand.record.rhs:.3f}")
        if not cand.record.passed:
            problems.append(f"k={k} candidate")
        if k == 1 and cand.value > C.profile_quantile(sq_prof, 0.1) + 1e-12:
            problems.append("k=1 candidate above the quantile")
    ok = report(5, not problems, time.perf_counter() - t, 60,
                f"disk/square/strip x 5 eta both tiers; {'; '.join(cands)}; problems: {problems or 'none'}")
    assert ok


@pytest.fixture(scope="module")
def constructions():
    t = time.perf_counter()
    out = {}
    for k in (2, 3, 5):
        mesh = M.generate_flat_torus(128, 128)
        mode = A.torus_mode(k)
        f = A.sample(mode, mesh)
        meas = M.normalized_measure(mesh)
        ns = N.extract_nodal_set(mesh, f)
        for xi in (0.1, 0.3):
            out[(k, xi)] = (mesh, meas, f, C.construct_cm_omega(mesh, meas, f, ns, mode.lam, xi))
    return out, time.perf_counter() - t


def test_criterion_6_omega_construction(constructions):
    constructions, build_time = constructions
    t = time.perf_counter()
    problems, text = [], []
    for xi in (0.1, 0.3):
        chats = []
        for k in (2, 3, 5):
            con = constructions[(k, xi)][3]
            if con.measure_omega < 1 - xi:
                problems.append(f"k={k} xi={xi} m(Omega)={con.measure_omega:.3f}")
            if not (math.isfinite(con.inclusion_constant) and con.multiplicity >= 1):
                problems.append(f"k={k} xi={xi} non-finite output")
            chats.append(con.inclusion_constant)
            text.append(f"k={k},xi={xi}: m={con.measure_omega:.3f} mult={con.multiplicity} C={con.inclusion_constant:.4f}")
        mean = float(np.mean(chats))
        if max(abs(c / mean - 1) for c in chats) > 0.2:
            problems.append(f"C-hat spread at xi={xi}: {chats}")
    elapsed = time.perf_counter() - t + build_time
    ok = report(6, not problems, elapsed, 120, f"{'; '.join(text)}; problems: {problems or 'none'}")
    assert ok


def test_criterion_7_tail_and_moments(constructions):
    constructions = constructions[0]
    t = time.perf_counter()
    problems, fitted = [], []
    for (k, xi), (mesh, meas, f, con) in constructions.items():
        tail = C.check_restricted_tail(f, con.omega, meas, xi)
        fitted.append(tail.fitted_constant)
        if not tail.pass_all:
            problems.append(f"tail k={k} xi={xi}")
        lp = C.check_restricted_lp(f, con.omega, meas, [1, 2, 4, 8, 16], xi, tail.fitted_constant)
        if not all(r.passed for r in lp.records):
            problems.append(f"lp k={k} xi={xi}")
        if not lp.extra_checks["cavalieri_le_closed_form"]:
            problems.append(f"cavalieri k={k} xi={xi}")
    rng = np.random.default_rng(20240611)
    probes = [M.generate_flat_torus(24, 24), M.generate_icosphere(2), M.generate_disk(3)]
    cheb_ok = True
    for i in range(100):
        mesh = probes[i % 3]
        field = rng.standard_normal(mesh.n_vertices) * rng.uniform(0.1, 10)
        r = float(rng.uniform(1e-3, 1.2) * np.abs(field).max())
        lhs, rhs = C.chebyshev_tail(field, M.normalized_measure(mesh), r)
        cheb_ok &= lhs <= rhs
    if not cheb_ok:
        problems.append("chebyshev")
    ok = report(7, not problems, time.perf_counter() - t, 60,
                f"fitted C* in [{min(fitted):.3f}, {max(fitted):.3f}], 6 tails + 30 moments + 100 Chebyshev probes; "
                f"problems: {problems or 'none'}")
    assert ok


def test_criterion_8_constant_fits():
    t = time.perf_counter()
    torus = ex.lemma31_fit([f"torus:kx={k}" for k in TORUS_K], "oracle")[0]
    sphere = ex.lemma31_fit(["sphere:l=1"], "oracle")[0]
    disc_t = ex.lemma31_fit(["torus:kx=2"], "discrete", ex.ExperimentConfig(n=128))[0]
    disc_s = ex.lemma31_fit(["sphere:l=1"], "discrete", ex.ExperimentConfig(depth=5))[0]
    ok = abs(torus / (math.pi / 2) - 1) < 0.01 and abs(sphere / (math.pi * math.sqrt(2) / 2) - 1) < 0.02
    ok = report(8, ok, time.perf_counter() - t, 60,
                f"torus c={torus:.6f} (pi/2={math.pi / 2:.6f}), sphere l=1 c={sphere:.6f} "
                f"(pi*sqrt2/2={math.pi * math.sqrt(2) / 2:.6f}); discrete tier {disc_t:.4f}, {disc_s:.4f}")
    assert ok


def test_criterion_9_determinism(tmp_path, capsys):
    t = time.perf_counter()
    outs = []
    for i, jobs in enumerate(("1", "1", "4")):
        path = tmp_path / f"core{i}.json"
        code = cli.main(["suite", "paper-core", "--jobs", jobs, "--out", str(path)])
        capsys.readouterr()
        assert code == 0
        outs.append(path.read_bytes())
    ok = outs[0] == outs[1] == outs[2]
    ok = report(9, ok, time.perf_counter() - t, 120,
                f"suite paper-core run twice serially and once with 4 jobs: {len(outs[0])} bytes, identical={ok}")
    assert ok
