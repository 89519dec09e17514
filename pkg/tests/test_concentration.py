import json
import math

import numpy as np
import pytest

from nodal_lab import analytic as A, concentration as C, mesh as M, nodal as N, spectral as S
from nodal_lab.errors import EmptyDomainError, GridRangeError, GuardError, InvalidArgumentError


def oracle(curve, lam):
    return N.oracle_profile(curve, N.default_r_grid(lam))


def test_record_and_report_schema(torus64):
    rep = C.check_nodal_concentration(oracle(A.tube_complement_oracle(A.torus_mode(1)), 4 * np.pi**2),
                                      4 * np.pi**2, mesh=torus64)
    d = rep.to_dict()
    for key in ("check", "lambda", "mesh", "tol_h", "records", "fitted_constant", "pass_all"):
        assert key in d
    assert set(d["mesh"]) == {"h", "depth"}
    assert set(d["records"][0]) >= {"x", "lhs", "rhs", "slack", "pass"}
    json.dumps(d, allow_nan=False)
    csv = rep.to_csv().splitlines()
    assert csv[0] == "x,lhs,rhs,slack,pass" and len(csv) == 61


def test_tol_allowance_halves(torus64):
    lam = 16 * np.pi**2
    t64 = C.discretization_allowance(torus64, lam)
    t128 = C.discretization_allowance(M.generate_flat_torus(128, 128), lam)
    assert t128 == pytest.approx(t64 / 2)
    assert t64 == pytest.approx(2 * torus64.mean_edge_length * 4 * np.pi)


def test_violation_is_reported():
    curve, lam = A.boundary_oracle("square")
    rep = C.check_boundary_decay(oracle(curve, lam), 100 * lam)
    assert not rep.pass_all and rep.max_violation > 0


def test_iteration_grid_range():
    curve, lam = A.boundary_oracle("disk")
    prof = oracle(curve, lam)
    with pytest.raises(GridRangeError):
        C.check_iteration_inequality(prof, lam, [(prof.r[-1], 0.1)])
    rep = C.check_iteration_inequality(prof, lam, C.default_iteration_pairs(prof.r[-1]))
    assert len(rep.records) == 200 and rep.pass_all


def test_bsep_examples():
    curve, lam = A.boundary_oracle("strip", 1.0)
    value, rec = C.bsep_k1(oracle(curve, lam), 0.5, lam)
    assert value == pytest.approx(0.25, abs=1e-12)
    assert rec.rhs == pytest.approx((1 - math.log(0.5)) / math.pi) and rec.passed
    curve, lam = A.boundary_oracle("disk", 1.0)
    value, rec = C.bsep_k1(oracle(curve, lam), 0.25, lam)
    assert value == pytest.approx(0.5, abs=1e-12)
    assert rec.rhs == pytest.approx(0.99232, abs=1e-4)
    with pytest.raises(InvalidArgumentError):
        C.bsep_k1(oracle(curve, lam), 1.0, lam)


def test_bsep_candidates(square16):
    meas = M.normalized_measure(square16)
    prof = N.boundary_distance_profile(square16, meas, N.default_r_grid(2 * np.pi**2))
    k1 = C.bsep_k_candidate(square16, meas, [0.1])
    assert k1.value <= C.profile_quantile(prof, 0.1) + 1e-12
    k2 = C.bsep_k_candidate(square16, meas, [0.1, 0.1], lambda_k=5 * np.pi**2)
    assert k2.record.rhs == pytest.approx(2 / math.sqrt(0.5 * np.pi**2))
    assert k2.record.passed and k2.value > 0
    big = C.bsep_k_candidate(square16, meas, [0.6, 0.5], lambda_k=5 * np.pi**2)
    assert big.value == 0.0 and big.record.passed


def test_cm_omega_torus(torus64):
    mode = A.torus_mode(2)
    f = A.sample(mode, torus64)
    con = C.construct_cm_omega(torus64, M.normalized_measure(torus64), f, None, mode.lam, 0.1)
    assert con.J.all()  # c_thresh / xi >= 2
    assert con.measure_omega == pytest.approx(1.0)
    assert con.R == pytest.approx(np.pi / 2 / np.sqrt(mode.lam))
    assert con.covers_tube and con.multiplicity >= 1
    # near the line |phi| ~ 2 pi k d, so C-hat ~ sqrt(2 xi)
    assert con.inclusion_constant == pytest.approx(math.sqrt(0.2), rel=0.03)
    assert C.omega_report(con).pass_all


def test_cm_omega_errors(torus64):
    meas = M.normalized_measure(torus64)
    with pytest.raises(EmptyDomainError):
        C.construct_cm_omega(torus64, meas, np.ones(torus64.n_vertices) + 0.1, None, 10.0, 0.1)
    f = A.sample(A.torus_mode(1), torus64)
    with pytest.raises(InvalidArgumentError):
        C.construct_cm_omega(torus64, meas, f, None, 4 * np.pi**2, 1.5)
    with pytest.raises(GuardError):
        C.construct_cm_omega(torus64, meas, f, None, 4 * np.pi**2, 0.1, ricci_lower=-1.0)


def test_chebyshev_cosine():
    m = M.generate_flat_torus(256, 8)
    f = A.sample(A.torus_mode(1), m)
    lhs, rhs = C.chebyshev_tail(f, M.normalized_measure(m), 0.9)
    assert rhs == pytest.approx(0.5 / 0.81, rel=1e-3)
    assert lhs == pytest.approx(2 / np.pi * np.arccos(0.9), abs=2 / 256)
    with pytest.raises(InvalidArgumentError):
        C.chebyshev_tail(f, M.normalized_measure(m), 0.0)


def test_tail_and_lp_on_whole_torus():
    m = M.generate_flat_torus(128, 128)
    meas = M.normalized_measure(m)
    f = A.sample(A.torus_mode(1), m)
    omega = np.ones(m.n_vertices, dtype=bool)
    rep = C.check_restricted_tail(f, omega, meas, 0.99)
    assert rep.fitted_constant > 0 and rep.pass_all
    assert rep.records[0].lhs <= 1 < math.e
    lp = C.check_restricted_lp(f, omega, meas, [1, 2], 0.99, rep.fitted_constant)
    assert lp.records[0].lhs == pytest.approx(2 / np.pi, rel=1e-3)
    assert lp.records[1].lhs == pytest.approx(math.sqrt(0.5), rel=1e-9)
    assert lp.pass_all
    with pytest.raises(InvalidArgumentError):
        C.check_restricted_lp(f, omega, meas, [0.5], 0.5, 1.0)


def test_tail_constant_is_binding():
    m = M.generate_flat_torus(32, 32)
    meas = M.normalized_measure(m)
    f = A.sample(A.torus_mode(1, phase=0.2), m)
    omega = np.ones(m.n_vertices, dtype=bool)
    c = C.tail_constant(f, omega, meas, 0.5)
    levels = np.unique(np.abs(f))
    rep = C.check_restricted_tail(f, omega, meas, 0.5, c * 1.001, r_grid=levels[:-1] - 1e-15)
    assert not rep.pass_all
    assert C.check_restricted_tail(f, omega, meas, 0.5, c, r_grid=levels).pass_all


def test_tail_constant_grows_as_omega_shrinks(torus64):
    meas = M.normalized_measure(torus64)
    f = A.sample(A.torus_mode(2), torus64)
    x = torus64.vertices[:, 0]
    sets = [x < a for a in (1.0, 0.75, 0.5, 0.25)]
    cs = [C.tail_constant(f, s, meas, 0.3) for s in sets]
    assert all(b >= a for a, b in zip(cs, cs[1:]))


@pytest.mark.parametrize("p", [1, 2, 3, 5, 10, 33, 64])
def test_gamma_against_stdlib(p):
    assert C.gamma(p + 1.0) == pytest.approx(math.gamma(p + 1.0), rel=1e-12)
    assert C.gamma(p + 0.37) == pytest.approx(math.gamma(p + 0.37), rel=1e-12)


def test_gamma_factorial():
    assert C.gamma(6) == pytest.approx(120.0, rel=1e-13)


def test_fit_targets():
    rec = C.CheckRecord(0.5, 0.8, 0.8)
    rep = C.CheckReport("tail", None, [rec], params={"norm2": 1.0, "xi": 0.25})
    # binding record: lhs = exp(1 - C sqrt(xi) r) solves to C = (1 - ln lhs) / (sqrt(xi) r)
    assert C.fit_empirical_constant([rep], "tail-C") == pytest.approx((1 - math.log(0.8)) / 0.25)
    with pytest.raises(InvalidArgumentError):
        C.fit_empirical_constant([], "tail-C")
    with pytest.raises(InvalidArgumentError):
        C.fit_empirical_constant([rep], "nonsense")
    items = [(A.tube_complement_oracle(A.torus_mode(k)), A.torus_mode(k).lam) for k in (1, 2, 3)]
    assert C.fit_empirical_constant(items, "lemma31-c") == pytest.approx(np.pi / 2)
