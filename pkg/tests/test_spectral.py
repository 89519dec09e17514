import numpy as np
import pytest

from nodal_lab import analytic as A, mesh as M, spectral as S
from nodal_lab.errors import AssemblyError, InvalidArgumentError, UnderResolvedDomainError


def test_operator_basics(ico3):
    ops = S.assemble(ico3)
    assert np.allclose(ops.stiffness @ np.ones(ops.n), 0.0, atol=1e-12)
    assert abs(ops.stiffness - ops.stiffness.T).max() < 1e-14
    assert ops.mass.sum() == pytest.approx(ico3.total_area)


def test_degenerate_face_is_reported():
    v = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [0.0, 1.0]])
    f = np.array([[0, 1, 3], [0, 1, 2]])
    with pytest.raises(AssemblyError, match="face 1"):
        S.assemble(M.TriMesh(v, f, M.PLANAR))


def test_sphere_spectrum():
    pairs = S.smallest_eigenpairs(S.assemble(M.generate_icosphere(4)), 9)
    lam = np.array([p.lam for p in pairs])
    assert lam[0] == pytest.approx(0.0, abs=1e-10)
    assert np.allclose(lam[1:4], 2.0, rtol=5e-3)
    assert np.allclose(lam[4:9], 6.0, rtol=5e-3)
    assert max(p.residual for p in pairs) < S.RESIDUAL_TOL


def test_fields_are_normalized(torus64):
    ops = S.assemble(torus64)
    for p in S.smallest_eigenpairs(ops, 5):
        assert p.field @ (ops.mass * p.field) / ops.total_area == pytest.approx(1.0)


def test_torus_spectrum(torus64):
    lam = [p.lam for p in S.smallest_eigenpairs(S.assemble(torus64), 5)]
    assert np.allclose(lam[1:5], 4 * np.pi**2, rtol=2e-3)


def test_disk_dirichlet_converges():
    ratios = [S.dirichlet_lambda1(M.generate_disk(d)) / A.J01**2 for d in (3, 4, 5)]
    errs = [abs(r - 1) for r in ratios]
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 2e-3


def test_square_dirichlet_levels():
    m = M.generate_square(32)
    pairs = S.dirichlet_eigenpairs(m, 3)
    assert pairs[0].lam == pytest.approx(2 * np.pi**2, rel=3e-3)
    assert pairs[1].lam == pytest.approx(5 * np.pi**2, rel=6e-3)
    assert np.all(pairs[0].field[m.boundary_vertices] == 0.0)


def test_dirichlet_errors(ico3):
    with pytest.raises(InvalidArgumentError):
        S.dirichlet_lambda1(ico3)
    with pytest.raises(UnderResolvedDomainError):
        S.dirichlet_lambdak(M.generate_square(2), 2)
    with pytest.raises(InvalidArgumentError):
        S.smallest_eigenpairs(S.assemble(M.generate_flat_torus(4, 4)), 16)


def test_energy_density_integrates_to_rayleigh(torus64):
    ops = S.assemble(torus64)
    f = A.sample(A.torus_mode(1), torus64)
    e = S.dirichlet_energy_density(ops, f)
    w = ops.mass / ops.total_area
    assert w @ e == pytest.approx(f @ (ops.stiffness @ f) / ops.total_area, rel=1e-12)
    # |grad cos 2 pi x|^2 = 4 pi^2 sin^2 2 pi x
    exact = 4 * np.pi**2 * np.sin(2 * np.pi * torus64.vertices[:, 0]) ** 2
    assert np.max(np.abs(e - exact)) / (4 * np.pi**2) < 0.02


def test_eigenpair_json_roundtrip(tmp_path):
    pairs = S.smallest_eigenpairs(S.assemble(M.generate_icosphere(2)), 3)
    S.write_eigenpairs(pairs, tmp_path / "e.json")
    back = S.read_eigenpairs(tmp_path / "e.json")
    assert [p.lam for p in back] == [p.lam for p in pairs]
    assert np.array_equal(back[2].field, pairs[2].field)
