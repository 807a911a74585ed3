import math

import numpy as np
import pytest
from scipy import sparse

from abspec import fem2d
from abspec import planar as pl
from abspec.radial_spectra import Annulus, schrodinger_radial_eigen, steklov_separable_extras
from oracles import LAMBDA_HALF


@pytest.fixture(scope="module")
def disk4():
    return pl.mesh_generate(pl.PlanarDomain.disk(1.0), 4)


@pytest.fixture(scope="module")
def disk6():
    return pl.mesh_generate(pl.PlanarDomain.disk(1.0), 6)


def _plain_laplacian(mesh):
    """Textbook P1 stiffness and mass, assembled independently."""
    n = len(mesh.vertices)
    K = sparse.lil_matrix((n, n))
    M = sparse.lil_matrix((n, n))
    for tri in mesh.triangles:
        p = mesh.vertices[tri]
        B = np.array([p[1] - p[0], p[2] - p[0]]).T
        area = 0.5 * abs(np.linalg.det(B))
        G = np.linalg.solve(B.T, np.array([[-1.0, 1.0, 0.0], [-1.0, 0.0, 1.0]]))
        K[np.ix_(tri, tri)] += area * G.T @ G
        M[np.ix_(tri, tri)] += area / 12.0 * (np.ones((3, 3)) + np.eye(3))
    return K.toarray(), M.toarray()


def test_integer_flux_is_plain_laplacian():
    from scipy import linalg
    mesh = pl.mesh_generate(pl.perturbed_disk(2), 2)
    K0, M0 = _plain_laplacian(mesh)
    ref = linalg.eigh(K0, M0, eigvals_only=True)
    for nu in (0.0, 1.0, -2.0, 3.0):
        f = fem2d.assemble(mesh, nu)
        assert f.constrained.size == 0
        w = linalg.eigh(f.stiffness.toarray(), f.mass.toarray(), eigvals_only=True)
        np.testing.assert_allclose(w, ref, atol=1e-10 * ref.max())


def test_zero_flux_with_exterior_pole_is_plain_laplacian():
    from scipy import linalg
    mesh = pl.mesh_generate(pl.PlanarDomain.annulus(0.5, 1.0), 1)
    K0, M0 = _plain_laplacian(mesh)
    f = fem2d.assemble(mesh, 0.0)
    np.testing.assert_allclose(f.stiffness.toarray().real, K0, atol=1e-12)
    w = linalg.eigh(f.stiffness.toarray(), f.mass.toarray(), eigvals_only=True)
    ref = linalg.eigh(K0, M0, eigvals_only=True)
    np.testing.assert_allclose(w, ref, atol=1e-10 * ref.max())


def test_trivial_forms(disk4):
    f = fem2d.assemble(disk4, 0.0)
    one = np.ones(len(disk4.vertices))
    assert abs(one @ f.stiffness @ one) < 1e-12
    assert one @ f.mass @ one == pytest.approx(pl.mesh_measures(disk4).area, rel=1e-13)
    assert one @ f.boundary_mass @ one == pytest.approx(pl.mesh_measures(disk4).perimeter, rel=1e-13)


@pytest.mark.parametrize("nu", [0.25, 0.5, 1.3])
def test_forms_hermitian(disk4, nu):
    f = fem2d.assemble(disk4, nu)
    for A in (f.stiffness, f.mass, f.boundary_mass):
        assert abs(A - A.conj().T).max() <= 1e-14 * abs(A).max()
    r = fem2d.neumann_eigs(disk4, nu, 4)
    assert r.max_imag <= 1e-12 * abs(f.stiffness).max()
    assert np.all(np.diff(r.eigenvalues) >= 0)


def test_disk_half_flux_example():
    errs = []
    for level in (4, 5):
        lam = fem2d.neumann_eigs(pl.mesh_generate(pl.PlanarDomain.disk(1.0), level), 0.5, 2).eigenvalues
        errs.append(abs(lam[0] - LAMBDA_HALF) / LAMBDA_HALF)
        # the closed form is a double eigenvalue
        assert abs(lam[1] - lam[0]) / lam[0] < 0.02
    assert errs[0] < 0.02
    assert errs[1] < errs[0]


def test_convergence_order_half_flux():
    errs, hs = [], []
    for level in (3, 4, 5):
        lam = fem2d.neumann_eigs(pl.mesh_generate(pl.PlanarDomain.disk(1.0), level), 0.5, 1).eigenvalues[0]
        errs.append(abs(lam - LAMBDA_HALF))
        hs.append(2.0**-level)
    order = np.polyfit(np.log(hs), np.log(errs), 1)[0]
    assert order >= 2 * 0.5


def test_integer_flux_ground_state(disk4):
    r = fem2d.neumann_eigs(disk4, 1.0, 2)
    assert abs(r.eigenvalues[0]) <= 1e-6
    field = r.fields[0].values
    assert np.allclose(field, field[0], rtol=1e-8)


def test_offset_pole_lowers_first_eigenvalue():
    for nu in (0.25, 0.5):
        centred = fem2d.neumann_eigs(pl.mesh_generate(pl.PlanarDomain.disk(1.0), 4), nu, 1).eigenvalues[0]
        off = pl.mesh_generate(pl.PlanarDomain.disk(1.0, pole=(0.3, 0.0)), 4)
        assert fem2d.neumann_eigs(off, nu, 1).eigenvalues[0] < centred


def test_pole_value_zero_and_residuals(disk4):
    for nu in (0.25, 0.7):
        for r in (fem2d.neumann_eigs(disk4, nu, 4), fem2d.steklov_eigs(disk4, nu, 4)):
            assert np.all(r.residuals <= fem2d.RESIDUAL_TOL)
            np.testing.assert_allclose(r.rayleigh, r.eigenvalues, rtol=1e-10)
            for f in r.fields:
                assert f.values[disk4.pole_vertex] == 0


def test_rayleigh_quotient_recomputed(disk4):
    f = fem2d.assemble(disk4, 0.3)
    r = fem2d.neumann_eigs(disk4, 0.3, 3)
    for lam, fld in zip(r.eigenvalues, r.fields):
        u = fld.values
        q = np.vdot(u, f.stiffness @ u).real / np.vdot(u, f.mass @ u).real
        assert q == pytest.approx(lam, rel=1e-10)


def test_steklov_disk_examples(disk6):
    sig = fem2d.steklov_eigs(disk6, 0.25, 2).eigenvalues
    assert abs(sig[0] - 0.25) / 0.25 < 0.02
    assert abs(sig[1] - 0.75) / 0.75 < 0.02


def test_steklov_routes_agree():
    mesh = pl.mesh_generate(pl.perturbed_disk(6), 4)
    for nu in (0.25, 1.0):
        a = fem2d.steklov_eigs(mesh, nu, 5, method="schur")
        b = fem2d.steklov_eigs(mesh, nu, 5, method="shift-invert")
        assert a.solver == "schur-dense" and b.solver == "shift-invert"
        np.testing.assert_allclose(a.eigenvalues, b.eigenvalues, rtol=1e-9, atol=1e-12)


def test_steklov_integer_flux_zero_mode(disk4):
    r = fem2d.steklov_eigs(disk4, 0.0, 2)
    assert abs(r.eigenvalues[0]) < 1e-10
    assert r.eigenvalues[1] == pytest.approx(1.0, rel=0.02)


def test_steklov_annulus_matches_separable_pencil():
    exact = steklov_separable_extras(0.25, Annulus(0.5, 1.0), 3).values
    mesh = pl.mesh_generate(pl.PlanarDomain.annulus(0.5, 1.0), 4)
    assert mesh.pole_vertex is None
    sig = fem2d.steklov_eigs(mesh, 0.25, 3).eigenvalues
    np.testing.assert_allclose(sig, exact, rtol=0.01)


def test_hardy_positivity():
    for dom in (pl.PlanarDomain.disk(1.0, pole=(0.5, 0.1)), pl.perturbed_disk(9), pl.PlanarDomain.square(1.0)):
        mesh = pl.mesh_generate(dom, 3)
        for nu in (0.1, 0.5, 1.75):
            assert fem2d.neumann_eigs(mesh, nu, 1).eigenvalues[0] > 0
            assert fem2d.steklov_eigs(mesh, nu, 1).eigenvalues[0] > 0


def test_gauge_gap_shrinks():
    gaps = []
    for level in (3, 4, 5):
        mesh = pl.mesh_generate(pl.PlanarDomain.disk(1.0), level)
        a = fem2d.neumann_eigs(mesh, 0.25, 4).eigenvalues
        b = fem2d.neumann_eigs(mesh, 1.25, 4).eigenvalues
        gaps.append(float(np.max(np.abs(a - b) / a)))
    assert gaps[2] < gaps[1] < gaps[0]
    assert gaps[2] < 0.05


def test_schrodinger_disk_matches_radial():
    V = lambda r: 0.2 / r**2 + 1.5 * r**2  # noqa: E731
    exact = schrodinger_radial_eigen("euclidean", V, 1.0, 1)[0].value
    mesh = pl.mesh_generate(pl.PlanarDomain.disk(1.0), 5)
    f = fem2d.assemble(mesh, 0.0, V=V)
    assert f.constrained.size == 1
    lam = fem2d.schrodinger_eigs(mesh, V, 1).eigenvalues[0]
    assert abs(lam - exact) / exact < 0.02


def test_negative_potential_rejected():
    V = lambda r: 0.5 - 4.0 * r  # noqa: E731
    mesh = pl.mesh_generate(pl.PlanarDomain.disk(1.0), 2)
    with pytest.raises(ValueError, match="non-negative"):
        fem2d.schrodinger_eigs(mesh, V, 1)
    with pytest.raises(ValueError, match="non-negative"):
        schrodinger_radial_eigen("euclidean", V, 1.0, 1)


def test_thread_count_bit_identical(monkeypatch):
    mesh = pl.mesh_generate(pl.perturbed_disk(4), 6)
    assert len(mesh.triangles) > 3 * fem2d.CHUNK
    out = []
    for threads in ("1", "4"):
        monkeypatch.setenv("ABSPEC_THREADS", threads)
        f = fem2d.assemble(mesh, 0.37)
        out.append((f.stiffness.tocoo(), f.mass.tocoo()))
    for a, b in zip(out[0], out[1]):
        assert np.array_equal(a.row, b.row) and np.array_equal(a.col, b.col)
        assert np.array_equal(a.data, b.data)


def test_dense_and_iterative_paths_agree(monkeypatch):
    mesh = pl.mesh_generate(pl.perturbed_disk(1), 4)
    assert len(mesh.vertices) < fem2d.DENSE_LIMIT
    dense = fem2d.neumann_eigs(mesh, 0.4, 4)
    monkeypatch.setattr(fem2d, "DENSE_LIMIT", 10)
    sparse_ = fem2d.neumann_eigs(mesh, 0.4, 4)
    assert dense.solver == "dense" and sparse_.solver == "shift-invert"
    np.testing.assert_allclose(dense.eigenvalues, sparse_.eigenvalues, rtol=1e-10)


def test_assembly_errors(disk4):
    with pytest.raises(ValueError, match="pole"):
        fem2d.assemble(disk4, 0.25, pole=(0.1, 0.0))
    sq = pl.PlanarDomain.square(1.0)
    mesh = pl.mesh_generate(sq, 2)
    on_boundary = pl.TriMesh(mesh.vertices, mesh.triangles, mesh.boundary_edges,
                             pole_vertex=int(mesh.boundary_edges[0, 0]))
    with pytest.raises(ValueError, match="boundary"):
        fem2d.assemble(on_boundary, 0.25)
    with pytest.raises(ValueError):
        fem2d.neumann_eigs(disk4, 0.25, 0)


def test_verify_square_brock():
    rep = fem2d.verify_isoperimetric(pl.PlanarDomain.square(1.0), 0.25, "brock_area", level=5)
    assert rep.rhs == pytest.approx(math.sqrt(math.pi) * 0.25, rel=1e-12)
    assert rep.rhs == pytest.approx(0.4431, abs=1e-4)
    assert rep.lhs < rep.rhs and rep.holds


def test_verify_bean_weinstock():
    # a kidney shape rescaled to perimeter 2 pi
    t = np.linspace(0, 2 * math.pi, 256, endpoint=False)
    rho = 1.0 + 0.35 * np.cos(2 * t) + 0.1 * np.cos(t)
    pts = np.column_stack([rho * np.cos(t), rho * np.sin(t)])
    bean = pl.PlanarDomain([pts], (0.0, 0.0))
    mesh = pl.mesh_generate(bean, fem2d.ISO_LEVEL)
    mesh.vertices *= 2 * math.pi / pl.mesh_measures(mesh).perimeter
    mesh.pole = mesh.vertices[mesh.pole_vertex].copy()
    rep = fem2d.verify_isoperimetric(mesh, 0.25, "weinstock_perimeter")
    assert rep.perimeter == pytest.approx(2 * math.pi, rel=1e-12)
    assert rep.rhs == pytest.approx(0.25, rel=1e-12)
    assert rep.lhs < rep.rhs and rep.holds


def test_verify_centred_disk_near_equality():
    for mode in ("neumann_area", "brock_area", "weinstock_perimeter"):
        rep = fem2d.verify_isoperimetric(pl.PlanarDomain.disk(1.0), 0.5, mode, level=5)
        assert rep.near_equality and rep.holds
        assert abs(rep.margin) / rep.rhs < 0.01


def test_verify_schrodinger_mode():
    # radial, non-negative and decreasing: the disk maximizes the first eigenvalue
    V = lambda r: 0.3 / r**2 + 1.0 / (1.0 + r)  # noqa: E731
    for seed in (0, 1):
        rep = fem2d.verify_isoperimetric(pl.perturbed_disk(seed), 0.0, "schrodinger", level=5, V=V)
        assert rep.holds and rep.lhs < rep.rhs


def test_increasing_potential_can_violate():
    # outside the decreasing-potential hypothesis the comparison genuinely fails
    V = lambda r: 2.0 * r**2  # noqa: E731
    rep = fem2d.verify_isoperimetric(pl.perturbed_disk(3), 0.0, "schrodinger", level=5, V=V)
    assert not rep.holds and rep.margin < -0.2 * rep.rhs


def test_verify_mode_errors():
    with pytest.raises(ValueError, match="simply connected"):
        fem2d.verify_isoperimetric(pl.PlanarDomain.annulus(0.5, 1.0), 0.25, "weinstock_perimeter", level=2)
    with pytest.raises(ValueError, match="potential"):
        fem2d.verify_isoperimetric(pl.PlanarDomain.disk(1.0), 0.0, "schrodinger", level=2)
    with pytest.raises(ValueError, match="unknown mode"):
        fem2d.verify_isoperimetric(pl.PlanarDomain.disk(1.0), 0.25, "faber", level=2)
