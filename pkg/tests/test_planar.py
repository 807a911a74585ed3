import math

import numpy as np
import pytest

from abspec import planar as pl


def test_measures_examples():
    m = pl.domain_measures(pl.PlanarDomain.disk(1.0, 256))
    assert abs(m.area - math.pi) / math.pi < 1e-3
    assert abs(m.perimeter - 2 * math.pi) / (2 * math.pi) < 1e-3
    m = pl.domain_measures(pl.PlanarDomain.square(1.0))
    assert m.area == pytest.approx(1.0, abs=1e-15) and m.perimeter == pytest.approx(4.0, abs=1e-15)
    m = pl.domain_measures(pl.PlanarDomain.annulus(0.5, 1.0, 256))
    assert abs(m.area - 0.75 * math.pi) / (0.75 * math.pi) < 1e-3


def test_domain_validation():
    bowtie = np.array([[0, 0], [1, 1], [1, 0], [0, 1]], dtype=float)
    with pytest.raises(ValueError, match="simple"):
        pl.PlanarDomain([bowtie], (0.5, 0.25))
    clockwise = np.array([[0, 0], [0, 1], [1, 1], [1, 0]], dtype=float)
    with pytest.raises(ValueError, match="counterclockwise"):
        pl.PlanarDomain([clockwise], (0.5, 0.5))
    with pytest.raises(ValueError, match="pole"):
        pl.PlanarDomain.square(1.0, pole=(0.0, 0.5))


def test_moment_examples():
    disk = pl.PlanarDomain.disk(1.0, 512)
    for p in (0.0, 0.5):
        chk = pl.brock_moment_check(disk, p)
        assert chk.holds
        assert chk.lhs == pytest.approx(2 * math.pi, rel=1e-4)
        assert chk.relative_gap < 1e-3
    sq = pl.brock_moment_check(pl.PlanarDomain.square(1.0), 0.5)
    assert sq.holds and sq.relative_gap > 1e-3


def test_moment_against_direct_quadrature():
    # unit square, pole at centre: int over the boundary of r^p by scipy.quad on one edge
    from scipy import integrate
    p = 0.75
    edge, _ = integrate.quad(lambda x: (x * x + 0.25) ** (p / 2), -0.5, 0.5, epsrel=1e-13)
    # 64 collinear pieces per side so the per-segment Gauss rule is exact to round-off
    x = np.linspace(-0.5, 0.5, 65)[:-1]
    side = np.column_stack([x, np.full_like(x, -0.5)])
    rot = np.array([[0.0, -1.0], [1.0, 0.0]])
    pts = np.vstack([side @ np.linalg.matrix_power(rot, k).T for k in range(4)])
    dom = pl.PlanarDomain([pts], (0.0, 0.0))
    assert pl.boundary_moment(dom, p) == pytest.approx(4 * edge, rel=1e-10)


def test_moment_inequality_random_polygons():
    for seed in range(100):
        dom = pl.perturbed_disk(seed, n=128, amplitude=0.3)
        for p in (0.0, 0.25, 0.5, 1.0):
            chk = pl.brock_moment_check(dom, p)
            assert chk.holds
            assert chk.relative_gap > 1e-3


def test_perturbed_disk_deterministic():
    a, b = pl.perturbed_disk(7), pl.perturbed_disk(7)
    assert np.array_equal(a.boundaries[0], b.boundaries[0])
    assert not np.array_equal(a.boundaries[0], pl.perturbed_disk(8).boundaries[0])


def test_disk_mesh_level3():
    mesh = pl.mesh_generate(pl.PlanarDomain.disk(1.0), 3)
    rep = pl.check_mesh(mesh)
    assert rep.valid and rep.conforming and rep.counterclockwise and rep.boundary_consistent and rep.euler_ok
    assert mesh.pole_vertex is not None
    assert np.array_equal(mesh.vertices[mesh.pole_vertex], [0.0, 0.0])
    assert np.all(mesh.triangle_areas() > 0)


@pytest.mark.parametrize("level", [0, 1, 2, 3, 4])
def test_triangle_count(level):
    mesh = pl.mesh_generate(pl.PlanarDomain.disk(1.0), level)
    assert len(mesh.triangles) == 4**level * pl.FAN_SECTORS


WELL_SHAPED = [
    pl.PlanarDomain.disk(1.0),
    pl.PlanarDomain.square(1.0),
    pl.PlanarDomain.rectangle(1.5, 1.0),
    pl.perturbed_disk(3),
    pl.perturbed_disk(4, amplitude=0.3),
    pl.PlanarDomain.disk(1.0, pole=(0.3, 0.0)),
    pl.PlanarDomain.disk(1.0, pole=(0.6, 0.0)),
    pl.PlanarDomain.annulus(0.5, 1.0),
    pl.PlanarDomain.annulus(0.2, 1.0),
]


@pytest.mark.parametrize("dom", WELL_SHAPED)
def test_generated_meshes_valid(dom):
    for level in range(1, 7):
        mesh = pl.mesh_generate(dom, level)
        rep = pl.check_mesh(mesh)
        assert rep.valid
        assert rep.holes == len(dom.boundaries) - 1
        if dom.simply_connected or level >= 2:
            assert rep.min_angle >= 15.0, level


@pytest.mark.parametrize("dom", WELL_SHAPED)
def test_mesh_area_converges(dom):
    exact = pl.domain_measures(dom).area
    errs = [abs(pl.mesh_measures(pl.mesh_generate(dom, lv)).area - exact) / exact for lv in (4, 5)]
    assert errs[1] < 2e-3
    assert errs[1] <= errs[0]


def test_elongated_domain_still_valid():
    # the polar fan stretches with rho_max / rho_min; validity does not depend on it
    for dom in (pl.PlanarDomain.rectangle(3.0, 1.0), pl.PlanarDomain.square(1.0, pole=(0.2, 0.3))):
        for level in (2, 4):
            rep = pl.check_mesh(pl.mesh_generate(dom, level))
            assert rep.valid and rep.min_angle > 2.0


def test_boundary_vertices_on_boundary():
    dom = pl.perturbed_disk(11)
    mesh = pl.mesh_generate(dom, 3)
    rho = dom.radial_function()
    v = mesh.vertices[mesh.boundary_vertices]
    t = np.arctan2(v[:, 1], v[:, 0])
    np.testing.assert_allclose(np.hypot(v[:, 0], v[:, 1]), rho(t), rtol=1e-12)


def test_annulus_has_no_pole_vertex():
    mesh = pl.mesh_generate(pl.PlanarDomain.annulus(0.5, 1.0), 2)
    assert mesh.pole_vertex is None and pl.check_mesh(mesh).holes == 1


def test_non_star_shaped_rejected():
    # a U shape seen from a point in one arm
    u = np.array([[0, 0], [3, 0], [3, 3], [2, 3], [2, 1], [1, 1], [1, 3], [0, 3]], dtype=float)
    dom = pl.PlanarDomain([u], (0.5, 2.5))
    with pytest.raises(ValueError, match="star"):
        pl.mesh_generate(dom, 2)


def test_round_trip_bit_identical(tmp_path):
    mesh = pl.mesh_generate(pl.perturbed_disk(5, pole=(0.1, -0.05)), 3)
    path = tmp_path / "m.abmesh"
    pl.write_mesh(mesh, path)
    back = pl.read_mesh(path)
    assert np.array_equal(back.vertices, mesh.vertices)
    assert np.array_equal(back.triangles, mesh.triangles)
    assert np.array_equal(back.boundary_edges, mesh.boundary_edges)
    assert back.pole_vertex == mesh.pole_vertex
    pl.write_mesh(back, tmp_path / "again.abmesh")
    assert (tmp_path / "again.abmesh").read_bytes() == path.read_bytes()


def test_mesh_generation_deterministic():
    a = pl.mesh_text(pl.mesh_generate(pl.perturbed_disk(2), 4))
    b = pl.mesh_text(pl.mesh_generate(pl.perturbed_disk(2), 4))
    assert a == b


@pytest.mark.parametrize("text", [
    "",
    "ABMESH 2\n0 0 0 -1\n",
    "ABMESH 1\n3 1 3\n",
    "ABMESH 1\n3 1 3 -1\n0 0\n1 0\n0 1\n0 1 2\n0 1\n1 2\n",
    "ABMESH 1\n3 1 3 -1\n0 0\n1 0\n0 1\n0 1 5\n0 1\n1 2\n2 0\n",
    "ABMESH 1\n3 1 3 7\n0 0\n1 0\n0 1\n0 1 2\n0 1\n1 2\n2 0\n",
    "ABMESH 1\n3 1 3 -1\n0 0\n1 x\n0 1\n0 1 2\n0 1\n1 2\n2 0\n",
])
def test_malformed_files(tmp_path, text):
    path = tmp_path / "bad.abmesh"
    path.write_text(text)
    with pytest.raises(pl.MeshFormatError):
        pl.read_mesh(path)
