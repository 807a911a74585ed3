"""Planar domains around a pole, boundary moments and triangulations.

A domain is a list of closed polylines (outer boundary counterclockwise,
holes clockwise; the closing segment is implicit) together with the pole of
the Aharonov-Bohm potential.  The built-in mesher handles domains that are
star-shaped with respect to the pole, either simply connected or with one
star-shaped hole around the pole; anything else comes in through an ABMESH
file.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "PlanarDomain",
    "TriMesh",
    "MeshFormatError",
    "domain_measures",
    "boundary_moment",
    "brock_moment_check",
    "mesh_generate",
    "mesh_measures",
    "check_mesh",
    "write_mesh",
    "mesh_text",
    "read_mesh",
    "perturbed_disk",
]

# four sectors keep graded triangles near the pole close to isotropic; the
# pole error dominates, so more sectors buy little accuracy
FAN_SECTORS = 4
# radial grading exponent of the fan mesher (s -> s**grading)
DEFAULT_GRADING = 2.0
GAUSS_POINTS = 5
_GL_X, _GL_W = np.polynomial.legendre.leggauss(GAUSS_POINTS)


def _signed_area(pts: np.ndarray) -> float:
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _segments(pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return pts, np.roll(pts, -1, axis=0)


def _cross(ax, ay, bx, by):
    return ax * by - ay * bx


def _has_crossings(polys: Sequence[np.ndarray]) -> bool:
    """Proper or touching intersections between non-adjacent segments."""
    starts, ends, owner, index = [], [], [], []
    for c, p in enumerate(polys):
        a, b = _segments(p)
        starts.append(a)
        ends.append(b)
        owner.append(np.full(len(p), c))
        index.append(np.arange(len(p)))
    A, B = np.vstack(starts), np.vstack(ends)
    own, idx = np.concatenate(owner), np.concatenate(index)
    sizes = np.array([len(p) for p in polys])[own]
    n = len(A)
    for lo in range(0, n, 512):
        sl = slice(lo, min(lo + 512, n))
        a, b = A[sl, None, :], B[sl, None, :]
        c, d = A[None, :, :], B[None, :, :]
        r = b - a
        s = d - c
        d1 = _cross(r[..., 0], r[..., 1], c[..., 0] - a[..., 0], c[..., 1] - a[..., 1])
        d2 = _cross(r[..., 0], r[..., 1], d[..., 0] - a[..., 0], d[..., 1] - a[..., 1])
        d3 = _cross(s[..., 0], s[..., 1], a[..., 0] - c[..., 0], a[..., 1] - c[..., 1])
        d4 = _cross(s[..., 0], s[..., 1], b[..., 0] - c[..., 0], b[..., 1] - c[..., 1])
        hit = (d1 * d2 <= 0) & (d3 * d4 <= 0)
        # collinear pairs straddle trivially; require the projections to overlap
        collinear = (d1 == 0) & (d2 == 0)
        if np.any(collinear):
            rr = np.maximum(np.einsum("...k,...k->...", r, r), 1e-300)
            t0 = np.einsum("...k,...k->...", c - a, r) / rr
            t1 = np.einsum("...k,...k->...", d - a, r) / rr
            overlap = (np.maximum(t0, t1) >= 0) & (np.minimum(t0, t1) <= 1)
            hit &= ~collinear | overlap
        same = own[sl, None] == own[None, :]
        gap = np.abs(idx[sl, None] - idx[None, :])
        adjacent = same & ((gap <= 1) | (gap == sizes[sl, None] - 1))
        hit &= ~adjacent
        if np.any(hit):
            return True
    return False


def _point_segment_distance(p: np.ndarray, pts: np.ndarray) -> float:
    a, b = _segments(pts)
    ab = b - a
    t = np.clip(np.einsum("ij,ij->i", p - a, ab) / np.einsum("ij,ij->i", ab, ab), 0.0, 1.0)
    proj = a + t[:, None] * ab
    return float(np.min(np.hypot(*(proj - p).T)))


@dataclass
class PlanarDomain:
    """Closed polylines around a pole.

    ``boundaries[0]`` is the outer curve (counterclockwise), later entries
    are holes (clockwise).  Vertices are not repeated at the end.
    """

    boundaries: list[np.ndarray]
    pole: np.ndarray = field(default_factory=lambda: np.zeros(2))

    def __post_init__(self):
        self.boundaries = [np.ascontiguousarray(b, dtype=float) for b in self.boundaries]
        self.pole = np.asarray(self.pole, dtype=float).reshape(2)
        if not self.boundaries:
            raise ValueError("a domain needs at least one boundary curve")
        for b in self.boundaries:
            if b.ndim != 2 or b.shape[1] != 2 or len(b) < 3:
                raise ValueError("each boundary must be an (n >= 3, 2) array")
        if _has_crossings(self.boundaries):
            raise ValueError("boundary curves are not simple or intersect each other")
        for i, b in enumerate(self.boundaries):
            area = _signed_area(b)
            if (i == 0) != (area > 0):
                kind = "outer boundary must be counterclockwise" if i == 0 else "holes must be clockwise"
                raise ValueError(kind)
        scale = max(float(np.ptp(self.boundaries[0], axis=0).max()), 1e-300)
        for b in self.boundaries:
            if _point_segment_distance(self.pole, b) <= 1e-12 * scale:
                raise ValueError("the pole lies on the boundary")

    # construction helpers
    @classmethod
    def polar(cls, rho: Callable[[np.ndarray], np.ndarray], n: int = 256, pole=(0.0, 0.0)) -> "PlanarDomain":
        """Star-shaped polygon ``pole + rho(t) (cos t, sin t)`` at ``n`` equal angles."""
        t = 2 * math.pi * np.arange(n) / n
        r = np.broadcast_to(np.asarray(rho(t), dtype=float), t.shape)
        pole = np.asarray(pole, dtype=float)
        return cls([pole + np.column_stack([r * np.cos(t), r * np.sin(t)])], pole)

    @classmethod
    def disk(cls, radius: float = 1.0, n: int = 256, center=(0.0, 0.0), pole=None) -> "PlanarDomain":
        center = np.asarray(center, dtype=float)
        t = 2 * math.pi * np.arange(n) / n
        pts = center + radius * np.column_stack([np.cos(t), np.sin(t)])
        return cls([pts], center if pole is None else pole)

    @classmethod
    def rectangle(cls, width: float, height: float, pole=None) -> "PlanarDomain":
        pts = np.array([[0, 0], [width, 0], [width, height], [0, height]], dtype=float)
        return cls([pts], (0.5 * width, 0.5 * height) if pole is None else pole)

    @classmethod
    def square(cls, side: float = 1.0, pole=None) -> "PlanarDomain":
        return cls.rectangle(side, side, pole)

    @classmethod
    def annulus(cls, r_in: float, r_out: float, n: int = 256, pole=(0.0, 0.0)) -> "PlanarDomain":
        if not 0 < r_in < r_out:
            raise ValueError("annulus needs 0 < r_in < r_out")
        t = 2 * math.pi * np.arange(n) / n
        ring = np.column_stack([np.cos(t), np.sin(t)])
        pole = np.asarray(pole, dtype=float)
        return cls([pole + r_out * ring, pole + r_in * ring[::-1]], pole)

    @property
    def simply_connected(self) -> bool:
        return len(self.boundaries) == 1

    def translated_pole(self, pole) -> "PlanarDomain":
        return PlanarDomain([b.copy() for b in self.boundaries], pole)

    def scaled(self, factor: float) -> "PlanarDomain":
        """Dilation about the pole."""
        return PlanarDomain([self.pole + factor * (b - self.pole) for b in self.boundaries], self.pole)

    def radial_function(self, curve: int = 0) -> Callable[[np.ndarray], np.ndarray]:
        """``rho(t)`` with ``pole + rho(t) e^{it}`` on the given curve.

        Raises ``ValueError`` unless every ray from the pole meets the curve
        exactly once.
        """
        pts = self.boundaries[curve]
        if curve > 0:
            pts = pts[::-1]
        rel = pts - self.pole
        ang = np.arctan2(rel[:, 1], rel[:, 0])
        step = np.diff(np.append(ang, ang[0]))
        step = (step + math.pi) % (2 * math.pi) - math.pi
        if np.any(step <= 0) or abs(step.sum() - 2 * math.pi) > 1e-9:
            raise ValueError("domain is not star-shaped with respect to the pole")
        start = np.argmin(np.mod(ang, 2 * math.pi))
        rel = np.roll(rel, -start, axis=0)
        theta = np.mod(np.arctan2(rel[0, 1], rel[0, 0]), 2 * math.pi) + np.concatenate([[0.0], np.cumsum(np.roll(step, -start)[:-1])])
        a = rel
        b = np.roll(rel, -1, axis=0)

        def rho(t):
            t = np.mod(np.asarray(t, dtype=float), 2 * math.pi)
            i = np.searchsorted(theta, t, side="right") - 1
            i = np.where(i < 0, len(theta) - 1, i)
            d = np.stack([np.cos(t), np.sin(t)], axis=-1)
            pa, pb = a[i], b[i]
            e = pb - pa
            # pole + s d = pole + pa + w e  =>  s = cross(pa, e) / cross(d, e)
            return _cross(pa[..., 0], pa[..., 1], e[..., 0], e[..., 1]) / _cross(d[..., 0], d[..., 1], e[..., 0], e[..., 1])

        return rho


@dataclass(frozen=True)
class Measures:
    area: float
    perimeter: float


def domain_measures(domain: PlanarDomain) -> Measures:
    """Shoelace area (holes subtracted, via their clockwise orientation) and arc length."""
    area = sum(_signed_area(b) for b in domain.boundaries)
    perim = sum(float(np.sum(np.hypot(*(np.roll(b, -1, axis=0) - b).T))) for b in domain.boundaries)
    return Measures(area, perim)


def _segment_moment(a: np.ndarray, b: np.ndarray, pole: np.ndarray, p: float) -> float:
    x = 0.5 * (_GL_X + 1.0)
    w = 0.5 * _GL_W
    pts = a[:, None, :] + x[None, :, None] * (b - a)[:, None, :]
    r = np.hypot(pts[..., 0] - pole[0], pts[..., 1] - pole[1])
    length = np.hypot(*(b - a).T)
    return float(np.sum(length * (r**p @ w)))


def boundary_moment(domain: PlanarDomain, p: float) -> float:
    """``int_{boundary} |x - pole|^p ds`` by 5-point Gauss-Legendre per segment."""
    if p < 0:
        raise ValueError("moment exponent must be >= 0")
    return sum(_segment_moment(*_segments(b), domain.pole, p) for b in domain.boundaries)


@dataclass(frozen=True)
class MomentCheck:
    lhs: float
    rhs: float
    holds: bool

    @property
    def relative_gap(self) -> float:
        return (self.lhs - self.rhs) / self.rhs


def brock_moment_check(domain: PlanarDomain, p: float, rtol: float = 1e-3) -> MomentCheck:
    """``int_{boundary} r^p >= 2 pi^{(1-p)/2} |Omega|^{(p+1)/2}``.

    ``holds`` accepts a relative shortfall up to ``rtol``, which covers the
    polygonal approximation of the equality case (centred disks).
    """
    lhs = boundary_moment(domain, p)
    area = domain_measures(domain).area
    rhs = 2 * math.pi ** ((1 - p) / 2) * area ** ((p + 1) / 2)
    return MomentCheck(lhs, rhs, lhs >= rhs * (1 - rtol))


def perturbed_disk(seed: int, n: int = 256, amplitude: float = 0.2, modes: int = 5, pole=(0.0, 0.0)) -> PlanarDomain:
    """Star-shaped domain ``rho(t) = 1 + sum_m a_m cos(m t + phase_m)``.

    Coefficients are drawn from ``numpy.random.default_rng(seed)`` and scaled
    so that ``sum |a_m| <= amplitude < 1``.
    """
    if not 0 <= amplitude < 1:
        raise ValueError("amplitude must lie in [0, 1)")
    rng = np.random.default_rng(seed)
    m = np.arange(2, modes + 2)
    coef = rng.uniform(-1, 1, size=m.size) / m
    coef *= amplitude / max(np.abs(coef).sum(), 1e-300)
    phase = rng.uniform(0, 2 * math.pi, size=m.size)

    def rho(t):
        t = np.asarray(t)
        return 1.0 + np.sum(coef[:, None] * np.cos(m[:, None] * t[None, :] + phase[:, None]), axis=0)

    return PlanarDomain.polar(rho, n, pole)


# ---------------------------------------------------------------------------
# meshes


@dataclass
class TriMesh:
    """Triangulation; ``boundary_edges`` are oriented with the domain on the left."""

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    pole_vertex: int | None = None
    pole: np.ndarray = field(default_factory=lambda: np.zeros(2))

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=float)
        self.triangles = np.ascontiguousarray(self.triangles, dtype=np.int64)
        self.boundary_edges = np.ascontiguousarray(self.boundary_edges, dtype=np.int64).reshape(-1, 2)
        if self.pole_vertex is not None:
            self.pole_vertex = int(self.pole_vertex)
            self.pole = self.vertices[self.pole_vertex].copy()
        else:
            self.pole = np.asarray(self.pole, dtype=float).reshape(2)

    @property
    def boundary_vertices(self) -> np.ndarray:
        return np.unique(self.boundary_edges)

    def triangle_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        e1, e2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        return 0.5 * _cross(e1[:, 0], e1[:, 1], e2[:, 0], e2[:, 1])

    def min_angle(self) -> float:
        """Smallest interior angle over all triangles, in degrees."""
        p = self.vertices[self.triangles]
        worst = math.pi
        for i in range(3):
            u = p[:, (i + 1) % 3] - p[:, i]
            v = p[:, (i + 2) % 3] - p[:, i]
            cosang = np.einsum("ij,ij->i", u, v) / (np.hypot(*u.T) * np.hypot(*v.T))
            worst = min(worst, float(np.arccos(np.clip(cosang, -1, 1)).min()))
        return math.degrees(worst)


def mesh_measures(mesh: TriMesh) -> Measures:
    e = mesh.vertices[mesh.boundary_edges[:, 1]] - mesh.vertices[mesh.boundary_edges[:, 0]]
    return Measures(float(mesh.triangle_areas().sum()), float(np.hypot(*e.T).sum()))


def _edge_table(tris: np.ndarray):
    e = np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
    key = np.sort(e, axis=1)
    uniq, inv, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    return e, uniq, inv.reshape(-1), counts


@dataclass(frozen=True)
class MeshReport:
    conforming: bool
    counterclockwise: bool
    boundary_consistent: bool
    euler_ok: bool
    holes: int
    min_angle: float

    @property
    def valid(self) -> bool:
        return self.conforming and self.counterclockwise and self.boundary_consistent and self.euler_ok


def check_mesh(mesh: TriMesh) -> MeshReport:
    """Structural checks: edge sharing, orientation, boundary edges, Euler relation."""
    directed, uniq, inv, counts = _edge_table(mesh.triangles)
    conforming = bool(np.all(counts <= 2))
    # an interior edge appears once in each direction
    ccw = bool(np.all(mesh.triangle_areas() > 0))
    boundary_dir = directed[counts[inv] == 1]
    given = {tuple(e) for e in mesh.boundary_edges.tolist()}
    boundary_ok = given == {tuple(e) for e in boundary_dir.tolist()} and len(given) == len(mesh.boundary_edges)
    # boundary loops = number of cycles among boundary edges
    succ = {a: b for a, b in mesh.boundary_edges.tolist()}
    seen, loops = set(), 0
    for start in succ:
        if start in seen:
            continue
        loops += 1
        v = start
        while v not in seen and v in succ:
            seen.add(v)
            v = succ[v]
    holes = max(loops - 1, 0)
    used = np.unique(mesh.triangles)
    V, E, F = used.size, len(uniq), len(mesh.triangles)
    euler_ok = V - E + F == 1 - holes
    return MeshReport(conforming, ccw, boundary_ok, euler_ok, holes, mesh.min_angle())


def _reference_fan(level: int):
    """Refined square fan in the unit disk; boundary points sit on the circle.

    Returns vertices, triangles, boundary edges (ccw) and, for boundary
    vertices, their polar angle.
    """
    t = 2 * math.pi * np.arange(FAN_SECTORS) / FAN_SECTORS
    verts = [np.zeros(2)] + [np.array([math.cos(a), math.sin(a)]) for a in t]
    angle = {i + 1: float(a) for i, a in enumerate(t)}
    tris = [(0, i + 1, (i + 1) % FAN_SECTORS + 1) for i in range(FAN_SECTORS)]
    bnd = [(i + 1, (i + 1) % FAN_SECTORS + 1) for i in range(FAN_SECTORS)]
    for _ in range(level):
        mid: dict[tuple[int, int], int] = {}

        def midpoint(a, b):
            key = (a, b) if a < b else (b, a)
            if key not in mid:
                mid[key] = len(verts)
                verts.append(0.5 * (verts[a] + verts[b]))
            return mid[key]

        new_tris = []
        for a, b, c in tris:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_tris += [(a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca)]
        new_bnd = []
        for a, b in bnd:
            m = mid[(a, b) if a < b else (b, a)]
            ta, tb = angle[a], angle[b]
            if tb <= ta:
                tb += 2 * math.pi
            tm = 0.5 * (ta + tb) % (2 * math.pi)
            angle[m] = tm
            verts[m] = np.array([math.cos(tm), math.sin(tm)])
            new_bnd += [(a, m), (m, b)]
        tris, bnd = new_tris, new_bnd
    return np.array(verts), np.array(tris), np.array(bnd), angle


def _fan_mesh(domain: PlanarDomain, level: int, grading: float) -> TriMesh:
    rho = domain.radial_function(0)
    ref, tris, bnd, angle = _reference_fan(level)
    s = np.hypot(ref[:, 0], ref[:, 1])
    t = np.arctan2(ref[:, 1], ref[:, 0])
    for i, a in angle.items():
        s[i], t[i] = 1.0, a
    r = s**grading * rho(t)
    verts = domain.pole + np.column_stack([r * np.cos(t), r * np.sin(t)])
    verts[0] = domain.pole
    return TriMesh(verts, tris, bnd, pole_vertex=0)


def _annular_mesh(domain: PlanarDomain, level: int) -> TriMesh:
    """Structured mesh between two star-shaped curves around the pole."""
    rho_out = domain.radial_function(0)
    rho_in = domain.radial_function(1)
    probe = np.linspace(0, 2 * math.pi, 1024, endpoint=False)
    if np.any(rho_in(probe) >= rho_out(probe)):
        raise ValueError("inner curve must lie inside the outer curve")
    # geometric rings; the sector count makes the cells roughly square
    log_ratio = float(np.mean(np.log(rho_out(probe) / rho_in(probe))))
    sectors = max(3, round(2 * math.pi / log_ratio))
    n_t = sectors * 2**level
    n_r = 2**level
    t = 2 * math.pi * np.arange(n_t) / n_t
    ri, ro = rho_in(t), rho_out(t)
    frac = np.arange(n_r + 1) / n_r
    r = ri[None, :] * (ro / ri)[None, :] ** frac[:, None]
    verts = domain.pole + np.stack([r * np.cos(t), r * np.sin(t)], axis=-1).reshape(-1, 2)

    def vid(i, j):
        return i * n_t + j % n_t

    tris = []
    for i in range(n_r):
        for j in range(n_t):
            a, b, c, d = vid(i, j), vid(i, j + 1), vid(i + 1, j + 1), vid(i + 1, j)
            # alternate the diagonal so the mesh has no preferred direction
            if (i + j) % 2 == 0:
                tris += [(a, c, b), (a, d, c)]
            else:
                tris += [(a, d, b), (b, d, c)]
    outer = [(vid(n_r, j), vid(n_r, j + 1)) for j in range(n_t)]
    inner = [(vid(0, j + 1), vid(0, j)) for j in range(n_t)]
    return TriMesh(verts, np.array(tris), np.array(outer + inner), None, domain.pole)


def mesh_generate(domain: PlanarDomain, refinement_level: int, grading: float = DEFAULT_GRADING) -> TriMesh:
    """Deterministic triangulation of a star-shaped domain.

    Simply connected domains get a fan of ``FAN_SECTORS`` triangles from the
    pole, refined ``refinement_level`` times by 4-way splitting with new
    boundary points placed on the exact boundary (the polar angle is bisected
    and the radial function evaluated).  Every refinement halves the ring of
    vertices nearest the pole.  ``grading > 1`` additionally pulls vertices
    towards the pole along rays (``s -> s**grading``), keeping the topology.

    Domains with one hole around the pole get a structured polar mesh with
    the same triangle count scaling ``4**refinement_level``.
    """
    if refinement_level < 0:
        raise ValueError("refinement level must be >= 0")
    if grading < 1.0:
        raise ValueError("grading exponent must be >= 1")
    if domain.simply_connected:
        return _fan_mesh(domain, refinement_level, grading)
    if len(domain.boundaries) == 2:
        return _annular_mesh(domain, refinement_level)
    raise ValueError("built-in mesher supports at most one hole")


# ---------------------------------------------------------------------------
# ABMESH files


class MeshFormatError(ValueError):
    pass


def mesh_text(mesh: TriMesh) -> str:
    """ABMESH text; floats use the shortest round-trip repr."""
    pole = -1 if mesh.pole_vertex is None else mesh.pole_vertex
    lines = ["ABMESH 1", f"{len(mesh.vertices)} {len(mesh.triangles)} {len(mesh.boundary_edges)} {pole}"]
    lines += [f"{float(x)!r} {float(y)!r}" for x, y in mesh.vertices]
    lines += [f"{a} {b} {c}" for a, b, c in mesh.triangles.tolist()]
    lines += [f"{a} {b}" for a, b in mesh.boundary_edges.tolist()]
    return "\n".join(lines) + "\n"


def write_mesh(mesh: TriMesh, path) -> None:
    Path(path).write_text(mesh_text(mesh))


def read_mesh(path, pole=None) -> TriMesh:
    """Parse an ABMESH file.

    When the file has no pole vertex (pole index -1) the pole position is
    taken from ``pole`` (default: the origin).
    """
    text = Path(path).read_text().split("\n")
    rows = [ln.split() for ln in text if ln.strip()]
    if not rows or rows[0] != ["ABMESH", "1"]:
        raise MeshFormatError("missing 'ABMESH 1' header")
    try:
        nv, nt, nb, ip = (int(x) for x in rows[1])
    except (IndexError, ValueError):
        raise MeshFormatError("bad counts line") from None
    body = rows[2:]
    if len(body) != nv + nt + nb or min(nv, nt, nb) < 0:
        raise MeshFormatError(f"expected {nv + nt + nb} data lines, found {len(body)}")
    try:
        verts = np.array([[float(x) for x in r] for r in body[:nv]], dtype=float).reshape(nv, 2)
        tris = np.array([[int(x) for x in r] for r in body[nv:nv + nt]], dtype=np.int64).reshape(nt, 3)
        bnd = np.array([[int(x) for x in r] for r in body[nv + nt:]], dtype=np.int64).reshape(nb, 2)
    except ValueError as exc:
        raise MeshFormatError(f"malformed data line: {exc}") from None
    if any(len(r) != 2 for r in body[:nv]) or any(len(r) != 3 for r in body[nv:nv + nt]):
        raise MeshFormatError("wrong number of fields on a vertex or triangle line")
    for arr in (tris, bnd):
        if arr.size and (arr.min() < 0 or arr.max() >= nv):
            raise MeshFormatError("vertex index out of range")
    if ip >= nv or ip < -1:
        raise MeshFormatError("pole index out of range")
    return TriMesh(verts, tris, bnd, None if ip == -1 else ip, np.zeros(2) if pole is None else pole)
