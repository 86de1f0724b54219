"""Closed triangulated surfaces: ingestion, icospheres, inside tests and volume quadrature."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from . import _backend
from .errors import DegenerateFace, EmptyInterior, NonWatertight, OnSurface, ParseError
from .quadrature import regular_rule, triangle_diameters


@dataclass(frozen=True, eq=False)
class TriangleMesh:
    """Watertight, outward-oriented triangle mesh.

    Construct with :meth:`from_arrays` (or the loaders below) so that the
    invariants are checked and the orientation fixed.
    """

    vertices: np.ndarray
    faces: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @classmethod
    def from_arrays(cls, vertices, faces, fix_orientation: bool = True) -> "TriangleMesh":
        v = np.ascontiguousarray(vertices, dtype=float)
        f = np.ascontiguousarray(faces, dtype=np.int64)
        if v.ndim != 2 or v.shape[1] != 3:
            raise ParseError("vertices must have shape (n, 3)")
        if f.ndim != 2 or f.shape[1] != 3:
            raise ParseError("faces must be triangles, shape (m, 3)")
        if f.size and (f.min() < 0 or f.max() >= len(v)):
            raise ParseError("face index out of range")
        _check_watertight(f)
        if fix_orientation:
            f = _orient_consistently(f)
        mesh = cls(v, f)
        _check_degenerate(mesh)
        if fix_orientation and mesh.signed_volume < 0:
            mesh = cls(v, np.ascontiguousarray(f[:, ::-1]))
        return mesh

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    @cached_property
    def triangles(self) -> np.ndarray:
        return self.vertices[self.faces]

    @cached_property
    def centroids(self) -> np.ndarray:
        return self.triangles.mean(axis=1)

    @cached_property
    def _cross(self) -> np.ndarray:
        t = self.triangles
        return np.cross(t[:, 1] - t[:, 0], t[:, 2] - t[:, 0])

    @cached_property
    def areas(self) -> np.ndarray:
        return 0.5 * np.linalg.norm(self._cross, axis=1)

    @cached_property
    def normals(self) -> np.ndarray:
        c = self._cross
        return c / np.linalg.norm(c, axis=1)[:, None]

    @cached_property
    def diameters(self) -> np.ndarray:
        return triangle_diameters(self.triangles)

    @property
    def total_area(self) -> float:
        return float(self.areas.sum())

    @property
    def signed_volume(self) -> float:
        """Enclosed volume by the divergence theorem (positive when outward)."""
        return float(np.sum(self.areas * np.einsum("ij,ij->i", self.normals, self.centroids)) / 3.0)

    @property
    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    @cached_property
    def quadrature(self) -> tuple[np.ndarray, np.ndarray]:
        """Seven-point rule on every face: points ``(F,7,3)``, weights ``(F,7)``."""
        return regular_rule(self.triangles)

    def scaled(self, factors) -> "TriangleMesh":
        """Copy with vertices multiplied componentwise by ``factors``."""
        return TriangleMesh.from_arrays(self.vertices * np.asarray(factors, float), self.faces)

    def write_off(self, path) -> None:
        lines = ["OFF", f"{len(self.vertices)} {len(self.faces)} 0"]
        lines += [f"{x:.17g} {y:.17g} {z:.17g}" for x, y, z in self.vertices]
        lines += [f"3 {a} {b} {c}" for a, b, c in self.faces]
        Path(path).write_text("\n".join(lines) + "\n")


def _edge_table(faces):
    e = np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]])
    und = np.sort(e, axis=1)
    return e, und


def _check_watertight(faces):
    if len(faces) < 4:
        raise NonWatertight("a closed surface needs at least four faces")
    _, und = _edge_table(faces)
    _, counts = np.unique(und, axis=0, return_counts=True)
    if np.any(counts != 2):
        bad = int(np.sum(counts != 2))
        raise NonWatertight(f"{bad} edges are not shared by exactly two faces")


def _orient_consistently(faces):
    """Flip faces so that every interior edge is traversed in opposite directions."""
    faces = faces.copy()
    F = len(faces)
    edge_faces: dict[tuple[int, int], list[int]] = {}
    for fi, (a, b, c) in enumerate(faces):
        for u, v in ((a, b), (b, c), (c, a)):
            edge_faces.setdefault((min(u, v), max(u, v)), []).append(fi)
    seen = np.zeros(F, dtype=bool)
    for start in range(F):
        if seen[start]:
            continue
        seen[start] = True
        queue = deque([start])
        while queue:
            fi = queue.popleft()
            a, b, c = faces[fi]
            for u, v in ((a, b), (b, c), (c, a)):
                for nb in edge_faces[(min(u, v), max(u, v))]:
                    if nb == fi or seen[nb]:
                        continue
                    na, nb_, nc = faces[nb]
                    directed = {(na, nb_), (nb_, nc), (nc, na)}
                    if (u, v) in directed:
                        faces[nb] = faces[nb][::-1]
                    seen[nb] = True
                    queue.append(nb)
    return faces


def _check_degenerate(mesh: TriangleMesh):
    lo, hi = mesh.bounding_box
    diag2 = float(np.sum((hi - lo) ** 2))
    if np.any(mesh.areas <= 1e-12 * diag2):
        raise DegenerateFace(f"{int(np.sum(mesh.areas <= 1e-12 * diag2))} degenerate faces")


def load_off(path) -> TriangleMesh:
    """Read an OFF file (triangles only, 0-based indices)."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read mesh file {path}: {exc}") from exc
    tokens_lines = [ln.split("#", 1)[0].split() for ln in text.splitlines()]
    tokens_lines = [t for t in tokens_lines if t]
    if not tokens_lines or tokens_lines[0][0] != "OFF":
        raise ParseError(f"{path}: missing OFF header")
    head = tokens_lines[0][1:]
    rest = tokens_lines[1:]
    if not head:
        if not rest:
            raise ParseError(f"{path}: missing counts line")
        head, rest = rest[0], rest[1:]
    try:
        nv, nf = int(head[0]), int(head[1])
    except (IndexError, ValueError) as exc:
        raise ParseError(f"{path}: bad counts line {' '.join(head)!r}") from exc
    if len(rest) < nv + nf:
        raise ParseError(f"{path}: expected {nv} vertices and {nf} faces, file is truncated")
    try:
        verts = np.array([[float(t) for t in ln[:3]] for ln in rest[:nv]])
        faces = []
        for ln in rest[nv : nv + nf]:
            k = int(ln[0])
            if k != 3 or len(ln) < 4:
                raise ParseError(f"{path}: only triangular faces are supported")
            faces.append([int(t) for t in ln[1:4]])
    except ValueError as exc:
        raise ParseError(f"{path}: malformed numeric data") from exc
    if verts.shape != (nv, 3):
        raise ParseError(f"{path}: vertex lines need three coordinates")
    return TriangleMesh.from_arrays(verts, np.array(faces, dtype=np.int64).reshape(-1, 3))


def icosphere(R: float = 1.0, subdivisions: int = 0) -> TriangleMesh:
    """Geodesic sphere with ``20 * 4**subdivisions`` faces and vertices on radius ``R``."""
    if R <= 0:
        raise ValueError("radius must be positive")
    t = (1.0 + 5.0**0.5) / 2.0
    verts = [
        (-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0),
        (0, -1, t), (0, 1, t), (0, -1, -t), (0, 1, -t),
        (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1),
    ]
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    verts = [np.array(v, float) / np.linalg.norm(v) for v in verts]
    for _ in range(subdivisions):
        cache: dict[tuple[int, int], int] = {}

        def mid(a, b):
            key = (a, b) if a < b else (b, a)
            if key not in cache:
                p = verts[a] + verts[b]
                verts.append(p / np.linalg.norm(p))
                cache[key] = len(verts) - 1
            return cache[key]

        new = []
        for a, b, c in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new
    return TriangleMesh.from_arrays(R * np.array(verts), np.array(faces, dtype=np.int64))


def closest_distance(mesh: TriangleMesh, points) -> np.ndarray:
    """Unsigned distance from each point to the surface."""
    P = np.atleast_2d(np.asarray(points, float))
    tri = mesh.triangles
    out = np.empty(len(P))
    chunk = max(1, 2_000_000 // max(1, mesh.n_faces))
    for s in range(0, len(P), chunk):
        p = P[s : s + chunk, None, :]
        out[s : s + chunk] = np.sqrt(_point_triangle_dist2(p, tri[None, :, 0], tri[None, :, 1], tri[None, :, 2]).min(axis=1))
    return out


def _point_triangle_dist2(p, a, b, c):
    """Squared distance from points to triangles (closest-point regions)."""
    ab, ac, ap = b - a, c - a, p - a
    d1 = np.einsum("...k,...k", ab, ap)
    d2 = np.einsum("...k,...k", ac, ap)
    bp = p - b
    d3 = np.einsum("...k,...k", ab, bp)
    d4 = np.einsum("...k,...k", ac, bp)
    cp = p - c
    d5 = np.einsum("...k,...k", ab, cp)
    d6 = np.einsum("...k,...k", ac, cp)
    va = d3 * d6 - d5 * d4
    vb = d5 * d2 - d1 * d6
    vc = d1 * d4 - d3 * d2
    with np.errstate(divide="ignore", invalid="ignore"):
        denom = va + vb + vc
        v = vb / denom
        w = vc / denom
        q = a + v[..., None] * ab + w[..., None] * ac
        # vertex and edge regions
        t_ab = d1 / (d1 - d3)
        t_ac = d2 / (d2 - d6)
        t_bc = (d4 - d3) / ((d4 - d3) + (d5 - d6))
    q = np.where(((vc <= 0) & (d1 >= 0) & (d3 <= 0))[..., None], a + t_ab[..., None] * ab, q)
    q = np.where(((vb <= 0) & (d2 >= 0) & (d6 <= 0))[..., None], a + t_ac[..., None] * ac, q)
    q = np.where(((va <= 0) & ((d4 - d3) >= 0) & ((d5 - d6) >= 0))[..., None], b + t_bc[..., None] * (c - b), q)
    q = np.where(((d1 <= 0) & (d2 <= 0))[..., None], a, q)
    q = np.where(((d3 >= 0) & (d4 <= d3))[..., None], b, q)
    q = np.where(((d6 >= 0) & (d5 <= d6))[..., None], c, q)
    return np.sum((p - q) ** 2, axis=-1)


def winding_numbers(mesh: TriangleMesh, points) -> np.ndarray:
    """Generalized winding number (solid angle / 4 pi) of each point."""
    P = np.ascontiguousarray(np.atleast_2d(np.asarray(points, float)))
    return _backend.winding_numbers(P, np.ascontiguousarray(mesh.triangles))


def is_inside(mesh: TriangleMesh, p, tol: float = 1e-10) -> bool:
    p = np.asarray(p, float).reshape(1, 3)
    lo, hi = mesh.bounding_box
    scale = float(np.linalg.norm(hi - lo))
    if closest_distance(mesh, p)[0] <= tol * scale:
        raise OnSurface(f"point {p[0].tolist()} lies on the surface")
    return bool(round(float(winding_numbers(mesh, p)[0])) == 1)


@dataclass(frozen=True)
class InteriorQuadrature:
    """Grid-cell centres inside the surface with their (inside) cell volumes."""

    points: np.ndarray
    weights: np.ndarray
    spacing: np.ndarray

    @property
    def volume(self) -> float:
        return float(self.weights.sum())

    def __len__(self) -> int:
        return len(self.weights)


def _boundary_cells(mesh: TriangleMesh, centres, h):
    """Indices of grid cells that may intersect the surface."""
    from scipy.spatial import cKDTree

    half = 0.5 * float(np.linalg.norm(h))
    reach = float(np.max(np.linalg.norm(mesh.triangles - mesh.centroids[:, None], axis=-1)))
    tree = cKDTree(mesh.centroids)
    d, _ = tree.query(centres)
    cand = np.flatnonzero(d - reach <= half)
    # distance to the faces with the nearest centroids only
    _, idx = tree.query(centres[cand], k=min(16, mesh.n_faces))
    tri = mesh.triangles[idx]
    d2 = _point_triangle_dist2(centres[cand, None, :], tri[:, :, 0], tri[:, :, 1], tri[:, :, 2])
    return cand[np.sqrt(d2.min(axis=1)) <= half]


def interior_quadrature(mesh: TriangleMesh, resolution: int = 32, boundary_samples: int = 1) -> InteriorQuadrature:
    """Uniform ``resolution^3`` grid over the bounding box, inside cells kept.

    With ``boundary_samples = k > 1`` every cell cut by the surface is split
    into ``k^3`` sub-cells and weighted by its inside fraction instead of by
    the classification of its centre.
    """
    if resolution < 8:
        raise ValueError("resolution must be at least 8")
    if boundary_samples < 1:
        raise ValueError("boundary_samples must be positive")
    lo, hi = mesh.bounding_box
    h = (hi - lo) / resolution
    axes = [lo[k] + h[k] * (np.arange(resolution) + 0.5) for k in range(3)]
    g = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
    frac = (winding_numbers(mesh, g) > 0.5).astype(float)
    if boundary_samples > 1:
        k = boundary_samples
        cut = _boundary_cells(mesh, g, h)
        t = (np.arange(k) + 0.5) / k - 0.5
        offs = np.stack(np.meshgrid(t, t, t, indexing="ij"), axis=-1).reshape(-1, 3) * h
        sub = (g[cut, None, :] + offs[None]).reshape(-1, 3)
        frac[cut] = (winding_numbers(mesh, sub) > 0.5).reshape(len(cut), -1).mean(axis=1)
    inside = frac > 0
    if not inside.any():
        raise EmptyInterior("no grid cell centre classified inside the surface")
    pts = np.ascontiguousarray(g[inside])
    return InteriorQuadrature(pts, frac[inside] * float(np.prod(h)), h)
