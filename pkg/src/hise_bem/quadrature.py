"""Quadrature on flat triangles: regular, Duffy-singular and adaptive near-field rules."""

from __future__ import annotations

import numpy as np

# Dunavant degree-5 rule, barycentric coordinates and weights summing to 1.
_A1, _B1 = 0.059715871789770, 0.470142064105115
_A2, _B2 = 0.797426985353087, 0.101286507323456
_W0, _W1, _W2 = 0.225, 0.132394152788506, 0.125939180544827

TRI7_BARY = np.array(
    [
        [1 / 3, 1 / 3, 1 / 3],
        [_A1, _B1, _B1],
        [_B1, _A1, _B1],
        [_B1, _B1, _A1],
        [_A2, _B2, _B2],
        [_B2, _A2, _B2],
        [_B2, _B2, _A2],
    ]
)
TRI7_WEIGHTS = np.array([_W0, _W1, _W1, _W1, _W2, _W2, _W2])


def triangle_areas(tris: np.ndarray) -> np.ndarray:
    """Areas of triangles given as ``(..., 3, 3)`` vertex arrays."""
    e1 = tris[..., 1, :] - tris[..., 0, :]
    e2 = tris[..., 2, :] - tris[..., 0, :]
    return 0.5 * np.linalg.norm(np.cross(e1, e2), axis=-1)


def triangle_diameters(tris: np.ndarray) -> np.ndarray:
    d01 = np.linalg.norm(tris[..., 1, :] - tris[..., 0, :], axis=-1)
    d12 = np.linalg.norm(tris[..., 2, :] - tris[..., 1, :], axis=-1)
    d20 = np.linalg.norm(tris[..., 0, :] - tris[..., 2, :], axis=-1)
    return np.maximum(np.maximum(d01, d12), d20)


def regular_rule(tris: np.ndarray):
    """Seven-point rule mapped onto each triangle.

    Returns ``points`` of shape ``(F, 7, 3)`` and ``weights`` ``(F, 7)``
    (already multiplied by the triangle area).
    """
    pts = np.einsum("qa,fad->fqd", TRI7_BARY, tris)
    w = TRI7_WEIGHTS[None, :] * triangle_areas(tris)[:, None]
    return pts, w


def subdivide(tris: np.ndarray) -> np.ndarray:
    """Split every triangle into four at its edge midpoints: ``(F,3,3) -> (4F,3,3)``."""
    a, b, c = tris[:, 0], tris[:, 1], tris[:, 2]
    ab, bc, ca = 0.5 * (a + b), 0.5 * (b + c), 0.5 * (c + a)
    out = np.stack(
        [
            np.stack([a, ab, ca], axis=1),
            np.stack([ab, b, bc], axis=1),
            np.stack([ca, bc, c], axis=1),
            np.stack([ab, bc, ca], axis=1),
        ],
        axis=1,
    )
    return out.reshape(-1, 3, 3)


def duffy_rule(order: int = 7):
    """Gauss-Legendre product rule on the square mapped to a triangle whose
    first vertex carries a ``1/r`` singularity.

    Returns reference coordinates ``(u, v)`` and weights such that the
    point ``P0 + u (P1 - P0) + u v (P2 - P1)`` carries weight
    ``w * 2 * area``.
    """
    g, gw = np.polynomial.legendre.leggauss(order)
    g = 0.5 * (g + 1.0)
    gw = 0.5 * gw
    u, v = np.meshgrid(g, g, indexing="ij")
    wu, wv = np.meshgrid(gw, gw, indexing="ij")
    return u.ravel(), v.ravel(), (wu * wv * u).ravel()


def singular_rule(tris: np.ndarray, points: np.ndarray, order: int = 7):
    """Rule for integrating a weakly singular kernel centred at ``points``
    (one point inside each triangle).

    Each triangle is split into three sub-triangles at its point and each
    piece gets a Duffy rule.  Returns flattened ``pts``, ``w`` and ``owner``
    (index of the triangle a node belongs to).
    """
    F = tris.shape[0]
    u, v, wref = duffy_rule(order)
    chunks_p, chunks_w = [], []
    for k in range(3):
        p1 = tris[:, k]
        p2 = tris[:, (k + 1) % 3]
        p0 = points
        area = triangle_areas(np.stack([p0, p1, p2], axis=1))
        pts = (
            p0[:, None, :]
            + u[None, :, None] * (p1 - p0)[:, None, :]
            + (u * v)[None, :, None] * (p2 - p1)[:, None, :]
        )
        chunks_p.append(pts)
        chunks_w.append(wref[None, :] * 2.0 * area[:, None])
    pts = np.concatenate(chunks_p, axis=1)
    w = np.concatenate(chunks_w, axis=1)
    owner = np.repeat(np.arange(F), pts.shape[1])
    return pts.reshape(-1, 3), w.ravel(), owner


def adaptive_rule(targets: np.ndarray, tris: np.ndarray, eta: float = 2.0, max_level: int = 5):
    """Nearly-singular rule: refine each triangle towards its target.

    ``targets[i]`` and ``tris[i]`` form pair ``i``.  A (sub-)triangle is
    accepted with the seven-point rule once the distance from the target to
    its centroid is at least ``eta`` times its diameter, or ``max_level``
    bisections have been made.  Returns flattened ``pts``, ``w``, ``owner``.
    """
    owner = np.arange(len(tris))
    cur = np.asarray(tris, float)
    out_p, out_w, out_o = [], [], []
    for level in range(max_level + 1):
        if len(cur) == 0:
            break
        cen = cur.mean(axis=1)
        dist = np.linalg.norm(targets[owner] - cen, axis=1)
        done = dist >= eta * triangle_diameters(cur)
        if level == max_level:
            done[:] = True
        if done.any():
            p, w = regular_rule(cur[done])
            out_p.append(p.reshape(-1, 3))
            out_w.append(w.ravel())
            out_o.append(np.repeat(owner[done], 7))
        rest = ~done
        cur = subdivide(cur[rest])
        owner = np.repeat(owner[rest], 4)
    return np.concatenate(out_p), np.concatenate(out_w), np.concatenate(out_o)
