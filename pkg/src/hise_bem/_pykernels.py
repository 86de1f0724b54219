"""Pure-numpy implementation of the assembly hot loops.

Mirrors the compiled ``_ckernels`` module function for function; selected
automatically when the extension is unavailable.
"""

from __future__ import annotations

import numpy as np

from .kernels import radial_profiles, traction_from_profiles
from .materials import Material

KIND_SINGLE = 0
KIND_TRACTION = 1

_CHUNK = 200_000


def _blocks(kind, d, nu, m, omega, skip_static):
    """3x3 kernel blocks for difference vectors ``d = x - y`` (any leading shape)."""
    r = np.linalg.norm(d, axis=-1)
    xh = d / r[..., None]
    A, B, dA, dB = radial_profiles(r, m, omega, skip_static)
    if kind == KIND_SINGLE:
        return A[..., None, None] * np.eye(3) + B[..., None, None] * (xh[..., :, None] * xh[..., None, :])
    return traction_from_profiles(A, B, dA, dB, r, xh, nu, m)


def _dtype(omega):
    return float if omega == 0.0 else complex


def face_matrix(kind, x, nu, qpts, qw, skip, m: Material, omega: float, skip_static=False, out=None):
    """Dense ``(3M, 3F)`` matrix of face integrals seen from the targets ``x``.

    ``qpts`` ``(F,Q,3)`` and ``qw`` ``(F,Q)`` define the face rule; face
    ``skip[i]`` (if >= 0) is left as zero in row block ``i``.
    """
    M, F, Q = len(x), qpts.shape[0], qpts.shape[1]
    if out is None:
        out = np.zeros((3 * M, 3 * F), dtype=_dtype(omega))
    view = out.reshape(M, 3, F, 3)
    step = max(1, _CHUNK // (F * Q))
    for s in range(0, M, step):
        e = min(M, s + step)
        d = x[s:e, None, None, :] - qpts[None]
        sk = skip[s:e]
        hit = sk >= 0
        # keep the skipped face away from the singularity, weight zero below
        if hit.any():
            d[hit, sk[hit]] = 1.0
        n = np.broadcast_to(nu[s:e, None, None, :], d.shape)
        G = _blocks(kind, d, n, m, omega, skip_static)
        w = np.broadcast_to(qw[None], (e - s, F, Q)).copy()
        if hit.any():
            w[hit, sk[hit]] = 0.0
        blk = np.einsum("mfq,mfqij->mifj", w, G)
        view[s:e] = blk if np.iscomplexobj(out) else blk.real
    return out


def pair_sums(kind, tx, tnu, pts, w, owner, npairs, m: Material, omega: float, skip_static=False):
    """Per-pair sums ``sum_q w_q K(tx_q, pts_q)``, accumulated by ``owner``.

    Returns ``(npairs, 3, 3)``.
    """
    res = np.zeros((npairs, 3, 3), dtype=_dtype(omega) if not skip_static else complex)
    for s in range(0, len(w), _CHUNK):
        e = min(len(w), s + _CHUNK)
        G = _blocks(kind, tx[s:e] - pts[s:e], tnu[s:e], m, omega, skip_static)
        G = G * w[s:e, None, None]
        if np.iscomplexobj(res):
            np.add.at(res, owner[s:e], G)
        else:
            np.add.at(res, owner[s:e], G.real)
    return res


def potential(x, qpts, qw, qface, dens, m: Material, omega: float):
    """Single-layer potential ``(M, 3, C)`` of face densities ``dens`` ``(F, 3, C)``.

    The flat rule ``qpts``/``qw`` carries the face index of each node in
    ``qface``.
    """
    M = len(x)
    cplx = omega != 0.0 or np.iscomplexobj(dens)
    out = np.zeros((M, 3, dens.shape[2]), dtype=complex if cplx else float)
    dq = dens[qface] * qw[:, None, None]
    step = max(1, _CHUNK // len(qw))
    for s in range(0, M, step):
        e = min(M, s + step)
        d = x[s:e, None, :] - qpts[None]
        G = _blocks(KIND_SINGLE, d, None, m, omega, False)
        out[s:e] = np.einsum("mqij,qjc->mic", G, dq)
    return out


def winding_numbers(points, tris):
    """Solid angle subtended by the triangles at each point, over 4 pi."""
    out = np.empty(len(points))
    step = max(1, _CHUNK // len(tris))
    for s in range(0, len(points), step):
        p = points[s : s + step, None, None, :]
        v = tris[None] - p
        a, b, c = v[..., 0, :], v[..., 1, :], v[..., 2, :]
        la, lb, lc = (np.linalg.norm(t, axis=-1) for t in (a, b, c))
        num = np.einsum("...k,...k", a, np.cross(b, c))
        den = (
            la * lb * lc
            + np.einsum("...k,...k", a, b) * lc
            + np.einsum("...k,...k", b, c) * la
            + np.einsum("...k,...k", c, a) * lb
        )
        out[s : s + step] = np.sum(2.0 * np.arctan2(num, den), axis=1) / (4.0 * np.pi)
    return out
