"""Collocation discretisation of the elastic layer potentials.

Unknowns are piecewise-constant vector densities on the faces of a
:class:`~hise_bem.geometry.TriangleMesh`, collocated at face centroids, so a
boundary operator is a dense ``3F x 3F`` matrix whose ``(i, j)`` block is the
integral of a 3x3 kernel over face ``j`` seen from centroid ``i``.

Quadrature
----------
* well separated pairs: seven-point rule;
* near pairs (centroid closer than ``eta`` face diameters): adaptive
  four-way subdivision;
* self blocks of the single layer: Duffy rule on three sub-triangles.

The self blocks of the Neumann-Poincare adjoint ``K*`` are not integrated.
The static part is completed so that ``K`` maps every translation to half of
itself exactly in the discrete pairing; the frequency correction
``T^omega - T^0`` is bounded and integrated with the Duffy rule.

All inner products use the area-weighted pairing
``(phi, psi) = sum_f area_f phi_f . psi_f``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg as sla
from scipy.sparse.linalg import LinearOperator, gmres
from scipy.spatial import cKDTree

from . import _backend
from .errors import NullSpaceDimensionMismatch, QuadratureFailure
from .geometry import TriangleMesh
from .materials import Material
from .quadrature import adaptive_rule, regular_rule, singular_rule

log = logging.getLogger(__name__)

SINGLE_LAYER = "single-layer"
NP_ADJOINT = "np-adjoint"

NEAR_ETA = 2.0
NEAR_LEVELS = 5
DUFFY_ORDER = 7


@dataclass(frozen=True, eq=False)
class BoundaryOperator:
    """Dense ``3F x 3F`` matrix of a discretised boundary operator."""

    matrix: np.ndarray
    kind: str
    material: Material
    omega: float
    n_faces: int

    @property
    def shape(self):
        return self.matrix.shape

    def __matmul__(self, v):
        return self.matrix @ v

    def blocks(self) -> np.ndarray:
        """View with shape ``(F, 3, F, 3)``."""
        return self.matrix.reshape(self.n_faces, 3, self.n_faces, 3)


def near_pairs(mesh: TriangleMesh, targets, eta: float = NEAR_ETA, exclude_self: bool = True):
    """Pairs ``(target, face)`` closer than ``eta`` face diameters (centroid distance)."""
    targets = np.atleast_2d(targets)
    diam = mesh.diameters
    tree = cKDTree(mesh.centroids)
    hits = tree.query_ball_point(targets, eta * diam.max())
    ti = np.repeat(np.arange(len(targets)), [len(h) for h in hits])
    fj = np.fromiter((j for h in hits for j in h), dtype=np.int64, count=len(ti))
    if len(ti) == 0:
        return ti.astype(np.int64), fj
    dist = np.linalg.norm(targets[ti] - mesh.centroids[fj], axis=1)
    keep = dist < eta * diam[fj]
    if exclude_self:
        keep &= ti != fj
    return ti[keep].astype(np.int64), fj[keep]


def _near_blocks(kind, mesh, targets, tnormals, ti, fj, m, omega, skip_static=False):
    if len(ti) == 0:
        return np.zeros((0, 3, 3))
    pts, w, owner = adaptive_rule(targets[ti], mesh.triangles[fj], eta=NEAR_ETA, max_level=NEAR_LEVELS)
    return _backend.pair_sums(
        kind, targets[ti][owner], tnormals[ti][owner], pts, w, owner, len(ti), m, omega, skip_static
    )


def _self_blocks(kind, mesh, m, omega, skip_static=False):
    pts, w, owner = singular_rule(mesh.triangles, mesh.centroids, DUFFY_ORDER)
    c = mesh.centroids[owner]
    n = mesh.normals[owner]
    return _backend.pair_sums(kind, c, n, pts, w, owner, mesh.n_faces, m, omega, skip_static)


def _check_mesh(mesh: TriangleMesh):
    if not np.all(np.isfinite(mesh.areas)) or np.any(mesh.areas <= 0):
        raise QuadratureFailure("mesh has degenerate faces")


def _assemble(kind, mesh, m, omega, out=None):
    _check_mesh(mesh)
    qp, qw = mesh.quadrature
    F = mesh.n_faces
    mat = _backend.face_matrix(
        _backend.KIND_SINGLE if kind == SINGLE_LAYER else _backend.KIND_TRACTION,
        mesh.centroids, mesh.normals, qp, qw, np.arange(F), m, omega, out=out,
    )
    blk = mat.reshape(F, 3, F, 3)
    k = _backend.KIND_SINGLE if kind == SINGLE_LAYER else _backend.KIND_TRACTION
    ti, fj = near_pairs(mesh, mesh.centroids)
    if len(ti):
        near = _near_blocks(k, mesh, mesh.centroids, mesh.normals, ti, fj, m, omega)
        blk[ti, :, fj, :] = near if np.iscomplexobj(mat) else near.real
    if not np.all(np.isfinite(mat)):
        raise QuadratureFailure("non-finite entries in the assembled operator")
    return mat


def assemble_single_layer(mesh: TriangleMesh, m: Material, omega: float = 0.0) -> BoundaryOperator:
    """Single-layer operator ``S^omega`` (real at zero frequency)."""
    if omega < 0:
        raise ValueError("omega must be non-negative")
    mat = _assemble(SINGLE_LAYER, mesh, m, omega)
    F = mesh.n_faces
    diag = _self_blocks(_backend.KIND_SINGLE, mesh, m, omega)
    mat.reshape(F, 3, F, 3)[np.arange(F), :, np.arange(F), :] = diag if np.iscomplexobj(mat) else diag.real
    return BoundaryOperator(mat, SINGLE_LAYER, m, float(omega), F)


def _completed_static_diagonal(mesh: TriangleMesh, K0: np.ndarray) -> np.ndarray:
    """Self blocks making ``sum_I a_I K_IJ = (a_J / 2) I`` hold for every face ``J``."""
    F = mesh.n_faces
    a = mesh.areas
    blk = K0.reshape(F, 3, F, 3)
    colsum = np.einsum("i,iajb->jab", a, blk)  # diagonal blocks are still zero here
    return (0.5 * a[:, None, None] * np.eye(3) - colsum) / a[:, None, None]


@lru_cache(maxsize=4)
def _static_diagonal_cached(mesh: TriangleMesh, m: Material) -> np.ndarray:
    K0 = _assemble(NP_ADJOINT, mesh, m, 0.0)
    return _completed_static_diagonal(mesh, K0)


def assemble_np_adjoint(mesh: TriangleMesh, m: Material, omega: float = 0.0, out=None) -> BoundaryOperator:
    """Neumann-Poincare adjoint ``K^{omega,*}`` with translation-completed self blocks."""
    if omega < 0:
        raise ValueError("omega must be non-negative")
    F = mesh.n_faces
    mat = _assemble(NP_ADJOINT, mesh, m, omega, out=out)
    idx = np.arange(F)
    if omega == 0.0:
        diag = _completed_static_diagonal(mesh, mat)
    else:
        diag = _static_diagonal_cached(mesh, m) + _self_blocks(
            _backend.KIND_TRACTION, mesh, m, omega, skip_static=True
        )
    mat.reshape(F, 3, F, 3)[idx, :, idx, :] = diag
    return BoundaryOperator(mat, NP_ADJOINT, m, float(omega), F)


# ----------------------------------------------------------------------------
# rigid motions and the biorthogonal basis


def rigid_motion_field(points) -> np.ndarray:
    """The six rigid-motion generators at ``points``: shape ``(P, 3, 6)``.

    Order: three translations, then ``(x2,-x1,0)``, ``(x3,0,-x1)``,
    ``(0,x3,-x2)``.
    """
    p = np.atleast_2d(np.asarray(points, float))
    out = np.zeros((len(p), 3, 6))
    out[:, 0, 0] = out[:, 1, 1] = out[:, 2, 2] = 1.0
    x1, x2, x3 = p[:, 0], p[:, 1], p[:, 2]
    out[:, 0, 3], out[:, 1, 3] = x2, -x1
    out[:, 0, 4], out[:, 2, 4] = x3, -x1
    out[:, 1, 5], out[:, 2, 5] = x3, -x2
    return out


@dataclass(frozen=True)
class RigidMotionBasis:
    """Sampled generators, one column per generator, shape ``(3F, 6)``."""

    vectors: np.ndarray
    weights: np.ndarray

    @property
    def gram(self) -> np.ndarray:
        return self.vectors.T @ (self.weights[:, None] * self.vectors)


def pairing_weights(mesh: TriangleMesh) -> np.ndarray:
    return np.repeat(mesh.areas, 3)


def rigid_motion_basis(mesh: TriangleMesh) -> RigidMotionBasis:
    X = rigid_motion_field(mesh.centroids).reshape(3 * mesh.n_faces, 6)
    return RigidMotionBasis(X, pairing_weights(mesh))


@dataclass(frozen=True)
class BiorthogonalBasis:
    """Biorthogonal pair ``(zeta_i, xi_i)`` with ``(xi_i, xi_j) = c_i delta_ij``.

    ``xi_coeffs`` expresses each ``xi_j`` in the generator basis, so that the
    continuous extension of ``xi_j`` to any point ``y`` is
    ``rigid_motion_field(y) @ xi_coeffs[:, j]``.
    """

    zeta: np.ndarray
    xi: np.ndarray
    c: np.ndarray
    xi_coeffs: np.ndarray
    weights: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    def pair(self, u, v) -> np.ndarray:
        """Matrix of pairings ``(u_i, v_j)`` between column sets."""
        return u.T @ (self.weights[:, None] * v)


SVD_LIMIT = 4000
DIRECT_LIMIT = 8000
GAP_TOL = 0.25


def _bordered_solve(A, X, WX, rhs):
    """Solve ``A z + X l = rhs`` with ``WX^T z = 0``; returns ``z``."""
    n, k = WX.shape
    if n <= DIRECT_LIMIT:
        Bm = np.zeros((n + k, n + k))
        Bm[:n, :n] = A
        Bm[:n, n:] = X
        Bm[n:, :n] = WX.T
        full = np.concatenate([rhs, np.zeros((k, rhs.shape[1]))])
        sol = sla.solve(Bm, full)
        return sol[:n], {"solver": "lu"}

    def mv(v):
        return np.concatenate([A @ v[:n] + X @ v[n:], WX.T @ v[:n]])

    op = LinearOperator((n + k, n + k), matvec=mv, dtype=float)
    cols, iters = [], []
    for j in range(rhs.shape[1]):
        count = [0]

        def cb(_):
            count[0] += 1

        b = np.concatenate([rhs[:, j], np.zeros(k)])
        x, info = gmres(op, b, rtol=1e-12, atol=0.0, restart=200, maxiter=20, callback=cb, callback_type="pr_norm")
        if info != 0:
            raise NullSpaceDimensionMismatch("iterative null-space solve did not converge")
        cols.append(x[:n])
        iters.append(count[0])
    return np.stack(cols, axis=1), {"solver": "gmres", "iterations": iters}


def nullspace_spectrum(mesh: TriangleMesh, K0star: BoundaryOperator, count: int = 12) -> np.ndarray:
    """Smallest singular values of ``-1/2 + K*`` in the area-weighted pairing (ascending)."""
    s = np.sqrt(pairing_weights(mesh))
    A = (K0star.matrix - 0.5 * np.eye(K0star.shape[0])) * s[:, None] / s[None, :]
    return np.sort(sla.svdvals(A))[:count]


def rotation_residual(mesh: TriangleMesh, K0star: BoundaryOperator) -> np.ndarray:
    """``||(-1/2 + K) xi|| / ||xi||`` for the three rotations, with ``K`` the pairing adjoint of ``K*``."""
    w = pairing_weights(mesh)
    X = rigid_motion_basis(mesh).vectors[:, 3:]
    # adjoint in the weighted pairing: K = W^-1 K*^T W
    KX = (K0star.matrix.T @ (w[:, None] * X)) / w[:, None]
    R = KX - 0.5 * X
    norm = lambda v: np.sqrt(np.sum(w[:, None] * v * v, axis=0))  # noqa: E731
    return norm(R) / norm(X)


def biorthogonal_basis(mesh: TriangleMesh, S0, K0star: BoundaryOperator, check: bool | None = None) -> BiorthogonalBasis:
    """Biorthogonal rigid-motion bases following the constructive procedure.

    1. orthonormalise the generators: ``xi_hat``;
    2. solve ``(1/2 - K*) zeta_hat = (-1/2 + K*) xi_hat`` on the pairing
       complement of ``xi_hat``; the small component of the range along the
       rigid motions (discretisation error) is deflated with a bordered
       system, so ``zeta_tilde`` spans the exact null space of the deflated
       operator ``(I - Xh Xh^T W)(1/2 - K*)``;
    3. ``zeta_tilde = zeta_hat + xi_hat``;
    4. diagonalise the Gram matrix ``P T = T Lambda`` and rescale:
       ``zeta = zeta_tilde T Lambda^-1/2``, ``xi = xi_hat T Lambda^1/2``.

    ``S0`` is accepted for interface symmetry and is not used.  On meshes
    with at most ``SVD_LIMIT`` unknowns (or when ``check`` is true) the
    result is cross-checked against the singular vectors of ``-1/2 + K*``.
    """
    del S0
    n = 3 * mesh.n_faces
    if K0star.omega != 0.0:
        raise ValueError("the biorthogonal basis is built from the static operator")
    rb = rigid_motion_basis(mesh)
    w = rb.weights
    L = np.linalg.cholesky(rb.gram)
    C = sla.solve_triangular(L, np.eye(6), lower=True).T  # L^-T
    Xh = rb.vectors @ C
    WX = w[:, None] * Xh
    K = K0star.matrix
    A = 0.5 * np.eye(n) - K if n <= DIRECT_LIMIT else None
    if A is None:
        class _A:
            def __matmul__(self, v):
                return 0.5 * v - K @ v

        A = _A()
    zhat, info = _bordered_solve(A, Xh, WX, -(A @ Xh))
    zt = zhat + Xh
    P = zt.T @ (w[:, None] * zt)
    P = 0.5 * (P + P.T)
    lam, T = np.linalg.eigh(P)
    zeta = zt @ (T / np.sqrt(lam))
    xi = Xh @ (T * np.sqrt(lam))
    coeffs = C @ (T * np.sqrt(lam))

    Az = A @ zeta
    proj = Xh @ (WX.T @ Az)
    wn = lambda v: np.sqrt(np.sum(w[:, None] * v * v, axis=0))  # noqa: E731
    diag = dict(info)
    diag["residual"] = (wn(Az) / wn(zeta)).tolist()
    diag["deflated_residual"] = (wn(Az - proj) / wn(zeta)).tolist()
    diag["gram_eigenvalues"] = lam.tolist()

    if check is None:
        check = n <= SVD_LIMIT
    if check:
        s = np.sqrt(w)
        As = -(A @ np.eye(n) if not isinstance(A, np.ndarray) else A) * s[:, None] / s[None, :]
        _, sig, Vt = sla.svd(As)
        sig_asc = sig[::-1]
        gap = sig_asc[5] / sig_asc[6]
        V6 = (Vt[-6:].T) / s[:, None]
        Qa = sla.orth(s[:, None] * zt)
        Qb = sla.orth(s[:, None] * V6)
        cosines = np.clip(sla.svdvals(Qa.T @ Qb), -1.0, 1.0)
        angle = float(np.degrees(np.arccos(cosines.min())))
        diag.update(singular_values=sig_asc[:8].tolist(), gap_ratio=float(gap), subspace_angle_deg=angle)
        if gap > GAP_TOL:
            raise NullSpaceDimensionMismatch(
                f"no six-dimensional near-null space: sigma6/sigma7 = {gap:.3g} exceeds {GAP_TOL}"
            )
    log.debug("biorthogonal basis: %s", diag)
    return BiorthogonalBasis(zeta, xi, lam.copy(), coeffs, w, diag)
