import numpy as np
import pytest
import scipy.linalg as sla

from conftest import basis, sphere, static_operators
from hise_bem import bem
from hise_bem.errors import NullSpaceDimensionMismatch, QuadratureFailure
from hise_bem.geometry import TriangleMesh, icosphere
from hise_bem.kernels import series_coefficients
from hise_bem.materials import Material

E = np.eye(3)


def t_pattern(mesh, k):
    """Discrete ``e_k x nu`` density (the T_1 family up to normalisation)."""
    return np.cross(E[k], mesh.normals).ravel()


def i_pattern(mesh, k):
    return np.tile(E[k], mesh.n_faces)


def rayleigh(mesh, A, p):
    Ap = A @ p
    w = bem.pairing_weights(mesh)
    return (p * w) @ Ap / ((p * w) @ p)


@pytest.mark.parametrize("k", range(3))
def test_single_layer_t_pattern(k):
    s, S0, _ = static_operators(3)
    assert rayleigh(s, S0.matrix, t_pattern(s, k)) == pytest.approx(-1.0 / 3.0, rel=0.02)


@pytest.mark.parametrize("k", range(3))
def test_single_layer_i_pattern(k):
    s, S0, _ = static_operators(3)
    p = i_pattern(s, k)
    assert rayleigh(s, S0.matrix, p) == pytest.approx(-7.0 / 9.0, rel=0.02)
    # eigen-pattern, not just a Rayleigh quotient
    w = bem.pairing_weights(s)
    r = S0.matrix @ p + 7.0 / 9.0 * p
    assert np.sqrt(np.sum(w * r * r) / np.sum(w * p * p)) < 0.02 * 7.0 / 9.0


def test_np_adjoint_patterns():
    s, _, K = static_operators(3)
    assert rayleigh(s, K.matrix, t_pattern(s, 0)) == pytest.approx(0.5, rel=0.02)
    assert rayleigh(s, K.matrix, i_pattern(s, 2)) == pytest.approx(0.5, rel=1e-12)


def test_translation_identity_exact():
    # the completed diagonal makes K map every translation to half of itself
    s, _, K = static_operators(2)
    w = bem.pairing_weights(s)
    X = bem.rigid_motion_basis(s).vectors[:, :3]
    KX = (K.matrix.T @ (w[:, None] * X)) / w[:, None]
    assert np.allclose(KX, 0.5 * X, atol=1e-12)


def test_static_operators_real_and_finite():
    _, S0, K = static_operators(1)
    assert S0.matrix.dtype == float and K.matrix.dtype == float
    assert np.all(np.isfinite(S0.matrix)) and np.all(np.isfinite(K.matrix))
    assert S0.kind == bem.SINGLE_LAYER and K.kind == bem.NP_ADJOINT
    assert S0.shape == (3 * 80, 3 * 80)


def test_dynamic_operators_complex(unit):
    s = sphere(1)
    S = bem.assemble_single_layer(s, unit, 0.5)
    K = bem.assemble_np_adjoint(s, unit, 0.5)
    assert np.iscomplexobj(S.matrix) and np.iscomplexobj(K.matrix)
    assert np.all(np.isfinite(S.matrix)) and np.all(np.isfinite(K.matrix))


def test_negative_frequency_rejected(unit):
    with pytest.raises(ValueError):
        bem.assemble_single_layer(sphere(0), unit, -1.0)


def test_degenerate_face_quadrature_failure(unit):
    s = sphere(0)
    v = s.vertices.copy()
    a, b, c = s.faces[0]
    v[c] = 0.5 * (v[a] + v[b])  # collapses face 0 (and bends its neighbours)
    bad = TriangleMesh(v, s.faces.copy())
    with pytest.raises(QuadratureFailure):
        bem.assemble_single_layer(bad, unit, 0.0)


def test_frequency_derivative_constant_operator(unit):
    # (S^w - S^0)/w -> a_1 int(phi) with the directly derived constant a_1
    s = sphere(2)
    omega = 1e-4
    Sw = bem.assemble_single_layer(s, unit, omega).matrix
    S0 = static_operators(2)[1].matrix
    phi = np.random.default_rng(3).normal(size=3 * s.n_faces)
    lhs = (Sw - S0) @ phi / omega
    a1, b1 = series_coefficients(1, unit)
    assert b1 == 0
    integral = (s.areas[:, None] * phi.reshape(-1, 3)).sum(axis=0)
    rhs = np.tile(a1 * integral, s.n_faces)
    assert np.linalg.norm(lhs - rhs) / np.linalg.norm(rhs) < 1e-3


def test_rotation_residual():
    for sub, bound in ((2, 0.02), (3, 0.02)):
        s, _, K = static_operators(sub)
        assert np.all(bem.rotation_residual(s, K) <= bound)
    r2 = bem.rotation_residual(*static_operators(2)[::2])
    r3 = bem.rotation_residual(*static_operators(3)[::2])
    assert np.all(r3 < r2)


def test_gap_ratio_shrinks_under_refinement():
    g1 = basis(1).diagnostics["gap_ratio"]
    g2 = basis(2).diagnostics["gap_ratio"]
    assert g2 < g1 < bem.GAP_TOL


@pytest.mark.xfail(strict=True, reason="collocation reproduces rotations only to O(h); gap ~0.04 at subdiv 2")
def test_gap_ratio_hundredfold():
    assert basis(2).diagnostics["gap_ratio"] <= 1e-2


def test_nullspace_spectrum_matches_basis_check():
    s, _, K = static_operators(1)
    sig = bem.nullspace_spectrum(s, K, count=8)
    assert np.allclose(sig, basis(1).diagnostics["singular_values"], rtol=1e-10, atol=1e-14)
    assert np.all(sig[:3] < 1e-12)  # translations are exact


@pytest.mark.parametrize("sub", [1, 2])
def test_biorthogonality(sub):
    B = basis(sub)
    assert np.allclose(B.pair(B.zeta, B.zeta), np.eye(6), atol=1e-8)
    assert np.allclose(B.pair(B.zeta, B.xi), np.eye(6), atol=1e-8)
    assert np.allclose(B.pair(B.xi, B.xi), np.diag(B.c), atol=1e-8)
    assert np.all(B.c > 0)


@pytest.mark.parametrize("sub", [1, 2])
def test_deflated_nullspace_residual(sub):
    assert max(basis(sub).diagnostics["deflated_residual"]) <= 1e-6


def test_xi_coefficients_reproduce_xi():
    s = sphere(2)
    B = basis(2)
    ext = np.einsum("pij,jk->pik", bem.rigid_motion_field(s.centroids), B.xi_coeffs).reshape(-1, 6)
    assert np.allclose(ext, B.xi, atol=1e-12)


def test_xi_span_equals_sphere_patterns():
    s = sphere(2)
    B = basis(2)
    pats = np.stack([i_pattern(s, k) for k in range(3)] + [t_pattern(s, k) for k in range(3)], axis=1)
    sw = np.sqrt(bem.pairing_weights(s))[:, None]
    cos = sla.svdvals(sla.orth(sw * B.xi).T @ sla.orth(sw * pats))
    assert np.degrees(np.arccos(np.clip(cos.min(), -1, 1))) <= 2.0
    assert B.diagnostics["subspace_angle_deg"] <= 2.0


def test_nonstatic_operator_rejected(unit):
    s = sphere(1)
    K = bem.assemble_np_adjoint(s, unit, 0.1)
    with pytest.raises(ValueError):
        bem.biorthogonal_basis(s, None, K)


def test_missing_nullspace_detected(unit):
    s = sphere(1)
    n = 3 * s.n_faces
    junk = 0.1 * np.random.default_rng(0).normal(size=(n, n)) / np.sqrt(n)
    K = bem.BoundaryOperator(junk, bem.NP_ADJOINT, unit, 0.0, s.n_faces)
    with pytest.raises(NullSpaceDimensionMismatch):
        bem.biorthogonal_basis(s, None, K, check=True)


def test_rigid_motion_generators():
    x = np.array([[0.3, -1.2, 2.0], [1.0, 2.0, 3.0]])
    g = bem.rigid_motion_field(x)
    assert np.allclose(g[:, :, 0], [1, 0, 0])
    assert np.allclose(g[1, :, 3], [2.0, -1.0, 0.0])
    assert np.allclose(g[1, :, 4], [3.0, 0.0, -1.0])
    assert np.allclose(g[1, :, 5], [0.0, 3.0, -2.0])
    rb = bem.rigid_motion_basis(sphere(1))
    assert rb.vectors.shape == (3 * 80, 6)
    assert np.linalg.matrix_rank(rb.gram) == 6


@pytest.mark.xfail(strict=True, reason="collocation single layer is symmetric only to ~1e-2 at desk resolution")
def test_single_layer_symmetric():
    s, S0, _ = static_operators(2)
    A = S0.matrix * bem.pairing_weights(s)[:, None]
    assert np.linalg.norm(A - A.T) / np.linalg.norm(A) <= 1e-3


def test_single_layer_weighted_symmetry_improves():
    def asym(sub):
        s, S0, _ = static_operators(sub)
        A = S0.matrix * bem.pairing_weights(s)[:, None]
        return np.linalg.norm(A - A.T) / np.linalg.norm(A)

    assert asym(2) < asym(1) < 0.05


def test_single_layer_first_order_convergence():
    errs, hs = [], []
    for sub in (1, 2, 3):
        s, S0, _ = static_operators(sub)
        errs.append(abs(rayleigh(s, S0.matrix, t_pattern(s, 0)) + 1.0 / 3.0))
        hs.append(s.diameters.max())
    slope = np.polyfit(np.log(hs), np.log(errs), 1)[0]
    assert slope >= 0.8


def test_radius_scaling(unit):
    s = icosphere(2.0, 2)
    S0 = bem.assemble_single_layer(s, unit, 0.0)
    assert rayleigh(s, S0.matrix, t_pattern(s, 1)) == pytest.approx(-2.0 / 3.0, rel=0.02)


def test_lame_dependence():
    m = Material(2.0, 0.5, 1.0)
    s = sphere(2)
    S0 = bem.assemble_single_layer(s, m, 0.0)
    g1 = -(2 * m.lambda_ + 5 * m.mu) / (3 * m.mu * (m.lambda_ + 2 * m.mu))
    assert rayleigh(s, S0.matrix, t_pattern(s, 0)) == pytest.approx(-1.0 / (3 * m.mu), rel=0.02)
    assert rayleigh(s, S0.matrix, i_pattern(s, 0)) == pytest.approx(g1, rel=0.02)
