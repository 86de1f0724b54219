"""Closed-form spherical computations: the oracle for the boundary-element pipeline.

For a ball of radius ``R`` the layer potentials act diagonally on vector
spherical harmonics.  In the dipolar channel (``n = 1``):

* ``T_1^m`` is an eigenfunction of ``S^omega`` (coefficient ``b_1``) and of
  ``K^{omega,*}`` (coefficient ``frak_b_1 - 1/2``);
* ``I_0^m`` couples to ``N_2^m`` through the 2x2 blocks ``(c_1, d_1; c_2,
  d_2)`` and their Neumann-Poincare counterparts.

Resonances are the zeros of the determinants of the transmission problem
restricted to these channels (``det M_1`` for ``T_1``, ``det M_2`` for
``I_0/N_2``).  Coefficients with a tilde use the inclusion material.

Vector harmonics are used in Cartesian form: with ``r Y_1^m(xhat) = c_m . x``,
``I_0^m = c_m``, ``T_1^m = c_m x xhat`` and ``N_2^m = -c_m + 3 (c_m . xhat) xhat``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import DomainError, RootNotBracketed
from .materials import ContrastConfig, Material, inclusion_material, wavenumbers

SERIES_RADIUS = 1.0
_SERIES_TERMS = 14

# ----------------------------------------------------------------------------
# spherical Bessel and Hankel functions of order 0..3


def _double_factorial(k: int) -> int:
    return math.prod(range(k, 0, -2)) if k > 0 else 1


def _j_series(n, t):
    t2 = t * t
    term = t**n / _double_factorial(2 * n + 1)
    total = term
    for k in range(1, _SERIES_TERMS):
        term = -term * t2 / (2 * k * (2 * n + 2 * k + 1))
        total = total + term
    return total


def _j_closed(n, t):
    s, c = np.sin(t), np.cos(t)
    if n == 0:
        return s / t
    if n == 1:
        return s / t**2 - c / t
    if n == 2:
        return (3 / t**3 - 1 / t) * s - 3 * c / t**2
    return (15 / t**4 - 6 / t**2) * s - (15 / t**3 - 1 / t) * c


def _y_closed(n, t):
    s, c = np.sin(t), np.cos(t)
    if n == 0:
        return -c / t
    if n == 1:
        return -c / t**2 - s / t
    if n == 2:
        return (-3 / t**3 + 1 / t) * c - 3 * s / t**2
    return (-15 / t**4 + 6 / t**2) * c - (15 / t**3 - 1 / t) * s


def _check_order(n):
    if n not in (0, 1, 2, 3):
        raise ValueError("only orders 0..3 are implemented")


def spherical_bessel_j(n: int, t):
    """``j_n(t)`` for ``n <= 3``; power series near the origin."""
    _check_order(n)
    t = np.asarray(t, dtype=complex if np.iscomplexobj(t) else float)
    small = np.abs(t) < SERIES_RADIUS
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(small, _j_series(n, t), _j_closed(n, np.where(small, 1.0, t)))
    return out[()] if out.ndim == 0 else out


def spherical_bessel_y(n: int, t):
    _check_order(n)
    t = np.asarray(t, dtype=complex if np.iscomplexobj(t) else float)
    if np.any(t == 0):
        raise DomainError("spherical Neumann function is singular at t = 0")
    out = _y_closed(n, t)
    return out[()] if np.ndim(out) == 0 else out


def spherical_hankel_h1(n: int, t):
    """``h_n(t) = j_n(t) + i y_n(t)`` (first kind), ``t != 0``."""
    if np.any(np.asarray(t) == 0):
        raise DomainError("spherical Hankel function is singular at t = 0")
    return spherical_bessel_j(n, t) + 1j * spherical_bessel_y(n, t)


def _deriv(f, n, t):
    """``f_n'(t)`` from ``f_n' = f_{n-1} - (n+1)/t f_n`` (``f_0' = -f_1``)."""
    if n == 0:
        return -f(1, t)
    return f(n - 1, t) - (n + 1) / t * f(n, t)


def spherical_bessel_j_prime(n, t):
    return _deriv(spherical_bessel_j, n, t)


def spherical_bessel_y_prime(n, t):
    return _deriv(spherical_bessel_y, n, t)


def spherical_hankel_h1_prime(n, t):
    return _deriv(spherical_hankel_h1, n, t)


# ----------------------------------------------------------------------------
# operator coefficients on the sphere


def _tail_coefficients(terms: int = 12) -> np.ndarray:
    # Taylor coefficients (in t) of t^3 j_0(t) y_2(t) + 3 = j_0(t) ((t^2 - 3) cos t - 3 t sin t) + 3
    N = 2 * terms + 2
    fact = [math.factorial(k) for k in range(N + 2)]
    cos_ = np.array([(-1) ** (k // 2) / fact[k] if k % 2 == 0 else 0.0 for k in range(N)])
    sin_ = np.array([(-1) ** (k // 2) / fact[k] if k % 2 == 1 else 0.0 for k in range(N)])
    j0 = np.array([(-1) ** (k // 2) / fact[k + 1] if k % 2 == 0 else 0.0 for k in range(N)])
    P = np.polynomial.polynomial
    inner = P.polyadd(P.polymul([-3.0, 0.0, 1.0], cos_), P.polymul([0.0, -3.0], sin_))
    out = P.polymul(j0, inner)[:N]
    out[0] += 3.0
    return out


_JY_TAIL = _tail_coefficients()


def _jy_split(s, p, ks, mu, R):
    """``ks y-part(s)/mu - kp y-part(p)/(lambda+2mu)`` of ``j_0 h_2 k`` for ``n = 1``.

    Each term is ``(t^3 j_0 y_2)(t) / (omega^2 rho R^3)``; their ``-3`` constants
    cancel exactly and are removed before subtracting.
    """
    poly = np.polynomial.polynomial.polyval
    small = (poly(s, _JY_TAIL) - poly(p, _JY_TAIL)) / (ks**2 * mu * R**3)
    y = spherical_bessel_y
    big = spherical_bessel_j(0, s) * y(2, s) * s**3 / (ks**2 * mu * R**3) - spherical_bessel_j(0, p) * y(
        2, p
    ) * p**3 / (ks**2 * mu * R**3)
    return np.where(s < SERIES_RADIUS, small, big)


@dataclass(frozen=True)
class SphereCoeffs:
    """Single-layer and Neumann-Poincare coefficients of one channel ``n``.

    The Neumann-Poincare values are the raw ``frak_*``; the operator itself
    acts with ``frak_b - 1/2``, ``frak_c1 - 1/2`` and ``frak_d2 - 1/2`` on
    the diagonal.
    """

    n: int
    b: complex
    c1: complex
    d1: complex
    c2: complex
    d2: complex
    frak_b: complex = 0j
    frak_c1: complex = 0j
    frak_d1: complex = 0j
    frak_c2: complex = 0j
    frak_d2: complex = 0j


def _args(R, m: Material, omega):
    omega = np.asarray(omega, dtype=float)
    if not np.all(omega > 0):
        raise DomainError("sphere coefficients need omega > 0")
    ks = omega * math.sqrt(m.rho / m.mu)
    kp = omega * math.sqrt(m.rho / (m.lambda_ + 2.0 * m.mu))
    return kp, ks, ks * R, kp * R, m.lambda_ + 2.0 * m.mu


def _scalar(v):
    return complex(v) if np.ndim(v) == 0 else np.asarray(v, dtype=complex)


def single_layer_coeffs(n: int, R: float, m: Material, omega: float) -> SphereCoeffs:
    """``b_n, c_1n, d_1n, c_2n, d_2n`` of the single layer on the sphere."""
    kp, ks, s, p, L = _args(R, m, omega)
    j, h = spherical_bessel_j, spherical_hankel_h1
    mu = m.mu
    q = 2 * n + 1
    b = -1j * ks * R**2 * j(n, s) * h(n, s) / mu
    c1 = -(R**2) * 1j * (j(n - 1, s) * h(n - 1, s) * ks * (n + 1) / (mu * q) + j(n - 1, p) * h(n - 1, p) * kp * n / (L * q))
    if n == 1:
        # the y-parts of the two terms cancel to leading order; see _jy_split
        jj = j(0, s) * j(2, s) * ks / mu - j(0, p) * j(2, p) * kp / L
        d1 = -R**2 * 1j * (jj + 1j * _jy_split(s, p, ks, mu, R)) / q
    else:
        d1 = -n * R**2 * 1j * (j(n - 1, s) * h(n + 1, s) * ks / (mu * q) - j(n - 1, p) * h(n + 1, p) * kp / (L * q))
    c2 = -(n + 1) * R**2 * 1j * (j(n + 1, s) * h(n - 1, s) * ks / (mu * q) - j(n + 1, p) * h(n - 1, p) * kp / (L * q))
    d2 = -(R**2) * 1j * (j(n + 1, s) * h(n + 1, s) * ks * n / (mu * q) + j(n + 1, p) * h(n + 1, p) * kp * (n + 1) / (L * q))
    return SphereCoeffs(n, *map(_scalar, (b, c1, d1, c2, d2)))


def np_coeffs(n: int, R: float, m: Material, omega: float) -> SphereCoeffs:
    """``frak_b_n, frak_c_1n, frak_d_1n, frak_c_2n, frak_d_2n`` (raw, before the 1/2 shifts)."""
    kp, ks, s, p, L = _args(R, m, omega)
    j, h, hp = spherical_bessel_j, spherical_hankel_h1, spherical_hankel_h1_prime
    mu = m.mu
    q = 2 * n + 1
    fb = -1j * ks * R * j(n, s) * (s * hp(n, s) - h(n, s))
    fc1 = -2 * (n - 1) * R * 1j * (
        j(n - 1, s) * h(n - 1, s) * ks * (n + 1) / q + j(n - 1, p) * h(n - 1, p) * kp * mu * n / (L * q)
    ) + R**2 * 1j * (j(n - 1, s) * h(n, s) * ks**2 * (n + 1) + j(n - 1, p) * h(n, p) * kp**2 * n) / q
    if n == 1:
        jj = j(0, s) * j(2, s) * ks - j(0, p) * j(2, p) * kp * mu / L
        first = 6 * R * 1j * (jj + 1j * mu * _jy_split(s, p, ks, mu, R)) / q
    else:
        first = 2 * n * (n + 2) * R * 1j * (
            j(n - 1, s) * h(n + 1, s) * ks / q - j(n - 1, p) * h(n + 1, p) * kp * mu / (L * q)
        )
    fd1 = first + n * R**2 * 1j * (-j(n - 1, s) * h(n, s) * ks**2 + j(n - 1, p) * h(n, p) * kp**2) / q
    fc2 = -2 * (n**2 - 1) * R * 1j * (
        j(n + 1, s) * h(n - 1, s) * ks / q - j(n + 1, p) * h(n - 1, p) * kp * mu / (L * q)
    ) - (n + 1) * R**2 * 1j * (-j(n - 1, s) * h(n, s) * ks**2 + j(n - 1, p) * h(n, p) * kp**2) / q
    fd2 = 2 * (n + 2) * R * 1j * (
        j(n + 1, s) * h(n + 1, s) * ks * n / q + j(n + 1, p) * h(n + 1, p) * kp * mu * (n + 1) / (L * q)
    ) - R**2 * 1j * (j(n + 1, s) * h(n, s) * ks**2 * n + j(n + 1, p) * h(n, p) * kp**2 * (n + 1)) / q
    return SphereCoeffs(n, 0j, 0j, 0j, 0j, 0j, *map(_scalar, (fb, fc1, fd1, fc2, fd2)))


def sphere_coeffs(n: int, R: float, m: Material, omega: float) -> SphereCoeffs:
    """Both coefficient families in one record."""
    s = single_layer_coeffs(n, R, m, omega)
    k = np_coeffs(n, R, m, omega)
    return SphereCoeffs(n, s.b, s.c1, s.d1, s.c2, s.d2, k.frak_b, k.frak_c1, k.frak_d1, k.frak_c2, k.frak_d2)


def _pair(omega, R, background, c):
    bg = sphere_coeffs(1, R, background, omega)
    inc = sphere_coeffs(1, R, inclusion_material(background, c), omega)
    return inc, bg


def _stack(rows):
    # trailing frequency axis (if any) moves to the front
    a = np.array(rows, dtype=complex)
    return np.moveaxis(a, (0, 1), (-2, -1)) if a.ndim == 3 else a


def matrix_M1(omega, R, background: Material, c: ContrastConfig) -> np.ndarray:
    """2x2 ``T_1`` block; an array of frequencies gives a stack ``(K, 2, 2)``."""
    t, o = _pair(omega, R, background, c)
    z = np.zeros_like(t.b)
    return _stack([[t.b + z, -o.b + z], [t.frak_b - 1.0 + z, -o.frak_b + z]])


def matrix_M2(omega, R, background: Material, c: ContrastConfig) -> np.ndarray:
    t, o = _pair(omega, R, background, c)
    return _stack([
        [t.c1, -o.c1, t.c2, -o.c2],
        [t.frak_c1 - 1.0, -o.frak_c1, t.frak_c2, -o.frak_c2],
        [t.d1, -o.d1, t.d2, -o.d2],
        [t.frak_d1, -o.frak_d1, t.frak_d2 - 1.0, -o.frak_d2],
    ])


def _det(mat):
    d = np.linalg.det(mat)
    return complex(d) if np.ndim(d) == 0 else d


def det_M1(omega, R, background: Material, c: ContrastConfig):
    """Determinant of the ``T_1`` channel of the transmission operator."""
    return _det(matrix_M1(omega, R, background, c))


def det_M2(omega, R, background: Material, c: ContrastConfig):
    """Determinant of the coupled ``I_0 / N_2`` channel; vectorised over ``omega``."""
    return _det(matrix_M2(omega, R, background, c))


# ----------------------------------------------------------------------------
# resonances


def closed_form_frequencies(R: float, background: Material, c: ContrastConfig) -> tuple[float, float]:
    """Leading-order ``(omega_1, omega_2)`` of the torsional and translational channels."""
    lam, mu, rho = background.lambda_, background.mu, background.rho
    se = math.sqrt(c.epsilon)
    w1 = se / R * math.sqrt(15.0 * mu / rho)
    w2 = se / R * math.sqrt(9.0 * mu * (lam + 2.0 * mu) / ((2.0 * lam + 5.0 * mu) * rho))
    return w1, w2


def closed_form_eigenvalues(R: float, m: Material) -> tuple[float, float]:
    """Eigenvalues ``(varrho_1, varrho_2)`` of M for the ball."""
    lam, mu = m.lambda_, m.mu
    return R**2 / (15.0 * mu), (2.0 * lam + 5.0 * mu) * R**2 / (9.0 * mu * (lam + 2.0 * mu))


@dataclass(frozen=True)
class SphereResonances:
    omega_T: float
    omega_I: float
    omega1_closed: float
    omega2_closed: float
    sign_change_T: bool
    sign_change_I: bool

    @property
    def rel_gap_T(self) -> float:
        return abs(self.omega_T - self.omega1_closed) / self.omega1_closed

    @property
    def rel_gap_I(self) -> float:
        return abs(self.omega_I - self.omega2_closed) / self.omega2_closed

    @property
    def rel_gap(self) -> float:
        return max(self.rel_gap_T, self.rel_gap_I)


def locate_determinant_root(det, center: float, span: float = 10.0, count: int = 400, xtol: float = 1e-10):
    """Minimise ``|det|`` on ``[center/span, center*span]``.

    ``det`` must accept an array of frequencies.  A log-grid scan brackets
    the minimum, which is then refined by golden-section search.  Returns
    ``(omega, sign_change)`` where ``sign_change`` reports whether ``Re det``
    changes sign across the bracket.
    """
    grid = np.geomspace(center / span, center * span, count)
    vals = np.asarray(det(grid))
    mag = np.abs(vals)
    i = int(np.argmin(mag))
    if i == 0 or i == count - 1:
        raise RootNotBracketed(f"|det| is smallest at the edge of the scan window ({grid[i]:.6g})")
    res = minimize_scalar(lambda w: abs(det(w)), bracket=(grid[i - 1], grid[i], grid[i + 1]),
                          method="golden", options={"xtol": xtol})
    sign_change = bool(np.sign(vals[i - 1].real) != np.sign(vals[i + 1].real))
    return float(res.x), sign_change


def find_sphere_resonances(R: float, background: Material, c: ContrastConfig) -> SphereResonances:
    """Determinant roots of both dipolar channels next to their closed forms."""
    w1, w2 = closed_form_frequencies(R, background, c)
    wT, sT = locate_determinant_root(lambda w: det_M1(w, R, background, c), w1)
    wI, sI = locate_determinant_root(lambda w: det_M2(w, R, background, c), w2)
    return SphereResonances(wT, wI, w1, w2, sT, sI)


# ----------------------------------------------------------------------------
# fields inside the ball


_S38 = math.sqrt(3.0 / (8.0 * math.pi))
_S34 = math.sqrt(3.0 / (4.0 * math.pi))


def harmonic_vector(m: int) -> np.ndarray:
    """``c_m`` with ``r Y_1^m = c_m . x`` (so ``I_0^m = c_m``)."""
    if m == -1:
        return _S38 * np.array([1.0, -1j, 0.0])
    if m == 0:
        return _S34 * np.array([0.0, 0.0, 1.0], dtype=complex)
    if m == 1:
        return -_S38 * np.array([1.0, 1j, 0.0])
    raise ValueError("m must be -1, 0 or 1")


def _unit(x):
    x = np.atleast_2d(np.asarray(x, float))
    r = np.linalg.norm(x, axis=1)
    xh = np.where(r[:, None] > 0, x / np.where(r > 0, r, 1.0)[:, None], np.array([0.0, 0.0, 1.0]))
    return x, r, xh


def vector_harmonics(m: int, x):
    """``I_0^m``, ``T_1^m`` and ``N_2^m`` evaluated in the direction of each point."""
    _, _, xh = _unit(x)
    cm = harmonic_vector(m)
    I0 = np.broadcast_to(cm, xh.shape).astype(complex)
    T1 = np.cross(cm[None, :], xh)
    N2 = -cm[None, :] + 3.0 * (xh @ cm)[:, None] * xh
    return I0, T1, N2


def dipolar_modes(m: int, x, material: Material, omega: float):
    """``J_1m1``, ``J_1m2``, ``J_1m3`` at ``x``; each of shape ``(P, 3)``."""
    kp, ks = wavenumbers(material, omega)
    _, r, _ = _unit(x)
    I0, T1, N2 = vector_harmonics(m, x)
    j = spherical_bessel_j
    tp, ts = kp * r, ks * r
    J1 = (kp / 3.0) * (j(0, tp)[:, None] * I0 - j(2, tp)[:, None] * N2)
    J2 = j(1, ts)[:, None] * T1
    J3 = (ks / 3.0) * (2.0 * j(0, ts)[:, None] * I0 + j(2, ts)[:, None] * N2)
    return J1, J2, J3


def monopole_mode(x, material: Material, omega: float) -> np.ndarray:
    """The only non-vanishing ``n = 0`` mode, ``J_001 = grad(j_0(k_p r) Y_0^0)``."""
    kp, _ = wavenumbers(material, omega)
    _, r, xh = _unit(x)
    return (-kp * spherical_bessel_j(1, kp * r) / math.sqrt(4.0 * math.pi))[:, None] * xh


@dataclass(frozen=True)
class InBallField:
    field: np.ndarray
    coefficients: dict


def mode_coefficients(channel: str, R: float, m: Material, omega: float) -> dict:
    """Coefficients of ``S^omega[channel^m]`` on ``J_1m1``, ``J_1m2``, ``J_1m3``."""
    kp, ks, s, p, L = _args(R, m, omega)
    h = spherical_hankel_h1
    if channel == "I0m":
        return {"J1": complex(-1j * R**2 * h(0, p) / L), "J2": 0j, "J3": complex(-1j * R**2 * h(0, s) / m.mu)}
    if channel == "T1m":
        return {"J1": 0j, "J2": complex(-1j * ks * R**2 * h(1, s) / m.mu), "J3": 0j}
    raise ValueError("channel must be 'I0m' or 'T1m'")


def in_ball_field(channel: str, x, m: Material, omega: float, R: float, order: int = 0) -> InBallField:
    """Single-layer field of the density ``I_0^order`` or ``T_1^order`` on the sphere ``|x| = R``.

    ``omega = 0`` returns the static field with empty coefficients.
    """
    x, r, _ = _unit(x)
    if np.any(r >= R):
        raise DomainError("evaluation points must lie strictly inside the ball")
    I0, T1, _ = vector_harmonics(order, x)
    if omega == 0.0:
        if channel == "I0m":
            g = -(2.0 * m.lambda_ + 5.0 * m.mu) * R / (3.0 * m.mu * (m.lambda_ + 2.0 * m.mu))
            return InBallField(g * I0, {})
        if channel == "T1m":
            return InBallField((-r / (3.0 * m.mu))[:, None] * T1, {})
        raise ValueError("channel must be 'I0m' or 'T1m'")
    coef = mode_coefficients(channel, R, m, omega)
    J1, J2, J3 = dipolar_modes(order, x, m, omega)
    return InBallField(coef["J1"] * J1 + coef["J2"] * J2 + coef["J3"] * J3, coef)


def ball_quadrature(R: float, nr: int = 12, nt: int = 12, nphi: int = 24):
    """Product Gauss rule on the ball: points ``(P, 3)`` and weights ``(P,)``."""
    xr, wr = np.polynomial.legendre.leggauss(nr)
    r = 0.5 * R * (xr + 1.0)
    wr = 0.5 * R * wr * r**2
    ct, wt = np.polynomial.legendre.leggauss(nt)
    phi = 2.0 * np.pi * np.arange(nphi) / nphi
    wphi = np.full(nphi, 2.0 * np.pi / nphi)
    R_, C_, P_ = np.meshgrid(r, ct, phi, indexing="ij")
    W = (wr[:, None, None] * wt[None, :, None] * wphi[None, None, :]).ravel()
    st = np.sqrt(1.0 - C_**2)
    pts = np.stack([R_ * st * np.cos(P_), R_ * st * np.sin(P_), R_ * C_], axis=-1).reshape(-1, 3)
    return pts, W


def monopole_projection(u, points, weights, material: Material, omega: float) -> complex:
    """Normalised ``L2`` projection of a field onto the monopole mode."""
    J0 = monopole_mode(points, material, omega)
    num = np.sum(weights * np.sum(np.conj(J0) * u, axis=1))
    den = math.sqrt(np.sum(weights * np.sum(np.abs(J0) ** 2, axis=1)) * np.sum(weights * np.sum(np.abs(u) ** 2, axis=1)))
    return complex(num / den)
