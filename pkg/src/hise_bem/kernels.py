"""Elastic fundamental solutions and their traction kernels.

Every tensor kernel used here has the isotropic form::

    G(x) = A(r) I + B(r) xhat xhat^T,        r = |x|, xhat = x / r

so the whole module reduces to evaluating the radial profiles ``A``, ``B``
and their derivatives.  Sign convention: ``G`` is the fundamental solution
of ``L_{lambda,mu} + rho omega^2`` with ``L G = delta`` (hence the static
Kelvin tensor is negative definite), and the outgoing factor is
``exp(+i k r)``.

The frequency-dependent profiles divide by ``omega^2`` and lose accuracy as
``k_s r -> 0``; below ``SERIES_SWITCH`` the low-frequency power series is
summed instead.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import SingularPoint
from .materials import Material

SINGULAR_FLOOR = 1e-14
SERIES_SWITCH = 1e-3
SERIES_TERMS = 8


def series_coefficients(n: int, m: Material) -> tuple[complex, complex]:
    """Coefficients ``(a_n, b_n)`` with ``Gamma_n(x) = r^(n-1) (a_n I + b_n xhat xhat^T)``.

    Obtained by expanding ``exp(i k r) / r`` in powers of ``k r`` inside the
    closed-form dynamic kernel; ``n = 0`` reproduces the Kelvin tensor.
    """
    lp2m = m.lambda_ + 2.0 * m.mu
    inv_s = 1.0 / (m.mu * m.c_s**n)
    inv_p = 1.0 / (lp2m * m.c_p**n)
    pref = (1j**n) / (4.0 * math.pi * (n + 2) * math.factorial(n))
    a = -pref * ((n + 1) * inv_s + inv_p)
    b = pref * (n - 1) * (inv_s - inv_p)
    return complex(a), complex(b)


def _radial_static(r, m: Material):
    c = 1.0 / (8.0 * math.pi)
    a1, a2 = m.alpha1, m.alpha2
    A = -c * a1 / r
    B = -c * a2 / r
    dA = c * a1 / r**2
    dB = c * a2 / r**2
    return A, B, dA, dB


def _radial_direct(r, m: Material, omega: float):
    ks = omega / m.c_s
    kp = omega / m.c_p

    def derivs(k):
        e = np.exp(1j * k * r)
        f1 = e * (1j * k / r - 1.0 / r**2)
        f2 = e * (-(k**2) / r - 2j * k / r**2 + 2.0 / r**3)
        f3 = e * (-1j * k**3 / r + 3.0 * k**2 / r**2 + 6j * k / r**3 - 6.0 / r**4)
        return e, f1, f2, f3

    es, fs1, fs2, fs3 = derivs(ks)
    _, fp1, fp2, fp3 = derivs(kp)
    p1, p2, p3 = fp1 - fs1, fp2 - fs2, fp3 - fs3
    c = 1.0 / (4.0 * math.pi * m.rho * omega**2)
    cm = 1.0 / (4.0 * math.pi * m.mu)
    A = -cm * es / r + c * p1 / r
    B = c * (p2 - p1 / r)
    dA = -cm * fs1 + c * (p2 / r - p1 / r**2)
    dB = c * (p3 - p2 / r + p1 / r**2)
    return A, B, dA, dB


def _radial_series(r, m: Material, omega: float, nterms: int = SERIES_TERMS, start: int = 0):
    A = np.zeros_like(r, dtype=complex)
    B = np.zeros_like(r, dtype=complex)
    dA = np.zeros_like(r, dtype=complex)
    dB = np.zeros_like(r, dtype=complex)
    for n in range(start, nterms + 1):
        a, b = series_coefficients(n, m)
        w = omega**n
        rn = r ** (n - 1)
        A += w * a * rn
        B += w * b * rn
        if n != 1:
            rd = (n - 1) * r ** (n - 2)
            dA += w * a * rd
            dB += w * b * rd
    return A, B, dA, dB


def radial_profiles(r, m: Material, omega: float, skip_static: bool = False):
    """Return ``A, B, dA/dr, dB/dr`` at distances ``r`` (array, all > 0).

    With ``skip_static`` the static Kelvin profiles are subtracted, leaving
    the bounded frequency correction.
    """
    r = np.asarray(r, dtype=float)
    if omega == 0.0:
        if skip_static:
            return tuple(np.zeros_like(r) for _ in range(4))
        return _radial_static(r, m)

    def direct(rr):
        out = _radial_direct(rr, m, omega)
        if skip_static:
            out = tuple(a - b for a, b in zip(out, _radial_static(rr, m)))
        return out

    def series(rr):
        return _radial_series(rr, m, omega, start=1 if skip_static else 0)

    small = (omega / m.c_s) * r < SERIES_SWITCH
    if not small.any():
        return direct(r)
    if small.all():
        return series(r)
    out = [np.empty(r.shape, dtype=complex) for _ in range(4)]
    for o, v in zip(out, direct(r[~small])):
        o[~small] = v
    for o, v in zip(out, series(r[small])):
        o[small] = v
    return tuple(out)


def _split(x, floor):
    x = np.asarray(x, dtype=float)
    r = np.linalg.norm(x, axis=-1)
    if np.any(r < floor):
        raise SingularPoint(f"kernel evaluated within {floor:g} of its singularity")
    return x, r, x / r[..., None]


def _assemble(A, B, xh):
    eye = np.eye(3)
    return A[..., None, None] * eye + B[..., None, None] * (xh[..., :, None] * xh[..., None, :])


def kelvin_static(x, m: Material, floor: float = SINGULAR_FLOOR) -> np.ndarray:
    """Static Kelvin tensor ``Gamma(x)``; ``x`` has shape ``(..., 3)``."""
    _, r, xh = _split(x, floor)
    A, B, _, _ = _radial_static(r, m)
    return _assemble(A, B, xh)


def fundamental_dynamic(x, m: Material, omega: float, floor: float = SINGULAR_FLOOR) -> np.ndarray:
    """Time-harmonic fundamental solution ``Gamma^omega(x)`` (complex)."""
    _, r, xh = _split(x, floor)
    A, B, _, _ = radial_profiles(r, m, omega)
    return _assemble(np.asarray(A, complex), np.asarray(B, complex), xh)


def series_term(n: int, x, m: Material, floor: float = SINGULAR_FLOOR) -> np.ndarray:
    """Coefficient ``Gamma_n(x)`` of ``omega^n`` in the low-frequency expansion."""
    if n < 0:
        raise ValueError("n must be non-negative")
    x = np.asarray(x, dtype=float)
    r = np.linalg.norm(x, axis=-1)
    a, b = series_coefficients(n, m)
    if n <= 2:
        if np.any(r < floor):
            raise SingularPoint(f"series term {n} is singular at the origin")
    eye = np.eye(3)
    outer = x[..., :, None] * x[..., None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        rn1 = r ** (n - 1)
        rn3 = np.where(r > 0, r ** (n - 3.0), 0.0) if n >= 3 else r ** (n - 3.0)
    return a * rn1[..., None, None] * eye + b * rn3[..., None, None] * outer


def traction_from_profiles(A, B, dA, dB, r, xh, nu, m: Material):
    """Conormal derivative (in x) of the kernel columns, from radial profiles.

    Column ``j`` of the result is the traction with normal ``nu`` of the
    displacement field ``G[:, j]``.
    """
    lam, mu = m.lambda_, m.mu
    Br = B / r
    c1 = lam * (dA + dB + 2.0 * Br) + 2.0 * mu * Br
    c2 = mu * (dA + Br)
    c4 = 2.0 * mu * (dB - 2.0 * Br)
    xn = np.einsum("...k,...k->...", xh, nu)
    nx = nu[..., :, None] * xh[..., None, :]
    xnT = xh[..., :, None] * nu[..., None, :]
    xx = xh[..., :, None] * xh[..., None, :]
    eye = np.eye(3)
    return (
        c1[..., None, None] * nx
        + c2[..., None, None] * xnT
        + (c2 * xn)[..., None, None] * eye
        + (c4 * xn)[..., None, None] * xx
    )


def traction_kernel(x, y, nu_x, m: Material, omega: float = 0.0, floor: float = SINGULAR_FLOOR) -> np.ndarray:
    """``d/dnu_x Gamma^omega(x - y)`` applied column-wise (3x3 per point pair)."""
    d = np.asarray(x, float) - np.asarray(y, float)
    _, r, xh = _split(d, floor)
    nu = np.broadcast_to(np.asarray(nu_x, float), xh.shape)
    A, B, dA, dB = radial_profiles(r, m, omega)
    return traction_from_profiles(A, B, dA, dB, r, xh, nu, m)
