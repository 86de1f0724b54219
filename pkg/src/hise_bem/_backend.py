"""Backend selection for the assembly hot loops.

The compiled extension is used when it imports; otherwise (or when the
environment variable ``HISE_BEM_BACKEND=python`` is set) the numpy
implementation takes over.  Both expose the same functions below.
"""

from __future__ import annotations

import os

import numpy as np

from . import _pykernels
from .kernels import SERIES_SWITCH, SERIES_TERMS, series_coefficients
from .materials import Material

KIND_SINGLE = 0
KIND_TRACTION = 1

_ext = None
if os.environ.get("HISE_BEM_BACKEND", "").lower() != "python":
    try:
        from . import _ckernels as _ext
    except ImportError:  # pragma: no cover - depends on the build
        _ext = None

NAME = "cython" if _ext is not None else "python"


def _coefs(m: Material):
    ab = [series_coefficients(n, m) for n in range(SERIES_TERMS + 1)]
    return np.array([a for a, _ in ab]), np.array([b for _, b in ab])


def _c(a, dtype=float):
    return np.ascontiguousarray(a, dtype=dtype)


def face_matrix(kind, x, nu, qpts, qw, skip, m: Material, omega: float, skip_static=False, out=None, backend=None):
    if (backend or NAME) == "python" or _ext is None:
        return _pykernels.face_matrix(kind, x, nu, qpts, qw, skip, m, omega, skip_static, out)
    a, b = _coefs(m)
    return _ext.face_matrix(
        kind, _c(x), _c(nu), _c(qpts), _c(qw), _c(skip, np.int64),
        m.lambda_, m.mu, m.rho, float(omega), a, b, SERIES_SWITCH, skip_static, out,
    )


def pair_sums(kind, tx, tnu, pts, w, owner, npairs, m: Material, omega: float, skip_static=False, backend=None):
    if (backend or NAME) == "python" or _ext is None:
        return _pykernels.pair_sums(kind, tx, tnu, pts, w, owner, npairs, m, omega, skip_static)
    a, b = _coefs(m)
    return _ext.pair_sums(
        kind, _c(tx), _c(tnu), _c(pts), _c(w), _c(owner, np.int64), int(npairs),
        m.lambda_, m.mu, m.rho, float(omega), a, b, SERIES_SWITCH, skip_static,
    )


def potential(x, qpts, qw, qface, dens, m: Material, omega: float, backend=None):
    if (backend or NAME) == "python" or _ext is None:
        return _pykernels.potential(x, qpts, qw, qface, dens, m, omega)
    args = (_c(x), _c(qpts), _c(qw), _c(qface, np.int64))
    if omega == 0.0:
        if np.iscomplexobj(dens):
            re = _ext.potential_real(*args, _c(dens.real), m.lambda_, m.mu, m.rho)
            im = _ext.potential_real(*args, _c(dens.imag), m.lambda_, m.mu, m.rho)
            return re + 1j * im
        return _ext.potential_real(*args, _c(dens), m.lambda_, m.mu, m.rho)
    a, b = _coefs(m)
    return _ext.potential_cplx(*args, _c(dens, complex), m.lambda_, m.mu, m.rho, float(omega), a, b, SERIES_SWITCH)


def winding_numbers(points, tris, backend=None):
    if (backend or NAME) == "python" or _ext is None:
        return _pykernels.winding_numbers(points, tris)
    return _ext.winding_numbers(_c(points), _c(tris))
