# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled assembly loops (same contracts as ``_pykernels``)."""

import numpy as np

from libc.math cimport sqrt, cos, sin, atan2, pow, M_PI

ctypedef double complex cplx

cdef enum:
    MAXTERMS = 16


cdef struct Params:
    double lam
    double mu
    double rho
    double omega
    double ks
    double kp
    double switch
    int nterms
    int skip_static
    double a1
    double a2
    cplx a[MAXTERMS]
    cplx b[MAXTERMS]


cdef Params make_params(double lam, double mu, double rho, double omega,
                        acoef, bcoef, double switch, int skip_static) except *:
    cdef Params p
    cdef int n
    p.lam = lam
    p.mu = mu
    p.rho = rho
    p.omega = omega
    p.ks = omega * sqrt(rho / mu)
    p.kp = omega * sqrt(rho / (lam + 2.0 * mu))
    p.switch = switch
    p.skip_static = skip_static
    p.a1 = 1.0 / mu + 1.0 / (lam + 2.0 * mu)
    p.a2 = 1.0 / mu - 1.0 / (lam + 2.0 * mu)
    p.nterms = len(acoef)
    if p.nterms > MAXTERMS:
        raise ValueError("too many series terms")
    for n in range(p.nterms):
        p.a[n] = acoef[n]
        p.b[n] = bcoef[n]
    return p


cdef inline void prof_static(double r, Params* p, double* A, double* B, double* dA, double* dB) noexcept nogil:
    cdef double c = 1.0 / (8.0 * M_PI)
    A[0] = -c * p.a1 / r
    B[0] = -c * p.a2 / r
    dA[0] = c * p.a1 / (r * r)
    dB[0] = c * p.a2 / (r * r)


cdef inline void exp_derivs(double k, double r, cplx* e, cplx* f1, cplx* f2, cplx* f3) noexcept nogil:
    cdef cplx I = 1j
    e[0] = cos(k * r) + I * sin(k * r)
    f1[0] = e[0] * (I * k / r - 1.0 / (r * r))
    f2[0] = e[0] * (-(k * k) / r - 2.0 * I * k / (r * r) + 2.0 / (r * r * r))
    f3[0] = e[0] * (-I * k * k * k / r + 3.0 * k * k / (r * r) + 6.0 * I * k / (r * r * r) - 6.0 / (r * r * r * r))


cdef inline void prof_dynamic(double r, Params* p, cplx* A, cplx* B, cplx* dA, cplx* dB) noexcept nogil:
    cdef cplx es, fs1, fs2, fs3, ep, fp1, fp2, fp3, p1, p2, p3
    cdef double c, cm, w, rn, rd
    cdef double sA, sB, sdA, sdB
    cdef int n, start
    if p.ks * r < p.switch:
        A[0] = 0.0
        B[0] = 0.0
        dA[0] = 0.0
        dB[0] = 0.0
        start = 1 if p.skip_static else 0
        for n in range(start, p.nterms):
            w = pow(p.omega, n)
            rn = pow(r, n - 1)
            A[0] = A[0] + w * p.a[n] * rn
            B[0] = B[0] + w * p.b[n] * rn
            if n != 1:
                rd = (n - 1) * pow(r, n - 2)
                dA[0] = dA[0] + w * p.a[n] * rd
                dB[0] = dB[0] + w * p.b[n] * rd
        return
    exp_derivs(p.ks, r, &es, &fs1, &fs2, &fs3)
    exp_derivs(p.kp, r, &ep, &fp1, &fp2, &fp3)
    p1 = fp1 - fs1
    p2 = fp2 - fs2
    p3 = fp3 - fs3
    c = 1.0 / (4.0 * M_PI * p.rho * p.omega * p.omega)
    cm = 1.0 / (4.0 * M_PI * p.mu)
    A[0] = -cm * es / r + c * p1 / r
    B[0] = c * (p2 - p1 / r)
    dA[0] = -cm * fs1 + c * (p2 / r - p1 / (r * r))
    dB[0] = c * (p3 - p2 / r + p1 / (r * r))
    if p.skip_static:
        prof_static(r, p, &sA, &sB, &sdA, &sdB)
        A[0] = A[0] - sA
        B[0] = B[0] - sB
        dA[0] = dA[0] - sdA
        dB[0] = dB[0] - sdB


cdef inline void block_real(int kind, double* d, double* nu, Params* p, double* G) noexcept nogil:
    cdef double r = sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2])
    cdef double xh[3]
    cdef double A, B, dA, dB, Br, c1, c2, c4, xn
    cdef int i, j
    for i in range(3):
        xh[i] = d[i] / r
    prof_static(r, p, &A, &B, &dA, &dB)
    if kind == 0:
        for i in range(3):
            for j in range(3):
                G[3 * i + j] = B * xh[i] * xh[j]
            G[4 * i] += A
        return
    Br = B / r
    c1 = p.lam * (dA + dB + 2.0 * Br) + 2.0 * p.mu * Br
    c2 = p.mu * (dA + Br)
    c4 = 2.0 * p.mu * (dB - 2.0 * Br)
    xn = xh[0] * nu[0] + xh[1] * nu[1] + xh[2] * nu[2]
    for i in range(3):
        for j in range(3):
            G[3 * i + j] = c1 * nu[i] * xh[j] + c2 * xh[i] * nu[j] + c4 * xn * xh[i] * xh[j]
        G[4 * i] += c2 * xn


cdef inline void block_cplx(int kind, double* d, double* nu, Params* p, cplx* G) noexcept nogil:
    cdef double r = sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2])
    cdef double xh[3]
    cdef cplx A, B, dA, dB, Br, c1, c2, c4
    cdef double xn
    cdef int i, j
    for i in range(3):
        xh[i] = d[i] / r
    prof_dynamic(r, p, &A, &B, &dA, &dB)
    if kind == 0:
        for i in range(3):
            for j in range(3):
                G[3 * i + j] = B * xh[i] * xh[j]
            G[4 * i] = G[4 * i] + A
        return
    Br = B / r
    c1 = p.lam * (dA + dB + 2.0 * Br) + 2.0 * p.mu * Br
    c2 = p.mu * (dA + Br)
    c4 = 2.0 * p.mu * (dB - 2.0 * Br)
    xn = xh[0] * nu[0] + xh[1] * nu[1] + xh[2] * nu[2]
    for i in range(3):
        for j in range(3):
            G[3 * i + j] = c1 * nu[i] * xh[j] + c2 * xh[i] * nu[j] + c4 * xn * xh[i] * xh[j]
        G[4 * i] = G[4 * i] + c2 * xn


def face_matrix(int kind, const double[:, ::1] x, const double[:, ::1] nu,
                const double[:, :, ::1] qpts, const double[:, ::1] qw,
                const long[::1] skip, double lam, double mu, double rho, double omega,
                acoef, bcoef, double switch, bint skip_static=False, out=None):
    cdef Params p = make_params(lam, mu, rho, omega, acoef, bcoef, switch, skip_static)
    cdef Py_ssize_t M = x.shape[0], F = qpts.shape[0], Q = qpts.shape[1]
    cdef Py_ssize_t i, f, q, a, b
    cdef double d[3]
    cdef double nul[3]
    cdef double Gr[9]
    cdef double accr[9]
    cdef cplx Gc[9]
    cdef cplx accc[9]
    cdef double wq
    cdef bint real = omega == 0.0
    cdef double[:, ::1] outr
    cdef cplx[:, ::1] outc
    if out is None:
        out = np.zeros((3 * M, 3 * F), dtype=np.float64 if real else np.complex128)
    if real and out.dtype == np.complex128:
        raise ValueError("pass a real output array at zero frequency")
    if real and skip_static:
        return out
    if real:
        outr = out
    else:
        outc = out
    with nogil:
        for i in range(M):
            nul[0] = nu[i, 0]
            nul[1] = nu[i, 1]
            nul[2] = nu[i, 2]
            for f in range(F):
                if skip[i] == f:
                    continue
                for a in range(9):
                    accr[a] = 0.0
                    accc[a] = 0.0
                for q in range(Q):
                    d[0] = x[i, 0] - qpts[f, q, 0]
                    d[1] = x[i, 1] - qpts[f, q, 1]
                    d[2] = x[i, 2] - qpts[f, q, 2]
                    wq = qw[f, q]
                    if real:
                        block_real(kind, d, nul, &p, Gr)
                        for a in range(9):
                            accr[a] += wq * Gr[a]
                    else:
                        block_cplx(kind, d, nul, &p, Gc)
                        for a in range(9):
                            accc[a] = accc[a] + wq * Gc[a]
                for a in range(3):
                    for b in range(3):
                        if real:
                            outr[3 * i + a, 3 * f + b] = accr[3 * a + b]
                        else:
                            outc[3 * i + a, 3 * f + b] = accc[3 * a + b]
    return out


def pair_sums(int kind, const double[:, ::1] tx, const double[:, ::1] tnu,
              const double[:, ::1] pts, const double[::1] w, const long[::1] owner,
              Py_ssize_t npairs, double lam, double mu, double rho, double omega,
              acoef, bcoef, double switch, bint skip_static=False):
    cdef Params p = make_params(lam, mu, rho, omega, acoef, bcoef, switch, skip_static)
    cdef bint real = omega == 0.0 and not skip_static
    cdef Py_ssize_t n = w.shape[0], k, a, o
    cdef double d[3]
    cdef double nul[3]
    cdef double Gr[9]
    cdef cplx Gc[9]
    res_np = np.zeros((npairs, 9), dtype=np.float64 if real else np.complex128)
    if omega == 0.0 and skip_static:
        return res_np.reshape(npairs, 3, 3)
    cdef double[:, ::1] rr
    cdef cplx[:, ::1] rc
    if real:
        rr = res_np
    else:
        rc = res_np
    with nogil:
        for k in range(n):
            for a in range(3):
                d[a] = tx[k, a] - pts[k, a]
                nul[a] = tnu[k, a]
            o = owner[k]
            if real:
                block_real(kind, d, nul, &p, Gr)
                for a in range(9):
                    rr[o, a] += w[k] * Gr[a]
            else:
                block_cplx(kind, d, nul, &p, Gc)
                for a in range(9):
                    rc[o, a] = rc[o, a] + w[k] * Gc[a]
    return res_np.reshape(npairs, 3, 3)


def potential_real(const double[:, ::1] x, const double[:, ::1] qpts, const double[::1] qw,
                   const long[::1] qface, const double[:, :, ::1] dens,
                   double lam, double mu, double rho):
    cdef Params p = make_params(lam, mu, rho, 0.0, [], [], 0.0, 0)
    cdef Py_ssize_t M = x.shape[0], Q = qpts.shape[0], C = dens.shape[2]
    cdef Py_ssize_t i, q, a, b, c, f
    cdef double d[3]
    cdef double nul[3]
    cdef double G[9]
    out_np = np.zeros((M, 3, C))
    cdef double[:, :, ::1] out = out_np
    nul[0] = nul[1] = nul[2] = 0.0
    with nogil:
        for i in range(M):
            for q in range(Q):
                d[0] = x[i, 0] - qpts[q, 0]
                d[1] = x[i, 1] - qpts[q, 1]
                d[2] = x[i, 2] - qpts[q, 2]
                block_real(0, d, nul, &p, G)
                f = qface[q]
                for a in range(3):
                    for b in range(3):
                        for c in range(C):
                            out[i, a, c] += qw[q] * G[3 * a + b] * dens[f, b, c]
    return out_np


def potential_cplx(const double[:, ::1] x, const double[:, ::1] qpts, const double[::1] qw,
                   const long[::1] qface, const cplx[:, :, ::1] dens,
                   double lam, double mu, double rho, double omega,
                   acoef, bcoef, double switch):
    cdef Params p = make_params(lam, mu, rho, omega, acoef, bcoef, switch, 0)
    cdef Py_ssize_t M = x.shape[0], Q = qpts.shape[0], C = dens.shape[2]
    cdef Py_ssize_t i, q, a, b, c, f
    cdef double d[3]
    cdef double nul[3]
    cdef cplx G[9]
    out_np = np.zeros((M, 3, C), dtype=np.complex128)
    cdef cplx[:, :, ::1] out = out_np
    nul[0] = nul[1] = nul[2] = 0.0
    with nogil:
        for i in range(M):
            for q in range(Q):
                d[0] = x[i, 0] - qpts[q, 0]
                d[1] = x[i, 1] - qpts[q, 1]
                d[2] = x[i, 2] - qpts[q, 2]
                block_cplx(0, d, nul, &p, G)
                f = qface[q]
                for a in range(3):
                    for b in range(3):
                        for c in range(C):
                            out[i, a, c] = out[i, a, c] + qw[q] * G[3 * a + b] * dens[f, b, c]
    return out_np


def winding_numbers(const double[:, ::1] points, const double[:, :, ::1] tris):
    cdef Py_ssize_t n = points.shape[0], F = tris.shape[0], i, f, k
    cdef double a[3]
    cdef double b[3]
    cdef double c[3]
    cdef double la, lb, lc, num, den, acc
    out_np = np.empty(n)
    cdef double[::1] out = out_np
    with nogil:
        for i in range(n):
            acc = 0.0
            for f in range(F):
                for k in range(3):
                    a[k] = tris[f, 0, k] - points[i, k]
                    b[k] = tris[f, 1, k] - points[i, k]
                    c[k] = tris[f, 2, k] - points[i, k]
                la = sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2])
                lb = sqrt(b[0] * b[0] + b[1] * b[1] + b[2] * b[2])
                lc = sqrt(c[0] * c[0] + c[1] * c[1] + c[2] * c[2])
                num = (a[0] * (b[1] * c[2] - b[2] * c[1])
                       + a[1] * (b[2] * c[0] - b[0] * c[2])
                       + a[2] * (b[0] * c[1] - b[1] * c[0]))
                den = (la * lb * lc
                       + (a[0] * b[0] + a[1] * b[1] + a[2] * b[2]) * lc
                       + (b[0] * c[0] + b[1] * c[1] + b[2] * c[2]) * la
                       + (c[0] * a[0] + c[1] * a[1] + c[2] * a[2]) * lb)
                acc += 2.0 * atan2(num, den)
            out[i] = acc / (4.0 * M_PI)
    return out_np
