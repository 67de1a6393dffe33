# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled walk kernels; semantics mirror _pure.py one-for-one.

Randomness arrives pre-drawn from the caller, so a trajectory here and in
the pure backend consumes identical random numbers; results differ only by
floating-point summation order.
"""
import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, M_PI, acos, atan2, cos, fabs, hypot, log, sin, sqrt

cnp.import_array()

OK = 0

cdef double OWN_CONTACT = 1e-12
cdef double SAME_FACET = 1e-7
cdef double TWO_PI = 2.0 * M_PI
cdef double FEAS_TOL = 1e-9
cdef double TINY = 2.2250738585072014e-308


cdef inline double _dot(const double[::1] a, const double[::1] b) noexcept nogil:
    cdef Py_ssize_t i, n = a.shape[0]
    cdef double s = 0.0
    for i in range(n):
        s += a[i] * b[i]
    return s


cdef inline void _matvec(const double[:, ::1] A, const double[::1] x,
                         double[::1] out) noexcept nogil:
    cdef Py_ssize_t i, j, m = A.shape[0], d = A.shape[1]
    cdef double s
    for i in range(m):
        s = 0.0
        for j in range(d):
            s += A[i, j] * x[j]
        out[i] = s


cdef inline bint _inside(const double[::1] Ap, const double[::1] b) noexcept nogil:
    cdef Py_ssize_t j, m = Ap.shape[0]
    for j in range(m):
        if Ap[j] > b[j] + FEAS_TOL:
            return False
    return True


cdef inline void _tangent(const double[::1] p, const double[::1] u,
                          double[::1] v) noexcept nogil:
    cdef Py_ssize_t i, k, d = p.shape[0]
    cdef double pu = 0.0, n = 0.0, best
    for i in range(d):
        pu += p[i] * u[i]
    for i in range(d):
        v[i] = u[i] - pu * p[i]
        n += v[i] * v[i]
    n = sqrt(n)
    if n < 1e-12:
        # Deterministic fallback: project the axis least aligned with p.
        k = 0
        best = fabs(p[0])
        for i in range(1, d):
            if fabs(p[i]) < best:
                best = fabs(p[i])
                k = i
        n = 0.0
        for i in range(d):
            v[i] = -p[k] * p[i]
            if i == k:
                v[i] += 1.0
            n += v[i] * v[i]
        n = sqrt(n)
    for i in range(d):
        v[i] /= n


cdef inline double _wrap(double th) noexcept nogil:
    while th > M_PI:
        th -= TWO_PI
    while th <= -M_PI:
        th += TWO_PI
    return th


cdef inline bint _valid_contact(double ap, double av, double bj, double R,
                                double th) noexcept nogil:
    cdef double resid = fabs(ap * cos(th) + av * sin(th) - bj)
    cdef double scale = 1.0
    if fabs(bj) > scale:
        scale = fabs(bj)
    if R > scale:
        scale = R
    return resid <= 1e-8 * scale


cdef inline void _arc(const double[::1] Ap, const double[::1] Av,
                      const double[::1] b, double* tm, double* tp,
                      bint* bounded) noexcept nogil:
    cdef Py_ssize_t j, m = Ap.shape[0]
    cdef int s
    cdef double R, z, phi, ac, th, pos, neg
    cdef double best_pos = INFINITY, best_neg = -INFINITY
    cdef bint found = False
    for j in range(m):
        R = hypot(Ap[j], Av[j])
        if R <= 0.0:
            continue
        z = b[j] / R
        if z > 1.0 or z < -1.0:
            continue
        phi = atan2(Av[j], Ap[j])
        ac = acos(z)
        for s in range(2):
            th = _wrap(phi + ac if s == 0 else phi - ac)
            if fabs(th) < OWN_CONTACT:
                continue
            if not _valid_contact(Ap[j], Av[j], b[j], R, th):
                continue
            found = True
            pos = th if th > 0.0 else th + TWO_PI
            neg = th if th < 0.0 else th - TWO_PI
            if pos < best_pos:
                best_pos = pos
            if neg > best_neg:
                best_neg = neg
    if not found:
        tm[0] = -M_PI
        tp[0] = M_PI
        bounded[0] = False
    else:
        tm[0] = best_neg
        tp[0] = best_pos
        bounded[0] = True


cdef inline void _first_contact(const double[::1] Ap, const double[::1] Av,
                                const double[::1] b, Py_ssize_t exclude,
                                double* tstar, Py_ssize_t* jstar) noexcept nogil:
    cdef Py_ssize_t j, m = Ap.shape[0]
    cdef int s
    cdef double R, z, phi, ac, th, fwd
    tstar[0] = INFINITY
    jstar[0] = -1
    for j in range(m):
        R = hypot(Ap[j], Av[j])
        if R <= 0.0:
            continue
        z = b[j] / R
        if z > 1.0 or z < -1.0:
            continue
        phi = atan2(Av[j], Ap[j])
        ac = acos(z)
        for s in range(2):
            th = _wrap(phi + ac if s == 0 else phi - ac)
            if j == exclude and fabs(th) < SAME_FACET:
                continue
            if not _valid_contact(Ap[j], Av[j], b[j], R, th):
                continue
            fwd = th if th > 0.0 else th + TWO_PI
            if fwd < tstar[0]:
                tstar[0] = fwd
                jstar[0] = j


cdef inline void _blend(const double[::1] p, const double[::1] v, double th,
                        double[::1] out) noexcept nogil:
    cdef Py_ssize_t i, d = p.shape[0]
    cdef double c = cos(th), s = sin(th), n = 0.0
    for i in range(d):
        out[i] = c * p[i] + s * v[i]
        n += out[i] * out[i]
    n = sqrt(n)
    for i in range(d):
        out[i] /= n


def gcw_uniform_chain(double[:, ::1] A, double[::1] b, double[::1] p,
                      double[:, ::1] normals, double[::1] u01,
                      double[:, ::1] out, double[::1] widths,
                      long long[::1] counters):
    cdef Py_ssize_t i, j, n = normals.shape[0], d = p.shape[0], m = A.shape[0]
    cdef double tm, tp, th
    cdef bint bounded
    v_arr = np.empty(d)
    c_arr = np.empty(d)
    ap_arr = np.empty(m)
    av_arr = np.empty(m)
    cdef double[::1] v = v_arr, cand = c_arr, Ap = ap_arr, Av = av_arr
    with nogil:
        for i in range(n):
            _tangent(p, normals[i], v)
            _matvec(A, p, Ap)
            _matvec(A, v, Av)
            _arc(Ap, Av, b, &tm, &tp, &bounded)
            th = tm + u01[i] * (tp - tm)
            _blend(p, v, th, cand)
            _matvec(A, cand, Ap)
            if _inside(Ap, b):
                for j in range(d):
                    p[j] = cand[j]
            else:
                counters[2] += 1
            for j in range(d):
                out[i, j] = p[j]
            widths[i] = tp - tm
    return OK


def gcw_vmf_chain(double[:, ::1] A, double[::1] b, double[::1] p,
                  double[::1] mu, double alpha,
                  double[:, ::1] normals, double[:, ::1] uprop,
                  double[:, ::1] uacc, double[:, ::1] out,
                  long long[::1] counters):
    cdef Py_ssize_t i, j, k, n = normals.shape[0], d = p.shape[0], m = A.shape[0]
    cdef Py_ssize_t inner = uprop.shape[1]
    cdef double tm, tp, th, th_new, cp, cv, h, lo, hi, wlen, lo2, hi2, wlen2, logr
    cdef bint bounded
    v_arr = np.empty(d)
    c_arr = np.empty(d)
    ap_arr = np.empty(m)
    av_arr = np.empty(m)
    cdef double[::1] v = v_arr, cand = c_arr, Ap = ap_arr, Av = av_arr
    with nogil:
        for i in range(n):
            _tangent(p, normals[i], v)
            _matvec(A, p, Ap)
            _matvec(A, v, Av)
            _arc(Ap, Av, b, &tm, &tp, &bounded)
            cp = _dot(mu, p)
            cv = _dot(mu, v)
            h = (tp - tm) / 3.0
            th = 0.0
            if h > 0.0:
                for k in range(inner):
                    lo = tm if tm > th - 0.5 * h else th - 0.5 * h
                    hi = tp if tp < th + 0.5 * h else th + 0.5 * h
                    wlen = hi - lo
                    th_new = lo + uprop[i, k] * wlen
                    lo2 = tm if tm > th_new - 0.5 * h else th_new - 0.5 * h
                    hi2 = tp if tp < th_new + 0.5 * h else th_new + 0.5 * h
                    wlen2 = hi2 - lo2
                    logr = alpha * (cp * (cos(th_new) - cos(th))
                                    + cv * (sin(th_new) - sin(th))) \
                        + log(wlen) - log(wlen2)
                    if log(uacc[i, k]) <= logr:
                        th = th_new
            _blend(p, v, th, cand)
            _matvec(A, cand, Ap)
            if _inside(Ap, b):
                for j in range(d):
                    p[j] = cand[j]
            else:
                counters[2] += 1
            for j in range(d):
                out[i, j] = p[j]
    return OK


def regcw_chain(double[:, ::1] A, double[::1] b, double[::1] p,
                double tau, long rho,
                double[:, ::1] normals, double[::1] u01,
                double[:, ::1] out, long long[::1] counters):
    cdef Py_ssize_t i, j, jstar, exclude
    cdef Py_ssize_t n = normals.shape[0], d = p.shape[0], m = A.shape[0]
    cdef double eta, L, tstar, aq, na, va, vq
    cdef long refl
    v_arr = np.empty(d)
    p0_arr = np.empty(d)
    q_arr = np.empty(d)
    c_arr = np.empty(d)
    vin_arr = np.empty(d)
    aproj_arr = np.empty(d)
    ap_arr = np.empty(m)
    av_arr = np.empty(m)
    cdef double[::1] v = v_arr, p0 = p0_arr, q = q_arr, cand = c_arr
    cdef double[::1] vin = vin_arr, aproj = aproj_arr, Ap = ap_arr, Av = av_arr
    with nogil:
        for i in range(n):
            eta = u01[i]
            if eta <= 0.0:
                eta = TINY
            L = -tau * log(eta)
            _tangent(p, normals[i], v)
            for j in range(d):
                p0[j] = p[j]
            refl = 0
            exclude = -1
            while True:
                _matvec(A, p, Ap)
                _matvec(A, v, Av)
                _first_contact(Ap, Av, b, exclude, &tstar, &jstar)
                if jstar < 0 or L < tstar:
                    _blend(p, v, L, cand)
                    _matvec(A, cand, Ap)
                    if _inside(Ap, b):
                        for j in range(d):
                            p[j] = cand[j]
                    else:
                        for j in range(d):
                            p[j] = p0[j]
                        counters[2] += 1
                    break
                # q = point at contact, vin = incoming direction there
                na = 0.0
                for j in range(d):
                    q[j] = cos(tstar) * p[j] + sin(tstar) * v[j]
                    na += q[j] * q[j]
                na = sqrt(na)
                for j in range(d):
                    q[j] /= na
                for j in range(d):
                    vin[j] = -sin(tstar) * p[j] + cos(tstar) * v[j]
                vq = _dot(vin, q)
                na = 0.0
                for j in range(d):
                    vin[j] -= vq * q[j]
                    na += vin[j] * vin[j]
                na = sqrt(na)
                for j in range(d):
                    vin[j] /= na
                # reflect at the projected facet normal
                aq = 0.0
                for j in range(d):
                    aq += A[jstar, j] * q[j]
                na = 0.0
                for j in range(d):
                    aproj[j] = A[jstar, j] - aq * q[j]
                    na += aproj[j] * aproj[j]
                na = sqrt(na)
                if na < 1e-12 * sqrt(_dot(A[jstar], A[jstar])):
                    for j in range(d):
                        p[j] = p0[j]
                    counters[2] += 1
                    break
                for j in range(d):
                    aproj[j] /= na
                va = _dot(vin, aproj)
                for j in range(d):
                    v[j] = vin[j] - 2.0 * va * aproj[j]
                vq = _dot(v, q)
                na = 0.0
                for j in range(d):
                    v[j] -= vq * q[j]
                    na += v[j] * v[j]
                na = sqrt(na)
                for j in range(d):
                    v[j] /= na
                    p[j] = q[j]
                L -= tstar
                refl += 1
                counters[1] += 1
                exclude = jstar
                if refl > rho:
                    for j in range(d):
                        p[j] = p0[j]
                    counters[0] += 1
                    break
            for j in range(d):
                out[i, j] = p[j]
    return OK
