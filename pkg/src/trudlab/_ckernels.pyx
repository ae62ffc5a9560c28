# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled stencil kernels; see ``_pykernels`` for the reference semantics."""
import numpy as np

from libc.math cimport pow, sqrt, INFINITY

BACKEND = "cython"


def _stack2(arr):
    return np.ascontiguousarray(arr.reshape((arr.size // (arr.shape[arr.ndim - 2] * arr.shape[arr.ndim - 1]),
                                             arr.shape[arr.ndim - 2], arr.shape[arr.ndim - 1])))


cdef inline int _mode(double e) noexcept nogil:
    if e == 0.0:
        return 1
    if e == 1.0:
        return 2
    if e == 0.5:
        return 3
    if e == -0.5:
        return 4
    if e == 2.0:
        return 5
    if e == -0.25:
        return 6
    if e == -1.0:
        return 7
    if e == 1.5:
        return 8
    return 0


cdef inline double _pw(double x, double e, int mode) noexcept nogil:
    if mode == 1:
        return 1.0
    elif mode == 2:
        return x
    elif mode == 3:
        return sqrt(x)
    elif mode == 4:
        return 1.0 / sqrt(x)
    elif mode == 5:
        return x * x
    elif mode == 6:
        return 1.0 / sqrt(sqrt(x))
    elif mode == 7:
        return 1.0 / x
    elif mode == 8:
        return x * sqrt(x)
    return pow(x, e)


cdef inline double _face_coef(double s, double p, double ea, int mea) noexcept nogil:
    if p == 2.0:
        return 1.0
    if s > 0.0:
        return _pw(s, ea, mea)
    return 0.0


cdef void _faces1(const double[:, ::1] v, double[:, ::1] F, double[:, ::1] A,
                  double p, double eps, double h) noexcept nogil:
    cdef Py_ssize_t m = v.shape[0], n = v.shape[1], k, i
    cdef double g, a, ea = 0.5 * (p - 2.0), eps2 = eps * eps
    cdef int mea = _mode(ea)
    for k in range(m):
        for i in range(n - 1):
            g = (v[k, i + 1] - v[k, i]) / h
            a = _face_coef(g * g + eps2, p, ea, mea)
            A[k, i] = a
            F[k, i] = a * g


cdef void _faces2(const double[:, :, ::1] v, double[:, :, ::1] FX, double[:, :, ::1] FY,
                  double[:, :, ::1] AX, double[:, :, ::1] AY,
                  double p, double eps, double h) noexcept nogil:
    cdef Py_ssize_t m = v.shape[0], nx = v.shape[1], ny = v.shape[2], k, i, j
    cdef double gn, gt, a, ea = 0.5 * (p - 2.0), eps2 = eps * eps, q = 1.0 / (4.0 * h)
    cdef int mea = _mode(ea)
    for k in range(m):
        for i in range(nx - 1):
            for j in range(1, ny - 1):
                gn = (v[k, i + 1, j] - v[k, i, j]) / h
                gt = (v[k, i, j + 1] - v[k, i, j - 1] + v[k, i + 1, j + 1] - v[k, i + 1, j - 1]) * q
                a = _face_coef(gn * gn + gt * gt + eps2, p, ea, mea)
                AX[k, i, j - 1] = a
                FX[k, i, j - 1] = a * gn
        for i in range(1, nx - 1):
            for j in range(ny - 1):
                gn = (v[k, i, j + 1] - v[k, i, j]) / h
                gt = (v[k, i + 1, j] - v[k, i - 1, j] + v[k, i + 1, j + 1] - v[k, i - 1, j + 1]) * q
                a = _face_coef(gn * gn + gt * gt + eps2, p, ea, mea)
                AY[k, i - 1, j] = a
                FY[k, i - 1, j] = a * gn


def plap_1d(v, double p, double eps, double h):
    cdef double[:, ::1] vv = np.ascontiguousarray(np.atleast_2d(v), dtype=np.float64)
    cdef Py_ssize_t m = vv.shape[0], n = vv.shape[1], k, i
    F = np.zeros((m, n - 1))
    A = np.zeros((m, n - 1))
    cdef double[:, ::1] f = F
    _faces1(vv, f, A, p, eps, h)
    out = np.zeros((m, n))
    cdef double[:, ::1] o = out
    for k in range(m):
        for i in range(1, n - 1):
            o[k, i] = (f[k, i] - f[k, i - 1]) / h
    return out.reshape(np.shape(v))


def plap_2d(v, double p, double eps, double h):
    arr = np.asarray(v, dtype=np.float64)
    cdef double[:, :, ::1] vv = _stack2(arr)
    cdef Py_ssize_t m = vv.shape[0], nx = vv.shape[1], ny = vv.shape[2], k, i, j
    cdef double[:, :, ::1] fx = np.zeros((m, nx - 1, ny - 2))
    cdef double[:, :, ::1] fy = np.zeros((m, nx - 2, ny - 1))
    _faces2(vv, fx, fy, np.zeros((m, nx - 1, ny - 2)), np.zeros((m, nx - 2, ny - 1)), p, eps, h)
    out = np.zeros((m, nx, ny))
    cdef double[:, :, ::1] o = out
    for k in range(m):
        for i in range(1, nx - 1):
            for j in range(1, ny - 1):
                o[k, i, j] = (fx[k, i, j - 1] - fx[k, i - 1, j - 1] + fy[k, i - 1, j] - fy[k, i - 1, j - 1]) / h
    return out.reshape(arr.shape)


cdef inline double _node_coef(double vi, double amax, double p, double kappa, double floor,
                              double ec, int mec) noexcept nogil:
    if amax <= 0.0:
        return 0.0
    if p == 2.0:
        return amax
    if p > 2.0 and vi < floor:
        vi = floor
    return kappa * amax * _pw(vi, ec, mec)


cdef double _floor_1d(const double[:, ::1] v, const unsigned char[::1] interior, Py_ssize_t k,
                      double eps, double floor_rel) noexcept nogil:
    cdef Py_ssize_t i
    cdef double vmax = 0.0
    for i in range(v.shape[1]):
        if interior[i] and v[k, i] > vmax:
            vmax = v[k, i]
    return eps if eps > floor_rel * vmax else floor_rel * vmax


cdef double _floor_2d(const double[:, :, ::1] v, const unsigned char[:, ::1] interior, Py_ssize_t k,
                      double eps, double floor_rel) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double vmax = 0.0
    for i in range(v.shape[1]):
        for j in range(v.shape[2]):
            if interior[i, j] and v[k, i, j] > vmax:
                vmax = v[k, i, j]
    return eps if eps > floor_rel * vmax else floor_rel * vmax


def cfl_coef_1d(v, interior, double p, double eps, double h, double floor_rel):
    cdef double[:, ::1] vv = np.ascontiguousarray(np.atleast_2d(v), dtype=np.float64)
    cdef const unsigned char[::1] inn = np.ascontiguousarray(interior, dtype=np.uint8)
    cdef Py_ssize_t m = vv.shape[0], n = vv.shape[1], k, i
    cdef double[:, ::1] F = np.zeros((m, n - 1))
    cdef double[:, ::1] A = np.zeros((m, n - 1))
    cdef double kappa = (p - 1.0 if p > 2.0 else 1.0) / (p - 1.0), ec = 2.0 - p, c, cmax = 0.0, floor, a
    cdef int mec = _mode(ec)
    _faces1(vv, F, A, p, eps, h)
    for k in range(m):
        floor = _floor_1d(vv, inn, k, eps, floor_rel)
        for i in range(1, n - 1):
            if not inn[i]:
                continue
            a = A[k, i - 1] if A[k, i - 1] > A[k, i] else A[k, i]
            c = _node_coef(vv[k, i], a, p, kappa, floor, ec, mec)
            if c > cmax:
                cmax = c
    return cmax


def cfl_coef_2d(v, interior, double p, double eps, double h, double floor_rel):
    arr = np.asarray(v, dtype=np.float64)
    cdef double[:, :, ::1] vv = _stack2(arr)
    cdef const unsigned char[:, ::1] inn = np.ascontiguousarray(interior, dtype=np.uint8)
    cdef Py_ssize_t m = vv.shape[0], nx = vv.shape[1], ny = vv.shape[2], k, i, j
    cdef double[:, :, ::1] FX = np.zeros((m, nx - 1, ny - 2))
    cdef double[:, :, ::1] FY = np.zeros((m, nx - 2, ny - 1))
    cdef double[:, :, ::1] AX = np.zeros((m, nx - 1, ny - 2))
    cdef double[:, :, ::1] AY = np.zeros((m, nx - 2, ny - 1))
    cdef double kappa = (p - 1.0 if p > 2.0 else 1.0) / (p - 1.0), ec = 2.0 - p, c, cmax = 0.0, floor, a
    cdef int mec = _mode(ec)
    _faces2(vv, FX, FY, AX, AY, p, eps, h)
    for k in range(m):
        floor = _floor_2d(vv, inn, k, eps, floor_rel)
        for i in range(1, nx - 1):
            for j in range(1, ny - 1):
                if not inn[i, j]:
                    continue
                a = AX[k, i - 1, j - 1]
                if AX[k, i, j - 1] > a:
                    a = AX[k, i, j - 1]
                if AY[k, i - 1, j - 1] > a:
                    a = AY[k, i - 1, j - 1]
                if AY[k, i - 1, j] > a:
                    a = AY[k, i - 1, j]
                c = _node_coef(vv[k, i, j], a, p, kappa, floor, ec, mec)
                if c > cmax:
                    cmax = c
    return cmax


def explicit_advance_1d(double[:, ::1] w, double[:, ::1] v, interior, double p, double eps,
                        double h, double safety, double dt_max, double floor_rel,
                        double t, double t_stop, long max_steps):
    cdef const unsigned char[::1] inn = np.ascontiguousarray(interior, dtype=np.uint8)
    cdef Py_ssize_t m = w.shape[0], n = w.shape[1], k, i
    cdef double[:, ::1] F = np.zeros((m, n - 1))
    cdef double[:, ::1] A = np.zeros((m, n - 1))
    cdef double kappa = (p - 1.0 if p > 2.0 else 1.0) / (p - 1.0)
    cdef double ec = 2.0 - p, ev = 1.0 / (p - 1.0)
    cdef int mec = _mode(ec), mev = _mode(ev)
    cdef double cmax, c, a, dt, wn, floor, wmin = 0.0, dt_lo = INFINITY, dt_hi = 0.0
    cdef long steps = 0
    cdef bint last
    with nogil:
        while steps < max_steps and t < t_stop:
            _faces1(v, F, A, p, eps, h)
            cmax = 0.0
            for k in range(m):
                floor = _floor_1d(v, inn, k, eps, floor_rel) if p > 2.0 else 0.0
                for i in range(1, n - 1):
                    if not inn[i]:
                        continue
                    a = A[k, i - 1] if A[k, i - 1] > A[k, i] else A[k, i]
                    c = _node_coef(v[k, i], a, p, kappa, floor, ec, mec)
                    if c > cmax:
                        cmax = c
            dt = dt_max
            if cmax > 0.0 and safety * h * h / (2.0 * cmax) < dt:
                dt = safety * h * h / (2.0 * cmax)
            last = dt >= (t_stop - t) * (1.0 - 1e-12)
            if last:
                dt = t_stop - t
            for k in range(m):
                for i in range(1, n - 1):
                    if not inn[i]:
                        continue
                    wn = w[k, i] + dt * (F[k, i] - F[k, i - 1]) / h
                    if wn < 0.0:
                        if wn < wmin:
                            wmin = wn
                        wn = 0.0
                    w[k, i] = wn
                    v[k, i] = _pw(wn, ev, mev)
            if dt < dt_lo:
                dt_lo = dt
            if dt > dt_hi:
                dt_hi = dt
            t = t_stop if last else t + dt
            steps += 1
    return t, steps, dt_lo, dt_hi, wmin


def explicit_advance_2d(double[:, :, ::1] w, double[:, :, ::1] v, interior, double p, double eps,
                        double h, double safety, double dt_max, double floor_rel,
                        double t, double t_stop, long max_steps):
    cdef const unsigned char[:, ::1] inn = np.ascontiguousarray(interior, dtype=np.uint8)
    cdef Py_ssize_t m = w.shape[0], nx = w.shape[1], ny = w.shape[2], k, i, j
    cdef double[:, :, ::1] FX = np.zeros((m, nx - 1, ny - 2))
    cdef double[:, :, ::1] FY = np.zeros((m, nx - 2, ny - 1))
    cdef double[:, :, ::1] AX = np.zeros((m, nx - 1, ny - 2))
    cdef double[:, :, ::1] AY = np.zeros((m, nx - 2, ny - 1))
    cdef double kappa = (p - 1.0 if p > 2.0 else 1.0) / (p - 1.0)
    cdef double ec = 2.0 - p, ev = 1.0 / (p - 1.0)
    cdef int mec = _mode(ec), mev = _mode(ev)
    cdef double cmax, c, a, dt, wn, floor, wmin = 0.0, dt_lo = INFINITY, dt_hi = 0.0
    cdef long steps = 0
    cdef bint last
    with nogil:
        while steps < max_steps and t < t_stop:
            _faces2(v, FX, FY, AX, AY, p, eps, h)
            cmax = 0.0
            for k in range(m):
                floor = _floor_2d(v, inn, k, eps, floor_rel) if p > 2.0 else 0.0
                for i in range(1, nx - 1):
                    for j in range(1, ny - 1):
                        if not inn[i, j]:
                            continue
                        a = AX[k, i - 1, j - 1]
                        if AX[k, i, j - 1] > a:
                            a = AX[k, i, j - 1]
                        if AY[k, i - 1, j - 1] > a:
                            a = AY[k, i - 1, j - 1]
                        if AY[k, i - 1, j] > a:
                            a = AY[k, i - 1, j]
                        c = _node_coef(v[k, i, j], a, p, kappa, floor, ec, mec)
                        if c > cmax:
                            cmax = c
            dt = dt_max
            if cmax > 0.0 and safety * h * h / (4.0 * cmax) < dt:
                dt = safety * h * h / (4.0 * cmax)
            last = dt >= (t_stop - t) * (1.0 - 1e-12)
            if last:
                dt = t_stop - t
            for k in range(m):
                for i in range(1, nx - 1):
                    for j in range(1, ny - 1):
                        if not inn[i, j]:
                            continue
                        wn = w[k, i, j] + dt * (FX[k, i, j - 1] - FX[k, i - 1, j - 1]
                                                + FY[k, i - 1, j] - FY[k, i - 1, j - 1]) / h
                        if wn < 0.0:
                            if wn < wmin:
                                wmin = wn
                            wn = 0.0
                        w[k, i, j] = wn
                        v[k, i, j] = _pw(wn, ev, mev)
            if dt < dt_lo:
                dt_lo = dt
            if dt > dt_hi:
                dt_hi = dt
            t = t_stop if last else t + dt
            steps += 1
    return t, steps, dt_lo, dt_hi, wmin
