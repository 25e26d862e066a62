# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops: undecimated framelet transform, frequency projection
and componentwise thresholding.

Every function writes into a caller-supplied output buffer and mirrors the
signature of the pure-numpy version in ``_fallback``.
"""

import numpy as np

from libc.math cimport sqrt, fabs

cdef double SQ2_4 = sqrt(2.0) / 4.0

cdef double LOW[3]
cdef double BAND[3]
cdef double HIGH[3]
LOW[:] = [0.25, 0.5, 0.25]
BAND[:] = [SQ2_4, 0.0, -SQ2_4]
HIGH[:] = [-0.25, 0.5, -0.25]


cdef inline void _level_forward(const double* cur, double* low, double* band,
                                double* high, Py_ssize_t m, Py_ssize_t s) nogil:
    cdef Py_ssize_t i, ip, im
    cdef double a, b, c
    for i in range(m):
        ip = i + s
        if ip >= m:
            ip -= m
        im = i - s
        if im < 0:
            im += m
        a = cur[ip]
        b = cur[i]
        c = cur[im]
        low[i] = LOW[0] * a + LOW[1] * b + LOW[2] * c
        band[i] = BAND[0] * a + BAND[2] * c
        high[i] = HIGH[0] * a + HIGH[1] * b + HIGH[2] * c


cdef inline void _level_backward(const double* low, const double* band,
                                 const double* high, double* out,
                                 Py_ssize_t m, Py_ssize_t s) nogil:
    cdef Py_ssize_t i, ip, im
    for i in range(m):
        ip = i + s
        if ip >= m:
            ip -= m
        im = i - s
        if im < 0:
            im += m
        # transpose of the forward taps: tap at +s reads from i - s
        out[i] = (LOW[0] * low[im] + LOW[1] * low[i] + LOW[2] * low[ip]
                  + BAND[0] * band[im] + BAND[2] * band[ip]
                  + HIGH[0] * high[im] + HIGH[1] * high[i] + HIGH[2] * high[ip])


cdef void _analysis(const double* v, Py_ssize_t m, int levels, double* out,
                    double* work) nogil:
    cdef Py_ssize_t i, s
    cdef int lev
    cdef double* cur = work
    cdef double* nxt = work + m
    cdef double* tmp
    for i in range(m):
        cur[i] = v[i]
    s = 1
    for lev in range(levels):
        _level_forward(cur, nxt, out + (1 + 2 * lev) * m, out + (2 + 2 * lev) * m,
                       m, s % m)
        tmp = cur
        cur = nxt
        nxt = tmp
        s *= 2
    for i in range(m):
        out[i] = cur[i]


cdef void _synthesis(const double* y, Py_ssize_t m, int levels, double* out,
                     double* work) nogil:
    cdef Py_ssize_t i, s
    cdef int lev
    cdef double* cur = work
    cdef double* nxt = work + m
    cdef double* tmp
    for i in range(m):
        cur[i] = y[i]
    for lev in range(levels - 1, -1, -1):
        s = (<Py_ssize_t> 1 << lev) % m
        _level_backward(cur, y + (1 + 2 * lev) * m, y + (2 + 2 * lev) * m, nxt, m, s)
        tmp = cur
        cur = nxt
        nxt = tmp
    for i in range(m):
        out[i] = cur[i]


cdef void _project(const double* proj, Py_ssize_t p, const double* v, double* out,
                   Py_ssize_t m, double* tmp) nogil:
    # p == 1: circulant with first column proj; otherwise out = B^T B v
    cdef Py_ssize_t i, j, k
    cdef double acc
    cdef const double* row
    if p == 1:
        for i in range(m):
            acc = 0.0
            k = i
            for j in range(m):
                acc += proj[k] * v[j]
                k -= 1
                if k < 0:
                    k += m
            out[i] = acc
        return
    for i in range(m):
        out[i] = 0.0
    for j in range(p):
        row = proj + j * m
        acc = 0.0
        for i in range(m):
            acc += row[i] * v[i]
        tmp[j] = acc
    for j in range(p):
        row = proj + j * m
        acc = tmp[j]
        for i in range(m):
            out[i] += acc * row[i]


cdef inline void _gram(const double* b, Py_ssize_t m, int levels, const double* proj,
                       Py_ssize_t p, double* out, double* work) nogil:
    # work holds 4*m + p doubles
    _synthesis(b, m, levels, work + 2 * m, work)
    _project(proj, p, work + 2 * m, work + 3 * m, m, work + 4 * m)
    _analysis(work + 3 * m, m, levels, out, work)


def analysis(const double[::1] v, int levels, double[::1] out):
    cdef Py_ssize_t m = v.shape[0]
    if out.shape[0] != (2 * levels + 1) * m:
        raise ValueError("output buffer has wrong length")
    cdef double[::1] work = np.empty(2 * m)
    with nogil:
        _analysis(&v[0], m, levels, &out[0], &work[0])
    return out


def synthesis(const double[::1] y, int levels, double[::1] out):
    cdef Py_ssize_t m = out.shape[0]
    if y.shape[0] != (2 * levels + 1) * m:
        raise ValueError("coefficient vector has wrong length")
    cdef double[::1] work = np.empty(2 * m)
    with nogil:
        _synthesis(&y[0], m, levels, &out[0], &work[0])
    return out


def gram_apply(const double[::1] b, int levels, const double[:, ::1] proj,
               double[::1] out):
    """out = W C W^T b; C is the circulant with first column proj[0] when proj
    has one row, else proj^T proj."""
    cdef Py_ssize_t m = proj.shape[1], p = proj.shape[0]
    if b.shape[0] != (2 * levels + 1) * m or out.shape[0] != b.shape[0]:
        raise ValueError("dimension mismatch")
    cdef double[::1] work = np.empty(4 * m + p)
    with nogil:
        _gram(&b[0], m, levels, &proj[0, 0], p, &out[0], &work[0])
    return out


def hard_threshold(const double[::1] z, double thresh, double[::1] out):
    """Keep entries with |z| > thresh; returns the number kept."""
    cdef Py_ssize_t i, n = z.shape[0], nnz = 0
    with nogil:
        for i in range(n):
            if fabs(z[i]) > thresh:
                out[i] = z[i]
                nnz += 1
            else:
                out[i] = 0.0
    return nnz


def soft_threshold(const double[::1] z, double gamma, double[::1] out):
    cdef Py_ssize_t i, n = z.shape[0]
    cdef double a
    with nogil:
        for i in range(n):
            a = fabs(z[i]) - gamma
            if a > 0.0:
                out[i] = a if z[i] > 0.0 else -a
            else:
                out[i] = 0.0
    return out


def el0m_step(const double[::1] y, const double[::1] ksr, double thresh,
              double c, int levels, const double[:, ::1] proj,
              double[::1] x_out, double[::1] y_out, double[::1] gram_out):
    """One closed-form EL0M sweep.

    x_out = prox(y); b = x_out + c*ksr; gram_out = K*K b;
    y_out = b - c/(1+c) * gram_out.  Returns nnz(x_out).
    """
    cdef Py_ssize_t i, n = y.shape[0], m = proj.shape[1], p = proj.shape[0], nnz = 0
    cdef double a = c / (1.0 + c)
    if n != (2 * levels + 1) * m:
        raise ValueError("dimension mismatch")
    cdef double[::1] work = np.empty(4 * m + p)
    with nogil:
        for i in range(n):
            if fabs(y[i]) > thresh:
                x_out[i] = y[i]
                nnz += 1
            else:
                x_out[i] = 0.0
            y_out[i] = x_out[i] + c * ksr[i]
        _gram(&y_out[0], m, levels, &proj[0, 0], p, &gram_out[0], &work[0])
        for i in range(n):
            y_out[i] = y_out[i] - a * gram_out[i]
    return nnz


# ---------------------------------------------------------------------------
# full solver loops

# per-iteration record columns shared with _fallback and solvers
# F, Q, G, support, rel_change, fp_residual, step_x, support_changed, inner
cdef enum:
    NCOL = 9

cdef inline unsigned long long _mix(unsigned long long z) nogil:
    # splitmix64 finalizer
    z = z + 0x9E3779B97F4A7C15ULL
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


def support_hash(const double[::1] x):
    """Order-free 64-bit hash of the nonzero index set."""
    cdef Py_ssize_t i, n = x.shape[0]
    cdef unsigned long long h = 0
    with nogil:
        for i in range(n):
            if x[i] != 0.0:
                h += _mix(<unsigned long long> (i + 1))
    return h


cdef inline double _dot(const double* a, const double* b, Py_ssize_t n) nogil:
    cdef Py_ssize_t i
    cdef double s = 0.0
    for i in range(n):
        s += a[i] * b[i]
    return s


def el0m_run(const double[::1] ksr, double[::1] y, double[::1] x,
             double beta, double gamma, int levels, const double[:, ::1] proj,
             double tol, int max_iter, int inner_max, double inner_tol,
             double[:, ::1] rec, unsigned long long[::1] hashes):
    """Iterate x <- prox(y), y <- (I + cK*K)^{-1}(x + c K*r) in place.

    ``y`` and ``x`` hold the starting point and receive the final iterates
    (x is prox of the final y).  Row k-1 of ``rec`` describes iteration k.
    With ``inner_max > 0`` the linear step runs the contraction
    v <- x + c K*r - c K*K v instead of the closed form.
    Returns (iterations, status) with status 1 converged, 0 budget
    exhausted, -1 non-finite value.
    """
    cdef Py_ssize_t n = y.shape[0], m = proj.shape[1], p = proj.shape[0], i
    if n != (2 * levels + 1) * m or x.shape[0] != n or ksr.shape[0] != n:
        raise ValueError("dimension mismatch")
    if rec.shape[0] < max_iter or rec.shape[1] != NCOL or hashes.shape[0] < max_iter:
        raise ValueError("record buffers too small")
    cdef double c = beta / gamma
    cdef double a = c / (1.0 + c)
    cdef double thr = sqrt(2.0 * beta)
    cdef double wxy = gamma / (2.0 * beta)
    cdef double[::1] buf = np.empty(6 * n + 4 * m + p)
    cdef double* yp = &buf[0]
    cdef double* xn = &buf[n]
    cdef double* g = &buf[2 * n]
    cdef double* b = &buf[3 * n]
    cdef double* v = &buf[4 * n]
    cdef double* res = &buf[5 * n]
    cdef double* work = &buf[6 * n]
    cdef double* yy = &y[0]
    cdef double* xx = &x[0]
    cdef const double* kr = &ksr[0]
    cdef int k, j, status = 0, inner
    cdef Py_ssize_t nnz
    cdef unsigned long long h
    cdef double t, misfit, env, dxy, dx, dy, ny, fp, dv, nv, changed
    with nogil:
        for k in range(1, max_iter + 1):
            # x-step and bookkeeping against the previous x
            nnz = 0
            h = 0
            dx = 0.0
            changed = 0.0
            for i in range(n):
                yp[i] = yy[i]
                t = yy[i] if fabs(yy[i]) > thr else 0.0
                if (t != 0.0) != (xx[i] != 0.0):
                    changed = 1.0
                dx += (t - xx[i]) * (t - xx[i])
                xx[i] = t
                if t != 0.0:
                    nnz += 1
                    h += _mix(<unsigned long long> (i + 1))
                b[i] = t + c * kr[i]
            inner = 0
            if inner_max <= 0:
                _gram(b, m, levels, &proj[0, 0], p, g, work)
                for i in range(n):
                    yy[i] = b[i] - a * g[i]
                    g[i] = g[i] / (1.0 + c)
            else:
                for i in range(n):
                    v[i] = yy[i]
                for j in range(inner_max):
                    _gram(v, m, levels, &proj[0, 0], p, g, work)
                    dv = 0.0
                    nv = 0.0
                    for i in range(n):
                        t = b[i] - c * g[i]
                        dv += (t - v[i]) * (t - v[i])
                        nv += t * t
                        v[i] = t
                    inner += 1
                    if sqrt(dv) <= inner_tol * (sqrt(nv) if nv > 1.0 else 1.0):
                        break
                for i in range(n):
                    yy[i] = v[i]
                _gram(yy, m, levels, &proj[0, 0], p, g, work)
            # g now holds K*K y
            misfit = 0.0
            env = 0.0
            dxy = 0.0
            dy = 0.0
            ny = 0.0
            for i in range(n):
                res[i] = g[i] - kr[i]
                misfit += res[i] * res[i]
                t = fabs(yy[i])
                env += 1.0 if t >= thr else yy[i] * yy[i] / (2.0 * beta)
                dxy += (xx[i] - yy[i]) * (xx[i] - yy[i])
                dy += (yy[i] - yp[i]) * (yy[i] - yp[i])
                ny += yp[i] * yp[i]
            misfit *= 0.5
            fp = 0.0
            for i in range(n):
                xn[i] = yy[i] if fabs(yy[i]) > thr else 0.0
                t = yy[i] - xn[i] + c * res[i]
                fp += t * t
            rec[k - 1, 0] = misfit + wxy * dxy + gamma * nnz
            rec[k - 1, 1] = misfit + gamma * env
            rec[k - 1, 2] = misfit + wxy * dxy
            rec[k - 1, 3] = nnz
            rec[k - 1, 4] = sqrt(dy) / (sqrt(ny) if sqrt(ny) > 2.220446049250313e-16
                                        else 2.220446049250313e-16)
            rec[k - 1, 5] = sqrt(fp)
            rec[k - 1, 6] = sqrt(dx)
            rec[k - 1, 7] = changed
            rec[k - 1, 8] = inner
            hashes[k - 1] = h
            t = rec[k - 1, 0] + rec[k - 1, 1] + rec[k - 1, 4]
            if t != t or t - t != 0.0:
                status = -1
                break
            if rec[k - 1, 4] <= tol:
                status = 1
                break
        for i in range(n):
            xx[i] = yy[i] if fabs(yy[i]) > thr else 0.0
    return k, status


def l1m_run(const double[::1] ksr, double[::1] y, double gamma, int levels,
            const double[:, ::1] proj, double tol, int max_iter, double[:, ::1] rec):
    """FISTA with unit step for 1/2|Ky - r|^2 + gamma |y|_1, from y = v = 0.

    Row k-1 of ``rec`` holds (objective, rel_change, support) of iterate k.
    Returns (iterations, status) as ``el0m_run``.
    """
    cdef Py_ssize_t n = y.shape[0], m = proj.shape[1], p = proj.shape[0], i
    if n != (2 * levels + 1) * m or ksr.shape[0] != n:
        raise ValueError("dimension mismatch")
    if rec.shape[0] < max_iter or rec.shape[1] != 3:
        raise ValueError("record buffer too small")
    cdef double[::1] buf = np.empty(3 * n + 4 * m + p)
    cdef double* v = &buf[0]
    cdef double* g = &buf[n]
    cdef double* yp = &buf[2 * n]
    cdef double* work = &buf[3 * n]
    cdef double* yy = &y[0]
    cdef const double* kr = &ksr[0]
    cdef double tk = 1.0, tn, mom, s, dy, ny, obj, l1, misfit
    cdef int k, status = 0
    cdef Py_ssize_t nnz
    with nogil:
        for i in range(n):
            yy[i] = 0.0
            v[i] = 0.0
        for k in range(1, max_iter + 1):
            _gram(v, m, levels, &proj[0, 0], p, g, work)
            nnz = 0
            for i in range(n):
                yp[i] = yy[i]
                s = v[i] - (g[i] - kr[i])
                if s > gamma:
                    yy[i] = s - gamma
                elif s < -gamma:
                    yy[i] = s + gamma
                else:
                    yy[i] = 0.0
                if yy[i] != 0.0:
                    nnz += 1
            tn = (1.0 + sqrt(1.0 + 4.0 * tk * tk)) / 2.0
            mom = (tk - 1.0) / tn
            tk = tn
            dy = 0.0
            ny = 0.0
            l1 = 0.0
            for i in range(n):
                s = yy[i] - yp[i]
                dy += s * s
                ny += yp[i] * yp[i]
                l1 += fabs(yy[i])
                v[i] = yy[i] + mom * s
            _gram(yy, m, levels, &proj[0, 0], p, g, work)
            misfit = 0.0
            for i in range(n):
                s = g[i] - kr[i]
                misfit += s * s
            obj = 0.5 * misfit + gamma * l1
            rec[k - 1, 0] = obj
            rec[k - 1, 1] = sqrt(dy) / (sqrt(ny) if sqrt(ny) > 2.220446049250313e-16
                                        else 2.220446049250313e-16)
            rec[k - 1, 2] = nnz
            if obj != obj or obj - obj != 0.0:
                status = -1
                break
            if rec[k - 1, 1] <= tol:
                status = 1
                break
    return k, status
