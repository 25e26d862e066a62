"""Pure-numpy versions of the compiled kernels in ``_kernels.pyx``.

Signatures match the compiled module exactly so either can be bound at import.
"""

import numpy as np

_SQ2_4 = np.sqrt(2.0) / 4.0
LOW = (0.25, 0.5, 0.25)
BAND = (_SQ2_4, 0.0, -_SQ2_4)
HIGH = (-0.25, 0.5, -0.25)


def _forward(cur, taps, s):
    # taps act on cur[n+s], cur[n], cur[n-s]
    return taps[0] * np.roll(cur, -s) + taps[1] * cur + taps[2] * np.roll(cur, s)


def _backward(cur, taps, s):
    return taps[0] * np.roll(cur, s) + taps[1] * cur + taps[2] * np.roll(cur, -s)


def analysis(v, levels, out):
    m = v.shape[0]
    if out.shape[0] != (2 * levels + 1) * m:
        raise ValueError("output buffer has wrong length")
    cur = np.asarray(v, dtype=float)
    for lev in range(levels):
        s = (1 << lev) % m
        out[(1 + 2 * lev) * m:(2 + 2 * lev) * m] = _forward(cur, BAND, s)
        out[(2 + 2 * lev) * m:(3 + 2 * lev) * m] = _forward(cur, HIGH, s)
        cur = _forward(cur, LOW, s)
    out[:m] = cur
    return out


def synthesis(y, levels, out):
    m = out.shape[0]
    if y.shape[0] != (2 * levels + 1) * m:
        raise ValueError("coefficient vector has wrong length")
    cur = np.array(y[:m], dtype=float)
    for lev in range(levels - 1, -1, -1):
        s = (1 << lev) % m
        cur = (_backward(cur, LOW, s)
               + _backward(y[(1 + 2 * lev) * m:(2 + 2 * lev) * m], BAND, s)
               + _backward(y[(2 + 2 * lev) * m:(3 + 2 * lev) * m], HIGH, s))
    out[:] = cur
    return out


def _project(proj, v):
    if proj.shape[0] == 1:
        kern = proj[0]
        return np.fft.irfft(np.fft.rfft(kern) * np.fft.rfft(v), n=kern.shape[0])
    return proj.T @ (proj @ v)


def gram_apply(b, levels, proj, out):
    m = proj.shape[1]
    if b.shape[0] != (2 * levels + 1) * m or out.shape[0] != b.shape[0]:
        raise ValueError("dimension mismatch")
    tmp = synthesis(b, levels, np.empty(m))
    return analysis(_project(proj, tmp), levels, out)


def hard_threshold(z, thresh, out):
    keep = np.abs(z) > thresh
    np.copyto(out, np.where(keep, z, 0.0))
    return int(np.count_nonzero(keep))


def soft_threshold(z, gamma, out):
    np.copyto(out, np.sign(z) * np.maximum(np.abs(z) - gamma, 0.0))
    return out


def el0m_step(y, ksr, thresh, c, levels, proj, x_out, y_out, gram_out):
    nnz = hard_threshold(y, thresh, x_out)
    np.add(x_out, c * ksr, out=y_out)
    gram_apply(y_out, levels, proj, gram_out)
    y_out -= (c / (1.0 + c)) * gram_out
    return nnz


NCOL = 9
_EPS = np.finfo(float).eps
_U64 = np.uint64


def _mix(z):
    with np.errstate(over="ignore"):
        z = z + _U64(0x9E3779B97F4A7C15)
        z = (z ^ (z >> _U64(30))) * _U64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> _U64(27))) * _U64(0x94D049BB133111EB)
        return z ^ (z >> _U64(31))


def _hash_of(nonzero):
    idx = np.flatnonzero(nonzero).astype(np.uint64) + _U64(1)
    return int(np.sum(_mix(idx), dtype=np.uint64))


def support_hash(x):
    return _hash_of(np.asarray(x) != 0.0)


def el0m_run(ksr, y, x, beta, gamma, levels, proj, tol, max_iter, inner_max,
             inner_tol, rec, hashes):
    n, m = y.shape[0], proj.shape[1]
    if n != (2 * levels + 1) * m or x.shape[0] != n or ksr.shape[0] != n:
        raise ValueError("dimension mismatch")
    if rec.shape[0] < max_iter or rec.shape[1] != NCOL or hashes.shape[0] < max_iter:
        raise ValueError("record buffers too small")
    c = beta / gamma
    a = c / (1.0 + c)
    thr = np.sqrt(2.0 * beta)
    wxy = gamma / (2.0 * beta)
    g = np.empty(n)
    status = 0
    k = 0
    for k in range(1, max_iter + 1):
        yp = y.copy()
        keep = np.abs(y) > thr
        xn = np.where(keep, y, 0.0)
        changed = float(np.any(keep != (x != 0.0)))
        dx = float(np.linalg.norm(xn - x))
        x[:] = xn
        b = xn + c * ksr
        inner = 0
        if inner_max <= 0:
            gram_apply(b, levels, proj, g)
            y[:] = b - a * g
            g /= 1.0 + c
        else:
            v = y.copy()
            for _ in range(inner_max):
                gram_apply(v, levels, proj, g)
                t = b - c * g
                dv = np.linalg.norm(t - v)
                v = t
                inner += 1
                if dv <= inner_tol * max(np.linalg.norm(v), 1.0):
                    break
            y[:] = v
            gram_apply(y, levels, proj, g)
        res = g - ksr
        misfit = 0.5 * float(res @ res)
        ay = np.abs(y)
        env = float(np.sum(np.where(ay >= thr, 1.0, y * y / (2.0 * beta))))
        dxy = float((x - y) @ (x - y))
        nnz = int(np.count_nonzero(keep))
        xy = np.where(ay > thr, y, 0.0)
        rec[k - 1] = (misfit + wxy * dxy + gamma * nnz, misfit + gamma * env,
                      misfit + wxy * dxy, nnz,
                      np.linalg.norm(y - yp) / max(np.linalg.norm(yp), _EPS),
                      np.linalg.norm(y - xy + c * res), dx, changed, inner)
        hashes[k - 1] = _hash_of(keep)
        if not np.all(np.isfinite(rec[k - 1, [0, 1, 4]])):
            status = -1
            break
        if rec[k - 1, 4] <= tol:
            status = 1
            break
    x[:] = np.where(np.abs(y) > thr, y, 0.0)
    return k, status


def l1m_run(ksr, y, gamma, levels, proj, tol, max_iter, rec):
    n, m = y.shape[0], proj.shape[1]
    if n != (2 * levels + 1) * m or ksr.shape[0] != n:
        raise ValueError("dimension mismatch")
    if rec.shape[0] < max_iter or rec.shape[1] != 3:
        raise ValueError("record buffer too small")
    y[:] = 0.0
    v = np.zeros(n)
    g = np.empty(n)
    tk = 1.0
    status = 0
    k = 0
    for k in range(1, max_iter + 1):
        gram_apply(v, levels, proj, g)
        yp = y.copy()
        soft_threshold(v - (g - ksr), gamma, y)
        tn = (1.0 + np.sqrt(1.0 + 4.0 * tk * tk)) / 2.0
        v = y + ((tk - 1.0) / tn) * (y - yp)
        tk = tn
        gram_apply(y, levels, proj, g)
        res = g - ksr
        rec[k - 1] = (0.5 * float(res @ res) + gamma * float(np.sum(np.abs(y))),
                      np.linalg.norm(y - yp) / max(np.linalg.norm(yp), _EPS),
                      np.count_nonzero(y))
        if not np.isfinite(rec[k - 1, 0]):
            status = -1
            break
        if rec[k - 1, 1] <= tol:
            status = 1
            break
    return k, status
