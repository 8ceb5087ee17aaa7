# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels for the hot per-entry loops.

Same contract as `_kernels_py`: CP prediction over entry batches, sequential
objective accumulation, and one in-place multiplicative update pass.
"""

from libc.math cimport fabs, log1p

import numpy as np

cimport numpy as cnp

BACKEND = "compiled"

KIND_HYBRID = 0
KIND_L2 = 1
KIND_CAUCHY = 2


cdef inline double _predict_one(const double[:, ::1] fs, const double[:, ::1] fd,
                                const double[:, ::1] ft, Py_ssize_t i,
                                Py_ssize_t j, Py_ssize_t k, Py_ssize_t rank):
    cdef double acc = 0.0
    cdef Py_ssize_t r
    for r in range(rank):
        acc += (fs[i, r] * fd[j, r]) * ft[k, r]
    return acc


def predict_entries(const double[:, ::1] fs, const double[:, ::1] fd,
                    const double[:, ::1] ft, const cnp.int64_t[::1] ii,
                    const cnp.int64_t[::1] jj, const cnp.int64_t[::1] kk):
    """CP predictions for a batch of positions, columns summed in order."""
    cdef Py_ssize_t n = ii.shape[0]
    cdef Py_ssize_t rank = fs.shape[1]
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t e
    for e in range(n):
        out[e] = _predict_one(fs, fd, ft, ii[e], jj[e], kk[e], rank)
    return out_arr


def objective_sum(const double[:, ::1] fs, const double[:, ::1] fd,
                  const double[:, ::1] ft, const cnp.int64_t[::1] ii,
                  const cnp.int64_t[::1] jj, const cnp.int64_t[::1] kk,
                  const double[::1] y, double lam, int kind, double gamma):
    """Regularized loss summed over the given observed entries."""
    if kind < 0 or kind > 2:
        raise ValueError(f"unknown loss kind code {kind}")
    cdef Py_ssize_t n = y.shape[0]
    cdef Py_ssize_t rank = fs.shape[1]
    cdef double acc = 0.0
    cdef double yh, delta, ad, term, reg, q
    cdef Py_ssize_t e, r, i, j, k
    for e in range(n):
        i = ii[e]; j = jj[e]; k = kk[e]
        yh = _predict_one(fs, fd, ft, i, j, k, rank)
        delta = y[e] - yh
        if kind == 0:
            ad = fabs(delta)
            term = 2.0 * delta * delta if ad <= 1.0 else ad + delta * delta
        elif kind == 1:
            term = delta * delta
        else:
            q = delta / gamma
            term = log1p(q * q)
        if lam != 0.0:
            reg = 0.0
            for r in range(rank):
                reg += (fs[i, r] * fs[i, r] + fd[j, r] * fd[j, r]
                        + ft[k, r] * ft[k, r])
            term += lam * reg
        acc += term
    return acc


def update_pass(double[:, ::1] fs, double[:, ::1] fd, double[:, ::1] ft,
                const cnp.int64_t[::1] ii, const cnp.int64_t[::1] jj,
                const cnp.int64_t[::1] kk, const double[::1] y,
                int mode, double lam, double guard, int kind, double gamma):
    """One multiplicative-update pass over the factor matrix for `mode`.

    Residuals come from the factor state at call time; the selected matrix
    is rewritten in place after all per-row sums are accumulated. Rows with
    no observed entries are left unchanged.
    """
    if kind < 0 or kind > 2:
        raise ValueError(f"unknown loss kind code {kind}")
    cdef Py_ssize_t n = y.shape[0]
    cdef Py_ssize_t rank = fs.shape[1]
    cdef double[:, ::1] upd
    cdef double[:, ::1] bfac, cfac
    cdef const cnp.int64_t[::1] rows
    cdef const cnp.int64_t[::1] bidx, cidx
    if mode == 0:
        upd = fs; rows = ii; bfac = fd; bidx = jj; cfac = ft; cidx = kk
    elif mode == 1:
        upd = fd; rows = jj; bfac = fs; bidx = ii; cfac = ft; cidx = kk
    elif mode == 2:
        upd = ft; rows = kk; bfac = fs; bidx = ii; cfac = fd; cidx = jj
    else:
        raise ValueError(f"mode axis must be 0, 1 or 2, got {mode}")

    cdef Py_ssize_t n_rows = upd.shape[0]
    num_arr = np.zeros((n_rows, rank), dtype=np.float64)
    den_arr = np.zeros((n_rows, rank), dtype=np.float64)
    cnt_arr = np.zeros(n_rows, dtype=np.int64)
    cdef double[:, ::1] num = num_arr
    cdef double[:, ::1] den = den_arr
    cdef cnp.int64_t[::1] cnt = cnt_arr

    cdef Py_ssize_t e, r, row
    cdef Py_ssize_t i, j, k, b, c
    cdef double yh, yv, delta, ay, bh, lam_term, w, p
    for e in range(n):
        i = ii[e]; j = jj[e]; k = kk[e]
        yh = _predict_one(fs, fd, ft, i, j, k, rank)
        yv = y[e]
        delta = yv - yh
        if kind == 0:
            # numerator gets ay*p (+p when delta > 1), denominator gets
            # bh*p (+p when delta < -1), both plus 2*lam*u per entry
            if delta < -1.0:
                ay = 2.0 * yv
                bh = 2.0 * yh + 1.0
            elif delta > 1.0:
                ay = 2.0 * yv + 1.0
                bh = 2.0 * yh
            else:
                ay = 4.0 * yv
                bh = 4.0 * yh
            lam_term = 2.0 * lam
        elif kind == 1:
            ay = yv
            bh = yh
            lam_term = lam
        else:
            w = 1.0 / (gamma * gamma + delta * delta)
            ay = w * yv
            bh = w * yh
            lam_term = lam
        row = rows[e]
        b = bidx[e]
        c = cidx[e]
        cnt[row] += 1
        for r in range(rank):
            p = bfac[b, r] * cfac[c, r]
            num[row, r] += ay * p
            den[row, r] += bh * p + lam_term * upd[row, r]
    for row in range(n_rows):
        if cnt[row] == 0:
            continue
        for r in range(rank):
            upd[row, r] *= num[row, r] / (den[row, r] + guard)
