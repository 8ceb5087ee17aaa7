"""Pure numpy kernels: the fallback used when the compiled extension is absent.

Semantics mirror `_kernels.pyx` function-for-function. Per-slot accumulation
happens in stored entry order (np.bincount scans its input sequentially), so
results track the compiled kernels to the last few ulps.
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"

KIND_HYBRID = 0
KIND_L2 = 1
KIND_CAUCHY = 2


def predict_entries(fs, fd, ft, ii, jj, kk):
    """CP predictions for a batch of positions, columns summed in order."""
    out = np.zeros(len(ii), dtype=np.float64)
    for r in range(fs.shape[1]):
        out += (fs[ii, r] * fd[jj, r]) * ft[kk, r]
    return out


def objective_sum(fs, fd, ft, ii, jj, kk, y, lam, kind, gamma):
    """Regularized loss summed over the given observed entries."""
    delta = y - predict_entries(fs, fd, ft, ii, jj, kk)
    if kind == KIND_HYBRID:
        term = np.where(
            np.abs(delta) <= 1.0,
            2.0 * delta * delta,
            np.abs(delta) + delta * delta,
        )
    elif kind == KIND_L2:
        term = delta * delta
    elif kind == KIND_CAUCHY:
        q = delta / gamma
        term = np.log1p(q * q)
    else:
        raise ValueError(f"unknown loss kind code {kind}")
    if lam != 0.0:
        reg = np.zeros_like(term)
        for r in range(fs.shape[1]):
            reg += fs[ii, r] ** 2 + fd[jj, r] ** 2 + ft[kk, r] ** 2
        term = term + lam * reg
    return float(np.sum(term))


def update_pass(fs, fd, ft, ii, jj, kk, y, mode, lam, guard, kind, gamma):
    """One multiplicative-update pass over the factor matrix for `mode`.

    Residuals come from the factor state at call time; the selected matrix
    is rewritten in place after all per-row sums are accumulated. Rows with
    no observed entries are left unchanged.
    """
    yhat = predict_entries(fs, fd, ft, ii, jj, kk)
    delta = y - yhat
    factors = (fs, fd, ft)
    indexes = (ii, jj, kk)
    upd = factors[mode]
    rows = indexes[mode]
    others = [m for m in range(3) if m != mode]
    bfac, bidx = factors[others[0]], indexes[others[0]]
    cfac, cidx = factors[others[1]], indexes[others[1]]
    n_rows, rank = upd.shape

    if kind == KIND_HYBRID:
        lo = delta < -1.0
        hi = delta > 1.0
        mid = ~(lo | hi)
        # per-entry coefficients: numerator ay*p (+p when delta > 1),
        # denominator bh*p (+p when delta < -1), both plus 2*lam*u
        ay = np.where(mid, 4.0 * y, 2.0 * y) + np.where(hi, 1.0, 0.0)
        bh = np.where(mid, 4.0 * yhat, 2.0 * yhat) + np.where(lo, 1.0, 0.0)
        lam_term = 2.0 * lam
    elif kind == KIND_L2:
        ay = y
        bh = yhat
        lam_term = lam
    elif kind == KIND_CAUCHY:
        w = 1.0 / (gamma * gamma + delta * delta)
        ay = w * y
        bh = w * yhat
        lam_term = lam
    else:
        raise ValueError(f"unknown loss kind code {kind}")

    cnt = np.bincount(rows, minlength=n_rows)
    active = cnt > 0
    for r in range(rank):
        p = bfac[bidx, r] * cfac[cidx, r]
        num = np.bincount(rows, weights=ay * p, minlength=n_rows)
        den = np.bincount(rows, weights=bh * p, minlength=n_rows)
        den += (lam_term * cnt) * upd[:, r]
        upd[active, r] *= num[active] / (den[active] + guard)
