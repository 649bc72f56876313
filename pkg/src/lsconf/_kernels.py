"""Hot loops: pairwise similarity scans, nearest-target search, cosine loss.

Each kernel has a numba ``@njit`` version and a pure-numpy version. The numba
path is used when numba imports and ``LSCONF_DISABLE_NUMBA`` is unset (or
``0``). Both paths agree to within floating-point reassociation (~1e-15).
"""
from __future__ import annotations

import os

import numpy as np

ANTIPODAL_TOL = 1e-12

_disabled = os.environ.get("LSCONF_DISABLE_NUMBA", "0").strip().lower() not in ("", "0", "false", "no")

try:
    if _disabled:
        raise ImportError("disabled by LSCONF_DISABLE_NUMBA")
    from numba import njit

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False


# ---------------------------------------------------------------- numpy path


def pair_stats_numpy(x, tol=ANTIPODAL_TOL, block=1024):
    """Return ``(max |cos|, min |cos|)`` over distinct non-antipodal pairs of unit rows.

    Antipodal pairs (cos = -1 within ``tol``) are skipped. If no pair
    qualifies, both values are NaN.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    m = x.shape[0]
    hi = -np.inf
    lo = np.inf
    for s in range(0, m, block):
        g = x[s:s + block] @ x.T
        rows = np.arange(s, min(s + block, m))
        # upper triangle only: j > i
        mask = np.arange(m)[None, :] > rows[:, None]
        mask &= g > -1.0 + tol
        if not mask.any():
            continue
        a = np.abs(g[mask])
        hi = max(hi, a.max())
        lo = min(lo, a.min())
    if hi == -np.inf:
        return np.nan, np.nan
    return float(hi), float(lo)


def nearest_numpy(e, t):
    """Index of the max-cosine row of ``t`` for each row of ``e`` (first on ties)."""
    e = np.asarray(e, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    tn = t / np.linalg.norm(t, axis=1, keepdims=True)
    en = e / np.linalg.norm(e, axis=1, keepdims=True)
    return np.argmax(en @ tn.T, axis=1)


def cosine_loss_numpy(e, t, eps=1e-12):
    """Mean of ``1 - cos(e_i, t_i)`` and its gradient w.r.t. ``e``.

    Returns ``(loss, grad, n_clamped)`` where ``n_clamped`` counts rows whose
    norm was clamped at ``eps``.
    """
    b = e.shape[0]
    en = np.sqrt(np.einsum("ij,ij->i", e, e))
    tn = np.sqrt(np.einsum("ij,ij->i", t, t))
    clamped = en < eps
    en = np.maximum(en, eps)
    dots = np.einsum("ij,ij->i", e, t)
    cos = dots / (en * tn)
    loss = float(np.mean(1.0 - cos))
    grad = -(t / (en * tn)[:, None] - (cos / en**2)[:, None] * e) / b
    return loss, grad, int(clamped.sum())


# ---------------------------------------------------------------- numba path

if HAVE_NUMBA:

    @njit(cache=True)
    def _pair_stats_jit(x, tol):
        m, d = x.shape
        hi = -np.inf
        lo = np.inf
        for i in range(m):
            for j in range(i + 1, m):
                s = 0.0
                for k in range(d):
                    s += x[i, k] * x[j, k]
                if s <= -1.0 + tol:
                    continue
                a = abs(s)
                if a > hi:
                    hi = a
                if a < lo:
                    lo = a
        return hi, lo

    def pair_stats_numba(x, tol=ANTIPODAL_TOL):
        hi, lo = _pair_stats_jit(np.ascontiguousarray(x, dtype=np.float64), tol)
        if hi == -np.inf:
            return np.nan, np.nan
        return float(hi), float(lo)

    @njit(cache=True)
    def _nearest_jit(e, t):
        b, d = e.shape
        k = t.shape[0]
        tnorm = np.empty(k)
        for j in range(k):
            s = 0.0
            for c in range(d):
                s += t[j, c] * t[j, c]
            tnorm[j] = np.sqrt(s)
        out = np.empty(b, dtype=np.int64)
        for i in range(b):
            best = -np.inf
            arg = 0
            for j in range(k):
                s = 0.0
                for c in range(d):
                    s += e[i, c] * t[j, c]
                s /= tnorm[j]
                if s > best:
                    best = s
                    arg = j
            out[i] = arg
        return out

    def nearest_numba(e, t):
        # positive row scaling of e does not change the argmax
        return _nearest_jit(np.ascontiguousarray(e, dtype=np.float64),
                            np.ascontiguousarray(t, dtype=np.float64))

    @njit(cache=True)
    def _cosine_loss_jit(e, t, eps):
        b, d = e.shape
        grad = np.empty_like(e)
        total = 0.0
        clamped = 0
        for i in range(b):
            ee = 0.0
            tt = 0.0
            et = 0.0
            for c in range(d):
                ee += e[i, c] * e[i, c]
                tt += t[i, c] * t[i, c]
                et += e[i, c] * t[i, c]
            en = np.sqrt(ee)
            if en < eps:
                en = eps
                clamped += 1
            tn = np.sqrt(tt)
            cos = et / (en * tn)
            total += 1.0 - cos
            for c in range(d):
                grad[i, c] = -(t[i, c] / (en * tn) - cos / (en * en) * e[i, c]) / b
        return total / b, grad, clamped

    def cosine_loss_numba(e, t, eps=1e-12):
        loss, grad, clamped = _cosine_loss_jit(np.ascontiguousarray(e, dtype=np.float64),
                                               np.ascontiguousarray(t, dtype=np.float64), eps)
        return float(loss), grad, int(clamped)

    pair_stats = pair_stats_numba
    # a blocked BLAS matmul beats the jitted loop for nearest-target search
    nearest = nearest_numpy
    cosine_loss = cosine_loss_numba
else:
    pair_stats = pair_stats_numpy
    nearest = nearest_numpy
    cosine_loss = cosine_loss_numpy


BACKEND = "numba" if HAVE_NUMBA else "numpy"
