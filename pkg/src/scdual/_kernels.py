"""Hot numeric kernels, each with a numba and a pure-numpy implementation.

The numba path is used when numba imports and the environment variable
``SCDUAL_DISABLE_NUMBA`` is unset (or ``0``). Both paths are always importable
through :data:`NUMPY_KERNELS` and :data:`NUMBA_KERNELS` so tests and the
benchmark can compare them.
"""

import os

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and os.environ.get("SCDUAL_DISABLE_NUMBA", "0") in ("", "0")


# -- numpy reference path ---------------------------------------------------


def _tilted_grad_hess_np(Z, c, t, eta):
    n = Z.shape[0]
    pos = c != 0
    w = np.zeros(n)
    w[pos] = c[pos] * np.exp(eta[pos])  # units without mass may sit beyond exp range
    loss = (w.sum() - t @ eta) / n
    grad = Z.T @ (w - t) / n
    hess = (Z.T * w) @ Z / n
    return loss, grad, hess


def _ar1_recursion_np(first, innov, rho):
    n, T = innov.shape
    out = np.empty((n, T))
    out[:, 0] = first
    for s in range(1, T):
        out[:, s] = rho * out[:, s - 1] + innov[:, s]
    return out


def _lag1_autocorr_np(Y, var_floor, center):
    centered = Y - Y.mean(axis=1, keepdims=True) if center else Y
    den = (centered**2).sum(axis=1)
    num = (centered[:, 1:] * centered[:, :-1]).sum(axis=1)
    degenerate = den / Y.shape[1] < var_floor
    rho = np.where(degenerate, 0.0, num / np.where(degenerate, 1.0, den))
    return rho, degenerate


def _twoway_demean_np(X, tol, max_iter):
    out = np.array(X, dtype=float, copy=True)
    for it in range(1, max_iter + 1):
        unit = out.mean(axis=1, keepdims=True)
        out -= unit
        time = out.mean(axis=0, keepdims=True)
        out -= time
        change = max(np.abs(unit).max(initial=0.0), np.abs(time).max(initial=0.0))
        if change < tol:
            return out, it
    return out, max_iter


def _entropy_mirror_np(Xc, target, k, n, max_iter, tol):
    m = Xc.shape[0]
    A = Xc / n
    smax = np.linalg.norm(A, 2) if A.size else 0.0
    step = 1.0 / max(k / n**2 + n * smax * smax, 1e-300)
    lw = np.full(m, np.log(n / m))
    w = np.exp(lw)
    it = 0
    for it in range(1, max_iter + 1):
        r = w @ A - target
        g = k / n**2 * (lw + 1.0) + A @ r
        lw = lw - step * g
        lw -= lw.max()
        lw += np.log(n) - np.log(np.exp(lw).sum())
        w_new = np.exp(lw)
        change = np.max(np.abs(w_new - w))
        w = w_new
        if change < tol:
            break
    r = w @ A - target
    f = k / n**2 * np.sum(w * lw) + 0.5 * (r @ r)
    return w, f, it


NUMPY_KERNELS = {
    "tilted_grad_hess": _tilted_grad_hess_np,
    "ar1_recursion": _ar1_recursion_np,
    "lag1_autocorr": _lag1_autocorr_np,
    "twoway_demean": _twoway_demean_np,
    "entropy_mirror": _entropy_mirror_np,
}


# -- numba path -------------------------------------------------------------

if HAVE_NUMBA:

    @njit(cache=True, nogil=True)
    def _tilted_grad_hess_nb(Z, c, t, eta):
        n, q = Z.shape
        grad = np.zeros(q)
        hess = np.zeros((q, q))
        loss = 0.0
        for i in range(n):
            w = c[i] * np.exp(eta[i]) if c[i] != 0.0 else 0.0
            loss += w - t[i] * eta[i]
            r = w - t[i]
            for a in range(q):
                za = Z[i, a]
                grad[a] += r * za
                wa = w * za
                for b in range(a + 1):
                    hess[a, b] += wa * Z[i, b]
        for a in range(q):
            for b in range(a):
                hess[b, a] = hess[a, b]
        return loss / n, grad / n, hess / n

    @njit(cache=True, nogil=True)
    def _ar1_recursion_nb(first, innov, rho):
        n, T = innov.shape
        out = np.empty((n, T))
        for i in range(n):
            prev = first[i]
            out[i, 0] = prev
            for s in range(1, T):
                prev = rho * prev + innov[i, s]
                out[i, s] = prev
        return out

    @njit(cache=True, nogil=True)
    def _lag1_autocorr_nb(Y, var_floor, center):
        n, T = Y.shape
        rho = np.zeros(n)
        degenerate = np.zeros(n, dtype=np.bool_)
        for i in range(n):
            m = 0.0
            if center:
                for s in range(T):
                    m += Y[i, s]
                m /= T
            den = 0.0
            num = 0.0
            prev = Y[i, 0] - m
            den += prev * prev
            for s in range(1, T):
                cur = Y[i, s] - m
                den += cur * cur
                num += cur * prev
                prev = cur
            if den / T < var_floor:
                degenerate[i] = True
            else:
                rho[i] = num / den
        return rho, degenerate

    @njit(cache=True, nogil=True)
    def _twoway_demean_nb(X, tol, max_iter):
        n, T, m = X.shape
        out = X.copy()
        for it in range(1, max_iter + 1):
            change = 0.0
            for i in range(n):
                for k in range(m):
                    s = 0.0
                    for t in range(T):
                        s += out[i, t, k]
                    s /= T
                    if abs(s) > change:
                        change = abs(s)
                    for t in range(T):
                        out[i, t, k] -= s
            for t in range(T):
                for k in range(m):
                    s = 0.0
                    for i in range(n):
                        s += out[i, t, k]
                    s /= n
                    if abs(s) > change:
                        change = abs(s)
                    for i in range(n):
                        out[i, t, k] -= s
            if change < tol:
                return out, it
        return out, max_iter

    @njit(cache=True, nogil=True)
    def _entropy_mirror_nb(Xc, target, k, n, max_iter, tol):
        m, p = Xc.shape
        A = Xc / n
        smax = np.linalg.svd(A)[1][0] if p > 0 else 0.0
        step = 1.0 / max(k / n**2 + n * smax * smax, 1e-300)
        lw = np.full(m, np.log(n / m))
        w = np.exp(lw)
        r = np.empty(p)
        it = 0
        for it in range(1, max_iter + 1):
            for j in range(p):
                acc = 0.0
                for i in range(m):
                    acc += w[i] * A[i, j]
                r[j] = acc - target[j]
            top = -np.inf
            for i in range(m):
                g = k / n**2 * (lw[i] + 1.0)
                for j in range(p):
                    g += A[i, j] * r[j]
                lw[i] -= step * g
                top = max(top, lw[i])
            total = 0.0
            for i in range(m):
                lw[i] -= top
                total += np.exp(lw[i])
            shift = np.log(n) - np.log(total)
            change = 0.0
            for i in range(m):
                lw[i] += shift
                wi = np.exp(lw[i])
                change = max(change, abs(wi - w[i]))
                w[i] = wi
            if change < tol:
                break
        f = 0.0
        for i in range(m):
            f += w[i] * lw[i]
        f *= k / n**2
        for j in range(p):
            acc = 0.0
            for i in range(m):
                acc += w[i] * A[i, j]
            f += 0.5 * (acc - target[j]) ** 2
        return w, f, it

    NUMBA_KERNELS = {
        "tilted_grad_hess": _tilted_grad_hess_nb,
        "ar1_recursion": _ar1_recursion_nb,
        "lag1_autocorr": _lag1_autocorr_nb,
        "twoway_demean": _twoway_demean_nb,
        "entropy_mirror": _entropy_mirror_nb,
    }
else:  # pragma: no cover
    NUMBA_KERNELS = {}

ACTIVE = NUMBA_KERNELS if USE_NUMBA else NUMPY_KERNELS


def backend():
    return "numba" if USE_NUMBA else "numpy"


def tilted_grad_hess(Z, c, t, eta):
    """Loss, gradient and Hessian of ``mean(c*exp(eta) - t*eta)`` w.r.t. the
    coefficients of ``eta = Z @ coef``."""
    return ACTIVE["tilted_grad_hess"](Z, c, t, eta)


def ar1_recursion(first, innov, rho):
    """``out[:, 0] = first``, ``out[:, s] = rho*out[:, s-1] + innov[:, s]``.
    Column 0 of ``innov`` is ignored."""
    return ACTIVE["ar1_recursion"](
        np.ascontiguousarray(first, dtype=float),
        np.ascontiguousarray(innov, dtype=float),
        float(rho),
    )


def lag1_autocorr(Y, var_floor=1e-12, center=True):
    """Per-row ``sum_t y_t y_{t-1} / sum_t y_t^2`` after (optionally) removing
    the row mean. Rows with mean square below ``var_floor`` get 0."""
    return ACTIVE["lag1_autocorr"](np.ascontiguousarray(Y, dtype=float), float(var_floor), bool(center))


def twoway_demean(X, tol=1e-12, max_iter=1000):
    """Alternating unit/time demeaning of an ``(n, T, m)`` array."""
    X = np.ascontiguousarray(X, dtype=float)
    return ACTIVE["twoway_demean"](X, float(tol), int(max_iter))


def entropy_mirror(Xc, target, k, n, max_iter=200_000, tol=1e-13):
    """Entropic mirror descent for the primal entropy-balancing problem over
    control weights ``{w >= 0, sum(w) = n}``.

    The step ``1/L`` uses ``L = k/n^2 + n ||Xc/n||_2^2``, a smoothness
    constant relative to the entropy on that simplex, so every step descends.
    Returns ``(w, objective, iterations)``.
    """
    return ACTIVE["entropy_mirror"](
        np.ascontiguousarray(Xc, dtype=float),
        np.ascontiguousarray(target, dtype=float),
        float(k),
        float(n),
        int(max_iter),
        float(tol),
    )
