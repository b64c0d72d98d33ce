"""Sequential-minimal-optimization solver kernels.

Two interchangeable implementations live here: a numba-compiled kernel
(the default) and a pure numpy/Python twin.  Selection is via the
``LAMPER_NUMBA`` environment variable ("0"/"false"/"off"/"no" picks the
numpy path); when numba is not importable the numpy path is used
regardless.  Both twins execute the same update formulas in the same
order, so they produce identical models on the full-Gram path.

Solver outline (soft-margin dual, RBF kernel):

* scan all samples on the first sweep, then only non-bound samples,
  alternating back to full sweeps when a non-bound sweep is clean;
* a scanned sample violating its KKT condition beyond ``tol`` is paired
  with the partner of maximum ``|E1 - E2|`` among non-bound samples,
  falling back to an index-order scan of non-bound then all samples;
* terminates after ``max_passes`` consecutive clean sweeps, or when the
  update-count guard ``max_iter`` trips (returns best-so-far, flagged);
* the running bias is only a per-step estimate, so the returned bias is
  recomputed from the final alphas: mean functional gap over free support
  vectors, else the midpoint of the interval the bound samples allow.

The full Gram matrix is precomputed for n <= GRAM_CACHE_LIMIT samples;
beyond that, kernel rows are recomputed on demand to bound memory.
"""

from __future__ import annotations

import math
import os

import numpy as np

GRAM_CACHE_LIMIT = 4096

# relative alpha-step threshold below which a pair update is "no progress"
STEP_EPS = 1e-9
# tie margin for the endpoint-objective comparison when eta <= 0
OBJ_EPS = 1e-12
# alphas this close to 0 or C (relative to C) are snapped onto the bound
SNAP_EPS = 1e-12

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only on numba-free installs
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return wrap


def numba_enabled() -> bool:
    """True when the numba kernel is importable and not disabled by env."""
    flag = os.environ.get("LAMPER_NUMBA", "1").strip().lower()
    return HAVE_NUMBA and flag not in ("0", "false", "off", "no")


def rbf_gram(X: np.ndarray, gamma: float, Y: np.ndarray | None = None) -> np.ndarray:
    """exp(-gamma * squared distances); exact ones on the diagonal when Y is X."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    symmetric = Y is None
    Y = X if symmetric else np.ascontiguousarray(Y, dtype=np.float64)
    xx = np.sum(X * X, axis=1)[:, None]
    yy = np.sum(Y * Y, axis=1)[None, :]
    d2 = xx + yy - 2.0 * (X @ Y.T)
    np.maximum(d2, 0.0, out=d2)
    if symmetric:
        np.fill_diagonal(d2, 0.0)
    return np.exp(-gamma * d2)


@njit(cache=True)
def _sqdist_nb(X, i, j):
    s = 0.0
    for t in range(X.shape[1]):
        d = X[i, t] - X[j, t]
        s += d * d
    return s


@njit(cache=True)
def _take_step_nb(i1, i2, X, y, K, use_gram, gamma, C, alpha, f, b):
    if i1 == i2:
        return False, b
    n = y.shape[0]
    y1 = y[i1]
    y2 = y[i2]
    a1 = alpha[i1]
    a2 = alpha[i2]
    E1 = f[i1] + b - y1
    E2 = f[i2] + b - y2
    s = y1 * y2
    if s < 0.0:
        L = max(0.0, a2 - a1)
        H = min(C, C + a2 - a1)
    else:
        L = max(0.0, a1 + a2 - C)
        H = min(C, a1 + a2)
    if L == H:
        return False, b
    if use_gram:
        k11 = K[i1, i1]
        k12 = K[i1, i2]
        k22 = K[i2, i2]
    else:
        k11 = 1.0
        k12 = math.exp(-gamma * _sqdist_nb(X, i1, i2))
        k22 = 1.0
    eta = k11 + k22 - 2.0 * k12
    if eta > 0.0:
        a2new = a2 + y2 * (E1 - E2) / eta
        if a2new < L:
            a2new = L
        elif a2new > H:
            a2new = H
    else:
        # evaluate the restricted dual objective at both clip ends
        v1 = f[i1] - a1 * y1 * k11 - a2 * y2 * k12
        v2 = f[i2] - a1 * y1 * k12 - a2 * y2 * k22
        gsum = a1 + s * a2
        a1L = gsum - s * L
        a1H = gsum - s * H
        Lobj = (0.5 * k11 * a1L * a1L + 0.5 * k22 * L * L + s * k12 * a1L * L
                + y1 * a1L * v1 + y2 * L * v2 - a1L - L)
        Hobj = (0.5 * k11 * a1H * a1H + 0.5 * k22 * H * H + s * k12 * a1H * H
                + y1 * a1H * v1 + y2 * H * v2 - a1H - H)
        if Lobj < Hobj - OBJ_EPS:
            a2new = L
        elif Lobj > Hobj + OBJ_EPS:
            a2new = H
        else:
            return False, b
    snap = SNAP_EPS * C
    if a2new < snap:
        a2new = 0.0
    elif a2new > C - snap:
        a2new = C
    if abs(a2new - a2) < STEP_EPS * (a2new + a2 + STEP_EPS):
        return False, b
    a1new = a1 + s * (a2 - a2new)
    # rounding can push a1new just past a bound; move the spill into a2new
    if a1new < snap:
        a2new += s * a1new
        a1new = 0.0
    elif a1new > C - snap:
        a2new += s * (a1new - C)
        a1new = C
    if a2new < 0.0:
        a2new = 0.0
    elif a2new > C:
        a2new = C
    d1 = y1 * (a1new - a1)
    d2 = y2 * (a2new - a2)
    b1 = b - E1 - d1 * k11 - d2 * k12
    b2 = b - E2 - d1 * k12 - d2 * k22
    if 0.0 < a1new < C:
        bnew = b1
    elif 0.0 < a2new < C:
        bnew = b2
    else:
        bnew = 0.5 * (b1 + b2)
    if use_gram:
        row1 = K[i1]
        row2 = K[i2]
    else:
        row1 = np.empty(n)
        row2 = np.empty(n)
        for j in range(n):
            row1[j] = math.exp(-gamma * _sqdist_nb(X, i1, j))
            row2[j] = math.exp(-gamma * _sqdist_nb(X, i2, j))
        row1[i1] = 1.0
        row2[i2] = 1.0
    for k in range(n):
        f[k] += d1 * row1[k] + d2 * row2[k]
    alpha[i1] = a1new
    alpha[i2] = a2new
    return True, bnew


@njit(cache=True)
def _smo_nb(X, y, K, use_gram, gamma, C, tol, max_passes, max_iter):
    n = y.shape[0]
    alpha = np.zeros(n)
    f = np.zeros(n)
    b = 0.0
    updates = 0
    clean = 0
    examine_all = True
    converged = False
    exhausted = False
    while not exhausted:
        changed = 0
        for i2 in range(n):
            if not (examine_all or (alpha[i2] > 0.0 and alpha[i2] < C)):
                continue
            y2 = y[i2]
            a2 = alpha[i2]
            E2 = f[i2] + b - y2
            r2 = E2 * y2
            if not ((r2 < -tol and a2 < C) or (r2 > tol and a2 > 0.0)):
                continue
            stepped = False
            best = -1.0
            i1 = -1
            for j in range(n):
                if j == i2:
                    continue
                if alpha[j] > 0.0 and alpha[j] < C:
                    d = abs(f[j] + b - y[j] - E2)
                    if d > best:
                        best = d
                        i1 = j
            if i1 >= 0:
                stepped, b = _take_step_nb(i1, i2, X, y, K, use_gram, gamma, C,
                                           alpha, f, b)
            if not stepped:
                for j in range(n):
                    if j == i2 or not (alpha[j] > 0.0 and alpha[j] < C):
                        continue
                    stepped, b = _take_step_nb(j, i2, X, y, K, use_gram, gamma, C,
                                               alpha, f, b)
                    if stepped:
                        break
            if not stepped:
                for j in range(n):
                    if j == i2:
                        continue
                    stepped, b = _take_step_nb(j, i2, X, y, K, use_gram, gamma, C,
                                               alpha, f, b)
                    if stepped:
                        break
            if stepped:
                changed += 1
                updates += 1
                if updates >= max_iter:
                    exhausted = True
                    break
        if exhausted:
            break
        if changed == 0:
            clean += 1
        else:
            clean = 0
        if clean >= max_passes:
            converged = True
            break
        if examine_all:
            examine_all = False
        elif changed == 0:
            examine_all = True
    return alpha, b, updates, converged, f


def _rbf_row_np(X, i, gamma):
    d2 = np.sum((X - X[i]) ** 2, axis=1)
    row = np.exp(-gamma * d2)
    row[i] = 1.0
    return row


def _take_step_np(i1, i2, X, y, K, use_gram, gamma, C, alpha, f, b):
    if i1 == i2:
        return False, b
    y1 = y[i1]
    y2 = y[i2]
    a1 = alpha[i1]
    a2 = alpha[i2]
    E1 = f[i1] + b - y1
    E2 = f[i2] + b - y2
    s = y1 * y2
    if s < 0.0:
        L = max(0.0, a2 - a1)
        H = min(C, C + a2 - a1)
    else:
        L = max(0.0, a1 + a2 - C)
        H = min(C, a1 + a2)
    if L == H:
        return False, b
    if use_gram:
        k11 = K[i1, i1]
        k12 = K[i1, i2]
        k22 = K[i2, i2]
    else:
        k11 = 1.0
        k12 = math.exp(-gamma * float(np.sum((X[i1] - X[i2]) ** 2)))
        k22 = 1.0
    eta = k11 + k22 - 2.0 * k12
    if eta > 0.0:
        a2new = a2 + y2 * (E1 - E2) / eta
        if a2new < L:
            a2new = L
        elif a2new > H:
            a2new = H
    else:
        v1 = f[i1] - a1 * y1 * k11 - a2 * y2 * k12
        v2 = f[i2] - a1 * y1 * k12 - a2 * y2 * k22
        gsum = a1 + s * a2
        a1L = gsum - s * L
        a1H = gsum - s * H
        Lobj = (0.5 * k11 * a1L * a1L + 0.5 * k22 * L * L + s * k12 * a1L * L
                + y1 * a1L * v1 + y2 * L * v2 - a1L - L)
        Hobj = (0.5 * k11 * a1H * a1H + 0.5 * k22 * H * H + s * k12 * a1H * H
                + y1 * a1H * v1 + y2 * H * v2 - a1H - H)
        if Lobj < Hobj - OBJ_EPS:
            a2new = L
        elif Lobj > Hobj + OBJ_EPS:
            a2new = H
        else:
            return False, b
    snap = SNAP_EPS * C
    if a2new < snap:
        a2new = 0.0
    elif a2new > C - snap:
        a2new = C
    if abs(a2new - a2) < STEP_EPS * (a2new + a2 + STEP_EPS):
        return False, b
    a1new = a1 + s * (a2 - a2new)
    # rounding can push a1new just past a bound; move the spill into a2new
    if a1new < snap:
        a2new += s * a1new
        a1new = 0.0
    elif a1new > C - snap:
        a2new += s * (a1new - C)
        a1new = C
    if a2new < 0.0:
        a2new = 0.0
    elif a2new > C:
        a2new = C
    d1 = y1 * (a1new - a1)
    d2 = y2 * (a2new - a2)
    b1 = b - E1 - d1 * k11 - d2 * k12
    b2 = b - E2 - d1 * k12 - d2 * k22
    if 0.0 < a1new < C:
        bnew = b1
    elif 0.0 < a2new < C:
        bnew = b2
    else:
        bnew = 0.5 * (b1 + b2)
    if use_gram:
        row1 = K[i1]
        row2 = K[i2]
    else:
        row1 = _rbf_row_np(X, i1, gamma)
        row2 = _rbf_row_np(X, i2, gamma)
    f += d1 * row1 + d2 * row2
    alpha[i1] = a1new
    alpha[i2] = a2new
    return True, bnew


def _smo_np(X, y, K, use_gram, gamma, C, tol, max_passes, max_iter):
    n = y.shape[0]
    alpha = np.zeros(n)
    f = np.zeros(n)
    b = 0.0
    updates = 0
    clean = 0
    examine_all = True
    converged = False
    exhausted = False
    while not exhausted:
        changed = 0
        for i2 in range(n):
            if not (examine_all or (alpha[i2] > 0.0 and alpha[i2] < C)):
                continue
            y2 = y[i2]
            a2 = alpha[i2]
            E2 = f[i2] + b - y2
            r2 = E2 * y2
            if not ((r2 < -tol and a2 < C) or (r2 > tol and a2 > 0.0)):
                continue
            stepped = False
            diff = np.abs(f + b - y - E2)
            diff[i2] = -1.0
            diff = np.where((alpha > 0.0) & (alpha < C), diff, -1.0)
            i1 = int(np.argmax(diff))
            if diff[i1] >= 0.0:
                stepped, b = _take_step_np(i1, i2, X, y, K, use_gram, gamma, C,
                                           alpha, f, b)
            if not stepped:
                for j in range(n):
                    if j == i2 or not (alpha[j] > 0.0 and alpha[j] < C):
                        continue
                    stepped, b = _take_step_np(j, i2, X, y, K, use_gram, gamma, C,
                                               alpha, f, b)
                    if stepped:
                        break
            if not stepped:
                for j in range(n):
                    if j == i2:
                        continue
                    stepped, b = _take_step_np(j, i2, X, y, K, use_gram, gamma, C,
                                               alpha, f, b)
                    if stepped:
                        break
            if stepped:
                changed += 1
                updates += 1
                if updates >= max_iter:
                    exhausted = True
                    break
        if exhausted:
            break
        if changed == 0:
            clean += 1
        else:
            clean = 0
        if clean >= max_passes:
            converged = True
            break
        if examine_all:
            examine_all = False
        elif changed == 0:
            examine_all = True
    return alpha, b, updates, converged, f


def _final_bias(alpha, y, f, C, b_run):
    """Bias consistent with the final alphas (f excludes the bias term)."""
    lo = -math.inf
    hi = math.inf
    acc = 0.0
    nfree = 0
    for i in range(alpha.shape[0]):
        gap = float(y[i] - f[i])
        a = alpha[i]
        if 0.0 < a < C:
            acc += gap
            nfree += 1
        elif (a == 0.0 and y[i] > 0.0) or (a == C and y[i] < 0.0):
            lo = max(lo, gap)
        else:
            hi = min(hi, gap)
    if nfree:
        return acc / nfree
    if lo == -math.inf and hi == math.inf:  # pragma: no cover - defensive
        return b_run
    if lo == -math.inf:
        return hi
    if hi == math.inf:
        return lo
    return 0.5 * (lo + hi)


def smo_solve(X, y, C, gamma, tol, max_passes, max_iter,
              gram_limit: int = GRAM_CACHE_LIMIT, force: str | None = None):
    """Run the active SMO kernel; returns (alpha, bias, updates, converged).

    ``force`` pins the implementation to "numba" or "numpy" regardless of
    the environment flag (used by the twin-agreement tests and benchmark).
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    n = y.shape[0]
    use_gram = n <= gram_limit
    K = rbf_gram(X, gamma) if use_gram else np.zeros((1, 1))
    if force == "numba" or (force is None and numba_enabled()):
        if not HAVE_NUMBA:
            raise RuntimeError("numba kernel requested but numba is not installed")
        impl = _smo_nb
    else:
        impl = _smo_np
    alpha, b_run, updates, converged, f = impl(X, y, K, use_gram, float(gamma),
                                               float(C), float(tol),
                                               int(max_passes), int(max_iter))
    b = _final_bias(alpha, y, f, float(C), float(b_run))
    return alpha, float(b), int(updates), bool(converged)
