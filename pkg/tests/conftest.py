import numpy as np

from progct.perf import tune_malloc

tune_malloc()


def numeric_grad(f, x, h=1e-5):
    """Central finite differences of a scalar function, coordinate by coordinate."""
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        xp = x.copy()
        xp[i] += h
        xm = x.copy()
        xm[i] -= h
        g[i] = (f(xp) - f(xm)) / (2.0 * h)
    return g


def rel_err(a, b, floor=1e-8):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return np.max(np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor))


def conv2d_loops(x, w, bias=None):
    """Quadruple-nested-loop valid cross-correlation; the independent oracle."""
    B, Ci, H, W = x.shape
    Co, Ci2, kh, kw = w.shape
    assert Ci == Ci2
    out = np.zeros((B, Co, H - kh + 1, W - kw + 1), dtype=np.float64)
    for b in range(B):
        for co in range(Co):
            for i in range(H - kh + 1):
                for j in range(W - kw + 1):
                    s = 0.0
                    for ci in range(Ci):
                        for u in range(kh):
                            for v in range(kw):
                                s += x[b, ci, i + u, j + v] * w[co, ci, u, v]
                    out[b, co, i, j] = s + (0.0 if bias is None else bias[co])
    return out


def matmul_loops(a, w):
    B, N = a.shape
    N2, M = w.shape
    assert N == N2
    out = np.zeros((B, M), dtype=np.float64)
    for b in range(B):
        for m in range(M):
            s = 0.0
            for n in range(N):
                s += a[b, n] * w[n, m]
            out[b, m] = s
    return out
