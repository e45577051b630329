"""Numpy implementation of the inner loops in :mod:`ridgekern._ckernels`.

Used when the compiled extension is not available (or when
``RIDGEKERN_BACKEND=python``). Signatures and return conventions match the
compiled module exactly.
"""
import numpy as np

# node chunk for ridge_apply; bounds the temporary at m * _CHUNK doubles
_CHUNK = 4096


def _eval(code, params, S, T):
    p0, p1, p2, p3 = params
    if code == 0:
        D = S - T
        return np.exp(-(D * D) * p0), 0
    if code == 1:
        return np.exp(-np.abs(S - T) * p0), 0
    if code == 2:
        return np.cos(p0 * (S - T)), 0
    bad = int(np.count_nonzero((np.abs(S) > p2) | (np.abs(T) > p2)))
    return np.power((1.0 + S * T * p1) * p3, p0), bad


def _affine(A, b, X):
    # explicit loop over the (small) ambient dimension keeps the summation
    # order identical to the compiled kernel
    S = np.broadcast_to(b, (X.shape[0], A.shape[0])).copy()
    for k in range(X.shape[1]):
        S += np.multiply.outer(X[:, k], A[:, k])
    return S


def ridge_features(code, params, A, b, t, X):
    S = _affine(A, b, X)
    return _eval(code, params, S, np.broadcast_to(t, S.shape))


def ridge_apply(code, params, A, b, t, X, w):
    out = np.zeros(X.shape[0])
    bad = 0
    for lo in range(0, A.shape[0], _CHUNK):
        hi = lo + _CHUNK
        Phi, nb = ridge_features(code, params, A[lo:hi], b[lo:hi], t[lo:hi], X)
        out += Phi @ w[lo:hi]
        bad += nb
    return out, bad


def farthest_point_net(P, eps):
    n = P.shape[0]
    dist = np.full(n, np.inf)
    centers = []
    c = 0
    while True:
        centers.append(c)
        diff = P - P[c]
        np.minimum(dist, np.sqrt(np.einsum("ij,ij->i", diff, diff)), out=dist)
        far = int(np.argmax(dist))
        if dist[far] <= eps:
            break
        c = far
    return np.asarray(centers, dtype=np.intp), dist
