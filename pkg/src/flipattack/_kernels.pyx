# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled descent kernels (row-at-a-time, GIL released).

Mirrors ``_fallback``: same functions, same in-place contract.
"""
import numpy as np
from libc.math cimport exp, tanh, isfinite
from libc.stdlib cimport malloc, free

cdef extern from "_dense.h" nogil:
    void dense_forward(const double* inp, double* out, const double* wt, const double* bias,
                       Py_ssize_t n_in, Py_ssize_t n_out)
    void dense_backward(const double* gout, double* gin, const double* w,
                        Py_ssize_t n_in, Py_ssize_t n_out)


BACKEND = "cython"


cdef class PackedNet:
    cdef public int n_layers
    cdef public bint relu
    cdef public int max_width
    cdef public int act_size
    cdef Py_ssize_t[::1] dims
    cdef Py_ssize_t[::1] w_off
    cdef Py_ssize_t[::1] b_off
    cdef Py_ssize_t[::1] a_off
    cdef double[::1] w
    cdef double[::1] wt
    cdef double[::1] b


def pack(layers, activation):
    cdef PackedNet net = PackedNet()
    n = len(layers)
    dims = [layers[0][0].shape[1]] + [W.shape[0] for W, _ in layers]
    w_parts, wt_parts, b_parts = [], [], []
    # offsets are cumulative sizes; (wraparound is off, so no [-1] indexing here)
    w_off, b_off, a_off = [0], [0], [0]
    for k, (W, bias) in enumerate(layers):
        W = np.ascontiguousarray(W, dtype=np.float64)
        w_parts.append(W.ravel())
        wt_parts.append(np.ascontiguousarray(W.T).ravel())
        b_parts.append(np.ascontiguousarray(bias, dtype=np.float64).ravel())
        w_off.append(w_off[k] + W.size)
        b_off.append(b_off[k] + W.shape[0])
    for k in range(n + 1):
        a_off.append(a_off[k] + dims[k])
    net.n_layers = n
    net.relu = activation == "relu"
    net.max_width = max(dims)
    net.act_size = sum(dims)
    net.dims = np.asarray(dims, dtype=np.intp)
    net.w_off = np.asarray(w_off, dtype=np.intp)
    net.b_off = np.asarray(b_off, dtype=np.intp)
    net.a_off = np.asarray(a_off, dtype=np.intp)
    net.w = np.concatenate(w_parts)
    net.wt = np.concatenate(wt_parts)
    net.b = np.concatenate(b_parts)
    return net


cdef inline double _sigmoid(double z) noexcept nogil:
    cdef double e
    if z >= 0:
        return 1.0 / (1.0 + exp(-z))
    e = exp(z)
    return e / (1.0 + e)


cdef double _forward(PackedNet net, double* acts) noexcept nogil:
    # acts[a_off[0]:a_off[1]] holds the input; fills hidden activations, returns the logit
    cdef int k, L = net.n_layers
    cdef Py_ssize_t i, o, n_in, n_out
    cdef double* a_in
    cdef double* a_out
    cdef double* wt
    cdef double* bias
    cdef double ai, z
    for k in range(L):
        n_in = net.dims[k]
        n_out = net.dims[k + 1]
        a_in = acts + net.a_off[k]
        a_out = acts + net.a_off[k + 1]
        wt = &net.wt[net.w_off[k]]
        bias = &net.b[net.b_off[k]]
        dense_forward(a_in, a_out, wt, bias, n_in, n_out)
        if k < L - 1:
            if net.relu:
                for o in range(n_out):
                    if a_out[o] < 0.0:
                        a_out[o] = 0.0
            else:
                for o in range(n_out):
                    a_out[o] = tanh(a_out[o])
    return acts[net.a_off[L]]


cdef double* _backward(PackedNet net, double* acts, double dz, double* buf_a, double* buf_b) noexcept nogil:
    # returns a pointer (buf_a or buf_b) holding d(loss)/d(input), given d(loss)/d(logit) = dz
    cdef int k, L = net.n_layers
    cdef Py_ssize_t i, o, n_in, n_out
    cdef double* w
    cdef double* a
    cdef double go
    cdef double* cur = buf_a
    cdef double* nxt = buf_b
    cdef double* tmp
    cur[0] = dz
    for k in range(L - 1, -1, -1):
        n_in = net.dims[k]
        n_out = net.dims[k + 1]
        w = &net.w[net.w_off[k]]
        dense_backward(cur, nxt, w, n_in, n_out)
        if k > 0:
            a = acts + net.a_off[k]
            if net.relu:
                for i in range(n_in):
                    if a[i] <= 0.0:
                        nxt[i] = 0.0
            else:
                for i in range(n_in):
                    nxt[i] *= 1.0 - a[i] * a[i]
        tmp = cur
        cur = nxt
        nxt = tmp
    return cur


def logits(PackedNet net, X):
    cdef const double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef Py_ssize_t n = Xv.shape[0], d = Xv.shape[1], r, i
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] ov = out
    cdef double* acts = <double*> malloc(net.act_size * sizeof(double))
    try:
        with nogil:
            for r in range(n):
                for i in range(d):
                    acts[i] = Xv[r, i]
                ov[r] = _forward(net, acts)
    finally:
        free(acts)
    return out


def input_grads(PackedNet net, X, y):
    cdef const double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef const double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef Py_ssize_t n = Xv.shape[0], d = Xv.shape[1], r, i
    out = np.empty((n, d), dtype=np.float64)
    cdef double[:, ::1] ov = out
    cdef double* acts = <double*> malloc(net.act_size * sizeof(double))
    cdef double* g = <double*> malloc(net.max_width * sizeof(double))
    cdef double* gtmp = <double*> malloc(net.max_width * sizeof(double))
    cdef double z
    cdef double* gp
    try:
        with nogil:
            for r in range(n):
                for i in range(d):
                    acts[i] = Xv[r, i]
                z = _forward(net, acts)
                gp = _backward(net, acts, _sigmoid(z) - yv[r], g, gtmp)
                for i in range(d):
                    ov[r, i] = gp[i]
    finally:
        free(acts)
        free(g)
        free(gtmp)
    return out


cdef void _run(PackedNet net, const double[:, ::1] X, const long[::1] yref, double[:, ::1] delta,
               unsigned char[::1] alive, double step, long steps, bint followup) noexcept nogil:
    cdef Py_ssize_t n = X.shape[0], d = X.shape[1], r, i
    cdef long t
    cdef double* acts = <double*> malloc(net.act_size * sizeof(double))
    cdef double* g = <double*> malloc(net.max_width * sizeof(double))
    cdef double* gtmp = <double*> malloc(net.max_width * sizeof(double))
    cdef double* nd = <double*> malloc(d * sizeof(double))
    cdef double z, p, y, v
    cdef double* gp
    cdef bint flipped, finite, changed
    for r in range(n):
        if not alive[r]:
            continue
        y = <double> yref[r]
        for t in range(steps):
            for i in range(d):
                acts[i] = X[r, i] + delta[r, i]
            z = _forward(net, acts)
            if not isfinite(z):
                alive[r] = 0
                break
            p = _sigmoid(z)
            flipped = (p >= 0.5) != (y == 1.0)
            finite = True
            if flipped and not followup:
                for i in range(d):
                    v = delta[r, i]
                    if v > 0.0:
                        nd[i] = v - step
                    elif v < 0.0:
                        nd[i] = v + step
                    else:
                        nd[i] = v
                    if not isfinite(nd[i]):
                        finite = False
            else:
                gp = _backward(net, acts, p - y, g, gtmp)
                for i in range(d):
                    nd[i] = delta[r, i] + step * gp[i]
                    if not isfinite(nd[i]):
                        finite = False
            if not finite:
                alive[r] = 0
                break
            changed = False
            for i in range(d):
                if nd[i] != delta[r, i]:
                    changed = True
                delta[r, i] = nd[i]
            if not changed:
                # autonomous dynamics: an unchanged state stays unchanged
                break
    free(acts)
    free(g)
    free(gtmp)
    free(nd)


def _prep(X, yref, delta, alive):
    if not (isinstance(delta, np.ndarray) and delta.dtype == np.float64 and delta.flags.c_contiguous):
        raise TypeError("delta must be a C-contiguous float64 array (updated in place)")
    if not (isinstance(alive, np.ndarray) and alive.dtype == np.bool_):
        raise TypeError("alive must be a bool array (updated in place)")
    return (np.ascontiguousarray(X, dtype=np.float64),
            np.ascontiguousarray(yref, dtype=np.int_))


def descend(PackedNet net, X, yref, delta, alive, double step, long steps):
    Xc, yc = _prep(X, yref, delta, alive)
    cdef unsigned char[::1] av = alive.view(np.uint8)
    cdef const double[:, ::1] Xv = Xc
    cdef const long[::1] yv = yc
    cdef double[:, ::1] dv = delta
    with nogil:
        _run(net, Xv, yv, dv, av, step, steps, False)


def push(PackedNet net, X, yref, delta, alive, double step, long steps):
    Xc, yc = _prep(X, yref, delta, alive)
    cdef unsigned char[::1] av = alive.view(np.uint8)
    cdef const double[:, ::1] Xv = Xc
    cdef const long[::1] yv = yc
    cdef double[:, ::1] dv = delta
    with nogil:
        _run(net, Xv, yv, dv, av, step, steps, True)
