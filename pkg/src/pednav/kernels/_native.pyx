# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled sliding-window scorer for the boosted-tree detector.

Mirrors kernels.reference.score_windows exactly; the per-window accumulation
order is the same, so scores are bit-identical between backends.
"""

import numpy as np

cimport numpy as cnp


def score_windows(stack, win_cells, stride, feats, thresholds, leaves, reject):
    """See kernels.reference.score_windows for the contract."""
    cdef cnp.ndarray[cnp.float64_t, ndim=3, mode="c"] st = np.ascontiguousarray(stack, dtype=np.float64)
    cdef Py_ssize_t c = st.shape[0]
    cdef Py_ssize_t h = st.shape[1]
    cdef Py_ssize_t w = st.shape[2]
    cdef Py_ssize_t wc = win_cells[0]
    cdef Py_ssize_t hc = win_cells[1]
    cdef Py_ssize_t step = stride
    cdef Py_ssize_t ny = (h - hc) // step + 1
    cdef Py_ssize_t nx = (w - wc) // step + 1
    if ny <= 0 or nx <= 0:
        return np.zeros(0), np.zeros(0, dtype=bool)

    cdef cnp.ndarray[cnp.int64_t, ndim=2, mode="c"] f = np.ascontiguousarray(feats, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] th = np.ascontiguousarray(thresholds, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] lv = np.ascontiguousarray(leaves, dtype=np.float64)
    cdef Py_ssize_t n_trees = f.shape[0]
    cdef Py_ssize_t area = hc * wc
    cdef Py_ssize_t plane = h * w

    # window-footprint offsets -> stack offsets
    cdef cnp.ndarray[cnp.int64_t, ndim=2, mode="c"] offs = np.empty((n_trees, 3), dtype=np.int64)
    cdef Py_ssize_t t, k
    cdef cnp.int64_t fi
    for t in range(n_trees):
        for k in range(3):
            fi = f[t, k]
            offs[t, k] = (fi // area) * plane + ((fi % area) // wc) * w + fi % wc

    cdef cnp.ndarray[cnp.float64_t, ndim=1] scores = np.zeros(ny * nx)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] alive = np.zeros(ny * nx, dtype=np.uint8)
    cdef double[::1] flat = st.reshape(-1)
    cdef double[::1] sc = scores
    cdef unsigned char[::1] al = alive
    cdef cnp.int64_t[:, ::1] off_v = offs
    cdef double[:, ::1] th_v = th
    cdef double[:, ::1] lv_v = lv
    cdef double rej = reject

    cdef Py_ssize_t iy, ix, base, idx
    cdef double s, out
    cdef bint ok
    with nogil:
        idx = 0
        for iy in range(ny):
            for ix in range(nx):
                base = iy * step * w + ix * step
                s = 0.0
                ok = True
                for t in range(n_trees):
                    if flat[base + off_v[t, 0]] < th_v[t, 0]:
                        if flat[base + off_v[t, 1]] < th_v[t, 1]:
                            out = lv_v[t, 0]
                        else:
                            out = lv_v[t, 1]
                    else:
                        if flat[base + off_v[t, 2]] < th_v[t, 2]:
                            out = lv_v[t, 2]
                        else:
                            out = lv_v[t, 3]
                    s += out
                    if s < rej:
                        ok = False
                        break
                sc[idx] = s
                al[idx] = 1 if ok else 0
                idx += 1
    return scores, alive.view(bool)
