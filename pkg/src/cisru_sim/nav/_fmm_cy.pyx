# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled fast-marching kernel. Mirrors _fmm_py.march exactly: same update
formulas, same (value, index) heap ordering, bit-identical results."""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, sqrt

cnp.import_array()

cdef double SQRT2 = sqrt(2.0)


cdef inline void _heap_push(double* keys, Py_ssize_t* idxs, Py_ssize_t* n,
                            double key, Py_ssize_t idx) noexcept nogil:
    cdef Py_ssize_t i = n[0]
    cdef Py_ssize_t parent
    keys[i] = key
    idxs[i] = idx
    n[0] += 1
    while i > 0:
        parent = (i - 1) >> 1
        if keys[parent] > keys[i] or (keys[parent] == keys[i] and idxs[parent] > idxs[i]):
            keys[parent], keys[i] = keys[i], keys[parent]
            idxs[parent], idxs[i] = idxs[i], idxs[parent]
            i = parent
        else:
            break


cdef inline Py_ssize_t _heap_pop(double* keys, Py_ssize_t* idxs, Py_ssize_t* n,
                                 double* key_out) noexcept nogil:
    cdef Py_ssize_t idx = idxs[0]
    cdef Py_ssize_t i = 0, child
    key_out[0] = keys[0]
    n[0] -= 1
    keys[0] = keys[n[0]]
    idxs[0] = idxs[n[0]]
    while True:
        child = 2 * i + 1
        if child >= n[0]:
            break
        if child + 1 < n[0] and (keys[child + 1] < keys[child] or
                                 (keys[child + 1] == keys[child] and idxs[child + 1] < idxs[child])):
            child += 1
        if keys[child] < keys[i] or (keys[child] == keys[i] and idxs[child] < idxs[i]):
            keys[child], keys[i] = keys[i], keys[child]
            idxs[child], idxs[i] = idxs[i], idxs[child]
            i = child
        else:
            break
    return idx


def march(cnp.ndarray[cnp.float64_t, ndim=2] speed, double h,
          cnp.ndarray[cnp.int64_t, ndim=1] src_rows,
          cnp.ndarray[cnp.int64_t, ndim=1] src_cols,
          bint diagonals=False):
    cdef Py_ssize_t height = speed.shape[0]
    cdef Py_ssize_t width = speed.shape[1]
    cdef Py_ssize_t ncells = height * width

    T_arr = np.full((height, width), np.inf, dtype=np.float64)
    frozen_arr = np.zeros((height, width), dtype=np.uint8)
    cdef double[:, ::1] T = T_arr
    cdef unsigned char[:, ::1] frozen = frozen_arr
    cdef double[:, ::1] spd = np.ascontiguousarray(speed)

    # each freeze pushes at most one update per neighbor (<= 8) plus sources
    cdef Py_ssize_t cap = 9 * ncells + 16
    keys_arr = np.empty(cap, dtype=np.float64)
    idxs_arr = np.empty(cap, dtype=np.intp)
    cdef double[::1] keys = keys_arr
    cdef Py_ssize_t[::1] idxs = idxs_arr
    cdef Py_ssize_t heap_n = 0

    cdef Py_ssize_t i, r, c, nr, nc, ar, ac, idx
    cdef int dr, dc, er, ec, k
    cdef double t, v, inv_v, tx, ty, cx, cy, a, b, kk, disc, tnew, cand
    cdef int[4] diag_r = [-1, -1, 1, 1]
    cdef int[4] diag_c = [-1, 1, -1, 1]

    for i in range(src_rows.shape[0]):
        r = src_rows[i]
        c = src_cols[i]
        if T[r, c] > 0.0:
            T[r, c] = 0.0
            _heap_push(&keys[0], &idxs[0], &heap_n, 0.0, r * width + c)

    while heap_n > 0:
        idx = _heap_pop(&keys[0], &idxs[0], &heap_n, &t)
        r = idx // width
        c = idx - r * width
        if frozen[r, c]:
            continue
        frozen[r, c] = 1
        for dr in range(-1, 2):
            for dc in range(-1, 2):
                if dr == 0 and dc == 0:
                    continue
                if not diagonals and dr != 0 and dc != 0:
                    continue
                nr = r + dr
                nc = c + dc
                if nr < 0 or nr >= height or nc < 0 or nc >= width:
                    continue
                if frozen[nr, nc]:
                    continue
                v = spd[nr, nc]
                if v <= 0.0:
                    continue
                if dr != 0 and dc != 0 and (spd[r, nc] <= 0.0 or spd[nr, c] <= 0.0):
                    continue
                inv_v = 1.0 / v

                tx = INFINITY
                cx = 0.0
                if nc > 0 and frozen[nr, nc - 1] and spd[nr, nc - 1] > 0.0 \
                        and T[nr, nc - 1] < tx:
                    tx = T[nr, nc - 1]
                    cx = h * (inv_v + 1.0 / spd[nr, nc - 1]) * 0.5
                if nc + 1 < width and frozen[nr, nc + 1] and spd[nr, nc + 1] > 0.0 \
                        and T[nr, nc + 1] < tx:
                    tx = T[nr, nc + 1]
                    cx = h * (inv_v + 1.0 / spd[nr, nc + 1]) * 0.5
                ty = INFINITY
                cy = 0.0
                if nr > 0 and frozen[nr - 1, nc] and spd[nr - 1, nc] > 0.0 \
                        and T[nr - 1, nc] < ty:
                    ty = T[nr - 1, nc]
                    cy = h * (inv_v + 1.0 / spd[nr - 1, nc]) * 0.5
                if nr + 1 < height and frozen[nr + 1, nc] and spd[nr + 1, nc] > 0.0 \
                        and T[nr + 1, nc] < ty:
                    ty = T[nr + 1, nc]
                    cy = h * (inv_v + 1.0 / spd[nr + 1, nc]) * 0.5

                if tx != INFINITY and ty != INFINITY:
                    a = 1.0 / (cx * cx) + 1.0 / (cy * cy)
                    b = -2.0 * (tx / (cx * cx) + ty / (cy * cy))
                    kk = tx * tx / (cx * cx) + ty * ty / (cy * cy) - 1.0
                    disc = b * b - 4.0 * a * kk
                    if disc >= 0.0:
                        tnew = (-b + sqrt(disc)) / (2.0 * a)
                    else:
                        tnew = tx + cx if tx + cx < ty + cy else ty + cy
                elif tx != INFINITY:
                    tnew = tx + cx
                elif ty != INFINITY:
                    tnew = ty + cy
                else:
                    tnew = INFINITY

                if diagonals:
                    for k in range(4):
                        er = diag_r[k]
                        ec = diag_c[k]
                        ar = nr + er
                        ac = nc + ec
                        if ar < 0 or ar >= height or ac < 0 or ac >= width:
                            continue
                        if not frozen[ar, ac] or spd[ar, ac] <= 0.0:
                            continue
                        if spd[nr, ac] <= 0.0 or spd[ar, nc] <= 0.0:
                            continue
                        cand = T[ar, ac] + SQRT2 * h * (inv_v + 1.0 / spd[ar, ac]) * 0.5
                        if cand < tnew:
                            tnew = cand

                if tnew < T[nr, nc]:
                    T[nr, nc] = tnew
                    _heap_push(&keys[0], &idxs[0], &heap_n, tnew, nr * width + nc)
    return T_arr
