# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled twins of ``_pykernels``. Same signatures, same operation order."""

import numpy as np

from libc.math cimport pow, fabs, INFINITY
from libc.stdint cimport int32_t, int64_t


cdef inline Py_ssize_t _overlap(const int32_t[::1] a, Py_ssize_t a0, Py_ssize_t a1,
                                const int32_t[::1] b, Py_ssize_t b0, Py_ssize_t b1) noexcept nogil:
    # both ranges are sorted and duplicate-free
    cdef Py_ssize_t n = 0
    while a0 < a1 and b0 < b1:
        if a[a0] == b[b0]:
            n += 1
            a0 += 1
            b0 += 1
        elif a[a0] < b[b0]:
            a0 += 1
        else:
            b0 += 1
    return n


def score_rows(const int64_t[::1] rows,
               const int64_t[::1] rel_indptr,
               const int32_t[::1] rel_indices,
               const int64_t[::1] title_indptr,
               const int32_t[::1] title_indices,
               const int32_t[::1] query,
               Py_ssize_t query_size,
               const int64_t[::1] hist_rows,
               const double[::1] credibility,
               const double[::1] publish_time,
               const double[::1] clicks,
               const double[::1] impressions,
               double now,
               double half_life_s,
               double smoothing,
               const double[::1] weights,
               double[:, ::1] out_features,
               double[::1] out_values):
    cdef Py_ssize_t n_rows = rows.shape[0]
    cdef Py_ssize_t n_hist = hist_rows.shape[0]
    cdef Py_ssize_t nq = query.shape[0]
    cdef Py_ssize_t i, r, h, hr, inter, union, rel_len, t_len, h_len, hi, hu
    cdef double relevance, trust, timeliness, attention, novelty, dt, denom, best, sim, total
    cdef double w0 = weights[0], w1 = weights[1], w2 = weights[2], w3 = weights[3], w4 = weights[4]

    with nogil:
        for i in range(n_rows):
            r = rows[i]
            rel_len = rel_indptr[r + 1] - rel_indptr[r]
            inter = _overlap(rel_indices, rel_indptr[r], rel_indptr[r + 1], query, 0, nq)
            union = query_size + rel_len - inter
            if union > 0:
                relevance = <double>inter / <double>union
            else:
                relevance = 0.0

            trust = credibility[r]

            dt = now - publish_time[r]
            if dt > 0.0:
                timeliness = pow(2.0, -dt / half_life_s)
            else:
                timeliness = 1.0

            denom = impressions[r] + smoothing
            if denom > 0.0:
                attention = clicks[r] / denom
            else:
                attention = 0.0
            if attention > 1.0:
                attention = 1.0
            elif attention < 0.0:
                attention = 0.0

            if n_hist > 0:
                t_len = title_indptr[r + 1] - title_indptr[r]
                best = 0.0
                for h in range(n_hist):
                    hr = hist_rows[h]
                    h_len = title_indptr[hr + 1] - title_indptr[hr]
                    hi = _overlap(title_indices, title_indptr[r], title_indptr[r + 1],
                                  title_indices, title_indptr[hr], title_indptr[hr + 1])
                    hu = t_len + h_len - hi
                    if hu > 0:
                        sim = <double>hi / <double>hu
                    else:
                        sim = 0.0
                    if sim > best:
                        best = sim
                novelty = 1.0 - best
            else:
                novelty = 1.0

            out_features[i, 0] = relevance
            out_features[i, 1] = trust
            out_features[i, 2] = timeliness
            out_features[i, 3] = attention
            out_features[i, 4] = novelty
            total = 0.0
            total += w0 * relevance
            total += w1 * trust
            total += w2 * timeliness
            total += w3 * attention
            total += w4 * novelty
            out_values[i] = total


def poly_loss_grad(const double[:, ::1] terms, const double[::1] coef, const double[::1] y,
                   double l2, double[::1] grad):
    cdef Py_ssize_t m = terms.shape[0]
    cdef Py_ssize_t p = terms.shape[1]
    cdef Py_ssize_t i, j
    cdef double pred, r, loss = 0.0
    with nogil:
        for j in range(p):
            grad[j] = 0.0
        for i in range(m):
            pred = 0.0
            for j in range(p):
                pred += terms[i, j] * coef[j]
            r = pred - y[i]
            loss += r * r
            for j in range(p):
                grad[j] += terms[i, j] * r
        for j in range(p):
            grad[j] = 2.0 * grad[j]
        for j in range(1, p):
            loss += l2 * coef[j] * coef[j]
            grad[j] += 2.0 * l2 * coef[j]
    return loss


def svr_loss_grad(const double[:, ::1] x, const double[::1] w, double b, const double[::1] y,
                  double eps, double l2, double[::1] grad_w):
    cdef Py_ssize_t m = x.shape[0]
    cdef Py_ssize_t n = x.shape[1]
    cdef Py_ssize_t i, j
    cdef double pred, r, excess, s, loss = 0.0, grad_b = 0.0, ww = 0.0
    with nogil:
        for j in range(n):
            grad_w[j] = 0.0
        for i in range(m):
            pred = 0.0
            for j in range(n):
                pred += x[i, j] * w[j]
            r = pred + b - y[i]
            excess = fabs(r) - eps
            if excess > 0.0:
                loss += excess
                s = 1.0 if r > 0.0 else -1.0
                grad_b += s
                for j in range(n):
                    grad_w[j] += s * x[i, j]
        for j in range(n):
            ww += w[j] * w[j]
            grad_w[j] += 2.0 * l2 * w[j]
        loss += l2 * ww
    return loss, grad_b


def best_split(const double[:, ::1] x, const double[::1] y, rows, features, double min_gain):
    cdef Py_ssize_t n = len(rows)
    cdef Py_ssize_t t, k
    cdef double total, base, sl, sr, score, gain, thr, lo, hi
    cdef double best_gain = min_gain, best_thr = 0.0
    cdef Py_ssize_t best_f = -1, f, cur_t
    cdef double cur_best
    cdef double[::1] v, ys
    if n < 2:
        return -1, 0.0, 0.0
    rows_arr = np.asarray(rows, dtype=np.int64)
    x_np = np.asarray(x)
    y_node = np.asarray(y)[rows_arr]
    for f in np.asarray(features, dtype=np.int64).tolist():
        vals = x_np[rows_arr, f]
        order = np.argsort(vals, kind="stable")
        v = np.ascontiguousarray(vals[order])
        ys = np.ascontiguousarray(y_node[order])
        total = 0.0
        for k in range(n):
            total += ys[k]
        base = total * total / <double>n
        sl = 0.0
        cur_best = -INFINITY
        cur_t = -1
        for t in range(n - 1):
            sl += ys[t]
            if not (v[t] < v[t + 1]):
                continue
            sr = total - sl
            score = sl * sl / <double>(t + 1) + sr * sr / <double>(n - t - 1)
            gain = score - base
            if gain > cur_best:
                cur_best = gain
                cur_t = t
        if cur_t < 0:
            continue
        if cur_best > best_gain:
            lo = v[cur_t]
            hi = v[cur_t + 1]
            thr = (lo + hi) / 2.0
            if thr >= hi:
                thr = lo
            best_f = f
            best_thr = thr
            best_gain = cur_best
    if best_f < 0:
        return -1, 0.0, 0.0
    return best_f, best_thr, best_gain
