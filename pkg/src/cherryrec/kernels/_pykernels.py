"""Reference implementations of the hot loops.

Every function here has a twin in ``_ckernels.pyx`` with the same signature.
Floating-point operations are performed in the same order in both, so the two
backends agree bit for bit on the KnRS scan and the split search and to within
summation-order rounding on the dense reductions.
"""

from __future__ import annotations

import math

import numpy as np


def _overlap(a, b) -> int:
    return len(a & b)


def score_rows(
    rows,
    rel_indptr,
    rel_indices,
    title_indptr,
    title_indices,
    query,
    query_size,
    hist_rows,
    credibility,
    publish_time,
    clicks,
    impressions,
    now,
    half_life_s,
    smoothing,
    weights,
    out_features,
    out_values,
):
    """Compute the five value features and the fused value for ``rows``."""
    rel_ptr = rel_indptr.tolist()
    rel_idx = rel_indices.tolist()
    t_ptr = title_indptr.tolist()
    t_idx = title_indices.tolist()
    qset = set(query.tolist())
    hist_sets = [set(t_idx[t_ptr[h] : t_ptr[h + 1]]) for h in hist_rows.tolist()]
    cred = credibility.tolist()
    pub = publish_time.tolist()
    clk = clicks.tolist()
    imp = impressions.tolist()
    w0, w1, w2, w3, w4 = (float(w) for w in weights)
    now = float(now)
    half_life_s = float(half_life_s)
    smoothing = float(smoothing)

    for out_i, r in enumerate(rows.tolist()):
        rel = set(rel_idx[rel_ptr[r] : rel_ptr[r + 1]])
        inter = len(rel & qset)
        union = query_size + len(rel) - inter
        relevance = inter / union if union > 0 else 0.0

        trust = cred[r]

        dt = now - pub[r]
        timeliness = math.pow(2.0, -dt / half_life_s) if dt > 0.0 else 1.0

        denom = imp[r] + smoothing
        attention = clk[r] / denom if denom > 0.0 else 0.0
        if attention > 1.0:
            attention = 1.0
        elif attention < 0.0:
            attention = 0.0

        if hist_sets:
            title = set(t_idx[t_ptr[r] : t_ptr[r + 1]])
            best = 0.0
            for h in hist_sets:
                hi = len(title & h)
                hu = len(title) + len(h) - hi
                sim = hi / hu if hu > 0 else 0.0
                if sim > best:
                    best = sim
            novelty = 1.0 - best
        else:
            novelty = 1.0

        out_features[out_i, 0] = relevance
        out_features[out_i, 1] = trust
        out_features[out_i, 2] = timeliness
        out_features[out_i, 3] = attention
        out_features[out_i, 4] = novelty
        total = 0.0
        total += w0 * relevance
        total += w1 * trust
        total += w2 * timeliness
        total += w3 * attention
        total += w4 * novelty
        out_values[out_i] = total


def poly_loss_grad(terms, coef, y, l2, grad):
    """Sum-of-squares loss with an L2 penalty on every coefficient but the intercept.

    Writes the gradient into ``grad`` and returns the loss.
    """
    # overflow yields inf, which the training loop reports as divergence
    with np.errstate(over="ignore", invalid="ignore"):
        resid = terms @ coef - y
        penalized = coef[1:]
        loss = float(resid @ resid) + l2 * float(penalized @ penalized)
        grad[:] = 2.0 * (terms.T @ resid)
        grad[1:] += 2.0 * l2 * penalized
    return loss


def svr_loss_grad(x, w, b, y, eps, l2, grad_w):
    """Epsilon-insensitive loss and subgradient for a linear model.

    Returns ``(loss, grad_b)``; the weight subgradient is written to ``grad_w``.
    """
    resid = x @ w + b - y
    excess = np.abs(resid) - eps
    active = excess > 0.0
    sign = np.where(active, np.sign(resid), 0.0)
    loss = float(excess[active].sum()) + l2 * float(w @ w)
    grad_w[:] = x.T @ sign + 2.0 * l2 * w
    return loss, float(sign.sum())


def best_split(x, y, rows, features, min_gain):
    """Best variance-reducing threshold split of ``rows`` over ``features``.

    Returns ``(feature, threshold, gain)``; ``feature`` is -1 when no split
    improves on ``min_gain``.
    """
    best_f, best_thr, best_gain = -1, 0.0, min_gain
    n = rows.shape[0]
    if n < 2:
        return best_f, best_thr, 0.0
    y_node = y[rows]
    for f in features.tolist():
        vals = x[rows, f]
        order = np.argsort(vals, kind="stable")
        v = vals[order]
        cs = np.cumsum(y_node[order])
        total = cs[-1]
        base = total * total / n
        nl = np.arange(1, n, dtype=np.float64)
        nr = n - nl
        sl = cs[:-1]
        sr = total - sl
        score = sl * sl / nl + sr * sr / nr
        gain = score - base
        valid = v[:-1] < v[1:]
        if not valid.any():
            continue
        gain = np.where(valid, gain, -np.inf)
        t = int(np.argmax(gain))
        if gain[t] > best_gain:
            lo, hi = float(v[t]), float(v[t + 1])
            thr = (lo + hi) / 2.0
            if thr >= hi:
                thr = lo
            best_f, best_thr, best_gain = f, thr, float(gain[t])
    if best_f < 0:
        return -1, 0.0, 0.0
    return best_f, best_thr, best_gain
