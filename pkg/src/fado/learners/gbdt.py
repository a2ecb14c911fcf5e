"""Histogram gradient-boosted trees for weighted binary log-loss.

Trees grow leaf-wise (best gain first) up to ``num_leaves`` leaves and
``max_depth`` levels. Split statistics are weighted sums of gradient,
hessian and sample weight, so a row with weight 2 contributes exactly like
two copies of the row. ``min_child_samples`` is a minimum weighted count.
Bin boundaries come from the distinct values of rows with positive weight,
which keeps them unchanged under row duplication.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np
from numba import njit
from scipy.special import expit

_EPS = 1e-12


def _bin_thresholds(col: np.ndarray, max_bins: int) -> np.ndarray:
    uniq = np.unique(col)
    if len(uniq) <= 1:
        return np.empty(0)
    if len(uniq) <= max_bins:
        cut = np.arange(1, len(uniq))
    else:
        cut = np.unique((np.arange(1, max_bins) * len(uniq)) // max_bins)
        cut = cut[(cut > 0) & (cut < len(uniq))]
    return 0.5 * (uniq[cut - 1] + uniq[cut])


def bin_features(X: np.ndarray, max_bins: int) -> tuple[list[np.ndarray], np.ndarray, np.ndarray]:
    """Return per-feature thresholds, the uint8 bin matrix and bin counts.

    ``bin <= b`` is equivalent to ``x <= thresholds[b]``.
    """
    thresholds = [_bin_thresholds(X[:, j], max_bins) for j in range(X.shape[1])]
    Xb = np.empty(X.shape, dtype=np.uint8)
    for j, t in enumerate(thresholds):
        Xb[:, j] = np.searchsorted(t, X[:, j], side="left")
    n_bins = np.array([len(t) + 1 for t in thresholds], dtype=np.int64)
    return thresholds, Xb, n_bins


@njit(cache=True, nogil=True, error_model="numpy")
def _fill_hist(Xb, g, h, w, rows, start, end, hist):
    d = Xb.shape[1]
    hist[:] = 0.0
    for k in range(start, end):
        i = rows[k]
        gi = g[i]
        hi = h[i]
        wi = w[i]
        for f in range(d):
            b = Xb[i, f]
            hist[f, b, 0] += gi
            hist[f, b, 1] += hi
            hist[f, b, 2] += wi


@njit(cache=True, nogil=True, error_model="numpy")
def _best_split(hist, n_bins, G, H, W, min_child, min_hess, l2, min_gain):
    best_gain = min_gain
    best_f = -1
    best_b = -1
    if H + l2 <= 0.0:
        return best_gain, best_f, best_b
    parent = G * G / (H + l2)
    for f in range(hist.shape[0]):
        gl = 0.0
        hl = 0.0
        wl = 0.0
        for b in range(n_bins[f] - 1):
            gl += hist[f, b, 0]
            hl += hist[f, b, 1]
            wl += hist[f, b, 2]
            if wl < min_child or hl < min_hess:
                continue
            wr = W - wl
            hr = H - hl
            if wr < min_child or hr < min_hess:
                break
            gr = G - gl
            gain = gl * gl / (hl + l2) + gr * gr / (hr + l2) - parent
            if gain > best_gain:
                best_gain = gain
                best_f = f
                best_b = b
    return best_gain, best_f, best_b


@njit(cache=True, nogil=True, error_model="numpy")
def _grow_tree(Xb, n_bins, g, h, w, rows, buf, num_leaves, max_depth, min_child, min_hess, l2, lr,
               pool, F):
    """Grow one tree over ``rows`` and add its scaled leaf values to ``F``.

    Returns node arrays (feature, bin, left, right, value) of length n_nodes.
    """
    max_nodes = 2 * num_leaves - 1
    feat = np.full(max_nodes, -1, dtype=np.int64)
    tbin = np.zeros(max_nodes, dtype=np.int64)
    left = np.full(max_nodes, -1, dtype=np.int64)
    right = np.full(max_nodes, -1, dtype=np.int64)
    value = np.zeros(max_nodes, dtype=np.float64)

    # per-slot leaf state
    node_of = np.zeros(num_leaves, dtype=np.int64)
    lo = np.zeros(num_leaves, dtype=np.int64)
    hi = np.zeros(num_leaves, dtype=np.int64)
    depth = np.zeros(num_leaves, dtype=np.int64)
    sG = np.zeros(num_leaves)
    sH = np.zeros(num_leaves)
    sW = np.zeros(num_leaves)
    gain = np.full(num_leaves, -1.0)
    sf = np.full(num_leaves, -1, dtype=np.int64)
    sb = np.full(num_leaves, -1, dtype=np.int64)

    n = rows.shape[0]
    _fill_hist(Xb, g, h, w, rows, 0, n, pool[0])
    G = 0.0
    H = 0.0
    W = 0.0
    for k in range(n):
        i = rows[k]
        G += g[i]
        H += h[i]
        W += w[i]
    sG[0] = G
    sH[0] = H
    sW[0] = W
    lo[0] = 0
    hi[0] = n
    n_nodes = 1
    n_leaves = 1
    if max_depth > 0:
        bg, bf, bb = _best_split(pool[0], n_bins, G, H, W, min_child, min_hess, l2, _EPS)
        gain[0] = bg
        sf[0] = bf
        sb[0] = bb

    while n_leaves < num_leaves:
        s = -1
        best = 0.0
        for t in range(n_leaves):
            if sf[t] >= 0 and gain[t] > best:
                best = gain[t]
                s = t
        if s < 0:
            break
        f = sf[s]
        b = sb[s]
        start = lo[s]
        end = hi[s]
        # stable partition of rows[start:end] by bin <= b
        nl = 0
        nr = 0
        for k in range(start, end):
            i = rows[k]
            if Xb[i, f] <= b:
                rows[start + nl] = i
                nl += 1
            else:
                buf[nr] = i
                nr += 1
        for k in range(nr):
            rows[start + nl + k] = buf[k]
        mid = start + nl

        parent = node_of[s]
        ln = n_nodes
        rn = n_nodes + 1
        n_nodes += 2
        feat[parent] = f
        tbin[parent] = b
        left[parent] = ln
        right[parent] = rn

        t = n_leaves
        n_leaves += 1
        # the smaller child gets a fresh histogram; the sibling is parent minus it
        if nl <= end - mid:
            small_slot, small_node, s_lo, s_hi = t, ln, start, mid
            big_slot, big_node, b_lo, b_hi = s, rn, mid, end
        else:
            small_slot, small_node, s_lo, s_hi = t, rn, mid, end
            big_slot, big_node, b_lo, b_hi = s, ln, start, mid
        _fill_hist(Xb, g, h, w, rows, s_lo, s_hi, pool[small_slot])
        pool[big_slot] -= pool[small_slot]

        d_child = depth[s] + 1
        Gs = 0.0
        Hs = 0.0
        Ws = 0.0
        for k in range(s_lo, s_hi):
            i = rows[k]
            Gs += g[i]
            Hs += h[i]
            Ws += w[i]
        Gp = sG[s]
        Hp = sH[s]
        Wp = sW[s]
        for c in range(2):
            if c == 0:
                slot, node, a, z = small_slot, small_node, s_lo, s_hi
                Gc, Hc, Wc = Gs, Hs, Ws
            else:
                slot, node, a, z = big_slot, big_node, b_lo, b_hi
                Gc, Hc, Wc = Gp - Gs, Hp - Hs, Wp - Ws
            node_of[slot] = node
            lo[slot] = a
            hi[slot] = z
            depth[slot] = d_child
            sG[slot] = Gc
            sH[slot] = Hc
            sW[slot] = Wc
            gain[slot] = -1.0
            sf[slot] = -1
            sb[slot] = -1
            if d_child < max_depth:
                bg, bf, bb = _best_split(pool[slot], n_bins, Gc, Hc, Wc, min_child, min_hess, l2, _EPS)
                gain[slot] = bg
                sf[slot] = bf
                sb[slot] = bb

    for t in range(n_leaves):
        denom = sH[t] + l2
        v = -lr * sG[t] / denom if denom > 0.0 else 0.0
        value[node_of[t]] = v
        for k in range(lo[t], hi[t]):
            F[rows[k]] += v
    return feat[:n_nodes], tbin[:n_nodes], left[:n_nodes], right[:n_nodes], value[:n_nodes]


@njit(cache=True, nogil=True, error_model="numpy")
def _gradients(F, y, w, g, h, rows):
    for k in range(rows.shape[0]):
        i = rows[k]
        p = 1.0 / (1.0 + np.exp(-F[i]))
        g[i] = w[i] * (p - y[i])
        h[i] = w[i] * p * (1.0 - p)


@njit(cache=True, nogil=True, error_model="numpy")
def _predict_raw(X, init, feat, thr, left, right, value, offsets):
    n = X.shape[0]
    out = np.full(n, init)
    n_trees = offsets.shape[0] - 1
    for i in range(n):
        acc = 0.0
        for t in range(n_trees):
            node = offsets[t]
            base = offsets[t]
            while left[node] >= 0:
                if X[i, feat[node]] <= thr[node]:
                    node = base + left[node]
                else:
                    node = base + right[node]
            acc += value[node]
        out[i] += acc
    return out


@dataclass(frozen=True, eq=False)
class BoostedTreesModel:
    """Fitted ensemble; node arrays of all trees are concatenated."""

    init_score: float
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    offsets: np.ndarray
    n_features: int
    spec: Any = None
    meta: dict = field(default_factory=dict)

    @property
    def n_trees(self) -> int:
        return len(self.offsets) - 1

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got shape {X.shape}")
        return _predict_raw(X, self.init_score, self.feature, self.threshold, self.left, self.right,
                            self.value, self.offsets)

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return np.clip(expit(self.decision_function(X)), _EPS, 1.0 - _EPS)

    def to_dict(self) -> dict:
        return {
            "kind": "gradient_boosted_trees",
            "init_score": self.init_score,
            "n_features": self.n_features,
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "offsets": self.offsets.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict, spec: Any = None) -> "BoostedTreesModel":
        return cls(
            init_score=float(data["init_score"]),
            feature=np.asarray(data["feature"], dtype=np.int64),
            threshold=np.asarray(data["threshold"], dtype=np.float64),
            left=np.asarray(data["left"], dtype=np.int64),
            right=np.asarray(data["right"], dtype=np.int64),
            value=np.asarray(data["value"], dtype=np.float64),
            offsets=np.asarray(data["offsets"], dtype=np.int64),
            n_features=int(data["n_features"]),
            spec=spec,
        )


def fit_boosted_trees(
    X: np.ndarray,
    y: np.ndarray,
    w: np.ndarray,
    n_estimators: int = 100,
    num_leaves: int = 31,
    min_child_samples: float = 20,
    max_depth: int = 6,
    learning_rate: float = 0.1,
    reg_lambda: float = 0.0,
    min_sum_hessian: float = 1e-3,
    max_bins: int = 64,
    spec: Any = None,
) -> BoostedTreesModel:
    """Fit on rows with positive weight; zero-weight rows are ignored entirely."""
    if not 2 <= max_bins <= 256:
        raise ValueError("max_bins must lie in [2, 256]")
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    active = np.flatnonzero(w > 0)
    Xa, ya, wa = X[active], y[active], w[active]
    thresholds, Xb, n_bins = bin_features(Xa, max_bins)
    Xb = np.ascontiguousarray(Xb)

    pos = float(np.sum(wa * ya))
    neg = float(np.sum(wa * (1.0 - ya)))
    init = float(np.log(max(pos, _EPS) / max(neg, _EPS)))
    n = len(active)
    F = np.full(n, init)
    g = np.empty(n)
    h = np.empty(n)
    buf = np.empty(n, dtype=np.int64)
    num_leaves = max(int(num_leaves), 1)
    width = max(int(n_bins.max(initial=1)), 1)
    pool = np.zeros((num_leaves, X.shape[1], width, 3))
    thr_table = np.zeros((X.shape[1], width))
    for j, t in enumerate(thresholds):
        thr_table[j, : len(t)] = t

    feats, thrs, lefts, rights, values, offsets = [], [], [], [], [], [0]
    for _ in range(int(n_estimators)):
        rows = np.arange(n, dtype=np.int64)
        _gradients(F, ya, wa, g, h, rows)
        f, b, l, r, v = _grow_tree(Xb, n_bins, g, h, wa, rows, buf, num_leaves, int(max_depth),
                                   float(min_child_samples), float(min_sum_hessian), float(reg_lambda),
                                   float(learning_rate), pool, F)
        thr = np.where(f >= 0, thr_table[np.maximum(f, 0), b], 0.0)
        feats.append(f)
        thrs.append(thr)
        lefts.append(l)
        rights.append(r)
        values.append(v)
        offsets.append(offsets[-1] + len(f))

    def cat(parts, dtype):
        return np.concatenate(parts).astype(dtype) if parts else np.empty(0, dtype=dtype)

    return BoostedTreesModel(
        init_score=init,
        feature=cat(feats, np.int64),
        threshold=cat(thrs, np.float64),
        left=cat(lefts, np.int64),
        right=cat(rights, np.int64),
        value=cat(values, np.float64),
        offsets=np.asarray(offsets, dtype=np.int64),
        n_features=X.shape[1],
        spec=spec,
    )
