"""Single regression-tree growth on binned features.

Trees are grown greedily depth-first.  Each node's split maximizes the
second-order gain

    0.5 * (GL^2/(HL+lambda) + GR^2/(HR+lambda) - G^2/(H+lambda)) - min_split_gain

over every (feature, bin boundary) candidate; ties go to the lowest
(feature index, bin index).  Child histograms are computed for the smaller
side only and obtained for the larger side by subtraction from the parent.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .binning import FeatureBinner
from .params import TrainParams

# Numerical guard: gains this small are indistinguishable from round-off on
# a constant-target node and must not trigger a split.
MIN_GAIN = 1e-12


@dataclass
class Tree:
    """Flat-array tree; ``feature < 0`` marks a leaf and ``value`` its weight."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    gain: np.ndarray
    missing_left: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def n_leaves(self) -> int:
        return int((self.feature < 0).sum())

    def predict(self, x: np.ndarray) -> np.ndarray:
        """Route every row to its leaf; NaN follows the node's missing direction."""
        idx = np.zeros(x.shape[0], dtype=np.int32)
        while True:
            f = self.feature[idx]
            active = np.nonzero(f >= 0)[0]
            if active.size == 0:
                break
            node = idx[active]
            xv = x[active, f[active]]
            go_left = xv < self.threshold[node]
            nan = np.isnan(xv)
            if nan.any():
                go_left = np.where(nan, self.missing_left[node], go_left)
            idx[active] = np.where(go_left, self.left[node], self.right[node])
        return self.value[idx]


class _TreeBuilder:
    def __init__(self) -> None:
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.value: list[float] = []
        self.gain: list[float] = []

    def add_node(self) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(0.0)
        self.gain.append(0.0)
        return len(self.feature) - 1

    def finish(self) -> Tree:
        n = len(self.feature)
        return Tree(
            feature=np.asarray(self.feature, dtype=np.int32),
            threshold=np.asarray(self.threshold, dtype=np.float64),
            left=np.asarray(self.left, dtype=np.int32),
            right=np.asarray(self.right, dtype=np.int32),
            value=np.asarray(self.value, dtype=np.float64),
            gain=np.asarray(self.gain, dtype=np.float64),
            missing_left=np.ones(n, dtype=bool),
        )


def _histograms(
    codes: np.ndarray,
    rows: np.ndarray,
    g: np.ndarray,
    h: np.ndarray | None,
    n_bins: int,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per (feature, bin) sums of gradient, hessian, and row count.

    ``h is None`` marks a constant unit hessian, in which case the hessian
    histogram aliases the count histogram.
    """
    n_feat = codes.shape[1]
    keys = codes[rows].astype(np.int64)
    keys += np.arange(n_feat, dtype=np.int64) * n_bins
    flat = keys.ravel()
    size = n_feat * n_bins
    hist_n = np.bincount(flat, minlength=size).astype(np.float64).reshape(n_feat, n_bins)
    hist_g = np.bincount(
        flat, weights=np.repeat(g[rows], n_feat), minlength=size
    ).reshape(n_feat, n_bins)
    if h is None:
        hist_h = hist_n
    else:
        hist_h = np.bincount(
            flat, weights=np.repeat(h[rows], n_feat), minlength=size
        ).reshape(n_feat, n_bins)
    return hist_g, hist_h, hist_n


def _best_split(
    hist_g: np.ndarray,
    hist_h: np.ndarray,
    hist_n: np.ndarray,
    g_total: float,
    h_total: float,
    n_total: float,
    params: TrainParams,
    n_cuts: np.ndarray,
) -> tuple[int, int, float, float, float] | None:
    """Highest-gain (feature, bin) candidate, or None when nothing qualifies."""
    lam = params.reg_lambda
    if h_total + lam <= 0.0 or hist_g.shape[1] < 2:
        return None
    gl = np.cumsum(hist_g, axis=1)[:, :-1]
    hl = np.cumsum(hist_h, axis=1)[:, :-1]
    nl = np.cumsum(hist_n, axis=1)[:, :-1]
    gr = g_total - gl
    hr = h_total - hl
    nr = n_total - nl
    bins = np.arange(gl.shape[1])
    valid = (
        (bins[None, :] < n_cuts[:, None])
        & (nl >= 1.0)
        & (nr >= 1.0)
        & (hl >= params.min_child_weight)
        & (hr >= params.min_child_weight)
        & (hl + lam > 0.0)
        & (hr + lam > 0.0)
    )
    parent = g_total * g_total / (h_total + lam)
    with np.errstate(divide="ignore", invalid="ignore"):
        gain = 0.5 * (gl * gl / (hl + lam) + gr * gr / (hr + lam) - parent) - params.min_split_gain
    gain = np.where(valid, gain, -np.inf)
    flat_idx = int(np.argmax(gain))  # row-major argmax = lowest (feature, bin) on ties
    best = gain.flat[flat_idx]
    if not best > MIN_GAIN:
        return None
    f, b = divmod(flat_idx, gl.shape[1])
    return f, b, float(best), float(gl[f, b]), float(hl[f, b])


def grow_tree(
    codes: np.ndarray,
    g: np.ndarray,
    h: np.ndarray | None,
    rows: np.ndarray,
    params: TrainParams,
    binner: FeatureBinner,
    col_idx: np.ndarray,
) -> Tree:
    """Grow one tree over ``rows`` using the column subset ``col_idx``.

    ``codes`` must already be restricted to ``col_idx`` columns; thresholds
    are resolved back to raw cut values through the binner so the finished
    tree predicts from unbinned features.
    """
    n_bins = max(binner.n_bins(int(f)) for f in col_idx)
    n_cuts = np.array([binner.n_bins(int(f)) - 1 for f in col_idx])
    lam = params.reg_lambda
    lr = params.learning_rate

    builder = _TreeBuilder()
    root = builder.add_node()
    hists = _histograms(codes, rows, g, h, n_bins)
    # Totals from feature 0's histogram row: every row lands in exactly one bin.
    g_total = float(hists[0][0].sum())
    h_total = float(hists[1][0].sum())
    stack = [(root, rows, 0, hists, g_total, h_total)]

    while stack:
        node, node_rows, depth, (hg, hh, hn), g_sum, h_sum = stack.pop()
        split = None
        if depth < params.max_depth and len(node_rows) >= 2:
            split = _best_split(hg, hh, hn, g_sum, h_sum, float(len(node_rows)), params, n_cuts)
        if split is None:
            builder.value[node] = -lr * g_sum / (h_sum + lam) if h_sum + lam > 0 else 0.0
            continue
        f_local, b, gain, g_left, h_left = split
        go_left = codes[node_rows, f_local] <= b
        rows_l = node_rows[go_left]
        rows_r = node_rows[~go_left]
        left_id = builder.add_node()
        right_id = builder.add_node()
        builder.feature[node] = int(col_idx[f_local])
        builder.threshold[node] = binner.threshold(int(col_idx[f_local]), b)
        builder.left[node] = left_id
        builder.right[node] = right_id
        builder.gain[node] = gain

        if len(rows_l) <= len(rows_r):
            hist_l = _histograms(codes, rows_l, g, h, n_bins)
            hist_r = (hg - hist_l[0], hh - hist_l[1], hn - hist_l[2])
        else:
            hist_r = _histograms(codes, rows_r, g, h, n_bins)
            hist_l = (hg - hist_r[0], hh - hist_r[1], hn - hist_r[2])
        stack.append((right_id, rows_r, depth + 1, hist_r, g_sum - g_left, h_sum - h_left))
        stack.append((left_id, rows_l, depth + 1, hist_l, g_left, h_left))

    return builder.finish()
