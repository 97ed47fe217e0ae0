"""Newton-boosted tree ensembles for demand regression and classification.

Squared-error regression uses gradients g = prediction - target with unit
hessians; multiclass classification uses the softmax objective with
g_k = p_k - [y = k] and h_k = p_k (1 - p_k).  Leaf weights follow the
regularized Newton step -G/(H + lambda), shrunk by the learning rate.

Ensembles embed the feature scaler, so both training and prediction accept
raw (unscaled) feature rows.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..errors import (
    EmptyMatrix,
    FeatureMismatch,
    LabelOutOfRange,
    NonFiniteFeature,
    WrongTask,
)
from ..postprocess import Scaler
from ..rng import CounterRng, derive_seed
from .binning import FeatureBinner
from .params import TrainParams
from .tree import Tree, grow_tree

_PROB_FLOOR = 1e-15


def _softmax(margins: np.ndarray) -> np.ndarray:
    shifted = margins - margins.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _rmse(pred: np.ndarray, y: np.ndarray) -> float:
    return float(np.sqrt(np.mean((pred - y) ** 2)))


def _logloss(proba: np.ndarray, y: np.ndarray) -> float:
    p = np.clip(proba[np.arange(len(y)), y.astype(np.int64)], _PROB_FLOOR, 1.0)
    return float(-np.mean(np.log(p)))


@dataclass
class Ensemble:
    """A trained forecaster: base score plus shrunk trees.

    Classification stores ``num_classes`` trees per boosting round, ordered
    round-major.  Prediction is deterministic and the object is immutable in
    practice, so it is safe to share across threads.
    """

    task: str
    num_classes: int
    base_score: np.ndarray
    trees: list[Tree]
    feature_names: tuple[str, ...]
    scaler: Scaler | None = None
    horizon: int | None = None
    label_tolerance: float | None = None
    peaks: dict[str, float] | None = None
    params: dict | None = None
    config_hash: str = ""
    best_iteration: int | None = None
    train_loss: list[float] | None = None
    _fast: list | None = field(default=None, repr=False, compare=False)

    @property
    def trees_per_round(self) -> int:
        return self.num_classes if self.task == "classification" else 1

    @property
    def num_rounds(self) -> int:
        return len(self.trees) // self.trees_per_round

    # -- prediction ---------------------------------------------------------

    def _prepare(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != len(self.feature_names):
            raise FeatureMismatch(
                f"expected {len(self.feature_names)} feature columns, got shape {x.shape}"
            )
        return self.scaler.transform_array(x) if self.scaler is not None else x

    def margins(self, x) -> np.ndarray:
        xt = self._prepare(x)
        n = xt.shape[0]
        if self.task == "regression":
            out = np.full((n, 1), self.base_score[0])
            for tree in self.trees:
                out[:, 0] += tree.predict(xt)
            return out
        out = np.tile(self.base_score, (n, 1))
        for i, tree in enumerate(self.trees):
            out[:, i % self.num_classes] += tree.predict(xt)
        return out

    def predict(self, x) -> np.ndarray:
        m = self.margins(x)
        if self.task == "regression":
            return m[:, 0]
        return np.argmax(m, axis=1).astype(np.int64)

    def predict_proba(self, x) -> np.ndarray:
        if self.task != "classification":
            raise WrongTask("predict_proba requires a classification ensemble")
        return _softmax(self.margins(x))

    def _fast_tables(self) -> list:
        """Plain-Python tree tables for the low-latency single-row path."""
        if self._fast is None:
            tables = []
            for tree in self.trees:
                tables.append(
                    (
                        tree.feature.tolist(),
                        tree.threshold.tolist(),
                        tree.left.tolist(),
                        tree.right.tolist(),
                        tree.value.tolist(),
                        tree.missing_left.tolist(),
                    )
                )
            scale = None
            if self.scaler is not None:
                scale = (
                    self.scaler.shift.tolist(),
                    self.scaler.span.tolist(),
                    self.scaler.passthrough.tolist(),
                )
            self._fast = [tables, scale]
        return self._fast

    def predict_one(self, row) -> float | int:
        """Single-record prediction tuned for per-record latency benchmarks."""
        tables, scale = self._fast_tables()
        values = [float(v) for v in row]
        if scale is not None:
            shift, span, keep = scale
            values = [
                v if keep[j] else (v - shift[j]) / span[j] for j, v in enumerate(values)
            ]
        if self.task == "regression":
            total = float(self.base_score[0])
            for feats, thr, left, right, leaf, miss in tables:
                i = 0
                f = feats[0]
                while f >= 0:
                    v = values[f]
                    if v < thr[i] or (v != v and miss[i]):
                        i = left[i]
                    else:
                        i = right[i]
                    f = feats[i]
                total += leaf[i]
            return total
        score = [float(b) for b in self.base_score]
        for t, (feats, thr, left, right, leaf, miss) in enumerate(tables):
            i = 0
            f = feats[0]
            while f >= 0:
                v = values[f]
                if v < thr[i] or (v != v and miss[i]):
                    i = left[i]
                else:
                    i = right[i]
                f = feats[i]
            score[t % self.num_classes] += leaf[i]
        return max(range(self.num_classes), key=lambda c: (score[c], -c))

    def feature_importance(self) -> dict[str, float]:
        """Total split gain accumulated per feature (0 when never split on)."""
        gains = np.zeros(len(self.feature_names))
        for tree in self.trees:
            internal = tree.feature >= 0
            np.add.at(gains, tree.feature[internal], tree.gain[internal])
        return {name: float(g) for name, g in zip(self.feature_names, gains)}


def _validate_inputs(x: np.ndarray, y: np.ndarray, params: TrainParams) -> None:
    if x.ndim != 2 or x.shape[0] < 2:
        raise EmptyMatrix(f"training matrix must have >= 2 rows, got shape {x.shape}")
    if x.shape[0] != len(y):
        raise EmptyMatrix(f"targets ({len(y)}) do not align with rows ({x.shape[0]})")
    if not np.isfinite(x).all():
        raise NonFiniteFeature("training features contain NaN or infinity")
    if params.task == "classification":
        labels = np.asarray(y)
        if labels.min() < 0 or labels.max() >= params.num_classes:
            raise LabelOutOfRange(
                f"labels must lie in [0, {params.num_classes}), got "
                f"[{labels.min()}, {labels.max()}]"
            )


def fit(
    x,
    y,
    params: TrainParams,
    feature_names: Sequence[str],
    scaler: Scaler | None = None,
    eval_set: tuple | None = None,
    round_callback: Callable[[int, float], bool] | None = None,
    track_train_loss: bool = False,
    horizon: int | None = None,
    label_tolerance: float | None = None,
    peaks: dict[str, float] | None = None,
    config_hash: str = "",
) -> Ensemble:
    """Train an ensemble on raw features (scaling happens internally).

    ``eval_set`` is a raw (features, targets) pair scored after every round
    (RMSE for regression, multiclass log-loss otherwise); it drives early
    stopping and the optional ``round_callback(round_index, metric)``, whose
    True return stops training (used by the tuner's pruner).
    """
    x = np.asarray(x, dtype=np.float64)
    y_arr = np.asarray(y, dtype=np.float64)
    _validate_inputs(x, y_arr, params)
    if len(feature_names) != x.shape[1]:
        raise FeatureMismatch("feature_names length does not match matrix width")

    xt = scaler.transform_array(x) if scaler is not None else x
    binner = FeatureBinner.fit(xt, params.num_bins)
    codes = binner.transform(xt)
    n, n_feat = xt.shape
    rng = CounterRng(derive_seed(params.seed, "gbtree"))

    has_eval = eval_set is not None
    if has_eval:
        xv = np.asarray(eval_set[0], dtype=np.float64)
        yv = np.asarray(eval_set[1], dtype=np.float64)
        xvt = scaler.transform_array(xv) if scaler is not None else xv

    classification = params.task == "classification"
    n_classes = params.num_classes if classification else 1
    if classification:
        y_int = y_arr.astype(np.int64)
        counts = np.bincount(y_int, minlength=n_classes).astype(np.float64)
        base = np.log((counts + 1.0) / (n + n_classes))
        margins = np.tile(base, (n, 1))
        onehot = np.zeros((n, n_classes))
        onehot[np.arange(n), y_int] = 1.0
        if has_eval:
            yv_int = yv.astype(np.int64)
            margins_v = np.tile(base, (len(yv), 1))
    else:
        base = np.array([float(np.mean(y_arr))])
        margins = np.full((n, 1), base[0])
        if has_eval:
            margins_v = np.full((len(yv), 1), base[0])

    trees: list[Tree] = []
    losses: list[float] = [] if track_train_loss else None
    best_metric = np.inf
    best_round = 0
    stall = 0
    completed = 0

    for r in range(params.num_rounds):
        if params.subsample < 1.0:
            rows = np.nonzero(rng.uniforms(n) < params.subsample)[0]
            if len(rows) < 2:
                rows = np.arange(n)
        else:
            rows = np.arange(n)

        if classification:
            proba = _softmax(margins)
        for k in range(n_classes):
            if params.colsample < 1.0:
                n_cols = max(1, int(round(params.colsample * n_feat)))
                col_idx = rng.choose(n_feat, n_cols) if n_cols < n_feat else np.arange(n_feat)
            else:
                col_idx = np.arange(n_feat)
            if classification:
                g = proba[:, k] - onehot[:, k]
                h = proba[:, k] * (1.0 - proba[:, k])
            else:
                g = margins[:, 0] - y_arr
                h = None  # unit hessian
            sub_codes = codes[:, col_idx] if len(col_idx) < n_feat else codes
            tree = grow_tree(sub_codes, g, h, rows, params, binner, col_idx)
            trees.append(tree)
            margins[:, k] += tree.predict(xt)
            if has_eval:
                margins_v[:, k] += tree.predict(xvt)
        completed = r + 1

        if track_train_loss:
            if classification:
                losses.append(_logloss(_softmax(margins), y_int))
            else:
                losses.append(float(np.mean((margins[:, 0] - y_arr) ** 2)))

        if has_eval:
            if classification:
                metric = _logloss(_softmax(margins_v), yv_int)
            else:
                metric = _rmse(margins_v[:, 0], yv)
            if metric < best_metric:
                best_metric, best_round, stall = metric, completed, 0
            else:
                stall += 1
            if round_callback is not None and round_callback(completed, metric):
                break
            if (
                params.early_stopping_rounds is not None
                and stall >= params.early_stopping_rounds
            ):
                break

    if has_eval and params.early_stopping_rounds is not None and best_round < completed:
        trees = trees[: best_round * n_classes]
        completed = best_round

    return Ensemble(
        task=params.task,
        num_classes=n_classes if classification else 1,
        base_score=base,
        trees=trees,
        feature_names=tuple(feature_names),
        scaler=scaler,
        horizon=horizon,
        label_tolerance=label_tolerance,
        peaks=peaks,
        params=params.as_dict(),
        config_hash=config_hash,
        best_iteration=best_round if has_eval else completed,
        train_loss=losses,
    )
