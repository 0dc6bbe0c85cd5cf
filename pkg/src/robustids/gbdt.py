"""Multi-class gradient-boosted trees with histogram split finding.

Second-order boosting on the softmax objective: each round fits one
regression tree per class to the gradient/hessian of the multi-class
log-loss, using per-feature quantile-binned histograms of (sum g, sum h)
to score candidate splits. Leaf weights are -G/(H + lambda) shrunk by the
learning rate. Everything is deterministic: quantile bins are a pure
function of the training matrix, and all gain ties break toward the lower
feature index and lower threshold.
"""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .errors import DegenerateTrainingWarning, EmptyInputError
from .jsonutil import canonical_json_bytes, sha256_hex
from .preprocess import FeatureMatrix

HESSIAN_FLOOR = 1e-16
PROB_CLAMP = 1e-15
MODEL_FORMAT = "robustids-ensemble"
MODEL_VERSION = 1


@dataclass(frozen=True)
class Hyperparams:
    n_classes: int
    max_depth: int = 5
    learning_rate: float = 0.1
    rounds: int = 100
    reg_lambda: float = 1.0
    min_split_gain: float = 0.0
    min_child_weight: float = 1.0
    n_bins: int = 256

    def __post_init__(self):
        if self.n_classes < 2:
            raise ValueError("n_classes must be >= 2")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if not 0.0 <= self.learning_rate <= 1.0:
            raise ValueError("learning_rate must lie in [0, 1]")
        if self.rounds < 0:
            raise ValueError("rounds must be >= 0")
        if self.reg_lambda < 0 or self.min_split_gain < 0 or self.min_child_weight < 0:
            raise ValueError("regularization terms must be nonnegative")
        if self.n_bins < 2:
            raise ValueError("n_bins must be >= 2")


@dataclass
class Tree:
    """Flattened binary tree; node 0 is the root, feature == -1 marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    gain: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def predict_into(self, X: np.ndarray, out: np.ndarray) -> None:
        """Add this tree's leaf values for each row of X into ``out``."""
        idx = np.zeros(X.shape[0], dtype=np.int64)
        while True:
            feat = self.feature[idx]
            internal = np.nonzero(feat >= 0)[0]
            if internal.size == 0:
                break
            node = idx[internal]
            fv = X[internal, feat[internal]]
            go_left = fv < self.threshold[node]
            idx[internal] = np.where(go_left, self.left[node], self.right[node])
        out += self.value[idx]

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": [float(t) for t in self.threshold],
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": [float(v) for v in self.value],
            "gain": [float(g) for g in self.gain],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        return cls(
            feature=np.asarray(d["feature"], dtype=np.int64),
            threshold=np.asarray(d["threshold"], dtype=np.float64),
            left=np.asarray(d["left"], dtype=np.int64),
            right=np.asarray(d["right"], dtype=np.int64),
            value=np.asarray(d["value"], dtype=np.float64),
            gain=np.asarray(d["gain"], dtype=np.float64),
        )


@dataclass
class Ensemble:
    """Boosted forest: ``rounds * n_classes`` trees in round-major order."""

    hyperparams: Hyperparams
    base_score: float
    trees: list[Tree]
    n_features: int
    feature_names: tuple[str, ...]
    train_losses: tuple[float, ...] = field(default=())

    @property
    def n_rounds(self) -> int:
        return len(self.trees) // self.hyperparams.n_classes if self.trees else 0

    def to_dict(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "hyperparams": asdict(self.hyperparams),
            "base_score": float(self.base_score),
            "n_features": self.n_features,
            "feature_names": list(self.feature_names),
            "train_losses": [float(v) for v in self.train_losses],
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Ensemble":
        if d.get("format") != MODEL_FORMAT:
            raise ValueError(f"not an ensemble document: format={d.get('format')!r}")
        if d.get("version") != MODEL_VERSION:
            raise ValueError(f"unsupported ensemble version {d.get('version')!r}")
        return cls(
            hyperparams=Hyperparams(**d["hyperparams"]),
            base_score=float(d["base_score"]),
            trees=[Tree.from_dict(t) for t in d["trees"]],
            n_features=int(d["n_features"]),
            feature_names=tuple(d["feature_names"]),
            train_losses=tuple(d.get("train_losses", ())),
        )

    def content_hash(self) -> str:
        return sha256_hex(canonical_json_bytes(self.to_dict()))


def softmax(scores) -> np.ndarray:
    """Stable softmax of a single score vector (max-subtracted)."""
    s = np.asarray(scores, dtype=np.float64)
    if s.ndim != 1:
        raise ValueError("softmax expects a 1-d score vector")
    if not np.all(np.isfinite(s)):
        raise ValueError("softmax scores must be finite")
    e = np.exp(s - s.max())
    return e / e.sum()


def softmax_rows(scores: np.ndarray) -> np.ndarray:
    s = np.asarray(scores, dtype=np.float64)
    e = np.exp(s - s.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def grad_hess(probs, label: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-sample gradient and hessian of the multi-class log-loss.

    g_k = p_k - [k == label]; h_k = max(p_k (1 - p_k), floor).
    """
    p = np.asarray(probs, dtype=np.float64)
    if not 0 <= label < p.shape[0]:
        raise ValueError(f"label {label} out of range for {p.shape[0]} classes")
    g = p.copy()
    g[label] -= 1.0
    h = np.maximum(p * (1.0 - p), HESSIAN_FLOOR)
    return g, h


def logloss(probs: np.ndarray, y) -> float:
    """Mean negative log-probability of the true labels, clamp at 1e-15."""
    p = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(y, dtype=np.int64)
    if p.ndim != 2 or p.shape[0] == 0 or labels.shape[0] != p.shape[0]:
        raise ValueError("logloss expects a nonempty n x K matrix and matching labels")
    picked = np.clip(p[np.arange(p.shape[0]), labels], PROB_CLAMP, 1.0 - PROB_CLAMP)
    return float(-np.mean(np.log(picked)))


def _feature_edges(col: np.ndarray, n_bins: int) -> np.ndarray:
    """Bin edges for one feature: unique-value midpoints, or quantiles when
    there are more distinct values than bins."""
    u = np.unique(col)
    if u.size <= 1:
        return np.empty(0, dtype=np.float64)
    if u.size <= n_bins:
        return (u[:-1] + u[1:]) / 2.0
    qs = np.linspace(0.0, 1.0, n_bins + 1)[1:-1]
    return np.unique(np.quantile(col, qs))


def _bin_columns(X: np.ndarray, edges: list[np.ndarray]) -> list[np.ndarray]:
    max_bins = max((e.size for e in edges), default=0) + 1
    dtype = np.uint16 if max_bins <= np.iinfo(np.uint16).max else np.uint32
    return [
        np.searchsorted(edges[j], X[:, j], side="right").astype(dtype)
        for j in range(X.shape[1])
    ]


def _grow_tree(bcols, edges, g, h, hp: Hyperparams, score_col) -> Tree:
    """Build one tree on (g, h), adding its shrunk leaf weights to score_col."""
    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    value: list[float] = []
    gain: list[float] = []
    lam = hp.reg_lambda
    n_total = g.shape[0]

    def new_node() -> int:
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(0.0)
        gain.append(0.0)
        return len(feature) - 1

    def best_split(rows, g_node, h_node, g_sum, h_sum):
        best = None
        best_gain = -np.inf
        parent_term = g_sum * g_sum / (h_sum + lam)
        at_root = rows.size == n_total
        for f, e in enumerate(edges):
            if e.size == 0:
                continue
            nb = e.size + 1
            bcol = bcols[f] if at_root else bcols[f][rows]
            cnt = np.bincount(bcol, minlength=nb)
            gh = np.bincount(bcol, weights=g_node, minlength=nb)
            hh = np.bincount(bcol, weights=h_node, minlength=nb)
            cl = np.cumsum(cnt)[:-1]
            gl = np.cumsum(gh)[:-1]
            hl = np.cumsum(hh)[:-1]
            cr = rows.size - cl
            # suffix sums rather than total-minus-prefix: mirrored candidate
            # splits then tie exactly and break toward the lower feature
            gr = np.cumsum(gh[::-1])[::-1][1:]
            hr = np.cumsum(hh[::-1])[::-1][1:]
            valid = (cl > 0) & (cr > 0) & (hl >= hp.min_child_weight) & (hr >= hp.min_child_weight)
            if not valid.any():
                continue
            with np.errstate(divide="ignore", invalid="ignore"):
                gains = 0.5 * (gl * gl / (hl + lam) + gr * gr / (hr + lam) - parent_term)
            gains = np.where(valid, gains, -np.inf)
            b = int(np.argmax(gains))
            if gains[b] > best_gain:
                best_gain = float(gains[b])
                best = (f, b)
        if best is None or best_gain <= hp.min_split_gain:
            return None
        return best[0], best[1], best_gain

    def build(rows, depth: int) -> int:
        node = new_node()
        at_root = rows.size == n_total
        g_node = g if at_root else g[rows]
        h_node = h if at_root else h[rows]
        g_sum = float(g_node.sum())
        h_sum = float(h_node.sum())
        split = (
            best_split(rows, g_node, h_node, g_sum, h_sum) if depth < hp.max_depth else None
        )
        if split is None:
            w = -g_sum / (h_sum + lam) * hp.learning_rate
            value[node] = w
            score_col[rows] += w
            return node
        f, b, realized = split
        feature[node] = f
        threshold[node] = float(edges[f][b])
        gain[node] = realized
        mask = (bcols[f] if at_root else bcols[f][rows]) <= b
        left[node] = build(rows[mask], depth + 1)
        right[node] = build(rows[~mask], depth + 1)
        return node

    build(np.arange(n_total, dtype=np.int64), 0)
    return Tree(
        feature=np.asarray(feature, dtype=np.int64),
        threshold=np.asarray(threshold, dtype=np.float64),
        left=np.asarray(left, dtype=np.int64),
        right=np.asarray(right, dtype=np.int64),
        value=np.asarray(value, dtype=np.float64),
        gain=np.asarray(gain, dtype=np.float64),
    )


def train(X: FeatureMatrix, y, hp: Hyperparams) -> Ensemble:
    """Fit the boosted ensemble; records the training log-loss per round."""
    Xv = X.values
    labels = np.asarray(y, dtype=np.int64)
    n = Xv.shape[0]
    if n == 0:
        raise EmptyInputError("cannot train on an empty matrix")
    if labels.shape[0] != n:
        raise ValueError("label vector length must match matrix rows")
    if labels.min() < 0 or labels.max() >= hp.n_classes:
        raise ValueError("labels must lie in [0, n_classes)")
    if np.unique(labels).size == 1:
        warnings.warn(
            f"training labels contain a single class ({int(labels[0])})",
            DegenerateTrainingWarning,
            stacklevel=2,
        )

    k = hp.n_classes
    edges = [_feature_edges(Xv[:, j], hp.n_bins) for j in range(Xv.shape[1])]
    bcols = _bin_columns(Xv, edges)
    base_score = 0.0
    scores = np.full((n, k), base_score, dtype=np.float64)
    row_idx = np.arange(n)
    trees: list[Tree] = []
    losses: list[float] = []
    for _ in range(hp.rounds):
        probs = softmax_rows(scores)
        grads = probs.copy()
        grads[row_idx, labels] -= 1.0
        hess = np.maximum(probs * (1.0 - probs), HESSIAN_FLOOR)
        for cls in range(k):
            g_cls = np.ascontiguousarray(grads[:, cls])
            h_cls = np.ascontiguousarray(hess[:, cls])
            tree = _grow_tree(bcols, edges, g_cls, h_cls, hp, scores[:, cls])
            trees.append(tree)
        losses.append(logloss(softmax_rows(scores), labels))
    return Ensemble(
        hyperparams=hp,
        base_score=base_score,
        trees=trees,
        n_features=Xv.shape[1],
        feature_names=X.column_names,
        train_losses=tuple(losses),
    )


def raw_scores(model: Ensemble, X: FeatureMatrix) -> np.ndarray:
    Xv = X.values
    if Xv.shape[1] != model.n_features:
        raise ValueError(f"matrix has {Xv.shape[1]} features, model expects {model.n_features}")
    k = model.hyperparams.n_classes
    scores = np.full((Xv.shape[0], k), model.base_score, dtype=np.float64)
    for i, tree in enumerate(model.trees):
        tree.predict_into(Xv, scores[:, i % k])
    return scores


def predict_proba(model: Ensemble, X: FeatureMatrix) -> np.ndarray:
    return softmax_rows(raw_scores(model, X))


def predict_class(model: Ensemble, X: FeatureMatrix) -> np.ndarray:
    """Argmax of the class probabilities; ties go to the lowest class index."""
    return np.argmax(predict_proba(model, X), axis=1).astype(np.int64)


def feature_importance(model: Ensemble) -> list[tuple[str, float]]:
    """Total realized split gain per feature, descending (ties: lower index)."""
    totals: dict[int, float] = {}
    for tree in model.trees:
        internal = tree.feature >= 0
        for f, gn in zip(tree.feature[internal], tree.gain[internal]):
            totals[int(f)] = totals.get(int(f), 0.0) + float(gn)
    ranked = sorted(totals.items(), key=lambda item: (-item[1], item[0]))
    names = model.feature_names
    return [(names[f] if f < len(names) else f"f{f}", gain) for f, gain in ranked]


def save_model(model: Ensemble, path) -> None:
    from .jsonutil import write_json

    write_json(path, model.to_dict())


def load_model(path) -> Ensemble:
    from .jsonutil import read_json

    return Ensemble.from_dict(read_json(path))


def with_n_classes(hp: Hyperparams, n_classes: int) -> Hyperparams:
    return replace(hp, n_classes=n_classes)
