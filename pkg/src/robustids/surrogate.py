"""Differentiable surrogate used to compute input gradients for the attack.

The boosted-tree classifier has no gradient with respect to its inputs, so
perturbation directions come from a multinomial logistic regression trained
on the same clean training split: a single linear layer plus softmax, which
has the closed-form input gradient W (softmax(W^T x + b) - onehot(y)).
Parameters initialize to zero (the uniform predictor) and training is
seeded mini-batch gradient descent, so fitting is a pure function of
(X, y, cfg).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateTrainingWarning, EmptyInputError
from .jsonutil import canonical_json_bytes, sha256_hex
from .preprocess import FeatureMatrix

PARAMS_FORMAT = "robustids-surrogate"
PARAMS_VERSION = 1


@dataclass(frozen=True)
class SurrogateTrainCfg:
    epochs: int = 30
    step_size: float = 0.1
    l2: float = 1e-4
    batch_size: int = 256
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.step_size < 0 or self.l2 < 0:
            raise ValueError("step_size and l2 must be nonnegative")


@dataclass
class SurrogateParams:
    """Linear softmax model: W is d x K, b is K."""

    W: np.ndarray
    b: np.ndarray
    epoch_losses: tuple[float, ...] = field(default=())

    def __post_init__(self):
        self.W = np.asarray(self.W, dtype=np.float64)
        self.b = np.asarray(self.b, dtype=np.float64)
        if self.W.ndim != 2 or self.b.ndim != 1 or self.W.shape[1] != self.b.shape[0]:
            raise ValueError("inconsistent parameter shapes")
        if not (np.all(np.isfinite(self.W)) and np.all(np.isfinite(self.b))):
            raise ValueError("parameters must be finite")

    @property
    def n_features(self) -> int:
        return self.W.shape[0]

    @property
    def n_classes(self) -> int:
        return self.W.shape[1]

    def to_dict(self) -> dict:
        return {
            "format": PARAMS_FORMAT,
            "version": PARAMS_VERSION,
            "W": [[float(v) for v in row] for row in self.W],
            "b": [float(v) for v in self.b],
            "epoch_losses": [float(v) for v in self.epoch_losses],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SurrogateParams":
        if d.get("format") != PARAMS_FORMAT:
            raise ValueError(f"not a surrogate document: format={d.get('format')!r}")
        return cls(
            W=np.asarray(d["W"], dtype=np.float64),
            b=np.asarray(d["b"], dtype=np.float64),
            epoch_losses=tuple(d.get("epoch_losses", ())),
        )

    def content_hash(self) -> str:
        return sha256_hex(canonical_json_bytes(self.to_dict()))


def _scores(params: SurrogateParams, X: np.ndarray) -> np.ndarray:
    return X @ params.W + params.b


def _softmax_rows(scores: np.ndarray) -> np.ndarray:
    e = np.exp(scores - scores.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def _objective(W, b, X, y, l2) -> float:
    scores = X @ W + b
    m = scores.max(axis=1, keepdims=True)
    lse = m[:, 0] + np.log(np.exp(scores - m).sum(axis=1))
    ce = lse - scores[np.arange(X.shape[0]), y]
    return float(ce.mean() + 0.5 * l2 * np.sum(W * W))


def train_surrogate(
    X: FeatureMatrix, y, cfg: SurrogateTrainCfg, n_classes: int | None = None
) -> SurrogateParams:
    """Seeded mini-batch gradient descent on cross-entropy + (l2/2)||W||^2."""
    Xv = X.values
    labels = np.asarray(y, dtype=np.int64)
    n, d = Xv.shape
    if n == 0:
        raise EmptyInputError("cannot train the surrogate on an empty matrix")
    if labels.shape[0] != n:
        raise ValueError("label vector length must match matrix rows")
    k = int(labels.max()) + 1 if n_classes is None else int(n_classes)
    if labels.min() < 0 or labels.max() >= k:
        raise ValueError("labels must lie in [0, n_classes)")
    if np.unique(labels).size == 1:
        warnings.warn("surrogate training labels contain a single class",
                      DegenerateTrainingWarning, stacklevel=2)

    W = np.zeros((d, k), dtype=np.float64)
    b = np.zeros(k, dtype=np.float64)
    rng = np.random.default_rng(cfg.seed)
    losses = [_objective(W, b, Xv, labels, cfg.l2)]
    for _ in range(cfg.epochs):
        perm = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            batch = perm[start : start + cfg.batch_size]
            Xb = Xv[batch]
            probs = _softmax_rows(Xb @ W + b)
            probs[np.arange(batch.size), labels[batch]] -= 1.0
            probs /= batch.size
            W -= cfg.step_size * (Xb.T @ probs + cfg.l2 * W)
            b -= cfg.step_size * probs.sum(axis=0)
        losses.append(_objective(W, b, Xv, labels, cfg.l2))
    return SurrogateParams(W=W, b=b, epoch_losses=tuple(losses))


def surrogate_loss(params: SurrogateParams, x, y: int) -> float:
    """Softmax cross-entropy of W^T x + b at label y, for one sample."""
    xv = np.asarray(x, dtype=np.float64)
    if xv.shape != (params.n_features,):
        raise ValueError(f"expected a vector of length {params.n_features}")
    if not 0 <= y < params.n_classes:
        raise ValueError(f"label {y} out of range")
    scores = xv @ params.W + params.b
    m = scores.max()
    lse = m + np.log(np.exp(scores - m).sum())
    return float(lse - scores[y])


def input_gradient(params: SurrogateParams, x, y: int) -> np.ndarray:
    """Closed-form gradient of the loss with respect to the input vector."""
    xv = np.asarray(x, dtype=np.float64)
    if xv.shape != (params.n_features,):
        raise ValueError(f"expected a vector of length {params.n_features}")
    if not 0 <= y < params.n_classes:
        raise ValueError(f"label {y} out of range")
    p = _softmax_rows((xv @ params.W + params.b)[None, :])[0]
    p[y] -= 1.0
    return params.W @ p


def input_gradient_batch(params: SurrogateParams, X: np.ndarray, y) -> np.ndarray:
    Xv = np.asarray(X, dtype=np.float64)
    labels = np.asarray(y, dtype=np.int64)
    if Xv.ndim != 2 or Xv.shape[1] != params.n_features:
        raise ValueError(f"expected an n x {params.n_features} matrix")
    if labels.shape[0] != Xv.shape[0]:
        raise ValueError("label vector length must match matrix rows")
    p = _softmax_rows(_scores(params, Xv))
    p[np.arange(Xv.shape[0]), labels] -= 1.0
    return p @ params.W.T


def predict_class(params: SurrogateParams, X: FeatureMatrix) -> np.ndarray:
    Xv = X.values
    if Xv.shape[1] != params.n_features:
        raise ValueError(f"matrix has {Xv.shape[1]} features, surrogate expects {params.n_features}")
    return np.argmax(_scores(params, Xv), axis=1).astype(np.int64)


def save_params(params: SurrogateParams, path) -> None:
    from .jsonutil import write_json

    write_json(path, params.to_dict())


def load_params(path) -> SurrogateParams:
    from .jsonutil import read_json

    return SurrogateParams.from_dict(read_json(path))
