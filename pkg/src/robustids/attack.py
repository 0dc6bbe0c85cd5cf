"""Single-step sign-gradient (FGSM) adversarial example generation.

Each row is perturbed independently by epsilon times the sign of the
surrogate's input gradient, then clipped back into the scaled feature
domain: X_adv = clip(X + eps * sign(grad_x J), clip_min, clip_max).
A zero gradient coordinate carries no attack direction (sign(0) = 0), so
eps = 0 reproduces the input bit-exactly. Labels are never altered; the
adversarial matrix pairs with the original label vector.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import gbdt, surrogate
from .metrics import accuracy
from .preprocess import FeatureMatrix
from .surrogate import SurrogateParams, input_gradient_batch


@dataclass(frozen=True)
class AttackConfig:
    epsilon: float = 0.1
    clip_min: float = 0.0
    clip_max: float = 1.0
    perturb_mask: tuple[bool, ...] | None = None

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")
        if self.clip_min > self.clip_max:
            raise ValueError("clip_min must not exceed clip_max")
        if self.perturb_mask is not None:
            object.__setattr__(self, "perturb_mask", tuple(bool(m) for m in self.perturb_mask))

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "clip_min": self.clip_min,
            "clip_max": self.clip_max,
            "perturb_mask": None if self.perturb_mask is None else list(self.perturb_mask),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AttackConfig":
        return cls(
            epsilon=float(d.get("epsilon", 0.1)),
            clip_min=float(d.get("clip_min", 0.0)),
            clip_max=float(d.get("clip_max", 1.0)),
            perturb_mask=None if d.get("perturb_mask") is None else tuple(d["perturb_mask"]),
        )


def fgsm_batch(params: SurrogateParams, X: FeatureMatrix, y, cfg: AttackConfig) -> FeatureMatrix:
    """Perturb every row of X against its true label."""
    Xv = X.values
    labels = np.asarray(y, dtype=np.int64)
    if Xv.shape[1] != params.n_features:
        raise ValueError(f"matrix has {Xv.shape[1]} features, surrogate expects {params.n_features}")
    if labels.shape[0] != Xv.shape[0]:
        raise ValueError("label vector length must match matrix rows")
    if Xv.size and (Xv.min() < cfg.clip_min or Xv.max() > cfg.clip_max):
        raise ValueError("input matrix has entries outside [clip_min, clip_max]")
    mask = None
    if cfg.perturb_mask is not None:
        mask = np.asarray(cfg.perturb_mask, dtype=bool)
        if mask.shape[0] != Xv.shape[1]:
            raise ValueError("perturb_mask length must match feature count")
    grad = input_gradient_batch(params, Xv, labels)
    step = cfg.epsilon * np.sign(grad)
    if mask is not None:
        step[:, ~mask] = 0.0
    adv = np.clip(Xv + step, cfg.clip_min, cfg.clip_max)
    return FeatureMatrix(adv, X.column_names, X.column_kinds)


def epsilon_sweep(
    params: SurrogateParams,
    model: gbdt.Ensemble,
    X: FeatureMatrix,
    y,
    epsilons,
    base_cfg: AttackConfig | None = None,
) -> list[tuple[float, float, float]]:
    """Evaluate both models on one attack per epsilon.

    Returns (epsilon, surrogate accuracy, ensemble accuracy) tuples; the
    eps = 0 entry reproduces the clean accuracies exactly.
    """
    eps_list = [float(e) for e in epsilons]
    if not eps_list:
        raise ValueError("epsilons must be nonempty")
    if any(e < 0 for e in eps_list):
        raise ValueError("epsilons must be nonnegative")
    cfg = base_cfg if base_cfg is not None else AttackConfig()
    labels = np.asarray(y, dtype=np.int64)
    rows = []
    for eps in eps_list:
        adv = fgsm_batch(params, X, labels, replace(cfg, epsilon=eps))
        surr_acc = accuracy(labels, surrogate.predict_class(params, adv))
        ens_acc = accuracy(labels, gbdt.predict_class(model, adv))
        rows.append((eps, surr_acc, ens_acc))
    return rows
