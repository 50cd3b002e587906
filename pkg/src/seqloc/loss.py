"""Pose regression loss with weight decay and a temporal smoothness term.

Per frame ``t`` of a sequence::

    L_t = ||p_hat - p|| + beta * ||q_hat - q / ||q|| || + (gamma / 2) * ||theta||^2
          + delta * ||p_hat_t - p_hat_{t-1}||          (last term is 0 at t = 0)

and the sequence loss is the sum over frames. Norms are unsquared Euclidean
norms; their gradient at a zero residual is taken to be zero. ``theta`` covers
every weight matrix/vector of the network but not the biases.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateOrientationTerm, LengthMismatch
from .geometry import PosePrediction, Pose

NORM_EPS = 1e-12
BETA_RANGE = (1.0, 2000.0)


@dataclass(frozen=True)
class LossWeights:
    beta: float = 1.0
    gamma: float = 0.0
    delta: float = 0.0
    unsquared_weight_decay: bool = False
    temporal_on_error: bool = False

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError(f"beta must be > 0, got {self.beta}")
        if self.gamma < 0 or self.delta < 0:
            raise ValueError("gamma and delta must be >= 0")


@dataclass
class LossBreakdown:
    """Loss terms. Arrays are per frame (last axis is time) or scalars for totals."""

    position: np.ndarray
    orientation: np.ndarray
    weight_decay: np.ndarray
    temporal: np.ndarray

    @property
    def total(self):
        return self.position + self.orientation + self.weight_decay + self.temporal

    def summed(self) -> "LossBreakdown":
        return LossBreakdown(*(float(np.sum(a)) for a in
                               (self.position, self.orientation, self.weight_decay, self.temporal)))

    def as_dict(self) -> dict:
        s = self.summed()
        return {"position": s.position, "orientation": s.orientation,
                "weight_decay": s.weight_decay, "temporal": s.temporal, "total": s.total}


def decay_keys(params) -> list[str]:
    return [k for k in params if not k.startswith("b_")]


def params_norm_sq(params) -> float:
    if params is None:
        return 0.0
    return float(sum(np.sum(params[k] ** 2) for k in decay_keys(params)))


def weight_decay_value(weights: LossWeights, norm_sq: float) -> float:
    if weights.unsquared_weight_decay:
        return weights.gamma * np.sqrt(norm_sq)
    return 0.5 * weights.gamma * norm_sq


def _unit_truth_quat(q):
    q = np.asarray(q, dtype=np.float64)
    return q / np.linalg.norm(q, axis=-1, keepdims=True)


def frame_loss(pred: PosePrediction, truth: Pose, prev_pred_position, weights: LossWeights,
               params_norm_sq: float = 0.0, prev_truth_position=None) -> LossBreakdown:
    """Loss of a single frame. ``prev_pred_position`` is None at t = 0."""
    p_hat = np.asarray(pred.position, dtype=np.float64)
    q_hat = np.asarray(pred.raw_orientation, dtype=np.float64)
    p = np.asarray(truth.position, dtype=np.float64)
    q = _unit_truth_quat(truth.orientation)
    temporal = 0.0
    if prev_pred_position is not None:
        step = p_hat - np.asarray(prev_pred_position, dtype=np.float64)
        if weights.temporal_on_error:
            step = step - (p - np.asarray(prev_truth_position, dtype=np.float64))
        temporal = weights.delta * float(np.linalg.norm(step))
    return LossBreakdown(
        float(np.linalg.norm(p_hat - p)),
        weights.beta * float(np.linalg.norm(q_hat - q)),
        float(weight_decay_value(weights, params_norm_sq)),
        temporal,
    )


def _split(arr):
    arr = np.asarray(arr, dtype=np.float64)
    return arr[..., :3], arr[..., 3:7]


def _temporal_steps(pred_pos, true_pos, weights: LossWeights):
    step = np.diff(pred_pos, axis=-2)
    if weights.temporal_on_error:
        step = step - np.diff(true_pos, axis=-2)
    return step


def sequence_loss(preds, truths, weights: LossWeights, params=None) -> LossBreakdown:
    """Per-frame loss terms for ``(..., T, 7)`` predictions and ground truth.

    Temporal terms link consecutive frames of the same sequence only.
    """
    preds = np.asarray(preds, dtype=np.float64)
    truths = np.asarray(truths, dtype=np.float64)
    if preds.shape != truths.shape or preds.shape[-1] != 7 or preds.ndim < 2:
        raise LengthMismatch(f"preds {preds.shape} vs truths {truths.shape}")
    p_hat, q_hat = _split(preds)
    p, q = _split(truths)
    q = _unit_truth_quat(q)
    pos = np.linalg.norm(p_hat - p, axis=-1)
    ori = weights.beta * np.linalg.norm(q_hat - q, axis=-1)
    wd = np.full(pos.shape, weight_decay_value(weights, params_norm_sq(params)))
    temporal = np.zeros(pos.shape)
    temporal[..., 1:] = weights.delta * np.linalg.norm(_temporal_steps(p_hat, p, weights), axis=-1)
    return LossBreakdown(pos, ori, wd, temporal)


def _unit(r):
    n = np.linalg.norm(r, axis=-1, keepdims=True)
    return np.where(n > NORM_EPS, r / np.maximum(n, NORM_EPS), 0.0)


def loss_gradient(preds, truths, weights: LossWeights, params=None):
    """Gradient of the summed sequence loss.

    Returns ``(dL/dpreds, dL/dtheta)`` where the second item maps parameter
    names to the weight-decay gradient (biases map to zeros). Frame ``t``'s
    position appears in the temporal terms of frames ``t`` and ``t + 1``.
    """
    preds = np.asarray(preds, dtype=np.float64)
    truths = np.asarray(truths, dtype=np.float64)
    if preds.shape != truths.shape or preds.shape[-1] != 7 or preds.ndim < 2:
        raise LengthMismatch(f"preds {preds.shape} vs truths {truths.shape}")
    p_hat, q_hat = _split(preds)
    p, q = _split(truths)
    q = _unit_truth_quat(q)
    d = np.zeros_like(preds)
    d[..., :3] = _unit(p_hat - p)
    d[..., 3:7] = weights.beta * _unit(q_hat - q)
    if weights.delta > 0 and preds.shape[-2] > 1:
        u = weights.delta * _unit(_temporal_steps(p_hat, p, weights))
        d[..., 1:, :3] += u
        d[..., :-1, :3] -= u

    dtheta = None
    if params is not None:
        T = preds.shape[-2]
        n_seq = int(np.prod(preds.shape[:-2], dtype=int))
        frames = T * n_seq
        if weights.unsquared_weight_decay:
            norm = np.sqrt(params_norm_sq(params))
            scale = weights.gamma * frames / norm if norm > NORM_EPS else 0.0
        else:
            scale = weights.gamma * frames
        dtheta = {k: (scale * v if not k.startswith("b_") else np.zeros_like(v))
                  for k, v in params.items()}
    return d, dtheta


def beta_from_terms(mean_position: float, mean_orientation: float) -> float:
    if mean_orientation < 1e-12:
        raise DegenerateOrientationTerm(f"mean orientation term {mean_orientation:g} too small")
    return float(np.clip(mean_position / mean_orientation, *BETA_RANGE))


def balance_beta(preds, truths) -> float:
    """Beta that equalizes the mean position and (beta=1) orientation terms.

    ``preds``/``truths`` are ``(..., T, 7)`` arrays produced at initialization.
    """
    terms = sequence_loss(preds, truths, LossWeights(beta=1.0))
    return beta_from_terms(float(np.mean(terms.position)), float(np.mean(terms.orientation)))
