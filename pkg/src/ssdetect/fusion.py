"""Logistic-regression score fusion.

Trained models map a score vector to ``w . S + b``, a log-odds that the
utterance is natural at the training prior.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .errors import (DegenerateLabelsError, DimensionMismatchError, FormatError,
                     MissingFileError, NumericalFailureError)
from .evaluation import eer_threshold


@dataclass(frozen=True, eq=False)
class FusionModel:
    labels: tuple
    weights: np.ndarray
    bias: float
    prior: float = 0.5
    scheme: str = "generic"
    threshold: float = 0.0

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64).ravel()
        if w.shape[0] != len(self.labels):
            raise DimensionMismatchError("one weight per input label required")
        if not (np.all(np.isfinite(w)) and np.isfinite(self.bias)):
            raise NumericalFailureError("non-finite fusion parameters")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "labels", tuple(self.labels))

    @property
    def num_inputs(self) -> int:
        return self.weights.shape[0]


def _softplus(z):
    return np.logaddexp(0.0, z)


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _class_weights(y, prior):
    n_tar = y.sum()
    n_non = y.size - n_tar
    return np.where(y, prior / n_tar, (1.0 - prior) / n_non)


def fusion_objective(params, X, y, prior: float = 0.5, l2: float = 1e-6):
    """Prior-weighted cross-entropy plus ``l2 * |w|^2``; returns (value, gradient).

    ``params`` is ``[w_1..w_J, b]``; ``y`` is True for natural utterances.
    The bias is not regularized.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=bool)
    w, b = params[:-1], params[-1]
    s = X @ w + b
    c = _class_weights(y, prior)
    value = np.sum(c * np.where(y, _softplus(-s), _softplus(s))) + l2 * w @ w
    ds = c * np.where(y, -_sigmoid(-s), _sigmoid(s))
    grad = np.append(X.T @ ds + 2.0 * l2 * w, ds.sum())
    return float(value), grad


def _hessian(params, X, y, prior, l2):
    s = X @ params[:-1] + params[-1]
    c = _class_weights(y, prior)
    h = c * _sigmoid(s) * _sigmoid(-s)
    Xb = np.hstack([X, np.ones((X.shape[0], 1))])
    H = (Xb * h[:, None]).T @ Xb
    H[np.arange(X.shape[1]), np.arange(X.shape[1])] += 2.0 * l2
    return H


def _check_inputs(X, labels):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(labels)
    if y.dtype != bool:
        y = np.array([v in (True, 1, "natural") for v in y.tolist()], dtype=bool)
    if X.shape[0] != y.shape[0]:
        raise DimensionMismatchError(f"{X.shape[0]} score rows for {y.shape[0]} labels")
    if y.all() or not y.any():
        raise DegenerateLabelsError("fusion training needs both natural and spoofed examples")
    if not np.all(np.isfinite(X)):
        raise NumericalFailureError("non-finite fusion inputs")
    return X, y


def minimize_objective(X, y, prior=0.5, l2=1e-6, init=None, grad_tol=1e-7, max_iters=1000):
    """Damped Newton with Armijo backtracking. Returns (params, value, grad_norm)."""
    params = np.zeros(X.shape[1] + 1) if init is None else np.array(init, dtype=np.float64)
    value, grad = fusion_objective(params, X, y, prior, l2)
    for _ in range(max_iters):
        gnorm = float(np.linalg.norm(grad))
        if gnorm < grad_tol:
            break
        H = _hessian(params, X, y, prior, l2)
        damping = 1e-12 * max(1.0, float(np.trace(H)))
        step = None
        while step is None:
            try:
                step = -np.linalg.solve(H + damping * np.eye(H.shape[0]), grad)
            except np.linalg.LinAlgError:
                damping *= 100.0
            if step is not None and grad @ step >= 0:
                step, damping = None, damping * 100.0
        t = 1.0
        while True:
            cand = params + t * step
            cv, cg = fusion_objective(cand, X, y, prior, l2)
            if cv <= value + 1e-4 * t * (grad @ step) or t < 1e-12:
                break
            t *= 0.5
        if cv > value:
            break
        params, value, grad = cand, cv, cg
    return params, value, float(np.linalg.norm(grad))


def train_fusion(vectors, labels, prior: float = 0.5, l2: float = 1e-6,
                 input_labels=None, scheme: str | None = None, init=None) -> FusionModel:
    """Fit fusion weights.

    ``vectors`` is either an (n, J) array or a list of GroupScoreVector.
    The stored decision threshold is the EER threshold of the fused training
    scores.
    """
    if len(vectors) and hasattr(vectors[0], "scores"):
        J = vectors[0].num_groups
        if any(v.num_groups != J or v.scheme != vectors[0].scheme for v in vectors):
            raise DimensionMismatchError("score vectors differ in scheme or group count")
        scheme = scheme or vectors[0].scheme + ("+dw" if vectors[0].weighted else "")
        X = np.vstack([v.scores for v in vectors])
    else:
        X = vectors
    X, y = _check_inputs(X, labels)
    if input_labels is None:
        input_labels = tuple(f"s{j}" for j in range(X.shape[1]))
    params, _, _ = minimize_objective(X, y, prior, l2, init)
    fused = X @ params[:-1] + params[-1]
    threshold = eer_threshold(fused[y], fused[~y])
    return FusionModel(tuple(input_labels), params[:-1], float(params[-1]), prior,
                       scheme or "generic", threshold)


def apply_fusion(model: FusionModel, scores) -> np.ndarray | float:
    """Fused log-odds for one GroupScoreVector / 1-D vector, or each row of a 2-D array."""
    x = np.asarray(getattr(scores, "scores", scores), dtype=np.float64)
    if x.shape[-1] != model.num_inputs:
        raise DimensionMismatchError(f"{x.shape[-1]} inputs for a {model.num_inputs}-input model")
    out = x @ model.weights + model.bias
    return float(out) if x.ndim == 1 else out


def decide(model: FusionModel, scores):
    """Hard natural/spoof decision at the stored threshold (True = natural)."""
    return np.asarray(apply_fusion(model, scores)) >= model.threshold


DETECTOR_ORDER = ("class", "phoneme", "gaussian")


def fuse_detectors(scores, labels, prior: float = 0.5, l2: float = 1e-6,
                   names=DETECTOR_ORDER) -> FusionModel:
    """Second-stage fusion over per-detector utterance scores, shape (n, 3)."""
    return train_fusion(scores, labels, prior, l2, input_labels=names, scheme="detectors")


# --- file format ------------------------------------------------------------

def format_fusion(model: FusionModel) -> str:
    f = lambda v: format(float(v), ".17g")  # noqa: E731
    return (f"SSDFUSE v1 {model.scheme} {model.num_inputs} {f(model.prior)} {f(model.threshold)}\n"
            + " ".join(f(w) for w in model.weights) + "\n"
            + f(model.bias) + "\n"
            + "labels " + " ".join(model.labels) + "\n")


def parse_fusion(text: str, source: str = "<string>") -> FusionModel:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    head = lines[0].split() if lines else []
    if len(head) != 6 or head[:2] != ["SSDFUSE", "v1"] or len(lines) < 3:
        raise FormatError(f"{source}: bad SSDFUSE file")
    try:
        j = int(head[3])
        weights = np.array(lines[1].split(), dtype=np.float64)
        bias = float(lines[2])
        prior, threshold = float(head[4]), float(head[5])
    except ValueError as exc:
        raise FormatError(f"{source}: {exc}") from exc
    if weights.size != j:
        raise FormatError(f"{source}: expected {j} weights")
    labels = tuple(f"s{k}" for k in range(j))
    if len(lines) > 3 and lines[3].startswith("labels"):
        labels = tuple(lines[3].split()[1:])
    return FusionModel(labels, weights, bias, prior, head[2], threshold)


def read_fusion(path) -> FusionModel:
    if not os.path.exists(path):
        raise MissingFileError(f"no such file: {path}")
    with open(path) as fh:
        return parse_fusion(fh.read(), str(path))
