"""Fusion of stochastic detector passes into epistemic/aleatoric uncertainty.

Each detection arrives as T samples (one per stochastic forward pass). The box
regression variance splits into a spread-of-means part (epistemic) and the mean
of the per-pass predicted noise variance (aleatoric); classification confidence
is summarised by predictive entropy and mutual information, both in nats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import entr

from .errors import DomainError
from .geometry import wrap_angle

BOX_FIELDS = ("x", "y", "z", "h", "w", "l", "theta")
THETA = 6


@dataclass(frozen=True)
class BoxParams:
    """3D box: centre (x, y, z), size (h, w, l) in metres, yaw ``theta`` in radians."""

    x: float
    y: float
    z: float
    h: float
    w: float
    l: float  # noqa: E741
    theta: float

    def __post_init__(self):
        if not (self.h > 0 and self.w > 0 and self.l > 0):
            raise DomainError(f"box dimensions must be positive, got h={self.h}, w={self.w}, l={self.l}")
        object.__setattr__(self, "theta", wrap_angle(float(self.theta)))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z, self.h, self.w, self.l, self.theta])

    @classmethod
    def from_array(cls, v) -> "BoxParams":
        return cls(*(float(e) for e in v))


@dataclass(frozen=True)
class DetectionSample:
    """Output of one stochastic forward pass.

    ``log_variance`` holds log(sigma^2) per box element (same order as
    ``BoxParams.as_array``); ``class_scores`` is a probability vector.
    """

    box: BoxParams
    log_variance: np.ndarray
    class_scores: np.ndarray

    def __post_init__(self):
        lam = np.asarray(self.log_variance, dtype=float)
        scores = np.asarray(self.class_scores, dtype=float)
        if lam.shape != (7,) or not np.all(np.isfinite(lam)):
            raise DomainError("log_variance must be 7 finite values")
        if scores.ndim != 1 or scores.size == 0:
            raise DomainError("class_scores must be a non-empty vector")
        if np.any(scores < 0) or np.any(scores > 1) or abs(scores.sum() - 1.0) > 1e-9:
            raise DomainError("class_scores must lie on the probability simplex")
        object.__setattr__(self, "log_variance", lam)
        object.__setattr__(self, "class_scores", scores)


@dataclass(frozen=True)
class DetectionBelief:
    mean: BoxParams
    var_epistemic: np.ndarray
    var_aleatoric: np.ndarray
    var_total: np.ndarray
    predictive_entropy: float
    mutual_information: float
    sample_count: int


def _check(samples: Sequence[DetectionSample]) -> None:
    if len(samples) == 0:
        raise DomainError("at least one detection sample is required")
    n_classes = samples[0].class_scores.size
    if any(s.class_scores.size != n_classes for s in samples):
        raise DomainError("all samples must share the same class count")


def _boxes(samples: Sequence[DetectionSample]) -> np.ndarray:
    return np.array([s.box.as_array() for s in samples])


def _scores(samples: Sequence[DetectionSample]) -> np.ndarray:
    return np.array([s.class_scores for s in samples])


def _circular_mean(theta: np.ndarray) -> float:
    return math.atan2(float(np.mean(np.sin(theta))), float(np.mean(np.cos(theta))))


def predictive_mean(samples: Sequence[DetectionSample]) -> BoxParams:
    """Elementwise mean box; yaw is averaged on the circle."""
    _check(samples)
    boxes = _boxes(samples)
    mean = boxes.mean(axis=0)
    mean[THETA] = _circular_mean(boxes[:, THETA])
    return BoxParams.from_array(mean)


def _clamp_variance(v: np.ndarray) -> np.ndarray:
    if np.any(v < -1e-9):
        raise ArithmeticError(f"negative variance {v.min()} beyond round-off")
    return np.maximum(v, 0.0)


def predictive_variance(samples: Sequence[DetectionSample]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return ``(var_epistemic, var_aleatoric, var_total)`` as 7-vectors.

    Epistemic variance is the population variance (divide by T) of the sampled
    boxes; yaw deviations are unwrapped about the circular mean first so that
    samples straddling +-pi do not produce a spurious ~pi^2 variance.
    Aleatoric variance is the mean of exp(log_variance).
    """
    _check(samples)
    boxes = _boxes(samples)
    centred = boxes - boxes.mean(axis=0)
    ref = _circular_mean(boxes[:, THETA])
    dtheta = np.array([wrap_angle(t - ref) for t in boxes[:, THETA]])
    centred[:, THETA] = dtheta - dtheta.mean()
    epistemic = _clamp_variance(np.mean(centred**2, axis=0))
    aleatoric = np.mean(np.exp(np.array([s.log_variance for s in samples])), axis=0)
    return epistemic, aleatoric, epistemic + aleatoric


def predictive_entropy(samples: Sequence[DetectionSample]) -> float:
    """Entropy (nats) of the pass-averaged class distribution."""
    _check(samples)
    p_bar = _scores(samples).mean(axis=0)
    return float(entr(p_bar).sum())


def mutual_information(samples: Sequence[DetectionSample]) -> float:
    """Predictive entropy minus the mean per-pass entropy, floored at 0."""
    _check(samples)
    scores = _scores(samples)
    expected = float(entr(scores).sum(axis=1).mean())
    return max(0.0, predictive_entropy(samples) - expected)


def fuse_samples(samples: Sequence[DetectionSample]) -> DetectionBelief:
    epi, alea, total = predictive_variance(samples)
    return DetectionBelief(
        mean=predictive_mean(samples),
        var_epistemic=epi,
        var_aleatoric=alea,
        var_total=total,
        predictive_entropy=predictive_entropy(samples),
        mutual_information=mutual_information(samples),
        sample_count=len(samples),
    )


def attenuated_loss(residuals, log_vars) -> tuple[float, np.ndarray]:
    """Heteroscedastic regression loss and its gradient w.r.t. the log-variances.

    loss = mean_d( 0.5 * exp(-lam_d) * r_d^2 + 0.5 * lam_d )
    """
    r = np.atleast_1d(np.asarray(residuals, dtype=float))
    lam = np.atleast_1d(np.asarray(log_vars, dtype=float))
    if r.shape != lam.shape or r.ndim != 1 or r.size == 0:
        raise DomainError(f"residuals and log_vars must be equal-length vectors, got {r.shape} and {lam.shape}")
    if not (np.all(np.isfinite(r)) and np.all(np.isfinite(lam))):
        raise DomainError("residuals and log_vars must be finite")
    d = r.size
    weighted = np.exp(-lam) * r**2
    loss = float(np.sum(0.5 * weighted + 0.5 * lam) / d)
    grad = (-0.5 * weighted + 0.5) / d
    return loss, grad
