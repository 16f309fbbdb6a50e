from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp, softmax

_SINE_FLOOR = 1e-6


@dataclass(frozen=True, slots=True)
class AamParameters:
    scale: float = 30.0
    margin: float = 0.1


def margin_logit(cosine: float, margin: float) -> tuple[float, float]:
    """cos(arccos(l) + m) and its derivative w.r.t. l.

    Below cos(pi - m) the angle would wrap past pi, so the map falls back to the
    linear l - m*sin(m), whose slope is 1.
    """

    cos_m, sin_m = math.cos(margin), math.sin(margin)
    threshold = math.cos(math.pi - margin)
    if cosine > threshold:
        sine = math.sqrt(min(max(1.0 - cosine * cosine, 0.0), 1.0))
        value = cosine * cos_m - sine * sin_m
        slope = cos_m + cosine * sin_m / max(sine, _SINE_FLOOR)
        return value, slope
    return cosine - margin * sin_m, 1.0


def _scaled_logits(logits: np.ndarray, target: int, aam: AamParameters) -> tuple[np.ndarray, float]:
    scaled = np.asarray(logits, dtype=np.float64).copy()
    value, slope = margin_logit(float(scaled[target]), aam.margin)
    scaled[target] = value
    return aam.scale * scaled, slope


def aam_loss(logits: np.ndarray, target: int, aam: AamParameters) -> tuple[float, np.ndarray]:
    """Cross-entropy of the margin-penalized, scaled logits and the class posterior."""

    scaled, _ = _scaled_logits(logits, target, aam)
    loss = float(logsumexp(scaled) - scaled[target])
    return loss, softmax(scaled)


def aam_logit_gradient(logits: np.ndarray, target: int, aam: AamParameters) -> np.ndarray:
    """dL/dl_j = s*(p_j - [j = target]), times the margin slope on the target column."""

    scaled, slope = _scaled_logits(logits, target, aam)
    error = softmax(scaled)
    error[target] -= 1.0
    gradient = aam.scale * error
    gradient[target] *= slope
    return gradient
