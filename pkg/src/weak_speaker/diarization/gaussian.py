from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_TRACE_RIDGE = 1e-6
_ABSOLUTE_RIDGE = 1e-12


def regularized_log_det(covariance: np.ndarray) -> np.ndarray:
    """log|Σ + εI| with ε = 1e-6·trace(Σ)/F; accepts a stack of matrices."""

    dim = covariance.shape[-1]
    trace = np.trace(covariance, axis1=-2, axis2=-1)
    ridge = _TRACE_RIDGE * trace / dim + _ABSOLUTE_RIDGE
    regularized = covariance + ridge[..., None, None] * np.eye(dim)
    _, log_det = np.linalg.slogdet(regularized)
    return log_det


@dataclass(frozen=True, slots=True)
class SegmentGaussian:
    """Full-covariance maximum-likelihood Gaussian of a set of frames."""

    mean: np.ndarray
    covariance: np.ndarray
    count: int

    @classmethod
    def from_frames(cls, frames: np.ndarray) -> "SegmentGaussian":
        frames = np.asarray(frames, dtype=np.float64)
        mean = frames.mean(axis=0)
        centered = frames - mean
        covariance = centered.T @ centered / frames.shape[0]
        return cls(mean=mean, covariance=covariance, count=int(frames.shape[0]))

    @property
    def dim(self) -> int:
        return int(self.mean.shape[0])

    @property
    def log_det(self) -> float:
        return float(regularized_log_det(self.covariance))

    def merge(self, other: "SegmentGaussian") -> "SegmentGaussian":
        count = self.count + other.count
        mean = (self.count * self.mean + other.count * other.mean) / count
        second = self.count * (self.covariance + np.outer(self.mean, self.mean)) + other.count * (
            other.covariance + np.outer(other.mean, other.mean)
        )
        covariance = second / count - np.outer(mean, mean)
        covariance = 0.5 * (covariance + covariance.T)
        return SegmentGaussian(mean=mean, covariance=covariance, count=count)


def bic_penalty(dim: int, count: int | np.ndarray) -> np.ndarray:
    return 0.5 * (dim + dim * (dim + 1) / 2.0) * np.log(count)


def delta_bic(a: SegmentGaussian, b: SegmentGaussian, penalty_weight: float) -> float:
    """Positive when two Gaussians explain the frames better than one."""

    merged = a.merge(b)
    gain = 0.5 * (merged.count * merged.log_det - a.count * a.log_det - b.count * b.log_det)
    return float(gain - penalty_weight * bic_penalty(a.dim, merged.count))
