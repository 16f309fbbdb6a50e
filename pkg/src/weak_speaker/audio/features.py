"""Frame features: log mel filterbank energies, MFCC and per-segment normalization.

Conventions: pre-emphasis 0.97, Hamming window, FFT size the next power of two at or
above the window length, power spectrum |X|^2, HTK mel scale 2595*log10(1 + f/700)
with unnormalized triangular filters from 0 Hz to Nyquist, log floor 1e-10, and an
orthonormal DCT-II for cepstra.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import librosa
import numpy as np
from scipy.fft import dct

from ..errors import ConfigurationError
from .wav import Waveform

LOG_FLOOR = 1e-10
VARIANCE_FLOOR = 1e-8

FeatureKind = Literal["fbank", "mfcc", "synthetic"]


@dataclass(frozen=True, slots=True)
class FeatureMatrix:
    frames: np.ndarray
    frame_shift_ms: float
    feature_kind: FeatureKind

    @property
    def num_frames(self) -> int:
        return int(self.frames.shape[0])


def _next_power_of_two(value: int) -> int:
    size = 1
    while size < value:
        size *= 2
    return size


def frame_signal(
    waveform: Waveform,
    win_ms: float = 25.0,
    hop_ms: float = 10.0,
    preemphasis: float = 0.97,
) -> np.ndarray:
    """Pre-emphasize and cut into overlapping windows; returns (T, win) samples."""

    win = int(round(waveform.sample_rate * win_ms / 1000.0))
    hop = int(round(waveform.sample_rate * hop_ms / 1000.0))
    samples = np.asarray(waveform.samples, dtype=np.float64)
    if samples.shape[0] < win:
        raise ValueError(f"waveform of {samples.shape[0]} samples is shorter than one window")
    emphasized = np.empty_like(samples)
    emphasized[0] = samples[0]
    emphasized[1:] = samples[1:] - preemphasis * samples[:-1]
    frames = np.lib.stride_tricks.sliding_window_view(emphasized, win)[::hop]
    return frames * np.hamming(win)


def log_mel_energies(
    waveform: Waveform,
    n_mels: int,
    win_ms: float = 25.0,
    hop_ms: float = 10.0,
    preemphasis: float = 0.97,
) -> np.ndarray:
    frames = frame_signal(waveform, win_ms, hop_ms, preemphasis)
    n_fft = _next_power_of_two(frames.shape[1])
    power = np.abs(np.fft.rfft(frames, n=n_fft, axis=1)) ** 2
    filters = librosa.filters.mel(
        sr=waveform.sample_rate,
        n_fft=n_fft,
        n_mels=n_mels,
        fmin=0.0,
        fmax=waveform.sample_rate / 2.0,
        htk=True,
        norm=None,
        dtype=np.float64,
    )
    energies = power @ filters.T
    return np.log(np.maximum(energies, LOG_FLOOR))


def fbank(
    waveform: Waveform,
    n_mels: int = 80,
    win_ms: float = 25.0,
    hop_ms: float = 10.0,
    preemphasis: float = 0.97,
) -> FeatureMatrix:
    frames = log_mel_energies(waveform, n_mels, win_ms, hop_ms, preemphasis)
    return FeatureMatrix(frames=frames, frame_shift_ms=hop_ms, feature_kind="fbank")


def log_mel_to_cepstra(log_mel: np.ndarray, n_ceps: int) -> np.ndarray:
    if n_ceps > log_mel.shape[-1]:
        raise ConfigurationError(f"n_ceps={n_ceps} exceeds the {log_mel.shape[-1]} mel bands")
    return dct(log_mel, type=2, axis=-1, norm="ortho")[..., :n_ceps]


def mfcc(
    waveform: Waveform,
    n_ceps: int = 20,
    n_mels: int = 40,
    win_ms: float = 25.0,
    hop_ms: float = 10.0,
    preemphasis: float = 0.97,
) -> FeatureMatrix:
    if n_ceps > n_mels:
        raise ConfigurationError(f"n_ceps={n_ceps} exceeds n_mels={n_mels}")
    log_mel = log_mel_energies(waveform, n_mels, win_ms, hop_ms, preemphasis)
    return FeatureMatrix(
        frames=log_mel_to_cepstra(log_mel, n_ceps),
        frame_shift_ms=hop_ms,
        feature_kind="mfcc",
    )


def normalize_frames(frames: np.ndarray) -> np.ndarray:
    """Standardize each dimension over the time axis of one segment."""

    frames = np.asarray(frames, dtype=np.float64)
    mean = frames.mean(axis=0)
    variance = frames.var(axis=0)
    return (frames - mean) / np.sqrt(np.maximum(variance, VARIANCE_FLOOR))


def instance_normalize(features: FeatureMatrix) -> FeatureMatrix:
    return FeatureMatrix(
        frames=normalize_frames(features.frames),
        frame_shift_ms=features.frame_shift_ms,
        feature_kind=features.feature_kind,
    )
