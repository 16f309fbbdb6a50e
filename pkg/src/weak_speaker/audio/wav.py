from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from ..errors import UnsupportedFormatError

SUPPORTED_SAMPLE_RATE = 16000


@dataclass(frozen=True, slots=True)
class Waveform:
    samples: np.ndarray
    sample_rate: int

    @property
    def duration_seconds(self) -> float:
        return self.samples.shape[0] / self.sample_rate


def read_wav(path: str | Path) -> Waveform:
    """Read a RIFF/WAVE PCM16 mono 16 kHz file, scaled to [-1, 1)."""

    try:
        sample_rate, data = wavfile.read(str(path))
    except ValueError as exc:
        raise UnsupportedFormatError("container", f"{path}: {exc}") from exc

    if data.dtype != np.int16:
        raise UnsupportedFormatError("encoding", f"{path}: expected PCM16, found {data.dtype}")
    if data.ndim != 1:
        raise UnsupportedFormatError("channels", f"{path}: expected mono, found {data.shape[1]}")
    if sample_rate != SUPPORTED_SAMPLE_RATE:
        raise UnsupportedFormatError(
            "sample_rate", f"{path}: expected {SUPPORTED_SAMPLE_RATE} Hz, found {sample_rate}"
        )
    return Waveform(samples=data.astype(np.float64) / 32768.0, sample_rate=sample_rate)
