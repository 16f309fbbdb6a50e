from __future__ import annotations

from pathlib import Path
from typing import Optional


class WeakSpeakerError(Exception):
    """Base class for errors raised by the pipeline."""


class ConfigurationError(WeakSpeakerError, ValueError):
    """A configuration value violates its documented range."""


class UnsupportedFormatError(WeakSpeakerError, ValueError):
    """An input file is not in the one format the reader supports."""

    def __init__(self, field: str, detail: str) -> None:
        super().__init__(f"unsupported {field}: {detail}")
        self.field = field


class MissingArtifactError(WeakSpeakerError, FileNotFoundError):
    """An upstream artifact is absent; `command` names the step that produces it."""

    def __init__(self, path: Path, command: str) -> None:
        super().__init__(f"{path} not found; run `weak-speaker {command}` first")
        self.path = path
        self.command = command


class NumericalError(WeakSpeakerError, ArithmeticError):
    """Training diverged or produced non-finite values."""

    def __init__(self, message: str, snapshot: Optional[Path] = None) -> None:
        if snapshot is not None:
            message = f"{message} (snapshot: {snapshot})"
        super().__init__(message)
        self.snapshot = snapshot


class MissingUtteranceError(WeakSpeakerError, LookupError):
    """A verification trial references an utterance without features."""

    def __init__(self, trial_index: int, utterance_id: int) -> None:
        super().__init__(f"trial {trial_index}: utterance {utterance_id} has no features")
        self.trial_index = trial_index
        self.utterance_id = utterance_id
