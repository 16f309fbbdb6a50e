from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import TYPE_CHECKING, Optional, Sequence

import numpy as np

from .synth import WeaklyLabeledRecording

if TYPE_CHECKING:
    from ..selection import SelfLabeledSet

SECONDS_PER_HOUR = 3600.0


@dataclass(frozen=True, slots=True)
class DatasetRow:
    dataset: str
    speakers: int
    recordings: int
    hours: float

    def as_dict(self) -> dict[str, object]:
        return asdict(self)


def corpus_summary(
    recordings: Sequence[WeaklyLabeledRecording],
    kept: Optional["SelfLabeledSet"] = None,
    *,
    frame_shift_ms: float = 10.0,
) -> list[DatasetRow]:
    """Rows for the uncut corpus, its target-speaker-only restriction and the kept chunks."""

    to_hours = frame_shift_ms / 1000.0 / SECONDS_PER_HOUR
    rows = [
        DatasetRow(
            dataset="uncut",
            speakers=len({recording.weak_label for recording in recordings}),
            recordings=len(recordings),
            hours=sum(recording.num_frames for recording in recordings) * to_hours,
        )
    ]
    labeled = [recording for recording in recordings if recording.ground_truth is not None]
    if labeled:
        target_frames = sum(
            int(np.sum(recording.ground_truth == recording.weak_label)) for recording in labeled
        )
        rows.append(
            DatasetRow(
                dataset="restricted",
                speakers=len({recording.weak_label for recording in labeled}),
                recordings=len(labeled),
                hours=target_frames * to_hours,
            )
        )
    if kept is not None:
        rows.append(
            DatasetRow(
                dataset="self-labeled",
                speakers=len(kept.chunks),
                recordings=len(kept.recording_ids),
                hours=kept.num_frames * to_hours,
            )
        )
    return rows
