"""Self-labeling: keep a diarization chunk iff the stage-1 model names the recording's celebrity."""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np
import structlog

from .audio.features import normalize_frames
from .config.settings import SelectionConfig
from .corpus.storage import provenance_lines
from .corpus.synth import WeaklyLabeledRecording
from .diarization.segmentation import Chunk
from .training.head import ClassificationHead
from .training.network import EmbeddingNet

logger = structlog.get_logger(__name__)

SECONDS_PER_HOUR = 3600.0


@dataclass(slots=True)
class SelfLabeledSet:
    """Kept chunks per celebrity id; celebrities without chunks are absent."""

    chunks: dict[int, list[Chunk]] = field(default_factory=dict)
    frame_shift_ms: float = 10.0

    @property
    def num_chunks(self) -> int:
        return sum(len(chunks) for chunks in self.chunks.values())

    @property
    def num_frames(self) -> int:
        return sum(chunk.num_frames for chunks in self.chunks.values() for chunk in chunks)

    @property
    def hours(self) -> float:
        return self.num_frames * self.frame_shift_ms / 1000.0 / SECONDS_PER_HOUR

    @property
    def recording_ids(self) -> set[int]:
        return {chunk.recording_id for chunks in self.chunks.values() for chunk in chunks}

    def summary(self) -> dict[str, float | int]:
        return {
            "speakers": len(self.chunks),
            "recordings": len(self.recording_ids),
            "chunks": self.num_chunks,
            "hours": self.hours,
        }

    def items(self) -> list[tuple[int, Chunk]]:
        return [(label, chunk) for label in sorted(self.chunks) for chunk in self.chunks[label]]


@dataclass(frozen=True, slots=True)
class SelectionMetrics:
    precision: float
    recall: float
    hours_kept: float
    empty: bool


def center_crop(frames: np.ndarray, max_frames: int) -> np.ndarray:
    if frames.shape[0] <= max_frames:
        return frames
    start = (frames.shape[0] - max_frames) // 2
    return frames[start : start + max_frames]


def embed_frames(net: EmbeddingNet, frames: np.ndarray, max_frames: int) -> np.ndarray:
    return net.embed(normalize_frames(center_crop(frames, max_frames)))


def classify_chunk(
    net: EmbeddingNet,
    head: ClassificationHead,
    chunk_features: np.ndarray,
    max_select_frames: int = 2000,
) -> int:
    """Celebrity id with the highest cosine similarity; no margin, no aggregation."""

    return head.predict(embed_frames(net, chunk_features, max_select_frames))


def build_self_labeled(
    net: EmbeddingNet,
    head: ClassificationHead,
    recordings: Sequence[WeaklyLabeledRecording],
    chunkings: Mapping[int, Sequence[Chunk]],
    config: SelectionConfig,
    *,
    threads: int = 1,
    frame_shift_ms: float = 10.0,
) -> SelfLabeledSet:
    jobs: list[tuple[WeaklyLabeledRecording, Chunk]] = []
    too_short = 0
    for recording in sorted(recordings, key=lambda r: r.recording_id):
        for chunk in sorted(chunkings.get(recording.recording_id, ())):
            if chunk.num_frames < config.min_select_frames:
                too_short += 1
                continue
            jobs.append((recording, chunk))

    def predict(job: tuple[WeaklyLabeledRecording, Chunk]) -> int:
        recording, chunk = job
        return classify_chunk(net, head, chunk.frames(recording.features), config.max_select_frames)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            predictions = list(pool.map(predict, jobs))
    else:
        predictions = [predict(job) for job in jobs]

    selected = SelfLabeledSet(frame_shift_ms=frame_shift_ms)
    for (recording, chunk), predicted in zip(jobs, predictions):
        if predicted == recording.weak_label:
            selected.chunks.setdefault(recording.weak_label, []).append(chunk)
    selected.chunks = dict(sorted(selected.chunks.items()))

    logger.info(
        "selection.summary",
        classified=len(jobs),
        too_short=too_short,
        **selected.summary(),
    )
    return selected


def oracle_self_labeled(
    recordings: Sequence[WeaklyLabeledRecording],
    *,
    frame_shift_ms: float = 10.0,
) -> SelfLabeledSet:
    """Ground-truth target-speaker turns of every recording, as if selection were perfect."""

    selected = SelfLabeledSet(frame_shift_ms=frame_shift_ms)
    for recording in sorted(recordings, key=lambda r: r.recording_id):
        if recording.ground_truth is None:
            raise ValueError(f"recording {recording.recording_id} has no ground truth")
        is_target = np.concatenate(([0], recording.ground_truth == recording.weak_label, [0]))
        edges = np.flatnonzero(np.diff(is_target.astype(np.int8)))
        for start, end in zip(edges[0::2], edges[1::2]):
            selected.chunks.setdefault(recording.weak_label, []).append(
                Chunk(recording.recording_id, int(start), int(end))
            )
    selected.chunks = dict(sorted(selected.chunks.items()))
    return selected


def selection_metrics(
    self_labeled: SelfLabeledSet,
    recordings: Sequence[WeaklyLabeledRecording],
) -> SelectionMetrics:
    """Frame-weighted precision and recall of kept chunks against true target frames.

    An empty selection has precision 1.0 by convention and is flagged `empty`.
    """

    by_id = {recording.recording_id: recording for recording in recordings}
    kept_frames = 0
    kept_target = 0
    for label, chunk in self_labeled.items():
        truth = chunk.frames(by_id[chunk.recording_id].ground_truth)
        kept_frames += chunk.num_frames
        kept_target += int(np.sum(truth == label))
    total_target = sum(
        int(np.sum(recording.ground_truth == recording.weak_label))
        for recording in recordings
        if recording.ground_truth is not None
    )
    empty = kept_frames == 0
    return SelectionMetrics(
        precision=1.0 if empty else kept_target / kept_frames,
        recall=kept_target / total_target if total_target else 0.0,
        hours_kept=self_labeled.hours,
        empty=empty,
    )


def write_self_labeled(
    manifest_path: Path,
    summary_path: Path,
    self_labeled: SelfLabeledSet,
    provenance: Mapping[str, object],
    metrics: Optional[SelectionMetrics] = None,
) -> None:
    shift = self_labeled.frame_shift_ms / 1000.0
    lines = provenance_lines(provenance)
    for label, chunk in sorted(self_labeled.items(), key=lambda item: (item[1], item[0])):
        lines.append(
            f"{chunk.recording_id}\t{chunk.start_frame * shift:.2f}\t"
            f"{chunk.end_frame * shift:.2f}\t{label}"
        )
    manifest_path.parent.mkdir(parents=True, exist_ok=True)
    manifest_path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    summary: dict[str, object] = {"provenance": dict(provenance), **self_labeled.summary()}
    if metrics is not None:
        summary["precision"] = metrics.precision
        summary["recall"] = metrics.recall
        summary["empty"] = metrics.empty
    summary_path.write_text(json.dumps(summary, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def read_self_labeled(manifest_path: Path, *, frame_shift_ms: float = 10.0) -> SelfLabeledSet:
    shift = frame_shift_ms / 1000.0
    selected = SelfLabeledSet(frame_shift_ms=frame_shift_ms)
    with manifest_path.open("r", encoding="utf-8") as stream:
        for line in stream:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            recording_id, start, end, label = line.split("\t")
            chunk = Chunk(
                int(recording_id), int(round(float(start) / shift)), int(round(float(end) / shift))
            )
            selected.chunks.setdefault(int(label), []).append(chunk)
    selected.chunks = {label: sorted(chunks) for label, chunks in sorted(selected.chunks.items())}
    return selected
