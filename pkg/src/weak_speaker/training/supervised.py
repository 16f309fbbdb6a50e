from __future__ import annotations

from pathlib import Path
from typing import Any, Mapping, Optional, Sequence

import numpy as np
import structlog

from ..audio.features import normalize_frames
from ..config.settings import SupervisedConfig, TrainingConfig
from ..corpus.synth import WeaklyLabeledRecording
from ..diarization.segmentation import Chunk
from ..errors import WeakSpeakerError
from ..selection import SelfLabeledSet, oracle_self_labeled
from ..streams import substream
from .aam import AamParameters
from .head import ClassificationHead
from .loop import TrainingRun, fit, warmup_steps
from .network import EmbeddingNet
from .objective import Minibatch, RecordingEntry
from .optim import OptState
from .sampling import crop_segment
from .weak import TrainingResult

logger = structlog.get_logger(__name__)


def margin_schedule(
    epoch: int,
    epochs: int,
    start: float,
    end: float,
    ramp_start: int = 0,
) -> float:
    """Hold `start` until `ramp_start`, then rise linearly to reach `end` on the last epoch."""

    last = epochs - 1
    if epoch >= last:
        return end
    if epoch <= ramp_start or last <= ramp_start:
        return start
    return start + (end - start) * (epoch - ramp_start) / (last - ramp_start)


def first_epoch_after_warmup(plans: Sequence[Sequence[Any]], warmup: int) -> int:
    steps = 0
    for epoch, batches in enumerate(plans):
        if steps >= warmup:
            return epoch
        steps += len(batches)
    return len(plans)


def _chunk_entry(
    features: np.ndarray,
    chunk: Chunk,
    target: int,
    segment_frames: int,
    rng: np.random.Generator,
) -> RecordingEntry:
    segment = normalize_frames(crop_segment(chunk.frames(features), segment_frames, rng))
    return RecordingEntry(recording_id=chunk.recording_id, target=target, segments=segment[None])


def train_stage2(
    self_labeled: SelfLabeledSet,
    recordings: Sequence[WeaklyLabeledRecording],
    training: TrainingConfig,
    config: SupervisedConfig,
    seed: int,
    *,
    threads: int = 1,
    log_path: Optional[Path] = None,
    snapshot_path: Optional[Path] = None,
    provenance: Optional[Mapping[str, Any]] = None,
    stream: str = "training.stage2",
) -> TrainingResult:
    """Per-segment AAM training from scratch on pseudo-labeled chunks."""

    config.check()
    features = {recording.recording_id: recording.features for recording in recordings}
    class_ids = []
    for label, chunks in self_labeled.chunks.items():
        if len(chunks) < config.min_chunks_per_class:
            logger.info(
                "supervised.class.excluded",
                celebrity=label,
                chunks=len(chunks),
                minimum=config.min_chunks_per_class,
            )
            continue
        class_ids.append(label)
    class_ids.sort()
    if not class_ids:
        raise WeakSpeakerError(
            f"no celebrity keeps {config.min_chunks_per_class} or more self-labeled chunks"
        )

    holdout_rng = substream(seed, f"{stream}.cv.select")
    train_items: list[tuple[int, Chunk]] = []
    cv_items: list[tuple[int, Chunk]] = []
    for index, label in enumerate(class_ids):
        chunks = sorted(self_labeled.chunks[label])
        held = int(holdout_rng.integers(len(chunks))) if len(chunks) >= 2 else -1
        for position, chunk in enumerate(chunks):
            (cv_items if position == held else train_items).append((index, chunk))

    plans = []
    for epoch in range(config.epochs):
        order = substream(seed, f"{stream}.order", epoch).permutation(len(train_items))
        plans.append(
            [
                [int(position) for position in order[start : start + config.batch_size]]
                for start in range(0, len(order), config.batch_size)
            ]
        )

    def materialize(batch: Sequence[int], rng: np.random.Generator) -> Minibatch:
        entries = []
        for position in batch:
            target, chunk = train_items[position]
            entries.append(
                _chunk_entry(features[chunk.recording_id], chunk, target, training.segment_frames, rng)
            )
        return Minibatch(entries)

    cv_rng = substream(seed, f"{stream}.cv.crops")
    cv_batch = Minibatch(
        [
            _chunk_entry(features[chunk.recording_id], chunk, target, training.segment_frames, cv_rng)
            for target, chunk in cv_items
        ]
    )

    total_steps = sum(len(batches) for batches in plans)
    warmup = warmup_steps(total_steps, training.warmup_fraction)
    ramp_start = first_epoch_after_warmup(plans, warmup)

    def aam_for_epoch(epoch: int) -> AamParameters:
        margin = margin_schedule(
            epoch, config.epochs, config.margin_start, config.margin_end, ramp_start
        )
        return AamParameters(scale=training.aam.scale, margin=margin)

    run = TrainingRun(
        plans=plans,
        materialize=materialize,
        kind="max",
        tau_for_epoch=lambda epoch: 1.0,
        aam_for_epoch=aam_for_epoch,
        seed=seed,
        stream=stream,
        cv_batch=cv_batch if len(cv_batch) else None,
        threads=threads,
        log_path=log_path,
        snapshot_path=snapshot_path,
        provenance=dict(provenance or {}),
    )
    input_dim = int(next(iter(features.values())).shape[1])
    net = EmbeddingNet.initialize(
        input_dim,
        training.hidden_widths,
        training.embedding_dim,
        activation=training.activation,
        seed=seed,
        stream=f"{stream}.network",
    )
    head = ClassificationHead.initialize(
        class_ids,
        training.embedding_dim,
        sub_centers=config.sub_centers,
        seed=seed,
        stream=f"{stream}.head",
    )
    opt = OptState(
        target_lr=config.learning_rate,
        momentum=training.momentum,
        warmup_steps=warmup,
        patience=training.patience,
    )
    logger.info(
        f"{stream}.start",
        classes=len(class_ids),
        train_chunks=len(train_items),
        cv_chunks=len(cv_items),
        sub_centers=config.sub_centers,
        steps=total_steps,
        margin_ramp_start=ramp_start,
    )
    history = fit(net, head, opt, run)
    return TrainingResult(net=net, head=head, history=history)


def train_reference(
    recordings: Sequence[WeaklyLabeledRecording],
    training: TrainingConfig,
    config: SupervisedConfig,
    seed: int,
    **kwargs: Any,
) -> TrainingResult:
    """Strongly supervised baseline on the ground-truth target-speaker turns."""

    kwargs.setdefault("stream", "training.reference")
    return train_stage2(oracle_self_labeled(recordings), recordings, training, config, seed, **kwargs)
