from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Optional, Sequence

import numpy as np
import structlog

from ..config.settings import TrainingConfig
from ..corpus.synth import WeaklyLabeledRecording
from ..diarization.clustering import Clustering
from ..streams import substream
from .aam import AamParameters
from .head import ClassificationHead
from .loop import TrainingRun, fit, warmup_steps
from .network import EmbeddingNet
from .optim import OptState
from .sampling import eligible_recordings, plan_minibatches, sample_minibatch

logger = structlog.get_logger(__name__)

STREAM = "training.stage1"


@dataclass(slots=True)
class TrainingResult:
    net: EmbeddingNet
    head: ClassificationHead
    history: list[dict[str, Any]] = field(default_factory=list)
    cv_recording_ids: list[int] = field(default_factory=list)

    @property
    def final_cv_accuracy(self) -> Optional[float]:
        return self.history[-1]["cv_accuracy"] if self.history else None


def select_cv_recordings(
    recordings: Sequence[WeaklyLabeledRecording],
    cv_speakers: int,
    seed: int,
) -> list[int]:
    """One recording from each of `cv_speakers` celebrities having two or more recordings."""

    by_label: dict[int, list[int]] = {}
    for recording in recordings:
        by_label.setdefault(recording.weak_label, []).append(recording.recording_id)
    candidates = sorted(label for label, ids in by_label.items() if len(ids) >= 2)
    if cv_speakers <= 0 or not candidates:
        return []
    rng = substream(seed, f"{STREAM}.cv.select")
    chosen = rng.choice(len(candidates), size=min(cv_speakers, len(candidates)), replace=False)
    picked = []
    for index in sorted(int(value) for value in chosen):
        ids = sorted(by_label[candidates[index]])
        picked.append(ids[int(rng.integers(len(ids)))])
    return sorted(picked)


def train_stage1(
    recordings: Sequence[WeaklyLabeledRecording],
    clusterings: Mapping[int, Clustering],
    config: TrainingConfig,
    seed: int,
    *,
    threads: int = 1,
    log_path: Optional[Path] = None,
    snapshot_path: Optional[Path] = None,
    provenance: Optional[Mapping[str, Any]] = None,
) -> TrainingResult:
    """Weakly supervised training through the cluster-aggregated AAM recording loss."""

    config.check()
    class_ids = sorted({recording.weak_label for recording in recordings})
    targets = {r.recording_id: class_ids.index(r.weak_label) for r in recordings}
    features = {r.recording_id: r.features for r in recordings}
    input_dim = int(recordings[0].features.shape[1])

    cv_ids = select_cv_recordings(recordings, config.cv_speakers, seed)
    usable = {rid: clusterings[rid] for rid in eligible_recordings(clusterings, config.batch_budget)}
    train_ids = [rid for rid in sorted(usable) if rid in targets and rid not in set(cv_ids)]
    cluster_counts = {rid: usable[rid].num_clusters for rid in train_ids}

    plans = []
    for epoch in range(config.epochs):
        order = substream(seed, f"{STREAM}.order", epoch).permutation(np.asarray(train_ids))
        plans.append(plan_minibatches([int(rid) for rid in order], cluster_counts, config.batch_budget))

    def materialize(batch: Sequence[int], rng: np.random.Generator):
        return sample_minibatch(batch, features, clusterings, targets, config.segment_frames, rng)

    cv_batch = None
    if cv_ids:
        cv_batch = sample_minibatch(
            cv_ids, features, clusterings, targets, config.segment_frames,
            substream(seed, f"{STREAM}.cv.crops"),
        )

    aggregation = config.aggregation
    aam = AamParameters(scale=config.aam.scale, margin=config.aam.margin)
    run = TrainingRun(
        plans=plans,
        materialize=materialize,
        kind=aggregation.kind,
        tau_for_epoch=lambda epoch: aggregation.tau_for_epoch(epoch, config.epochs),
        aam_for_epoch=lambda epoch: aam,
        seed=seed,
        stream=STREAM,
        cv_batch=cv_batch,
        threads=threads,
        log_path=log_path,
        snapshot_path=snapshot_path,
        provenance=dict(provenance or {}),
    )
    net = EmbeddingNet.initialize(
        input_dim,
        config.hidden_widths,
        config.embedding_dim,
        activation=config.activation,
        seed=seed,
        stream=f"{STREAM}.network",
    )
    head = ClassificationHead.initialize(
        class_ids, config.embedding_dim, seed=seed, stream=f"{STREAM}.head"
    )
    opt = OptState(
        target_lr=config.learning_rate,
        momentum=config.momentum,
        warmup_steps=warmup_steps(run.total_steps, config.warmup_fraction),
        patience=config.patience,
    )
    logger.info(
        "training.stage1.start",
        variant=aggregation.variant,
        classes=len(class_ids),
        train_recordings=len(train_ids),
        cv_recordings=len(cv_ids),
        steps=run.total_steps,
        warmup_steps=opt.warmup_steps,
    )
    history = fit(net, head, opt, run)
    return TrainingResult(net=net, head=head, history=history, cv_recording_ids=cv_ids)
