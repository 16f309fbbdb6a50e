"""Minibatch loss and gradients for the multi-instance recording objective.

Per recording: embed one segment per cluster, score every segment against every class,
aggregate over clusters, apply the AAM cross-entropy with the recording's weak label.
The batch loss is the mean over recordings. Stage-2 training reuses this with one
segment per entry, where aggregation is the identity.
"""

from __future__ import annotations

from concurrent.futures import Executor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .aam import AamParameters, aam_logit_gradient, aam_loss
from .aggregation import AggregationKind, aggregate, cluster_posteriors
from .head import HEAD_PARAMETER, ClassificationHead
from .network import EmbeddingNet, ForwardCache


@dataclass(slots=True)
class RecordingEntry:
    recording_id: int
    target: int
    segments: np.ndarray

    @property
    def num_clusters(self) -> int:
        return int(self.segments.shape[0])


@dataclass(slots=True)
class Minibatch:
    entries: list[RecordingEntry] = field(default_factory=list)

    @property
    def num_segments(self) -> int:
        return sum(entry.num_clusters for entry in self.entries)

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(slots=True)
class BatchResult:
    loss: float
    correct: int
    count: int
    grads: Optional[dict[str, np.ndarray]] = None

    @property
    def accuracy(self) -> float:
        return self.correct / self.count if self.count else 0.0


def loss_gradients(
    o: np.ndarray,
    target: int,
    kind: AggregationKind,
    tau: float,
    aam: AamParameters,
) -> np.ndarray:
    """dL/do for one recording: p(c|j) times the error signal of class j."""

    logits = aggregate(o, kind, tau)
    return cluster_posteriors(o, kind, tau) * aam_logit_gradient(logits, target, aam)[None, :]


def recording_loss(
    o: np.ndarray,
    target: int,
    kind: AggregationKind,
    tau: float,
    aam: AamParameters,
) -> tuple[float, np.ndarray]:
    logits = aggregate(o, kind, tau)
    loss, _ = aam_loss(logits, target, aam)
    return loss, logits


def parameters(net: EmbeddingNet, head: ClassificationHead) -> dict[str, np.ndarray]:
    """Every trainable array by name; the arrays are shared, not copied."""

    named = dict(net.params)
    named[HEAD_PARAMETER] = head.weights
    return named


def batch_objective(
    net: EmbeddingNet,
    head: ClassificationHead,
    minibatch: Minibatch,
    kind: AggregationKind,
    tau: float,
    aam: AamParameters,
    *,
    compute_gradients: bool = True,
    executor: Optional[Executor] = None,
) -> BatchResult:
    segments: list[np.ndarray] = [
        segment for entry in minibatch.entries for segment in entry.segments
    ]
    mapper = executor.map if executor is not None else map
    forwards: Sequence[tuple[np.ndarray, ForwardCache]] = list(mapper(net.forward, segments))
    embeddings = np.stack([embedding for embedding, _ in forwards]) if forwards else None

    count = len(minibatch.entries)
    weight = 1.0 / count if count else 0.0
    total_loss = 0.0
    correct = 0
    grad_embeddings: list[np.ndarray] = []
    grad_head = np.zeros_like(head.weights)

    offset = 0
    for entry in minibatch.entries:
        z = embeddings[offset : offset + entry.num_clusters]
        offset += entry.num_clusters
        o, winners = head.similarities(z)
        loss, logits = recording_loss(o, entry.target, kind, tau, aam)
        total_loss += loss
        correct += int(np.argmax(logits) == entry.target)
        if compute_gradients:
            grad_o = weight * loss_gradients(o, entry.target, kind, tau, aam)
            grad_z, grad_rows = head.backward(z, winners, grad_o)
            grad_head += grad_rows
            grad_embeddings.extend(grad_z)

    result = BatchResult(loss=total_loss * weight, correct=correct, count=count)
    if not compute_gradients:
        return result

    def segment_backward(index: int) -> dict[str, np.ndarray]:
        return net.backward(forwards[index][1], grad_embeddings[index])

    grads = {name: np.zeros_like(value) for name, value in net.params.items()}
    for segment_grads in mapper(segment_backward, range(len(segments))):
        for name, value in segment_grads.items():
            grads[name] += value
    grads[HEAD_PARAMETER] = grad_head
    result.grads = grads
    return result
