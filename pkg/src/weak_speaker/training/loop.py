"""Epoch loop shared by weak (stage 1) and supervised (stage 2) training."""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping, Optional, Sequence

import numpy as np
import structlog

from ..errors import NumericalError
from ..streams import substream
from .aam import AamParameters
from .aggregation import AggregationKind
from .checkpoint import Checkpoint, save_checkpoint
from .head import HEAD_PARAMETER, ClassificationHead
from .network import EmbeddingNet
from .objective import Minibatch, batch_objective, parameters
from .optim import OptState, sgd_step

logger = structlog.get_logger(__name__)

Materialize = Callable[[Sequence[Any], np.random.Generator], Minibatch]


@dataclass(slots=True)
class TrainingRun:
    """Everything the loop needs beyond the model itself."""

    plans: Sequence[Sequence[Sequence[Any]]]
    materialize: Materialize
    kind: AggregationKind
    tau_for_epoch: Callable[[int], float]
    aam_for_epoch: Callable[[int], AamParameters]
    seed: int
    stream: str
    cv_batch: Optional[Minibatch] = None
    threads: int = 1
    log_path: Optional[Path] = None
    snapshot_path: Optional[Path] = None
    provenance: Mapping[str, Any] = field(default_factory=dict)

    @property
    def total_steps(self) -> int:
        return sum(len(batches) for batches in self.plans)


def warmup_steps(total_steps: int, fraction: float) -> int:
    return int(math.ceil(fraction * total_steps)) if fraction > 0 else 0


def _finite_or_none(value: float) -> Optional[float]:
    return float(value) if math.isfinite(value) else None


def _abort(net: EmbeddingNet, head: ClassificationHead, run: TrainingRun, message: str, **context: Any):
    snapshot = None
    if run.snapshot_path is not None:
        snapshot = run.snapshot_path
        save_checkpoint(snapshot, Checkpoint(net.copy(), head.copy(), dict(run.provenance)))
    logger.error("training.diverged", stream=run.stream, snapshot=str(snapshot), **context)
    return NumericalError(message, snapshot)


def fit(
    net: EmbeddingNet,
    head: ClassificationHead,
    opt: OptState,
    run: TrainingRun,
) -> list[dict[str, Any]]:
    """Run every planned epoch; returns one history entry per epoch.

    The network and head are updated in place. Entries are also appended as JSON lines
    to `run.log_path` when set.
    """

    params = parameters(net, head)
    history: list[dict[str, Any]] = []
    if run.log_path is not None:
        run.log_path.parent.mkdir(parents=True, exist_ok=True)
        run.log_path.write_text("", encoding="utf-8")

    executor = ThreadPoolExecutor(max_workers=run.threads) if run.threads > 1 else None
    try:
        for epoch, batches in enumerate(run.plans):
            tau = run.tau_for_epoch(epoch)
            aam = run.aam_for_epoch(epoch)
            rng = substream(run.seed, f"{run.stream}.crops", epoch)
            losses = []
            correct = 0
            seen = 0
            for batch in batches:
                minibatch = run.materialize(batch, rng)
                result = batch_objective(
                    net, head, minibatch, run.kind, tau, aam, executor=executor
                )
                if not math.isfinite(result.loss):
                    raise _abort(
                        net, head, run, f"non-finite training loss at step {opt.step}",
                        epoch=epoch, step=opt.step,
                    )
                sgd_step(params, result.grads, opt, unit_rows=(HEAD_PARAMETER,))
                losses.append(result.loss)
                correct += result.correct
                seen += result.count

            cv_loss = math.nan
            cv_accuracy = math.nan
            if run.cv_batch is not None and len(run.cv_batch):
                cv = batch_objective(
                    net, head, run.cv_batch, run.kind, tau, aam,
                    compute_gradients=False, executor=executor,
                )
                cv_loss, cv_accuracy = cv.loss, cv.accuracy
                if not math.isfinite(cv_loss):
                    raise _abort(net, head, run, f"non-finite CV loss in epoch {epoch}", epoch=epoch)
                opt.observe_cv(cv_loss)

            entry = {
                "epoch": epoch,
                "steps": opt.step,
                "train_loss": float(np.mean(losses)) if losses else None,
                "train_accuracy": correct / seen if seen else None,
                "cv_loss": _finite_or_none(cv_loss),
                "cv_accuracy": _finite_or_none(cv_accuracy),
                "lr": opt.current_lr(),
                "tau": tau,
                "margin": aam.margin,
                "skipped_steps": opt.skipped_steps,
            }
            history.append(entry)
            logger.info(f"{run.stream}.epoch", **entry)
            if run.log_path is not None:
                with run.log_path.open("a", encoding="utf-8") as stream:
                    stream.write(json.dumps(entry, sort_keys=True) + "\n")
    finally:
        if executor is not None:
            executor.shutdown()
    return history
