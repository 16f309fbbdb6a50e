from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, MutableMapping

import numpy as np
import structlog

from ..errors import ConfigurationError

logger = structlog.get_logger(__name__)


@dataclass(slots=True)
class OptState:
    """SGD with classical momentum, linear warm-up and plateau halving."""

    target_lr: float
    momentum: float = 0.9
    warmup_steps: int = 0
    patience: int = 2
    lr: float = 0.0
    step: int = 0
    skipped_steps: int = 0
    best_cv_loss: float = math.inf
    stale_evaluations: int = 0
    velocity: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.target_lr > 0:
            raise ConfigurationError("learning rate must be positive")
        if self.lr <= 0:
            self.lr = self.target_lr

    @property
    def in_warmup(self) -> bool:
        return self.step < self.warmup_steps

    def current_lr(self) -> float:
        if self.in_warmup:
            start = self.target_lr / 100.0
            return start + (self.target_lr - start) * self.step / self.warmup_steps
        return self.lr

    def observe_cv(self, cv_loss: float) -> bool:
        """Record a cross-validation loss; returns True when the rate was halved."""

        if self.in_warmup:
            return False
        if cv_loss < self.best_cv_loss:
            self.best_cv_loss = cv_loss
            self.stale_evaluations = 0
            return False
        self.stale_evaluations += 1
        if self.stale_evaluations < self.patience:
            return False
        self.lr /= 2.0
        self.stale_evaluations = 0
        logger.info("training.lr.halved", step=self.step, lr=self.lr, best_cv_loss=self.best_cv_loss)
        return True


def sgd_step(
    params: MutableMapping[str, np.ndarray],
    grads: Mapping[str, np.ndarray],
    state: OptState,
    *,
    unit_rows: Iterable[str] = (),
) -> bool:
    """Update `params` in place; returns False when a non-finite gradient skips the step."""

    for name, grad in grads.items():
        if grad.shape != params[name].shape:
            raise ValueError(f"gradient {name} has shape {grad.shape}, expected {params[name].shape}")
        if not np.all(np.isfinite(grad)):
            state.skipped_steps += 1
            logger.warning("training.step.skipped", step=state.step, parameter=name)
            return False

    lr = state.current_lr()
    for name, grad in grads.items():
        velocity = state.velocity.get(name)
        if velocity is None:
            velocity = np.zeros_like(grad)
        velocity = state.momentum * velocity + grad
        state.velocity[name] = velocity
        params[name] -= lr * velocity
    for name in unit_rows:
        rows = params[name]
        rows /= np.linalg.norm(rows, axis=1, keepdims=True)
    state.step += 1
    return True
