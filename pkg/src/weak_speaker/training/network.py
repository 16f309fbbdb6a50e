"""Frame-wise MLP with statistics pooling and length-normalized embeddings.

Layout: `hidden.<i>.weight` (in, out) and `hidden.<i>.bias` per frame-wise layer, then
mean and standard deviation pooled over time, then `output.weight` (2*H, D) and
`output.bias`, then L2 normalization. Gradients are derived by hand, layer by layer.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from ..streams import substream

Activation = Literal["relu", "tanh"]

VARIANCE_FLOOR = 1e-16  # standard deviation floor 1e-8


@dataclass(slots=True)
class ForwardCache:
    activations: list[np.ndarray]
    pre_activations: list[np.ndarray]
    pooled_mean: np.ndarray
    pooled_std: np.ndarray
    variance_active: np.ndarray
    pooled: np.ndarray
    raw_embedding: np.ndarray
    norm: float
    embedding: np.ndarray


@dataclass(slots=True)
class EmbeddingNet:
    input_dim: int
    hidden_widths: tuple[int, ...]
    embedding_dim: int
    activation: Activation = "relu"
    params: dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def initialize(
        cls,
        input_dim: int,
        hidden_widths: Sequence[int],
        embedding_dim: int,
        *,
        activation: Activation = "relu",
        seed: int = 0,
        stream: str = "network.init",
    ) -> "EmbeddingNet":
        rng = substream(seed, stream)
        gain = 2.0 if activation == "relu" else 1.0
        params: dict[str, np.ndarray] = {}
        fan_in = input_dim
        for index, width in enumerate(hidden_widths):
            params[f"hidden.{index}.weight"] = rng.normal(0.0, np.sqrt(gain / fan_in), (fan_in, width))
            params[f"hidden.{index}.bias"] = np.zeros(width)
            fan_in = width
        params["output.weight"] = rng.normal(
            0.0, np.sqrt(1.0 / (2 * fan_in)), (2 * fan_in, embedding_dim)
        )
        params["output.bias"] = np.zeros(embedding_dim)
        return cls(
            input_dim=input_dim,
            hidden_widths=tuple(int(width) for width in hidden_widths),
            embedding_dim=embedding_dim,
            activation=activation,
            params=params,
        )

    @property
    def num_hidden(self) -> int:
        return len(self.hidden_widths)

    def _activate(self, values: np.ndarray) -> np.ndarray:
        if self.activation == "relu":
            return np.maximum(values, 0.0)
        return np.tanh(values)

    def _activation_slope(self, pre: np.ndarray, post: np.ndarray) -> np.ndarray:
        if self.activation == "relu":
            return (pre > 0.0).astype(np.float64)
        return 1.0 - post * post

    def forward(self, segment: np.ndarray) -> tuple[np.ndarray, ForwardCache]:
        hidden = np.asarray(segment, dtype=np.float64)
        activations = [hidden]
        pre_activations = []
        for index in range(self.num_hidden):
            pre = hidden @ self.params[f"hidden.{index}.weight"] + self.params[f"hidden.{index}.bias"]
            hidden = self._activate(pre)
            pre_activations.append(pre)
            activations.append(hidden)

        mean = hidden.mean(axis=0)
        variance = np.mean((hidden - mean) ** 2, axis=0)
        variance_active = variance > VARIANCE_FLOOR
        std = np.sqrt(np.where(variance_active, variance, VARIANCE_FLOOR))
        pooled = np.concatenate([mean, std])
        raw = pooled @ self.params["output.weight"] + self.params["output.bias"]
        norm = float(np.linalg.norm(raw))
        embedding = raw / norm
        cache = ForwardCache(
            activations=activations,
            pre_activations=pre_activations,
            pooled_mean=mean,
            pooled_std=std,
            variance_active=variance_active,
            pooled=pooled,
            raw_embedding=raw,
            norm=norm,
            embedding=embedding,
        )
        return embedding, cache

    def embed(self, segment: np.ndarray) -> np.ndarray:
        embedding, _ = self.forward(segment)
        return embedding

    def backward(self, cache: ForwardCache, grad_embedding: np.ndarray) -> dict[str, np.ndarray]:
        """Parameter gradients given dL/dz for the embedding of one segment."""

        z = cache.embedding
        grad_raw = (grad_embedding - z * float(z @ grad_embedding)) / cache.norm
        grads = {
            "output.weight": np.outer(cache.pooled, grad_raw),
            "output.bias": grad_raw.copy(),
        }
        grad_pooled = self.params["output.weight"] @ grad_raw

        hidden = cache.activations[-1]
        frames = hidden.shape[0]
        width = hidden.shape[1]
        grad_mean = grad_pooled[:width]
        grad_std = np.where(cache.variance_active, grad_pooled[width:], 0.0)
        grad_hidden = (
            np.broadcast_to(grad_mean / frames, hidden.shape)
            + (hidden - cache.pooled_mean) * (grad_std / (frames * cache.pooled_std))
        )

        for index in range(self.num_hidden - 1, -1, -1):
            grad_pre = grad_hidden * self._activation_slope(
                cache.pre_activations[index], cache.activations[index + 1]
            )
            grads[f"hidden.{index}.weight"] = cache.activations[index].T @ grad_pre
            grads[f"hidden.{index}.bias"] = grad_pre.sum(axis=0)
            if index > 0:
                grad_hidden = grad_pre @ self.params[f"hidden.{index}.weight"].T
        return grads

    def copy(self) -> "EmbeddingNet":
        return EmbeddingNet(
            input_dim=self.input_dim,
            hidden_widths=self.hidden_widths,
            embedding_dim=self.embedding_dim,
            activation=self.activation,
            params={name: value.copy() for name, value in self.params.items()},
        )
