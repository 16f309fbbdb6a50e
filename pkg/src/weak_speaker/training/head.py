from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..streams import substream

HEAD_PARAMETER = "head.weight"


@dataclass(slots=True)
class ClassificationHead:
    """Unit vectors h_{j,k}, stored row j*K + k for class j and sub-center k."""

    weights: np.ndarray
    sub_centers: int = 1
    class_ids: list[int] = field(default_factory=list)

    @classmethod
    def initialize(
        cls,
        class_ids: list[int],
        embedding_dim: int,
        *,
        sub_centers: int = 1,
        seed: int = 0,
        stream: str = "head.init",
    ) -> "ClassificationHead":
        rng = substream(seed, stream)
        weights = rng.standard_normal((len(class_ids) * sub_centers, embedding_dim))
        head = cls(weights=weights, sub_centers=sub_centers, class_ids=list(class_ids))
        head.renormalize()
        return head

    @property
    def num_classes(self) -> int:
        return self.weights.shape[0] // self.sub_centers

    @property
    def embedding_dim(self) -> int:
        return int(self.weights.shape[1])

    def renormalize(self) -> None:
        self.weights /= np.linalg.norm(self.weights, axis=1, keepdims=True)

    def similarities(self, embeddings: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """o_{c,j} = max_k h_{j,k}·z_c and the winning sub-center (lowest on ties)."""

        embeddings = np.atleast_2d(embeddings)
        raw = embeddings @ self.weights.T
        raw = raw.reshape(embeddings.shape[0], self.num_classes, self.sub_centers)
        winners = np.argmax(raw, axis=2)
        scores = np.take_along_axis(raw, winners[..., None], axis=2)[..., 0]
        return scores, winners

    def backward(
        self,
        embeddings: np.ndarray,
        winners: np.ndarray,
        grad_scores: np.ndarray,
    ) -> tuple[np.ndarray, np.ndarray]:
        """Gradients w.r.t. the embeddings (C, D) and the head rows (J*K, D)."""

        rows = np.arange(self.num_classes)[None, :] * self.sub_centers + winners
        selected = self.weights[rows]
        grad_embeddings = np.einsum("cj,cjd->cd", grad_scores, selected)
        grad_weights = np.zeros_like(self.weights)
        contributions = grad_scores[..., None] * embeddings[:, None, :]
        np.add.at(grad_weights, rows.ravel(), contributions.reshape(-1, self.embedding_dim))
        return grad_embeddings, grad_weights

    def predict(self, embedding: np.ndarray) -> int:
        scores, _ = self.similarities(embedding)
        return int(self.class_ids[int(np.argmax(scores[0]))])

    def copy(self) -> "ClassificationHead":
        return ClassificationHead(
            weights=self.weights.copy(),
            sub_centers=self.sub_centers,
            class_ids=list(self.class_ids),
        )
