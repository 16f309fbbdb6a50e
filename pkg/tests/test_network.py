from __future__ import annotations

import math

import numpy as np
import pytest

from weak_speaker.training.head import ClassificationHead
from weak_speaker.training.network import EmbeddingNet


@pytest.fixture
def net() -> EmbeddingNet:
    return EmbeddingNet.initialize(5, (16, 12), 8, seed=4)


def test_embedding_has_unit_norm(net, rng):
    for frames in (3, 40, 200):
        embedding = net.embed(rng.standard_normal((frames, 5)))

        assert embedding.shape == (8,)
        assert np.linalg.norm(embedding) == pytest.approx(1.0, abs=1e-12)


def test_embedding_ignores_frame_order(net, rng):
    segment = rng.standard_normal((50, 5))

    shuffled = segment[rng.permutation(50)]

    np.testing.assert_allclose(net.embed(shuffled), net.embed(segment), atol=1e-12)


def test_constant_segment_gives_finite_embedding(net):
    embedding = net.embed(np.full((30, 5), 0.7))

    assert np.all(np.isfinite(embedding))


def test_initialization_is_seeded():
    first = EmbeddingNet.initialize(5, (16,), 8, seed=9)
    second = EmbeddingNet.initialize(5, (16,), 8, seed=9)
    other = EmbeddingNet.initialize(5, (16,), 8, seed=10)

    for name, value in first.params.items():
        np.testing.assert_array_equal(second.params[name], value)
    assert not np.array_equal(other.params["hidden.0.weight"], first.params["hidden.0.weight"])
    assert set(first.params) == {
        "hidden.0.weight",
        "hidden.0.bias",
        "output.weight",
        "output.bias",
    }
    assert first.params["output.weight"].shape == (32, 8)


def test_copy_is_independent(net):
    clone = net.copy()
    clone.params["output.bias"] += 1.0

    assert not np.array_equal(clone.params["output.bias"], net.params["output.bias"])


def test_head_rows_are_unit_vectors():
    head = ClassificationHead.initialize([3, 8, 11], 6, sub_centers=2, seed=1)

    assert head.weights.shape == (6, 6)
    assert head.num_classes == 3
    np.testing.assert_allclose(np.linalg.norm(head.weights, axis=1), 1.0)


def test_similarity_is_cosine_to_the_closest_sub_center():
    weights = np.array(
        [
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ]
    )
    head = ClassificationHead(weights=weights, sub_centers=2, class_ids=[0, 1])
    z = np.array([[1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0, 1.0]])

    scores, winners = head.similarities(z)

    np.testing.assert_array_equal(scores, [[1.0, 0.0], [0.0, 1.0]])
    np.testing.assert_array_equal(winners[:, 1], [0, 1])


def test_equidistant_sub_centers_score_one_over_root_two():
    weights = np.array([[1.0, 0.0], [0.0, 1.0]])
    head = ClassificationHead(weights=weights, sub_centers=2, class_ids=[5])
    z = np.array([1.0, 1.0]) / math.sqrt(2)

    scores, winners = head.similarities(z)

    assert scores[0, 0] == pytest.approx(1 / math.sqrt(2))
    assert winners[0, 0] == 0


def test_similarity_matches_dot_products(rng):
    head = ClassificationHead.initialize(list(range(5)), 4, seed=2)
    z = rng.standard_normal((3, 4))
    z /= np.linalg.norm(z, axis=1, keepdims=True)

    scores, _ = head.similarities(z)

    np.testing.assert_allclose(scores, z @ head.weights.T)


def test_prediction_returns_class_id():
    head = ClassificationHead.initialize([40, 41, 42], 6, seed=3)

    for row, class_id in enumerate(head.class_ids):
        assert head.predict(head.weights[row]) == class_id
        assert head.predict(7.5 * head.weights[row]) == class_id
