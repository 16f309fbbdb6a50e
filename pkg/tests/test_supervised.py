from __future__ import annotations

import math

import numpy as np
import pytest
from conftest import tiny_corpus_config

from weak_speaker.config.settings import SupervisedConfig, TrainingConfig
from weak_speaker.corpus.synth import synthesize_corpus
from weak_speaker.diarization.segmentation import Chunk
from weak_speaker.errors import WeakSpeakerError
from weak_speaker.selection import SelfLabeledSet, oracle_self_labeled
from weak_speaker.training.aam import AamParameters, aam_loss
from weak_speaker.training.head import ClassificationHead
from weak_speaker.training.network import EmbeddingNet
from weak_speaker.training.objective import Minibatch, RecordingEntry, batch_objective
from weak_speaker.training.supervised import (
    first_epoch_after_warmup,
    margin_schedule,
    train_reference,
    train_stage2,
)

TRAINING = TrainingConfig(hidden_widths=[16], embedding_dim=8, segment_frames=40)


def test_margin_schedule_rises_to_the_end_value():
    margins = [margin_schedule(epoch, 10, 0.1, 0.3) for epoch in range(10)]

    assert margins[0] == pytest.approx(0.1)
    assert margins[-1] == pytest.approx(0.3)
    assert margins == sorted(margins)


def test_margin_schedule_holds_until_the_ramp_starts():
    margins = [margin_schedule(epoch, 10, 0.1, 0.3, ramp_start=4) for epoch in range(10)]

    assert margins[:5] == [pytest.approx(0.1)] * 5
    assert margins[-1] == pytest.approx(0.3)
    assert margins == sorted(margins)


def test_single_epoch_uses_the_end_margin():
    assert margin_schedule(0, 1, 0.1, 0.3) == 0.3


def test_first_epoch_after_warmup():
    plans = [[[0], [1], [2]], [[0], [1], [2]], [[0], [1], [2]]]

    assert first_epoch_after_warmup(plans, 0) == 0
    assert first_epoch_after_warmup(plans, 2) == 1
    assert first_epoch_after_warmup(plans, 3) == 1
    assert first_epoch_after_warmup(plans, 4) == 2


@pytest.mark.parametrize("kind", ["max", "lse"])
def test_one_segment_recordings_reduce_to_plain_aam(kind, rng):
    net = EmbeddingNet.initialize(3, (8,), 4, seed=1)
    head = ClassificationHead.initialize([0, 1, 2], 4, seed=1)
    aam = AamParameters(scale=30.0, margin=0.2)
    segment = rng.standard_normal((20, 3))
    batch = Minibatch([RecordingEntry(recording_id=0, target=1, segments=segment[None])])

    result = batch_objective(net, head, batch, kind, 0.7, aam, compute_gradients=False)

    logits, _ = head.similarities(net.embed(segment))
    expected, _ = aam_loss(logits[0], 1, aam)
    assert result.loss == pytest.approx(expected, abs=1e-10)


def test_sub_centers_score_the_closest_center():
    head = ClassificationHead(
        weights=np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]]),
        sub_centers=2,
        class_ids=[0, 1],
    )

    scores, _ = head.similarities(np.array([1.0, 1.0]) / math.sqrt(2))

    np.testing.assert_allclose(scores[0], [1 / math.sqrt(2), -1 / math.sqrt(2)])


def test_classes_below_the_chunk_minimum_are_excluded():
    recordings, _ = synthesize_corpus(tiny_corpus_config(), seed=2)
    selected = SelfLabeledSet(
        chunks={
            0: [Chunk(0, 0, 60), Chunk(1, 0, 60), Chunk(2, 0, 60)],
            1: [Chunk(3, 0, 60)],
        }
    )
    config = SupervisedConfig(epochs=1, batch_size=4, min_chunks_per_class=2)

    result = train_stage2(selected, recordings, TRAINING, config, seed=2)

    assert result.head.class_ids == [0]


def test_no_surviving_class_is_an_error():
    recordings, _ = synthesize_corpus(tiny_corpus_config(), seed=2)
    selected = SelfLabeledSet(chunks={0: [Chunk(0, 0, 60)]})

    with pytest.raises(WeakSpeakerError):
        train_stage2(selected, recordings, TRAINING, SupervisedConfig(epochs=1), seed=2)


def test_reference_training_uses_every_celebrity(tmp_path):
    recordings, _ = synthesize_corpus(tiny_corpus_config(), seed=2)
    config = SupervisedConfig(epochs=3, batch_size=8, sub_centers=2)
    log_path = tmp_path / "reference.log.jsonl"

    result = train_reference(recordings, TRAINING, config, seed=2, log_path=log_path)

    assert result.head.class_ids == sorted(oracle_self_labeled(recordings).chunks)
    assert result.head.weights.shape == (2 * len(result.head.class_ids), 8)
    assert len(result.history) == 3
    assert result.history[-1]["margin"] == pytest.approx(0.3)
    assert all(math.isfinite(entry["train_loss"]) for entry in result.history)
    assert len(log_path.read_text(encoding="utf-8").splitlines()) == 3
