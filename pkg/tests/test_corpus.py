from __future__ import annotations

import numpy as np
import pytest
from conftest import tiny_corpus_config

from weak_speaker.config.settings import CorpusConfig
from weak_speaker.corpus.storage import (
    HELDOUT_DIR,
    SOURCES_NAME,
    TRIALS_NAME,
    read_feature_matrix,
    read_frame_labels,
    read_recordings,
    read_sources,
    read_trials,
    write_corpus,
    write_feature_matrix,
    write_frame_labels,
)
from weak_speaker.corpus.summary import corpus_summary
from weak_speaker.corpus.synth import (
    SpeakerSource,
    WeaklyLabeledRecording,
    synthesize_corpus,
    synthesize_heldout,
    target_fraction,
)
from weak_speaker.corpus.trials import emit_trials
from weak_speaker.errors import ConfigurationError, UnsupportedFormatError


def _utterances(speakers: int, per_speaker: int) -> list[WeaklyLabeledRecording]:
    return [
        WeaklyLabeledRecording(
            recording_id=speaker * per_speaker + k,
            features=np.zeros((10, 2), dtype=np.float32),
            weak_label=100 + speaker,
        )
        for speaker in range(speakers)
        for k in range(per_speaker)
    ]


def test_same_seed_gives_bit_identical_corpus():
    config = tiny_corpus_config()

    first, _ = synthesize_corpus(config, seed=5)
    second, _ = synthesize_corpus(config, seed=5)
    threaded, _ = synthesize_corpus(config, seed=5, threads=3)

    assert len(first) == config.num_celebrities * config.recordings_per_celebrity
    for a, b, c in zip(first, second, threaded):
        assert a.features.tobytes() == b.features.tobytes() == c.features.tobytes()
        np.testing.assert_array_equal(a.ground_truth, b.ground_truth)
        np.testing.assert_array_equal(a.ground_truth, c.ground_truth)


def test_different_seed_changes_features():
    config = tiny_corpus_config()

    first, _ = synthesize_corpus(config, seed=5)
    other, _ = synthesize_corpus(config, seed=6)

    assert first[0].features.tobytes() != other[0].features.tobytes()


def test_ground_truth_matches_frames_and_contains_target():
    recordings, _ = synthesize_corpus(tiny_corpus_config(), seed=1)

    for recording in recordings:
        assert recording.ground_truth.shape[0] == recording.num_frames
        assert np.all(np.isfinite(recording.features))
        assert recording.weak_label in set(recording.ground_truth.tolist())
        assert len(np.unique(recording.ground_truth)) == 2


def test_every_drawn_speaker_gets_a_turn():
    config = CorpusConfig(
        num_celebrities=10,
        recordings_per_celebrity=5,
        min_speakers=3,
        max_speakers=3,
        min_turns=2,
        max_turns=6,
        heldout_speakers=2,
    )

    recordings, _ = synthesize_corpus(config, seed=2024)

    for recording in recordings:
        assert len(np.unique(recording.ground_truth)) == 3, recording.recording_id
        assert recording.weak_label in set(recording.ground_truth.tolist())


def test_single_target_turn_gives_constant_ground_truth():
    config = tiny_corpus_config(min_speakers=1, max_speakers=1, min_turns=1, max_turns=1)

    recordings, _ = synthesize_corpus(config, seed=2)

    for recording in recordings:
        assert np.all(recording.ground_truth == recording.weak_label)


def test_mean_target_fraction_follows_config():
    config = CorpusConfig(num_celebrities=32, recordings_per_celebrity=8, heldout_speakers=2)

    recordings, _ = synthesize_corpus(config, seed=1234)

    assert target_fraction(recordings) == pytest.approx(config.target_fraction, abs=0.05)


def test_zero_variance_source_emits_component_means(rng):
    means = np.array([[1.0, 2.0], [-3.0, 4.0]])
    source = SpeakerSource(
        speaker_id=0,
        mixture_weights=np.array([0.5, 0.5]),
        component_means=means,
        component_variances=np.zeros((2, 2)),
    )

    frames = source.sample(50, rng)

    for frame in frames:
        assert any(np.array_equal(frame, mean) for mean in means)


def test_speaker_sources_are_separated():
    config = tiny_corpus_config()

    _, sources = synthesize_corpus(config, seed=3)

    assert len(sources) == (
        config.num_celebrities + config.interferer_pool + config.heldout_speakers
    )
    for source in sources:
        assert source.mixture_weights.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all(source.component_variances > 0)
    centers = np.stack([source.centroid for source in sources])
    distances = np.linalg.norm(centers[:, None] - centers[None], axis=-1)
    assert np.all(distances[np.triu_indices(len(sources), k=1)] > 0)


@pytest.mark.parametrize(
    "overrides",
    [
        {"num_celebrities": 1},
        {"min_turn_frames": 0},
        {"min_turns": 3, "max_turns": 2},
        {"target_fraction": 0.0},
    ],
)
def test_invalid_corpus_config_is_rejected(overrides):
    with pytest.raises(ConfigurationError):
        synthesize_corpus(tiny_corpus_config(**overrides), seed=0)


def test_trial_counts_are_exact_without_self_pairs():
    trials = emit_trials(_utterances(10, 4), trials_per_speaker=20, seed=9)

    assert len(trials) == 200
    assert trials.target_count == 100
    assert trials.nontarget_count == 100
    assert all(trial.enroll != trial.test for trial in trials)
    for trial in trials:
        same_speaker = trial.enroll // 4 == trial.test // 4
        assert same_speaker == trial.is_target


def test_trial_seed_changes_pairs_not_counts():
    utterances = _utterances(10, 4)

    first = emit_trials(utterances, trials_per_speaker=20, seed=1)
    second = emit_trials(utterances, trials_per_speaker=20, seed=2)
    repeat = emit_trials(utterances, trials_per_speaker=20, seed=1)

    assert first.trials == repeat.trials
    assert first.trials != second.trials
    assert first.target_count == second.target_count


def test_target_trials_need_two_utterances():
    with pytest.raises(ConfigurationError):
        emit_trials(_utterances(2, 1), trials_per_speaker=4, seed=0)


def test_trials_need_two_speakers():
    with pytest.raises(ConfigurationError):
        emit_trials(_utterances(1, 4), trials_per_speaker=4, seed=0)


def test_corpus_directory_round_trip(tmp_path):
    config = tiny_corpus_config()
    recordings, sources = synthesize_corpus(config, seed=4)
    heldout = synthesize_heldout(config, sources, seed=4)
    trials = emit_trials(heldout, config.trials_per_speaker, seed=4)

    write_corpus(
        tmp_path,
        recordings,
        {"config_hash": "abc", "seed": 4},
        heldout=heldout,
        trials=trials,
        sources=sources,
    )
    loaded = read_recordings(tmp_path)

    assert (tmp_path / "manifest.tsv").read_text(encoding="utf-8").startswith(
        "# config_hash=abc\n# seed=4\n"
    )
    assert [r.recording_id for r in loaded] == [r.recording_id for r in recordings]
    for original, restored in zip(recordings, loaded):
        np.testing.assert_array_equal(original.features, restored.features)
        np.testing.assert_array_equal(original.ground_truth, restored.ground_truth)
        assert restored.weak_label == original.weak_label
    assert len(read_recordings(tmp_path / HELDOUT_DIR)) == len(heldout)
    assert read_trials(tmp_path / TRIALS_NAME).trials == trials.trials
    restored_sources = read_sources(tmp_path / SOURCES_NAME)
    np.testing.assert_array_equal(restored_sources[5].component_means, sources[5].component_means)


def test_feature_file_with_wrong_magic_is_rejected(tmp_path):
    path = tmp_path / "features.f32"
    write_feature_matrix(path, np.ones((3, 2)))
    path.write_bytes(b"XXXX" + path.read_bytes()[4:])

    with pytest.raises(UnsupportedFormatError) as excinfo:
        read_feature_matrix(path)

    assert excinfo.value.field == "magic"


@pytest.mark.parametrize(
    ("writer", "reader", "values"),
    [
        (write_feature_matrix, read_feature_matrix, np.ones((3, 2))),
        (write_frame_labels, read_frame_labels, np.arange(5)),
    ],
)
def test_short_payload_is_rejected(tmp_path, writer, reader, values):
    path = tmp_path / "matrix.bin"
    writer(path, values)
    path.write_bytes(path.read_bytes()[:-3])

    with pytest.raises(UnsupportedFormatError) as excinfo:
        reader(path)

    assert excinfo.value.field == "payload"


@pytest.mark.parametrize("reader", [read_feature_matrix, read_frame_labels])
def test_truncated_header_is_rejected(tmp_path, reader):
    path = tmp_path / "matrix.bin"
    path.write_bytes(b"WS")

    with pytest.raises(UnsupportedFormatError) as excinfo:
        reader(path)

    assert excinfo.value.field == "header"


def test_corpus_summary_rows():
    recordings = [
        WeaklyLabeledRecording(
            recording_id=0,
            features=np.zeros((360, 2)),
            weak_label=0,
            ground_truth=np.array([0] * 180 + [5] * 180),
        ),
        WeaklyLabeledRecording(
            recording_id=1,
            features=np.zeros((360, 2)),
            weak_label=1,
            ground_truth=np.array([1] * 360),
        ),
    ]

    uncut, restricted = corpus_summary(recordings, frame_shift_ms=10.0)

    assert uncut.dataset == "uncut"
    assert uncut.speakers == 2
    assert uncut.hours == pytest.approx(7.2 / 3600.0)
    assert restricted.dataset == "restricted"
    assert restricted.hours == pytest.approx(5.4 / 3600.0)
