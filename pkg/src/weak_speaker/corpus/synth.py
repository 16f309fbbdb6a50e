from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import structlog

from ..config.settings import CorpusConfig
from ..errors import ConfigurationError
from ..streams import substream

logger = structlog.get_logger(__name__)

_MAX_PLACEMENT_ATTEMPTS = 10_000


@dataclass(frozen=True, slots=True)
class SpeakerSource:
    """Diagonal-covariance GMM standing in for one speaker's frame distribution."""

    speaker_id: int
    mixture_weights: np.ndarray
    component_means: np.ndarray
    component_variances: np.ndarray

    @property
    def centroid(self) -> np.ndarray:
        return self.mixture_weights @ self.component_means

    def sample(self, n_frames: int, rng: np.random.Generator) -> np.ndarray:
        n_components, dim = self.component_means.shape
        components = rng.choice(n_components, size=n_frames, p=self.mixture_weights)
        noise = rng.standard_normal((n_frames, dim))
        means = self.component_means[components]
        return means + np.sqrt(self.component_variances[components]) * noise


@dataclass(frozen=True, slots=True)
class RecordingScript:
    recording_id: int
    turns: tuple[tuple[int, int], ...]
    target_id: int

    @property
    def num_frames(self) -> int:
        return sum(duration for _, duration in self.turns)

    @property
    def speakers(self) -> set[int]:
        return {speaker for speaker, _ in self.turns}


@dataclass(slots=True)
class WeaklyLabeledRecording:
    """Frame features with one recording-level label.

    `ground_truth` holds the per-frame speaker id and is only consulted by evaluation
    code; it is None for ingested real recordings. `diarization_features` optionally
    holds a second feature kind (MFCC) used by the diarizer instead of `features`.
    """

    recording_id: int
    features: np.ndarray
    weak_label: int
    ground_truth: Optional[np.ndarray] = None
    diarization_features: Optional[np.ndarray] = None

    @property
    def num_frames(self) -> int:
        return int(self.features.shape[0])

    @property
    def diarization_input(self) -> np.ndarray:
        if self.diarization_features is not None:
            return self.diarization_features
        return self.features


def synthesize_speakers(config: CorpusConfig, seed: int) -> list[SpeakerSource]:
    """Celebrities first, then the interferer pool, then held-out trial speakers."""

    total = config.num_celebrities + config.interferer_pool + config.heldout_speakers
    rng = substream(seed, "corpus.speakers")
    dim = config.feature_dim
    centers: list[np.ndarray] = []
    for speaker_id in range(total):
        for _ in range(_MAX_PLACEMENT_ATTEMPTS):
            center = rng.normal(0.0, config.center_spread, size=dim)
            if all(np.linalg.norm(center - other) >= config.min_center_distance for other in centers):
                break
        else:
            raise ConfigurationError(
                f"cannot place speaker {speaker_id} at distance >= {config.min_center_distance}; "
                "raise corpus.center_spread or lower corpus.min_center_distance"
            )
        centers.append(center)

    sources: list[SpeakerSource] = []
    for speaker_id, center in enumerate(centers):
        G = config.gmm_components
        means = center + rng.normal(0.0, config.component_spread, size=(G, dim))
        variances = rng.uniform(config.min_variance, config.max_variance, size=(G, dim))
        weights = rng.dirichlet(np.full(G, 2.0))
        weights = weights / weights.sum()
        sources.append(
            SpeakerSource(
                speaker_id=speaker_id,
                mixture_weights=weights,
                component_means=means,
                component_variances=variances,
            )
        )
    return sources


def script_recording(
    config: CorpusConfig,
    recording_id: int,
    target_id: int,
    rng: np.random.Generator,
) -> RecordingScript:
    n_speakers = int(rng.integers(config.min_speakers, config.max_speakers + 1))
    n_interferers = n_speakers - 1
    # every drawn speaker gets at least one turn
    n_turns = max(int(rng.integers(config.min_turns, config.max_turns + 1)), n_speakers)

    low, high = math.log(config.min_turn_frames), math.log(config.max_turn_frames)
    durations = np.rint(np.exp(rng.uniform(low, high, size=n_turns))).astype(int)
    durations = np.clip(durations, config.min_turn_frames, config.max_turn_frames)

    speakers = np.full(n_turns, target_id, dtype=int)
    if n_interferers > 0:
        pool_start = config.num_celebrities
        interferers = pool_start + rng.choice(config.interferer_pool, size=n_interferers, replace=False)
        is_target = rng.random(n_turns) < config.target_fraction
        speakers = np.where(is_target, target_id, rng.choice(interferers, size=n_turns))
        reserved = rng.permutation(n_turns)[:n_speakers]
        speakers[reserved[0]] = target_id
        speakers[reserved[1:]] = interferers

    turns = tuple((int(speaker), int(duration)) for speaker, duration in zip(speakers, durations))
    return RecordingScript(recording_id=recording_id, turns=turns, target_id=target_id)


def render_recording(
    script: RecordingScript,
    sources: Sequence[SpeakerSource],
    config: CorpusConfig,
    seed: int,
    *,
    stream: str = "corpus.frames",
) -> WeaklyLabeledRecording:
    rng = substream(seed, stream, script.recording_id)
    blocks = [sources[speaker].sample(duration, rng) for speaker, duration in script.turns]
    frames = np.concatenate(blocks, axis=0)
    if config.noise_sigma > 0:
        frames = frames + rng.normal(0.0, config.noise_sigma, size=frames.shape)
    ground_truth = np.concatenate(
        [np.full(duration, speaker, dtype=np.int32) for speaker, duration in script.turns]
    )
    return WeaklyLabeledRecording(
        recording_id=script.recording_id,
        features=frames.astype(np.float32),
        weak_label=script.target_id,
        ground_truth=ground_truth,
    )


def synthesize_corpus(
    config: CorpusConfig,
    seed: int,
    *,
    threads: int = 1,
) -> tuple[list[WeaklyLabeledRecording], list[SpeakerSource]]:
    """Generate the weakly labeled training corpus and every speaker source."""

    config.check()
    sources = synthesize_speakers(config, seed)
    scripts = []
    for target_id in range(config.num_celebrities):
        for k in range(config.recordings_per_celebrity):
            recording_id = target_id * config.recordings_per_celebrity + k
            rng = substream(seed, "corpus.script", recording_id)
            scripts.append(script_recording(config, recording_id, target_id, rng))

    def render(script: RecordingScript) -> WeaklyLabeledRecording:
        return render_recording(script, sources, config, seed)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            recordings = list(pool.map(render, scripts))
    else:
        recordings = [render(script) for script in scripts]

    logger.info(
        "corpus.synthesized",
        recordings=len(recordings),
        celebrities=config.num_celebrities,
        frames=sum(recording.num_frames for recording in recordings),
    )
    return recordings, sources


def synthesize_heldout(
    config: CorpusConfig,
    sources: Sequence[SpeakerSource],
    seed: int,
) -> list[WeaklyLabeledRecording]:
    """Single-speaker utterances of the held-out trial speakers."""

    first = config.num_celebrities + config.interferer_pool
    utterances: list[WeaklyLabeledRecording] = []
    for offset in range(config.heldout_speakers):
        speaker_id = first + offset
        for k in range(config.utterances_per_heldout_speaker):
            utterance_id = offset * config.utterances_per_heldout_speaker + k
            rng = substream(seed, "corpus.heldout.length", utterance_id)
            n_frames = int(rng.integers(config.min_utterance_frames, config.max_utterance_frames + 1))
            script = RecordingScript(
                recording_id=utterance_id,
                turns=((speaker_id, n_frames),),
                target_id=speaker_id,
            )
            utterances.append(
                render_recording(script, sources, config, seed, stream="corpus.heldout.frames")
            )
    return utterances


def target_fraction(recordings: Sequence[WeaklyLabeledRecording]) -> float:
    """Mean over recordings of the fraction of frames spoken by the weak-label speaker."""

    fractions = [
        float(np.mean(recording.ground_truth == recording.weak_label))
        for recording in recordings
        if recording.ground_truth is not None
    ]
    return float(np.mean(fractions)) if fractions else float("nan")
