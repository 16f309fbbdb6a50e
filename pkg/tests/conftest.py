from __future__ import annotations

import os
from pathlib import Path

import numpy as np
import pytest
import yaml

from weak_speaker.config.settings import CorpusConfig

REPO_ROOT = Path(__file__).resolve().parents[1]


def acceptance_enabled() -> bool:
    return os.getenv("WEAK_SPEAKER_RUN_ACCEPTANCE", "").strip() == "1"


def tiny_corpus_config(**overrides) -> CorpusConfig:
    """A handful of short recordings with widely spaced speakers."""

    values = dict(
        num_celebrities=4,
        recordings_per_celebrity=3,
        interferer_pool=4,
        min_speakers=2,
        max_speakers=2,
        min_turns=2,
        max_turns=4,
        min_turn_frames=100,
        max_turn_frames=200,
        feature_dim=4,
        gmm_components=2,
        center_spread=8.0,
        min_center_distance=12.0,
        heldout_speakers=3,
        utterances_per_heldout_speaker=2,
        min_utterance_frames=100,
        max_utterance_frames=150,
        trials_per_speaker=4,
    )
    values.update(overrides)
    return CorpusConfig(**values)


def tiny_profile(work_dir: Path) -> dict:
    """Settings overlay for a CLI chain that finishes in seconds."""

    return {
        "work_dir": str(work_dir),
        "seed": 11,
        "corpus": tiny_corpus_config().model_dump(),
        "diarization": {
            "min_chunk_frames": 30,
            "change_window_frames": 40,
            "gmm_components": 2,
            "em_iterations": 5,
            "refine_iterations": 1,
            "min_duration_frames": 10,
        },
        "training": {
            "hidden_widths": [8],
            "embedding_dim": 4,
            "segment_frames": 40,
            "batch_budget": 8,
            "epochs": 2,
            "cv_speakers": 2,
        },
        "supervised": {"epochs": 2, "batch_size": 8, "min_chunks_per_class": 1},
        "selection": {"min_select_frames": 20, "max_select_frames": 400},
    }


@pytest.fixture
def tiny_config_path(tmp_path) -> Path:
    path = tmp_path / "tiny.yaml"
    path.write_text(yaml.safe_dump(tiny_profile(tmp_path / "work")), encoding="utf-8")
    return path


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


def two_source_frames(
    rng: np.random.Generator,
    labels: np.ndarray,
    *,
    dim: int = 4,
    separation: float = 10.0,
) -> np.ndarray:
    """Unit-variance Gaussian frames whose mean is `separation * label` on every dimension."""

    labels = np.asarray(labels)
    return rng.standard_normal((labels.size, dim)) + separation * labels[:, None]
