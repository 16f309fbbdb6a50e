from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field
from pydantic_settings import BaseSettings, SettingsConfigDict

from ..errors import ConfigurationError


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class CorpusConfig(_Section):
    """Synthetic weakly-labeled corpus layout."""

    num_celebrities: int = 32
    recordings_per_celebrity: int = 8
    interferer_pool: int = 64
    min_speakers: int = 2
    max_speakers: int = 4
    min_turns: int = 6
    max_turns: int = 10
    min_turn_frames: int = 100
    max_turn_frames: int = 600
    target_fraction: float = 0.5
    feature_dim: int = 16
    gmm_components: int = 4
    center_spread: float = 4.0
    min_center_distance: float = 12.0
    component_spread: float = 2.0  # component layout is what survives per-segment standardization
    min_variance: float = 0.25
    max_variance: float = 1.0
    noise_sigma: float = 0.0
    heldout_speakers: int = 20
    utterances_per_heldout_speaker: int = 4
    min_utterance_frames: int = 300
    max_utterance_frames: int = 600
    trials_per_speaker: int = 20

    def check(self) -> None:
        if self.num_celebrities < 2:
            raise ConfigurationError("corpus.num_celebrities must be at least 2")
        if self.recordings_per_celebrity < 1:
            raise ConfigurationError("corpus.recordings_per_celebrity must be positive")
        if self.min_turn_frames <= 0 or self.max_turn_frames < self.min_turn_frames:
            raise ConfigurationError("corpus turn durations must satisfy 0 < min <= max")
        if self.min_turns < 1 or self.max_turns < self.min_turns:
            raise ConfigurationError("corpus turn counts must satisfy 1 <= min <= max")
        if self.min_speakers < 1 or self.max_speakers < self.min_speakers:
            raise ConfigurationError("corpus speaker counts must satisfy 1 <= min <= max")
        if self.max_speakers > 1 and self.interferer_pool < self.max_speakers - 1:
            raise ConfigurationError("corpus.interferer_pool is smaller than max_speakers - 1")
        if not 0.0 < self.target_fraction <= 1.0:
            raise ConfigurationError("corpus.target_fraction must lie in (0, 1]")
        if self.feature_dim < 1 or self.gmm_components < 1:
            raise ConfigurationError("corpus.feature_dim and gmm_components must be positive")
        if self.min_variance <= 0 or self.max_variance < self.min_variance:
            raise ConfigurationError("corpus variances must satisfy 0 < min <= max")
        if self.min_utterance_frames <= 0 or self.max_utterance_frames < self.min_utterance_frames:
            raise ConfigurationError("corpus utterance durations must satisfy 0 < min <= max")


class FeatureConfig(_Section):
    sample_rate: int = 16000
    n_mels: int = 80
    win_ms: float = 25.0
    hop_ms: float = 10.0
    preemphasis: float = 0.97
    mfcc_ceps: int = 20
    mfcc_mels: int = 40

    def check(self) -> None:
        if self.mfcc_ceps > self.mfcc_mels:
            raise ConfigurationError("features.mfcc_ceps cannot exceed features.mfcc_mels")


class DiarizationConfig(_Section):
    min_chunk_frames: int = 100
    change_window_frames: int = 150
    change_step_frames: int = 1
    change_lambda: float = 1.0
    ahc_lambda: float = 2.5
    gmm_components: int = 8
    em_iterations: int = 20
    refine_iterations: int = 2
    min_duration_frames: int = 50
    self_loop_bonus: float = 10.0

    def check(self) -> None:
        if self.min_chunk_frames < 2 or self.change_window_frames < 2:
            raise ConfigurationError("diarization windows must span at least 2 frames")
        if self.change_step_frames < 1 or self.min_duration_frames < 1:
            raise ConfigurationError("diarization step and minimum duration must be positive")
        if self.self_loop_bonus <= 0:
            raise ConfigurationError("diarization.self_loop_bonus must be positive")


class AggregationConfig(_Section):
    kind: Literal["max", "lse"] = "lse"
    tau_start: float = 0.5
    tau_end: float = 0.1
    schedule: Literal["constant", "linear"] = "linear"

    def check(self) -> None:
        if self.kind == "lse" and (self.tau_start <= 0 or self.tau_end <= 0):
            raise ConfigurationError("log-sum-exp aggregation requires tau > 0")

    def tau_for_epoch(self, epoch: int, epochs: int) -> float:
        if self.schedule == "constant" or epochs <= 1:
            return self.tau_start
        fraction = epoch / (epochs - 1)
        return self.tau_start + (self.tau_end - self.tau_start) * fraction

    @property
    def variant(self) -> str:
        if self.kind == "max":
            return "max"
        if self.schedule == "constant" or self.tau_start == self.tau_end:
            return f"lse-{self.tau_start:g}"
        return f"lse-{self.tau_start:g}-{self.tau_end:g}"


class AamConfig(_Section):
    scale: float = 30.0
    margin: float = 0.1

    def check(self) -> None:
        if self.scale <= 0:
            raise ConfigurationError("aam.scale must be positive")
        if not 0.0 <= self.margin < math.pi / 2:
            raise ConfigurationError("aam.margin must lie in [0, pi/2)")


class TrainingConfig(_Section):
    """Stage-1 weak training plus the network fields shared with stage 2."""

    hidden_widths: list[int] = Field(default_factory=lambda: [128, 128])
    embedding_dim: int = 64
    activation: Literal["relu", "tanh"] = "relu"
    segment_frames: int = 200
    batch_budget: int = 64
    epochs: int = 40
    learning_rate: float = 0.05
    momentum: float = 0.9
    warmup_fraction: float = 0.05
    patience: int = 2
    cv_speakers: int = 8
    aggregation: AggregationConfig = Field(default_factory=AggregationConfig)
    aam: AamConfig = Field(default_factory=AamConfig)

    def check(self) -> None:
        if not self.hidden_widths or any(width < 1 for width in self.hidden_widths):
            raise ConfigurationError("training.hidden_widths must list positive widths")
        if self.embedding_dim < 1 or self.segment_frames < 2 or self.batch_budget < 1:
            raise ConfigurationError("training dimensions must be positive")
        if self.learning_rate <= 0:
            raise ConfigurationError("training.learning_rate must be positive")
        if not 0.0 <= self.warmup_fraction < 1.0:
            raise ConfigurationError("training.warmup_fraction must lie in [0, 1)")
        self.aggregation.check()
        self.aam.check()


class SupervisedConfig(_Section):
    epochs: int = 30
    batch_size: int = 64
    learning_rate: float = 0.05
    margin_start: float = 0.1
    margin_end: float = 0.3
    sub_centers: int = 1
    min_chunks_per_class: int = 2

    def check(self) -> None:
        if self.sub_centers < 1:
            raise ConfigurationError("supervised.sub_centers must be at least 1")
        for value in (self.margin_start, self.margin_end):
            if not 0.0 <= value < math.pi / 2:
                raise ConfigurationError("supervised margins must lie in [0, pi/2)")
        if self.learning_rate <= 0 or self.batch_size < 1:
            raise ConfigurationError("supervised learning rate and batch size must be positive")


class SelectionConfig(_Section):
    min_select_frames: int = 100
    max_select_frames: int = 2000


class EvaluationConfig(_Section):
    p_target: float = 0.05
    c_miss: float = 1.0
    c_fa: float = 1.0


class Settings(BaseSettings):
    """Runtime configuration for the weak-speaker pipeline."""

    model_config = SettingsConfigDict(
        env_prefix="WEAK_SPEAKER_",
        env_file=".env",
        env_nested_delimiter="__",
        extra="ignore",
    )

    work_dir: Path = Path("work")
    corpus_dir: Optional[Path] = None
    seed: int = 1234
    threads: int = 1

    corpus: CorpusConfig = Field(default_factory=CorpusConfig)
    features: FeatureConfig = Field(default_factory=FeatureConfig)
    diarization: DiarizationConfig = Field(default_factory=DiarizationConfig)
    training: TrainingConfig = Field(default_factory=TrainingConfig)
    supervised: SupervisedConfig = Field(default_factory=SupervisedConfig)
    selection: SelectionConfig = Field(default_factory=SelectionConfig)
    evaluation: EvaluationConfig = Field(default_factory=EvaluationConfig)

    @property
    def resolved_corpus_dir(self) -> Path:
        return self.corpus_dir if self.corpus_dir is not None else self.work_dir / "corpus"

    def check(self) -> None:
        if self.threads < 1:
            raise ConfigurationError("threads must be at least 1")
        self.corpus.check()
        self.features.check()
        self.diarization.check()
        self.training.check()
        self.supervised.check()


_UNHASHED_FIELDS = {"work_dir", "corpus_dir", "threads"}


def config_hash(settings: Settings) -> str:
    """SHA-256 over every result-relevant field (paths and thread count excluded)."""

    data = settings.model_dump(mode="json", exclude=_UNHASHED_FIELDS)
    canonical = json.dumps(data, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def load_settings(config_path: Optional[str | Path]) -> Settings:
    """Load settings optionally layering a YAML profile file."""
    settings = Settings()
    if config_path:
        from .yaml_loader import load_yaml_settings

        settings = load_yaml_settings(settings, config_path)
    settings.check()
    return settings
