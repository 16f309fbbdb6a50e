from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional

import numpy as np

from ..audio.features import normalize_frames
from ..corpus.trials import Trial, TrialList
from ..errors import MissingUtteranceError
from ..training.network import EmbeddingNet


@dataclass(slots=True)
class ScoreSet:
    scores: np.ndarray
    is_target: np.ndarray
    trials: list[Trial] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.scores = np.asarray(self.scores, dtype=np.float64)
        self.is_target = np.asarray(self.is_target, dtype=bool)
        if self.scores.shape != self.is_target.shape:
            raise ValueError("scores and labels differ in length")
        if not self.is_target.any() or self.is_target.all():
            raise ValueError("a score set needs at least one target and one non-target score")

    def __len__(self) -> int:
        return int(self.scores.shape[0])


def embed_utterances(
    net: EmbeddingNet,
    utterance_features: Mapping[int, np.ndarray],
    utterance_ids: set[int],
) -> dict[int, np.ndarray]:
    return {
        utterance: net.embed(normalize_frames(utterance_features[utterance]))
        for utterance in sorted(utterance_ids)
    }


def score_trials(
    net: EmbeddingNet,
    trials: TrialList,
    utterance_features: Mapping[int, np.ndarray],
) -> ScoreSet:
    """Cosine score of the two length-normalized embeddings of every trial."""

    for index, trial in enumerate(trials):
        for utterance in (trial.enroll, trial.test):
            if utterance not in utterance_features:
                raise MissingUtteranceError(index, utterance)
    needed = {trial.enroll for trial in trials} | {trial.test for trial in trials}
    embeddings = embed_utterances(net, utterance_features, needed)
    scores = [float(embeddings[trial.enroll] @ embeddings[trial.test]) for trial in trials]
    return ScoreSet(
        scores=np.asarray(scores),
        is_target=np.asarray([trial.is_target for trial in trials]),
        trials=list(trials),
    )


def write_scores_csv(
    path: Path, scores: ScoreSet, provenance: Optional[Mapping[str, object]] = None
) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as stream:
        for key, value in (provenance or {}).items():
            stream.write(f"# {key}={value}\n")
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(["enroll", "test", "score", "is_target"])
        for trial, score in zip(scores.trials, scores.scores):
            writer.writerow([trial.enroll, trial.test, repr(float(score)), int(trial.is_target)])


def read_scores_csv(path: Path) -> ScoreSet:
    with path.open("r", encoding="utf-8", newline="") as stream:
        rows = list(csv.DictReader(line for line in stream if not line.startswith("#")))
    trials = [Trial(int(row["enroll"]), int(row["test"]), row["is_target"] == "1") for row in rows]
    return ScoreSet(
        scores=np.asarray([float(row["score"]) for row in rows]),
        is_target=np.asarray([trial.is_target for trial in trials]),
        trials=trials,
    )
