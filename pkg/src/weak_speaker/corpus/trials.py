from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..errors import ConfigurationError
from ..streams import substream
from .synth import WeaklyLabeledRecording


@dataclass(frozen=True, slots=True)
class Trial:
    enroll: int
    test: int
    is_target: bool


@dataclass(slots=True)
class TrialList:
    trials: list[Trial] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.trials)

    def __iter__(self):
        return iter(self.trials)

    @property
    def target_count(self) -> int:
        return sum(1 for trial in self.trials if trial.is_target)

    @property
    def nontarget_count(self) -> int:
        return len(self.trials) - self.target_count


def _draw(pool: list[tuple[int, int]], count: int, rng: np.random.Generator) -> list[tuple[int, int]]:
    if count == 0:
        return []
    replace = count > len(pool)
    picks = rng.choice(len(pool), size=count, replace=replace)
    return [pool[int(index)] for index in picks]


def emit_trials(
    heldout: Sequence[WeaklyLabeledRecording],
    trials_per_speaker: int,
    seed: int,
) -> TrialList:
    """Build a verification list with balanced target/non-target trials per speaker.

    Each held-out speaker enrolls `trials_per_speaker` trials: half pair two of its own
    utterances, the rest pair one of its utterances with another speaker's utterance.
    Pools are sampled without replacement while they are large enough.
    """

    by_speaker: dict[int, list[int]] = defaultdict(list)
    for utterance in heldout:
        by_speaker[utterance.weak_label].append(utterance.recording_id)
    if len(by_speaker) < 2:
        raise ConfigurationError("trial emission needs at least 2 held-out speakers")

    n_target = trials_per_speaker // 2
    n_nontarget = trials_per_speaker - n_target
    if n_target > 0:
        short = [speaker for speaker, utts in by_speaker.items() if len(utts) < 2]
        if short:
            raise ConfigurationError(
                f"target trials need >= 2 utterances per speaker; speakers {sorted(short)} have 1"
            )

    trials: list[Trial] = []
    for speaker in sorted(by_speaker):
        own = sorted(by_speaker[speaker])
        others = sorted(
            utterance for other, utts in by_speaker.items() if other != speaker for utterance in utts
        )
        rng = substream(seed, "trials", speaker)
        target_pool = [(u, v) for u in own for v in own if u != v]
        nontarget_pool = [(u, v) for u in own for v in others]
        trials.extend(Trial(u, v, True) for u, v in _draw(target_pool, n_target, rng))
        trials.extend(Trial(u, v, False) for u, v in _draw(nontarget_pool, n_nontarget, rng))
    return TrialList(trials)
