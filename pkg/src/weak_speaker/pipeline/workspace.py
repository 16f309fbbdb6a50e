"""Work directory layout and provenance stamping.

    <work>/corpus/        synthetic or ingested corpus (unless corpus_dir is set)
    <work>/diarization/   clusterings.json, diarization.rttm, metrics.json
    <work>/models/        <name>.ckpt and <name>.log.jsonl per trained model
    <work>/selection/     self_labeled.tsv, summary.json
    <work>/eval/          <name>.scores.csv, <name>.metrics.json
    <work>/report/        models.{csv,json}, datasets.{csv,json}
    <work>/logs/          rotating run logs (not artifacts)
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

from ..config.settings import Settings, config_hash
from ..errors import MissingArtifactError


@dataclass(frozen=True, slots=True)
class Workspace:
    root: Path
    corpus: Path

    @classmethod
    def from_settings(cls, settings: Settings) -> "Workspace":
        return cls(root=settings.work_dir, corpus=settings.resolved_corpus_dir)

    @property
    def diarization(self) -> Path:
        return self.root / "diarization"

    @property
    def clusterings(self) -> Path:
        return self.diarization / "clusterings.json"

    @property
    def rttm(self) -> Path:
        return self.diarization / "diarization.rttm"

    @property
    def models(self) -> Path:
        return self.root / "models"

    @property
    def selection(self) -> Path:
        return self.root / "selection"

    @property
    def self_labeled(self) -> Path:
        return self.selection / "self_labeled.tsv"

    @property
    def selection_summary(self) -> Path:
        return self.selection / "summary.json"

    @property
    def eval(self) -> Path:
        return self.root / "eval"

    @property
    def report(self) -> Path:
        return self.root / "report"

    @property
    def logs(self) -> Path:
        return self.root / "logs"

    def checkpoint(self, name: str) -> Path:
        return self.models / f"{name}.ckpt"

    def training_log(self, name: str) -> Path:
        return self.models / f"{name}.log.jsonl"

    def snapshot(self, name: str) -> Path:
        return self.models / f"{name}.diverged.ckpt"

    def model_names(self) -> list[str]:
        names = []
        for path in self.models.glob("*.ckpt"):
            if not path.name.endswith(".diverged.ckpt"):
                names.append(path.name[: -len(".ckpt")])
        return sorted(names)


def require(path: Path, command: str) -> Path:
    if not path.exists():
        raise MissingArtifactError(path, command)
    return path


def provenance(settings: Settings) -> dict[str, Any]:
    return {"config_hash": config_hash(settings), "seed": settings.seed}


def write_json(path: Path, payload: Mapping[str, Any]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def read_json(path: Path) -> dict[str, Any]:
    return json.loads(path.read_text(encoding="utf-8"))
