"""RTTM export and the JSON clustering cache."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence, TextIO

from ..errors import UnsupportedFormatError
from .clustering import Clustering
from .segmentation import Chunk


@dataclass(frozen=True, slots=True)
class RttmTurn:
    recording: str
    start_seconds: float
    duration_seconds: float
    label: str


def rttm_lines(
    clustering: Clustering,
    *,
    recording_name: str | None = None,
    frame_shift_ms: float = 10.0,
) -> list[str]:
    name = recording_name if recording_name is not None else str(clustering.recording_id)
    shift = frame_shift_ms / 1000.0
    turns = sorted(
        (chunk, index) for index, chunks in clustering.clusters.items() for chunk in chunks
    )
    return [
        f"SPEAKER {name} 1 {chunk.start_frame * shift:.2f} {chunk.num_frames * shift:.2f} "
        f"<NA> <NA> {index} <NA> <NA>"
        for chunk, index in turns
    ]


def write_rttm(
    stream: TextIO,
    clusterings: Sequence[Clustering],
    *,
    frame_shift_ms: float = 10.0,
) -> None:
    for clustering in clusterings:
        for line in rttm_lines(clustering, frame_shift_ms=frame_shift_ms):
            stream.write(line + "\n")


def read_rttm(stream: TextIO) -> list[RttmTurn]:
    turns = []
    for number, line in enumerate(stream, start=1):
        fields = line.split()
        if not fields or fields[0] != "SPEAKER":
            continue
        if len(fields) < 8:
            raise UnsupportedFormatError("rttm", f"line {number} has {len(fields)} fields")
        turns.append(
            RttmTurn(
                recording=fields[1],
                start_seconds=float(fields[3]),
                duration_seconds=float(fields[4]),
                label=fields[7],
            )
        )
    return turns


def save_clusterings(
    path: Path,
    clusterings: Sequence[Clustering],
    provenance: Mapping[str, object],
) -> None:
    payload = {
        "provenance": dict(provenance),
        "recordings": [
            {
                "recording_id": clustering.recording_id,
                "clusters": {
                    str(index): [[chunk.start_frame, chunk.end_frame] for chunk in chunks]
                    for index, chunks in clustering.clusters.items()
                },
            }
            for clustering in clusterings
        ],
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def load_clusterings(path: Path) -> dict[int, Clustering]:
    payload = json.loads(path.read_text(encoding="utf-8"))
    if not isinstance(payload, dict) or not isinstance(payload.get("recordings"), list):
        raise UnsupportedFormatError("clusterings", f"{path} is not a clustering cache")
    clusterings: dict[int, Clustering] = {}
    for entry in payload["recordings"]:
        recording_id = int(entry["recording_id"])
        clusters = {
            int(index): [Chunk(recording_id, int(start), int(end)) for start, end in spans]
            for index, spans in entry["clusters"].items()
        }
        clusterings[recording_id] = Clustering(recording_id, dict(sorted(clusters.items())))
    return clusterings
