"""On-disk corpus layout.

    <dir>/manifest.tsv                 # provenance comments, then `id<TAB>weak_label<TAB>path`
    <dir>/recordings/<id>/features.f32 # magic b"WSFM", uint32 T, uint32 F, T*F float32 LE
    <dir>/recordings/<id>/diar.f32     # optional second feature kind, same format
    <dir>/recordings/<id>/labels.i32   # magic b"WSGT", uint32 T, T int32 LE (synthetic only)
    <dir>/heldout/...                  # same layout for trial utterances
    <dir>/trials.tsv                   # provenance comments, then `enroll<TAB>test<TAB>target`
    <dir>/sources.json                 # SpeakerSource parameters
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from ..errors import UnsupportedFormatError
from .synth import SpeakerSource, WeaklyLabeledRecording
from .trials import Trial, TrialList

FEATURE_MAGIC = b"WSFM"
LABEL_MAGIC = b"WSGT"
_FEATURE_HEADER = struct.Struct("<4sII")
_LABEL_HEADER = struct.Struct("<4sI")

FEATURES_NAME = "features.f32"
DIARIZATION_FEATURES_NAME = "diar.f32"
LABELS_NAME = "labels.i32"
MANIFEST_NAME = "manifest.tsv"
TRIALS_NAME = "trials.tsv"
SOURCES_NAME = "sources.json"
HELDOUT_DIR = "heldout"


def write_feature_matrix(path: Path, frames: np.ndarray) -> None:
    frames = np.ascontiguousarray(frames, dtype="<f4")
    if frames.ndim != 2:
        raise ValueError("feature matrix must be two-dimensional")
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as stream:
        stream.write(_FEATURE_HEADER.pack(FEATURE_MAGIC, frames.shape[0], frames.shape[1]))
        stream.write(frames.tobytes())


def _payload(path: Path, content: bytes, dtype: str, count: int, offset: int) -> np.ndarray:
    needed = offset + count * np.dtype(dtype).itemsize
    if len(content) < needed:
        raise UnsupportedFormatError(
            "payload", f"{path} holds {len(content)} bytes, header promises {needed}"
        )
    return np.frombuffer(content, dtype=dtype, count=count, offset=offset)


def read_feature_matrix(path: Path) -> np.ndarray:
    content = path.read_bytes()
    if len(content) < _FEATURE_HEADER.size:
        raise UnsupportedFormatError("header", f"{path} is truncated")
    magic, n_frames, dim = _FEATURE_HEADER.unpack_from(content)
    if magic != FEATURE_MAGIC:
        raise UnsupportedFormatError("magic", f"{path} has magic {magic!r}")
    data = _payload(path, content, "<f4", n_frames * dim, _FEATURE_HEADER.size)
    return data.reshape(n_frames, dim).astype(np.float32)


def write_frame_labels(path: Path, labels: np.ndarray) -> None:
    labels = np.ascontiguousarray(labels, dtype="<i4")
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as stream:
        stream.write(_LABEL_HEADER.pack(LABEL_MAGIC, labels.shape[0]))
        stream.write(labels.tobytes())


def read_frame_labels(path: Path) -> np.ndarray:
    content = path.read_bytes()
    if len(content) < _LABEL_HEADER.size:
        raise UnsupportedFormatError("header", f"{path} is truncated")
    magic, n_frames = _LABEL_HEADER.unpack_from(content)
    if magic != LABEL_MAGIC:
        raise UnsupportedFormatError("magic", f"{path} has magic {magic!r}")
    data = _payload(path, content, "<i4", n_frames, _LABEL_HEADER.size)
    return data.astype(np.int32)


def provenance_lines(provenance: Mapping[str, object]) -> list[str]:
    return [f"# {key}={value}" for key, value in provenance.items()]


def data_lines(path: Path) -> Iterable[list[str]]:
    with path.open("r", encoding="utf-8") as stream:
        for line in stream:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            yield line.split("\t")


def write_recordings(
    directory: Path,
    recordings: Sequence[WeaklyLabeledRecording],
    provenance: Mapping[str, object],
) -> None:
    lines = provenance_lines(provenance)
    for recording in recordings:
        relative = Path("recordings") / str(recording.recording_id)
        base = directory / relative
        write_feature_matrix(base / FEATURES_NAME, recording.features)
        if recording.diarization_features is not None:
            write_feature_matrix(base / DIARIZATION_FEATURES_NAME, recording.diarization_features)
        if recording.ground_truth is not None:
            write_frame_labels(base / LABELS_NAME, recording.ground_truth)
        lines.append(f"{recording.recording_id}\t{recording.weak_label}\t{relative.as_posix()}")
    directory.mkdir(parents=True, exist_ok=True)
    (directory / MANIFEST_NAME).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_recordings(directory: Path) -> list[WeaklyLabeledRecording]:
    recordings = []
    for recording_id, weak_label, relative in data_lines(directory / MANIFEST_NAME):
        base = directory / relative
        labels_path = base / LABELS_NAME
        diar_path = base / DIARIZATION_FEATURES_NAME
        recordings.append(
            WeaklyLabeledRecording(
                recording_id=int(recording_id),
                features=read_feature_matrix(base / FEATURES_NAME),
                weak_label=int(weak_label),
                ground_truth=read_frame_labels(labels_path) if labels_path.exists() else None,
                diarization_features=(
                    read_feature_matrix(diar_path) if diar_path.exists() else None
                ),
            )
        )
    return recordings


def write_trials(path: Path, trials: TrialList, provenance: Mapping[str, object]) -> None:
    lines = provenance_lines(provenance)
    for trial in trials:
        label = "target" if trial.is_target else "nontarget"
        lines.append(f"{trial.enroll}\t{trial.test}\t{label}")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_trials(path: Path) -> TrialList:
    return TrialList(
        [
            Trial(int(enroll), int(test), label == "target")
            for enroll, test, label in data_lines(path)
        ]
    )


def write_sources(path: Path, sources: Sequence[SpeakerSource]) -> None:
    payload = [
        {
            "speaker_id": source.speaker_id,
            "weights": source.mixture_weights.tolist(),
            "means": source.component_means.tolist(),
            "variances": source.component_variances.tolist(),
        }
        for source in sources
    ]
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload), encoding="utf-8")


def read_sources(path: Path) -> list[SpeakerSource]:
    payload = json.loads(path.read_text(encoding="utf-8"))
    return [
        SpeakerSource(
            speaker_id=int(entry["speaker_id"]),
            mixture_weights=np.asarray(entry["weights"], dtype=np.float64),
            component_means=np.asarray(entry["means"], dtype=np.float64),
            component_variances=np.asarray(entry["variances"], dtype=np.float64),
        )
        for entry in payload
    ]


def write_corpus(
    directory: Path,
    recordings: Sequence[WeaklyLabeledRecording],
    provenance: Mapping[str, object],
    *,
    heldout: Optional[Sequence[WeaklyLabeledRecording]] = None,
    trials: Optional[TrialList] = None,
    sources: Optional[Sequence[SpeakerSource]] = None,
) -> None:
    write_recordings(directory, recordings, provenance)
    if heldout is not None:
        write_recordings(directory / HELDOUT_DIR, heldout, provenance)
    if trials is not None:
        write_trials(directory / TRIALS_NAME, trials, provenance)
    if sources is not None:
        write_sources(directory / SOURCES_NAME, sources)
