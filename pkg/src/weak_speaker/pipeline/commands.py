"""One function per CLI subcommand; each reads its inputs from and writes its outputs to
the work directory, so rerunning a command with unchanged inputs rewrites identical files.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np
import structlog

from ..audio.features import fbank, mfcc
from ..audio.wav import read_wav
from ..config.settings import Settings
from ..corpus.storage import (
    HELDOUT_DIR,
    MANIFEST_NAME,
    TRIALS_NAME,
    data_lines,
    read_recordings,
    read_trials,
    write_corpus,
    write_recordings,
)
from ..corpus.summary import corpus_summary
from ..corpus.synth import (
    WeaklyLabeledRecording,
    synthesize_corpus,
    synthesize_heldout,
    target_fraction,
)
from ..corpus.trials import emit_trials
from ..diarization.clustering import Clustering
from ..diarization.diarizer import diarize_corpus
from ..diarization.metrics import boundary_error, purity_coverage
from ..diarization.rttm import load_clusterings, save_clusterings, write_rttm
from ..errors import MissingArtifactError
from ..evaluation.metrics import eer, min_dcf
from ..evaluation.scoring import score_trials, write_scores_csv
from ..selection import (
    build_self_labeled,
    read_self_labeled,
    selection_metrics,
    write_self_labeled,
)
from ..training.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from ..training.head import ClassificationHead
from ..training.network import EmbeddingNet
from ..training.supervised import train_reference, train_stage2
from ..training.weak import TrainingResult, train_stage1
from .workspace import Workspace, provenance, read_json, require, write_json

logger = structlog.get_logger(__name__)

UNTRAINED = "untrained"
MODEL_COLUMNS = (
    "model",
    "supervision",
    "data",
    "margin",
    "aggregation",
    "sub_centers",
    "eer",
    "min_dcf",
    "trials",
)
DATASET_COLUMNS = ("dataset", "speakers", "recordings", "hours")


def _load_corpus(workspace: Workspace) -> list[WeaklyLabeledRecording]:
    require(workspace.corpus / MANIFEST_NAME, "synth")
    return read_recordings(workspace.corpus)


def _load_clusterings(workspace: Workspace) -> dict[int, Clustering]:
    return load_clusterings(require(workspace.clusterings, "diarize"))


def _margin_tag(start: float, end: float) -> str:
    return f"{start:g}" if start == end else f"{start:g}-{end:g}"


def stage1_name(settings: Settings) -> str:
    return f"stage1-{settings.training.aggregation.variant}"


def stage2_name(settings: Settings, prefix: str = "stage2") -> str:
    supervised = settings.supervised
    margin = _margin_tag(supervised.margin_start, supervised.margin_end)
    return f"{prefix}-m{margin}-k{supervised.sub_centers}"


def _save_model(
    workspace: Workspace,
    name: str,
    result: TrainingResult,
    stamp: dict[str, Any],
) -> Path:
    path = workspace.checkpoint(name)
    stamp = dict(stamp)
    stamp["cv_accuracy"] = result.final_cv_accuracy
    save_checkpoint(path, Checkpoint(result.net, result.head, stamp))
    logger.info("cli.model.saved", model=name, path=str(path), cv_accuracy=stamp["cv_accuracy"])
    return path


def cmd_synth(settings: Settings) -> dict[str, Any]:
    workspace = Workspace.from_settings(settings)
    recordings, sources = synthesize_corpus(settings.corpus, settings.seed, threads=settings.threads)
    heldout = synthesize_heldout(settings.corpus, sources, settings.seed)
    trials = emit_trials(heldout, settings.corpus.trials_per_speaker, settings.seed)
    write_corpus(
        workspace.corpus,
        recordings,
        provenance(settings),
        heldout=heldout,
        trials=trials,
        sources=sources,
    )
    summary = {
        "recordings": len(recordings),
        "heldout_utterances": len(heldout),
        "trials": len(trials),
        "target_fraction": target_fraction(recordings),
    }
    logger.info("cli.synth.done", path=str(workspace.corpus), **summary)
    return summary


def cmd_ingest(settings: Settings, wav_dir: Path, manifest: Path) -> int:
    """Compute fbank (training) and MFCC (diarization) features for listed WAV files.

    Manifest lines: `recording_id<TAB>weak_label<TAB>path relative to wav_dir`.
    """

    workspace = Workspace.from_settings(settings)
    features = settings.features
    recordings = []
    for recording_id, weak_label, relative in data_lines(manifest):
        waveform = read_wav(wav_dir / relative)
        training = fbank(
            waveform, features.n_mels, features.win_ms, features.hop_ms, features.preemphasis
        )
        diarization = mfcc(
            waveform,
            features.mfcc_ceps,
            features.mfcc_mels,
            features.win_ms,
            features.hop_ms,
            features.preemphasis,
        )
        recordings.append(
            WeaklyLabeledRecording(
                recording_id=int(recording_id),
                features=training.frames.astype(np.float32),
                weak_label=int(weak_label),
                diarization_features=diarization.frames.astype(np.float32),
            )
        )
    write_recordings(workspace.corpus, recordings, provenance(settings))
    logger.info("cli.ingest.done", recordings=len(recordings), path=str(workspace.corpus))
    return len(recordings)


def cmd_diarize(settings: Settings) -> dict[str, Any]:
    workspace = Workspace.from_settings(settings)
    recordings = _load_corpus(workspace)
    clusterings = diarize_corpus(
        recordings, settings.diarization, settings.seed, threads=settings.threads
    )
    stamp = provenance(settings)
    save_clusterings(workspace.clusterings, clusterings, stamp)
    with workspace.rttm.open("w", encoding="utf-8") as stream:
        write_rttm(stream, clusterings, frame_shift_ms=settings.features.hop_ms)

    summary: dict[str, Any] = {
        "provenance": stamp,
        "recordings": len(clusterings),
        "mean_clusters": float(np.mean([c.num_clusters for c in clusterings])),
    }
    scored = [(r, c) for r, c in zip(recordings, clusterings) if r.ground_truth is not None]
    if scored:
        purities, coverages, medians, over = [], [], [], []
        for recording, clustering in scored:
            purity, coverage = purity_coverage(clustering, recording.ground_truth)
            _, median = boundary_error(clustering, recording.ground_truth)
            purities.append(purity)
            coverages.append(coverage)
            medians.append(median)
            over.append(clustering.num_clusters >= len(np.unique(recording.ground_truth)))
        summary.update(
            purity=float(np.mean(purities)),
            coverage=float(np.mean(coverages)),
            over_segmented_fraction=float(np.mean(over)),
            median_boundary_error_s=float(np.median(medians)) * settings.features.hop_ms / 1000.0,
        )
    write_json(workspace.diarization / "metrics.json", summary)
    logger.info("cli.diarize.done", **{k: v for k, v in summary.items() if k != "provenance"})
    return summary


def cmd_train_weak(settings: Settings) -> Path:
    workspace = Workspace.from_settings(settings)
    recordings = _load_corpus(workspace)
    clusterings = _load_clusterings(workspace)
    name = stage1_name(settings)
    stamp = provenance(settings)
    result = train_stage1(
        recordings,
        clusterings,
        settings.training,
        settings.seed,
        threads=settings.threads,
        log_path=workspace.training_log(name),
        snapshot_path=workspace.snapshot(name),
        provenance=stamp,
    )
    stamp.update(
        supervision="weak",
        data="uncut",
        margin=f"{settings.training.aam.margin:g}",
        aggregation=settings.training.aggregation.variant,
        sub_centers=1,
    )
    return _save_model(workspace, name, result, stamp)


def cmd_select(settings: Settings, model: Optional[str] = None) -> dict[str, Any]:
    workspace = Workspace.from_settings(settings)
    name = model or stage1_name(settings)
    checkpoint = load_checkpoint(require(workspace.checkpoint(name), "train-weak"))
    recordings = _load_corpus(workspace)
    clusterings = _load_clusterings(workspace)
    chunkings = {rid: clustering.chunks() for rid, clustering in clusterings.items()}
    selected = build_self_labeled(
        checkpoint.net,
        checkpoint.head,
        recordings,
        chunkings,
        settings.selection,
        threads=settings.threads,
        frame_shift_ms=settings.features.hop_ms,
    )
    metrics = None
    if all(recording.ground_truth is not None for recording in recordings):
        metrics = selection_metrics(selected, recordings)
    stamp = provenance(settings)
    stamp["model"] = name
    write_self_labeled(workspace.self_labeled, workspace.selection_summary, selected, stamp, metrics)
    summary = read_json(workspace.selection_summary)
    logger.info("cli.select.done", model=name, chunks=summary["chunks"], empty=summary.get("empty"))
    return summary


def cmd_train_strong(settings: Settings) -> Path:
    workspace = Workspace.from_settings(settings)
    selected = read_self_labeled(
        require(workspace.self_labeled, "select"), frame_shift_ms=settings.features.hop_ms
    )
    recordings = _load_corpus(workspace)
    name = stage2_name(settings)
    stamp = provenance(settings)
    result = train_stage2(
        selected,
        recordings,
        settings.training,
        settings.supervised,
        settings.seed,
        threads=settings.threads,
        log_path=workspace.training_log(name),
        snapshot_path=workspace.snapshot(name),
        provenance=stamp,
    )
    supervised = settings.supervised
    stamp.update(
        supervision="weak",
        data="self-labeled",
        margin=_margin_tag(supervised.margin_start, supervised.margin_end),
        aggregation="-",
        sub_centers=supervised.sub_centers,
    )
    return _save_model(workspace, name, result, stamp)


def cmd_train_reference(settings: Settings) -> Path:
    workspace = Workspace.from_settings(settings)
    recordings = _load_corpus(workspace)
    name = stage2_name(settings, prefix="reference")
    stamp = provenance(settings)
    result = train_reference(
        recordings,
        settings.training,
        settings.supervised,
        settings.seed,
        threads=settings.threads,
        log_path=workspace.training_log(name),
        snapshot_path=workspace.snapshot(name),
        provenance=stamp,
    )
    supervised = settings.supervised
    stamp.update(
        supervision="strong",
        data="restricted",
        margin=_margin_tag(supervised.margin_start, supervised.margin_end),
        aggregation="-",
        sub_centers=supervised.sub_centers,
    )
    return _save_model(workspace, name, result, stamp)


def _untrained_model(settings: Settings, input_dim: int) -> Checkpoint:
    training = settings.training
    net = EmbeddingNet.initialize(
        input_dim,
        training.hidden_widths,
        training.embedding_dim,
        activation=training.activation,
        seed=settings.seed,
        stream="training.untrained.network",
    )
    head = ClassificationHead.initialize([0], training.embedding_dim, seed=settings.seed)
    stamp = provenance(settings)
    stamp.update(supervision="none", data="-", margin="-", aggregation="-", sub_centers=0)
    return Checkpoint(net, head, stamp)


def cmd_eval(settings: Settings, models: Optional[Sequence[str]] = None) -> list[dict[str, Any]]:
    workspace = Workspace.from_settings(settings)
    heldout_dir = workspace.corpus / HELDOUT_DIR
    require(heldout_dir / MANIFEST_NAME, "synth")
    utterances = {u.recording_id: u.features for u in read_recordings(heldout_dir)}
    trials = read_trials(require(workspace.corpus / TRIALS_NAME, "synth"))
    input_dim = int(next(iter(utterances.values())).shape[1])

    names = list(models) if models else workspace.model_names()
    if not names:
        raise MissingArtifactError(workspace.models, "train-weak")

    diarization_metrics = workspace.diarization / "metrics.json"
    extra: dict[str, Any] = {}
    if diarization_metrics.exists():
        diarization = read_json(diarization_metrics)
        extra.update({key: diarization.get(key) for key in ("purity", "coverage")})
    if workspace.selection_summary.exists():
        selection = read_json(workspace.selection_summary)
        extra.update(
            selection_precision=selection.get("precision"),
            selection_recall=selection.get("recall"),
        )

    reports = []
    for name in names:
        if name == UNTRAINED:
            checkpoint = _untrained_model(settings, input_dim)
        else:
            checkpoint = load_checkpoint(require(workspace.checkpoint(name), "train-weak"))
        scores = score_trials(checkpoint.net, trials, utterances)
        stamp = provenance(settings)
        report = {
            "model": name,
            "provenance": stamp,
            "model_provenance": checkpoint.provenance,
            "eer": eer(scores),
            "min_dcf": min_dcf(
                scores,
                settings.evaluation.p_target,
                settings.evaluation.c_miss,
                settings.evaluation.c_fa,
            ),
            "trials": len(scores),
            "cv_accuracy": checkpoint.provenance.get("cv_accuracy"),
            **extra,
        }
        write_scores_csv(workspace.eval / f"{name}.scores.csv", scores, stamp)
        write_json(workspace.eval / f"{name}.metrics.json", report)
        logger.info("cli.eval.done", model=name, eer=report["eer"], min_dcf=report["min_dcf"])
        reports.append(report)
    return reports


def _write_table(
    path: Path,
    columns: Sequence[str],
    rows: Sequence[dict[str, Any]],
    stamp: dict[str, Any],
) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as stream:
        for key, value in stamp.items():
            stream.write(f"# {key}={value}\n")
        writer = csv.DictWriter(stream, fieldnames=list(columns), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({column: row.get(column) for column in columns})


def cmd_report(settings: Settings) -> dict[str, Any]:
    """Model comparison and dataset comparison tables, each as CSV and JSON."""

    workspace = Workspace.from_settings(settings)
    metrics_files = sorted(workspace.eval.glob("*.metrics.json"))
    if not metrics_files:
        raise MissingArtifactError(workspace.eval, "eval")

    model_rows = []
    for path in metrics_files:
        metrics = read_json(path)
        stamp = metrics.get("model_provenance", {})
        model_rows.append(
            {
                "model": metrics["model"],
                "supervision": stamp.get("supervision"),
                "data": stamp.get("data"),
                "margin": stamp.get("margin"),
                "aggregation": stamp.get("aggregation"),
                "sub_centers": stamp.get("sub_centers"),
                "eer": metrics["eer"],
                "min_dcf": metrics["min_dcf"],
                "trials": metrics["trials"],
            }
        )

    recordings = _load_corpus(workspace)
    kept = None
    if workspace.self_labeled.exists():
        kept = read_self_labeled(workspace.self_labeled, frame_shift_ms=settings.features.hop_ms)
    dataset_rows = [
        row.as_dict()
        for row in corpus_summary(recordings, kept, frame_shift_ms=settings.features.hop_ms)
    ]

    stamp = provenance(settings)
    _write_table(workspace.report / "models.csv", MODEL_COLUMNS, model_rows, stamp)
    _write_table(workspace.report / "datasets.csv", DATASET_COLUMNS, dataset_rows, stamp)
    write_json(workspace.report / "models.json", {"provenance": stamp, "rows": model_rows})
    write_json(workspace.report / "datasets.json", {"provenance": stamp, "rows": dataset_rows})
    logger.info("cli.report.done", models=len(model_rows), datasets=len(dataset_rows))
    return {"models": model_rows, "datasets": dataset_rows}
