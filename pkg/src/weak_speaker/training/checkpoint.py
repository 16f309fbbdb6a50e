"""Model checkpoint file.

    b"WSCK" | uint32 version | uint32 n | n bytes of UTF-8 JSON metadata
    then every parameter block listed in the metadata, as little-endian float64

The metadata carries the network dimensions, activation, class ids, sub-center count,
seed and configuration hash, plus the name and shape of each block in file order.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from ..errors import UnsupportedFormatError
from .head import HEAD_PARAMETER, ClassificationHead
from .network import EmbeddingNet

MAGIC = b"WSCK"
VERSION = 1
_HEADER = struct.Struct("<4sII")


@dataclass(slots=True)
class Checkpoint:
    net: EmbeddingNet
    head: ClassificationHead
    provenance: dict[str, Any] = field(default_factory=dict)


def save_checkpoint(path: Path, checkpoint: Checkpoint) -> None:
    net, head = checkpoint.net, checkpoint.head
    blocks = dict(net.params)
    blocks[HEAD_PARAMETER] = head.weights
    metadata = {
        "input_dim": net.input_dim,
        "hidden_widths": list(net.hidden_widths),
        "embedding_dim": net.embedding_dim,
        "activation": net.activation,
        "class_ids": [int(value) for value in head.class_ids],
        "sub_centers": head.sub_centers,
        "provenance": checkpoint.provenance,
        "blocks": [[name, list(value.shape)] for name, value in blocks.items()],
    }
    encoded = json.dumps(metadata, sort_keys=True, separators=(",", ":")).encode("utf-8")
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as stream:
        stream.write(_HEADER.pack(MAGIC, VERSION, len(encoded)))
        stream.write(encoded)
        for value in blocks.values():
            stream.write(np.ascontiguousarray(value, dtype="<f8").tobytes())


def load_checkpoint(path: Path) -> Checkpoint:
    content = path.read_bytes()
    if len(content) < _HEADER.size:
        raise UnsupportedFormatError("header", f"{path} is truncated")
    magic, version, length = _HEADER.unpack_from(content)
    if magic != MAGIC:
        raise UnsupportedFormatError("magic", f"{path} has magic {magic!r}")
    if version != VERSION:
        raise UnsupportedFormatError("version", f"{path} has checkpoint version {version}")
    metadata = json.loads(content[_HEADER.size : _HEADER.size + length].decode("utf-8"))

    offset = _HEADER.size + length
    blocks: dict[str, np.ndarray] = {}
    for name, shape in metadata["blocks"]:
        count = int(np.prod(shape))
        if offset + 8 * count > len(content):
            raise UnsupportedFormatError("blocks", f"{path} ends inside block {name}")
        values = np.frombuffer(content, dtype="<f8", count=count, offset=offset)
        blocks[name] = values.reshape(shape).astype(np.float64)
        offset += 8 * count

    head = ClassificationHead(
        weights=blocks.pop(HEAD_PARAMETER),
        sub_centers=int(metadata["sub_centers"]),
        class_ids=[int(value) for value in metadata["class_ids"]],
    )
    net = EmbeddingNet(
        input_dim=int(metadata["input_dim"]),
        hidden_widths=tuple(int(width) for width in metadata["hidden_widths"]),
        embedding_dim=int(metadata["embedding_dim"]),
        activation=metadata["activation"],
        params=blocks,
    )
    return Checkpoint(net=net, head=head, provenance=dict(metadata["provenance"]))
