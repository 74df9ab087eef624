"""
Checkpoint container.

    b"PEECKPT1" | header length (u32, little-endian) | UTF-8 JSON header | parameters

Parameters follow the header in the order of `header.params`, each as row-major
little-endian float64.
"""

import json
import logging
import struct
from pathlib import Path

import numpy as np
from pydantic import BaseModel, ConfigDict, ValidationError

from indexing.vocab import SPECIALS, Vocabulary
from numkit.params import ParamStore

logger = logging.getLogger(__name__)

MAGIC = b"PEECKPT1"
FORMAT_VERSION = 1
DTYPE = np.dtype("<f8")


class CheckpointError(ValueError):
    pass


class ParamEntry(BaseModel):
    name: str
    shape: list[int]


class CheckpointHeader(BaseModel):
    model_config = ConfigDict(extra="forbid")

    format_version: int = FORMAT_VERSION
    kind: str
    config: dict
    vocab: list[str]
    params: list[ParamEntry]
    meta: dict = {}


def save_checkpoint(path, kind: str, store: ParamStore, vocab: Vocabulary, config: dict, meta: dict | None = None) -> None:
    header = CheckpointHeader(
        kind=kind,
        config=config,
        vocab=vocab.regular_tokens,
        params=[ParamEntry(name=name, shape=list(p.shape)) for name, p in store.items()],
        meta=meta or {},
    )
    encoded = header.model_dump_json().encode("utf-8")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", len(encoded)))
        f.write(encoded)
        for _, p in store.items():
            f.write(np.ascontiguousarray(p.data, dtype=DTYPE).tobytes(order="C"))
    logger.info("[CKPT] wrote %s checkpoint with %d tensors to %s", kind, len(header.params), path)


def read_checkpoint(path, kind: str | None = None) -> tuple[CheckpointHeader, dict[str, np.ndarray]]:
    """Returns the header and the stored arrays by name. `kind`, when given, must match."""
    blob = Path(path).read_bytes()
    if blob[:len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint (bad magic)")
    offset = len(MAGIC)
    if len(blob) < offset + 4:
        raise CheckpointError(f"{path}: truncated header")
    (header_len,) = struct.unpack_from("<I", blob, offset)
    offset += 4
    try:
        header = CheckpointHeader.model_validate(json.loads(blob[offset:offset + header_len].decode("utf-8")))
    except (UnicodeDecodeError, json.JSONDecodeError, ValidationError) as e:
        raise CheckpointError(f"{path}: unreadable header: {e}") from e
    offset += header_len

    if header.format_version != FORMAT_VERSION:
        raise CheckpointError(f"{path}: format version {header.format_version}, expected {FORMAT_VERSION}")
    if kind is not None and header.kind != kind:
        raise CheckpointError(f"{path}: holds a {header.kind!r} checkpoint, expected {kind!r}")

    arrays = {}
    for entry in header.params:
        count = int(np.prod(entry.shape, dtype=np.int64))
        end = offset + count * DTYPE.itemsize
        if end > len(blob):
            raise CheckpointError(f"{path}: truncated payload at {entry.name}")
        arrays[entry.name] = np.frombuffer(blob, dtype=DTYPE, count=count, offset=offset).reshape(entry.shape).astype(np.float64)
        offset = end
    if offset != len(blob):
        raise CheckpointError(f"{path}: {len(blob) - offset} trailing bytes")
    return header, arrays


def header_vocab(header: CheckpointHeader) -> Vocabulary:
    if any(tok in SPECIALS for tok in header.vocab):
        raise CheckpointError("stored vocabulary lists a reserved token")
    return Vocabulary(header.vocab)


def load_into(store: ParamStore, arrays: dict[str, np.ndarray]) -> None:
    try:
        store.load_state_dict(arrays)
    except ValueError as e:
        raise CheckpointError(str(e)) from e
