"""File formats: embeddings (JSONL or packed binary), captions (JSONL),
gap vectors, decoder checkpoints, and report writers.

Canonical writes only (fixed key order, compact separators, one record per
line, trailing newline) so that reading a canonical file and writing it back
is byte-identical, and all outputs are bit-stable under a fixed seed. Writes
go to a temp file in the target directory and are renamed into place.
"""

from __future__ import annotations

import base64
import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .decoder import DecoderConfig, PrefixDecoder
from .embeddings import Embedding, EmbeddingSet, GapVector
from .vocab import SPECIALS, Vocabulary

__all__ = [
    "FileFormatError",
    "DimensionMismatchError",
    "DuplicateIdError",
    "TruncatedFileError",
    "read_embeddings",
    "write_embeddings",
    "read_captions",
    "write_captions",
    "read_gap",
    "write_gap",
    "save_checkpoint",
    "load_checkpoint",
    "write_json_report",
    "atomic_write_bytes",
]

FORMAT_VERSION = 1
_BINARY_MAGIC = b"EMB\x00"


class FileFormatError(ValueError):
    """Malformed file; message names the offending record or line."""


class DimensionMismatchError(FileFormatError):
    pass


class DuplicateIdError(FileFormatError):
    pass


class TruncatedFileError(FileFormatError):
    pass


def atomic_write_bytes(path: str | Path, data: bytes) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _dumps(obj: dict) -> str:
    return json.dumps(obj, separators=(",", ":"), ensure_ascii=False)


# ---------------------------------------------------------------------------
# embedding files

def write_embeddings(path: str | Path, s: EmbeddingSet, binary: bool = False) -> None:
    if binary:
        header = _dumps({
            "format_version": FORMAT_VERSION,
            "kind": "embeddings",
            "dim": s.dim,
            "count": len(s),
            "modality": s.modality,
            "normalized": s.normalized,
            "ids": s.ids,
        }).encode("utf-8")
        body = s.matrix.astype("<f4").tobytes()
        atomic_write_bytes(path, _BINARY_MAGIC + struct.pack("<I", len(header)) + header + body)
        return
    lines = [_dumps({
        "format_version": FORMAT_VERSION,
        "kind": "embeddings",
        "dim": s.dim,
        "count": len(s),
        "modality": s.modality,
        "normalized": s.normalized,
    })]
    for item in s:
        lines.append(_dumps({"id": item.id, "vector": item.values.tolist()}))
    atomic_write_bytes(path, ("\n".join(lines) + "\n").encode("utf-8"))


def _read_embeddings_binary(raw: bytes, path: str) -> EmbeddingSet:
    if len(raw) < 8:
        raise TruncatedFileError(f"{path}: binary embedding file shorter than its header")
    (header_len,) = struct.unpack("<I", raw[4:8])
    if len(raw) < 8 + header_len:
        raise TruncatedFileError(f"{path}: header truncated")
    try:
        header = json.loads(raw[8 : 8 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FileFormatError(f"{path}: bad binary header: {exc}") from None
    _check_header(header, "embeddings", path)
    dim, count = header["dim"], header["count"]
    ids = header.get("ids")
    if not isinstance(ids, list) or len(ids) != count:
        raise FileFormatError(f"{path}: binary header must carry {count} ids")
    body = raw[8 + header_len :]
    expected = count * dim * 4
    if len(body) < expected:
        raise TruncatedFileError(
            f"{path}: expected {expected} bytes of vector data, found {len(body)}"
        )
    if len(body) > expected:
        raise FileFormatError(f"{path}: {len(body) - expected} trailing bytes after vector data")
    mat = np.frombuffer(body, dtype="<f4").astype(np.float64).reshape(count, dim)
    if not np.all(np.isfinite(mat)):
        raise FileFormatError(f"{path}: non-finite vector entries")
    items = []
    seen: set[str] = set()
    for i, rid in enumerate(ids):
        if rid in seen:
            raise DuplicateIdError(f"{path}: duplicate embedding id {rid!r}")
        seen.add(rid)
        items.append(Embedding(mat[i], id=rid))
    return EmbeddingSet(dim=dim, items=items, modality=header["modality"],
                        normalized=bool(header["normalized"]))


def _check_header(header: dict, kind: str, path: str) -> None:
    if not isinstance(header, dict) or header.get("kind") != kind:
        raise FileFormatError(f"{path}: expected a {kind} header line")
    if "format_version" not in header:
        raise FileFormatError(f"{path}: header is missing format_version")
    if header["format_version"] != FORMAT_VERSION:
        raise FileFormatError(
            f"{path}: unsupported format_version {header['format_version']!r}"
        )


def read_embeddings(path: str | Path) -> EmbeddingSet:
    """Auto-detects the JSONL and binary layouts by magic bytes."""
    path = str(path)
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] == _BINARY_MAGIC:
        return _read_embeddings_binary(raw, path)
    lines = raw.decode("utf-8").splitlines()
    if not lines:
        raise TruncatedFileError(f"{path}: empty file")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise FileFormatError(f"{path}: line 1: {exc}") from None
    _check_header(header, "embeddings", path)
    dim, count = header["dim"], header["count"]
    records = lines[1:]
    if len(records) < count:
        raise TruncatedFileError(f"{path}: header promises {count} records, found {len(records)}")
    if len(records) > count:
        raise FileFormatError(f"{path}: {len(records) - count} records beyond the declared count")
    items = []
    seen: set[str] = set()
    for lineno, line in enumerate(records, start=2):
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise FileFormatError(f"{path}: line {lineno}: {exc}") from None
        rid = rec.get("id")
        vec = rec.get("vector")
        if not isinstance(rid, str) or not isinstance(vec, list):
            raise FileFormatError(f"{path}: line {lineno}: record needs an id and a vector")
        if len(vec) != dim:
            raise DimensionMismatchError(
                f"{path}: record {rid!r} has a vector of length {len(vec)}, expected {dim}"
            )
        if rid in seen:
            raise DuplicateIdError(f"{path}: duplicate embedding id {rid!r}")
        seen.add(rid)
        try:
            items.append(Embedding(np.asarray(vec, dtype=np.float64), id=rid))
        except ValueError as exc:
            raise FileFormatError(f"{path}: record {rid!r}: {exc}") from None
    return EmbeddingSet(dim=dim, items=items, modality=header["modality"],
                        normalized=bool(header["normalized"]))


# ---------------------------------------------------------------------------
# caption files

def write_captions(path: str | Path, ids: list[str], group_ids: list[str],
                   texts: list[str]) -> None:
    lines = [_dumps({"format_version": FORMAT_VERSION, "kind": "captions", "count": len(ids)})]
    for rid, gid, text in zip(ids, group_ids, texts):
        lines.append(_dumps({"id": rid, "group_id": gid, "text": text}))
    atomic_write_bytes(path, ("\n".join(lines) + "\n").encode("utf-8"))


def read_captions(path: str | Path) -> tuple[list[str], list[str], list[str]]:
    """Returns (ids, group_ids, texts), in file order."""
    path = str(path)
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise TruncatedFileError(f"{path}: empty file")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise FileFormatError(f"{path}: line 1: {exc}") from None
    _check_header(header, "captions", path)
    count = header["count"]
    records = lines[1:]
    if len(records) < count:
        raise TruncatedFileError(f"{path}: header promises {count} records, found {len(records)}")
    if len(records) > count:
        raise FileFormatError(f"{path}: {len(records) - count} records beyond the declared count")
    ids: list[str] = []
    group_ids: list[str] = []
    texts: list[str] = []
    seen: set[str] = set()
    for lineno, line in enumerate(records, start=2):
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise FileFormatError(f"{path}: line {lineno}: {exc}") from None
        rid, gid, text = rec.get("id"), rec.get("group_id"), rec.get("text")
        if not isinstance(rid, str) or not isinstance(gid, str) or not isinstance(text, str):
            raise FileFormatError(f"{path}: line {lineno}: record needs id, group_id, text")
        if not text:
            raise FileFormatError(f"{path}: record {rid!r}: empty caption text")
        if rid in seen:
            raise DuplicateIdError(f"{path}: duplicate caption id {rid!r}")
        seen.add(rid)
        ids.append(rid)
        group_ids.append(gid)
        texts.append(text)
    return ids, group_ids, texts


# ---------------------------------------------------------------------------
# gap vector files

def write_gap(path: str | Path, gap: GapVector) -> None:
    payload = _dumps({
        "format_version": FORMAT_VERSION,
        "kind": "gap_vector",
        "dim": gap.dim,
        "n_pairs": gap.n_pairs,
        "values": gap.values.tolist(),
    })
    atomic_write_bytes(path, (payload + "\n").encode("utf-8"))


def read_gap(path: str | Path) -> GapVector:
    path = str(path)
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    _check_header(payload, "gap_vector", path)
    values = np.asarray(payload["values"], dtype=np.float64)
    if values.shape != (payload["dim"],):
        raise DimensionMismatchError(
            f"{path}: gap vector length {values.shape} does not match dim {payload['dim']}"
        )
    return GapVector(values, n_pairs=int(payload["n_pairs"]))


# ---------------------------------------------------------------------------
# checkpoints

def save_checkpoint(path: str | Path, dec: PrefixDecoder) -> None:
    cfg = dec.cfg
    payload = {
        "format_version": FORMAT_VERSION,
        "kind": "checkpoint",
        "config": {
            "d": cfg.d, "m": cfg.m, "heads": cfg.heads, "layers": cfg.layers,
            "k": cfg.k, "max_len": cfg.max_len, "mapper_hidden": cfg.mapper_hidden,
            "mapper_activation": cfg.mapper_activation,
        },
        "vocab": list(dec.vocab.tokens),
        "params": {
            name: {
                "shape": list(arr.shape),
                "dtype": "float64",
                "data": base64.b64encode(np.ascontiguousarray(arr, dtype="<f8").tobytes()).decode("ascii"),
            }
            for name, arr in dec.params.items()
        },
    }
    atomic_write_bytes(path, (_dumps(payload) + "\n").encode("utf-8"))


def load_checkpoint(path: str | Path) -> PrefixDecoder:
    path = str(path)
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    _check_header(payload, "checkpoint", path)
    cfg = DecoderConfig(**payload["config"])
    tokens = payload["vocab"]
    if tokens[:4] != SPECIALS:
        raise FileFormatError(f"{path}: checkpoint vocabulary is missing the special tokens")
    vocab = Vocabulary(tokens=tuple(tokens))
    params: dict[str, np.ndarray] = {}
    for name, spec in payload["params"].items():
        if spec.get("dtype") != "float64":
            raise FileFormatError(f"{path}: parameter {name!r} has unsupported dtype")
        raw = base64.b64decode(spec["data"])
        arr = np.frombuffer(raw, dtype="<f8")
        expected = int(np.prod(spec["shape"])) if spec["shape"] else 1
        if arr.size != expected:
            raise TruncatedFileError(
                f"{path}: parameter {name!r} has {arr.size} values, shape promises {expected}"
            )
        params[name] = arr.reshape(spec["shape"]).copy()
    return PrefixDecoder(cfg=cfg, vocab=vocab, params=params)


# ---------------------------------------------------------------------------
# reports

def write_json_report(path: str | Path, payload: dict) -> None:
    atomic_write_bytes(path, (json.dumps(payload, indent=2, ensure_ascii=False) + "\n").encode("utf-8"))
