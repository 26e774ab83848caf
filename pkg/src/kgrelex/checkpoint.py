"""Versioned binary checkpoint container.

Layout (all integers little-endian):

    bytes 0..3    magic b"KGRX"
    bytes 4..7    format version, uint32 (currently 1)
    bytes 8..15   header length in bytes, uint64
    header        UTF-8 JSON with sorted keys: {"config", "entities",
                  "relations", "arrays", "scorer"}; "arrays" lists each
                  parameter matrix's name and shape in file order
    payload       the listed arrays as row-major IEEE-754 float32,
                  back-to-back in header order

Saving is atomic (temp file + rename) and loading a written file then saving
it again reproduces the bytes exactly.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .linkpred import ModelParams, RgcnLayer
from .reasoning import PathFeaturizer, ReasoningScorer

MAGIC = b"KGRX"
VERSION = 1


@dataclass
class Checkpoint:
    params: ModelParams
    entity_names: list[str]
    relation_names: list[str]
    config: dict
    scorer: ReasoningScorer | None


def _named_arrays(params: ModelParams, scorer: ReasoningScorer | None):
    out = [("entity_emb", params.entity_emb), ("relation_diag", params.relation_diag)]
    for i, layer in enumerate(params.layers):
        out.append((f"layer{i}_w_rel", layer.w_rel))
        out.append((f"layer{i}_w_self", layer.w_self))
    if scorer is not None:
        for name, arr in zip(("scorer_w1", "scorer_b1", "scorer_w2", "scorer_b2")
                             if scorer.hidden else ("scorer_weights", "scorer_bias"),
                             scorer.arrays()):
            out.append((name, arr))
    return out


def save_checkpoint(path: str | os.PathLike, params: ModelParams,
                    entity_names: list[str], relation_names: list[str],
                    config: dict, scorer: ReasoningScorer | None = None) -> None:
    arrays = _named_arrays(params, scorer)
    header = {
        "config": config,
        "entities": list(entity_names),
        "relations": list(relation_names),
        "n_layers": len(params.layers),
        "arrays": [{"name": n, "shape": list(a.shape)} for n, a in arrays],
        "scorer": None if scorer is None else {
            "hidden": scorer.hidden,
            "feature_types": scorer.featurizer.type_names,
        },
    }
    header_bytes = json.dumps(header, ensure_ascii=False, sort_keys=True,
                              separators=(",", ":")).encode("utf-8")
    payload = b"".join(
        np.ascontiguousarray(a, dtype="<f4").tobytes() for _, a in arrays
    )
    blob = MAGIC + struct.pack("<I", VERSION) + struct.pack("<Q", len(header_bytes))
    blob += header_bytes + payload

    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".ckpt-", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(blob)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_checkpoint(path: str | os.PathLike) -> Checkpoint:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 16 or blob[:4] != MAGIC:
        raise DataError(f"{path}: not a kgrelex checkpoint (bad magic)")
    (version,) = struct.unpack("<I", blob[4:8])
    if version != VERSION:
        raise DataError(f"{path}: unsupported checkpoint version {version}")
    (header_len,) = struct.unpack("<Q", blob[8:16])
    try:
        header = json.loads(blob[16:16 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DataError(f"{path}: corrupt checkpoint header: {exc}") from exc

    offset = 16 + header_len
    loaded: dict[str, np.ndarray] = {}
    for spec in header["arrays"]:
        shape = tuple(spec["shape"])
        count = int(np.prod(shape)) if shape else 1
        nbytes = count * 4
        if offset + nbytes > len(blob):
            raise DataError(f"{path}: truncated checkpoint payload at {spec['name']}")
        arr = np.frombuffer(blob, dtype="<f4", count=count, offset=offset).reshape(shape)
        loaded[spec["name"]] = arr.astype(np.float64)
        offset += nbytes
    if offset != len(blob):
        raise DataError(f"{path}: trailing bytes after declared arrays")

    layers = [
        RgcnLayer(loaded[f"layer{i}_w_rel"], loaded[f"layer{i}_w_self"])
        for i in range(header.get("n_layers", 0))
    ]
    params = ModelParams(loaded["entity_emb"], loaded["relation_diag"], layers)

    scorer = None
    meta = header.get("scorer")
    if meta is not None:
        featurizer = PathFeaturizer(meta["feature_types"])
        scorer = ReasoningScorer(header["relations"], featurizer, meta["hidden"])
        if scorer.hidden:
            scorer.w1 = loaded["scorer_w1"]
            scorer.b1 = loaded["scorer_b1"]
            scorer.w2 = loaded["scorer_w2"]
            scorer.b2 = loaded["scorer_b2"]
        else:
            scorer.weights = loaded["scorer_weights"]
            scorer.bias = loaded["scorer_bias"]
    return Checkpoint(params, header["entities"], header["relations"],
                      header["config"], scorer)
