"""Shared JSON encoding.

A complex matrix is a list of rows, each entry a ``[re, im]`` pair.  Every
document carries ``"schema_version": 1``; a ``"type"`` field tells the
decoders apart (a document with ``"effects"`` and no type is a POVM)::

    {"schema_version": 1, "type": "povm", "dim": d, "outcomes": [...],
     "effects": [matrix, ...]}
    {"schema_version": 1, "type": "state", "dim": d, "matrix": matrix}
    {"schema_version": 1, "type": "kernel", "outcomes": [...], "entries": [[p_ij, ...], ...]}
    {"schema_version": 1, "type": "channel", "input_dim": d_in, "output_dim": d_out, "kraus": [matrix, ...]}
    {"schema_version": 1, "type": "instrument", "input_dim": d, "output_dim": d_out,
     "outcomes": [...], "operations": {label: [matrix, ...]}}
    {"schema_version": 1, "type": "joint", "dim": d, "row_outcomes": [...], "col_outcomes": [...],
     "effects": [[matrix, ...], ...]}
    {"schema_version": 1, "type": "dilation", "dim": d, "total_dim": D, "outcomes": [...],
     "multiplicities": [...], "isometry": matrix, "cutoffs": [...]}

Python's float repr round-trips doubles exactly, so decode(encode(x)) == x
bit for bit.
"""
from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any

import numpy as np

from .dilation import NaimarkDilation
from .errors import ParseError
from .instrument import Instrument, JointObservable
from .numerics import DEFAULT_TOL, Tolerances
from .observable import DiscretePovm, State
from .process import KrausChannel, MarkovMatrix

SCHEMA_VERSION = 1

__all__ = [
    "SCHEMA_VERSION",
    "encode_matrix",
    "decode_matrix",
    "encode",
    "decode",
    "dumps",
    "load_document",
    "read",
    "write",
]


def encode_matrix(a: np.ndarray) -> list:
    a = np.asarray(a, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in a]


def decode_matrix(data: Any, shape: tuple[int, int] | None = None) -> np.ndarray:
    try:
        arr = np.array(data, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"malformed matrix: {exc}") from None
    if arr.ndim != 3 or arr.shape[2] != 2:
        raise ParseError(f"matrix must be rows of [re, im] pairs, got array of shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ParseError("matrix has non-finite entries")
    out = arr[..., 0] + 1j * arr[..., 1]
    if shape is not None and out.shape != shape:
        raise ParseError(f"matrix has shape {out.shape}, expected {shape}")
    return out


def _header(kind: str) -> dict:
    return {"schema_version": SCHEMA_VERSION, "type": kind}


def encode(obj) -> dict:
    """Encode a package object into a JSON-ready dict."""
    if isinstance(obj, DiscretePovm):
        return {
            **_header("povm"),
            "dim": obj.dim,
            "outcomes": list(obj.labels),
            "effects": [encode_matrix(e) for e in obj.effects],
        }
    if isinstance(obj, State):
        return {**_header("state"), "dim": obj.dim, "matrix": encode_matrix(obj.matrix)}
    if isinstance(obj, MarkovMatrix):
        return {
            **_header("kernel"),
            "outcomes": list(obj.output_labels),
            "entries": [[float(x) for x in row] for row in obj.entries],
        }
    if isinstance(obj, KrausChannel):
        return {
            **_header("channel"),
            "input_dim": obj.input_dim,
            "output_dim": obj.output_dim,
            "kraus": [encode_matrix(k) for k in obj.kraus],
        }
    if isinstance(obj, Instrument):
        return {
            **_header("instrument"),
            "input_dim": obj.input_dim,
            "output_dim": obj.output_dim,
            "outcomes": list(obj.labels),
            "operations": {lab: [encode_matrix(k) for k in ks] for lab, ks in zip(obj.labels, obj.kraus)},
        }
    if isinstance(obj, JointObservable):
        return {
            **_header("joint"),
            "dim": obj.dim,
            "row_outcomes": list(obj.row_labels),
            "col_outcomes": list(obj.col_labels),
            "effects": [[encode_matrix(e) for e in row] for row in obj.grid],
        }
    if isinstance(obj, NaimarkDilation):
        return {
            **_header("dilation"),
            "dim": obj.dim,
            "total_dim": obj.total_dim,
            "outcomes": list(obj.labels),
            "multiplicities": list(obj.multiplicities),
            "isometry": encode_matrix(obj.isometry),
            "cutoffs": [float(c) for c in obj.cutoffs],
        }
    raise TypeError(f"cannot encode {type(obj).__name__}")


def _require(doc: dict, key: str):
    if key not in doc:
        raise ParseError(f"missing field {key!r}")
    return doc[key]


def _labels(doc: dict, key: str, count: int) -> list[str]:
    labels = doc.get(key)
    if labels is None:
        return [str(i + 1) for i in range(count)]
    if not isinstance(labels, list) or not all(isinstance(x, str) for x in labels):
        raise ParseError(f"{key!r} must be a list of strings")
    if len(labels) != count:
        raise ParseError(f"{len(labels)} labels in {key!r} for {count} entries")
    return labels


def decode(doc: Any, tol: Tolerances = DEFAULT_TOL):
    """Decode a dict produced by :func:`encode` (or written by hand) into a package object.

    Structural problems raise :class:`ParseError`; mathematically invalid
    content (e.g. effects not summing to the identity) raises the domain
    error of the corresponding constructor.
    """
    if not isinstance(doc, dict):
        raise ParseError("document must be a JSON object")
    version = doc.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ParseError(f"unsupported schema_version {version!r}")
    kind = doc.get("type", "povm" if "effects" in doc else None)
    if kind == "povm":
        effects = _require(doc, "effects")
        if not isinstance(effects, list) or not effects:
            raise ParseError("'effects' must be a nonempty list")
        dim = doc.get("dim")
        shape = (dim, dim) if isinstance(dim, int) else None
        mats = [decode_matrix(e, shape) for e in effects]
        return DiscretePovm.from_effects(mats, _labels(doc, "outcomes", len(mats)), tol=tol)
    if kind == "state":
        dim = doc.get("dim")
        m = decode_matrix(_require(doc, "matrix"), (dim, dim) if isinstance(dim, int) else None)
        return State.from_matrix(m, tol)
    if kind == "kernel":
        entries = _require(doc, "entries")
        try:
            arr = np.array(entries, dtype=float)
        except (TypeError, ValueError) as exc:
            raise ParseError(f"malformed kernel: {exc}") from None
        if arr.ndim != 2:
            raise ParseError("kernel entries must be a 2-d array")
        return MarkovMatrix.from_array(arr, _labels(doc, "outcomes", arr.shape[1]), tol)
    if kind == "channel":
        kraus = _require(doc, "kraus")
        if not isinstance(kraus, list) or not kraus:
            raise ParseError("'kraus' must be a nonempty list")
        return KrausChannel.from_kraus([decode_matrix(k) for k in kraus])
    if kind == "instrument":
        labels = _require(doc, "outcomes")
        ops = _require(doc, "operations")
        if not isinstance(ops, dict) or not isinstance(labels, list):
            raise ParseError("'operations' must be an object keyed by outcome label")
        try:
            kraus = [np.stack([decode_matrix(k) for k in ops[lab]]) for lab in labels]
        except KeyError as exc:
            raise ParseError(f"no operation for outcome {exc}") from None
        except ValueError as exc:
            raise ParseError(f"malformed Kraus list: {exc}") from None
        return Instrument.from_kraus(kraus, labels, tol)
    if kind == "joint":
        rows = _require(doc, "effects")
        try:
            grid = np.array([[decode_matrix(e) for e in row] for row in rows])
        except ValueError as exc:
            raise ParseError(f"malformed joint grid: {exc}") from None
        if grid.ndim != 4:
            raise ParseError("joint effects must form a rectangular grid of square matrices")
        return JointObservable.from_grid(
            grid, _labels(doc, "row_outcomes", grid.shape[0]), _labels(doc, "col_outcomes", grid.shape[1]), tol
        )
    if kind == "dilation":
        raise ParseError("dilation documents are export-only; rebuild them from the POVM")
    raise ParseError(f"unknown document type {kind!r}")


def _sanitize(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {str(k): _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, np.generic):
        return _sanitize(obj.item())
    return obj


def dumps(doc: dict) -> str:
    """Deterministic JSON text (sorted keys, non-finite floats become null)."""
    return json.dumps(_sanitize(doc), indent=2, sort_keys=True, allow_nan=False) + "\n"


def load_document(path: str | Path) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc})") from None


def read(path: str | Path, tol: Tolerances = DEFAULT_TOL):
    return decode(load_document(path), tol)


def write(obj, path: str | Path) -> None:
    doc = obj if isinstance(obj, dict) else encode(obj)
    Path(path).write_text(dumps(doc), encoding="utf-8")
