"""Text file formats.

All numbers are written with ``repr``, Python's shortest round-trip decimal
encoding, so a write/read cycle reproduces every float bit for bit.

.qpts (quantized video)::

    QPTS 1 <R> <C> <T> <K>
    DICT <d_1> ... <d_K>
    <r> <c> <t> <k> <codeword>        one line per point

model (one EXMOVE)::

    EXMOVE 1
    id <exemplar id>
    dict <d_1> ... <d_K>
    extent <h> <w> <l>
    bias <b>
    platt <alpha> <beta>              or "platt none"
    meta <single-line JSON>
    nnz <n>
    <channel> <index> <value>         n sparse weight lines
    END

bank: ``EXBANK 1 <n_models>`` followed by n model blocks.

descriptors::

    EXDESC 1 <N_a> <N_s> <N_p>
    bank <bank id>
    <video id> <v_1> ... <v_{N_a*N_s*N_p}>
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .classifier import ActionClassifierBank
from .codebook import Codebook
from .core import QuantizedVideo, Volume
from .descriptor import ExmoveDescriptor
from .errors import DimensionError, FormatError, IncompatibleModelError
from .exemplar import ActiveEntry, ExMoveModel


def _f(x) -> str:
    return repr(float(x))


class _Lines:
    """Line reader that reports 1-based line numbers in errors."""

    def __init__(self, path):
        self.path = str(path)
        with open(path, encoding="utf-8") as fh:
            self.lines = fh.read().split("\n")
        if self.lines and self.lines[-1] == "":
            self.lines.pop()
        self.pos = 0

    def error(self, msg: str, lineno: int | None = None) -> FormatError:
        n = self.pos if lineno is None else lineno
        return FormatError(f"{self.path}:{n}: {msg}")

    def done(self) -> bool:
        return self.pos >= len(self.lines)

    def next(self, what: str) -> list[str]:
        if self.done():
            raise self.error(f"unexpected end of file, expected {what}", len(self.lines))
        line = self.lines[self.pos]
        self.pos += 1
        return line.split()

    def keyed(self, key: str) -> list[str]:
        toks = self.next(key)
        if not toks or toks[0] != key:
            raise self.error(f"expected '{key}' line")
        return toks[1:]

    def rest(self, key: str) -> str:
        """Remainder of a ``<key> <free text>`` line, whitespace preserved."""
        if self.done():
            raise self.error(f"unexpected end of file, expected '{key}'", len(self.lines))
        line = self.lines[self.pos]
        self.pos += 1
        head, _, tail = line.partition(" ")
        if head != key:
            raise self.error(f"expected '{key}' line")
        return tail

    def ints(self, toks: Sequence[str]) -> list[int]:
        try:
            return [int(t) for t in toks]
        except ValueError:
            raise self.error(f"expected integers, got {' '.join(toks)!r}") from None

    def floats(self, toks: Sequence[str]) -> list[float]:
        try:
            return [float(t) for t in toks]
        except ValueError:
            raise self.error(f"expected numbers, got {' '.join(toks)!r}") from None


# --- quantized videos -------------------------------------------------------


def write_qpts(path, video: QuantizedVideo) -> None:
    R, C, T = video.dims
    lines = [f"QPTS 1 {R} {C} {T} {video.n_channels}",
             "DICT " + " ".join(str(d) for d in video.codebook_sizes)]
    lines += [" ".join(str(int(v)) for v in row) for row in video.points]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_qpts(path, video_id: str | None = None) -> QuantizedVideo:
    r = _Lines(path)
    head = r.next("QPTS header")
    if len(head) != 6 or head[0] != "QPTS":
        raise r.error("malformed header, expected 'QPTS 1 <R> <C> <T> <K>'")
    if head[1] != "1":
        raise r.error(f"unknown QPTS version {head[1]}")
    R, C, T, K = r.ints(head[2:])
    if min(R, C, T, K) < 1:
        raise r.error("dims and channel count must be positive")
    sizes = r.ints(r.keyed("DICT"))
    if len(sizes) != K or min(sizes) < 1:
        raise r.error(f"DICT must list {K} positive codebook sizes")
    dims = (R, C, T)
    rows = []
    while not r.done():
        toks = r.next("point")
        if not toks:
            continue
        if len(toks) != 5:
            raise r.error("point line needs 5 integers: r c t k codeword")
        p = r.ints(toks)
        if not all(0 <= p[a] < dims[a] for a in range(3)):
            raise r.error(f"point {p[:3]} outside video dims {dims}")
        if not 0 <= p[3] < K:
            raise r.error(f"channel {p[3]} outside [0, {K})")
        if not 0 <= p[4] < sizes[p[3]]:
            raise r.error(f"codeword {p[4]} outside [0, {sizes[p[3]]}) for channel {p[3]}")
        rows.append(p)
    vid = video_id if video_id is not None else Path(path).stem
    return QuantizedVideo(dims, tuple(sizes), np.asarray(rows, dtype=np.int64).reshape(-1, 5), vid)


# --- raw low-level features -------------------------------------------------


def read_features(path):
    """Raw descriptor vectors with (possibly fractional) positions.

    Format: ``FEAT 1 <R> <C> <T> <K>``, ``DIMS <dim_1> ... <dim_K>``, then
    ``<r> <c> <t> <k> <v_1> ... <v_dim_k>`` per vector. Positions are floored
    to voxels. Returns (dims, per-channel vector dims, xyz (N,3), channel (N,),
    list of per-channel (row indices, vectors)).
    """
    r = _Lines(path)
    head = r.next("FEAT header")
    if len(head) != 6 or head[0] != "FEAT" or head[1] != "1":
        raise r.error("malformed header, expected 'FEAT 1 <R> <C> <T> <K>'")
    R, C, T, K = r.ints(head[2:])
    vdims = r.ints(r.keyed("DIMS"))
    if len(vdims) != K:
        raise r.error(f"DIMS must list {K} vector lengths")
    xyz, chan, vecs = [], [], [[] for _ in range(K)]
    rows = [[] for _ in range(K)]
    while not r.done():
        toks = r.next("feature")
        if not toks:
            continue
        vals = r.floats(toks)
        if len(vals) < 4:
            raise r.error("feature line too short")
        pos = [int(np.floor(v)) for v in vals[:3]]
        k = int(vals[3])
        if not 0 <= k < K or vals[3] != k:
            raise r.error(f"channel {vals[3]} outside [0, {K})")
        if not all(0 <= pos[a] < d for a, d in enumerate((R, C, T))):
            raise r.error(f"position {vals[:3]} outside video dims {(R, C, T)}")
        if len(vals) - 4 != vdims[k]:
            raise r.error(f"channel {k} vectors have {vdims[k]} values, got {len(vals) - 4}")
        rows[k].append(len(xyz))
        xyz.append(pos)
        chan.append(k)
        vecs[k].append(vals[4:])
    per_channel = [
        (np.asarray(rows[k], dtype=np.int64), np.asarray(vecs[k], dtype=np.float64).reshape(-1, vdims[k]))
        for k in range(K)
    ]
    return (R, C, T), vdims, np.asarray(xyz, dtype=np.int64).reshape(-1, 3), np.asarray(chan, dtype=np.int64), per_channel


# --- models and banks -------------------------------------------------------


def _model_lines(m: ExMoveModel) -> list[str]:
    lines = ["EXMOVE 1", f"id {m.exemplar_id}",
             "dict " + " ".join(str(d) for d in m.codebook_sizes),
             "extent " + " ".join(str(e) for e in m.exemplar_extent),
             f"bias {_f(m.bias)}",
             "platt none" if m.platt is None else f"platt {_f(m.platt[0])} {_f(m.platt[1])}",
             "meta " + json.dumps(m.training_meta, sort_keys=True)]
    entries = [(k, j, v) for k, w in enumerate(m.weights) for j, v in enumerate(w) if v != 0.0]
    lines.append(f"nnz {len(entries)}")
    lines += [f"{k} {j} {_f(v)}" for k, j, v in entries]
    lines.append("END")
    return lines


def _read_model(r: _Lines) -> ExMoveModel:
    head = r.next("EXMOVE header")
    if head != ["EXMOVE", "1"]:
        raise r.error("expected 'EXMOVE 1'")
    ident = r.rest("id")
    sizes = r.ints(r.keyed("dict"))
    extent = r.ints(r.keyed("extent"))
    if len(extent) != 3 or min(extent) < 1:
        raise r.error("extent needs 3 positive integers")
    (bias,) = r.floats(r.keyed("bias"))
    pl = r.keyed("platt")
    platt = None if pl == ["none"] else tuple(r.floats(pl))
    if platt is not None and len(platt) != 2:
        raise r.error("platt needs two numbers or 'none'")
    try:
        meta = json.loads(r.rest("meta"))
    except json.JSONDecodeError as exc:
        raise r.error(f"bad meta JSON: {exc.msg}") from None
    (nnz,) = r.ints(r.keyed("nnz"))
    weights = [np.zeros(d) for d in sizes]
    for _ in range(nnz):
        toks = r.next("weight")
        if len(toks) != 3:
            raise r.error("weight line needs '<channel> <index> <value>'")
        k, j = r.ints(toks[:2])
        if not (0 <= k < len(sizes) and 0 <= j < sizes[k]):
            raise r.error(f"weight index ({k}, {j}) outside dict {sizes}")
        weights[k][j] = r.floats(toks[2:])[0]
    if r.next("END") != ["END"]:
        raise r.error("expected 'END'")
    return ExMoveModel(tuple(weights), bias, tuple(extent), platt, ident, meta)


def write_model(path, model: ExMoveModel) -> None:
    Path(path).write_text("\n".join(_model_lines(model)) + "\n", encoding="utf-8")


def read_model(path) -> ExMoveModel:
    r = _Lines(path)
    m = _read_model(r)
    if not r.done():
        raise r.error("trailing content after model", r.pos + 1)
    return m


def _check_bank(models: Sequence[ExMoveModel]) -> None:
    if not models:
        return
    sizes = models[0].codebook_sizes
    for m in models[1:]:
        if m.codebook_sizes != sizes:
            raise IncompatibleModelError(
                f"bank mixes codebook sizes {sizes} and {m.codebook_sizes} (model {m.exemplar_id!r})"
            )


def write_bank(path, models: Sequence[ExMoveModel]) -> None:
    _check_bank(models)
    lines = [f"EXBANK 1 {len(models)}"]
    for m in models:
        lines += _model_lines(m)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_bank(path) -> list[ExMoveModel]:
    r = _Lines(path)
    head = r.next("EXBANK header")
    if len(head) != 3 or head[:2] != ["EXBANK", "1"]:
        raise r.error("expected 'EXBANK 1 <n_models>'")
    (n,) = r.ints(head[2:])
    models = [_read_model(r) for _ in range(n)]
    if not r.done():
        raise r.error("bank holds more models than its header declares", r.pos + 1)
    try:
        _check_bank(models)
    except IncompatibleModelError as exc:
        raise FormatError(f"{path}: {exc}") from None
    return models


# --- active sets ------------------------------------------------------------


def write_active(path, entries: Iterable[ActiveEntry]) -> None:
    entries = list(entries)
    lines = [f"EXACTIVE 1 {len(entries)}"]
    for e in entries:
        lines.append(" ".join(str(v) for v in (e.label, *e.volume.origin, *e.volume.extent)) + f" {e.video_id}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_active(path) -> list[tuple[str, Volume, int]]:
    r = _Lines(path)
    head = r.next("EXACTIVE header")
    if len(head) != 3 or head[:2] != ["EXACTIVE", "1"]:
        raise r.error("expected 'EXACTIVE 1 <n>'")
    (n,) = r.ints(head[2:])
    out = []
    for _ in range(n):
        r.next("active entry")
        toks = r.lines[r.pos - 1].split(maxsplit=7)
        if len(toks) != 8:
            raise r.error("active entry needs '<label> <r0> <c0> <t0> <h> <w> <l> <video id>'")
        vals = r.ints(toks[:7])
        if vals[0] not in (1, -1):
            raise r.error("label must be 1 or -1")
        try:
            vol = Volume(vals[1:4], vals[4:7])
        except DimensionError as exc:
            raise r.error(str(exc)) from None
        out.append((toks[7], vol, vals[0]))
    return out


# --- descriptors ------------------------------------------------------------


def write_descriptors(path, descriptors: Sequence[ExmoveDescriptor], layout=None, bank_id: str = "") -> None:
    if layout is None:
        if not descriptors:
            raise ValueError("cannot infer layout from an empty descriptor list")
        layout = descriptors[0].layout
    n = int(np.prod(layout))
    bank_id = bank_id or (descriptors[0].bank_id if descriptors else "")
    lines = ["EXDESC 1 " + " ".join(str(v) for v in layout), f"bank {bank_id}"]
    for d in descriptors:
        if len(d.values) != n:
            raise DimensionError(f"descriptor for {d.video_id!r} has length {len(d.values)}, layout needs {n}")
        if not d.video_id or any(ch.isspace() for ch in d.video_id):
            raise FormatError(f"video id {d.video_id!r} must be non-empty without whitespace")
        lines.append(d.video_id + " " + " ".join(_f(v) for v in d.values))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_descriptors(path, expected_layout=None) -> list[ExmoveDescriptor]:
    r = _Lines(path)
    head = r.next("EXDESC header")
    if len(head) != 5 or head[:2] != ["EXDESC", "1"]:
        raise r.error("expected 'EXDESC 1 <N_a> <N_s> <N_p>'")
    layout = tuple(r.ints(head[2:]))
    if expected_layout is not None and tuple(expected_layout) != layout:
        raise r.error(f"declared layout {layout} does not match expected {tuple(expected_layout)}")
    bank_id = r.rest("bank")
    n = int(np.prod(layout))
    out = []
    while not r.done():
        toks = r.next("descriptor")
        if not toks:
            continue
        if len(toks) - 1 != n:
            raise r.error(f"descriptor has {len(toks) - 1} values, layout {layout} needs {n}")
        out.append(ExmoveDescriptor(np.asarray(r.floats(toks[1:])), layout, bank_id, toks[0]))
    return out


# --- codebooks --------------------------------------------------------------


def write_codebook(path, cb: Codebook) -> None:
    meta = {k: v for k, v in cb.meta.items() if k != "labels"}
    lines = [f"CODEBOOK 1 {cb.channel} {cb.size} {cb.dimension}", "meta " + json.dumps(meta, sort_keys=True)]
    lines += [" ".join(_f(v) for v in row) for row in cb.centroids]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_codebook(path) -> Codebook:
    r = _Lines(path)
    head = r.next("CODEBOOK header")
    if len(head) != 5 or head[:2] != ["CODEBOOK", "1"]:
        raise r.error("expected 'CODEBOOK 1 <channel> <size> <dim>'")
    channel, size, dim = r.ints(head[2:])
    meta = json.loads(r.rest("meta"))
    rows = []
    for _ in range(size):
        vals = r.floats(r.next("centroid"))
        if len(vals) != dim:
            raise r.error(f"centroid has {len(vals)} values, expected {dim}")
        rows.append(vals)
    return Codebook(np.asarray(rows), channel, meta)


# --- action classifiers -----------------------------------------------------


def write_classifier(path, bank: ActionClassifierBank) -> None:
    lines = [f"EXCLF 1 {len(bank.classes)} {bank.dim}", f"C {_f(bank.C)}",
             "meta " + json.dumps(bank.training_meta, sort_keys=True)]
    for cls, w, b in zip(bank.classes, bank.weights, bank.biases):
        lines += [f"class {cls}", f"bias {_f(b)}", "w " + " ".join(_f(v) for v in w)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_classifier(path) -> ActionClassifierBank:
    r = _Lines(path)
    head = r.next("EXCLF header")
    if len(head) != 4 or head[:2] != ["EXCLF", "1"]:
        raise r.error("expected 'EXCLF 1 <n_classes> <dim>'")
    k, dim = r.ints(head[2:])
    (C,) = r.floats(r.keyed("C"))
    meta = json.loads(r.rest("meta"))
    classes, W, b = [], [], []
    for _ in range(k):
        (cls,) = r.keyed("class")
        classes.append(cls)
        b.append(r.floats(r.keyed("bias"))[0])
        w = r.floats(r.keyed("w"))
        if len(w) != dim:
            raise r.error(f"weight vector has {len(w)} values, expected {dim}")
        W.append(w)
    return ActionClassifierBank(tuple(classes), np.asarray(W), np.asarray(b), C, meta)


# --- manifests --------------------------------------------------------------


def write_manifest(path, entries: list[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"version": 1, "videos": entries}, fh, indent=1, sort_keys=True)
        fh.write("\n")


def read_manifest(path) -> list[dict]:
    """Video list: id, path (relative to the manifest), label, split, optional volume/exemplar."""
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from None
    if data.get("version") != 1 or not isinstance(data.get("videos"), list):
        raise FormatError(f"{path}: expected a version-1 manifest with a 'videos' list")
    base = Path(path).parent
    out = []
    for i, e in enumerate(data["videos"]):
        for key in ("id", "path", "label"):
            if key not in e:
                raise FormatError(f"{path}: video #{i} lacks '{key}'")
        e = dict(e)
        e["path"] = str(base / e["path"])
        e.setdefault("split", "train")
        e.setdefault("exemplar", False)
        e.setdefault("volume", None)
        out.append(e)
    return out
