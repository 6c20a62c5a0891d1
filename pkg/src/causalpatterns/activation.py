"""Signals, normalization, and bit-packed activation masks.

An activation mask stores one bit per (node, step) pair: bit ``t`` of row
``i`` lives in 64-bit little-endian word ``t // 64`` at position ``t % 64``.
Padding bits past step T-1 are always zero, so population counts and bitwise
algebra over whole rows are exact.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .graph import EdgeEvents, SpatialGraph

WORD_BITS = 64
MASK_MAGIC = b"CMGM"
MASK_FORMAT_VERSION = 1

NORM_NONE = "none"
NORM_PER_NODE = "zscore_per_node"
NORM_GLOBAL = "zscore_global"


def words_per_row(num_steps: int) -> int:
    return max(1, -(-num_steps // WORD_BITS))


def pack_bits(dense: np.ndarray) -> np.ndarray:
    """Pack a boolean (R, T) matrix into (R, ceil(T/64)) little-endian words."""
    dense = np.asarray(dense, dtype=bool)
    rows, steps = dense.shape
    nwords = words_per_row(steps)
    padded = np.zeros((rows, nwords * WORD_BITS), dtype=np.uint8)
    padded[:, :steps] = dense
    packed = np.packbits(padded, axis=1, bitorder="little")
    return packed.view("<u8").reshape(rows, nwords)


def unpack_bits(words: np.ndarray, num_steps: int) -> np.ndarray:
    """Inverse of :func:`pack_bits`; returns a boolean (R, T) matrix."""
    rows = words.shape[0]
    as_bytes = np.ascontiguousarray(words, dtype="<u8").view(np.uint8).reshape(rows, -1)
    bits = np.unpackbits(as_bytes, axis=1, bitorder="little", count=num_steps)
    return bits.astype(bool)


def popcount_words(words: np.ndarray) -> int:
    return int(np.bitwise_count(words).sum())


@dataclass(frozen=True)
class SignalMatrix:
    """Real-valued N x T matrix; row i is the time series of node i."""

    values: np.ndarray
    normalization: str = NORM_NONE

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise ValidationError(f"signal must be 2-D, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValidationError("signal contains non-finite entries")
        object.__setattr__(self, "values", values)

    @property
    def num_nodes(self) -> int:
        return self.values.shape[0]

    @property
    def num_steps(self) -> int:
        return self.values.shape[1]


def zscore(signal: SignalMatrix, scope: str = "per_node") -> SignalMatrix:
    """Standardize the signal with the population standard deviation.

    ``per_node`` standardizes each row independently; constant rows map to
    all-zero. ``global`` standardizes the matrix as a whole.
    """
    values = signal.values
    if scope == "per_node":
        mean = values.mean(axis=1, keepdims=True)
        std = values.std(axis=1, keepdims=True)
        out = np.where(std > 0, (values - mean) / np.where(std > 0, std, 1.0), 0.0)
        norm = NORM_PER_NODE
    elif scope == "global":
        std = values.std()
        out = (values - values.mean()) / std if std > 0 else np.zeros_like(values)
        norm = NORM_GLOBAL
    else:
        raise ValidationError(f"unknown zscore scope {scope!r}")
    return SignalMatrix(values=out, normalization=norm)


@dataclass(frozen=True)
class ActivationMask:
    """Bit-packed N x T binary activity matrix."""

    words: np.ndarray          # (N, ceil(T/64)) uint64
    num_steps: int
    threshold_used: float | None = None
    normalization_used: str = NORM_NONE

    @property
    def num_nodes(self) -> int:
        return self.words.shape[0]

    @property
    def num_words(self) -> int:
        return self.words.shape[1]

    def get(self, node: int, step: int) -> bool:
        word = int(self.words[node, step // WORD_BITS])
        return bool((word >> (step % WORD_BITS)) & 1)

    def to_dense(self) -> np.ndarray:
        return unpack_bits(self.words, self.num_steps)

    def popcount(self) -> int:
        return popcount_words(self.words)

    def density(self) -> float:
        cells = self.num_nodes * self.num_steps
        return self.popcount() / cells if cells else 0.0

    @classmethod
    def from_dense(cls, dense: np.ndarray, **meta) -> "ActivationMask":
        dense = np.asarray(dense, dtype=bool)
        return cls(words=pack_bits(dense), num_steps=dense.shape[1], **meta)


def threshold(signal: SignalMatrix, mu: float) -> ActivationMask:
    """Binarize the signal: active iff the value strictly exceeds ``mu``."""
    mu = float(mu)
    if np.isnan(mu):
        raise ValidationError("threshold must not be NaN")
    dense = signal.values > mu
    return ActivationMask(
        words=pack_bits(dense),
        num_steps=signal.num_steps,
        threshold_used=mu,
        normalization_used=signal.normalization,
    )


@dataclass(frozen=True)
class EdgeMask:
    """Per-edge existence bits; row k matches row k of the companion graph's edges."""

    words: np.ndarray          # (E, ceil(T/64)) uint64
    num_steps: int

    @property
    def num_edges(self) -> int:
        return self.words.shape[0]

    def to_dense(self) -> np.ndarray:
        return unpack_bits(self.words, self.num_steps)


def build_edge_mask(events: EdgeEvents, graph: SpatialGraph) -> EdgeMask:
    """Set bit t of edge (src, dst) for every event; orientation is canonical."""
    steps = events.num_steps
    dense = np.zeros((graph.num_edges, steps), dtype=bool)
    for s, d, t in events.events:
        pos = graph.edge_position(int(s), int(d))
        if pos < 0:
            raise ValidationError(f"event ({s},{d},{t}) references a non-edge")
        dense[pos, t] = True
    return EdgeMask(words=pack_bits(dense), num_steps=steps)


def edge_mask_all_ones(graph: SpatialGraph, num_steps: int) -> EdgeMask:
    """Edge mask asserting every spatial edge exists at every step."""
    return EdgeMask(words=pack_bits(np.ones((graph.num_edges, num_steps), dtype=bool)),
                    num_steps=num_steps)


def write_mask(mask: ActivationMask, path) -> None:
    """Serialize to the binary mask format (magic, version, N, T, packed rows)."""
    with open(path, "wb") as fh:
        fh.write(MASK_MAGIC)
        fh.write(struct.pack("<I", MASK_FORMAT_VERSION))
        fh.write(struct.pack("<QQ", mask.num_nodes, mask.num_steps))
        fh.write(np.ascontiguousarray(mask.words, dtype="<u8").tobytes())


def read_mask(path) -> ActivationMask:
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"mask file not found: {path}")
    raw = path.read_bytes()
    if raw[:4] != MASK_MAGIC:
        raise ValidationError(f"{path}: bad magic, not a mask file")
    (version,) = struct.unpack_from("<I", raw, 4)
    if version != MASK_FORMAT_VERSION:
        raise ValidationError(f"{path}: unsupported mask format version {version}")
    num_nodes, num_steps = struct.unpack_from("<QQ", raw, 8)
    nwords = words_per_row(num_steps)
    body = raw[24:]
    expected = num_nodes * nwords * 8
    if len(body) != expected:
        raise ValidationError(f"{path}: truncated mask body ({len(body)} != {expected} bytes)")
    words = np.frombuffer(body, dtype="<u8").reshape(num_nodes, nwords).copy()
    mask = ActivationMask(words=words, num_steps=int(num_steps))
    validate_mask_padding(mask)
    return mask


def validate_mask_padding(mask: ActivationMask) -> None:
    """Reject masks whose padding bits past step T-1 are not zero."""
    steps = mask.num_steps
    nwords = mask.num_words
    tail_bits = nwords * WORD_BITS - steps
    if tail_bits == 0:
        return
    tail = mask.words[:, -1] >> np.uint64(WORD_BITS - tail_bits)
    if np.any(tail != 0):
        raise ValidationError("mask has non-zero padding bits past the last step")


def read_signal_csv(path, graph: SpatialGraph) -> SignalMatrix:
    """Read a wide signal CSV (header ``node,t0,t1,...``), row-aligned to graph indices."""
    import csv

    path = Path(path)
    if not path.exists():
        raise ValidationError(f"signal file not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        rows = [(no, r) for no, r in enumerate(reader, start=1)
                if r and not r[0].lstrip().startswith("#")]
    if not rows:
        raise ValidationError(f"{path}: empty signal file")
    header = rows[0][1]
    if header[0].strip().lower() != "node":
        raise ValidationError(f"{path}: expected header 'node,t0,t1,...'")
    num_steps = len(header) - 1
    values = np.zeros((graph.num_nodes, num_steps))
    filled = np.zeros(graph.num_nodes, dtype=bool)
    for line_no, row in rows[1:]:
        if len(row) != num_steps + 1:
            raise ValidationError(f"{path} line {line_no}: expected {num_steps + 1} fields")
        idx = graph.index_of(row[0].strip())
        if filled[idx]:
            raise ValidationError(f"{path} line {line_no}: duplicate row for node {row[0]!r}")
        try:
            values[idx] = [float(v) for v in row[1:]]
        except ValueError:
            raise ValidationError(f"{path} line {line_no}: non-numeric signal value") from None
        filled[idx] = True
    if not filled.all():
        missing = graph.id_of(int(np.flatnonzero(~filled)[0]))
        raise ValidationError(f"{path}: no signal row for node {missing!r}")
    return SignalMatrix(values=values)


def write_signal_csv(signal: SignalMatrix, graph: SpatialGraph, path) -> None:
    import csv

    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh)
        out.writerow(["node"] + [f"t{t}" for t in range(signal.num_steps)])
        for i in range(signal.num_nodes):
            out.writerow([graph.id_of(i)] + [repr(float(v)) for v in signal.values[i]])


def with_metadata(mask: ActivationMask, **meta) -> ActivationMask:
    return replace(mask, **meta)
