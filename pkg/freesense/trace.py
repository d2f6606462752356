"""CSI trace, segment and label types with their on-disk formats.

Binary trace layout (little-endian)::

    magic   4s   b"CSIT"
    version u16  1
    fs      f64  sample rate in Hz
    n_tx    u32
    n_rx    u32
    n_sub   u32  subcarriers per antenna pair
    n_frames u32
    body    f32[n_frames][n_tx*n_rx][n_sub]
"""

import io
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO, Iterable, List, Sequence, Union

import numpy as np
import pandas as pd

from .errors import DomainError, TraceFormatError

MAGIC = b"CSIT"
VERSION = 1
HEADER = struct.Struct("<4sHd4I")
HEADER_SIZE = HEADER.size  # 30 bytes
DIRECTIONS = ("ltr", "rtl")

SubjectId = str
TraceSource = Union[bytes, bytearray, BinaryIO, str, Path]


@dataclass(frozen=True, eq=False)
class CsiTrace:
    sample_rate_hz: float
    n_tx: int
    n_rx: int
    n_subcarriers: int
    frames: np.ndarray = field(repr=False)

    def __post_init__(self):
        if not (math.isfinite(self.sample_rate_hz) and self.sample_rate_hz > 0):
            raise DomainError(f"sample rate must be positive and finite, got {self.sample_rate_hz}")
        for name in ("n_tx", "n_rx", "n_subcarriers"):
            if int(getattr(self, name)) < 1:
                raise DomainError(f"{name} must be at least 1")
        frames = np.array(self.frames, dtype=np.float32, copy=True)
        if frames.size == 0:
            frames = frames.reshape(0, self.n_tx * self.n_rx, self.n_subcarriers)
        expected = (self.n_tx * self.n_rx, self.n_subcarriers)
        if frames.ndim != 3 or frames.shape[1:] != expected:
            raise DomainError(f"frames must have shape (n, {expected[0]}, {expected[1]}), got {frames.shape}")
        if not np.all(np.isfinite(frames)):
            raise DomainError("amplitudes must be finite")
        if np.any(frames < 0):
            raise DomainError("amplitudes must be nonnegative")
        frames.setflags(write=False)
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "sample_rate_hz", float(self.sample_rate_hz))

    @property
    def n_pairs(self) -> int:
        return self.n_tx * self.n_rx

    @property
    def n_streams(self) -> int:
        return self.n_pairs * self.n_subcarriers

    @property
    def n_frames(self) -> int:
        return int(self.frames.shape[0])

    @property
    def duration_s(self) -> float:
        return self.n_frames / self.sample_rate_hz

    def pair_matrix(self, pair: int) -> np.ndarray:
        """Frames x subcarriers for one TX-RX antenna pair."""
        return self.frames[:, pair, :]

    def streams(self) -> np.ndarray:
        return self.frames.reshape(self.n_frames, self.n_streams)

    def with_frames(self, frames: np.ndarray) -> "CsiTrace":
        return CsiTrace(self.sample_rate_hz, self.n_tx, self.n_rx, self.n_subcarriers, frames)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CsiTrace):
            return NotImplemented
        return (
            self.sample_rate_hz == other.sample_rate_hz
            and self.n_tx == other.n_tx
            and self.n_rx == other.n_rx
            and self.n_subcarriers == other.n_subcarriers
            and np.array_equal(self.frames, other.frames)
        )

    __hash__ = None


@dataclass(frozen=True, order=True)
class Segment:
    j_begin: int
    j_end: int

    def __post_init__(self):
        object.__setattr__(self, "j_begin", int(self.j_begin))
        object.__setattr__(self, "j_end", int(self.j_end))
        if not 0 <= self.j_begin < self.j_end:
            raise DomainError(f"invalid segment <{self.j_begin}, {self.j_end}>")

    @property
    def length(self) -> int:
        return self.j_end - self.j_begin

    def validate(self, n: int) -> "Segment":
        if self.j_end >= n:
            raise DomainError(f"segment <{self.j_begin}, {self.j_end}> exceeds trace length {n}")
        return self


@dataclass(frozen=True)
class SegmentLabel:
    segment: Segment
    subject: SubjectId
    direction: str = "ltr"

    def __post_init__(self):
        if not self.subject:
            raise DomainError("subject id must be nonempty")
        if self.direction not in DIRECTIONS:
            raise DomainError(f"direction must be one of {DIRECTIONS}, got {self.direction!r}")


def _read_bytes(source: TraceSource) -> bytes:
    if isinstance(source, (bytes, bytearray)):
        return bytes(source)
    if isinstance(source, (str, Path)):
        return Path(source).read_bytes()
    return source.read()


def read_trace(source: TraceSource) -> CsiTrace:
    data = _read_bytes(source)
    if len(data) < 4 or data[:4] != MAGIC:
        raise TraceFormatError("bad magic, expected b'CSIT'", offset=0)
    if len(data) < HEADER_SIZE:
        raise TraceFormatError("truncated header", offset=len(data))
    _, version, fs, n_tx, n_rx, n_sub, n_frames = HEADER.unpack_from(data, 0)
    if version != VERSION:
        raise TraceFormatError(f"unsupported version {version}", offset=4)
    if not (math.isfinite(fs) and fs > 0):
        raise TraceFormatError(f"sample rate must be positive and finite, got {fs}", offset=6)
    for offset, name, value in ((14, "n_tx", n_tx), (18, "n_rx", n_rx), (22, "n_subcarriers", n_sub)):
        if value == 0:
            raise TraceFormatError(f"{name} must be nonzero", offset=offset)

    frame_bytes = 4 * n_tx * n_rx * n_sub
    body = memoryview(data)[HEADER_SIZE:]
    declared = frame_bytes * n_frames
    if len(body) < declared:
        complete = len(body) // frame_bytes
        raise TraceFormatError(
            f"body holds {complete} complete frames, header declares {n_frames}",
            offset=HEADER_SIZE + complete * frame_bytes,
        )
    if len(body) > declared:
        raise TraceFormatError("trailing bytes after declared body", offset=HEADER_SIZE + declared)

    values = np.frombuffer(body, dtype="<f4", count=n_frames * n_tx * n_rx * n_sub)
    bad = ~np.isfinite(values) | (values < 0)
    if bad.any():
        index = int(np.argmax(bad))
        raise TraceFormatError(f"invalid amplitude {values[index]!r}", offset=HEADER_SIZE + 4 * index)
    frames = values.astype(np.float32).reshape(n_frames, n_tx * n_rx, n_sub)
    return CsiTrace(fs, n_tx, n_rx, n_sub, frames)


def write_trace(trace: CsiTrace) -> bytes:
    header = HEADER.pack(
        MAGIC, VERSION, trace.sample_rate_hz, trace.n_tx, trace.n_rx, trace.n_subcarriers, trace.n_frames
    )
    return header + np.ascontiguousarray(trace.frames, dtype="<f4").tobytes()


def save_trace(trace: CsiTrace, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(write_trace(trace))
    return path


def load_trace(path: Union[str, Path]) -> CsiTrace:
    path = Path(path)
    if path.suffix == ".csv":
        return trace_from_csv(path)
    return read_trace(path)


def trace_to_csv(trace: CsiTrace, path: Union[str, Path, None] = None) -> str:
    n, pairs, subs = trace.frames.shape
    t, pair, sub = np.meshgrid(np.arange(n), np.arange(pairs), np.arange(subs), indexing="ij")
    df = pd.DataFrame(
        {
            "t": t.ravel(),
            "pair": pair.ravel(),
            "subcarrier": sub.ravel(),
            "amplitude": trace.frames.ravel().astype(np.float32),
        }
    )
    buf = io.StringIO()
    buf.write(
        f"# fs={trace.sample_rate_hz!r},n_tx={trace.n_tx},n_rx={trace.n_rx},"
        f"n_subcarriers={trace.n_subcarriers}\n"
    )
    df.to_csv(buf, index=False, lineterminator="\n")
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


CSV_SHAPE_KEYS = ("fs", "n_tx", "n_rx", "n_subcarriers")
CSV_COLUMNS = ["t", "pair", "subcarrier", "amplitude"]


def _csv_shape(first: str):
    try:
        meta = dict(item.strip().split("=", 1) for item in first.lstrip("# ").split(","))
        fs = float(meta["fs"])
        n_tx, n_rx, n_sub = int(meta["n_tx"]), int(meta["n_rx"]), int(meta["n_subcarriers"])
    except (KeyError, ValueError) as exc:
        raise TraceFormatError(f"malformed shape line {first!r}, expected keys {list(CSV_SHAPE_KEYS)}", 0) from exc
    if not fs > 0 or min(n_tx, n_rx, n_sub) < 1:
        raise TraceFormatError(f"shape line {first!r} has non-positive values", 0)
    return fs, n_tx, n_rx, n_sub


def trace_from_csv(source: Union[str, Path, io.StringIO]) -> CsiTrace:
    """Parse the long-form CSV; every (t, pair, subcarrier) cell must appear exactly once."""
    text = Path(source).read_text() if isinstance(source, (str, Path)) else source.read()
    first, _, rest = text.partition("\n")
    if not first.startswith("#"):
        raise TraceFormatError("trace CSV must start with a '# fs=...' shape line", 0)
    fs, n_tx, n_rx, n_sub = _csv_shape(first)
    body_offset = len(first.encode("utf-8")) + 1
    try:
        df = pd.read_csv(io.StringIO(rest), dtype={"amplitude": np.float64})
    except (ValueError, pd.errors.ParserError) as exc:
        raise TraceFormatError(f"unreadable trace CSV body: {exc}", body_offset) from exc
    if list(df.columns) != CSV_COLUMNS:
        raise TraceFormatError(f"trace CSV columns must be {CSV_COLUMNS}, got {list(df.columns)}", body_offset)
    index = df[CSV_COLUMNS[:3]]
    integral = all(pd.api.types.is_integer_dtype(index[c]) for c in index.columns)
    if len(df) and not integral:
        raise TraceFormatError("t, pair and subcarrier must be integers", body_offset)
    n_pairs = n_tx * n_rx
    t, pair, sub = (index[c].to_numpy(dtype=np.int64) for c in CSV_COLUMNS[:3])
    in_range = (t >= 0) & (pair >= 0) & (pair < n_pairs) & (sub >= 0) & (sub < n_sub)
    if not in_range.all():
        raise TraceFormatError(f"row index outside {n_pairs} pairs x {n_sub} subcarriers", body_offset)
    n_frames = int(t.max()) + 1 if len(df) else 0
    if len(df) != n_frames * n_pairs * n_sub or index.duplicated().any():
        raise TraceFormatError(
            f"expected {n_frames * n_pairs * n_sub} distinct rows for {n_frames} frames, got {len(df)}", body_offset
        )
    frames = np.empty((n_frames, n_pairs, n_sub), dtype=np.float32)
    frames[t, pair, sub] = df["amplitude"].to_numpy().astype(np.float32)
    return CsiTrace(fs, n_tx, n_rx, n_sub, frames)


LABEL_COLUMNS = ["j_begin", "j_end", "subject", "direction"]


def write_labels(labels: Iterable[SegmentLabel], path: Union[str, Path]) -> Path:
    rows = [
        {"j_begin": l.segment.j_begin, "j_end": l.segment.j_end, "subject": l.subject, "direction": l.direction}
        for l in labels
    ]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(rows, columns=LABEL_COLUMNS).to_csv(path, index=False, lineterminator="\n")
    return path


def read_labels(path: Union[str, Path]) -> List[SegmentLabel]:
    df = pd.read_csv(path, dtype={"subject": str})
    missing = {"j_begin", "j_end", "subject"} - set(df.columns)
    if missing:
        raise DomainError(f"{path}: label file lacks columns {sorted(missing)}")
    directions = df["direction"] if "direction" in df.columns else ["ltr"] * len(df)
    return [
        SegmentLabel(Segment(int(b), int(e)), str(s), str(d))
        for b, e, s, d in zip(df["j_begin"], df["j_end"], df["subject"], directions)
    ]


def label_segments(labels: Sequence[SegmentLabel]) -> List[Segment]:
    return sorted(l.segment for l in labels)
