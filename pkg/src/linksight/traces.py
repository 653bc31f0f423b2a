"""RSSI trace data model, trace-file I/O and synthetic normal traces.

Trace files are plain ASCII, one ``seq,rssi`` record per line, with
``#``-prefixed ``key=value`` header lines::

    # id=n1-n7-l2
    # src=1
    # dst=7
    # noise=2
    # label=None
    0,41
    1,40
    ...
"""
from __future__ import annotations

import enum
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ._seeding import derive_seed

RSSI_FLOOR = 0
RSSI_CEIL = 127
DEFAULT_LENGTH = 300


class AnomalyKind(str, enum.Enum):
    NONE = "None"
    SUDDEN_D = "SuddenD"
    SUDDEN_R = "SuddenR"
    INSTA_D = "InstaD"
    SLOW_D = "SlowD"

    @property
    def index(self) -> int:
        return CLASS_ORDER.index(self)

    @classmethod
    def parse(cls, text: str) -> "AnomalyKind":
        try:
            return cls(text)
        except ValueError:
            raise ValueError(f"unknown anomaly label {text!r}") from None


# class index order used by every classifier; None is class 0
CLASS_ORDER = (
    AnomalyKind.NONE,
    AnomalyKind.SUDDEN_D,
    AnomalyKind.SUDDEN_R,
    AnomalyKind.INSTA_D,
    AnomalyKind.SLOW_D,
)
ANOMALIES = CLASS_ORDER[1:]


class TraceParseError(ValueError):
    def __init__(self, message: str, lineno: int | None = None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class RssiRangeError(TraceParseError):
    pass


@dataclass
class Trace:
    id: str
    values: np.ndarray
    src_node: int = 0
    dst_node: int = 0
    noise_level: int = 0
    label: AnomalyKind = AnomalyKind.NONE
    lossy: bool = False

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.label = AnomalyKind(self.label)

    def __len__(self):
        return len(self.values)

    def __eq__(self, other):
        if not isinstance(other, Trace):
            return NotImplemented
        return (
            self.id == other.id
            and self.src_node == other.src_node
            and self.dst_node == other.dst_node
            and self.noise_level == other.noise_level
            and self.label == other.label
            and self.lossy == other.lossy
            and np.array_equal(self.values, other.values)
        )

    def replace(self, **changes) -> "Trace":
        fields = dict(
            id=self.id,
            values=self.values.copy(),
            src_node=self.src_node,
            dst_node=self.dst_node,
            noise_level=self.noise_level,
            label=self.label,
            lossy=self.lossy,
        )
        fields.update(changes)
        return Trace(**fields)


@dataclass
class LabeledDataset:
    traces: list[Trace]
    trace_length: int
    seed: int = 0
    provenance: dict = field(default_factory=dict)
    # (trace id, drawn parameters) for every injected trace
    injections: list = field(default_factory=list)

    def __post_init__(self):
        for t in self.traces:
            if len(t) != self.trace_length:
                raise ValueError(
                    f"trace {t.id!r} has length {len(t)}, expected {self.trace_length}"
                )

    def __len__(self):
        return len(self.traces)

    def labels(self) -> np.ndarray:
        """Integer class indices in ``CLASS_ORDER``."""
        return np.array([t.label.index for t in self.traces], dtype=np.int64)

    def values(self) -> np.ndarray:
        return np.stack([t.values for t in self.traces]) if self.traces else np.empty((0, self.trace_length))

    def class_counts(self) -> dict[AnomalyKind, int]:
        counts = {k: 0 for k in CLASS_ORDER}
        for t in self.traces:
            counts[t.label] += 1
        return counts


def _format_value(v: float) -> str:
    if float(v).is_integer():
        return str(int(v))
    return repr(float(v))


def format_trace(trace: Trace) -> str:
    """Serialize a trace in the line-oriented trace-file format."""
    lines = [
        f"# id={trace.id}",
        f"# src={trace.src_node}",
        f"# dst={trace.dst_node}",
        f"# noise={trace.noise_level}",
        f"# label={trace.label.value}",
    ]
    lines.extend(f"{k},{_format_value(v)}" for k, v in enumerate(trace.values))
    return "\n".join(lines) + "\n"


def parse_trace_file(
    text: str,
    length: int | None = None,
    rssi_floor: float = RSSI_FLOOR,
    rssi_ceil: float = RSSI_CEIL,
) -> Trace:
    """Parse one trace file.

    Position ``k`` of the result holds the RSSI of sequence number ``k``.
    Missing sequence numbers mark the trace lossy and are filled with
    ``rssi_floor``. With ``length=None`` the trace ends at the last
    sequence number seen.
    """
    header = {}
    records: list[tuple[int, float]] = []
    last_seq = -1
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" in body:
                key, _, val = body.partition("=")
                header[key.strip()] = val.strip()
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise TraceParseError(f"expected 'seq,rssi', got {line!r}", lineno)
        try:
            seq = int(parts[0])
            rssi = float(parts[1])
        except ValueError:
            raise TraceParseError(f"malformed record {line!r}", lineno) from None
        if seq < 0:
            raise TraceParseError(f"negative sequence number {seq}", lineno)
        if seq <= last_seq:
            raise TraceParseError(
                f"sequence number {seq} not strictly increasing (previous {last_seq})", lineno
            )
        if not np.isfinite(rssi) or rssi < rssi_floor or rssi > rssi_ceil:
            raise RssiRangeError(
                f"rssi {parts[1]} outside [{rssi_floor}, {rssi_ceil}]", lineno
            )
        if length is not None and seq >= length:
            raise TraceParseError(f"sequence number {seq} beyond trace length {length}", lineno)
        last_seq = seq
        records.append((seq, rssi))

    n = length if length is not None else last_seq + 1
    if n <= 0:
        raise TraceParseError("trace contains no records")
    values = np.full(n, float(rssi_floor))
    seen = np.zeros(n, dtype=bool)
    for seq, rssi in records:
        values[seq] = rssi
        seen[seq] = True

    try:
        return Trace(
            id=header.get("id", ""),
            values=values,
            src_node=int(header.get("src", 0)),
            dst_node=int(header.get("dst", 0)),
            noise_level=int(header.get("noise", 0)),
            label=AnomalyKind.parse(header.get("label", "None")),
            lossy=not bool(seen.all()),
        )
    except ValueError as exc:
        raise TraceParseError(f"bad header: {exc}") from None


def filter_complete(traces: Iterable[Trace], keep_lossy: bool = False) -> list[Trace]:
    """Keep traces without packet loss (or only the lossy ones when ``keep_lossy``)."""
    return [t for t in traces if t.lossy == keep_lossy]


def generate_synthetic_normal(
    count: int,
    length: int = DEFAULT_LENGTH,
    mean: float = 40.0,
    stddev: float = 3.0,
    seed: int = 0,
) -> LabeledDataset:
    """Anomaly-free traces: rounded Gaussian RSSI around ``mean``, clamped to range.

    Trace ``i`` draws from its own stream seeded by ``(seed, i)``, so any
    prefix of a larger corpus equals the smaller corpus.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if length < 8:
        raise ValueError("length must be >= 8")
    if stddev < 0:
        raise ValueError("stddev must be >= 0")
    traces = []
    for i in range(count):
        rng = np.random.default_rng([derive_seed(seed, "normal-trace"), i])
        vals = np.rint(mean + stddev * rng.standard_normal(length))
        vals = np.clip(vals, RSSI_FLOOR, RSSI_CEIL)
        traces.append(Trace(id=f"syn{i:05d}", values=vals))
    return LabeledDataset(
        traces,
        trace_length=length,
        seed=seed,
        provenance={"source": "synthetic-normal", "mean": mean, "stddev": stddev},
    )


# -- dataset directories -----------------------------------------------------

MANIFEST = "manifest.csv"
TRACE_DIR = "traces"


def _trace_filename(trace_id: str) -> str:
    return trace_id.replace("/", "_").replace(os.sep, "_") + ".trace"


def format_manifest(dataset: LabeledDataset) -> str:
    lines = [f"# trace_length={dataset.trace_length}", f"# seed={dataset.seed}"]
    for key in sorted(dataset.provenance):
        lines.append(f"# provenance.{key}={dataset.provenance[key]}")
    lines.append("id,label,seed_offset")
    lines.extend(f"{t.id},{t.label.value},{i}" for i, t in enumerate(dataset.traces))
    return "\n".join(lines) + "\n"


def parse_manifest(text: str) -> tuple[dict, list[tuple[str, AnomalyKind, int]]]:
    header: dict = {}
    provenance: dict = {}
    rows = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, _, val = line[1:].strip().partition("=")
            key = key.strip()
            if key.startswith("provenance."):
                provenance[key[len("provenance."):]] = val.strip()
            else:
                header[key] = val.strip()
            continue
        if line == "id,label,seed_offset":
            continue
        tid, label, offset = line.rsplit(",", 2)
        rows.append((tid, AnomalyKind.parse(label), int(offset)))
    header["provenance"] = provenance
    return header, rows


def save_dataset(dataset: LabeledDataset, directory: str | Path) -> Path:
    directory = Path(directory)
    (directory / TRACE_DIR).mkdir(parents=True, exist_ok=True)
    for t in dataset.traces:
        (directory / TRACE_DIR / _trace_filename(t.id)).write_text(format_trace(t))
    (directory / MANIFEST).write_text(format_manifest(dataset))
    return directory


def load_dataset(directory: str | Path) -> LabeledDataset:
    directory = Path(directory)
    header, rows = parse_manifest((directory / MANIFEST).read_text())
    length = int(header["trace_length"])
    traces = []
    for tid, label, _ in rows:
        path = directory / TRACE_DIR / _trace_filename(tid)
        t = parse_trace_file(path.read_text(), length=length)
        if t.label != label:
            raise ValueError(f"{path}: label {t.label.value} disagrees with manifest {label.value}")
        traces.append(t)
    return LabeledDataset(
        traces, trace_length=length, seed=int(header.get("seed", 0)), provenance=header["provenance"]
    )


def fit_length(traces: Sequence[Trace], length: int) -> list[Trace]:
    """Truncate traces to ``length`` samples, dropping shorter ones."""
    return [t.replace(values=t.values[:length]) for t in traces if len(t) >= length]
