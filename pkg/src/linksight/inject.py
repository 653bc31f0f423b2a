"""Synthetic injection of link-layer anomalies into normal RSSI traces.

All sample positions in this module are 1-based, matching the way the
injection ranges are usually quoted ("starts between the 200th and the
280th sample").
"""
from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, fields
from typing import Iterable, Sequence

import numpy as np

from ._seeding import derive_seed
from .traces import (
    ANOMALIES,
    DEFAULT_LENGTH,
    RSSI_CEIL,
    RSSI_FLOOR,
    AnomalyKind,
    LabeledDataset,
    Trace,
)


@dataclass(frozen=True)
class InjectionPlan:
    affected_fraction: float = 0.33
    suddend_start_range: tuple[int, int] = (200, 280)
    suddenr_start_range: tuple[int, int] = (25, 275)
    suddenr_duration_range: tuple[int, int] = (5, 20)
    instad_rate: float = 0.01
    slowd_start_range: tuple[int, int] = (1, 20)
    slowd_duration_range: tuple[int, int] = (150, 180)
    slowd_slope_range: tuple[float, float] = (0.5, 1.5)
    floor: float = RSSI_FLOOR
    seed: int = 0

    def validate(self, length: int = DEFAULT_LENGTH) -> None:
        if not 0 < self.affected_fraction <= 1:
            raise ValueError("affected_fraction must lie in (0, 1]")
        for name in ("suddend_start_range", "suddenr_start_range", "suddenr_duration_range",
                     "slowd_start_range", "slowd_duration_range"):
            lo, hi = getattr(self, name)
            if not 1 <= lo <= hi <= length:
                raise ValueError(f"{name}={lo, hi} must satisfy 1 <= lo <= hi <= {length}")
        if self.suddenr_start_range[1] + self.suddenr_duration_range[1] - 1 > length:
            raise ValueError("SuddenR window can exceed the trace end")
        lo, hi = self.slowd_slope_range
        if not 0 <= lo <= hi:
            raise ValueError("slowd_slope_range must satisfy 0 <= lo <= hi")
        if not 0 < self.instad_rate <= 1:
            raise ValueError("instad_rate must lie in (0, 1]")
        if not RSSI_FLOOR <= self.floor <= RSSI_CEIL:
            raise ValueError("floor outside RSSI range")

    def instad_count(self, length: int) -> int:
        return max(1, int(math.floor(self.instad_rate * length + 0.5)))

    def scaled(self, length: int) -> "InjectionPlan":
        """Rescale every positional range from 300-sample traces to ``length``."""
        f = length / DEFAULT_LENGTH

        def scale(rng):
            lo, hi = (max(1, int(math.floor(v * f + 0.5))) for v in rng)
            return (min(lo, length), min(hi, length))

        plan = InjectionPlan(
            affected_fraction=self.affected_fraction,
            suddend_start_range=scale(self.suddend_start_range),
            suddenr_start_range=scale(self.suddenr_start_range),
            suddenr_duration_range=scale(self.suddenr_duration_range),
            instad_rate=self.instad_rate,
            slowd_start_range=scale(self.slowd_start_range),
            slowd_duration_range=scale(self.slowd_duration_range),
            slowd_slope_range=self.slowd_slope_range,
            floor=self.floor,
            seed=self.seed,
        )
        # keep SuddenR windows inside the trace after rounding
        lo, hi = plan.suddenr_start_range
        hi = min(hi, length - plan.suddenr_duration_range[1] + 1)
        return _replace(plan, suddenr_start_range=(min(lo, hi), hi))

    def to_text(self) -> str:
        lines = []
        for key, val in asdict(self).items():
            if isinstance(val, tuple):
                val = ",".join(repr(v) if isinstance(v, float) else str(v) for v in val)
            lines.append(f"{key}={val}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_mapping(cls, mapping: dict) -> "InjectionPlan":
        kwargs = {}
        types = {f.name: f for f in fields(cls)}
        for key, raw in mapping.items():
            key = key.replace("-", "_")
            if key not in types:
                raise ValueError(f"unknown injection plan key {key!r}")
            default = getattr(cls, key)
            if isinstance(default, tuple):
                parts = [p.strip() for p in str(raw).split(",")] if isinstance(raw, str) else list(raw)
                if len(parts) != 2:
                    raise ValueError(f"{key} needs two comma-separated bounds")
                conv = float if isinstance(default[0], float) else int
                kwargs[key] = tuple(conv(p) for p in parts)
            else:
                kwargs[key] = type(default)(raw)
        return cls(**kwargs)

    @classmethod
    def from_text(cls, text: str) -> "InjectionPlan":
        from .config import parse_kv

        return cls.from_mapping(parse_kv(text))


def _replace(plan: InjectionPlan, **changes) -> InjectionPlan:
    d = asdict(plan)
    d.update(changes)
    return InjectionPlan(**d)


def _in_range(name, value, rng):
    lo, hi = rng
    if not lo <= value <= hi:
        raise ValueError(f"{name}={value} outside declared range [{lo}, {hi}]")


def _check_start(start: int, n: int) -> None:
    if not 1 <= start <= n:
        raise ValueError(f"start={start} outside [1, {n}]")


def inject_sudden_d(trace: Trace, start: int, floor: float = RSSI_FLOOR,
                    plan: InjectionPlan | None = None) -> Trace:
    """Drop to ``floor`` at ``start`` and never recover."""
    n = len(trace)
    _check_start(start, n)
    if plan is not None:
        _in_range("start", start, plan.suddend_start_range)
    vals = trace.values.copy()
    vals[start - 1:] = floor
    return trace.replace(values=vals, label=AnomalyKind.SUDDEN_D)


def inject_sudden_r(trace: Trace, start: int, duration: int, floor: float = RSSI_FLOOR,
                    plan: InjectionPlan | None = None) -> Trace:
    n = len(trace)
    _check_start(start, n)
    if duration < 1:
        raise ValueError("duration must be >= 1")
    if start + duration - 1 > n:
        raise ValueError(f"window [{start}, {start + duration - 1}] exceeds trace end {n}")
    if plan is not None:
        _in_range("start", start, plan.suddenr_start_range)
        _in_range("duration", duration, plan.suddenr_duration_range)
    vals = trace.values.copy()
    vals[start - 1:start - 1 + duration] = floor
    return trace.replace(values=vals, label=AnomalyKind.SUDDEN_R)


def inject_insta_d(trace: Trace, positions: Iterable[int], floor: float = RSSI_FLOOR,
                   plan: InjectionPlan | None = None) -> Trace:
    n = len(trace)
    positions = list(positions)
    if len(set(positions)) != len(positions):
        raise ValueError("duplicate InstaD positions")
    for p in positions:
        if not 1 <= p <= n:
            raise ValueError(f"position {p} outside [1, {n}]")
    if plan is not None and len(positions) != plan.instad_count(n):
        raise ValueError(f"expected {plan.instad_count(n)} positions, got {len(positions)}")
    vals = trace.values.copy()
    vals[np.asarray(positions, dtype=int) - 1] = floor
    return trace.replace(values=vals, label=AnomalyKind.INSTA_D)


def slow_d_offsets(n: int, start: int, duration: int, slope: float) -> np.ndarray:
    """Additive ramp: ``min(0, -slope*(x-start))`` in the window, held afterwards."""
    x = np.arange(1, n + 1, dtype=np.float64)
    ramp_x = np.minimum(x, start + duration - 1)
    return np.minimum(0.0, -slope * (ramp_x - start))


def inject_slow_d(trace: Trace, start: int, duration: int, slope: float,
                  floor: float = RSSI_FLOOR, plan: InjectionPlan | None = None) -> Trace:
    n = len(trace)
    _check_start(start, n)
    if duration < 1:
        raise ValueError("duration must be >= 1")
    if not slope >= 0:
        raise ValueError("slope must be >= 0")
    if plan is not None:
        _in_range("start", start, plan.slowd_start_range)
        _in_range("duration", duration, plan.slowd_duration_range)
        _in_range("slope", slope, plan.slowd_slope_range)
    vals = np.maximum(trace.values + slow_d_offsets(n, start, duration, slope), floor)
    return trace.replace(values=vals, label=AnomalyKind.SLOW_D)


def _uniform_int(rng: np.random.Generator, bounds) -> int:
    lo, hi = bounds
    return int(rng.integers(lo, hi, endpoint=True))


def inject_random(trace: Trace, kind: AnomalyKind, plan: InjectionPlan,
                  rng: np.random.Generator) -> tuple[Trace, dict]:
    """Inject ``kind`` with parameters drawn uniformly from ``plan``."""
    floor = plan.floor
    if kind is AnomalyKind.SUDDEN_D:
        params = {"start": _uniform_int(rng, plan.suddend_start_range)}
        return inject_sudden_d(trace, floor=floor, plan=plan, **params), params
    if kind is AnomalyKind.SUDDEN_R:
        params = {"start": _uniform_int(rng, plan.suddenr_start_range),
                  "duration": _uniform_int(rng, plan.suddenr_duration_range)}
        return inject_sudden_r(trace, floor=floor, plan=plan, **params), params
    if kind is AnomalyKind.INSTA_D:
        n = len(trace)
        candidates = np.flatnonzero(trace.values > floor) + 1
        count = plan.instad_count(n)
        if len(candidates) < count:
            candidates = np.arange(1, n + 1)
        pos = sorted(int(p) for p in rng.choice(candidates, size=count, replace=False))
        return inject_insta_d(trace, pos, floor=floor, plan=plan), {"positions": pos}
    if kind is AnomalyKind.SLOW_D:
        params = {"start": _uniform_int(rng, plan.slowd_start_range),
                  "duration": _uniform_int(rng, plan.slowd_duration_range),
                  "slope": float(rng.uniform(*plan.slowd_slope_range))}
        return inject_slow_d(trace, floor=floor, plan=plan, **params), params
    raise ValueError(f"cannot inject {kind}")


def affected_count(base_size: int, fraction: float) -> int:
    count = int(math.floor(base_size * fraction + 1e-9))
    if count < 1:
        warnings.warn(
            f"base of {base_size} traces is smaller than 1/affected_fraction; "
            "injecting one trace per anomaly",
            stacklevel=3,
        )
        count = 1
    return count


def build_labeled_dataset(base: Sequence[Trace], plan: InjectionPlan,
                          kinds: Sequence[AnomalyKind] = ANOMALIES) -> LabeledDataset:
    """One copy of ``base`` per anomaly kind, each with a random affected subset.

    With 2123 base traces and the default 33% this yields 8492 traces:
    700 per anomaly and 5692 untouched.
    """
    if not base:
        raise ValueError("base corpus is empty")
    length = len(base[0])
    if any(len(t) != length for t in base):
        raise ValueError("base traces differ in length")
    plan.validate(length)
    n_aff = affected_count(len(base), plan.affected_fraction)

    traces: list[Trace] = []
    injections = []
    for kind in kinds:
        pick_rng = np.random.default_rng([derive_seed(plan.seed, "affected"), kind.index])
        chosen = set(int(i) for i in pick_rng.choice(len(base), size=n_aff, replace=False))
        for i, src in enumerate(base):
            tid = f"{kind.value}-{src.id}"
            if i in chosen:
                rng = np.random.default_rng([derive_seed(plan.seed, "params"), kind.index, i])
                out, params = inject_random(src, kind, plan, rng)
                injections.append((tid, params))
            else:
                out = src.replace(label=AnomalyKind.NONE)
            traces.append(out.replace(id=tid))

    provenance = {k: v for k, v in asdict(plan).items()}
    provenance["base_size"] = len(base)
    provenance["affected_per_kind"] = n_aff
    return LabeledDataset(traces, trace_length=length, seed=plan.seed,
                          provenance=provenance, injections=injections)
