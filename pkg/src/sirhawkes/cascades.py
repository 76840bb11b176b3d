"""Event histories: cascades, SIR realisations, and their CSV/JSON formats.

CSV layout is one row per event with header ``cascade_id,time,mark``;
realisations with recoveries use ``cascade_id,time,recovery_time,mark``.
The mark column is optional and defaults to 1.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

TIE_EPS = 1e-9


class CascadeFormatError(ValueError):
    """Malformed cascade input (bad row, negative time, mark < 1, ...)."""


def fmt(x: float) -> str:
    """Numbers in output files: 9 significant digits."""
    return format(float(x), ".9g")


@dataclass(frozen=True)
class Event:
    time: float
    mark: float = 1.0


def break_ties(times: np.ndarray) -> np.ndarray:
    """Make sorted ``times`` strictly increasing.

    The i-th repeat of a timestamp is shifted by ``i * 1e-9`` (or by one ulp
    where 1e-9 is below float resolution).
    """
    out = np.array(times, dtype=float)
    for i in range(1, len(out)):
        if out[i] <= out[i - 1]:
            out[i] = max(out[i - 1] + TIE_EPS, np.nextafter(out[i - 1], math.inf))
    return out


@dataclass(frozen=True, eq=False)
class Cascade:
    """An ordered infection history.

    ``times`` is strictly increasing and starts at 0; ``marks`` are >= 1.
    """

    times: np.ndarray
    marks: np.ndarray
    id: str = ""

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float).ravel()
        m = np.ones_like(t) if self.marks is None else np.asarray(self.marks, dtype=float).ravel()
        if t.size == 0:
            raise CascadeFormatError(f"cascade {self.id!r} is empty")
        if m.shape != t.shape:
            raise CascadeFormatError("times and marks differ in length")
        if np.any(~np.isfinite(t)) or np.any(t < 0):
            raise CascadeFormatError(f"cascade {self.id!r} has negative or non-finite times")
        if np.any(~(m >= 1)):
            raise CascadeFormatError(f"cascade {self.id!r} has marks below 1")
        if np.any(np.diff(t) <= 0):
            raise CascadeFormatError(f"cascade {self.id!r} times are not strictly increasing")
        t.setflags(write=False)
        m.setflags(write=False)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "marks", m)

    @classmethod
    def from_times(cls, times: Sequence[float], marks: Sequence[float] | None = None, id: str = "") -> "Cascade":
        """Sort, rebase to 0 and break ties before constructing."""
        t = np.asarray(times, dtype=float)
        m = np.ones_like(t) if marks is None else np.asarray(marks, dtype=float)
        order = np.argsort(t, kind="stable")
        t, m = t[order], m[order]
        if t.size:
            t = break_ties(t - t[0])
        return cls(t, m, id)

    @property
    def events(self) -> list[Event]:
        return [Event(float(t), float(m)) for t, m in zip(self.times, self.marks)]

    def __len__(self) -> int:
        return len(self.times)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Cascade):
            return NotImplemented
        return (
            self.id == other.id
            and np.array_equal(self.times, other.times)
            and np.array_equal(self.marks, other.marks)
        )

    @property
    def is_marked(self) -> bool:
        return bool(np.any(self.marks != 1.0))

    def head(self, k: int) -> "Cascade":
        """The first ``k`` events."""
        return Cascade(self.times[:k], self.marks[:k], self.id)

    def until(self, t: float) -> "Cascade":
        """Events with time <= ``t`` (always keeps the first event)."""
        k = max(1, int(np.searchsorted(self.times, t, side="right")))
        return self.head(k)

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "events": [{"time": float(t), "mark": float(m)} for t, m in zip(self.times, self.marks)],
        }

    @classmethod
    def from_json(cls, d: dict) -> "Cascade":
        ev = d["events"]
        return cls.from_times([e["time"] for e in ev], [e.get("mark", 1.0) for e in ev], str(d.get("id", "")))


@dataclass(frozen=True, eq=False)
class SirRealization:
    """Paired infection and recovery times from one epidemic.

    ``recoveries[i]`` belongs to the i-th infection; ``inf`` means the
    individual has not recovered (or the recovery is unobserved).
    """

    infections: Cascade
    recoveries: np.ndarray
    truncated: bool = field(default=False)

    def __post_init__(self):
        r = np.asarray(self.recoveries, dtype=float).ravel()
        if r.shape != self.infections.times.shape:
            raise CascadeFormatError("one recovery time per infection is required")
        if np.any(~(r > self.infections.times)):
            raise CascadeFormatError("every recovery must strictly follow its infection")
        r.setflags(write=False)
        object.__setattr__(self, "recoveries", r)

    @property
    def times(self) -> np.ndarray:
        return self.infections.times

    @property
    def marks(self) -> np.ndarray:
        return self.infections.marks

    @property
    def id(self) -> str:
        return self.infections.id

    def __len__(self) -> int:
        return len(self.infections)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SirRealization):
            return NotImplemented
        return self.infections == other.infections and np.array_equal(self.recoveries, other.recoveries)


@dataclass(frozen=True)
class CountingState:
    t: float
    C: int
    I: int
    R: int
    S: int


def counting_state(real: SirRealization, N: int, t: float) -> CountingState:
    """Compartment counts at ``t`` using strict ``< t`` event counting."""
    n = len(real)
    if N < n:
        raise ValueError(f"population N={N} is smaller than the {n} recorded infections")
    C = int(np.count_nonzero(real.times < t))
    R = int(np.count_nonzero(real.recoveries < t))
    return CountingState(t=t, C=C, I=C - R, R=R, S=int(N) - C)


# --- CSV ------------------------------------------------------------------


def _parse_float(raw: str, what: str, line: int) -> float:
    try:
        return float(raw)
    except (TypeError, ValueError):
        raise CascadeFormatError(f"row {line}: cannot parse {what} {raw!r}") from None


def _read_rows(path: str | os.PathLike):
    with open(path, newline="", encoding="utf-8") as fh:
        text = fh.read()
    if not text.strip():
        return None, []
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or "time" not in reader.fieldnames:
        raise CascadeFormatError("missing 'time' column in header")
    # line 1 is the header
    return reader.fieldnames, [(i + 2, row) for i, row in enumerate(reader)]


def _group(rows, with_recovery: bool):
    groups: dict[str, list] = {}
    for line, row in rows:
        cid = (row.get("cascade_id") or "").strip() or "0"
        t = _parse_float(row["time"], "time", line)
        if not math.isfinite(t) or t < 0:
            raise CascadeFormatError(f"row {line}: time must be a non-negative number, got {row['time']!r}")
        raw_mark = row.get("mark")
        m = 1.0 if raw_mark in (None, "") else _parse_float(raw_mark, "mark", line)
        if not m >= 1:
            raise CascadeFormatError(f"row {line}: mark must be >= 1, got {raw_mark!r}")
        rec = math.inf
        if with_recovery:
            raw = row.get("recovery_time")
            rec = math.inf if raw in (None, "") else _parse_float(raw, "recovery_time", line)
            if rec < t:
                raise CascadeFormatError(f"row {line}: recovery_time precedes time")
        groups.setdefault(cid, []).append((t, m, rec))
    return groups


def load_cascades(path: str | os.PathLike) -> list[Cascade]:
    """Read a cascade CSV. Times are sorted, rebased to 0 and de-tied."""
    _, rows = _read_rows(path)
    out = []
    for cid, evs in _group(rows, with_recovery=False).items():
        t, m, _ = zip(*evs)
        out.append(Cascade.from_times(t, m, cid))
    return out


def save_cascades(cascades: Iterable[Cascade], path: str | os.PathLike) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["cascade_id", "time", "mark"])
        for c in cascades:
            for t, m in zip(c.times, c.marks):
                w.writerow([c.id, fmt(t), fmt(m)])


def load_realizations(path: str | os.PathLike) -> list[SirRealization]:
    """Read a CSV with a ``recovery_time`` column (blank or ``inf`` = none)."""
    fields, rows = _read_rows(path)
    if fields is not None and "recovery_time" not in fields:
        raise CascadeFormatError("missing 'recovery_time' column in header")
    out = []
    for cid, evs in _group(rows, with_recovery=True).items():
        evs.sort(key=lambda e: e[0])
        t = np.array([e[0] for e in evs])
        base = t[0]
        casc = Cascade.from_times(t, [e[1] for e in evs], cid)
        rec = np.array([e[2] for e in evs]) - base
        # de-tying only moves times forward by ~1e-9; keep recoveries after them
        rec = np.maximum(rec, np.nextafter(casc.times, math.inf))
        out.append(SirRealization(casc, rec))
    return out


def save_realizations(reals: Iterable[SirRealization], path: str | os.PathLike) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["cascade_id", "time", "recovery_time", "mark"])
        for r in reals:
            for t, rec, m in zip(r.times, r.recoveries, r.marks):
                w.writerow([r.id, fmt(t), fmt(rec), fmt(m)])


def load_cascade_json(path: str | os.PathLike) -> Cascade:
    return Cascade.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def save_cascade_json(cascade: Cascade, path: str | os.PathLike) -> None:
    Path(path).write_text(json.dumps(cascade.to_json()), encoding="utf-8")
