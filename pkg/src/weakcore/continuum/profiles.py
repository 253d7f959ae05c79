"""Step-function strategy profiles and interval partitions of (0, 1].

A profile is constant on finitely many half-open pieces ``(b[k], b[k+1]]``
with rational breakpoints. Everything here is exact; float views are
cached for the fast evaluators.
"""
from __future__ import annotations

from bisect import bisect_left
from fractions import Fraction
from functools import cached_property
from itertools import chain
from typing import Callable, Iterable, Sequence

import numpy as np

from ..errors import GameInputError
from ..numbers import as_fraction

Interval = tuple[Fraction, Fraction]

ZERO = Fraction(0)
ONE = Fraction(1)


def _check_breakpoints(bps: Sequence[Fraction]) -> None:
    if len(bps) < 2 or bps[0] != 0 or bps[-1] != 1:
        raise GameInputError("breakpoints must start at 0 and end at 1")
    for a, b in zip(bps, bps[1:]):
        if not a < b:
            raise GameInputError("breakpoints must be strictly increasing")


def normalize_intervals(intervals: Iterable[Sequence]) -> tuple[Interval, ...]:
    """Sort half-open intervals and merge the ones that touch or overlap."""
    ivs = sorted((as_fraction(a), as_fraction(b)) for a, b in intervals)
    out: list[list[Fraction]] = []
    for a, b in ivs:
        if not a < b:
            raise GameInputError(f"empty interval ({a}, {b}]")
        if a < 0 or b > 1:
            raise GameInputError(f"interval ({a}, {b}] not inside (0, 1]")
        if out and a <= out[-1][1]:
            out[-1][1] = max(out[-1][1], b)
        else:
            out.append([a, b])
    return tuple((a, b) for a, b in out)


def measure(intervals: Iterable[Interval]) -> Fraction:
    return sum((b - a for a, b in intervals), ZERO)


def complement(intervals: Sequence[Interval]) -> tuple[Interval, ...]:
    out = []
    cur = ZERO
    for a, b in normalize_intervals(intervals):
        if cur < a:
            out.append((cur, a))
        cur = b
    if cur < 1:
        out.append((cur, ONE))
    return tuple(out)


def contains(intervals: Sequence[Interval], t) -> bool:
    return any(a < t <= b for a, b in intervals)


class StepProfile:
    """A profile ``f: (0, 1] -> [lo, hi]`` constant on each piece.

    ``values[k]`` is the action on ``(breakpoints[k], breakpoints[k+1]]``.
    ``at_zero`` is the optional value at ``t = 0`` (a null set; stored,
    never integrated).
    """

    __slots__ = ("breakpoints", "values", "at_zero", "__dict__")

    def __init__(self, breakpoints, values, *, at_zero=None, lo=0, hi=1, check=True):
        bps = tuple(as_fraction(b) for b in breakpoints)
        vals = tuple(as_fraction(v) for v in values)
        if check:
            _check_breakpoints(bps)
            if len(vals) != len(bps) - 1:
                raise GameInputError("need exactly one value per piece")
            for v in vals:
                if lo is not None and v < lo or hi is not None and v > hi:
                    raise GameInputError(f"value {v} outside [{lo}, {hi}]")
        self.breakpoints = bps
        self.values = vals
        self.at_zero = None if at_zero is None else as_fraction(at_zero)

    # -- constructors ------------------------------------------------------
    @classmethod
    def constant(cls, c, **kw) -> StepProfile:
        return cls((0, 1), (c,), **kw)

    @classmethod
    def from_pieces(cls, pieces: Sequence[tuple[Sequence, object]], **kw) -> StepProfile:
        """Build from ``[((a, b), value), ...]`` covering (0, 1] in order."""
        bps = [as_fraction(pieces[0][0][0])]
        vals = []
        for (a, b), v in pieces:
            if as_fraction(a) != bps[-1]:
                raise GameInputError("pieces must be contiguous")
            bps.append(as_fraction(b))
            vals.append(v)
        return cls(bps, vals, **kw)

    @classmethod
    def from_cells(cls, partition: IntervalPartition, values: Sequence, **kw) -> StepProfile:
        if len(values) != len(partition):
            raise GameInputError("one value per cell required")
        return cls(partition.breakpoints, values, **kw)

    @classmethod
    def indicator(cls, a, b, inside=1, outside=0) -> StepProfile:
        """``inside`` on (a, b], ``outside`` elsewhere."""
        a, b = as_fraction(a), as_fraction(b)
        bps, vals = [ZERO], []
        if a > 0:
            bps.append(a)
            vals.append(outside)
        bps.append(b)
        vals.append(inside)
        if b < 1:
            bps.append(ONE)
            vals.append(outside)
        return cls(bps, vals)

    # -- evaluation --------------------------------------------------------
    @property
    def pieces(self) -> list[tuple[Interval, Fraction]]:
        b = self.breakpoints
        return [((b[k], b[k + 1]), v) for k, v in enumerate(self.values)]

    def piece_index(self, t) -> int:
        """Index of the piece ``(b[k], b[k+1]]`` containing ``t > 0``."""
        k = bisect_left(self.breakpoints, t) - 1
        return max(k, 0)

    def value_at(self, t):
        if t == 0 and self.at_zero is not None:
            return self.at_zero
        if t < 0 or t > 1:
            raise GameInputError(f"t={t} outside [0, 1]")
        return self.values[self.piece_index(t)]

    def cumulative(self, t):
        """``∫_0^t f dλ``; exact for rational ``t``, float for float ``t``."""
        if isinstance(t, float):
            fb, fv, fc = self.float_arrays
            k = min(max(int(np.searchsorted(fb, t, side="left")) - 1, 0), len(fv) - 1)
            return float(fc[k] + fv[k] * (t - fb[k]))
        t = as_fraction(t)
        if t <= 0:
            return ZERO
        k = self.piece_index(t)
        return self.prefix_integrals[k] + self.values[k] * (t - self.breakpoints[k])

    def integral(self, a=0, b=1):
        return self.cumulative(b) - self.cumulative(a)

    @cached_property
    def prefix_integrals(self) -> tuple[Fraction, ...]:
        """``∫_0^{b[k]} f`` for every breakpoint."""
        acc = [ZERO]
        for (a, b), v in self.pieces:
            acc.append(acc[-1] + v * (b - a))
        return tuple(acc)

    @cached_property
    def float_arrays(self):
        fb = np.array([float(b) for b in self.breakpoints])
        fv = np.array([float(v) for v in self.values])
        fc = np.array([float(c) for c in self.prefix_integrals])
        return fb, fv, fc

    @cached_property
    def mean(self) -> Fraction:
        return self.prefix_integrals[-1]

    def cumulative_array(self, ts: np.ndarray) -> np.ndarray:
        fb, fv, fc = self.float_arrays
        k = np.clip(np.searchsorted(fb, ts, side="left") - 1, 0, len(fv) - 1)
        return fc[k] + fv[k] * (ts - fb[k])

    def value_array(self, ts: np.ndarray) -> np.ndarray:
        fb, fv, _ = self.float_arrays
        k = np.clip(np.searchsorted(fb, ts, side="left") - 1, 0, len(fv) - 1)
        return fv[k]

    # -- algebra -----------------------------------------------------------
    def refine(self, points: Iterable) -> StepProfile:
        """Same function, with extra breakpoints inserted."""
        extra = {as_fraction(p) for p in points}
        bps = sorted(set(self.breakpoints) | {p for p in extra if 0 < p < 1})
        vals = [self.value_at(b) for b in bps[1:]]
        return StepProfile(bps, vals, at_zero=self.at_zero, lo=None, hi=None, check=False)

    def pointwise(self, other: StepProfile, fn: Callable) -> StepProfile:
        bps = sorted(set(self.breakpoints) | set(other.breakpoints))
        vals = [fn(self.value_at(b), other.value_at(b)) for b in bps[1:]]
        return StepProfile(bps, vals, lo=None, hi=None, check=False)

    def map_values(self, fn: Callable) -> StepProfile:
        return StepProfile(self.breakpoints, [fn(v) for v in self.values],
                           at_zero=self.at_zero, lo=None, hi=None, check=False)

    def combine(self, other: StepProfile, a) -> StepProfile:
        """Pointwise ``a*self + (1-a)*other``."""
        a = as_fraction(a)
        return self.pointwise(other, lambda x, y: a * x + (1 - a) * y)

    def replace_on(self, intervals: Sequence[Interval], other: StepProfile) -> StepProfile:
        """``other`` on the union of ``intervals``, ``self`` elsewhere."""
        ivs = normalize_intervals(intervals)
        cuts = set(chain.from_iterable(ivs))
        bps = sorted(set(self.breakpoints) | set(other.breakpoints) | cuts)
        vals = []
        for a, b in zip(bps, bps[1:]):
            src = other if contains(ivs, b) else self
            vals.append(src.value_at(b))
        return StepProfile(bps, vals, at_zero=self.at_zero, lo=None, hi=None, check=False)

    def restricted_values(self, a, b) -> list[Fraction]:
        """Distinct values taken on (a, b]."""
        a, b = as_fraction(a), as_fraction(b)
        return sorted({v for (pa, pb), v in self.pieces if pa < b and pb > a})

    def normalized(self) -> StepProfile:
        bps, vals = [self.breakpoints[0]], []
        for (a, b), v in self.pieces:
            if vals and vals[-1] == v:
                bps[-1] = b
            else:
                vals.append(v)
                bps.append(b)
        return StepProfile(bps, vals, at_zero=self.at_zero, lo=None, hi=None, check=False)

    def __eq__(self, other):
        if not isinstance(other, StepProfile):
            return NotImplemented
        x, y = self.normalized(), other.normalized()
        return x.breakpoints == y.breakpoints and x.values == y.values

    def __hash__(self):
        n = self.normalized()
        return hash((n.breakpoints, n.values))

    def __repr__(self):
        body = ", ".join(f"({a},{b}]:{v}" for (a, b), v in self.pieces)
        return f"StepProfile({body})"

    def to_json(self) -> dict:
        out = {"breakpoints": [str(b) for b in self.breakpoints],
               "values": [str(v) for v in self.values]}
        if self.at_zero is not None:
            out["at_zero"] = str(self.at_zero)
        return out

    @classmethod
    def from_json(cls, data: dict, **kw) -> StepProfile:
        return cls(data["breakpoints"], data["values"], at_zero=data.get("at_zero"), **kw)


class IntervalPartition:
    """Cells ``K_j = (b[j], b[j+1]]`` covering (0, 1]."""

    def __init__(self, breakpoints):
        bps = tuple(as_fraction(b) for b in breakpoints)
        _check_breakpoints(bps)
        self.breakpoints = bps

    @classmethod
    def uniform(cls, n: int) -> IntervalPartition:
        if n < 1:
            raise GameInputError("need at least one cell")
        return cls([Fraction(k, n) for k in range(n + 1)])

    @property
    def cells(self) -> list[Interval]:
        b = self.breakpoints
        return [(b[j], b[j + 1]) for j in range(len(b) - 1)]

    @property
    def weights(self) -> list[Fraction]:
        return [b - a for a, b in self.cells]

    def __len__(self):
        return len(self.breakpoints) - 1

    def __eq__(self, other):
        return isinstance(other, IntervalPartition) and self.breakpoints == other.breakpoints

    def __hash__(self):
        return hash(self.breakpoints)

    def __repr__(self):
        return f"IntervalPartition({[str(b) for b in self.breakpoints]})"

    def refines(self, other: IntervalPartition) -> bool:
        return set(other.breakpoints) <= set(self.breakpoints)

    def refined_with(self, points: Iterable) -> IntervalPartition:
        pts = {as_fraction(p) for p in points}
        return IntervalPartition(sorted(set(self.breakpoints) | {p for p in pts if 0 < p < 1}))

    def cell_of(self, t) -> int:
        return max(bisect_left(self.breakpoints, t) - 1, 0)

    def cells_inside(self, intervals: Sequence[Interval]) -> list[int]:
        ivs = normalize_intervals(intervals)
        return [j for j, (a, b) in enumerate(self.cells)
                if any(ea <= a and b <= eb for ea, eb in ivs)]

    def is_union_of_cells(self, intervals: Sequence[Interval]) -> bool:
        ivs = normalize_intervals(intervals)
        idx = self.cells_inside(ivs)
        return measure(self.cells[j] for j in idx) == measure(ivs)

    def union(self, cell_indices: Iterable[int]) -> tuple[Interval, ...]:
        cells = self.cells
        return normalize_intervals(cells[j] for j in cell_indices)

    def to_json(self) -> dict:
        return {"breakpoints": [str(b) for b in self.breakpoints]}

    @classmethod
    def from_json(cls, data: dict) -> IntervalPartition:
        return cls(data["breakpoints"])


class PartitionNet:
    """A refining sequence of partitions that keeps anchor coalitions whole.

    ``anchors`` holds ``(stage_index, intervals)`` pairs: the coalition must
    be a union of cells at that stage and at every later one.
    """

    def __init__(self, stages: Sequence[IntervalPartition], anchors: Sequence = ()):
        stages = list(stages)
        if not stages:
            raise GameInputError("a partition net needs at least one stage")
        for prev, nxt in zip(stages, stages[1:]):
            if not nxt.refines(prev):
                raise GameInputError(f"{nxt} does not refine {prev}")
        fixed = []
        for k, ivs in anchors:
            ivs = normalize_intervals(ivs)
            for s in stages[k:]:
                if not s.is_union_of_cells(ivs):
                    raise GameInputError(f"anchor {ivs} is not a union of cells of {s}")
            fixed.append((k, ivs))
        self.stages = stages
        self.anchors = fixed

    @classmethod
    def uniform(cls, cell_counts: Sequence[int], anchors: Sequence = ()) -> PartitionNet:
        return cls([IntervalPartition.uniform(n) for n in cell_counts], anchors)

    def __iter__(self):
        return iter(self.stages)

    def __len__(self):
        return len(self.stages)

    def to_json(self) -> dict:
        return {"stages": [s.to_json() for s in self.stages],
                "anchors": [{"stage": k, "intervals": [[str(a), str(b)] for a, b in ivs]}
                            for k, ivs in self.anchors]}


def lift(partition: IntervalPartition, joint: Sequence) -> StepProfile:
    """The profile equal to ``joint[j]`` on cell ``j``."""
    return StepProfile.from_cells(partition, joint)
