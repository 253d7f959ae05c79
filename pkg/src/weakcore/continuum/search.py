"""Blocking search for continuum games at desk scale.

Coalitions are unions of cells of a search partition, deviations are
cellwise constants from an action grid (plus the affine family
``f + δ(1 - f)``), the complement ranges over cellwise-constant grid
assignments, and "almost every member" is checked at finitely many
sample points. A certificate found this way is verified at those
samples only; finding none does not prove the profile is unblocked.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Sequence

import numpy as np

from ..errors import GameInputError
from ..finite.blocking import BlockingCertificate
from ..finite.game import FiniteGame
from ..numbers import TAU, as_fraction, to_json_number
from .game import ContinuumGame
from .profiles import (Interval, IntervalPartition, StepProfile, complement, contains,
                       normalize_intervals)

RESOLUTION_CAVEAT = ("verified at finitely many sample points against cellwise-constant "
                     "complement strategies on a finite grid; absence of a certificate "
                     "is not a proof of core membership")

DEFAULT_GRID = tuple(Fraction(k, 4) for k in range(5))


def dyadic_samples(level: int = 6, near_zero: int = 12) -> tuple[Fraction, ...]:
    """``k / 2**level`` for ``k = 1..2**level`` plus ``2**-k`` down to
    ``2**-near_zero``."""
    pts = {Fraction(k, 2 ** level) for k in range(1, 2 ** level + 1)}
    pts |= {Fraction(1, 2 ** k) for k in range(level + 1, near_zero + 1)}
    return tuple(sorted(pts))


@dataclass(frozen=True)
class SearchSpace:
    partition: IntervalPartition
    grid: tuple = DEFAULT_GRID
    samples: tuple = field(default_factory=dyadic_samples)
    affine_deltas: tuple = ()

    def __post_init__(self):
        if not self.grid:
            raise GameInputError("search grid must be nonempty")
        if not self.samples:
            raise GameInputError("need at least one sample point")
        object.__setattr__(self, "grid", tuple(as_fraction(g) for g in self.grid))
        object.__setattr__(self, "samples", tuple(sorted(as_fraction(s) for s in self.samples)))
        object.__setattr__(self, "affine_deltas", tuple(as_fraction(d) for d in self.affine_deltas))
        if any(not 0 < s <= 1 for s in self.samples):
            raise GameInputError("sample points must lie in (0, 1]")

    @classmethod
    def uniform(cls, cells: int = 4, grid=DEFAULT_GRID, level: int = 6, near_zero: int = 12,
                affine_deltas=()) -> SearchSpace:
        return cls(IntervalPartition.uniform(cells), tuple(grid),
                   dyadic_samples(level, near_zero), tuple(affine_deltas))

    def with_profile_points(self, profile: StepProfile) -> SearchSpace:
        """Add the profile's breakpoints to the sample set."""
        extra = {b for b in profile.breakpoints if b > 0}
        return SearchSpace(self.partition, self.grid, tuple(set(self.samples) | extra),
                           self.affine_deltas)

    def to_json(self) -> dict:
        return {"partition": self.partition.to_json(),
                "grid": [str(g) for g in self.grid],
                "samples": len(self.samples),
                "sample_min": str(self.samples[0]),
                "affine_deltas": [str(d) for d in self.affine_deltas]}


@dataclass(frozen=True)
class ContinuumCertificate:
    """Coalition ``E`` (a finite union of intervals) and a deviation on it.

    ``deviation`` is a full profile; only its values on ``E`` matter.
    ``margin`` is the worst improvement minus ``epsilon`` over the checked
    samples and complements.
    """

    coalition: tuple
    deviation: StepProfile
    epsilon: object
    margin: object
    samples_checked: int = 0
    complements_checked: int = 0
    kind: str = "constant"
    caveat: str = RESOLUTION_CAVEAT

    def apply(self, base: StepProfile) -> StepProfile:
        return base.replace_on(self.coalition, self.deviation)

    def deviation_pieces(self):
        out = []
        for (a, b), v in self.deviation.refine(x for iv in self.coalition for x in iv).pieces:
            if contains(self.coalition, b):
                out.append(((a, b), v))
        return out

    def to_json(self) -> dict:
        return {"coalition": [[str(a), str(b)] for a, b in self.coalition],
                "deviation": [{"interval": [str(a), str(b)], "value": str(v)}
                              for (a, b), v in self.deviation_pieces()],
                "kind": self.kind,
                "epsilon": to_json_number(self.epsilon),
                "margin": to_json_number(self.margin),
                "samples_checked": self.samples_checked,
                "complements_checked": self.complements_checked,
                "caveat": self.caveat}


def _complement_cells(space: SearchSpace, coalition: Sequence[Interval]) -> list[Interval]:
    pts = [x for iv in coalition for x in iv]
    part = space.partition.refined_with(pts)
    return [c for c in part.cells if not contains(coalition, c[1])]


def continuum_margin(game: ContinuumGame, status_quo: StepProfile, coalition: Sequence[Interval],
                     deviation: StepProfile, epsilon, space: SearchSpace, *,
                     stop_below: float | None = None):
    """Worst ``U(t, dev//comp) - U(t, status_quo) - ε`` over samples in the
    coalition and cellwise-constant complements.

    Returns ``(margin, samples_checked, complements_checked)``; margin is
    ``None`` when no sample falls inside the coalition. With
    ``stop_below`` the scan stops once the margin drops to that level.
    """
    coalition = normalize_intervals(coalition)
    ts = [s for s in space.samples if contains(coalition, s)]
    if not ts:
        return None, 0, 0
    tf = np.array([float(t) for t in ts])
    base = game.evaluate_many(tf, status_quo) + float(epsilon)
    comp_cells = _complement_cells(space, coalition)
    if game.causal:
        last = ts[-1]
        free = [c for c in comp_cells if c[0] < last]
    else:
        free = comp_cells
    fixed = [c for c in comp_cells if c not in free]
    filler = StepProfile.constant(space.grid[0], check=False) if fixed else None
    worst = np.inf
    count = 0
    for assignment in itertools.product(space.grid, repeat=len(free)):
        f = deviation
        pieces = list(zip(free, assignment))
        if filler is not None:
            pieces += [(c, space.grid[0]) for c in fixed]
        f = _compose(coalition, deviation, pieces)
        val = game.evaluate_many(tf, f) - base
        count += 1
        worst = min(worst, float(val.min()))
        if stop_below is not None and worst <= stop_below:
            break
    return worst, len(ts), count


def _compose(coalition, deviation: StepProfile, pieces) -> StepProfile:
    """``deviation`` on the coalition, constants on the complement cells."""
    cuts = {x for iv in coalition for x in iv} | {x for (c, _) in pieces for x in c}
    bps = sorted(set(deviation.breakpoints) | cuts)
    lookup = {c[1]: v for c, v in pieces}
    vals = []
    j = 0
    sorted_pieces = sorted(pieces)
    for a, b in zip(bps, bps[1:]):
        if contains(coalition, b):
            vals.append(deviation.value_at(b))
        else:
            while j < len(sorted_pieces) and sorted_pieces[j][0][1] < b:
                j += 1
            if j < len(sorted_pieces) and sorted_pieces[j][0][0] < b <= sorted_pieces[j][0][1]:
                vals.append(sorted_pieces[j][1])
            else:
                vals.append(lookup.get(b, deviation.value_at(b)))
    return StepProfile(bps, vals, check=False)


def _deviations(status_quo: StepProfile, space: SearchSpace, cell_ids: Sequence[int]):
    cells = space.partition.cells
    coalition = space.partition.union(cell_ids)
    for values in itertools.product(space.grid, repeat=len(cell_ids)):
        dev = StepProfile.constant(0, check=False)
        dev = _compose((), dev, [(cells[j], v) for j, v in zip(cell_ids, values)]
                       + [(c, space.grid[0]) for k, c in enumerate(cells) if k not in cell_ids])
        yield "constant", coalition, dev
    for d in space.affine_deltas:
        dev = status_quo.map_values(lambda v, d=d: v + d * (1 - v))
        yield f"affine:{d}", coalition, dev


def iter_blocking_continuum(game: ContinuumGame, status_quo: StepProfile, epsilon,
                            space: SearchSpace) -> Iterator[ContinuumCertificate]:
    """Every certificate in the search space, in deterministic order:
    coalitions by number of cells then lexicographically, constant
    deviations in grid order, then the affine family."""
    if epsilon < 0:
        raise GameInputError("epsilon must be nonnegative")
    n = len(space.partition)
    for size in range(1, n + 1):
        for cell_ids in itertools.combinations(range(n), size):
            for kind, coalition, dev in _deviations(status_quo, space, cell_ids):
                margin, ns, nc = continuum_margin(game, status_quo, coalition, dev, epsilon,
                                                  space, stop_below=TAU)
                if margin is not None and margin > TAU:
                    yield ContinuumCertificate(coalition, dev, epsilon, margin, ns, nc, kind)


def find_blocking_continuum(game: ContinuumGame, status_quo: StepProfile, epsilon,
                            space: SearchSpace) -> ContinuumCertificate | None:
    return next(iter_blocking_continuum(game, status_quo, epsilon, space), None)


def verify_continuum_certificate(game: ContinuumGame, status_quo: StepProfile,
                                 cert: ContinuumCertificate, space: SearchSpace) -> bool:
    """Recompute the certificate's inequality at the space's samples and
    complements. Coalition intervals need not align with the partition."""
    margin, _, _ = continuum_margin(game, status_quo, cert.coalition, cert.deviation,
                                    cert.epsilon, space)
    return margin is not None and margin > TAU


def transfer_certificate(cert: ContinuumCertificate, finite: FiniteGame,
                         status_quo_joint: Sequence) -> BlockingCertificate:
    """Map a cellwise-constant continuum certificate to the discretized game.

    The finite coalition is the set of cells making up ``E`` and the
    finite threshold is ``(ε/2) · min_{j in E} λ(K_j)``; the returned
    margin is recomputed on the finite payoff table.
    """
    from ..finite.blocking import certificate_margin

    partition: IntervalPartition = finite.meta["partition"]
    ids = partition.cells_inside(cert.coalition)
    if not partition.is_union_of_cells(cert.coalition):
        raise GameInputError("certificate coalition is not a union of cells")
    cells = partition.cells
    deviation = {}
    for j in ids:
        vals = cert.deviation.restricted_values(*cells[j])
        if len(vals) != 1:
            raise GameInputError("deviation is not constant on a cell")
        deviation[finite.players[j]] = vals[0]
    threshold = float(cert.epsilon) / 2 * float(min(partition.weights[j] for j in ids))
    coalition = tuple(finite.players[j] for j in ids)
    margin = certificate_margin(finite, status_quo_joint, coalition, deviation, threshold)
    return BlockingCertificate(coalition, deviation, threshold, margin)


def coalition_of_cells(space: SearchSpace, cell_ids: Sequence[int]) -> tuple[Interval, ...]:
    return space.partition.union(cell_ids)


def complement_of(coalition) -> tuple[Interval, ...]:
    return complement(coalition)
