"""Discretize-and-limit: finite weak-core members along a partition net.

Each stage discretizes the continuum game on a finer partition, picks a
member of the finite weak-core, and lifts it back to a step profile.
Convergence is tracked through a finite family of linear test integrals;
the last profile is then probed for continuum blocking.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from ..errors import PipelineFailure
from ..finite.blocking import is_blocked
from ..numbers import as_fraction, to_json_number
from .game import ContinuumGame, discretize
from .profiles import IntervalPartition, PartitionNet, StepProfile, lift
from .search import (RESOLUTION_CAVEAT, ContinuumCertificate, SearchSpace, dyadic_samples,
                     find_blocking_continuum, iter_blocking_continuum, transfer_certificate)


def default_test_points(k: int = 8) -> tuple[Fraction, ...]:
    """Right endpoints ``q`` of the test functions ``χ_(0, q]``; ``q = 1`` is
    the constant function."""
    return tuple(Fraction(j, k) for j in range(1, k + 1))


def test_integrals(f: StepProfile, points: Sequence) -> tuple[Fraction, ...]:
    return tuple(f.cumulative(as_fraction(q)) for q in points)


def weak_distance(f: StepProfile, g: StepProfile, points: Sequence) -> Fraction:
    """``max_q |∫_0^q (f - g)|`` over the test family."""
    return max(abs(a - b) for a, b in zip(test_integrals(f, points), test_integrals(g, points)))


def refine_grid(grid: Sequence) -> tuple[Fraction, ...]:
    g = sorted({as_fraction(x) for x in grid})
    mids = [(a + b) / 2 for a, b in zip(g, g[1:])]
    return tuple(sorted(set(g) | set(mids)))


def _cell_test_matrix(partition: IntervalPartition, points) -> np.ndarray:
    """``M[q, j] = λ(K_j ∩ (0, q])`` so that lifted test integrals are ``M @ y``."""
    return np.array([[float(max(Fraction(0), min(b, q) - a)) for a, b in partition.cells]
                     for q in points])


def candidate_order(finite, previous: StepProfile | None, points) -> np.ndarray:
    """Flat joint indices in the order the stage inspects them.

    Without a previous stage: best worst-off per-unit payoff first, then
    least dispersed, then lexicographic. With one: closest in test
    integrals to the previous profile first.
    """
    n = finite.n_players
    flat = np.asarray(finite.table, dtype=float).reshape(-1, n)
    w = np.array([float(x) for x in finite.weights])
    score = (flat / w).min(axis=1)
    grid = np.array([float(a) for a in finite.actions[0]])
    idx = np.indices(finite.shape).reshape(n, -1).T
    Y = grid[idx]
    m = Y @ w
    dispersion = ((Y - m[:, None]) ** 2) @ w
    keys = [np.arange(len(flat)), np.round(dispersion, 12), -np.round(score, 12)]
    if previous is not None:
        M = _cell_test_matrix(finite.meta["partition"], points)
        prev = np.array([float(v) for v in test_integrals(previous, points)])
        dist = np.abs(Y @ M.T - prev).max(axis=1)
        keys.append(np.round(dist, 12))
    return np.lexsort(keys)


@dataclass
class StageRecord:
    partition: IntervalPartition
    grid: tuple
    epsilon: float
    joint: tuple
    profile: StepProfile
    candidates_checked: int
    grid_refinements: int
    integrals: tuple

    def to_json(self) -> dict:
        return {"cells": len(self.partition),
                "partition": self.partition.to_json(),
                "grid": [str(g) for g in self.grid],
                "finite_epsilon": to_json_number(self.epsilon),
                "joint": [str(v) for v in self.joint],
                "profile": self.profile.to_json(),
                "candidates_checked": self.candidates_checked,
                "grid_refinements": self.grid_refinements,
                "test_integrals": [str(v) for v in self.integrals]}


@dataclass
class PipelineReport:
    game: str
    epsilon: object
    test_points: tuple
    stages: list = field(default_factory=list)
    final_certificate: ContinuumCertificate | None = None
    verification_space: SearchSpace | None = None
    failure: str | None = None
    caveat: str = RESOLUTION_CAVEAT

    @property
    def successive_distances(self) -> list[Fraction]:
        return [weak_distance(a.profile, b.profile, self.test_points)
                for a, b in zip(self.stages, self.stages[1:])]

    def distance_matrix(self) -> list[list[Fraction]]:
        return [[weak_distance(a.profile, b.profile, self.test_points) for b in self.stages]
                for a in self.stages]

    @property
    def final_profile(self) -> StepProfile | None:
        return self.stages[-1].profile if self.stages else None

    @property
    def final_unblocked(self) -> bool:
        return self.failure is None and self.final_certificate is None

    def to_json(self) -> dict:
        return {"game": self.game,
                "epsilon": to_json_number(self.epsilon),
                "test_functions": [f"chi(0,{q}]" for q in self.test_points],
                "stages": [s.to_json() for s in self.stages],
                "successive_distances": [str(d) for d in self.successive_distances],
                "distance_matrix": [[str(d) for d in row] for row in self.distance_matrix()],
                "final_blocking": None if self.final_certificate is None
                else self.final_certificate.to_json(),
                "final_unblocked": self.final_unblocked,
                "verification_space": None if self.verification_space is None
                else self.verification_space.to_json(),
                "failure": self.failure,
                "caveat": self.caveat}

    def to_csv(self) -> str:
        buf = io.StringIO()
        out = csv.writer(buf)
        out.writerow(["stage", "test_function", "integral"])
        for k, s in enumerate(self.stages):
            for q, v in zip(self.test_points, s.integrals):
                out.writerow([k, f"chi(0,{q}]", str(v)])
        return buf.getvalue()


def finite_epsilon(epsilon, partition: IntervalPartition) -> float:
    """Slack for the finite games: ``(ε/4) · min λ(K_j)``."""
    return float(epsilon) / 4 * float(min(partition.weights))


def existence_pipeline(game: ContinuumGame, net: PartitionNet, grid: Sequence, epsilon, *,
                       grid_budget: int = 1, max_candidates: int | None = None,
                       test_points: Sequence | None = None,
                       verification: SearchSpace | None = None):
    """Run the net; returns ``(final_profile, report)``.

    Raises :class:`PipelineFailure` (carrying the partial report) when a
    stage has no finite weak-core member even after ``grid_budget`` grid
    refinements.
    """
    points = tuple(test_points) if test_points is not None else default_test_points()
    report = PipelineReport(game.name, epsilon, points)
    previous = None
    for partition in net:
        g = tuple(as_fraction(x) for x in grid)
        eps_pi = finite_epsilon(epsilon, partition)
        for attempt in range(grid_budget + 1):
            finite = discretize(game, partition, g)
            order = candidate_order(finite, previous, points)
            if max_candidates is not None:
                order = order[:max_candidates]
            found, checked = None, 0
            for r in order:
                checked += 1
                joint = finite.joint_of(np.unravel_index(int(r), finite.shape))
                if not is_blocked(finite, joint, eps_pi):
                    found = joint
                    break
            if found is not None:
                break
            if attempt < grid_budget:
                g = refine_grid(g)
        if found is None:
            report.failure = (f"no finite weak-core member on {len(partition)} cells after "
                              f"{grid_budget} grid refinements")
            raise PipelineFailure(report.failure, report)
        prof = lift(partition, [as_fraction(v) for v in found])
        report.stages.append(StageRecord(partition, g, eps_pi, tuple(found), prof, checked,
                                         attempt, test_integrals(prof, points)))
        previous = prof
    space = verification or SearchSpace(IntervalPartition.uniform(4), tuple(grid),
                                        dyadic_samples(), (Fraction(1, 4), Fraction(1, 2)))
    space = space.with_profile_points(previous)
    report.verification_space = space
    report.final_certificate = find_blocking_continuum(game, previous, epsilon, space)
    return previous, report


# -- blocking transfer ----------------------------------------------------------

@dataclass
class TransferRecord:
    status_quo: tuple
    continuum: ContinuumCertificate
    finite_margin: float
    threshold: float

    @property
    def holds(self) -> bool:
        return self.finite_margin > 0

    def to_json(self) -> dict:
        return {"status_quo": [str(v) for v in self.status_quo],
                "continuum": self.continuum.to_json(),
                "finite_threshold": self.threshold,
                "finite_margin": self.finite_margin,
                "holds": self.holds}


def blocking_transfer(game: ContinuumGame, partition: IntervalPartition, grid: Sequence,
                      status_quos: Sequence[Sequence], epsilon, *, samples=None,
                      per_profile: int | None = None) -> list[TransferRecord]:
    """Map every continuum certificate found over ``partition`` to the
    discretized game and recompute its finite margin there."""
    grid = tuple(as_fraction(g) for g in grid)
    finite = discretize(game, partition, grid)
    space = SearchSpace(partition, grid, samples if samples is not None else dyadic_samples())
    out = []
    for joint in status_quos:
        joint = tuple(as_fraction(v) for v in joint)
        sq = lift(partition, joint)
        for k, cert in enumerate(iter_blocking_continuum(game, sq, epsilon, space)):
            if per_profile is not None and k >= per_profile:
                break
            fin = transfer_certificate(cert, finite, joint)
            out.append(TransferRecord(joint, cert, float(fin.margin), float(fin.epsilon)))
    return out


# -- regularity diagnostics ----------------------------------------------------

def default_probes(at: StepProfile, grid: Sequence, depths=range(1, 13)):
    """``at`` with its values on ``(0, δ]`` replaced by a grid constant, for
    dyadic ``δ``."""
    for k in depths:
        d = Fraction(1, 2 ** k)
        for c in grid:
            yield at.replace_on(((Fraction(0), d),), StepProfile.constant(as_fraction(c)))


def in_weak_neighborhood(at: StepProfile, probe: StepProfile, points, radius) -> bool:
    return weak_distance(at, probe, points) < as_fraction(radius)


def equi_usc_falsifier(game: ContinuumGame, at: StepProfile, epsilon, *, radius=Fraction(1, 20),
                       test_points: Sequence | None = None, samples=None, probes=None):
    """Search for ``(t, f')`` with ``f'`` weakly close to ``at`` and
    ``U(t, f') >= U(t, at) + ε``. Returns ``(t, f', gain)`` or ``None``.

    A witness refutes equi-upper-semicontinuity at ``at`` for this ``ε``
    and neighbourhood; ``None`` is inconclusive.
    """
    points = tuple(test_points) if test_points is not None else default_test_points()
    samples = tuple(samples) if samples is not None else dyadic_samples(6, 13)
    if probes is None:
        probes = default_probes(at, [Fraction(k, 4) for k in range(5)])
    ts = np.array([float(s) for s in samples])
    base = game.evaluate_many(ts, at)
    for probe in probes:
        if not in_weak_neighborhood(at, probe, points, radius):
            continue
        gain = game.evaluate_many(ts, probe) - base
        hit = np.flatnonzero(gain >= float(epsilon))
        if hit.size:
            k = int(hit[0])
            return samples[k], probe, float(gain[k])
    return None


def regularity_diagnostics(game: ContinuumGame, profiles: Sequence[StepProfile], *, samples=None,
                           epsilon=Fraction(1, 10), radius=Fraction(1, 20)) -> dict:
    """Sampled checks of boundedness, continuity in ``t`` and equi-usc.

    Continuity is reported as the largest payoff jump between adjacent
    samples; it shrinks with the sample spacing for continuous payoffs.
    """
    samples = tuple(samples) if samples is not None else dyadic_samples(8, 8)
    ts = np.array([float(s) for s in samples])
    worst_abs, worst_jump, witnesses = 0.0, 0.0, []
    for f in profiles:
        vals = game.evaluate_many(ts, f)
        worst_abs = max(worst_abs, float(np.abs(vals).max()))
        worst_jump = max(worst_jump, float(np.abs(np.diff(vals)).max()) if len(vals) > 1 else 0.0)
        w = equi_usc_falsifier(game, f, epsilon, radius=radius)
        if w is not None:
            witnesses.append({"at": f.to_json(), "t": str(w[0]), "probe": w[1].to_json(),
                              "gain": w[2]})
    return {"game": game.name,
            "profiles": len(profiles),
            "bound": to_json_number(game.bound),
            "max_abs_payoff": worst_abs,
            "bounded": worst_abs <= float(game.bound) + 1e-12,
            "max_adjacent_jump": worst_jump,
            "sample_spacing": float(min(np.diff(ts))) if len(ts) > 1 else None,
            "equi_usc_epsilon": to_json_number(as_fraction(epsilon)),
            "equi_usc_radius": to_json_number(as_fraction(radius)),
            "equi_usc_witnesses": witnesses}
