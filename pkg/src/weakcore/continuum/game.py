"""Continuum-player games ``U(t, f)`` on T = [0, 1] and their finite
discretizations ``G_π``."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from ..errors import GameInputError, IntegrationError
from ..finite.game import FiniteGame
from ..numbers import as_fraction
from .profiles import Interval, IntervalPartition, StepProfile

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(12)


@dataclass(frozen=True, eq=False)
class ContinuumGame:
    """Payoff ``U(t, f)`` with declared bound ``|U| <= bound``.

    ``payoff`` evaluates one player (exact when handed a Fraction ``t``
    and the fixture supports it); ``payoff_array`` is an optional
    vectorised float evaluator over an array of ``t``. ``cell_integral``
    is a closed-form ``∫_a^b U(t, f) dt`` when one exists, and ``kinks``
    lists the points in ``(a, b)`` where ``U(., f)`` may fail to be smooth.
    ``causal`` declares that ``U(t, f)`` only depends on ``f`` on (0, t];
    ``mean_field`` declares that it only depends on ``f`` through ``∫ f``.
    """

    name: str
    payoff: Callable
    bound: float
    payoff_array: Callable | None = None
    cell_integral: Callable | None = None
    kinks: Callable | None = None
    causal: bool = False
    mean_field: bool = False
    tol: float = 1e-10
    description: str = ""
    extras: dict = field(default_factory=dict)

    def evaluate(self, t, f: StepProfile):
        return self.payoff(t, f)

    def evaluate_many(self, ts: Sequence, f: StepProfile) -> np.ndarray:
        ts = np.asarray(ts, dtype=float)
        if self.payoff_array is not None:
            return np.asarray(self.payoff_array(ts, f), dtype=float)
        return np.array([float(self.payoff(float(t), f)) for t in ts])


def _gauss(fn, a: float, b: float) -> float:
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    return half * float(np.dot(_GL_WEIGHTS, fn(mid + half * _GL_NODES)))


def adaptive_gauss(fn, a: float, b: float, tol: float, max_depth: int = 40):
    """Adaptive Gauss–Legendre on [a, b]; returns ``(value, error_estimate)``."""
    whole = _gauss(fn, a, b)
    stack = [(a, b, whole, tol, 0)]
    total, err = 0.0, 0.0
    while stack:
        lo, hi, coarse, tl, depth = stack.pop()
        mid = 0.5 * (lo + hi)
        left, right = _gauss(fn, lo, mid), _gauss(fn, mid, hi)
        diff = abs(left + right - coarse)
        if diff <= tl or hi - lo < 1e-14:
            total += left + right
            err += diff
        elif depth >= max_depth:
            raise IntegrationError("adaptive quadrature did not converge",
                                   interval=(lo, hi), estimate=left + right, error=diff)
        else:
            stack.append((lo, mid, left, tl / 2, depth + 1))
            stack.append((mid, hi, right, tl / 2, depth + 1))
    return total, err


def integrate_payoff(game: ContinuumGame, cell: Interval, profile: StepProfile):
    """``∫_cell U(t, profile) dt``: closed form when the game provides one,
    else kink-aware adaptive Gauss–Legendre within ``game.tol``."""
    a, b = as_fraction(cell[0]), as_fraction(cell[1])
    if not (0 <= a < b <= 1):
        raise GameInputError(f"cell ({a}, {b}] is not inside (0, 1]")
    if game.cell_integral is not None:
        value = game.cell_integral(a, b, profile)
    else:
        fa, fb = float(a), float(b)
        if game.kinks is not None:
            cuts = game.kinks(profile, fa, fb)
        else:
            cuts = [float(x) for x in profile.breakpoints]
        pts = sorted({fa, fb, *(c for c in cuts if fa < c < fb)})
        fn = lambda ts: game.evaluate_many(ts, profile)  # noqa: E731
        value, err = 0.0, 0.0
        seg_tol = game.tol / max(len(pts) - 1, 1)
        for lo, hi in zip(pts, pts[1:]):
            v, e = adaptive_gauss(fn, lo, hi, seg_tol)
            value += v
            err += e
        if err > game.tol:
            raise IntegrationError(f"quadrature error {err:.3g} above tolerance {game.tol:.3g}",
                                   interval=(a, b), estimate=value, error=err)
    if abs(value) > game.bound * (b - a) + 10 * game.tol:
        raise IntegrationError(f"integral {value} exceeds the payoff bound on ({a}, {b}]",
                               interval=(a, b), estimate=value)
    return value


def discretize(game: ContinuumGame, partition: IntervalPartition, grid: Sequence) -> FiniteGame:
    """The finite game with one player per cell.

    Player ``j`` has weight ``λ(K_j)``, actions ``grid`` and payoff
    ``g_j(y) = ∫_{K_j} U(t, lift(y)) dt``.
    """
    grid = tuple(as_fraction(g) for g in grid)
    if not grid:
        raise GameInputError("action grid must be nonempty")
    cells = partition.cells
    n = len(cells)
    table = np.empty((len(grid),) * n + (n,), dtype=float)
    bps = partition.breakpoints
    if game.mean_field:
        # g_j(y) = g_j(constant profile at the mean of y)
        w = np.array([float(x) for x in partition.weights])
        gvals = np.array([float(g) for g in grid])
        mesh = np.stack(np.meshgrid(*([gvals] * n), indexing="ij"), axis=-1)
        means = np.round(mesh @ w, 12)
        uniq, inv = np.unique(means, return_inverse=True)
        per = np.array([[integrate_payoff(game, cell, StepProfile.constant(Fraction(m), check=False))
                         for cell in cells] for m in uniq])
        table[...] = per[inv.reshape(means.shape)]
    elif game.causal:
        # g_j only sees cells 0..j; memoise on the prefix
        memo: dict[tuple[int, ...], float] = {}
        for idx in itertools.product(range(len(grid)), repeat=n):
            for j in range(n):
                key = idx[: j + 1]
                v = memo.get(key)
                if v is None:
                    vals = [grid[k] for k in key] + [grid[0]] * (n - j - 1)
                    f = StepProfile(bps, vals, check=False)
                    v = memo[key] = integrate_payoff(game, cells[j], f)
                table[idx + (j,)] = v
    else:
        for idx in itertools.product(range(len(grid)), repeat=n):
            f = StepProfile(bps, [grid[k] for k in idx], check=False)
            for j in range(n):
                table[idx + (j,)] = integrate_payoff(game, cells[j], f)
    weights = partition.weights
    return FiniteGame(
        [f"K{j + 1}" for j in range(n)], weights, [grid] * n, table,
        float(game.bound) * float(max(weights)) + 1e-9,
        name=f"{game.name}@{n}cells",
        meta={"partition": partition, "grid": grid, "source": game.name},
    )


def lifted_joint(finite: FiniteGame, joint: Sequence) -> StepProfile:
    """The step profile of a joint tuple of a discretized game."""
    return StepProfile.from_cells(finite.meta["partition"], joint)
