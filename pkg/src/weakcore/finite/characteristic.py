"""Characteristic-form view of a finite strategic game.

``V(S)`` is the set of payoff vectors coalition ``S`` can guarantee its
members against every complement tuple. Membership goes through
``H(v_S, y) = min over v_-S, i in S of u_i(v_S, v_-S) - y_i``.
"""
from __future__ import annotations

import itertools
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.optimize import linprog

from ..errors import CapabilityError, GameInputError
from ..numbers import TAU, as_fraction
from .game import FiniteGame

MAX_BALANCED_PLAYERS = 4


def _deviation_indices(game: FiniteGame, S: tuple[int, ...], v_S) -> dict[int, int]:
    if isinstance(v_S, Mapping):
        if {game.player_index(p) for p in v_S} != set(S):
            raise GameInputError("v_S must assign exactly the coalition members")
        return {game.player_index(p): game.action_index(game.player_index(p), a)
                for p, a in v_S.items()}
    v_S = tuple(v_S)
    if len(v_S) != len(S):
        raise GameInputError("v_S must assign exactly the coalition members")
    return {i: game.action_index(i, a) for i, a in zip(S, v_S)}


def _as_payoffs(game: FiniteGame, y: Sequence):
    if len(y) != game.n_players:
        raise GameInputError(f"payoff vector needs {game.n_players} entries")
    return [as_fraction(v) for v in y] if game.exact else [float(v) for v in y]


def H_value(game: FiniteGame, S: Iterable, v_S, y: Sequence):
    """``inf_{v_-S} min_{i in S} (u_i(v_S, v_-S) - y_i)`` by enumeration.

    When ``S`` is the grand coalition the complement is empty and the
    inner minimum stands alone.
    """
    S = game.coalition_indices(S)
    dev = _deviation_indices(game, S, v_S)
    y = _as_payoffs(game, y)
    comp = [k for k in range(game.n_players) if k not in S]
    best = None
    for rest in itertools.product(*(range(len(game.actions[k])) for k in comp)):
        idx = [0] * game.n_players
        for i, a in dev.items():
            idx[i] = a
        for k, a in zip(comp, rest):
            idx[k] = a
        row = game.table[tuple(idx)]
        for i in S:
            d = row[i] - y[i]
            if best is None or d < best:
                best = d
    return best


def in_V(game: FiniteGame, S: Iterable, y: Sequence) -> bool:
    """``y in V(S)``: some ``v_S`` on the grid has ``H(v_S, y) >= 0``."""
    S = game.coalition_indices(S)
    y = _as_payoffs(game, y)
    W = game.guarantees(S)
    ys = np.array([y[i] for i in S], dtype=W.dtype)
    worst = (W - ys).min(axis=1)
    if game.exact:
        return any(v >= 0 for v in worst)
    return bool(worst.max() >= -TAU)


def _membership_mask(game: FiniteGame, S: tuple[int, ...], Y: np.ndarray, shift=0) -> np.ndarray:
    """Vectorised ``in_V(S, y + shift*1_S)`` over the rows of ``Y``."""
    W = game.guarantees(S)
    YS = Y[:, list(S)] + shift
    mask = np.zeros(len(Y), dtype=bool)
    for row in W:
        diff = row[None, :] - YS
        ok = (diff >= 0) if game.exact else (diff >= -TAU)
        mask |= np.all(ok, axis=1)
    return mask


def payoff_grid(game: FiniteGame, resolution) -> list[list]:
    """Per-player payoff levels from each player's maximum down to its
    individually guaranteed level, spaced by ``resolution``."""
    levels = []
    for i in range(game.n_players):
        col = game.table[..., i]
        hi = col.max()
        guard = game.guarantees((i,)).max()
        lo = max(col.min(), guard - resolution)
        vals = []
        v = hi
        while v >= lo - (0 if game.exact else TAU):
            vals.append(v)
            v = v - resolution
        levels.append(vals)
    return levels


def _default_resolution(game: FiniteGame):
    span = game.table.max() - game.table.min()
    if span == 0:
        return Fraction(1) if game.exact else 1.0
    return span / 16


def core_point_from_characteristic(game: FiniteGame, resolution=None, delta=None):
    """Grid search for a core point ``y`` of the characteristic game.

    Returns ``(y, joint)`` with ``u(joint) >= y`` or ``None`` if no grid
    vector qualifies. ``y`` qualifies when it lies in ``V(N)`` and no
    coalition can raise its members' entries by ``delta`` and stay inside
    ``V(S)`` (the interiority test; valid because ``V(S)`` is
    comprehensive). ``delta`` defaults to the grid resolution.
    """
    if resolution is None:
        resolution = _default_resolution(game)
    if game.exact:
        resolution = as_fraction(resolution)
    if delta is None:
        delta = resolution
    levels = payoff_grid(game, resolution)
    dtype = object if game.exact else float
    Y = np.array(list(itertools.product(*levels)), dtype=dtype)
    if len(Y) == 0:
        return None
    # highest total first, ties lexicographically largest
    sums = np.array([float(sum(r)) for r in Y]) if game.exact else Y.sum(axis=1)
    order = sorted(range(len(Y)), key=lambda r: (-sums[r], [-float(v) for v in Y[r]]))
    Y = Y[order]
    N = tuple(range(game.n_players))
    ok = _membership_mask(game, N, Y)
    for S in game.coalitions():
        if not ok.any():
            break
        ok &= ~_membership_mask(game, S, Y, delta)
    hits = np.flatnonzero(ok)
    if hits.size == 0:
        return None
    y = tuple(Y[hits[0]])
    flat = game.table.reshape(-1, game.n_players)
    for r, row in enumerate(flat):
        if all(row[i] - y[i] >= (0 if game.exact else -TAU) for i in N):
            idx = np.unravel_index(r, game.shape)
            return y, game.joint_of([int(k) for k in idx])
    return None  # unreachable: y was checked against V(N)


def balanced_weights(family: Sequence[Iterable[int]], n: int):
    """Weights ``δ_S >= 0`` with ``sum_{S ∋ i} δ_S = 1`` for each player,
    or ``None`` when the family is not balanced."""
    family = [frozenset(S) for S in family]
    if not family:
        return None
    A = np.array([[1.0 if i in S else 0.0 for S in family] for i in range(n)])
    res = linprog(np.zeros(len(family)), A_eq=A, b_eq=np.ones(n),
                  bounds=[(0, None)] * len(family), method="highs")
    if res.status != 0:
        return None
    return [Fraction(w).limit_denominator(10**6) for w in res.x]


@lru_cache(maxsize=None)
def minimal_balanced_families(n: int) -> tuple[tuple[frozenset, ...], ...]:
    """Balanced families with positive weights and independent incidence
    vectors. Any balanced family contains one of these, so checking them
    suffices for the balancedness condition."""
    if n > MAX_BALANCED_PLAYERS:
        raise CapabilityError(f"balanced-family enumeration supports at most {MAX_BALANCED_PLAYERS} players")
    coalitions = [frozenset(c) for size in range(1, n + 1)
                  for c in itertools.combinations(range(n), size)]
    found = []
    for k in range(1, n + 1):
        for fam in itertools.combinations(coalitions, k):
            A = np.array([[1.0 if i in S else 0.0 for S in fam] for i in range(n)])
            if np.linalg.matrix_rank(A) < k:
                continue
            w = balanced_weights(fam, n)
            if w is not None and all(x > 0 for x in w):
                found.append(fam)
    return tuple(found)


def balancedness_violations(game: FiniteGame, y_grid: Sequence[Sequence]) -> list[tuple]:
    """``(family, y)`` pairs where ``y`` lies in every ``V(S)`` of a balanced
    family but not in ``V(N)``."""
    n = game.n_players
    if n > MAX_BALANCED_PLAYERS:
        raise CapabilityError(f"check_balanced supports at most {MAX_BALANCED_PLAYERS} players, got {n}")
    dtype = object if game.exact else float
    Y = np.array([_as_payoffs(game, y) for y in y_grid], dtype=dtype)
    if len(Y) == 0:
        return []
    masks = {frozenset(S): _membership_mask(game, S, Y) for S in game.coalitions()}
    grand = masks[frozenset(range(n))]
    out = []
    for fam in minimal_balanced_families(n):
        inside = np.logical_and.reduce([masks[S] for S in fam])
        for r in np.flatnonzero(inside & ~grand):
            out.append((tuple(sorted(tuple(sorted(S)) for S in fam)), tuple(Y[r])))
    return out


def check_balanced(game: FiniteGame, y_grid: Sequence[Sequence]) -> bool:
    return not balancedness_violations(game, y_grid)
