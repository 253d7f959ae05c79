"""Finite NTU strategic games stored as dense payoff tables."""
from __future__ import annotations

import itertools
import json
from fractions import Fraction
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np

from ..errors import GameInputError
from ..numbers import as_fraction, from_json_number, is_exact, to_json_number


class FiniteGame:
    """Players ``J`` with weights, finite action grids and a payoff table.

    ``table[i_1, ..., i_n, j]`` is player ``j``'s payoff when every player
    ``k`` plays ``actions[k][i_k]``. Exact games use an object array of
    Fractions; float games use float64. ``bound`` is the declared ``B``
    with ``|u| <= B``.
    """

    def __init__(self, players: Sequence, weights: Sequence, actions: Sequence[Sequence],
                 table: np.ndarray, bound, *, name: str | None = None, meta: dict | None = None):
        players = tuple(players)
        if len(set(players)) != len(players) or not players:
            raise GameInputError("player ids must be distinct and nonempty")
        weights = tuple(weights)
        actions = tuple(tuple(a) for a in actions)
        if len(weights) != len(players) or len(actions) != len(players):
            raise GameInputError("one weight and one action grid per player")
        if any(not w > 0 for w in weights):
            raise GameInputError("every weight must be strictly positive")
        if any(len(a) == 0 or len(set(a)) != len(a) for a in actions):
            raise GameInputError("action grids must be nonempty with distinct labels")
        shape = tuple(len(a) for a in actions) + (len(players),)
        table = np.asarray(table)
        if table.shape != shape:
            raise GameInputError(f"payoff table has shape {table.shape}, expected {shape}")
        self.exact = table.dtype == object
        if not self.exact:
            table = table.astype(float)
            if not np.all(np.isfinite(table)):
                raise GameInputError("payoffs must be finite")
        table.setflags(write=False)
        self.players = players
        self.weights = weights
        self.actions = actions
        self.table = table
        self.bound = bound
        self.name = name
        self.meta = dict(meta or {})
        self._action_index = [{a: k for k, a in enumerate(acts)} for acts in actions]
        self._player_index = {p: k for k, p in enumerate(players)}
        self._guarantees: dict[tuple[int, ...], np.ndarray] = {}
        if abs(self.max_abs_payoff()) > bound:
            raise GameInputError(f"payoffs exceed the declared bound {bound}")

    @classmethod
    def from_payoff(cls, players, weights, actions, payoff: Callable[[int, tuple], object],
                    bound, *, exact: bool | None = None, **kw) -> FiniteGame:
        """Tabulate ``payoff(player_index, joint_tuple)`` over the full grid."""
        actions = [tuple(a) for a in actions]
        shape = tuple(len(a) for a in actions)
        rows = []
        for joint in itertools.product(*actions):
            rows.append([payoff(j, joint) for j in range(len(players))])
        if exact is None:
            exact = all(is_exact(v) for row in rows for v in row)
        if exact:
            table = np.empty(shape + (len(players),), dtype=object)
            flat = table.reshape(-1, len(players))
            for r, row in enumerate(rows):
                for j, v in enumerate(row):
                    flat[r, j] = Fraction(v)
        else:
            table = np.array(rows, dtype=float).reshape(shape + (len(players),))
        return cls(players, weights, actions, table, bound, **kw)

    # -- indexing ----------------------------------------------------------
    @property
    def n_players(self) -> int:
        return len(self.players)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.table.shape[:-1]

    def player_index(self, p) -> int:
        try:
            return self._player_index[p]
        except KeyError:
            raise GameInputError(f"unknown player {p!r}") from None

    def action_index(self, player: int, action) -> int:
        try:
            return self._action_index[player][action]
        except KeyError:
            raise GameInputError(f"action {action!r} not in player {self.players[player]!r}'s grid") from None

    def index_of(self, joint: Sequence) -> tuple[int, ...]:
        if len(joint) != self.n_players:
            raise GameInputError(f"joint tuple needs {self.n_players} actions")
        return tuple(self.action_index(j, a) for j, a in enumerate(joint))

    def joint_of(self, idx: Sequence[int]) -> tuple:
        return tuple(self.actions[j][k] for j, k in enumerate(idx))

    def joints(self) -> Iterator[tuple]:
        return itertools.product(*self.actions)

    def coalition_indices(self, coalition: Iterable) -> tuple[int, ...]:
        idx = sorted({self.player_index(p) for p in coalition})
        if not idx:
            raise GameInputError("coalition must be nonempty")
        return tuple(idx)

    def payoff_vector(self, idx: Sequence[int]) -> tuple:
        return tuple(self.table[tuple(idx)])

    def max_abs_payoff(self):
        if self.table.size == 0:
            return 0
        return max(abs(self.table.max()), abs(self.table.min()))

    def coalitions(self) -> Iterator[tuple[int, ...]]:
        """Nonempty coalitions by ascending size, then lexicographically."""
        n = self.n_players
        for size in range(1, n + 1):
            yield from itertools.combinations(range(n), size)

    def guarantees(self, S: tuple[int, ...]) -> np.ndarray:
        """Worst-case payoffs ``min_{v_-S} u_i(v_S, v_-S)`` for ``i in S``.

        Returned shape: ``(prod of S's grid sizes, |S|)``; rows follow the
        lexicographic order of ``v_S``. Taking the minimum over players and
        over complements commutes, so ``H(v_S, y) = min_i (row_i - y_i)``.
        """
        S = tuple(S)
        hit = self._guarantees.get(S)
        if hit is not None:
            return hit
        comp = tuple(k for k in range(self.n_players) if k not in S)
        sub = self.table[..., list(S)]
        if comp:
            sub = np.min(sub, axis=comp)
        out = sub.reshape(-1, len(S))
        out.setflags(write=False)
        self._guarantees[S] = out
        return out

    # -- serialization -----------------------------------------------------
    def to_json(self) -> dict:
        flat = self.table.reshape(-1, self.n_players)
        return {
            "schema": "weakcore.finite_game/1",
            "name": self.name,
            "players": [{"id": p, "weight": to_json_number(w),
                         "actions": [_action_json(a) for a in acts]}
                        for p, w, acts in zip(self.players, self.weights, self.actions)],
            "payoffs": [[to_json_number(v) for v in row] for row in flat],
            "bound": to_json_number(self.bound),
            "exact": bool(self.exact),
        }

    @classmethod
    def from_json(cls, data: dict) -> FiniteGame:
        players = [p["id"] for p in data["players"]]
        weights = [from_json_number(p["weight"]) for p in data["players"]]
        actions = [[_action_from_json(a) for a in p["actions"]] for p in data["players"]]
        shape = tuple(len(a) for a in actions) + (len(players),)
        rows = data["payoffs"]
        expected = int(np.prod(shape[:-1]))
        if len(rows) != expected or any(len(r) != len(players) for r in rows):
            raise GameInputError(f"payoff table must list {expected} rows of {len(players)} entries")
        exact = data.get("exact")
        if exact is None:
            exact = all(isinstance(v, (str, int)) for r in rows for v in r)
        if exact:
            table = np.empty(shape, dtype=object)
            table.reshape(-1, len(players))[:] = [[as_fraction(v) for v in r] for r in rows]
        else:
            table = np.array([[float(from_json_number(v)) for v in r] for r in rows]).reshape(shape)
        return cls(players, weights, actions, table, from_json_number(data["bound"]),
                   name=data.get("name"))

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)

    def __repr__(self):
        label = f" {self.name!r}" if self.name else ""
        return f"<FiniteGame{label} players={len(self.players)} shape={self.shape}>"


def _action_json(a):
    if isinstance(a, Fraction):
        return f"{a.numerator}/{a.denominator}"
    if isinstance(a, (np.integer,)):
        return int(a)
    return a


def _action_from_json(a):
    if isinstance(a, str) and "/" in a:
        return Fraction(a)
    return a


def evaluate(game: FiniteGame, joint: Sequence) -> tuple:
    """Payoff vector ``(u_j(joint))_j``."""
    return game.payoff_vector(game.index_of(joint))
