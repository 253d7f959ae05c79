"""Coalition blocking in finite games, with and without the ε-slack.

A coalition ``S`` blocks the status quo ``h`` at ``ε`` when some joint
deviation ``v_S`` gives every member strictly more than ``u_i(h) + ε``
against every complement tuple. ``ε = 0`` is α-blocking.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from ..errors import GameInputError
from ..numbers import TAU, as_fraction, to_json_number
from .game import FiniteGame, _action_json


@dataclass(frozen=True)
class BlockingCertificate:
    """Witness that ``coalition`` blocks a status quo by ``deviation``.

    ``margin`` is the verified worst-case improvement minus ``epsilon``;
    a valid certificate has ``margin > 0``.
    """

    coalition: tuple
    deviation: Mapping = field(hash=False)
    epsilon: object
    margin: object

    def __post_init__(self):
        if not self.coalition:
            raise GameInputError("certificate coalition is empty")
        if set(self.deviation) != set(self.coalition):
            raise GameInputError("deviation must assign exactly the coalition members")

    def to_json(self) -> dict:
        return {"coalition": list(self.coalition),
                "deviation": {str(p): _action_json(a) for p, a in self.deviation.items()},
                "epsilon": to_json_number(self.epsilon),
                "margin": to_json_number(self.margin)}


def _coerce_eps(game: FiniteGame, epsilon):
    if epsilon < 0:
        raise GameInputError("epsilon must be nonnegative")
    return as_fraction(epsilon) if game.exact else float(epsilon)


def _positive(game: FiniteGame, x) -> bool:
    return x > 0 if game.exact else x > TAU


def iter_blocking(game: FiniteGame, status_quo: Sequence, epsilon) -> Iterator[BlockingCertificate]:
    """All blocking certificates, coalitions by size then lexicographic,
    deviations in lexicographic grid order."""
    eps = _coerce_eps(game, epsilon)
    y = game.payoff_vector(game.index_of(status_quo))
    for S in game.coalitions():
        W = game.guarantees(S)
        ys = np.array([y[i] for i in S], dtype=W.dtype)
        slack = (W - ys).min(axis=1) - eps
        grid = [len(game.actions[i]) for i in S]
        for r in range(len(slack)):
            if _positive(game, slack[r]):
                dev_idx = np.unravel_index(r, grid)
                dev = {game.players[i]: game.actions[i][int(k)] for i, k in zip(S, dev_idx)}
                yield BlockingCertificate(tuple(game.players[i] for i in S), dev, eps, slack[r])


def find_blocking(game: FiniteGame, status_quo: Sequence, epsilon) -> BlockingCertificate | None:
    """First blocking certificate in the fixed search order, else ``None``."""
    return next(iter_blocking(game, status_quo, epsilon), None)


def is_blocked(game: FiniteGame, status_quo: Sequence, epsilon) -> bool:
    eps = _coerce_eps(game, epsilon)
    y = game.payoff_vector(game.index_of(status_quo))
    for S in game.coalitions():
        W = game.guarantees(S)
        ys = np.array([y[i] for i in S], dtype=W.dtype)
        slack = (W - ys).min(axis=1) - eps
        if game.exact:
            if any(v > 0 for v in slack):
                return True
        elif slack.max() > TAU:
            return True
    return False


def certificate_margin(game: FiniteGame, status_quo: Sequence, coalition: Iterable,
                       deviation: Mapping, epsilon):
    """Worst-case improvement minus ``epsilon``, from the raw table.

    Enumerates every complement tuple by slicing the payoff table; does
    not use the cached guarantee tables.
    """
    S = game.coalition_indices(coalition)
    members = {game.players[i] for i in S}
    if set(deviation) != members:
        raise GameInputError("deviation must assign exactly the coalition members")
    y = game.payoff_vector(game.index_of(status_quo))
    index = []
    for k in range(game.n_players):
        if k in S:
            index.append(game.action_index(k, deviation[game.players[k]]))
        else:
            index.append(slice(None))
    outcomes = game.table[tuple(index)].reshape(-1, game.n_players)
    worst = None
    for row in outcomes:
        for i in S:
            d = row[i] - y[i]
            if worst is None or d < worst:
                worst = d
    return worst - _coerce_eps(game, epsilon)


def verify_certificate(game: FiniteGame, status_quo: Sequence, cert: BlockingCertificate) -> bool:
    """Recompute the blocking inequality for ``cert`` from scratch."""
    if not isinstance(cert, BlockingCertificate):
        raise GameInputError("not a BlockingCertificate")
    margin = certificate_margin(game, status_quo, cert.coalition, cert.deviation, cert.epsilon)
    return _positive(game, margin)


def iter_weak_core(game: FiniteGame, epsilon, candidates: Iterable[Sequence] | None = None):
    """Yield the candidates (default: full grid) that no coalition blocks."""
    if candidates is None:
        candidates = game.joints()
    for joint in candidates:
        joint = tuple(joint)
        if not is_blocked(game, joint, epsilon):
            yield joint


def weak_core_members(game: FiniteGame, epsilon, candidates: Iterable[Sequence] | None = None) -> list:
    """Unblocked candidates at ``epsilon``; ``epsilon = 0`` gives the α-core."""
    return list(iter_weak_core(game, epsilon, candidates))


def alpha_core_members(game: FiniteGame, candidates: Iterable[Sequence] | None = None) -> list:
    return weak_core_members(game, 0, candidates)
