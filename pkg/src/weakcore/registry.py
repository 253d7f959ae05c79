"""Named fixtures reachable from the command line."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable

from . import examples
from .anonymous import AnonymousGame
from .continuum.game import ContinuumGame
from .errors import GameInputError
from .finite.game import FiniteGame


@dataclass(frozen=True)
class Fixture:
    name: str
    kind: str  # "finite", "continuum" or "anonymous"
    build: Callable
    description: str
    expect: dict = field(default_factory=dict)


def single_player_game() -> FiniteGame:
    acts = (0, 1, 2, 3)
    vals = {0: Fraction(0), 1: Fraction(2), 2: Fraction(3), 3: Fraction(3)}
    return FiniteGame.from_payoff(["p1"], [1], [acts], lambda j, joint: vals[joint[0]], 3,
                                  name="single-player")


def zero_game() -> ContinuumGame:
    return ContinuumGame("zero", lambda t, f: 0, 0,
                         payoff_array=lambda ts, f: 0.0 * ts,
                         cell_integral=lambda a, b, f: Fraction(0), causal=True,
                         description="U = 0")


FIXTURES = {
    f.name: f for f in [
        Fixture("example1", "continuum", examples.example1_game,
                "running-average game whose weak-core is empty",
                {"weak-core": "empty"}),
        Fixture("example2", "continuum", examples.example2_game,
                "integral-capped game: α-core empty, weak-core nonempty",
                {"alpha-core": "empty", "pipeline": "unblocked"}),
        Fixture("concave-test", "continuum", examples.concave_test_game,
                "1 - |mean(f) - t|, concave and jointly continuous",
                {"pipeline": "unblocked"}),
        Fixture("zero", "continuum", zero_game, "identically zero continuum payoff"),
        Fixture("anonymous-W", "anonymous", lambda: AnonymousGame(variant="W"),
                "four-action distribution game with a blocking cycle",
                {"cycle": "empty", "weak-core": "empty"}),
        Fixture("anonymous-Wtilde", "anonymous", lambda: AnonymousGame(variant="Wtilde"),
                "smoothed, concave-in-distribution version of anonymous-W",
                {"cycle": "empty", "weak-core": "empty", "contrast": "holds"}),
        Fixture("ex1-finite", "finite", lambda: AnonymousGame(variant="W").finite_game(),
                "anonymous-W as a four-player finite game (one player per cell)",
                {"weak-core": "empty"}),
        Fixture("single-player", "finite", single_player_game,
                "one player, payoffs 0, 2, 3, 3 on actions 0..3"),
    ]
}


def registry_list() -> list[dict]:
    return [{"name": f.name, "kind": f.kind, "description": f.description}
            for f in FIXTURES.values()]


def resolve(name: str) -> tuple[Fixture, object]:
    """Fixture by name, or a finite game loaded from a JSON path."""
    if name in FIXTURES:
        fx = FIXTURES[name]
        return fx, fx.build()
    path = Path(name)
    if path.suffix == ".json" and path.exists():
        game = FiniteGame.from_json(json.loads(path.read_text()))
        fx = Fixture(str(path), "finite", lambda: game, f"finite game loaded from {path}")
        return fx, game
    raise GameInputError(f"unknown game {name!r}; known: {', '.join(FIXTURES)}")
