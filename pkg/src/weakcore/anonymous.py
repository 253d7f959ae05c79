"""Distribution-form games on four actions and the blocking cycle.

Players in (0, 1] are split into cells ``E1, E2, E3`` of length ``α`` and a
remainder ``R`` of length ``2ε``. A player's payoff depends on its cell,
its own action and the distribution of actions ``p`` over ``{0, 1, 2, 3}``.
Target sets are ``P0 = {δ_0}`` and ``P_i = {p : p(i) >= 2α}``; the table
game ``W`` pays a cell constant when ``p`` lies in the target set of the
player's action, and ``W̃`` smooths it by the distance to that set.

Distances use the unhalved variation norm ``Σ |p_a - q_a|``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.optimize import linprog

from .continuum.profiles import IntervalPartition, StepProfile
from .errors import FixtureCorruptionError, GameInputError
from .finite.blocking import BlockingCertificate
from .finite.game import FiniteGame
from .numbers import as_fraction, to_json_number

ACTIONS = (0, 1, 2, 3)
CELL_NAMES = ("E1", "E2", "E3", "R")

# payoff on (E1, E2, E3) when the distribution is in the action's target set
TABLE = {0: (2, 2, 4), 1: (3, 3, 0), 2: (4, 0, 1), 3: (0, 1, 2)}

FOCAL_BLOCKS = {  # status quo constant -> (coalition cells, deviation constant)
    0: (("E1", "E2"), 1),
    1: (("E1", "E3"), 2),
    2: (("E2", "E3"), 3),
    3: (CELL_NAMES, 0),
}


# -- distributions ------------------------------------------------------------

class Distribution(tuple):
    """Probability vector over ``{0, 1, 2, 3}``; exact when built from
    rationals."""

    def __new__(cls, mass: Iterable):
        mass = tuple(as_fraction(m) if not isinstance(m, float) else m for m in mass)
        if len(mass) != len(ACTIONS):
            raise GameInputError("a distribution needs one mass per action")
        if any(m < 0 for m in mass):
            raise GameInputError("masses must be nonnegative")
        total = sum(mass)
        exact = all(isinstance(m, Fraction) for m in mass)
        if (exact and total != 1) or (not exact and abs(total - 1) > 1e-12):
            raise GameInputError(f"masses sum to {total}, not 1")
        return super().__new__(cls, mass)

    @classmethod
    def point(cls, a: int) -> Distribution:
        return cls(Fraction(int(b == a)) for b in ACTIONS)

    def to_json(self):
        return [to_json_number(m) for m in self]


def tv_distance(p: Sequence, q: Sequence):
    return sum(abs(a - b) for a, b in zip(p, q))


# -- parameters and target sets --------------------------------------------

@dataclass(frozen=True)
class AnonymousParams:
    """``epsilon_geom`` sizes the cells; ``alpha = (1 - 2ε)/3``.

    ``remainder`` fixes the remainder cell's payoff column: ``"E3"`` copies
    the third cell's column (so the grand coalition's move to 0 improves
    every member), ``"zero"`` pays nothing there.
    """

    epsilon_geom: Fraction = Fraction(1, 10)
    remainder: str = "E3"

    def __post_init__(self):
        e = as_fraction(self.epsilon_geom)
        if not 0 < e < Fraction(1, 8):
            raise GameInputError("epsilon_geom must lie in (0, 1/8) so the target sets are disjoint")
        if self.remainder not in ("E3", "zero"):
            raise GameInputError("remainder must be 'E3' or 'zero'")
        object.__setattr__(self, "epsilon_geom", e)

    @property
    def alpha(self) -> Fraction:
        return (1 - 2 * self.epsilon_geom) / 3

    @property
    def lengths(self) -> tuple[Fraction, ...]:
        a = self.alpha
        return (a, a, a, 2 * self.epsilon_geom)

    @property
    def partition(self) -> IntervalPartition:
        a = self.alpha
        return IntervalPartition([0, a, 2 * a, 3 * a, 1])

    @property
    def cells(self):
        return self.partition.cells

    def to_json(self) -> dict:
        return {"epsilon_geom": str(self.epsilon_geom), "alpha": str(self.alpha),
                "cells": [[str(a), str(b)] for a, b in self.cells], "remainder": self.remainder}


def in_target(p: Sequence, i: int, params: AnonymousParams) -> bool:
    if i == 0:
        return p[0] == 1
    return p[i] >= 2 * params.alpha


def dist_to_set(p: Sequence, i: int, params: AnonymousParams):
    """Variation distance from ``p`` to the target set of action ``i``."""
    if i == 0:
        return 2 * (1 - p[0])
    gap = 2 * params.alpha - p[i]
    return 2 * gap if gap > 0 else 0 * gap


def compute_D(params: AnonymousParams) -> Fraction:
    """Smallest distance between two distinct target sets.

    Two sets ``P_i, P_j`` with ``i, j >= 1`` need ``4α - 1`` extra mass on
    one side: distance ``2(4α - 1)``. ``P0`` is at distance ``4α`` from
    every other set.
    """
    a = params.alpha
    return min(2 * (4 * a - 1), 4 * a)


def _target_constraints(i: int, params: AnonymousParams, offset: int, nvar: int):
    """Rows ``A x <= b`` and equalities for ``x[offset:offset+4] in P_i``."""
    A_ub, b_ub, A_eq, b_eq = [], [], [], []
    row = np.zeros(nvar)
    row[offset:offset + 4] = 1
    A_eq.append(row)
    b_eq.append(1.0)
    if i == 0:
        row = np.zeros(nvar)
        row[offset] = 1
        A_eq.append(row)
        b_eq.append(1.0)
    else:
        row = np.zeros(nvar)
        row[offset + i] = -1
        A_ub.append(row)
        b_ub.append(-float(2 * params.alpha))
    return A_ub, b_ub, A_eq, b_eq


def set_distance_lp(i: int, j: int, params: AnonymousParams) -> float:
    """``min ||p - q||_1`` over ``p in P_i, q in P_j`` by linear programming.

    Variables ``p (4), q (4), s (4)`` with ``s >= |p - q|``.
    """
    nvar = 12
    A_ub, b_ub, A_eq, b_eq = [], [], [], []
    for k, off in ((i, 0), (j, 4)):
        u, ub, e, eb = _target_constraints(k, params, off, nvar)
        A_ub += u
        b_ub += ub
        A_eq += e
        b_eq += eb
    for a in range(4):
        for sign in (1, -1):
            row = np.zeros(nvar)
            row[a], row[4 + a], row[8 + a] = sign, -sign, -1
            A_ub.append(row)
            b_ub.append(0.0)
    c = np.r_[np.zeros(8), np.ones(4)]
    res = linprog(c, A_ub=np.array(A_ub), b_ub=b_ub, A_eq=np.array(A_eq), b_eq=b_eq,
                  bounds=[(0, None)] * nvar, method="highs")
    if res.status != 0:
        raise FixtureCorruptionError(f"distance LP failed: {res.message}")
    return float(res.fun)


def dist_to_set_lp(p: Sequence, i: int, params: AnonymousParams) -> float:
    nvar = 8
    A_ub, b_ub, A_eq, b_eq = _target_constraints(i, params, 0, nvar)
    for a in range(4):
        for sign in (1, -1):
            row = np.zeros(nvar)
            row[a], row[4 + a] = -sign, -1
            A_ub.append(row)
            b_ub.append(-sign * float(p[a]))
    c = np.r_[np.zeros(4), np.ones(4)]
    res = linprog(c, A_ub=np.array(A_ub), b_ub=b_ub, A_eq=np.array(A_eq), b_eq=b_eq,
                  bounds=[(0, None)] * nvar, method="highs")
    if res.status != 0:
        raise FixtureCorruptionError(f"distance LP failed: {res.message}")
    return float(res.fun)


def compute_D_lp(params: AnonymousParams) -> float:
    return min(set_distance_lp(i, j, params) for i, j in itertools.combinations(ACTIONS, 2))


# -- payoffs ---------------------------------------------------------------------

def cell_index(t, params: AnonymousParams) -> int:
    t = as_fraction(t)
    if not 0 <= t <= 1:
        raise GameInputError(f"t={t} outside [0, 1]")
    return params.partition.cell_of(t) if t > 0 else 0


def table_value(cell: int, a: int, params: AnonymousParams, table: Mapping | None = None):
    """``W(t, a, P_a)`` for ``t`` in the given cell."""
    col = (table or TABLE)[a]
    if cell < 3:
        return Fraction(col[cell])
    if len(col) > 3:
        return Fraction(col[3])
    return Fraction(col[2]) if params.remainder == "E3" else Fraction(0)


def payoff_W(t, a: int, p: Sequence, params: AnonymousParams, table: Mapping | None = None):
    if a not in ACTIONS:
        raise GameInputError(f"unknown action {a!r}")
    if not in_target(p, a, params):
        return Fraction(0)
    return table_value(cell_index(t, params), a, params, table)


def payoff_W_tilde(t, a: int, p: Sequence, params: AnonymousParams, table: Mapping | None = None,
                   D=None):
    if a not in ACTIONS:
        raise GameInputError(f"unknown action {a!r}")
    D = compute_D(params) if D is None else D
    return table_value(cell_index(t, params), a, params, table) * (D / 2 - dist_to_set(p, a, params))


# -- the game on four cells ------------------------------------------------------

@dataclass(frozen=True)
class AnonymousGame:
    params: AnonymousParams = field(default_factory=AnonymousParams)
    variant: str = "W"
    table: Mapping | None = None
    name: str = ""

    def __post_init__(self):
        if self.variant not in ("W", "Wtilde"):
            raise GameInputError("variant must be 'W' or 'Wtilde'")
        if not self.name:
            object.__setattr__(self, "name", f"anonymous-{self.variant}")

    @cached_property
    def D(self) -> Fraction:
        return compute_D(self.params)

    def cell_payoff(self, cell: int, a: int, p: Sequence):
        """Payoff of a player in ``cell`` playing ``a`` at distribution ``p``."""
        v = table_value(cell, a, self.params, self.table)
        if self.variant == "W":
            return v if in_target(p, a, self.params) else Fraction(0)
        return v * (self.D / 2 - dist_to_set(p, a, self.params))

    def payoff(self, t, a: int, p: Sequence):
        return self.cell_payoff(cell_index(t, self.params), a, p)

    def distribution(self, joint: Sequence[int]) -> Distribution:
        """Distribution induced by a cellwise-constant profile."""
        mass = [Fraction(0)] * 4
        for w, a in zip(self.params.lengths, joint):
            mass[a] += w
        return Distribution(mass)

    def profile_distribution(self, profile: StepProfile) -> Distribution:
        mass = [Fraction(0)] * 4
        for (a, b), v in profile.pieces:
            if v not in ACTIONS:
                raise GameInputError(f"profile value {v} is not an action")
            mass[int(v)] += b - a
        return Distribution(mass)

    def cell_actions(self, profile: StepProfile) -> list[list[int]]:
        """Actions played on a positive-measure part of each cell."""
        out = []
        for a, b in self.params.cells:
            out.append(sorted({int(v) for v in profile.restricted_values(a, b)}))
        return out

    def payoffs(self, joint: Sequence[int]) -> tuple:
        joint = tuple(joint)
        hit = self._payoff_cache.get(joint)
        if hit is None:
            p = self.distribution(joint)
            hit = self._payoff_cache[joint] = tuple(self.cell_payoff(c, a, p)
                                                    for c, a in enumerate(joint))
        return hit

    @cached_property
    def _payoff_cache(self) -> dict:
        return {}

    @cached_property
    def _worst_cache(self) -> dict:
        return {}

    def lift(self, joint: Sequence[int]) -> StepProfile:
        return StepProfile.from_cells(self.params.partition, joint, hi=3)

    def status_quo_levels(self, status_quo) -> tuple:
        """Per cell, the best payoff any positive-measure part of the cell
        receives (blocking must beat it everywhere)."""
        prof = status_quo if isinstance(status_quo, StepProfile) else self.lift(status_quo)
        p = self.profile_distribution(prof)
        return tuple(max(self.cell_payoff(c, a, p) for a in acts)
                     for c, acts in enumerate(self.cell_actions(prof)))

    # -- worst case over complements ------------------------------------
    def guaranteed(self, coalition: Sequence[int], deviation: Sequence[int]) -> tuple:
        """Lower bound on each member's payoff against every complement.

        Payoffs are nondecreasing in the mass on the player's own action
        and the complement can withhold all its mass from any one action,
        so the coalition's own mass on ``a`` is the worst case for a
        player choosing ``a``.
        """
        own = [Fraction(0)] * 4
        for c, a in zip(coalition, deviation):
            own[a] += self.params.lengths[c]
        out = []
        for c, a in zip(coalition, deviation):
            p = [Fraction(0)] * 4
            p[a] = own[a]
            rest = 1 - own[a]
            p[(a + 1) % 4] += rest  # any action other than a
            out.append(self.cell_payoff(c, a, p))
        return tuple(out)

    def enumerated(self, coalition: Sequence[int], deviation: Sequence[int]) -> tuple:
        """Worst payoff per member over cellwise-constant complements."""
        comp = [c for c in range(4) if c not in coalition]
        worst = None
        for rest in itertools.product(ACTIONS, repeat=len(comp)):
            joint = [0] * 4
            for c, a in zip(coalition, deviation):
                joint[c] = a
            for c, a in zip(comp, rest):
                joint[c] = a
            pay = self.payoffs(joint)
            vals = tuple(pay[c] for c in coalition)
            worst = vals if worst is None else tuple(min(x, y) for x, y in zip(worst, vals))
        return worst

    def worst_case(self, coalition, deviation) -> tuple:
        """Componentwise minimum of the bound and the enumeration; cached,
        since it does not depend on the status quo."""
        key = (tuple(coalition), tuple(deviation))
        hit = self._worst_cache.get(key)
        if hit is None:
            g, e = self.guaranteed(*key), self.enumerated(*key)
            hit = self._worst_cache[key] = tuple(min(x, y) for x, y in zip(g, e))
        return hit

    def finite_game(self) -> FiniteGame:
        """The four-player game: one player per cell, per-unit payoffs.

        Distances to the target sets never exceed 2, so three times the
        largest table entry bounds both variants.
        """
        return FiniteGame.from_payoff(
            CELL_NAMES, self.params.lengths, [ACTIONS] * 4,
            lambda j, joint: self.payoffs(joint)[j],
            3 * max(abs(v) for col in (self.table or TABLE).values() for v in col),
            name=f"{self.name}-finite", exact=True)

    def to_json(self) -> dict:
        return {"name": self.name, "variant": self.variant, "params": self.params.to_json(),
                "D": str(self.D),
                "table": {str(a): [str(table_value(c, a, self.params, self.table)) for c in range(4)]
                          for a in ACTIONS}}


def mutated_table(zero_cell: int = 2) -> dict:
    """The table with one cell's column zeroed (remainder keeps its value)."""
    out = {}
    for a, col in TABLE.items():
        col = list(col) + [col[2]]
        col[zero_cell] = 0
        out[a] = tuple(col)
    return out


# -- blocking ------------------------------------------------------------------

def _cells_of(labels) -> tuple[int, ...]:
    try:
        return tuple(sorted(CELL_NAMES.index(c) for c in labels))
    except ValueError:
        raise GameInputError(f"unknown cell among {labels!r}") from None


def anonymous_margin(game: AnonymousGame, status_quo, coalition: Sequence[str],
                     deviation: Mapping[str, int], epsilon):
    """Worst guaranteed improvement minus ``epsilon``; recomputed from the
    payoff definitions."""
    cells = _cells_of(coalition)
    dev = [int(deviation[CELL_NAMES[c]]) for c in cells]
    if any(a not in ACTIONS for a in dev):
        raise GameInputError("deviation uses an unknown action")
    base = game.status_quo_levels(status_quo)
    worst = game.worst_case(cells, dev)
    return min(w - base[c] for w, c in zip(worst, cells)) - as_fraction(epsilon)


def iter_blocking_anonymous(game: AnonymousGame, status_quo, epsilon):
    """Coalitions of cells by size then order, cellwise-constant deviations
    in lexicographic order."""
    eps = as_fraction(epsilon)
    if eps < 0:
        raise GameInputError("epsilon must be nonnegative")
    base = game.status_quo_levels(status_quo)
    for size in range(1, 5):
        for cells in itertools.combinations(range(4), size):
            for dev in itertools.product(ACTIONS, repeat=size):
                worst = game.worst_case(cells, dev)
                margin = min(w - base[c] for w, c in zip(worst, cells)) - eps
                if margin > 0:
                    names = tuple(CELL_NAMES[c] for c in cells)
                    yield BlockingCertificate(names, dict(zip(names, dev)), eps, margin)


def find_blocking_anonymous(game: AnonymousGame, status_quo, epsilon):
    return next(iter_blocking_anonymous(game, status_quo, epsilon), None)


def verify_anonymous_certificate(game: AnonymousGame, status_quo, cert: BlockingCertificate) -> bool:
    return anonymous_margin(game, status_quo, cert.coalition, cert.deviation, cert.epsilon) > 0


def focal_certificate(game: AnonymousGame, a: int, epsilon) -> BlockingCertificate:
    """The cycle's certificate against the constant profile ``a``."""
    cells, b = FOCAL_BLOCKS[a]
    dev = {c: b for c in cells}
    margin = anonymous_margin(game, (a,) * 4, cells, dev, epsilon)
    return BlockingCertificate(tuple(cells), dev, as_fraction(epsilon), margin)


def default_epsilon(game: AnonymousGame) -> Fraction:
    if game.variant == "W":
        return Fraction(1, 2)
    return game.D / 2 - Fraction(1, 10 ** 9)


def blocking_cycle_report(game: AnonymousGame, epsilon=None) -> dict:
    """Focal certificates for the four constant profiles plus a sweep over
    all 256 cellwise-constant profiles.

    Focal margins are checked at ``ε = 0`` against the cycle's minimum
    improvement (1 for the table game, ``D/2`` for the smoothed one).
    """
    eps = default_epsilon(game) if epsilon is None else as_fraction(epsilon)
    floor = Fraction(1) if game.variant == "W" else game.D / 2
    focal = []
    for a in ACTIONS:
        cert = focal_certificate(game, a, 0)
        ok = verify_anonymous_certificate(game, (a,) * 4, cert) and cert.margin >= floor
        focal.append({"profile": [a] * 4, "certificate": cert.to_json(),
                      "margin": str(cert.margin), "verified": ok})
    sweep, survivors = [], []
    for joint in itertools.product(ACTIONS, repeat=4):
        cert = find_blocking_anonymous(game, joint, eps)
        verified = cert is not None and verify_anonymous_certificate(game, joint, cert)
        if not verified:
            survivors.append(list(joint))
        sweep.append({"profile": list(joint),
                      "certificate": None if cert is None else cert.to_json(),
                      "margin": None if cert is None else str(cert.margin),
                      "verified": verified})
    return {"game": game.to_json(),
            "focal": focal,
            "focal_ok": all(f["verified"] for f in focal),
            "profiles": sweep,
            "survivors": survivors,
            "summary": {"total_profiles": len(sweep),
                        "blocked": len(sweep) - len(survivors),
                        "epsilon": str(eps), "D": str(game.D)},
            "empty": not survivors}


def require_cycle(game: AnonymousGame, epsilon=None) -> dict:
    """:func:`blocking_cycle_report`, raising if a focal certificate fails."""
    rep = blocking_cycle_report(game, epsilon)
    if not rep["focal_ok"]:
        bad = [f["profile"] for f in rep["focal"] if not f["verified"]]
        raise FixtureCorruptionError(f"focal certificates failed for {bad}")
    return rep


def best_response_check(game: AnonymousGame, joint: Sequence[int]) -> list[dict]:
    """Per cell: does the cell's action maximise ``payoff(t, ·, p)`` at the
    profile's own distribution ``p``?"""
    p = game.distribution(joint)
    out = []
    for c, a in enumerate(joint):
        vals = [game.cell_payoff(c, b, p) for b in ACTIONS]
        best = max(vals)
        out.append({"cell": CELL_NAMES[c], "action": a, "payoff": str(vals[a]),
                    "best": str(best), "passes": vals[a] >= best})
    return out


def contrast_report(game: AnonymousGame, epsilon=None) -> dict:
    """Best-response-passing profiles next to the emptiness sweep."""
    passing = [list(j) for j in itertools.product(ACTIONS, repeat=4)
               if all(r["passes"] for r in best_response_check(game, j))]
    cycle = blocking_cycle_report(game, epsilon)
    return {"game": game.to_json(),
            "best_response_profiles": passing,
            "cycle_summary": cycle["summary"],
            "focal_ok": cycle["focal_ok"],
            "empty": cycle["empty"],
            "contrast_holds": bool(passing) and cycle["empty"],
            "note": "best-response search covers cellwise-constant profiles only"}
