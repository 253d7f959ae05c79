"""Closed-form continuum fixtures built on the running average of a profile.

``gamma(t, f)`` is the running average ``∫_0^t f / t`` and
``running_sup(t, f)`` its supremum over ``(0, t]``. Two payoffs are built
from them:

* ``payoff_example1``: ``min{Γ, (1 - G)(1 - t)/t}``, equal to 1 at ``t = 0``.
  Its weak-core is empty.
* ``payoff_example2``: ``min{∫_0^t f, (1 - G)(1 - t)/t}``, equal to 0 at
  ``t = 0``. Its α-core is empty while its weak-core is not.

Evaluation is exact on Fractions and vectorised on float arrays. Both
payoffs only look at ``f`` on ``(0, t]``.
"""
from __future__ import annotations

import itertools
from fractions import Fraction
from typing import Iterator

import numpy as np

from .continuum.game import ContinuumGame
from .continuum.profiles import IntervalPartition, StepProfile
from .continuum.search import ContinuumCertificate, SearchSpace, continuum_margin, dyadic_samples
from .errors import DomainError
from .numbers import as_fraction

GRID5 = tuple(Fraction(k, 4) for k in range(5))
EX1_SLACK = Fraction(1, 16)


def _exact(t) -> bool:
    return isinstance(t, (int, Fraction)) and not isinstance(t, bool)


def gamma(t, f: StepProfile):
    """Average of ``f`` over ``(0, t]``."""
    if t <= 0:
        raise DomainError("the running average is undefined at t = 0")
    if _exact(t):
        t = as_fraction(t)
        return f.cumulative(t) / t
    return f.cumulative(float(t)) / float(t)


def running_sup(t, f: StepProfile):
    """``sup_{0 < s <= t} Γ(s, f)``.

    Γ is monotone on each piece and constant on the first one, so the
    supremum is the largest of Γ at the breakpoints below ``t`` and Γ(t).
    """
    if t <= 0:
        raise DomainError("the running supremum is undefined at t = 0")
    best = gamma(t, f)
    for b in f.breakpoints[1:]:
        if b >= t:
            break
        g = gamma(b, f) if _exact(t) else gamma(float(b), f)
        if g > best:
            best = g
    return best


def _second_term(t, G):
    return (1 - G) * (1 - t) / t


def payoff_example1(t, f: StepProfile):
    if t == 0:
        return Fraction(1) if _exact(t) else 1.0
    if _exact(t):
        t = as_fraction(t)
    return min(gamma(t, f), _second_term(t, running_sup(t, f)))


def payoff_example2(t, f: StepProfile):
    if t == 0:
        return Fraction(0) if _exact(t) else 0.0
    if _exact(t):
        t = as_fraction(t)
        return min(f.cumulative(t), _second_term(t, running_sup(t, f)))
    t = float(t)
    return min(f.cumulative(t), _second_term(t, running_sup(t, f)))


# -- vectorised float evaluators ---------------------------------------------

def _gamma_G_arrays(ts: np.ndarray, f: StepProfile):
    fb, fv, fc = f.float_arrays
    safe = np.where(ts > 0, ts, 1.0)
    k = np.clip(np.searchsorted(fb, safe, side="left") - 1, 0, len(fv) - 1)
    cum = fc[k] + fv[k] * (safe - fb[k])
    gam = cum / safe
    # running max of Γ at the interior breakpoints b_1..b_k
    inner = fc[1:-1] / fb[1:-1] if len(fb) > 2 else np.empty(0)
    runmax = np.concatenate(([-np.inf], np.maximum.accumulate(inner))) if inner.size else np.array([-np.inf])
    G = np.maximum(gam, runmax[np.minimum(k, len(runmax) - 1)])
    return cum, gam, G, safe


def gamma_array(ts, f: StepProfile) -> np.ndarray:
    return _gamma_G_arrays(np.asarray(ts, dtype=float), f)[1]


def running_sup_array(ts, f: StepProfile) -> np.ndarray:
    return _gamma_G_arrays(np.asarray(ts, dtype=float), f)[2]


def payoff_example1_array(ts, f: StepProfile) -> np.ndarray:
    ts = np.asarray(ts, dtype=float)
    _, gam, G, safe = _gamma_G_arrays(ts, f)
    out = np.minimum(gam, (1 - G) * (1 - safe) / safe)
    return np.where(ts > 0, out, 1.0)


def payoff_example2_array(ts, f: StepProfile) -> np.ndarray:
    ts = np.asarray(ts, dtype=float)
    cum, _, G, safe = _gamma_G_arrays(ts, f)
    out = np.minimum(cum, (1 - G) * (1 - safe) / safe)
    return np.where(ts > 0, out, 0.0)


# -- a concave, jointly continuous test game ----------------------------------

def payoff_concave(t, f: StepProfile):
    """``1 - |∫_0^1 f - t|``."""
    if _exact(t):
        return 1 - abs(f.mean - as_fraction(t))
    return 1.0 - abs(float(f.mean) - float(t))


def payoff_concave_array(ts, f: StepProfile) -> np.ndarray:
    return 1.0 - np.abs(float(f.mean) - np.asarray(ts, dtype=float))


def _abs_integral(a, b, m):
    """``∫_a^b |m - t| dt``."""
    if m <= a:
        return ((b - m) ** 2 - (a - m) ** 2) / 2
    if m >= b:
        return ((m - a) ** 2 - (m - b) ** 2) / 2
    return ((m - a) ** 2 + (b - m) ** 2) / 2


def concave_cell_integral(a, b, f: StepProfile):
    return (b - a) - _abs_integral(a, b, f.mean)


# -- fixtures ------------------------------------------------------------------

def example1_game() -> ContinuumGame:
    return ContinuumGame("example1", payoff_example1, 1, payoff_array=payoff_example1_array,
                         causal=True,
                         description="min{Γ, (1-G)(1-t)/t}, 1 at t=0; weak-core empty")


def example2_game() -> ContinuumGame:
    return ContinuumGame("example2", payoff_example2, 1, payoff_array=payoff_example2_array,
                         causal=True,
                         description="min{∫f, (1-G)(1-t)/t}, 0 at t=0; α-core empty, weak-core nonempty")


def concave_test_game() -> ContinuumGame:
    return ContinuumGame("concave-test", payoff_concave, 1, payoff_array=payoff_concave_array,
                         cell_integral=concave_cell_integral, mean_field=True,
                         description="1 - |∫f - t|; concave in f, jointly continuous")


def grid_family(cells: int = 4, grid=GRID5) -> Iterator[StepProfile]:
    """Every profile constant on each of ``cells`` equal cells with values
    in ``grid`` (625 profiles by default)."""
    part = IntervalPartition.uniform(cells)
    for values in itertools.product(grid, repeat=cells):
        yield StepProfile.from_cells(part, values)


# -- constructive blockers ----------------------------------------------------

def _first_piece(f: StepProfile):
    g = f.normalized()
    return g.breakpoints[1], g.values[0]


def _largest_dyadic(upper, ok, depth: int = 64):
    for k in range(depth):
        t = Fraction(1, 2 ** k)
        if t <= upper and ok(t):
            return t
    return None


def _certificate(game, status_quo, E, deviation, epsilon, margin, kind, samples):
    space = SearchSpace(IntervalPartition.uniform(1), (Fraction(0),), samples)
    _, ns, nc = continuum_margin(game, status_quo, E, deviation, epsilon, space)
    return ContinuumCertificate(E, deviation, epsilon, margin, ns, nc, kind)


def example1_blocker(status_quo: StepProfile, epsilon=Fraction(1, 8), *, slack=EX1_SLACK,
                     samples=None) -> ContinuumCertificate:
    """A coalition ``(0, t]`` and constant deviation blocking ``status_quo``
    at ``epsilon`` in the first example.

    If the profile starts at 1 the average is 1 near zero, the running sup
    pins everybody at 0, and ``(0, 1/2]`` playing 1/2 secures 1/2.
    Otherwise ``α`` is the first value; ``(0, t1]`` playing ``1 - t1`` secures
    ``1 - t1`` for the largest dyadic ``t1`` in the first piece with
    ``1 - t1 - α - ε >= slack``.
    """
    eps = as_fraction(epsilon)
    t0, v0 = _first_piece(status_quo)
    samples = dyadic_samples() if samples is None else samples
    game = example1_game()
    if v0 == 1:
        half = Fraction(1, 2)
        return _certificate(game, status_quo, ((Fraction(0), half),), StepProfile.constant(half),
                            eps, half - eps, "case-1", samples)
    t1 = _largest_dyadic(t0, lambda t: 1 - t - v0 - eps >= slack)
    if t1 is None:
        raise DomainError(f"no dyadic coalition blocks at epsilon={eps}")
    dev = StepProfile.constant(1 - t1)
    return _certificate(game, status_quo, ((Fraction(0), t1),), dev, eps,
                        (1 - t1) - v0 - eps, "case-2", samples)


def example2_alpha_blocker(status_quo: StepProfile, samples=None) -> ContinuumCertificate:
    """An ε = 0 blocking certificate in the second example.

    The deviation on ``(0, t2]`` is ``f + δ(1 - f)``; it raises the integral
    term by ``δ ∫_0^t (1 - f)`` while the second term stays above it.
    The reported margin is that gain at the smallest sample in the
    coalition.
    """
    samples = dyadic_samples() if samples is None else tuple(samples)
    game = example2_game()
    t0, alpha = _first_piece(status_quo)
    zero = Fraction(0)
    if alpha == 1:
        half = Fraction(1, 2)
        inside = [s for s in samples if 0 < s <= half]
        return _certificate(game, status_quo, ((zero, half),), StepProfile.constant(half),
                            zero, min(inside) / 2, "case-1", samples)
    prm = blocker_parameters(status_quo)
    delta, t2 = prm["delta"], prm["t2"]
    dev = status_quo.map_values(lambda v: v + delta * (1 - v))
    inside = [s for s in samples if 0 < s <= t2]
    margin = min(delta * (s - status_quo.cumulative(s)) for s in inside)
    return _certificate(game, status_quo, ((zero, t2),), dev, zero, margin, f"affine:{delta}", samples)


def blocker_parameters(status_quo: StepProfile) -> dict:
    """The intermediate quantities of :func:`example2_alpha_blocker`."""
    t0, alpha = _first_piece(status_quo)
    if alpha == 1:
        return {"case": 1}
    t0 = min(t0, Fraction(1, 2))
    t1 = _largest_dyadic(t0, lambda t: alpha * t < 1 - alpha)
    alpha1 = (alpha * t1 + 1 - alpha) / 2
    delta = min((1 - alpha) / 2, (1 - alpha - alpha1) / 2)
    t2 = _largest_dyadic(t1, lambda t: (alpha + delta) * t < alpha1)
    return {"case": 2, "t0": t0, "alpha": alpha, "t1": t1, "alpha1": alpha1,
            "delta": delta, "t2": t2}
