import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from weakcore.anonymous import AnonymousGame
from weakcore.errors import CapabilityError, GameInputError
from weakcore.finite import (BlockingCertificate, FiniteGame, H_value, alpha_core_members,
                             balanced_weights, check_balanced, core_point_from_characteristic,
                             evaluate, find_blocking, in_V, is_blocked, iter_blocking,
                             minimal_balanced_families, verify_certificate, weak_core_members)
from weakcore.finite.characteristic import balancedness_violations

from oracles import brute_blocked, brute_in_V, random_payoffs

F = Fraction


def game_from(payoffs, sizes, bound=10):
    n = len(sizes)
    return FiniteGame.from_payoff([f"p{i}" for i in range(n)], [1] * n,
                                  [tuple(range(k)) for k in sizes],
                                  lambda j, joint: payoffs[joint][j], bound)


def constant_game(c=0, n=2, k=2):
    return FiniteGame.from_payoff(list(range(n)), [1] * n, [range(k)] * n,
                                  lambda j, joint: F(c), abs(c) + 1)


def product_game():
    return FiniteGame.from_payoff(["a", "b"], [1, 1], [(0, 1), (0, 1)],
                                  lambda j, v: F(v[0] * v[1]) if j == 0 else F(0), 1)


@pytest.fixture(scope="module")
def ex1():
    return AnonymousGame().finite_game()


games_small = st.integers(0, 2**32 - 1).map(np.random.default_rng)


# -- evaluate ------------------------------------------------------------------

def test_evaluate_constant_game_is_zero():
    g = constant_game()
    assert all(evaluate(g, j) == (0, 0) for j in g.joints())


def test_evaluate_product_payoff():
    assert evaluate(product_game(), (1, 1))[0] == 1


def test_evaluate_all_zero_cells(ex1):
    assert evaluate(ex1, (0, 0, 0, 0))[:3] == (2, 2, 4)


def test_evaluate_rejects_unknown_action():
    with pytest.raises(GameInputError):
        evaluate(product_game(), (1, 7))


def test_construction_validates_inputs():
    with pytest.raises(GameInputError):
        FiniteGame.from_payoff(["a"], [0], [(0, 1)], lambda j, v: F(0), 1)
    with pytest.raises(GameInputError):
        FiniteGame.from_payoff(["a"], [1], [(0, 1)], lambda j, v: F(5), 1)
    with pytest.raises(GameInputError):
        FiniteGame(["a"], [1], [(0, 1)], np.array([[np.inf], [0.0]]), 1)


def test_json_round_trip(ex1):
    back = FiniteGame.from_json(ex1.to_json())
    assert back.players == ex1.players and back.weights == ex1.weights
    assert np.array_equal(back.table, ex1.table)
    fl = FiniteGame(["x", "y"], [0.5, 0.5], [(F(0), F(1, 2)), ("lo", "hi")],
                    np.arange(8, dtype=float).reshape(2, 2, 2), 10)
    back = FiniteGame.from_json(fl.to_json())
    assert back.actions == fl.actions and not back.exact


# -- blocking --------------------------------------------------------------------

def test_constant_game_never_blocked():
    g = constant_game()
    assert all(find_blocking(g, j, F(1, 10)) is None for j in g.joints())


def test_all_zero_blocked_by_first_two_cells(ex1):
    cert = find_blocking(ex1, (0, 0, 0, 0), F(1, 2))
    assert cert.coalition == ("E1", "E2")
    assert cert.deviation == {"E1": 1, "E2": 1}
    assert cert.margin >= F(1, 2)


@given(games_small)
def test_blocking_matches_brute_force_two_players(rng):
    sizes = (2, 2)
    pay = random_payoffs(rng, 2, sizes)
    g = game_from(pay, sizes)
    eps = F(int(rng.integers(0, 3)), 2)
    for joint in g.joints():
        assert is_blocked(g, joint, eps) == brute_blocked(pay, sizes, joint, eps)
        assert (find_blocking(g, joint, eps) is not None) == brute_blocked(pay, sizes, joint, eps)


@given(games_small)
def test_certificates_verify(rng):
    sizes = tuple(int(k) for k in rng.integers(1, 4, size=3))
    g = game_from(random_payoffs(rng, 3, sizes), sizes)
    for joint in g.joints():
        for cert in itertools.islice(iter_blocking(g, joint, F(1, 2)), 5):
            assert verify_certificate(g, joint, cert)
            assert cert.margin > 0


def test_round_trip_and_self_deviation(ex1):
    cert = find_blocking(ex1, (0, 0, 0, 0), F(1, 2))
    assert verify_certificate(ex1, (0, 0, 0, 0), cert)
    all_players = ex1.players
    self_dev = BlockingCertificate(all_players, {p: 0 for p in all_players}, F(1, 10), 0)
    assert not verify_certificate(ex1, (0, 0, 0, 0), self_dev)


def test_grand_coalition_against_all_three(ex1):
    # improvements are (2, 1, 2, 2): strict blocking needs ε below 1
    cert = BlockingCertificate(ex1.players, {p: 0 for p in ex1.players}, 1, 0)
    assert not verify_certificate(ex1, (3, 3, 3, 3), cert)
    cert = BlockingCertificate(ex1.players, {p: 0 for p in ex1.players}, F(99, 100), 0)
    assert verify_certificate(ex1, (3, 3, 3, 3), cert)
    assert evaluate(ex1, (3, 3, 3, 3))[:3] == (0, 1, 2)


def test_malformed_certificates_rejected(ex1):
    with pytest.raises(GameInputError):
        BlockingCertificate(("E1",), {"E2": 0}, 0, 0)
    with pytest.raises(GameInputError):
        BlockingCertificate((), {}, 0, 0)
    with pytest.raises(GameInputError):
        verify_certificate(ex1, (0, 0, 0, 0), "not a certificate")
    with pytest.raises(GameInputError):
        verify_certificate(ex1, (0, 0, 0, 0), BlockingCertificate(("Z",), {"Z": 0}, 0, 0))


def test_negative_epsilon_rejected(ex1):
    with pytest.raises(GameInputError):
        find_blocking(ex1, (0, 0, 0, 0), -1)


def test_single_player_argmax_members():
    vals = {0: F(0), 1: F(2), 2: F(3), 3: F(3)}
    g = FiniteGame.from_payoff(["p"], [1], [(0, 1, 2, 3)], lambda j, v: vals[v[0]], 3)
    for eps in (0, F(1, 2), 2, 5):
        assert set(weak_core_members(g, eps)) >= {(2,), (3,)}
    assert weak_core_members(g, 0) == [(2,), (3,)]


def test_cell_game_weak_core_empty(ex1):
    assert weak_core_members(ex1, F(1, 2)) == []


@given(games_small)
def test_weak_core_matches_brute_force_three_players(rng):
    sizes = (2, 2, 2)
    pay = random_payoffs(rng, 3, sizes)
    g = game_from(pay, sizes)
    eps = F(int(rng.integers(0, 3)), 2)
    expected = [j for j in g.joints() if not brute_blocked(pay, sizes, j, eps)]
    assert weak_core_members(g, eps) == expected


@given(games_small, st.integers(0, 3), st.integers(0, 3))
def test_membership_monotone_in_epsilon(rng, a, b):
    sizes = (2, 3)
    g = game_from(random_payoffs(rng, 2, sizes), sizes)
    lo, hi = sorted((F(a, 2), F(b, 2)))
    assert set(weak_core_members(g, lo)) <= set(weak_core_members(g, hi))
    assert set(alpha_core_members(g)) <= set(weak_core_members(g, lo))


def test_float_games_use_tolerance():
    table = np.zeros((2, 2, 2))
    table[1, :, 0] = 1e-12
    g = FiniteGame(["a", "b"], [1, 1], [(0, 1), (0, 1)], table, 1)
    assert find_blocking(g, (0, 0), 0) is None
    table[1, :, 0] = 1e-6
    g = FiniteGame(["a", "b"], [1, 1], [(0, 1), (0, 1)], table, 1)
    assert find_blocking(g, (0, 0), 0).coalition == ("a",)


def test_search_order_is_size_then_lexicographic():
    g = FiniteGame.from_payoff(["a", "b", "c"], [1] * 3, [(0, 1)] * 3,
                               lambda j, v: F(sum(v)), 3)
    certs = list(iter_blocking(g, (0, 0, 0), 0))
    sizes = [len(c.coalition) for c in certs]
    assert sizes == sorted(sizes)
    assert certs[0].coalition == ("a",)


# -- characteristic form -------------------------------------------------------

def test_H_forced_sign_and_identity():
    g = product_game()
    y = (-10, -10)
    for v in (0, 1):
        assert H_value(g, ["a"], [v], y) >= 0
    for joint in g.joints():
        assert H_value(g, ["a", "b"], joint, evaluate(g, joint)) == 0


@given(games_small)
def test_H_equals_enumeration(rng):
    sizes = (3, 2)
    pay = random_payoffs(rng, 2, sizes)
    g = game_from(pay, sizes)
    y = (F(int(rng.integers(-3, 4))), F(int(rng.integers(-3, 4))))
    for a in range(3):
        expected = min(pay[(a, b)][0] - y[0] for b in range(2))
        assert H_value(g, ["p0"], {"p0": a}, y) == expected
    for joint in g.joints():
        assert H_value(g, ["p0", "p1"], joint, y) == min(pay[joint][i] - y[i] for i in range(2))


def test_in_V_floor():
    g = product_game()
    floor = (-g.bound - 1,) * 2
    for S in (["a"], ["b"], ["a", "b"]):
        assert in_V(g, S, floor)


@given(games_small)
def test_in_V_matches_brute_force(rng):
    sizes = (2, 2, 2)
    pay = random_payoffs(rng, 3, sizes)
    g = game_from(pay, sizes)
    for _ in range(10):
        y = [F(int(v)) for v in rng.integers(-3, 4, size=3)]
        for size in (1, 2, 3):
            for S in itertools.combinations(range(3), size):
                assert in_V(g, [f"p{i}" for i in S], y) == brute_in_V(pay, sizes, S, y)


@given(games_small, st.lists(st.integers(0, 4), min_size=3, max_size=3))
def test_comprehensive(rng, drops):
    sizes = (2, 2, 2)
    g = game_from(random_payoffs(rng, 3, sizes), sizes)
    y = [F(int(v)) for v in rng.integers(-3, 4, size=3)]
    lower = [a - d for a, d in zip(y, drops)]
    for size in (1, 2, 3):
        for S in itertools.combinations(g.players, size):
            if in_V(g, S, y):
                assert in_V(g, S, lower)


@given(games_small)
def test_grand_coalition_bounded(rng):
    sizes = (2, 3)
    g = game_from(random_payoffs(rng, 2, sizes), sizes, bound=3)
    for _ in range(20):
        y = [F(int(v), 2) for v in rng.integers(-10, 11, size=2)]
        if in_V(g, g.players, y):
            assert all(v <= g.bound for v in y)


def test_core_point_single_player():
    vals = [F(1), F(4), F(2)]
    g = FiniteGame.from_payoff(["p"], [1], [(0, 1, 2)], lambda j, v: vals[v[0]], 4)
    y, joint = core_point_from_characteristic(g)
    assert y == (4,) and joint == (1,)


def test_core_point_common_payoff():
    u = {(0, 0): 1, (0, 1): 3, (1, 0): 0, (1, 1): 2}
    g = FiniteGame.from_payoff(["a", "b"], [1, 1], [(0, 1)] * 2, lambda j, v: F(u[v]), 3)
    y, joint = core_point_from_characteristic(g)
    assert y == (3, 3) and joint == (0, 1)


@given(games_small)
def test_core_point_unblocked_on_concave_games(rng):
    grid = [F(k, 4) for k in range(5)]
    c1, c2 = (F(int(v), 4) for v in rng.integers(0, 5, size=2))

    def u(j, v):
        x, z = v
        return 1 - (x - c1) ** 2 - (z - c2) ** 2 / 2 if j == 0 else 1 - (z - c2) ** 2 - (x - c1) ** 2 / 2

    g = FiniteGame.from_payoff(["a", "b"], [1, 1], [grid, grid], u, 2)
    found = core_point_from_characteristic(g, resolution=F(1, 16))
    if found is not None:
        assert find_blocking(g, found[1], F(1, 16)) is None


def test_balanced_weights_examples():
    assert balanced_weights([{0}, {1}, {2}], 3) == [1, 1, 1]
    assert balanced_weights([{0, 1}, {0, 2}, {1, 2}], 3) == [F(1, 2)] * 3
    assert balanced_weights([{0, 1}, {0}], 3) is None


def test_minimal_balanced_family_counts():
    assert len(minimal_balanced_families(2)) == 2
    assert len(minimal_balanced_families(3)) == 6
    assert len(minimal_balanced_families(4)) == 42
    fams = {frozenset(f) for f in minimal_balanced_families(3)}
    assert frozenset({frozenset({0, 1}), frozenset({0, 2}), frozenset({1, 2})}) in fams


def test_check_balanced_capability_bound():
    g = FiniteGame.from_payoff(list(range(5)), [1] * 5, [(0,)] * 5, lambda j, v: F(0), 1)
    with pytest.raises(CapabilityError):
        check_balanced(g, [(0,) * 5])


def test_check_balanced_detects_violation():
    # each pair can secure 1 for both members, the grand coalition cannot
    def u(j, v):
        a, b, c = v
        pairs = {(0, 1): a == 1 and b == 1, (0, 2): a == 2 and c == 2, (1, 2): b == 3 and c == 3}
        return F(int(any(ok and j in p for p, ok in pairs.items())))

    g = FiniteGame.from_payoff([0, 1, 2], [1] * 3, [(0, 1, 2, 3)] * 3, u, 1)
    assert not check_balanced(g, [(1, 1, 1)])
    assert balancedness_violations(g, [(1, 1, 1)])[0][1] == (1, 1, 1)
    assert check_balanced(g, [(0, 0, 0)])
