from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from weakcore import examples
from weakcore.continuum import (ContinuumCertificate, ContinuumGame, IntervalPartition, PartitionNet,
                                SearchSpace, StepProfile, discretize, dyadic_samples,
                                find_blocking_continuum, integrate_payoff, iter_blocking_continuum,
                                lift, verify_continuum_certificate)
from weakcore.continuum import pipeline
from weakcore.continuum.pipeline import (PipelineFailure, blocking_transfer, equi_usc_falsifier,
                                         existence_pipeline, refine_grid, regularity_diagnostics,
                                         weak_distance)
from weakcore.continuum.search import transfer_certificate
from weakcore.errors import GameInputError, IntegrationError
from weakcore.finite import check_balanced, evaluate, find_blocking, weak_core_members
from weakcore.registry import zero_game

from oracles import reference_integral

F = Fraction
HALF = F(1, 2)
QUARTERS = tuple(F(k, 4) for k in range(5))


def mean_game():
    """``U(t, f) = ∫ f``, left without a closed-form cell integral."""
    return ContinuumGame("mean", lambda t, f: f.mean, 1,
                         payoff_array=lambda ts, f: np.full(np.shape(ts), float(f.mean)))


def constant_game(c=F(1, 3)):
    return ContinuumGame("const", lambda t, f: c, 1,
                         payoff_array=lambda ts, f: np.full(np.shape(ts), float(c)))


fractions01 = st.integers(0, 8).map(lambda k: F(k, 8))
dyadic_cuts = st.lists(st.integers(1, 15).map(lambda k: F(k, 16)), max_size=4, unique=True)


@st.composite
def step_profiles(draw):
    cuts = sorted(draw(dyadic_cuts))
    bps = [F(0), *cuts, F(1)]
    vals = [draw(fractions01) for _ in range(len(bps) - 1)]
    return StepProfile(bps, vals)


# -- profiles ------------------------------------------------------------------

def test_lift_one_cell_is_constant():
    assert lift(IntervalPartition.uniform(1), [F(2, 3)]) == StepProfile.constant(F(2, 3))


def test_lift_halves_is_indicator():
    assert lift(IntervalPartition.uniform(2), [1, 0]) == StepProfile.indicator(0, HALF)


@given(st.lists(fractions01, min_size=1, max_size=6))
def test_lift_restrict_round_trip(values):
    part = IntervalPartition.uniform(len(values))
    f = lift(part, values)
    for (a, b), v in zip(part.cells, values):
        assert f.restricted_values(a, b) == [v]


def test_profile_validation():
    with pytest.raises(GameInputError):
        StepProfile((0, HALF), (1,))
    with pytest.raises(GameInputError):
        StepProfile((0, HALF, HALF, 1), (1, 0, 1))
    with pytest.raises(GameInputError):
        StepProfile((0, 1), (2,))
    with pytest.raises(GameInputError):
        StepProfile((0, 1), (0, 1))


def test_pieces_are_left_open():
    f = StepProfile.indicator(0, HALF)
    assert f.value_at(HALF) == 1 and f.value_at(F(1, 2) + F(1, 10**9)) == 0


@given(step_profiles(), fractions01)
def test_cumulative_matches_pointwise_sum(f, t):
    expected = sum((min(b, t) - a) * v for (a, b), v in f.pieces if a < t)
    assert f.cumulative(t) == expected


@given(step_profiles())
def test_profile_json_round_trip(f):
    assert StepProfile.from_json(f.to_json()) == f


def test_partition_net_requires_refinement():
    PartitionNet.uniform([2, 4, 8])
    with pytest.raises(GameInputError):
        PartitionNet.uniform([2, 3])
    with pytest.raises(GameInputError):
        PartitionNet.uniform([2, 4], anchors=[(0, [(0, F(1, 3))])])


# -- integration and discretization --------------------------------------------

def test_constant_payoff_integral():
    assert abs(integrate_payoff(constant_game(), (0, HALF), StepProfile.constant(0)) - 1 / 6) < 1e-12


def test_mean_payoff_on_indicator():
    f = StepProfile.indicator(0, HALF)
    assert abs(integrate_payoff(mean_game(), (0, HALF), f) - 0.25) < 1e-12


def test_second_fixture_against_reference_quadrature():
    f = StepProfile.indicator(F(1, 10), 1)
    game = examples.example2_game()
    got = integrate_payoff(game, (0, 1), f)
    ref = reference_integral(lambda ts: examples.payoff_example2_array(ts, f), 0.0, 1.0, n=400_000)
    assert abs(got - ref) < 1e-8


def test_integral_respects_bound():
    bad = ContinuumGame("bad", lambda t, f: 5, 1,
                        payoff_array=lambda ts, f: np.full(np.shape(ts), 5.0))
    with pytest.raises(IntegrationError):
        integrate_payoff(bad, (0, 1), StepProfile.constant(0))


def test_bad_cell_rejected():
    with pytest.raises(GameInputError):
        integrate_payoff(constant_game(), (HALF, F(3, 2)), StepProfile.constant(0))


def test_zero_game_discretizes_to_zero():
    g = discretize(zero_game(), IntervalPartition.uniform(2), (0, 1))
    assert not np.any(g.table)


def test_mean_game_discretization_closed_form():
    g = discretize(mean_game(), IntervalPartition.uniform(2), (0, 1))
    for joint in g.joints():
        y1, y2 = (float(v) for v in joint)
        expected = 0.5 * (0.5 * y1 + 0.5 * y2)
        assert np.allclose(evaluate(g, joint), (expected, expected), atol=1e-12)


def test_first_fixture_tables_match_entrywise_quadrature():
    part = IntervalPartition.uniform(4)
    g = discretize(examples.example1_game(), part, examples.GRID5)
    rng = np.random.default_rng(5)
    for _ in range(12):
        joint = tuple(examples.GRID5[int(k)] for k in rng.integers(0, 5, size=4))
        f = lift(part, joint)
        row = evaluate(g, joint)
        for j, (a, b) in enumerate(part.cells):
            ref = reference_integral(lambda ts: examples.payoff_example1_array(ts, f),
                                     float(a), float(b), n=100_000)
            assert abs(row[j] - ref) < 1e-6


def test_mean_field_shortcut_matches_direct_integration():
    game = examples.concave_test_game()
    plain = ContinuumGame("plain", game.payoff, 1, payoff_array=game.payoff_array)
    part = IntervalPartition.uniform(3)
    a = discretize(game, part, (0, HALF, 1))
    b = discretize(plain, part, (0, HALF, 1))
    assert np.allclose(a.table, b.table, atol=1e-9)


def test_discretized_concave_games_are_balanced():
    game = examples.concave_test_game()
    for cells in (2, 3, 4):
        finite = discretize(game, IntervalPartition.uniform(cells), (0, HALF, 1))
        assert check_balanced(finite, list(finite.joints()))


# -- continuum blocking search -------------------------------------------------

def test_constant_game_never_blocked():
    space = SearchSpace.uniform(2, grid=(0, 1), level=3, near_zero=3)
    for sq in (StepProfile.constant(0), StepProfile.indicator(0, HALF)):
        assert find_blocking_continuum(constant_game(), sq, F(1, 10), space) is None


def test_first_fixture_all_ones_blocked_by_lower_half():
    space = SearchSpace.uniform(2, grid=(0, HALF, 1))
    cert = find_blocking_continuum(examples.example1_game(), StepProfile.constant(1), 0, space)
    assert cert.coalition == ((0, HALF),)
    assert cert.deviation.restricted_values(0, HALF) == [HALF]
    assert cert.margin >= 0.5 - 1e-9


def test_search_certificates_verify_and_are_ordered():
    game = examples.example1_game()
    space = SearchSpace.uniform(2, grid=(0, HALF, 1), level=4, near_zero=6)
    certs = list(iter_blocking_continuum(game, StepProfile.constant(1), F(1, 8), space))
    assert certs
    sizes = [len(space.partition.cells_inside(c.coalition)) for c in certs]
    assert sizes == sorted(sizes)
    for c in certs:
        assert verify_continuum_certificate(game, StepProfile.constant(1), c, space)


def test_negative_epsilon_rejected():
    with pytest.raises(GameInputError):
        find_blocking_continuum(constant_game(), StepProfile.constant(0), -1, SearchSpace.uniform(1))


def test_certificate_json_lists_deviation_on_coalition_only():
    cert = ContinuumCertificate(((0, HALF),), StepProfile.constant(HALF), 0, HALF)
    data = cert.to_json()
    assert data["deviation"] == [{"interval": ["0", "1/2"], "value": "1/2"}]
    assert "caveat" in data


# -- pipeline --------------------------------------------------------------------

def test_pipeline_on_zero_game():
    prof, report = existence_pipeline(zero_game(), PartitionNet.uniform([2, 4]), (0, 1), F(1, 20))
    assert report.final_unblocked
    assert all(s.candidates_checked == 1 for s in report.stages)


def test_pipeline_on_concave_game():
    prof, report = existence_pipeline(examples.concave_test_game(), PartitionNet.uniform([2, 4]),
                                      QUARTERS, F(1, 20))
    assert prof == StepProfile.constant(HALF)
    assert report.final_unblocked
    assert all(d < F(1, 20) for d in report.successive_distances)
    assert report.to_csv().startswith("stage,test_function,integral")
    assert report.to_json()["final_unblocked"] is True


def test_pipeline_on_second_fixture():
    prof, report = existence_pipeline(examples.example2_game(), PartitionNet.uniform([2, 4]),
                                      QUARTERS, F(1, 20))
    assert report.final_unblocked and report.caveat


def two_cell_game(table):
    """Cell ``j`` receives ``table[(y1, y2)][j]`` for the profile's values on the two halves."""
    def value(t, f):
        key = (f.value_at(F(1, 4)), f.value_at(F(3, 4)))
        return table[key][0 if t <= HALF else 1]

    def arr(ts, f):
        return np.array([float(value(F(t).limit_denominator(10**12), f)) for t in ts])

    return ContinuumGame("two-cell", value, 4, payoff_array=arr)


def test_pipeline_failure_carries_report():
    # (0, 0) has the best worst-off payoff but the first cell secures 3 by playing 1
    table = {(0, 0): (2, 2), (1, 0): (3, 0), (0, 1): (0, 3), (1, 1): (3, 1)}
    game = two_cell_game(table)
    with pytest.raises(PipelineFailure) as info:
        existence_pipeline(game, PartitionNet.uniform([2]), (0, 1), F(1, 20), grid_budget=0,
                           max_candidates=1)
    assert "no finite weak-core member" in info.value.report.failure
    prof, _ = existence_pipeline(game, PartitionNet.uniform([2]), (0, 1), F(1, 20), grid_budget=0)
    assert prof == lift(IntervalPartition.uniform(2), (1, 1))


def test_weak_distance_and_grid_refinement():
    pts = pipeline.default_test_points()
    f, g = StepProfile.constant(0), StepProfile.indicator(0, F(1, 8))
    assert weak_distance(f, g, pts) == F(1, 8)
    assert weak_distance(f, f, pts) == 0
    assert refine_grid((0, 1)) == (0, HALF, 1)


def test_transfer_holds_on_concave_game():
    part = IntervalPartition.uniform(2)
    recs = blocking_transfer(examples.concave_test_game(), part, (0, HALF, 1),
                             [(1, 1), (0, 0)], F(1, 10), samples=dyadic_samples(3, 3))
    assert recs and all(r.holds for r in recs)
    assert all(r.threshold == pytest.approx(0.1 / 2 * 0.5) for r in recs)


def test_transfer_rejects_misaligned_coalition():
    part = IntervalPartition.uniform(2)
    finite = discretize(examples.concave_test_game(), part, (0, 1))
    cert = ContinuumCertificate(((0, F(1, 3)),), StepProfile.constant(1), F(1, 10), 0)
    with pytest.raises(GameInputError):
        transfer_certificate(cert, finite, (0, 0))


def test_transfer_matches_finite_search():
    part = IntervalPartition.uniform(2)
    finite = discretize(examples.concave_test_game(), part, (0, 1))
    cert = ContinuumCertificate(part.union([0, 1]), StepProfile.constant(HALF), F(1, 10), 0)
    with pytest.raises(GameInputError):
        transfer_certificate(cert, finite, (1, 1))  # 1/2 is not an action of the finite game


# -- regularity ------------------------------------------------------------------

def test_falsifier_finds_witness_at_zero_for_first_fixture():
    hit = equi_usc_falsifier(examples.example1_game(), StepProfile.constant(0), F(2, 5))
    assert hit is not None
    t, probe, gain = hit
    assert gain >= 0.4
    assert examples.payoff_example1(t, probe) == HALF


def test_falsifier_none_for_constant_and_concave():
    assert equi_usc_falsifier(constant_game(), StepProfile.constant(0), F(1, 10)) is None
    game = examples.concave_test_game()
    for f in (StepProfile.constant(0), StepProfile.indicator(0, HALF), StepProfile.constant(1)):
        assert equi_usc_falsifier(game, f, F(1, 10)) is None


def test_regularity_report():
    rep = regularity_diagnostics(examples.concave_test_game(), [StepProfile.constant(0)])
    assert isinstance(rep, dict)
