from fractions import Fraction

import pytest

from helpers import make_spec, profile_of, single_edge_spec, triangle_doc
from netalloc.analysis import (
    OptimizerConfig,
    RankingSystem,
    brute_force_optimum,
    convex_combine,
    global_optimum,
    global_ranking_weights,
    grid_reference_welfare,
    match_down,
    ne_quality,
    partition_players,
    poa_grid_ratio,
    potential_value,
)
from netalloc.dynamics import (
    Converged,
    DynamicsConfig,
    NotEquilibrium,
    OptimisticNE,
    PessimisticNE,
    RandomFeasible,
    classify_equilibrium,
    init_profile,
    run_sequential,
)
from netalloc.game import FrequencyProfile, social_welfare
from netalloc.instances import (
    gen_k5_cycle_instance,
    gen_poa_grid_instance,
    gen_random_instance,
    gen_ranked_instance,
)
from netalloc.utility import UtilitySpec


# -- rank-induced weights ------------------------------------------------------


def test_ranking_weights_triangle():
    neighbors = {0: (1, 2), 1: (0, 2), 2: (0, 1)}
    ranking = RankingSystem({0: 1, 1: 2, 2: 3})
    w = global_ranking_weights(neighbors, ranking)
    assert w[(0, 1)] == Fraction(2, 5)
    assert w[(0, 2)] == Fraction(3, 5)
    assert w[(1, 0)] == Fraction(1, 4)
    for i in neighbors:
        assert sum(w[(i, j)] for j in neighbors[i]) == 1


def test_ranking_weights_equal_ranks_uniform():
    neighbors = {0: (1, 2, 3), 1: (0,), 2: (0,), 3: (0,)}
    w = global_ranking_weights(neighbors, RankingSystem({i: 2 for i in range(4)}))
    assert w[(0, 1)] == w[(0, 2)] == w[(0, 3)] == Fraction(1, 3)


def test_ranking_weights_star_with_mixed_leaf_ranks():
    neighbors = {0: (1, 2, 3), 1: (0,), 2: (0,), 3: (0,)}
    ranking = RankingSystem({0: 5, 1: 1, 2: 1, 3: 2})
    w = global_ranking_weights(neighbors, ranking)
    assert w[(0, 1)] == Fraction(1, 4)
    assert w[(0, 2)] == Fraction(1, 4)
    assert w[(0, 3)] == Fraction(1, 2)


def test_ranking_weights_skip_isolated():
    w = global_ranking_weights({0: (), 1: ()}, RankingSystem({0: 1, 1: 1}))
    assert w == {}


def test_ranking_rejects_bad_ranks():
    with pytest.raises(ValueError):
        RankingSystem({0: 0})
    with pytest.raises(ValueError):
        RankingSystem({0: 1.5})


# -- weighted potential ----------------------------------------------------------


def _ranked_triangle(ranks=(1, 1, 1), u=None):
    u = u or UtilitySpec.capped_quadratic(1.0)
    neighbors = {0: (1, 2), 1: (0, 2), 2: (0, 1)}
    ranking = RankingSystem(dict(enumerate(ranks)))
    w = global_ranking_weights(neighbors, ranking)
    spec = make_spec(
        3,
        0.05,
        [
            (0, 1, float(w[(0, 1)]), float(w[(1, 0)]), u, u),
            (0, 2, float(w[(0, 2)]), float(w[(2, 0)]), u, u),
            (1, 2, float(w[(1, 2)]), float(w[(2, 1)]), u, u),
        ],
        [1.0, 1.0, 1.0],
    )
    return spec, ranking


def test_potential_zero_profile():
    spec, ranking = _ranked_triangle()
    assert potential_value(spec, ranking, FrequencyProfile.zeros(spec)) == 0.0


def test_potential_uniform_triangle_closed_form():
    spec, ranking = _ranked_triangle()
    c = 6  # agreed level 0.3 everywhere
    profile = profile_of(
        spec, {i: {j: c for j in spec.neighbors[i]} for i in range(3)}
    )
    u = spec.utilities[(0, 1)].value(c * spec.eta)
    assert potential_value(spec, ranking, profile) == pytest.approx(6 * u)


def test_potential_rejects_asymmetric_utilities():
    u1, u2 = UtilitySpec.sqrt(), UtilitySpec.linear()
    neighbors = {0: (1,), 1: (0,)}
    ranking = RankingSystem({0: 1, 1: 1})
    spec = make_spec(2, 1.0, [(0, 1, 1.0, 1.0, u1, u2)], [2.0, 2.0])
    with pytest.raises(ValueError, match="symmetric"):
        potential_value(spec, ranking, FrequencyProfile.zeros(spec))


def test_potential_rejects_foreign_weights():
    u = UtilitySpec.sqrt()
    spec = make_spec(2, 1.0, [(0, 1, 1.0, 1.0, u, u)], [2.0, 2.0])
    ranking = RankingSystem({0: 1, 1: 2})  # induced weights are still 1.0
    assert potential_value(spec, ranking, FrequencyProfile.zeros(spec)) == 0.0
    spec2 = make_spec(3, 1.0, [
        (0, 1, 0.7, 1.0, u, u),
        (0, 2, 0.3, 1.0, u, u),
    ], [2.0, 2.0, 2.0])
    with pytest.raises(ValueError, match="not induced"):
        potential_value(
            spec2, RankingSystem({0: 1, 1: 1, 2: 1}), FrequencyProfile.zeros(spec2)
        )


def test_potential_identity_along_sequential_moves():
    for seed in (3, 8):
        doc = gen_ranked_instance(n=7, edge_prob=0.5, seed=seed, budget_units=30)
        spec = doc.to_game_spec()
        ranking = doc.ranking_system()
        final, trace, status = run_sequential(
            spec,
            init_profile(spec, RandomFeasible(seed)),
            DynamicsConfig(),
            ranking=ranking,
        )
        assert isinstance(status, Converged)
        recs = trace.records
        from netalloc.game import player_utility

        for t in range(1, len(recs)):
            mover = recs[t].mover
            d_phi = recs[t].potential - recs[t - 1].potential
            d_u = player_utility(spec, recs[t].profile, mover) - player_utility(
                spec, recs[t - 1].profile, mover
            )
            scale = 2 * ranking.rank(mover) * ranking.neighbor_rank_sum(
                spec.neighbors, mover
            )
            assert abs(d_phi - scale * d_u) <= 1e-9 * max(1.0, abs(d_phi))
            assert d_phi >= -1e-9  # potential never decreases along the run


# -- match-down -------------------------------------------------------------------


def test_match_down_identity_on_matched():
    spec = single_edge_spec(eta=1.0, budgets=(6.0, 6.0))
    p = profile_of(spec, {0: {1: 4}, 1: {0: 4}})
    assert match_down(spec, p) == p


def test_match_down_example():
    spec = single_edge_spec(eta=1.0, budgets=(6.0, 6.0))
    p = profile_of(spec, {0: {1: 5}, 1: {0: 3}})
    m = match_down(spec, p)
    assert m.counts[(0, 1)] == 3 and m.counts[(1, 0)] == 3
    assert social_welfare(spec, m) == social_welfare(spec, p)


def test_match_down_preserves_welfare_and_yields_equilibrium():
    for seed in range(8):
        doc = gen_random_instance(n=8, edge_prob=0.5, seed=seed, budget_units=16)
        spec = doc.to_game_spec()
        p = init_profile(spec, RandomFeasible(seed + 50))
        m = match_down(spec, p)
        assert social_welfare(spec, m) == social_welfare(spec, p)
        assert isinstance(classify_equilibrium(spec, m), PessimisticNE)


# -- convex combinations -------------------------------------------------------------


def _two_matched_equilibria(seed):
    doc = gen_random_instance(n=7, edge_prob=0.5, seed=seed, budget_units=20)
    spec = doc.to_game_spec()
    outs = []
    for s in (seed + 1, seed + 2):
        final, _, status = run_sequential(
            spec, init_profile(spec, RandomFeasible(s)), DynamicsConfig()
        )
        assert isinstance(status, Converged)
        outs.append(match_down(spec, final))
    return spec, outs[0], outs[1]


def test_convex_combine_endpoints_exact():
    spec, a, b = _two_matched_equilibria(12)
    assert convex_combine(spec, a, b, 1.0) == a
    assert convex_combine(spec, a, b, 0.0) == b


def test_convex_combine_matched_equilibria_stay_matched():
    spec, a, b = _two_matched_equilibria(21)
    for alpha in (0.1, 0.3, 0.5, 0.7, 0.9):
        mix = convex_combine(spec, a, b, alpha)
        for (i, j) in spec.edges:
            assert mix.counts[(i, j)] == mix.counts[(j, i)]
        assert isinstance(classify_equilibrium(spec, mix), PessimisticNE)


def test_convex_combine_path_from_over_matched_equilibrium():
    # an over-matched equilibrium mixed with its match-down stays an
    # equilibrium the whole way (the over-proposal just shrinks)
    spec = single_edge_spec(UtilitySpec.sqrt(), eta=1.0, budgets=(5.0, 3.0))
    over = profile_of(spec, {0: {1: 5}, 1: {0: 3}})
    assert isinstance(classify_equilibrium(spec, over), OptimisticNE)
    down = match_down(spec, over)
    for alpha in (0.25, 0.5, 0.75):
        mix = convex_combine(spec, over, down, alpha)
        assert isinstance(classify_equilibrium(spec, mix), OptimisticNE)


def test_convex_combine_validates():
    spec, a, b = _two_matched_equilibria(5)
    with pytest.raises(ValueError):
        convex_combine(spec, a, b, 1.5)
    other = FrequencyProfile({(0, 1): 0})
    with pytest.raises(ValueError, match="edge sets"):
        convex_combine(spec, a, other, 0.5)


def test_convex_combine_snap_floors():
    spec = single_edge_spec(eta=1.0, budgets=(6.0, 6.0))
    a = profile_of(spec, {0: {1: 5}, 1: {0: 3}})
    b = profile_of(spec, {0: {1: 2}, 1: {0: 2}})
    mix = convex_combine(spec, a, b, 0.5, snap=True)
    assert mix.counts == {(0, 1): 3, (1, 0): 2}


# -- global optimum ---------------------------------------------------------------------


def test_global_optimum_single_edge():
    u = UtilitySpec.sqrt()
    spec = make_spec(2, 1.0, [(0, 1, 1.0, 1.0, u, u)], [4.0, 9.0])
    result = global_optimum(spec)
    assert result.welfare == pytest.approx(4.0, abs=1e-9)
    assert result.profile.amounts[(0, 1)] == pytest.approx(4.0, abs=1e-9)
    assert result.certified


def test_global_optimum_triangle_matches_brute_force():
    doc = triangle_doc()
    spec = doc.to_game_spec()
    result = global_optimum(spec)
    bf_profile, bf_sw = brute_force_optimum(spec)
    assert abs(result.welfare - bf_sw) <= 1e-6 * max(1.0, bf_sw)
    for e, x in bf_profile.amounts.items():
        assert abs(result.profile.amounts[e] - x) <= spec.eta


def test_global_optimum_beats_reference_profile_on_skewed_grid():
    doc, good, bad = gen_poa_grid_instance(4, 4, 0.1, 1.0)
    spec = doc.to_game_spec()
    result = global_optimum(spec)
    sw_good, _ = grid_reference_welfare(0.1, 1.0, spec.n)
    assert result.welfare >= sw_good - 1e-6


def test_global_optimum_empty_graph():
    spec = make_spec(2, 1.0, [], [1.0, 1.0])
    result = global_optimum(spec)
    assert result.welfare == 0.0 and result.certified


def test_global_optimum_dominates_dynamics_equilibria():
    for seed in (2, 6):
        doc = gen_random_instance(n=8, edge_prob=0.5, seed=seed, budget_units=25)
        spec = doc.to_game_spec()
        opt = global_optimum(spec)
        for s in range(3):
            final, _, status = run_sequential(
                spec, init_profile(spec, RandomFeasible(s)), DynamicsConfig()
            )
            assert isinstance(status, Converged)
            assert social_welfare(spec, final) <= opt.welfare * (1 + 1e-6)


def test_optimizer_config_validation():
    with pytest.raises(ValueError):
        OptimizerConfig(step_size=0.0)
    with pytest.raises(ValueError):
        OptimizerConfig(max_iters=0)


# -- brute-force optimum -------------------------------------------------------------------


def test_brute_force_optimum_single_edge():
    u = UtilitySpec.sqrt()
    spec = make_spec(2, 1.0, [(0, 1, 1.0, 1.0, u, u)], [4.0, 9.0])
    profile, sw = brute_force_optimum(spec)
    assert profile.amounts[(0, 1)] == 4.0
    assert sw == pytest.approx(4.0)


def test_brute_force_optimum_linear_path_corner():
    u = UtilitySpec.linear()
    spec = make_spec(
        3,
        0.25,
        [(0, 1, 1.0, 0.6, u, u), (1, 2, 0.4, 1.0, u, u)],
        [1.0, 1.0, 1.0],
    )
    profile, sw = brute_force_optimum(spec)
    # middle player's whole budget goes to the heavier side
    assert profile.amounts[(0, 1)] == 1.0
    assert profile.amounts[(1, 2)] == 0.0
    assert sw == pytest.approx(1.6)


def test_brute_force_optimum_refuses_large():
    doc = gen_random_instance(n=12, edge_prob=0.9, seed=0, budget_units=50)
    spec = doc.to_game_spec()
    with pytest.raises(ValueError, match="1e7"):
        brute_force_optimum(spec)


# -- quality ratios ---------------------------------------------------------------------------


def test_ne_quality_at_optimum_and_zero():
    doc = triangle_doc()
    spec = doc.to_game_spec()
    _, bf_sw = brute_force_optimum(spec)
    opt = global_optimum(spec)
    prof = opt.profile.to_profile(spec)
    assert ne_quality(spec, prof, opt.welfare) == pytest.approx(1.0, abs=1e-9)
    assert ne_quality(spec, FrequencyProfile.zeros(spec), opt.welfare) == 0.0
    with pytest.raises(ValueError):
        ne_quality(spec, prof, 0.0)


def test_ne_quality_of_bad_vs_good_reference():
    doc, good, bad = gen_poa_grid_instance(4, 4, 0.1, 1.0)
    spec = doc.to_game_spec()
    sw_good = social_welfare(spec, good)
    ratio = ne_quality(spec, bad, sw_good)
    assert ratio == pytest.approx(0.120 / 0.210, rel=1e-9)


def test_poa_grid_ratio_exact():
    assert poa_grid_ratio(0.1, 1.0) == 1.75
    values = [poa_grid_ratio(e, 1.0) for e in (0.1, 0.05, 0.025, 0.0125)]
    assert values[0] < values[1] < values[2] < values[3]
    # profiles coincide when the two allocation levels meet at beta/4
    assert poa_grid_ratio(0.25, 1.0) == 1.0
    with pytest.raises(ValueError):
        poa_grid_ratio(0.5, 1.0)
    with pytest.raises(ValueError):
        poa_grid_ratio(0.0, 1.0)


# -- player partition ---------------------------------------------------------------------------


def test_partition_matched_profile_all_stable():
    doc, good, bad = gen_poa_grid_instance(3, 3, 0.1, 1.0)
    spec = doc.to_game_spec()
    stable, active = partition_players(spec, bad)
    assert stable == frozenset(range(spec.n)) and active == frozenset()


def test_partition_k5_start_all_active():
    doc = gen_k5_cycle_instance(0.05)
    spec = doc.to_game_spec()
    stable, active = partition_players(spec, doc.init_profile())
    assert active == frozenset(range(5))


def test_partition_star_under_proposing_center():
    u = UtilitySpec.sqrt()
    spec = make_spec(
        4,
        1.0,
        [
            (0, 1, Fraction(1, 3), 1.0, u, u),
            (0, 2, Fraction(1, 3), 1.0, u, u),
            (0, 3, Fraction(1, 3), 1.0, u, u),
        ],
        [9.0, 9.0, 9.0, 9.0],
    )
    profile = profile_of(
        spec, {0: {1: 1, 2: 1, 3: 1}, 1: {0: 2}, 2: {0: 2}, 3: {0: 0}}
    )
    stable, active = partition_players(spec, profile)
    assert 0 in active  # out-proposed by leaves 1 and 2
    assert {1, 2} <= stable
    assert 3 in active  # under-proposed back


def test_global_optimum_uncertified_on_tiny_budgeted_iterations():
    doc = gen_random_instance(n=6, edge_prob=0.6, seed=8, budget_units=20)
    spec = doc.to_game_spec()
    result = global_optimum(spec, OptimizerConfig(max_iters=1))
    assert not result.certified
    assert result.iterations == 1
    full = global_optimum(spec)
    assert full.certified
    assert full.welfare >= result.welfare - 1e-12


def test_continuous_polish_removes_grid_slack():
    from netalloc.analysis import continuous_equilibrium_polish
    from netalloc.bestresponse import best_response
    from netalloc.game import player_utility

    doc = gen_random_instance(
        n=8, edge_prob=0.5, seed=321, budget_units=30, behavior="optimistic"
    )
    spec = doc.to_game_spec()
    final, _, status = run_sequential(
        spec, init_profile(spec, RandomFeasible(1)), DynamicsConfig()
    )
    assert isinstance(status, Converged)
    settled = continuous_equilibrium_polish(spec, final)
    for i in range(spec.n):
        br = best_response(spec, settled, i, quantize=False)
        assert (
            br.realized_utility - player_utility(spec, settled, i) <= 1e-9
        )
    assert not isinstance(
        classify_equilibrium(spec, settled, tol=1e-9), NotEquilibrium
    )
