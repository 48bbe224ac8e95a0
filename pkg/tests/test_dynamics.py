import pytest

from helpers import make_spec, profile_of, single_edge_spec
from netalloc.dynamics import (
    Converged,
    CycleDetected,
    DynamicsConfig,
    ExplicitList,
    Given,
    MaxRoundsExceeded,
    NotEquilibrium,
    OptimisticNE,
    PessimisticNE,
    RandomFeasible,
    RandomSeeded,
    RoundRobin,
    Zero,
    classify_equilibrium,
    init_profile,
    run_sequential,
    run_simultaneous,
)
from netalloc.game import (
    FrequencyProfile,
    InfeasibleProfileError,
    player_utility,
    social_welfare,
)
from netalloc.instances import (
    gen_k5_cycle_instance,
    gen_poa_grid_instance,
    gen_random_instance,
    gen_torus_grid,
)
from netalloc.utility import UtilitySpec


# -- init_profile -----------------------------------------------------------------


def test_init_zero():
    spec = gen_random_instance(5, 0.5, seed=1).to_game_spec()
    p = init_profile(spec, Zero())
    assert all(c == 0 for c in p.counts.values())


def test_init_random_deterministic_and_feasible():
    doc = gen_torus_grid(4, 4, beta=1000.0, eta=1.0, weight_seed=5, utility=UtilitySpec.sqrt())
    spec = doc.to_game_spec()
    p1 = init_profile(spec, RandomFeasible(7))
    p2 = init_profile(spec, RandomFeasible(7))
    assert p1 == p2
    assert p1 != init_profile(spec, RandomFeasible(8))
    for i in range(spec.n):
        row = [p1.counts[(i, j)] for j in spec.neighbors[i]]
        assert len(row) == 4
        assert all(isinstance(c, int) and c >= 0 for c in row)
        assert sum(row) <= 1000


def test_init_given_validates():
    spec = single_edge_spec(budgets=(2.0, 2.0))
    bad = profile_of(spec, {0: {1: 3}})
    with pytest.raises(InfeasibleProfileError):
        init_profile(spec, Given(bad))
    good = profile_of(spec, {0: {1: 2}, 1: {0: 1}})
    assert init_profile(spec, Given(good)) == good


# -- sequential -------------------------------------------------------------------


def test_zero_budget_game_converges_immediately():
    u = UtilitySpec.sqrt()
    spec = make_spec(3, 1.0, [(0, 1, 1.0, 1.0, u, u), (1, 2, 0.5, 1.0, u, u)],
                     [0.0, 0.0, 0.0])
    final, trace, status = run_sequential(
        spec, init_profile(spec, Zero()), DynamicsConfig()
    )
    assert status == Converged(t=0)
    assert len(trace.records) == 1


def test_k5_sequential_regression():
    doc = gen_k5_cycle_instance(0.05)
    spec = doc.to_game_spec()
    final, trace, status = run_sequential(
        spec, doc.init_profile(), DynamicsConfig()
    )
    assert status == Converged(t=6)
    slacks = [r.total_slack for r in trace.records]
    assert slacks == [20, 12, 8, 6, 4, 4, 4]
    assert isinstance(classify_equilibrium(spec, final), OptimisticNE)
    assert social_welfare(spec, final) == pytest.approx(0.9075)


def test_sequential_random_instances_converge_with_monotone_slack():
    for seed in range(15):
        doc = gen_random_instance(n=10, edge_prob=0.4, seed=seed, budget_units=50)
        spec = doc.to_game_spec()
        init = init_profile(spec, RandomFeasible(seed))
        final, trace, status = run_sequential(
            spec, init, DynamicsConfig(order=RandomSeeded(seed))
        )
        assert isinstance(status, Converged)
        slacks = [r.total_slack for r in trace.records]
        assert all(isinstance(s, int) for s in slacks)
        assert all(b <= a for a, b in zip(slacks, slacks[1:]))
        # quantized slack can only take so many values
        total_units = sum(spec.budget_units(i) for i in range(spec.n))
        assert len(set(slacks)) <= total_units + 1
        assert not isinstance(classify_equilibrium(spec, final), NotEquilibrium)


def test_sequential_trace_round_indices_strictly_increase():
    doc = gen_random_instance(n=6, edge_prob=0.5, seed=3, budget_units=20)
    spec = doc.to_game_spec()
    _, trace, _ = run_sequential(
        spec, init_profile(spec, RandomFeasible(1)), DynamicsConfig()
    )
    ts = [r.t for r in trace.records]
    assert ts == sorted(set(ts))
    assert all(r.total_slack >= 0 for r in trace.records)


def test_sequential_mover_never_loses_utility():
    doc = gen_random_instance(n=8, edge_prob=0.5, seed=11, budget_units=30)
    spec = doc.to_game_spec()
    _, trace, status = run_sequential(
        spec, init_profile(spec, RandomFeasible(2)), DynamicsConfig()
    )
    assert isinstance(status, Converged)
    for k in range(1, len(trace.records)):
        mover = trace.records[k].mover
        before = player_utility(spec, trace.records[k - 1].profile, mover)
        after = player_utility(spec, trace.records[k].profile, mover)
        assert after >= before - 1e-12


def test_active_player_utilities_nondecreasing_on_stable_suffix():
    for seed in (0, 4, 9):
        doc = gen_random_instance(n=8, edge_prob=0.5, seed=seed, budget_units=24)
        spec = doc.to_game_spec()
        _, trace, status = run_sequential(
            spec, init_profile(spec, RandomFeasible(seed)), DynamicsConfig()
        )
        assert isinstance(status, Converged)
        recs = trace.records
        t0 = 0
        for k in range(1, len(recs)):
            if recs[k].total_slack != recs[k - 1].total_slack:
                t0 = k
        for k in range(t0, len(recs) - 1):
            active = set(range(spec.n)) - recs[k].stable_players
            for i in active:
                u_now = player_utility(spec, recs[k].profile, i)
                u_next = player_utility(spec, recs[k + 1].profile, i)
                assert u_next >= u_now - 1e-12
            # active players on the stable suffix hold no leftover budget
            for i in active:
                prof = recs[k].profile
                realized = sum(
                    min(prof.counts[(i, j)], prof.counts[(j, i)])
                    for j in spec.neighbors[i]
                )
                assert realized == spec.budget_units(i)


def test_sequential_orders_equivalent_convergence():
    doc = gen_random_instance(n=9, edge_prob=0.5, seed=21, budget_units=40)
    spec = doc.to_game_spec()
    init = init_profile(spec, RandomFeasible(5))
    for order in (RoundRobin(), RandomSeeded(3), ExplicitList(tuple(range(8, -1, -1)))):
        final, _, status = run_sequential(
            spec, init, DynamicsConfig(order=order)
        )
        assert isinstance(status, Converged)
        assert not isinstance(classify_equilibrium(spec, final), NotEquilibrium)


def test_explicit_order_must_cover_players():
    spec = gen_random_instance(n=4, edge_prob=1.0, seed=2).to_game_spec()
    cfg = DynamicsConfig(order=ExplicitList((0, 1)))
    with pytest.raises(ValueError, match="cover"):
        run_sequential(spec, init_profile(spec, Zero()), cfg)


def test_max_rounds_exceeded_returns_trace():
    doc = gen_torus_grid(4, 4, beta=100.0, eta=1.0, weight_seed=1, utility=UtilitySpec.sqrt())
    spec = doc.to_game_spec()
    final, trace, status = run_sequential(
        spec, init_profile(spec, RandomFeasible(0)), DynamicsConfig(max_rounds=3)
    )
    assert status == MaxRoundsExceeded(rounds=3)
    assert len(trace.records) == 4


def test_sequential_deterministic_repeat():
    doc = gen_torus_grid(5, 5, beta=1000.0, eta=1.0, weight_seed=3, utility=UtilitySpec.sqrt())
    spec = doc.to_game_spec()
    init = init_profile(spec, RandomFeasible(42))
    cfg = DynamicsConfig(order=RandomSeeded(42))
    f1, t1, s1 = run_sequential(spec, init, cfg, trace_detail="light")
    f2, t2, s2 = run_sequential(spec, init, cfg, trace_detail="light")
    assert f1 == f2 and s1 == s2
    assert [r.total_slack for r in t1.records] == [r.total_slack for r in t2.records]


# -- simultaneous -----------------------------------------------------------------


def test_k5_simultaneous_cycle():
    doc = gen_k5_cycle_instance(0.05)
    spec = doc.to_game_spec()
    start = doc.init_profile()
    final, trace, status = run_simultaneous(
        spec, start, DynamicsConfig(mode="simultaneous", max_rounds=100)
    )
    assert status == CycleDetected(start=0, period=2)
    transposed = FrequencyProfile(
        {(j, i): c for (i, j), c in start.counts.items()}
    )
    assert trace.records[1].profile == transposed
    assert trace.records[2].profile == start


def test_simultaneous_fixed_point_at_matched_profile():
    spec = single_edge_spec(UtilitySpec.sqrt(), eta=1.0, budgets=(5.0, 5.0))
    matched = profile_of(spec, {0: {1: 3}, 1: {0: 3}})
    final, _, status = run_simultaneous(
        spec, matched, DynamicsConfig(mode="simultaneous")
    )
    assert status == Converged(t=0)
    assert final == matched


def test_simultaneous_converges_from_pessimistic_equilibrium():
    doc, good, bad = gen_poa_grid_instance(4, 4, 0.1, 1.0)
    spec = doc.to_game_spec()
    final, _, status = run_simultaneous(
        spec, bad, DynamicsConfig(mode="simultaneous")
    )
    assert status == Converged(t=0)
    assert final == bad


def test_mode_mismatch_raises():
    spec = single_edge_spec()
    with pytest.raises(ValueError):
        run_simultaneous(spec, init_profile(spec, Zero()), DynamicsConfig())
    with pytest.raises(ValueError):
        run_sequential(
            spec,
            init_profile(spec, Zero()),
            DynamicsConfig(mode="simultaneous"),
        )


# -- classification ----------------------------------------------------------------


def test_classify_matched_profile_pessimistic():
    doc, good, bad = gen_poa_grid_instance(3, 3, 0.1, 1.0)
    spec = doc.to_game_spec()
    assert isinstance(classify_equilibrium(spec, bad), PessimisticNE)
    assert isinstance(classify_equilibrium(spec, good), PessimisticNE)


def test_classify_over_matched_equilibrium_optimistic():
    # saturated neighbor cannot respond; the raiser's surplus goes nowhere
    spec = single_edge_spec(UtilitySpec.sqrt(), eta=1.0, budgets=(5.0, 3.0))
    profile = profile_of(spec, {0: {1: 5}, 1: {0: 3}})
    assert isinstance(classify_equilibrium(spec, profile), OptimisticNE)


def test_classify_k5_start_not_equilibrium():
    doc = gen_k5_cycle_instance(0.05)
    spec = doc.to_game_spec()
    verdict = classify_equilibrium(spec, doc.init_profile())
    assert isinstance(verdict, NotEquilibrium)
    assert verdict.witness == 0
    assert verdict.improvement > 1e-6


def test_converged_profiles_classify_as_equilibria():
    for seed in (1, 5):
        for behavior in ("pessimistic", "optimistic"):
            doc = gen_random_instance(
                n=8, edge_prob=0.5, seed=seed, budget_units=30, behavior=behavior
            )
            spec = doc.to_game_spec()
            final, _, status = run_sequential(
                spec, init_profile(spec, RandomFeasible(seed)), DynamicsConfig()
            )
            assert isinstance(status, Converged)
            assert not isinstance(
                classify_equilibrium(spec, final), NotEquilibrium
            )


def test_trace_compression_policy(monkeypatch):
    import netalloc.dynamics as dyn

    monkeypatch.setattr(dyn, "FULL_PROFILE_ROUNDS", 3)
    doc = gen_random_instance(n=8, edge_prob=0.6, seed=13, budget_units=40)
    spec = doc.to_game_spec()
    _, trace, status = run_sequential(
        spec, init_profile(spec, RandomFeasible(4)), DynamicsConfig()
    )
    assert isinstance(status, Converged)
    assert status.t > 4  # long enough to cross the snapshot horizon
    for rec in trace.records:
        if rec.t < 3:
            assert rec.profile is not None
        else:
            assert rec.profile is None
        assert rec.profile_hash  # hashes identify every round regardless
    # the trailing window keeps full profiles available
    tail = dict(trace.tail_profiles)
    assert status.t in tail


def test_light_trace_skips_welfare_and_profiles():
    doc = gen_random_instance(n=6, edge_prob=0.5, seed=2, budget_units=10)
    spec = doc.to_game_spec()
    _, trace, _ = run_sequential(
        spec,
        init_profile(spec, RandomFeasible(0)),
        DynamicsConfig(),
        trace_detail="light",
    )
    assert all(r.profile is None and r.welfare is None for r in trace.records)
    assert all(r.total_slack >= 0 for r in trace.records)


def test_min_positive_utility_gain_diagnostic():
    from netalloc.dynamics import min_positive_utility_gain

    doc = gen_random_instance(n=7, edge_prob=0.5, seed=6, budget_units=20)
    spec = doc.to_game_spec()
    _, trace, status = run_sequential(
        spec, init_profile(spec, RandomFeasible(3)), DynamicsConfig()
    )
    assert isinstance(status, Converged)
    gain = min_positive_utility_gain(spec, trace)
    assert gain is not None and gain > 0
    # light traces carry no profiles, so no gain can be measured
    _, light, _ = run_sequential(
        spec,
        init_profile(spec, RandomFeasible(3)),
        DynamicsConfig(),
        trace_detail="light",
    )
    assert min_positive_utility_gain(spec, light) is None


def _all_rows(budget, caps_any, deg):
    # every per-player allocation of at most `budget` quanta over deg edges
    if deg == 0:
        yield ()
        return
    for first in range(budget + 1):
        for rest in _all_rows(budget - first, caps_any, deg - 1):
            yield (first,) + rest


def test_classification_matches_exhaustive_deviation_check():
    # first-principles cross-check on tiny games: a profile is an
    # equilibrium iff no player has a better feasible grid row against it
    u_pool = [
        UtilitySpec.sqrt(),
        UtilitySpec.linear(),
        UtilitySpec.capped_quadratic(2.0),
    ]
    for pick, u in enumerate(u_pool):
        spec = make_spec(
            3,
            1.0,
            [
                (0, 1, 1.0, 0.7, u, u),
                (1, 2, 0.3, 1.0, u, u),
            ],
            [3.0, 4.0, 3.0],
        )
        from netalloc.game import player_utility as pu

        rows = {
            0: [{1: a} for (a,) in _all_rows(3, None, 1)],
            1: [
                {0: a, 2: b}
                for (a, b) in _all_rows(4, None, 2)
            ],
            2: [{1: a} for (a,) in _all_rows(3, None, 1)],
        }
        checked = disagreements = 0
        for r0 in rows[0]:
            for r1 in rows[1]:
                for r2 in rows[2]:
                    profile = profile_of(spec, {0: r0, 1: r1, 2: r2})
                    exhaustive_ne = True
                    for i in range(3):
                        base = pu(spec, profile, i)
                        best = max(
                            pu(spec, profile.with_proposals(i, alt), i)
                            for alt in rows[i]
                        )
                        if best > base + 1e-12:
                            exhaustive_ne = False
                            break
                    verdict = classify_equilibrium(spec, profile, tol=1e-12)
                    classified_ne = not isinstance(verdict, NotEquilibrium)
                    checked += 1
                    if classified_ne != exhaustive_ne:
                        disagreements += 1
        assert checked == 4 * 15 * 4
        assert disagreements == 0, f"{disagreements} of {checked} (u={u})"
