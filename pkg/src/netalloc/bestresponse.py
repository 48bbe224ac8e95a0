"""Exact single-player best response against a fixed proposal profile.

A player maximizes sum_j w_j * u_j(min(f_j, cap_j)) over her own proposals
f_j >= 0 with sum_j f_j <= budget, where cap_j is the neighbor's standing
proposal to her.  The maximizer has water-filling structure: there is a level
``delta >= 0`` (the budget's shadow price) such that each neighbor receives
min(cap_j, x_j) where x_j is the point at which the weighted marginal
w_j * u_j'(x) drops to delta.  We find delta by bisection on the monotone
total-demand function, then snap to the eta grid.

Three clean-up phases follow the continuous core:

1. greedy grid fill and exchange polish -- leftover quanta go one at a time
   to the neighbor with the highest current weighted marginal, then
   single-quantum exchanges run until none improves, which makes the grid
   allocation exactly optimal (separable concave objective);
2. cap matching -- remaining budget is parked on still-unmatched neighbors up
   to their caps, ascending index.  This never changes the mover's utility
   (those marginals are zero by phase 1) but keeps two guarantees exact even
   for utilities with a satiation plateau: a finished mover never holds both
   spare budget and an unmatched over-proposing neighbor, and her realized
   interaction total never drops below its pre-move value;
3. optimistic disposal -- an optimistic player spreads any remaining budget
   over matched neighbors in round-robin quanta (ascending index), proposing
   above their caps in the hope of future reciprocation.  A pessimistic
   player keeps the leftover as slack.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .game import (
    Behavior,
    FrequencyProfile,
    GameSpec,
    PlayerId,
    player_utility,
)
from .utility import INF, UtilitySpec

# Marginal scores are sampled a hair inside the next quantum so families with
# an unbounded slope at zero still compare by their weights.
MARGINAL_SHIFT = 1e-9

BISECTION_MAX_ITERS = 200
BISECTION_REL_WIDTH = 1e-12

BRUTE_FORCE_LIMIT = 10_000_000


@dataclass(frozen=True)
class BRResult:
    """Outcome of one best-response computation.

    ``proposals`` are per-neighbor amounts in eta units (ints when the input
    profile is on the grid).  ``dual_level`` is the water level delta;
    ``cap_duals`` carry the shadow price of each binding neighbor cap.
    ``realized_utility`` is computed from the agreed amounts min(f_j, cap_j),
    not from the raw proposals, and ``slack_after`` is the budget (eta units)
    that ends up unrealized.
    """

    proposals: dict[PlayerId, float]
    dual_level: float
    cap_duals: dict[PlayerId, float]
    realized_utility: float
    slack_after: float


def _water_fill(
    weights: Sequence[float],
    utils: Sequence[UtilitySpec],
    caps_units: Sequence[float],
    budget_units: float,
    eta: float,
) -> tuple[float, list[float]]:
    """Continuous core: returns (delta, per-neighbor targets in eta units).

    Targets satisfy sum <= budget (up to bisection width) and equal
    min(effective cap, point where the weighted marginal falls to delta).
    """
    deg = len(weights)
    eff = [c if c < budget_units else budget_units for c in caps_units]

    def targets_at(delta: float) -> list[float]:
        out = []
        for k in range(deg):
            w = weights[k]
            if w <= 0.0:
                out.append(0.0)
                continue
            x = utils[k].inverse_marginal(delta / w)
            cap = eff[k]
            t = x / eta
            out.append(cap if t > cap else t)
        return out

    base = targets_at(0.0)
    if sum(base) <= budget_units:
        return 0.0, base

    # At hi every ideal point is <= budget/deg, so total demand fits.
    probe = budget_units * eta / deg
    hi = 0.0
    for k in range(deg):
        if weights[k] > 0.0:
            m = weights[k] * utils[k].marginal(probe)
            if m > hi:
                hi = m
    if hi <= 0.0:
        return 0.0, base
    lo, hi0 = 0.0, hi
    for _ in range(BISECTION_MAX_ITERS):
        if hi - lo <= BISECTION_REL_WIDTH * hi0:
            break
        mid = 0.5 * (lo + hi)
        if sum(targets_at(mid)) > budget_units:
            lo = mid
        else:
            hi = mid
    return hi, targets_at(hi)


def quantize_allocation(
    targets: Sequence[float],
    caps_units: Sequence[float],
    budget_units: int,
    eta: float,
    marginals: Sequence[tuple[float, UtilitySpec]],
) -> list[int]:
    """Snap continuous targets to the eta grid without wasting quanta.

    Floors every target, then hands leftover quanta one at a time to the
    neighbor with the highest current weighted marginal whose cap (and the
    budget) still allow another quantum.  Ties go to the lowest index; the
    loop stops once every eligible marginal is zero.
    """
    deg = len(targets)
    alloc = [int(math.floor(t)) for t in targets]
    leftover = budget_units - sum(alloc)
    while leftover > 0:
        best_k = -1
        best_score = 0.0
        for k in range(deg):
            if alloc[k] + 1 > caps_units[k]:
                continue
            w, u = marginals[k]
            if w <= 0.0:
                continue
            score = w * u.marginal((alloc[k] + MARGINAL_SHIFT) * eta)
            if score > best_score:
                best_score = score
                best_k = k
        if best_k < 0:
            break
        alloc[best_k] += 1
        leftover -= 1
    return alloc


def _polish_exchanges(
    alloc: list[int],
    caps_units: Sequence[float],
    budget_units: int,
    eta: float,
    marginals: Sequence[tuple[float, UtilitySpec]],
) -> None:
    """Single-quantum improvement moves until none is left.

    For a separable concave objective with one budget constraint, a grid
    point with no improving add or shift of a single quantum is a global
    grid optimum, so this turns the floor-and-greedy allocation into an
    exact one.  Each move strictly improves utility; moves are scored by
    gain (ties to the lowest index) for determinism.
    """
    deg = len(alloc)

    def gain_up(k: int) -> float:
        w, u = marginals[k]
        a = alloc[k]
        if a + 1 > caps_units[k] or w <= 0.0:
            return 0.0
        return w * (u.value((a + 1) * eta) - u.value(a * eta))

    def loss_down(j: int) -> float:
        w, u = marginals[j]
        a = alloc[j]
        return w * (u.value(a * eta) - u.value((a - 1) * eta))

    threshold = 1e-13
    for _ in range(100_000):
        ups = [gain_up(k) for k in range(deg)]
        best_gain = 0.0
        best_move: tuple[int, int] | None = None  # (source or -1, dest)
        if sum(alloc) < budget_units:
            for k in range(deg):
                if ups[k] > best_gain + threshold:
                    best_gain = ups[k]
                    best_move = (-1, k)
        for j in range(deg):
            if alloc[j] <= 0:
                continue
            down = loss_down(j)
            for k in range(deg):
                if k == j:
                    continue
                gain = ups[k] - down
                if gain > best_gain + threshold:
                    best_gain = gain
                    best_move = (j, k)
        if best_move is None:
            return
        src, dst = best_move
        if src >= 0:
            alloc[src] -= 1
        alloc[dst] += 1


def _greedy_fill_continuous(
    alloc: list[float],
    caps_units: Sequence[float],
    budget_units: float,
    eta: float,
    marginals: Sequence[tuple[float, UtilitySpec]],
) -> None:
    """Continuous analog of the grid greedy: pour leftover budget into the
    best-scoring neighbors up to their caps.  Only flat-marginal families
    (linear) ever leave more than bisection dust here."""
    deg = len(alloc)
    leftover = budget_units - sum(alloc)
    tiny = 1e-12 * max(1.0, budget_units)
    while leftover > tiny:
        best_k = -1
        best_score = 0.0
        for k in range(deg):
            cap = caps_units[k] if caps_units[k] < budget_units else budget_units
            if alloc[k] >= cap:
                continue
            w, u = marginals[k]
            if w <= 0.0:
                continue
            score = w * u.marginal((alloc[k] + MARGINAL_SHIFT) * eta)
            if score > best_score:
                best_score = score
                best_k = k
        if best_k < 0:
            break
        cap = min(caps_units[best_k], budget_units)
        take = min(cap - alloc[best_k], leftover)
        alloc[best_k] += take
        leftover -= take


def best_response(
    spec: GameSpec,
    profile: FrequencyProfile,
    i: PlayerId,
    behavior: Behavior | None = None,
    quantize: bool | None = None,
) -> BRResult:
    """Best response of player i against everyone else's standing proposals.

    ``quantize`` defaults to whether the profile is on the integer grid;
    analysis code passes real-valued profiles and gets the continuous
    solution.  ``behavior`` defaults to the player's configured one.
    """
    if behavior is None:
        behavior = spec.behaviors[i]
    if quantize is None:
        quantize = profile.is_integral()
    nbrs = spec.neighbors[i]
    budget = spec.budget_units(i)
    if not nbrs:
        return BRResult(
            proposals={},
            dual_level=0.0,
            cap_duals={},
            realized_utility=0.0,
            slack_after=float(budget) if not quantize else budget,
        )

    eta = spec.eta
    weights = [spec.weights[(i, j)] for j in nbrs]
    utils = [spec.utilities[(i, j)] for j in nbrs]
    caps = [profile.counts[(j, i)] for j in nbrs]
    deg = len(nbrs)

    if budget <= 0:
        zero = 0 if quantize else 0.0
        return BRResult(
            proposals={j: zero for j in nbrs},
            dual_level=0.0,
            cap_duals={j: 0.0 for j in nbrs},
            realized_utility=0.0,
            slack_after=zero,
        )

    delta, targets = _water_fill(weights, utils, caps, budget, eta)
    marginals = list(zip(weights, utils))

    if quantize:
        grid_alloc = quantize_allocation(targets, caps, budget, eta, marginals)
        _polish_exchanges(grid_alloc, caps, budget, eta, marginals)
        alloc: list[float] = list(grid_alloc)
        leftover = budget - sum(alloc)
    else:
        alloc = list(targets)
        _greedy_fill_continuous(alloc, caps, budget, eta, marginals)
        leftover = budget - sum(alloc)

    # Cap matching: remaining budget parks on unmatched neighbors (utility
    # neutral; every positive-marginal quantum was already placed above).
    if leftover > (0 if quantize else 1e-12 * budget):
        for k in range(deg):
            if leftover <= 0:
                break
            room = caps[k] - alloc[k]
            if room <= 0:
                continue
            take = room if room < leftover else leftover
            alloc[k] += take
            leftover -= take

    # Optimistic disposal: spread what is left over the (now fully matched)
    # neighborhood, round-robin one quantum at a time.
    if behavior is Behavior.OPTIMISTIC and leftover > 0:
        lose = [k for k in range(deg) if alloc[k] >= caps[k]]
        if lose:
            if quantize:
                for t in range(int(leftover)):
                    alloc[lose[t % len(lose)]] += 1
                leftover = 0
            else:
                share = leftover / len(lose)
                for k in lose:
                    alloc[k] += share
                leftover = 0.0

    realized_utility = 0.0
    realized_total = 0.0
    cap_duals: dict[PlayerId, float] = {}
    for k, j in enumerate(nbrs):
        agreed = alloc[k] if alloc[k] < caps[k] else caps[k]
        realized_total += agreed
        realized_utility += weights[k] * utils[k].value(agreed * eta)
        if targets[k] >= caps[k] and caps[k] < INF:
            lam = weights[k] * utils[k].marginal(caps[k] * eta) - delta
            cap_duals[j] = lam if lam > 0.0 else 0.0
        else:
            cap_duals[j] = 0.0

    return BRResult(
        proposals={j: alloc[k] for k, j in enumerate(nbrs)},
        dual_level=delta,
        cap_duals=cap_duals,
        realized_utility=realized_utility,
        slack_after=budget - realized_total,
    )


def is_best_response(
    spec: GameSpec,
    profile: FrequencyProfile,
    i: PlayerId,
    tol: float = 1e-9,
) -> tuple[bool, float]:
    """Whether i can improve by more than tol, plus the improvement amount.

    A player matching every neighbor (empty win set) is best-responding by
    construction: every cap constraint already binds.
    """
    counts = profile.counts
    if all(counts[(i, j)] >= counts[(j, i)] for j in spec.neighbors[i]):
        return True, 0.0
    br = best_response(spec, profile, i)
    improvement = br.realized_utility - player_utility(spec, profile, i)
    return improvement <= tol, improvement


def brute_force_best_response(
    spec: GameSpec, profile: FrequencyProfile, i: PlayerId
) -> tuple[dict[PlayerId, int], float]:
    """Exhaustive grid oracle for the best response (small instances only).

    Enumerates every allocation of at most the budget over the neighbors in
    lexicographic order and keeps the first maximizer, so ties resolve to the
    lexicographically smallest allocation.
    """
    nbrs = spec.neighbors[i]
    budget = spec.budget_units(i)
    deg = len(nbrs)
    if deg == 0:
        return {}, 0.0
    size = math.comb(budget + deg, deg)
    if size > BRUTE_FORCE_LIMIT:
        raise ValueError(
            f"brute-force search would enumerate {size} allocations "
            f"(limit {BRUTE_FORCE_LIMIT})"
        )
    eta = spec.eta
    weights = [spec.weights[(i, j)] for j in nbrs]
    utils = [spec.utilities[(i, j)] for j in nbrs]
    caps = [profile.counts[(j, i)] for j in nbrs]

    best_alloc: list[int] | None = None
    best_util = -INF
    alloc = [0] * deg

    def recurse(k: int, remaining: int, partial: float) -> None:
        nonlocal best_alloc, best_util
        if k == deg - 1:
            for a in range(remaining + 1):
                agreed = a if a < caps[k] else caps[k]
                total = partial + weights[k] * utils[k].value(agreed * eta)
                if total > best_util:
                    best_util = total
                    alloc[k] = a
                    best_alloc = alloc.copy()
            alloc[k] = 0
            return
        for a in range(remaining + 1):
            alloc[k] = a
            agreed = a if a < caps[k] else caps[k]
            recurse(
                k + 1,
                remaining - a,
                partial + weights[k] * utils[k].value(agreed * eta),
            )
        alloc[k] = 0

    recurse(0, budget, 0.0)
    assert best_alloc is not None
    return {j: best_alloc[k] for k, j in enumerate(nbrs)}, best_util


def ideal_allocation(
    spec: GameSpec, i: PlayerId
) -> tuple[dict[PlayerId, float], float]:
    """Unconstrained-by-neighbors optimum: water-filling with no caps.

    Returns per-neighbor amounts in resource units and the optimum value,
    an upper bound on i's utility at any profile.
    """
    nbrs = spec.neighbors[i]
    if not nbrs:
        return {}, 0.0
    eta = spec.eta
    budget = spec.budget_units(i)
    if budget <= 0:
        return {j: 0.0 for j in nbrs}, 0.0
    weights = [spec.weights[(i, j)] for j in nbrs]
    utils = [spec.utilities[(i, j)] for j in nbrs]
    caps = [INF] * len(nbrs)
    _, targets = _water_fill(weights, utils, caps, budget, eta)
    alloc = list(targets)
    _greedy_fill_continuous(
        alloc, caps, budget, eta, list(zip(weights, utils))
    )
    value = sum(
        weights[k] * utils[k].value(alloc[k] * eta) for k in range(len(nbrs))
    )
    return {j: alloc[k] * eta for k, j in enumerate(nbrs)}, value


def oracle_tolerance(spec: GameSpec, i: PlayerId) -> float:
    """Quantization error bound used when comparing the solver against the
    exhaustive oracle: degree * eta * max weighted marginal at zero.  Infinite
    (vacuous) for families whose slope blows up at zero."""
    nbrs = spec.neighbors[i]
    if not nbrs:
        return 0.0
    worst = max(
        spec.weights[(i, j)] * spec.utilities[(i, j)].marginal(0.0)
        for j in nbrs
    )
    return spec.degree(i) * spec.eta * worst
