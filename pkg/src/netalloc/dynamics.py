"""Best-response dynamics: sequential and simultaneous play.

Sequential play updates one non-best-responding player per round and, on
quantized profiles, provably terminates at a Nash equilibrium; the engine
checks the two monotonicity facts that drive that argument at runtime (total
slack never increases, and once total slack has stabilized the set of players
with an empty win set only grows).  Simultaneous play updates everyone at
once against the previous round and need not converge, so the engine detects
exact profile revisits (integer state makes equality exact) and reports the
cycle's start and period.
"""

from __future__ import annotations

import hashlib
import random
from collections import deque
from dataclasses import dataclass, field

from .bestresponse import BRResult, best_response
from .game import (
    FrequencyProfile,
    GameSpec,
    PlayerId,
    check_feasible,
    player_utility,
    social_welfare,
)

SEQUENTIAL = "sequential"
SIMULTANEOUS = "simultaneous"

FULL_PROFILE_ROUNDS = 10_000  # past this, traces keep hashes + a tail window
TAIL_PROFILES = 100


class InvariantViolation(AssertionError):
    """A runtime-checked dynamics law failed (indicates a solver bug)."""


# -- order policies ---------------------------------------------------------


@dataclass(frozen=True)
class RoundRobin:
    """Cycle player ids, skipping the ones already best-responding."""


@dataclass(frozen=True)
class RandomSeeded:
    """Pick uniformly among the non-best-responders, seeded."""

    seed: int


@dataclass(frozen=True)
class ExplicitList:
    """Cycle a fixed id sequence (must cover every player), skipping
    best-responders.  Meant for experimentation with adversarial orders."""

    order: tuple[int, ...]


OrderPolicy = RoundRobin | RandomSeeded | ExplicitList


# -- initial profile policies ------------------------------------------------


@dataclass(frozen=True)
class Zero:
    pass


@dataclass(frozen=True)
class RandomFeasible:
    seed: int


@dataclass(frozen=True)
class Given:
    profile: FrequencyProfile


InitPolicy = Zero | RandomFeasible | Given


@dataclass(frozen=True)
class DynamicsConfig:
    mode: str = SEQUENTIAL
    order: OrderPolicy = RoundRobin()
    max_rounds: int = 1_000_000
    tol: float = 1e-9
    check_invariants: bool = True

    def __post_init__(self) -> None:
        if self.mode not in (SEQUENTIAL, SIMULTANEOUS):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.max_rounds < 1:
            raise ValueError("max_rounds must be >= 1")
        if self.tol < 0:
            raise ValueError("tol must be >= 0")


# -- termination statuses ----------------------------------------------------


@dataclass(frozen=True)
class Converged:
    t: int


@dataclass(frozen=True)
class CycleDetected:
    start: int
    period: int


@dataclass(frozen=True)
class MaxRoundsExceeded:
    rounds: int


TerminationStatus = Converged | CycleDetected | MaxRoundsExceeded


@dataclass(frozen=True)
class RoundRecord:
    """State snapshot after round t (t=0 is the initial profile).

    ``stable_players`` are those with an empty win set; on a slack-stable
    suffix of a sequential run this set only grows.  ``profile`` is omitted
    in light traces and for very long runs (the hash always identifies the
    exact integer state).
    """

    t: int
    mover: PlayerId | str | None
    profile: FrequencyProfile | None
    profile_hash: str
    total_slack: float
    welfare: float | None
    potential: float | None
    stable_players: frozenset[int]


@dataclass
class Trace:
    records: list[RoundRecord] = field(default_factory=list)
    tail_profiles: deque = field(default_factory=lambda: deque(maxlen=TAIL_PROFILES))


def profile_hash(spec: GameSpec, profile: FrequencyProfile) -> str:
    key = profile.key(spec)
    return hashlib.sha1(repr(key).encode()).hexdigest()[:16]


# -- equilibrium classification ----------------------------------------------


@dataclass(frozen=True)
class NotEquilibrium:
    witness: PlayerId
    improvement: float


@dataclass(frozen=True)
class PessimisticNE:
    pass


@dataclass(frozen=True)
class OptimisticNE:
    pass


EquilibriumClass = NotEquilibrium | PessimisticNE | OptimisticNE


def classify_equilibrium(
    spec: GameSpec, profile: FrequencyProfile, tol: float = 1e-9
) -> EquilibriumClass:
    """Nash check for every player, then matched/over-matched split.

    A pessimistic equilibrium has proposals matched exactly on every edge;
    any equilibrium with a strictly over-matched proposal is optimistic.
    """
    from .bestresponse import is_best_response

    for i in range(spec.n):
        ok, improvement = is_best_response(spec, profile, i, tol)
        if not ok:
            return NotEquilibrium(witness=i, improvement=improvement)
    for (i, j) in spec.edges:
        if profile.counts[(i, j)] != profile.counts[(j, i)]:
            return OptimisticNE()
    return PessimisticNE()


# -- initial profiles ---------------------------------------------------------


def init_profile(spec: GameSpec, policy: InitPolicy) -> FrequencyProfile:
    """Build a feasible starting profile (deterministic per policy/seed)."""
    from .bestresponse import quantize_allocation

    if isinstance(policy, Zero):
        return FrequencyProfile.zeros(spec)
    if isinstance(policy, Given):
        check_feasible(spec, policy.profile)
        return FrequencyProfile(policy.profile.counts)
    if not isinstance(policy, RandomFeasible):
        raise TypeError(f"unknown init policy {policy!r}")

    rng = random.Random(policy.seed)
    counts: dict[tuple[int, int], int] = {}
    inf = float("inf")
    for i in range(spec.n):
        nbrs = spec.neighbors[i]
        budget = spec.budget_units(i)
        if not nbrs:
            continue
        if budget <= 0:
            for j in nbrs:
                counts[(i, j)] = 0
            continue
        draws = [rng.random() for _ in nbrs]
        total = sum(draws)
        targets = [budget * d / total for d in draws]
        marginals = [
            (spec.weights[(i, j)], spec.utilities[(i, j)]) for j in nbrs
        ]
        alloc = quantize_allocation(
            targets, [inf] * len(nbrs), budget, spec.eta, marginals
        )
        for k, j in enumerate(nbrs):
            counts[(i, j)] = alloc[k]
    return FrequencyProfile(counts)


# -- sequential dynamics -------------------------------------------------------


class _SeqState:
    """Incrementally maintained quantities for the sequential loop.

    Only the mover's row changes per round, so realized totals, win-set sizes
    and best-response statuses are patched for the mover and the neighbors
    whose incoming proposal actually changed.
    """

    def __init__(self, spec: GameSpec, init: FrequencyProfile, tol: float):
        self.spec = spec
        self.tol = tol
        self.counts = dict(init.counts)
        self.view = FrequencyProfile._wrap(self.counts)
        self.budgets = [spec.budget_units(i) for i in range(spec.n)]
        self.realized = [0] * spec.n
        self.win_count = [0] * spec.n
        for i in range(spec.n):
            r = 0
            w = 0
            for j in spec.neighbors[i]:
                cij = self.counts[(i, j)]
                cji = self.counts[(j, i)]
                r += cij if cij < cji else cji
                if cij < cji:
                    w += 1
            self.realized[i] = r
            self.win_count[i] = w
        self.total_budget = sum(self.budgets)
        # players that can still improve, with their (current) best response
        self.not_br: dict[int, BRResult] = {}
        for i in range(spec.n):
            ok, br = self._status(i)
            if not ok:
                self.not_br[i] = br

    def total_slack(self) -> float:
        return self.total_budget - sum(self.realized)

    def _status(self, i: int) -> tuple[bool, BRResult | None]:
        if self.win_count[i] == 0:
            return True, None  # matching everyone: no unilateral gain exists
        br = best_response(self.spec, self.view, i)
        improvement = br.realized_utility - player_utility(
            self.spec, self.view, i
        )
        return improvement <= self.tol, br

    def apply_move(self, mover: int, br: BRResult) -> None:
        counts = self.counts
        changed = []
        for j, new in br.proposals.items():
            old = counts[(mover, j)]
            if new == old:
                continue
            cji = counts[(j, mover)]
            old_a = old if old < cji else cji
            new_a = new if new < cji else cji
            if new_a != old_a:
                d = new_a - old_a
                self.realized[mover] += d
                self.realized[j] += d
            if (old < cji) != (new < cji):
                self.win_count[mover] += 1 if new < cji else -1
            if (cji < old) != (cji < new):
                self.win_count[j] += 1 if cji < new else -1
            counts[(mover, j)] = new
            changed.append(j)
        self.not_br.pop(mover, None)
        for j in changed:
            ok, brj = self._status(j)
            if ok:
                self.not_br.pop(j, None)
            else:
                self.not_br[j] = brj

    def stable_players(self) -> frozenset[int]:
        wc = self.win_count
        return frozenset(i for i in range(self.spec.n) if wc[i] == 0)


def _check_slack_suffix(records: list[RoundRecord]) -> None:
    """Once total slack stops changing, the stable set must only grow."""
    if len(records) < 2:
        return
    t0 = 0
    for k in range(1, len(records)):
        if records[k].total_slack != records[k - 1].total_slack:
            t0 = k
    for k in range(t0, len(records) - 1):
        if not records[k].stable_players <= records[k + 1].stable_players:
            lost = records[k].stable_players - records[k + 1].stable_players
            raise InvariantViolation(
                f"stable set shrank on the slack-stable suffix at round "
                f"{records[k + 1].t}: lost players {sorted(lost)}"
            )


def run_sequential(
    spec: GameSpec,
    init: FrequencyProfile,
    config: DynamicsConfig,
    ranking=None,
    trace_detail: str = "full",
) -> tuple[FrequencyProfile, Trace, TerminationStatus]:
    """One-player-per-round best-response dynamics.

    The order policy picks the next mover among players that can still
    improve by more than ``config.tol``; the run converges when no such
    player remains.  ``ranking`` (a RankingSystem) attaches the weighted
    potential to each round record.  ``trace_detail`` "light" skips profile
    snapshots and welfare, keeping slack/stable-set data for invariants.
    """
    if config.mode != SEQUENTIAL:
        raise ValueError("config.mode must be 'sequential'")
    if trace_detail not in ("full", "light"):
        raise ValueError(f"unknown trace detail {trace_detail!r}")
    check_feasible(spec, init)
    integral = init.is_integral()

    potential_of = None
    if ranking is not None:
        from .analysis import potential_value

        potential_of = lambda p: potential_value(spec, ranking, p)  # noqa: E731

    state = _SeqState(spec, init, config.tol)
    trace = Trace()

    def record(t: int, mover) -> None:
        snapshot = None
        phash = ""
        if trace_detail == "full":
            snapshot = (
                FrequencyProfile(state.counts)
                if t < FULL_PROFILE_ROUNDS
                else None
            )
            phash = profile_hash(spec, state.view)
            trace.tail_profiles.append((t, FrequencyProfile(state.counts)))
        welfare = (
            social_welfare(spec, state.view) if trace_detail == "full" else None
        )
        potential = (
            potential_of(state.view) if potential_of is not None else None
        )
        trace.records.append(
            RoundRecord(
                t=t,
                mover=mover,
                profile=snapshot,
                profile_hash=phash,
                total_slack=state.total_slack(),
                welfare=welfare,
                potential=potential,
                stable_players=state.stable_players(),
            )
        )

    record(0, None)

    order = config.order
    rr_next = 0
    explicit_pos = 0
    rng = random.Random(order.seed) if isinstance(order, RandomSeeded) else None
    if isinstance(order, ExplicitList):
        if set(order.order) < set(range(spec.n)):
            raise ValueError("explicit order must cover every player")

    t = 0
    while state.not_br and t < config.max_rounds:
        t += 1
        if isinstance(order, RoundRobin):
            mover = -1
            for k in range(spec.n):
                cand = (rr_next + k) % spec.n
                if cand in state.not_br:
                    mover = cand
                    break
            rr_next = (mover + 1) % spec.n
        elif isinstance(order, RandomSeeded):
            mover = rng.choice(sorted(state.not_br))
        else:
            seq = order.order
            mover = -1
            for k in range(len(seq)):
                cand = seq[(explicit_pos + k) % len(seq)]
                if cand in state.not_br:
                    mover = cand
                    explicit_pos = (explicit_pos + k + 1) % len(seq)
                    break
        br = state.not_br[mover]
        prev_slack = state.total_slack()
        state.apply_move(mover, br)
        if config.check_invariants:
            now = state.total_slack()
            bound = prev_slack if integral else prev_slack + 1e-9
            if now > bound:
                raise InvariantViolation(
                    f"total slack increased at round {t}: "
                    f"{prev_slack} -> {now} (mover {mover})"
                )
        record(t, mover)

    if state.not_br:
        status: TerminationStatus = MaxRoundsExceeded(config.max_rounds)
    else:
        status = Converged(t)
        if config.check_invariants:
            _check_slack_suffix(trace.records)
    return FrequencyProfile(state.counts), trace, status


# -- simultaneous dynamics -----------------------------------------------------


def run_simultaneous(
    spec: GameSpec,
    init: FrequencyProfile,
    config: DynamicsConfig,
    ranking=None,
    trace_detail: str = "full",
) -> tuple[FrequencyProfile, Trace, TerminationStatus]:
    """All players best-respond at once to the previous round's profile.

    Converges only at exact fixed points of the joint update; any revisit of
    an earlier integer profile is reported as a cycle (start, period).
    """
    if config.mode != SIMULTANEOUS:
        raise ValueError("config.mode must be 'simultaneous'")
    check_feasible(spec, init)

    potential_of = None
    if ranking is not None:
        from .analysis import potential_value

        potential_of = lambda p: potential_value(spec, ranking, p)  # noqa: E731

    trace = Trace()

    def record(t: int, profile: FrequencyProfile) -> None:
        snapshot = profile if t < FULL_PROFILE_ROUNDS else None
        trace.tail_profiles.append((t, profile))
        trace.records.append(
            RoundRecord(
                t=t,
                mover=None if t == 0 else "all",
                profile=snapshot if trace_detail == "full" else None,
                profile_hash=profile_hash(spec, profile),
                total_slack=_total_slack(spec, profile),
                welfare=(
                    social_welfare(spec, profile)
                    if trace_detail == "full"
                    else None
                ),
                potential=(
                    potential_of(profile) if potential_of is not None else None
                ),
                stable_players=_stable_set(spec, profile),
            )
        )

    profile = FrequencyProfile(init.counts)
    seen: dict[tuple, int] = {profile.key(spec): 0}
    record(0, profile)

    for t in range(1, config.max_rounds + 1):
        new_counts: dict[tuple[int, int], float] = {}
        for i in range(spec.n):
            br = best_response(spec, profile, i)
            for j, c in br.proposals.items():
                new_counts[(i, j)] = c
        new_profile = FrequencyProfile(new_counts)
        if new_profile == profile:
            return profile, trace, Converged(t - 1)
        key = new_profile.key(spec)
        record(t, new_profile)
        if key in seen:
            return (
                new_profile,
                trace,
                CycleDetected(start=seen[key], period=t - seen[key]),
            )
        seen[key] = t
        profile = new_profile

    return profile, trace, MaxRoundsExceeded(config.max_rounds)


def min_positive_utility_gain(spec: GameSpec, trace: Trace) -> float | None:
    """Smallest positive utility improvement any mover realized in a full
    trace (None if no move improved, or profiles were not recorded).

    Diagnostic counterpart of the per-move progress floor that bounds how
    long the stable-slack phase of a sequential run can last.
    """
    best: float | None = None
    recs = trace.records
    for t in range(1, len(recs)):
        mover = recs[t].mover
        if not isinstance(mover, int):
            continue
        if recs[t].profile is None or recs[t - 1].profile is None:
            continue
        gain = player_utility(spec, recs[t].profile, mover) - player_utility(
            spec, recs[t - 1].profile, mover
        )
        if gain > 0 and (best is None or gain < best):
            best = gain
    return best


def _total_slack(spec: GameSpec, profile: FrequencyProfile) -> float:
    total = 0
    for i in range(spec.n):
        r = 0
        for j in spec.neighbors[i]:
            cij = profile.counts[(i, j)]
            cji = profile.counts[(j, i)]
            r += cij if cij < cji else cji
        total += spec.budget_units(i) - r
    return total


def _stable_set(spec: GameSpec, profile: FrequencyProfile) -> frozenset[int]:
    out = []
    for i in range(spec.n):
        if all(
            profile.counts[(i, j)] >= profile.counts[(j, i)]
            for j in spec.neighbors[i]
        ):
            out.append(i)
    return frozenset(out)
