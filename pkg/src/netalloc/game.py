"""Game instances and the quantities derived from a proposal profile.

A game lives on an undirected graph.  Each player i has a resource budget
``beta_i`` and proposes an interaction level ``f[i, j]`` to every neighbor j,
subject to ``sum_j f[i, j] <= beta_i``.  A pair actually interacts at the
smaller of the two proposals ("agreed" level), each side weighting that
interaction with its own private weight ``w[i, j]`` and concave utility.

All proposals and budgets are kept as counts of a fixed quantum ``eta``:
integers for simulation state, which makes feasibility, win/lose comparisons
and cycle detection exact.  Analysis code is allowed to build profiles with
fractional counts (e.g. convex combinations); everything here accepts those
too and only the exactness guarantees weaken accordingly.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .utility import UtilitySpec

PlayerId = int
DirectedEdge = tuple[int, int]

WEIGHT_SUM_TOL = 1e-9
GRID_TOL = 1e-9
FEASIBILITY_TOL = 1e-9


class Behavior(enum.Enum):
    """How a player disposes of budget left over after matching neighbors."""

    PESSIMISTIC = "pessimistic"
    OPTIMISTIC = "optimistic"


class InfeasibleProfileError(ValueError):
    """A profile violates some player's budget (or references a non-edge)."""

    def __init__(self, player: PlayerId, message: str):
        super().__init__(message)
        self.player = player


def _normalize_edge(i: int, j: int) -> tuple[int, int]:
    return (i, j) if i <= j else (j, i)


@dataclass(frozen=True)
class GameSpec:
    """Immutable description of one game instance.

    ``weights`` / ``utilities`` are keyed by directed edge (both directions of
    every undirected edge); ``budgets`` are in resource units and must be
    integer multiples of ``eta``.  Construction never validates -- run
    :func:`validate_game` to collect violations.
    """

    n: int
    eta: float
    edges: frozenset[tuple[int, int]]
    weights: Mapping[DirectedEdge, float]
    budgets: Mapping[PlayerId, float]
    utilities: Mapping[DirectedEdge, UtilitySpec]
    behaviors: Mapping[PlayerId, Behavior]
    neighbors: dict[PlayerId, tuple[int, ...]] = field(
        init=False, repr=False, compare=False
    )
    directed_edges: tuple[DirectedEdge, ...] = field(
        init=False, repr=False, compare=False
    )
    directed_edge_set: frozenset[DirectedEdge] = field(
        init=False, repr=False, compare=False
    )

    def __post_init__(self) -> None:
        adj: dict[int, list[int]] = {i: [] for i in range(self.n)}
        for (i, j) in self.edges:
            if i == j or not (0 <= i < self.n and 0 <= j < self.n):
                continue  # flagged by validate_game, keep construction total
            adj[i].append(j)
            adj[j].append(i)
        object.__setattr__(
            self, "neighbors", {i: tuple(sorted(js)) for i, js in adj.items()}
        )
        directed = []
        for i in range(self.n):
            for j in self.neighbors[i]:
                directed.append((i, j))
        object.__setattr__(self, "directed_edges", tuple(directed))
        object.__setattr__(self, "directed_edge_set", frozenset(directed))

    @staticmethod
    def build(
        n: int,
        eta: float,
        edges: Iterable[tuple[int, int]],
        weights: Mapping[DirectedEdge, float],
        budgets: Mapping[PlayerId, float],
        utilities: Mapping[DirectedEdge, UtilitySpec],
        behaviors: Mapping[PlayerId, Behavior],
    ) -> "GameSpec":
        norm = frozenset(_normalize_edge(i, j) for (i, j) in edges)
        return GameSpec(
            n=n,
            eta=eta,
            edges=norm,
            weights=dict(weights),
            budgets=dict(budgets),
            utilities=dict(utilities),
            behaviors=dict(behaviors),
        )

    def budget_units(self, i: PlayerId) -> int:
        """Budget as an exact count of eta quanta (valid specs only)."""
        return round(self.budgets[i] / self.eta)

    def degree(self, i: PlayerId) -> int:
        return len(self.neighbors[i])


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    violations: tuple[str, ...]


def validate_game(spec: GameSpec) -> ValidationReport:
    """Collect every structural violation; violations are data, not errors."""
    bad: list[str] = []
    if spec.n < 0:
        bad.append(f"player count {spec.n} is negative")
    if not spec.eta > 0.0:
        bad.append(f"eta must be positive, got {spec.eta}")

    for (i, j) in sorted(spec.edges):
        if i == j:
            bad.append(f"self-loop edge ({i},{i}) is not allowed")
        if not (0 <= i < spec.n and 0 <= j < spec.n):
            bad.append(f"edge ({i},{j}) references unknown players")

    directed = set(spec.directed_edges)
    for e in sorted(directed):
        if e not in spec.weights:
            bad.append(f"missing weight for directed edge {e}")
        if e not in spec.utilities:
            bad.append(f"missing utility for directed edge {e}")
    for e in sorted(spec.weights):
        if e not in directed:
            bad.append(f"weight given for non-edge {e}")
        elif spec.weights[e] < 0.0:
            bad.append(f"weight of edge {e} is negative ({spec.weights[e]})")
    for e in sorted(spec.utilities):
        if e not in directed:
            bad.append(f"utility given for non-edge {e}")

    for i in range(spec.n):
        if i not in spec.budgets:
            bad.append(f"missing budget for player {i}")
            continue
        beta = spec.budgets[i]
        if beta < 0.0:
            bad.append(f"budget of player {i} is negative ({beta})")
        elif spec.eta > 0.0:
            units = beta / spec.eta
            if abs(units - round(units)) > GRID_TOL * max(1.0, abs(units)):
                bad.append(
                    f"budget of player {i} ({beta}) is not a multiple of eta"
                )
        if i not in spec.behaviors:
            bad.append(f"missing behavior for player {i}")

    for i in range(spec.n):
        if not spec.neighbors[i]:
            continue  # isolated players have no weight-sum constraint
        missing = [j for j in spec.neighbors[i] if (i, j) not in spec.weights]
        if missing:
            continue  # already reported above
        total = sum(spec.weights[(i, j)] for j in spec.neighbors[i])
        if abs(total - 1.0) > WEIGHT_SUM_TOL:
            bad.append(f"weights of player {i} sum to {total}")

    return ValidationReport(ok=not bad, violations=tuple(bad))


class FrequencyProfile:
    """Proposal levels per directed edge, counted in eta quanta.

    Simulation profiles hold ints; analysis may hold floats.  Instances are
    treated as immutable values -- mutate only through ``with_proposals``.
    """

    __slots__ = ("counts",)

    def __init__(self, counts: Mapping[DirectedEdge, float]):
        self.counts: dict[DirectedEdge, float] = dict(counts)

    @staticmethod
    def zeros(spec: GameSpec) -> "FrequencyProfile":
        return FrequencyProfile({e: 0 for e in spec.directed_edges})

    @staticmethod
    def _wrap(counts: dict) -> "FrequencyProfile":
        # internal: view over an existing dict, no copy (dynamics hot loop)
        p = FrequencyProfile.__new__(FrequencyProfile)
        p.counts = counts
        return p

    def __getitem__(self, edge: DirectedEdge) -> float:
        return self.counts[edge]

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, FrequencyProfile) and self.counts == other.counts
        )

    def __repr__(self) -> str:
        return f"FrequencyProfile({self.counts!r})"

    def is_integral(self) -> bool:
        return all(isinstance(c, int) for c in self.counts.values())

    def key(self, spec: GameSpec) -> tuple:
        """Canonical hashable snapshot (exact equality, no collisions)."""
        return tuple(self.counts[e] for e in spec.directed_edges)

    def out_total(self, spec: GameSpec, i: PlayerId) -> float:
        return sum(self.counts[(i, j)] for j in spec.neighbors[i])

    def with_proposals(
        self, i: PlayerId, proposals: Mapping[PlayerId, float]
    ) -> "FrequencyProfile":
        """Copy of the profile with player i's outgoing row replaced."""
        counts = dict(self.counts)
        for j, c in proposals.items():
            counts[(i, j)] = c
        return FrequencyProfile(counts)


def check_feasible(spec: GameSpec, profile: FrequencyProfile) -> None:
    """Raise InfeasibleProfileError naming the first offending player."""
    for e in profile.counts:
        if e not in spec.directed_edge_set:
            raise InfeasibleProfileError(e[0], f"proposal on non-edge {e}")
    for i in range(spec.n):
        total = 0.0
        for j in spec.neighbors[i]:
            c = profile.counts[(i, j)]
            if c < 0:
                raise InfeasibleProfileError(
                    i, f"negative proposal from {i} to {j}: {c}"
                )
            total += c
        limit = spec.budget_units(i)
        if total > limit + FEASIBILITY_TOL * max(1.0, limit):
            raise InfeasibleProfileError(
                i,
                f"player {i} proposes {total} units, budget is {limit} units",
            )


@dataclass(frozen=True)
class OutcomeSummary:
    """Realized interaction per edge plus the per-player leftovers.

    ``agreed`` maps each undirected edge to min(f_ij, f_ji); ``slack`` is the
    budget each player did not realize; ``win``/``lose`` split each player's
    neighborhood by whether the player's own proposal is the binding one.
    All amounts are in eta units.
    """

    agreed: dict[tuple[int, int], float]
    slack: dict[PlayerId, float]
    total_slack: float
    win: dict[PlayerId, frozenset[int]]
    lose: dict[PlayerId, frozenset[int]]


def outcome_summary(spec: GameSpec, profile: FrequencyProfile) -> OutcomeSummary:
    check_feasible(spec, profile)
    agreed: dict[tuple[int, int], float] = {}
    for (i, j) in sorted(spec.edges):
        agreed[(i, j)] = min(profile.counts[(i, j)], profile.counts[(j, i)])
    slack: dict[PlayerId, float] = {}
    win: dict[PlayerId, frozenset[int]] = {}
    lose: dict[PlayerId, frozenset[int]] = {}
    for i in range(spec.n):
        realized = 0
        w_set, l_set = [], []
        for j in spec.neighbors[i]:
            realized += agreed[_normalize_edge(i, j)]
            if profile.counts[(i, j)] < profile.counts[(j, i)]:
                w_set.append(j)
            else:
                l_set.append(j)
        slack[i] = spec.budget_units(i) - realized
        win[i] = frozenset(w_set)
        lose[i] = frozenset(l_set)
    return OutcomeSummary(
        agreed=agreed,
        slack=slack,
        total_slack=sum(slack.values()),
        win=win,
        lose=lose,
    )


def player_utility(
    spec: GameSpec, profile: FrequencyProfile, i: PlayerId
) -> float:
    """Weighted utility of player i's realized interactions (own weights).

    Leftover budget yields nothing; an isolated player scores 0.
    """
    eta = spec.eta
    total = 0.0
    for j in spec.neighbors[i]:
        agreed = min(profile.counts[(i, j)], profile.counts[(j, i)])
        total += spec.weights[(i, j)] * spec.utilities[(i, j)].value(
            agreed * eta
        )
    return total


def social_welfare(spec: GameSpec, profile: FrequencyProfile) -> float:
    return sum(player_utility(spec, profile, i) for i in range(spec.n))
