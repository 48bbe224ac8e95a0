"""Instance documents: generators, JSON serialization, profile I/O.

The on-disk schema keeps every amount as an integer count of the instance's
``eta`` quantum, so documents round-trip bit-exactly:

    {
      "n": 5, "eta": 0.05,
      "budgets": [20, ...],                  # eta counts
      "behaviors": ["optimistic", ...],
      "edges": [{"i": 0, "j": 1, "w_ij": 0.3, "w_ji": 0.2,
                 "utility_ij": {"family": "sqrt"},
                 "utility_ji": {"family": "sqrt"}}, ...],
      "ranking": [1, 2, ...],                # optional
      "suggested_init": [[i, j, count], ...] # optional
      "reference_profiles": {"name": [[i, j, count], ...]}  # optional
    }
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from .analysis import RankingSystem, global_ranking_weights
from .game import Behavior, FrequencyProfile, GameSpec
from .utility import UtilitySpec


@dataclass(frozen=True)
class EdgeSpec:
    i: int
    j: int
    w_ij: float
    w_ji: float
    utility_ij: UtilitySpec
    utility_ji: UtilitySpec


@dataclass(frozen=True)
class InstanceDocument:
    n: int
    eta: float
    budgets: tuple[int, ...]  # eta counts
    behaviors: tuple[str, ...]
    edges: tuple[EdgeSpec, ...]
    ranking: tuple[int, ...] | None = None
    suggested_init: tuple[tuple[int, int, int], ...] | None = None
    reference_profiles: dict[str, tuple[tuple[int, int, int], ...]] | None = (
        None
    )

    # -- conversions -------------------------------------------------------

    def to_game_spec(
        self, behavior_override: str | None = None
    ) -> GameSpec:
        """Materialize a GameSpec; ``behavior_override`` forces every player
        pessimistic or optimistic (used by paired experiments)."""
        weights = {}
        utilities = {}
        edge_pairs = []
        for e in self.edges:
            edge_pairs.append((e.i, e.j))
            weights[(e.i, e.j)] = e.w_ij
            weights[(e.j, e.i)] = e.w_ji
            utilities[(e.i, e.j)] = e.utility_ij
            utilities[(e.j, e.i)] = e.utility_ji
        names = (
            [behavior_override] * self.n
            if behavior_override is not None
            else list(self.behaviors)
        )
        behaviors = {i: Behavior(names[i]) for i in range(self.n)}
        budgets = {i: self.budgets[i] * self.eta for i in range(self.n)}
        return GameSpec.build(
            n=self.n,
            eta=self.eta,
            edges=edge_pairs,
            weights=weights,
            budgets=budgets,
            utilities=utilities,
            behaviors=behaviors,
        )

    def ranking_system(self) -> RankingSystem | None:
        if self.ranking is None:
            return None
        return RankingSystem({i: r for i, r in enumerate(self.ranking)})

    def init_profile(self) -> FrequencyProfile | None:
        if self.suggested_init is None:
            return None
        return FrequencyProfile(
            {(i, j): c for (i, j, c) in self.suggested_init}
        )

    def reference_profile(self, name: str) -> FrequencyProfile:
        if not self.reference_profiles or name not in self.reference_profiles:
            raise KeyError(f"no reference profile named {name!r}")
        return FrequencyProfile(
            {(i, j): c for (i, j, c) in self.reference_profiles[name]}
        )

    # -- serialization -----------------------------------------------------

    def to_json_dict(self) -> dict:
        doc: dict = {
            "n": self.n,
            "eta": self.eta,
            "budgets": list(self.budgets),
            "behaviors": list(self.behaviors),
            "edges": [
                {
                    "i": e.i,
                    "j": e.j,
                    "w_ij": e.w_ij,
                    "w_ji": e.w_ji,
                    "utility_ij": e.utility_ij.to_json(),
                    "utility_ji": e.utility_ji.to_json(),
                }
                for e in self.edges
            ],
        }
        if self.ranking is not None:
            doc["ranking"] = list(self.ranking)
        if self.suggested_init is not None:
            doc["suggested_init"] = [list(t) for t in self.suggested_init]
        if self.reference_profiles is not None:
            doc["reference_profiles"] = {
                name: [list(t) for t in prof]
                for name, prof in self.reference_profiles.items()
            }
        return doc

    @staticmethod
    def from_json_dict(doc: dict) -> "InstanceDocument":
        edges = tuple(
            EdgeSpec(
                i=e["i"],
                j=e["j"],
                w_ij=e["w_ij"],
                w_ji=e["w_ji"],
                utility_ij=UtilitySpec.from_json(e["utility_ij"]),
                utility_ji=UtilitySpec.from_json(e["utility_ji"]),
            )
            for e in doc["edges"]
        )
        refs = None
        if "reference_profiles" in doc:
            refs = {
                name: tuple(tuple(t) for t in prof)
                for name, prof in doc["reference_profiles"].items()
            }
        return InstanceDocument(
            n=doc["n"],
            eta=doc["eta"],
            budgets=tuple(doc["budgets"]),
            behaviors=tuple(doc["behaviors"]),
            edges=edges,
            ranking=tuple(doc["ranking"]) if "ranking" in doc else None,
            suggested_init=(
                tuple(tuple(t) for t in doc["suggested_init"])
                if "suggested_init" in doc
                else None
            ),
            reference_profiles=refs,
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_json_dict(), indent=2) + "\n", encoding="utf-8"
        )

    @staticmethod
    def load(path: str | Path) -> "InstanceDocument":
        return InstanceDocument.from_json_dict(
            json.loads(Path(path).read_text(encoding="utf-8"))
        )


# -- torus grid ----------------------------------------------------------------


def _torus_neighbors(width: int, height: int, node: int) -> list[int]:
    r, c = divmod(node, width)
    return sorted(
        {
            ((r - 1) % height) * width + c,
            ((r + 1) % height) * width + c,
            r * width + (c - 1) % width,
            r * width + (c + 1) % width,
        }
    )


def gen_torus_grid(
    width: int,
    height: int,
    beta: float,
    eta: float,
    weight_seed: int,
    utility: UtilitySpec,
    behavior: str = "pessimistic",
) -> InstanceDocument:
    """Wrap-around grid, so every node has degree exactly four.

    Per-direction weights are drawn uniform(0,1) and normalized per node;
    budgets and the utility family are uniform across players and edges.
    """
    if width < 3 or height < 3:
        raise ValueError("torus needs width and height >= 3")
    n = width * height
    budget_units = round(beta / eta)
    if abs(budget_units * eta - beta) > 1e-9 * max(1.0, beta):
        raise ValueError(f"beta {beta} is not a multiple of eta {eta}")

    rng = random.Random(weight_seed)
    weights: dict[tuple[int, int], float] = {}
    edge_set: set[tuple[int, int]] = set()
    for i in range(n):
        nbrs = _torus_neighbors(width, height, i)
        draws = [rng.random() for _ in nbrs]
        total = sum(draws)
        for j, d in zip(nbrs, draws):
            weights[(i, j)] = d / total
            edge_set.add((min(i, j), max(i, j)))

    edges = tuple(
        EdgeSpec(
            i=i,
            j=j,
            w_ij=weights[(i, j)],
            w_ji=weights[(j, i)],
            utility_ij=utility,
            utility_ji=utility,
        )
        for (i, j) in sorted(edge_set)
    )
    return InstanceDocument(
        n=n,
        eta=eta,
        budgets=(budget_units,) * n,
        behaviors=(behavior,) * n,
        edges=edges,
    )


# -- complete-graph cycling instance --------------------------------------------


def gen_k5_cycle_instance(eps: float) -> InstanceDocument:
    """Five players on a complete graph whose simultaneous dynamics cycle.

    Each player weights the next two players (cyclically) at 1/4 + eps and
    the other two at 1/4 - eps; budgets are 1, utilities x(1-x) capped at its
    peak, everyone optimistic, quantum eta = eps.  The suggested start makes
    every proposal equal to the proposer's own weight, which is each player's
    unconstrained optimum; from there the joint update keeps transposing the
    proposal matrix forever.
    """
    e = _as_exact(eps)
    if not (0 < e < Fraction(1, 4)):
        raise ValueError(f"eps must be in (0, 1/4), got {eps}")
    high = Fraction(1, 4) + e
    low = Fraction(1, 4) - e
    budget_units = Fraction(1) / e
    high_units = high / e
    low_units = low / e
    for name, v in (
        ("budget", budget_units),
        ("1/4+eps", high_units),
        ("1/4-eps", low_units),
    ):
        if v.denominator != 1:
            raise ValueError(
                f"eps={eps}: {name} is not a whole number of eps quanta"
            )

    n = 5
    util = UtilitySpec.capped_quadratic(1.0)

    def weight(i: int, j: int) -> Fraction:
        offset = (j - i) % n
        return high if offset in (1, 2) else low

    edge_specs = []
    for i in range(n):
        for j in range(i + 1, n):
            edge_specs.append(
                EdgeSpec(
                    i=i,
                    j=j,
                    w_ij=float(weight(i, j)),
                    w_ji=float(weight(j, i)),
                    utility_ij=util,
                    utility_ji=util,
                )
            )

    init = []
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            units = high_units if (j - i) % n in (1, 2) else low_units
            init.append((i, j, int(units)))

    return InstanceDocument(
        n=n,
        eta=float(e),
        budgets=(int(budget_units),) * n,
        behaviors=("optimistic",) * n,
        edges=tuple(edge_specs),
        suggested_init=tuple(init),
    )


# -- skewed grid with arbitrarily bad equilibria ---------------------------------


def gen_poa_grid_instance(
    width: int, height: int, eps, beta
) -> tuple[InstanceDocument, FrequencyProfile, FrequencyProfile]:
    """Torus where everyone prefers vertical neighbors (weight 1/2 - eps)
    over horizontal ones (weight eps), with utility x*(beta - x) capped.

    Returns the instance plus two matched reference profiles: ``good`` puts
    beta/2 - eps on vertical edges, ``bad`` reverses the roles.  Both are
    equilibria; their welfare ratio diverges as eps -> 0.
    """
    if width < 3 or height < 3:
        raise ValueError("grid needs width and height >= 3")
    e = _as_exact(eps)
    b = _as_exact(beta)
    if not (0 < e < min(Fraction(1, 2), b / 2)):
        raise ValueError(f"eps must be in (0, min(1/2, beta/2)), got {eps}")

    # exact quantum dividing eps, beta/2 - eps and beta
    quantum = _fraction_gcd(e, b / 2 - e)
    quantum = _fraction_gcd(quantum, b)
    n = width * height
    budget_units = int(b / quantum)
    high_units = int((b / 2 - e) / quantum)
    low_units = int(e / quantum)

    w_vert = float(Fraction(1, 2) - e)
    w_horiz = float(e)
    util = UtilitySpec.capped_quadratic(float(b))

    edge_set: set[tuple[int, int]] = set()
    weights: dict[tuple[int, int], float] = {}
    vertical: set[tuple[int, int]] = set()
    for node in range(n):
        r, c = divmod(node, width)
        for j in (
            ((r - 1) % height) * width + c,
            ((r + 1) % height) * width + c,
        ):
            weights[(node, j)] = w_vert
            vertical.add((min(node, j), max(node, j)))
            edge_set.add((min(node, j), max(node, j)))
        for j in (
            r * width + (c - 1) % width,
            r * width + (c + 1) % width,
        ):
            weights[(node, j)] = w_horiz
            edge_set.add((min(node, j), max(node, j)))

    edges = tuple(
        EdgeSpec(
            i=i,
            j=j,
            w_ij=weights[(i, j)],
            w_ji=weights[(j, i)],
            utility_ij=util,
            utility_ji=util,
        )
        for (i, j) in sorted(edge_set)
    )

    good_counts: dict[tuple[int, int], int] = {}
    bad_counts: dict[tuple[int, int], int] = {}
    for (i, j) in edge_set:
        units = (high_units, low_units) if (i, j) in vertical else (
            low_units,
            high_units,
        )
        good_counts[(i, j)] = units[0]
        good_counts[(j, i)] = units[0]
        bad_counts[(i, j)] = units[1]
        bad_counts[(j, i)] = units[1]

    doc = InstanceDocument(
        n=n,
        eta=float(quantum),
        budgets=(budget_units,) * n,
        behaviors=("pessimistic",) * n,
        edges=edges,
        reference_profiles={
            "good": tuple(
                (i, j, c) for (i, j), c in sorted(good_counts.items())
            ),
            "bad": tuple(
                (i, j, c) for (i, j), c in sorted(bad_counts.items())
            ),
        },
    )
    return doc, FrequencyProfile(good_counts), FrequencyProfile(bad_counts)


# -- random instances ------------------------------------------------------------


_FAMILY_POOL = ("linear", "sqrt", "log1p", "power", "capped_quadratic")


def _random_utility(rng: random.Random, beta: float, family: str | None) -> UtilitySpec:
    fam = family if family is not None else rng.choice(_FAMILY_POOL)
    if fam == "power":
        return UtilitySpec.power(round(rng.uniform(0.2, 1.0), 3))
    if fam == "capped_quadratic":
        return UtilitySpec.capped_quadratic(round(rng.uniform(0.5, 1.5) * beta, 3))
    return UtilitySpec(fam)


def gen_random_instance(
    n: int,
    edge_prob: float,
    seed: int,
    beta: float = 1.0,
    budget_units: int = 100,
    behavior: str | None = None,
    family: str | None = None,
    symmetric_utilities: bool = False,
) -> InstanceDocument:
    """Erdos-Renyi style test instance with random weights and utilities.

    ``behavior``/``family`` None means random per player / per direction;
    ``symmetric_utilities`` forces one utility per edge (both directions).
    """
    rng = random.Random(seed)
    eta = beta / budget_units
    edge_list = [
        (i, j)
        for i in range(n)
        for j in range(i + 1, n)
        if rng.random() < edge_prob
    ]
    adj: dict[int, list[int]] = {i: [] for i in range(n)}
    for (i, j) in edge_list:
        adj[i].append(j)
        adj[j].append(i)

    weights: dict[tuple[int, int], float] = {}
    for i in range(n):
        if not adj[i]:
            continue
        draws = [rng.uniform(0.05, 1.0) for _ in adj[i]]
        total = sum(draws)
        for j, d in zip(sorted(adj[i]), draws):
            weights[(i, j)] = d / total

    edges = []
    for (i, j) in sorted(edge_list):
        u_ij = _random_utility(rng, beta, family)
        u_ji = u_ij if symmetric_utilities else _random_utility(rng, beta, family)
        edges.append(
            EdgeSpec(
                i=i,
                j=j,
                w_ij=weights[(i, j)],
                w_ji=weights[(j, i)],
                utility_ij=u_ij,
                utility_ji=u_ji,
            )
        )

    if behavior is None:
        behaviors = tuple(
            rng.choice(("pessimistic", "optimistic")) for _ in range(n)
        )
    else:
        behaviors = (behavior,) * n
    return InstanceDocument(
        n=n,
        eta=eta,
        budgets=(budget_units,) * n,
        behaviors=behaviors,
        edges=tuple(edges),
    )


def gen_ranked_instance(
    n: int,
    edge_prob: float,
    seed: int,
    max_rank: int = 5,
    beta: float = 1.0,
    budget_units: int = 100,
    behavior: str | None = None,
) -> InstanceDocument:
    """Random instance whose weights come from a random integer ranking and
    whose edge utilities are symmetric, so the weighted potential applies."""
    rng = random.Random(seed)
    base = gen_random_instance(
        n,
        edge_prob,
        seed=rng.randrange(2**30),
        beta=beta,
        budget_units=budget_units,
        behavior=behavior,
        symmetric_utilities=True,
    )
    ranks = tuple(rng.randint(1, max_rank) for _ in range(n))
    ranking = RankingSystem({i: r for i, r in enumerate(ranks)})
    neighbors: dict[int, list[int]] = {i: [] for i in range(n)}
    for e in base.edges:
        neighbors[e.i].append(e.j)
        neighbors[e.j].append(e.i)
    rank_weights = global_ranking_weights(neighbors, ranking)
    edges = tuple(
        EdgeSpec(
            i=e.i,
            j=e.j,
            w_ij=float(rank_weights[(e.i, e.j)]),
            w_ji=float(rank_weights[(e.j, e.i)]),
            utility_ij=e.utility_ij,
            utility_ji=e.utility_ji,
        )
        for e in base.edges
    )
    return InstanceDocument(
        n=n,
        eta=base.eta,
        budgets=base.budgets,
        behaviors=base.behaviors,
        edges=edges,
        ranking=ranks,
    )


# -- helpers ----------------------------------------------------------------------


def _as_exact(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        return Fraction(str(x))
    return Fraction(x)


def _fraction_gcd(a: Fraction, b: Fraction) -> Fraction:
    import math as _math

    den = a.denominator * b.denominator // _math.gcd(
        a.denominator, b.denominator
    )
    na = a.numerator * (den // a.denominator)
    nb = b.numerator * (den // b.denominator)
    return Fraction(_math.gcd(na, nb), den)
