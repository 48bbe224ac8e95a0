"""Per-link utility functions: non-negative, increasing, concave on [0, inf).

Every family exposes three views used by the allocation solvers:

* ``value(x)``      -- utility of interacting at level x
* ``marginal(x)``   -- right-derivative u'(x) (may be +inf at x=0)
* ``inverse_marginal(m)`` -- smallest x >= 0 with u'(x) <= m, or +inf if the
  marginal never falls to m (e.g. a linear utility asked for m < slope)

The capped quadratic x*(cap - x) is extended as the constant cap^2/4 past its
peak at cap/2 so it stays (weakly) increasing on all of [0, inf); the flat
region never attracts allocation because its marginal is zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

INF = float("inf")

LINEAR = "linear"
SQRT = "sqrt"
LOG1P = "log1p"
POWER = "power"
CAPPED_QUADRATIC = "capped_quadratic"

FAMILIES = (LINEAR, SQRT, LOG1P, POWER, CAPPED_QUADRATIC)


@dataclass(frozen=True)
class UtilitySpec:
    """One utility function drawn from the admissible concave families.

    ``a`` is the exponent for the power family (0 < a <= 1); ``cap`` is the
    satiation parameter of the capped quadratic (peak value cap^2/4 reached
    at x = cap/2).
    """

    family: str
    a: float | None = None
    cap: float | None = None

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise ValueError(f"unknown utility family: {self.family!r}")
        if self.family == POWER:
            if self.a is None or not (0.0 < self.a <= 1.0):
                raise ValueError("power utility needs exponent a in (0, 1]")
        elif self.a is not None:
            raise ValueError(f"{self.family} takes no exponent")
        if self.family == CAPPED_QUADRATIC:
            if self.cap is None or self.cap <= 0.0:
                raise ValueError("capped quadratic needs cap > 0")
        elif self.cap is not None:
            raise ValueError(f"{self.family} takes no cap")

    # -- constructors ------------------------------------------------------

    @staticmethod
    def linear() -> "UtilitySpec":
        return UtilitySpec(LINEAR)

    @staticmethod
    def sqrt() -> "UtilitySpec":
        return UtilitySpec(SQRT)

    @staticmethod
    def log1p() -> "UtilitySpec":
        return UtilitySpec(LOG1P)

    @staticmethod
    def power(a: float) -> "UtilitySpec":
        return UtilitySpec(POWER, a=a)

    @staticmethod
    def capped_quadratic(cap: float) -> "UtilitySpec":
        return UtilitySpec(CAPPED_QUADRATIC, cap=cap)

    # -- evaluation --------------------------------------------------------

    def value(self, x: float) -> float:
        if x < 0.0:
            raise ValueError(f"utility argument must be >= 0, got {x}")
        fam = self.family
        if fam == LINEAR:
            return x
        if fam == SQRT:
            return math.sqrt(x)
        if fam == LOG1P:
            return math.log1p(x)
        if fam == POWER:
            return x ** self.a
        half = self.cap / 2.0
        if x >= half:
            return half * half
        return x * (self.cap - x)

    def marginal(self, x: float) -> float:
        """Right-derivative at x; +inf where the slope blows up at zero."""
        if x < 0.0:
            raise ValueError(f"utility argument must be >= 0, got {x}")
        fam = self.family
        if fam == LINEAR:
            return 1.0
        if fam == SQRT:
            return 0.5 / math.sqrt(x) if x > 0.0 else INF
        if fam == LOG1P:
            return 1.0 / (1.0 + x)
        if fam == POWER:
            if self.a == 1.0:
                return 1.0
            return self.a * x ** (self.a - 1.0) if x > 0.0 else INF
        return max(0.0, self.cap - 2.0 * x)

    def inverse_marginal(self, m: float) -> float:
        """Smallest x >= 0 with marginal(x) <= m (+inf if unreachable)."""
        if m < 0.0:
            raise ValueError(f"marginal level must be >= 0, got {m}")
        fam = self.family
        if fam == LINEAR:
            return 0.0 if m >= 1.0 else INF
        if fam == SQRT:
            if m == 0.0:
                return INF
            if m == INF:
                return 0.0
            return 0.25 / (m * m)
        if fam == LOG1P:
            if m == 0.0:
                return INF
            return max(0.0, 1.0 / m - 1.0)
        if fam == POWER:
            if self.a == 1.0:
                return 0.0 if m >= 1.0 else INF
            if m == 0.0:
                return INF
            if m >= INF:
                return 0.0
            # solve a * x^(a-1) = m  (decreasing in x); guard the overflow
            # when a is close to 1 and the answer is astronomically large
            log_x = math.log(m / self.a) / (self.a - 1.0)
            if log_x > 700.0:
                return INF
            return math.exp(log_x)
        # capped quadratic: marginal cap - 2x, clamped at 0 past cap/2
        if m >= self.cap:
            return 0.0
        return (self.cap - m) / 2.0

    # -- serialization -----------------------------------------------------

    def to_json(self) -> dict:
        out: dict = {"family": self.family}
        if self.a is not None:
            out["a"] = self.a
        if self.cap is not None:
            out["cap"] = self.cap
        return out

    @staticmethod
    def from_json(data: dict) -> "UtilitySpec":
        return UtilitySpec(
            family=data["family"], a=data.get("a"), cap=data.get("cap")
        )
