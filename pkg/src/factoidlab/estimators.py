"""Training samples, the monofact estimator, and missing-mass bounds.

The monofact estimate is the fraction of training draws whose (non-empty)
factoid appears exactly once in the sample. It is the Good-Turing
estimate of the missing mass, i.e. of the probability that a fresh draw
was never seen in training. The radius functions give the concentration
widths under which |estimate - missing mass| falls with probability
1 - delta; the harness validates both empirically.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable

from .dist import BOTTOM, MATERIALIZE_LIMIT, FactoidDist, FactoidUniverse
from .errors import DistributionError, InsufficientDataError, UniverseMismatchError

__all__ = [
    "TrainingSample",
    "monofact_estimate",
    "good_turing_estimate",
    "missing_mass",
    "good_turing_radius",
    "good_turing_radius_unsimplified",
    "missing_mass_lower_radius",
    "missing_mass_lower_radius_unsimplified",
]


@dataclass(frozen=True)
class TrainingSample:
    """An i.i.d. draw sequence plus its observed/unobserved split.

    The empty fact (index 0) counts as observed whether or not it was
    drawn. The unobserved set is exposed lazily; on huge universes use
    unobserved_count and set-free mass computations instead.
    """

    universe: FactoidUniverse
    draws: tuple[int, ...]

    def __post_init__(self):
        for y in self.draws:
            self.universe.check_index(y)

    @property
    def n(self) -> int:
        return len(self.draws)

    @cached_property
    def multiplicities(self) -> Counter:
        return Counter(self.draws)

    @cached_property
    def observed(self) -> frozenset[int]:
        return frozenset(self.draws) | {BOTTOM}

    @property
    def observed_count(self) -> int:
        return len(self.observed)

    @property
    def unobserved_count(self) -> int:
        return self.universe.size - len(self.observed)

    @cached_property
    def unobserved(self) -> frozenset[int]:
        if self.universe.size > MATERIALIZE_LIMIT:
            raise DistributionError(
                f"refusing to materialize unobserved set over universe of size {self.universe.size}"
            )
        return frozenset(self.universe.indices()) - self.observed


def from_draws(universe: FactoidUniverse, draws: Iterable[int]) -> TrainingSample:
    return TrainingSample(universe, tuple(int(y) for y in draws))


def monofact_estimate(s: TrainingSample) -> float:
    """Fraction of draws whose non-empty factoid occurs exactly once."""
    if s.n == 0:
        raise InsufficientDataError("monofact estimate needs at least one draw")
    singles = sum(1 for y, c in s.multiplicities.items() if c == 1 and y != BOTTOM)
    return singles / s.n


def good_turing_estimate(s: TrainingSample) -> float:
    """Fraction of draws that are unique in the sample, the empty fact
    included. Differs from the monofact estimate by at most 1/n."""
    if s.n == 0:
        raise InsufficientDataError("Good-Turing estimate needs at least one draw")
    singles = sum(1 for c in s.multiplicities.values() if c == 1)
    return singles / s.n


def missing_mass(p: FactoidDist, s: TrainingSample) -> float:
    """Probability mass of factoids never observed in the sample.

    Computed by summing p over its own support outside the observed set,
    so no huge complement set is ever built.
    """
    if p.universe != s.universe:
        raise UniverseMismatchError(
            f"universe mismatch: {p.universe.size} vs {s.universe.size}"
        )
    observed = s.observed
    special_out = math.fsum(w for y, w in p.special.items() if y not in observed)
    if p.background == 0.0:
        return special_out
    n_obs_plain = sum(1 for y in observed if y not in p.special)
    n_plain_out = (p.universe.size - len(p.special)) - n_obs_plain
    return special_out + p.background * n_plain_out


def _check_delta(delta: float, upper: float) -> None:
    if not 0.0 < delta <= upper:
        raise DistributionError(f"delta must be in (0, {upper}], got {delta}")


def good_turing_radius(delta: float, n: int) -> float:
    """Two-sided width: |estimate - missing mass| <= 3*sqrt(ln(4/delta)/n)
    with probability at least 1 - delta."""
    _check_delta(delta, 1.0)
    if n < 1:
        raise InsufficientDataError(f"n must be >= 1, got {n}")
    return 3.0 * math.sqrt(math.log(4.0 / delta) / n)


def good_turing_radius_unsimplified(delta: float, n: int) -> float:
    """Sharper two-sided width 1/n + 2.42*sqrt(ln(4/delta)/n); the
    simplified 3*sqrt form above dominates it for n > 4.29."""
    _check_delta(delta, 1.0)
    if n < 1:
        raise InsufficientDataError(f"n must be >= 1, got {n}")
    return 1.0 / n + 2.42 * math.sqrt(math.log(4.0 / delta) / n)


def missing_mass_lower_radius(delta: float, n: int) -> float:
    """One-sided width: missing mass >= estimate - sqrt(6*ln(2/delta)/n)
    with probability at least 1 - delta, for delta <= 1/3.

    Bound evaluators pass delta/3 here, which turns the log term into
    ln(6/original delta).
    """
    _check_delta(delta, 1.0 / 3.0)
    if n < 1:
        raise InsufficientDataError(f"n must be >= 1, got {n}")
    return math.sqrt(6.0 * math.log(2.0 / delta) / n)


def missing_mass_lower_radius_unsimplified(delta: float, n: int) -> float:
    """Sharper one-sided width 1/n + 2.14*sqrt(ln(2/delta)/n)."""
    _check_delta(delta, 1.0)
    if n < 1:
        raise InsufficientDataError(f"n must be >= 1, got {n}")
    return 1.0 / n + 2.14 * math.sqrt(math.log(2.0 / delta) / n)
