"""Finite discrete distributions over a factoid universe.

The universe is the index set {0, 1, ..., size-1}; index 0 is the
distinguished "empty fact" (bottom) everywhere in this package. A
distribution stores explicit weights for a sparse set of atoms plus a
single background weight shared by every other atom. The background
makes huge near-uniform distributions (for example "1/|Y| everywhere" on
ten million atoms) exact and O(sparse) to operate on, which the Monte
Carlo harness relies on.

Weights are normalized on construction; zero-sum, negative, or
out-of-range input is rejected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping

import numpy as np

from .errors import DistributionError, UniverseMismatchError
from .rng import SeededRng

__all__ = [
    "BOTTOM",
    "FactoidUniverse",
    "FactoidDist",
    "dist_from_weights",
    "uniform_dist",
    "point_mass_dist",
    "background_dist",
    "mass_of_set",
    "mass_of_complement",
    "tv_distance",
    "tv_distance_forms",
    "kl_divergence",
    "sample_iid",
    "paired_profile",
    "random_dist",
]

#: Index of the empty fact. Fixed package-wide so nothing needs to thread
#: a per-universe bottom id around.
BOTTOM = 0

#: Constructors accept totals this far from 1 and renormalize silently;
#: Monte Carlo pipelines accumulate rounding and should not be rejected.
NORMALIZATION_ATOL = 1e-9

#: Universes larger than this refuse to materialize per-atom structures
#: (dense weight maps, explicit partition blocks).
MATERIALIZE_LIMIT = 1_000_000


@dataclass(frozen=True)
class FactoidUniverse:
    """The index set of factoids, bottom included.

    size counts every factoid, bottom among them, so the number of
    "real" candidate facts and hallucinations is size - 1.
    """

    size: int

    def __post_init__(self):
        if self.size < 2:
            raise DistributionError(f"universe size must be >= 2, got {self.size}")

    @property
    def bottom_id(self) -> int:
        return BOTTOM

    def indices(self) -> range:
        return range(self.size)

    def check_index(self, y: int) -> None:
        if not 0 <= y < self.size:
            raise DistributionError(f"factoid index {y} outside universe of size {self.size}")


def _check_same_universe(a: "FactoidDist", b: "FactoidDist") -> None:
    if a.universe != b.universe:
        raise UniverseMismatchError(
            f"universe mismatch: size {a.universe.size} vs {b.universe.size}"
        )


@dataclass(frozen=True, eq=False)
class FactoidDist:
    """Probability distribution over one universe.

    special maps atom index to weight; every atom not in special carries
    the background weight. Instances are immutable after construction
    and safe to share across threads. Use the module constructors below
    rather than calling this class directly.
    """

    universe: FactoidUniverse
    special: dict[int, float] = field(repr=False)
    background: float = 0.0

    def __post_init__(self):
        if self.background < 0.0:
            raise DistributionError(f"negative background weight {self.background}")
        for y, w in self.special.items():
            self.universe.check_index(y)
            if w < 0.0 or math.isnan(w):
                raise DistributionError(f"negative weight {w} at index {y}")

    # -- access ---------------------------------------------------------

    def weight(self, y: int) -> float:
        return self.special.get(y, self.background)

    @property
    def weights(self) -> dict[int, float]:
        """Dense atom -> weight map (sparse form: zero atoms omitted).

        Materializes every positive atom, so it is guarded against huge
        universes; use weight() or mass_of_set() there instead.
        """
        if self.background == 0.0:
            return {y: w for y, w in sorted(self.special.items()) if w > 0.0}
        if self.universe.size > MATERIALIZE_LIMIT:
            raise DistributionError(
                f"refusing to materialize weights for universe of size {self.universe.size}"
            )
        return {y: w for y in self.universe.indices() if (w := self.weight(y)) > 0.0}

    def support_size(self) -> int:
        n_special_pos = sum(1 for w in self.special.values() if w > 0.0)
        if self.background > 0.0:
            return n_special_pos + (self.universe.size - len(self.special))
        return n_special_pos

    def support(self) -> Iterator[int]:
        """Iterate positive-weight atoms (guarded like .weights)."""
        if self.background == 0.0:
            yield from (y for y, w in sorted(self.special.items()) if w > 0.0)
            return
        if self.universe.size > MATERIALIZE_LIMIT:
            raise DistributionError(
                f"refusing to iterate support over universe of size {self.universe.size}"
            )
        for y in self.universe.indices():
            if self.weight(y) > 0.0:
                yield y

    def total_mass(self) -> float:
        rest = self.universe.size - len(self.special)
        return math.fsum(self.special.values()) + self.background * rest


def _normalized(universe: FactoidUniverse, special: dict[int, float], background: float) -> FactoidDist:
    rest = universe.size - len(special)
    total = math.fsum(special.values()) + background * rest
    if total <= 0.0:
        raise DistributionError("weights sum to zero; at least one must be positive")
    if not math.isfinite(total):
        raise DistributionError("weights sum is not finite")
    special = {y: w / total for y, w in special.items()}
    background = background / total
    if background == 0.0:
        special = {y: w for y, w in special.items() if w > 0.0}
    return FactoidDist(universe=universe, special=special, background=background)


def dist_from_weights(universe: FactoidUniverse, weights: Mapping[int, float]) -> FactoidDist:
    """Build a sparse distribution from non-negative weights; normalizes.

    Rejects all-zero input, any negative weight, and out-of-range
    indices. Atoms absent from the map have probability zero.
    """
    special = {int(y): float(w) for y, w in weights.items()}
    for y, w in special.items():
        universe.check_index(y)
        if w < 0.0 or math.isnan(w):
            raise DistributionError(f"negative weight {w} at index {y}")
    return _normalized(universe, special, 0.0)


def background_dist(
    universe: FactoidUniverse, special: Mapping[int, float], background: float
) -> FactoidDist:
    """Distribution with explicit weights on some atoms and a shared
    background weight on all others; normalizes like dist_from_weights."""
    sp = {int(y): float(w) for y, w in special.items()}
    for y, w in sp.items():
        universe.check_index(y)
        if w < 0.0 or math.isnan(w):
            raise DistributionError(f"negative weight {w} at index {y}")
    if background < 0.0:
        raise DistributionError(f"negative background weight {background}")
    return _normalized(universe, sp, float(background))


def uniform_dist(universe: FactoidUniverse) -> FactoidDist:
    return FactoidDist(universe=universe, special={}, background=1.0 / universe.size)


def point_mass_dist(universe: FactoidUniverse, y: int) -> FactoidDist:
    universe.check_index(y)
    return FactoidDist(universe=universe, special={int(y): 1.0}, background=0.0)


# -- set mass -------------------------------------------------------------


def mass_of_set(d: FactoidDist, s: Iterable[int]) -> float:
    """Total probability of the atoms in s. Empty set has mass 0."""
    atoms = set(s)
    for y in atoms:
        d.universe.check_index(y)
    if d.background == 0.0:
        return math.fsum(d.special.get(y, 0.0) for y in atoms)
    n_plain = sum(1 for y in atoms if y not in d.special)
    return math.fsum(d.special[y] for y in atoms if y in d.special) + d.background * n_plain


def mass_of_complement(d: FactoidDist, s: Iterable[int]) -> float:
    """Probability of everything outside s, computed without enumerating
    the complement (exact up to the normalization of d)."""
    return max(0.0, 1.0 - mass_of_set(d, s))


# -- paired atom classes --------------------------------------------------


def paired_profile(d1: FactoidDist, d2: FactoidDist) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Collapse two distributions into atom classes (w1, w2, count).

    Atoms that are background in both carry identical weight pairs and
    are merged into one class, so the profile size is O(#special atoms)
    even on huge universes. Every pairwise metric in this package is a
    function of this profile.
    """
    _check_same_universe(d1, d2)
    keys = sorted(set(d1.special) | set(d2.special))
    w1 = np.fromiter((d1.weight(y) for y in keys), dtype=np.float64, count=len(keys))
    w2 = np.fromiter((d2.weight(y) for y in keys), dtype=np.float64, count=len(keys))
    counts = np.ones(len(keys), dtype=np.float64)
    rest = d1.universe.size - len(keys)
    if rest > 0:
        w1 = np.append(w1, d1.background)
        w2 = np.append(w2, d2.background)
        counts = np.append(counts, float(rest))
    return w1, w2, counts


# -- metrics ---------------------------------------------------------------


def tv_distance(d1: FactoidDist, d2: FactoidDist) -> float:
    """Total variation distance, computed as half the L1 difference."""
    w1, w2, counts = paired_profile(d1, d2)
    return 0.5 * float(np.sum(counts * np.abs(w1 - w2)))


def tv_distance_forms(
    d1: FactoidDist, d2: FactoidDist, exhaustive_limit: int = 12
) -> tuple[float, float, float]:
    """The three equivalent total-variation formulas, for cross-checking.

    Returns (half_l1, positive_part_sum, subset_max). The subset maximum
    is found by exhaustive enumeration of all 2^|Y| subsets when the
    universe is small enough, otherwise by taking the witness set where
    d1 exceeds d2 (which attains the maximum).
    """
    _check_same_universe(d1, d2)
    w1, w2, counts = paired_profile(d1, d2)
    half_l1 = 0.5 * float(np.sum(counts * np.abs(w1 - w2)))
    pos_part = float(np.sum(counts * np.clip(w1 - w2, 0.0, None)))
    size = d1.universe.size
    if size <= exhaustive_limit:
        v1 = np.fromiter((d1.weight(y) for y in range(size)), dtype=np.float64, count=size)
        v2 = np.fromiter((d2.weight(y) for y in range(size)), dtype=np.float64, count=size)
        subset_max = 0.0
        for mask in range(1, 1 << size):
            members = [y for y in range(size) if mask >> y & 1]
            gap = abs(float(v1[members].sum() - v2[members].sum()))
            if gap > subset_max:
                subset_max = gap
    else:
        subset_max = pos_part
    return half_l1, pos_part, subset_max


def kl_divergence(d_true: FactoidDist, d_model: FactoidDist) -> float:
    """KL(d_true || d_model) in nats; +inf when the model misses support."""
    w1, w2, counts = paired_profile(d_true, d_model)
    pos = w1 > 0.0
    if np.any(pos & (w2 <= 0.0)):
        return math.inf
    w1p, w2p, cp = w1[pos], w2[pos], counts[pos]
    return float(np.sum(cp * w1p * np.log(w1p / w2p)))


# -- sampling --------------------------------------------------------------


def random_dist(
    universe: FactoidUniverse, rng: SeededRng, support_size: int | None = None
) -> FactoidDist:
    """Random sparse distribution: a uniform random support of the given
    size (random size if omitted) with i.i.d. uniform weights, normalized.
    Handy for randomized property sweeps."""
    gen = rng.generator
    if support_size is None:
        support_size = int(gen.integers(1, universe.size + 1))
    if not 1 <= support_size <= universe.size:
        raise DistributionError(f"support size {support_size} out of range")
    atoms = gen.choice(universe.size, size=support_size, replace=False)
    raw = gen.random(support_size) + 1e-9
    return dist_from_weights(universe, {int(y): float(w) for y, w in zip(atoms, raw)})


def sample_iid(d: FactoidDist, n: int, rng: SeededRng) -> np.ndarray:
    """n independent draws from d, as an int64 array.

    Deterministic given the rng seed. Background mass is drawn by
    inverting into a virtual bucket and then rejection-sampling a
    uniform non-special atom, which is exact.
    """
    if n < 1:
        raise DistributionError(f"sample size must be >= 1, got {n}")
    gen = rng.generator
    keys = sorted(y for y, w in d.special.items() if w > 0.0)
    w = np.fromiter((d.special[y] for y in keys), dtype=np.float64, count=len(keys))
    rest = d.universe.size - len(d.special)
    bg_total = d.background * rest
    probs = np.append(w, bg_total) if bg_total > 0.0 else w
    if probs.size == 0:
        raise DistributionError("distribution has no positive mass")
    cum = np.cumsum(probs)
    cum[-1] = max(cum[-1], 1.0)
    slots = np.searchsorted(cum, gen.random(n), side="right")
    key_arr = np.asarray(keys + [-1], dtype=np.int64)
    out = key_arr[slots]
    if bg_total > 0.0:
        # Background draws pick a uniform atom outside the special set;
        # zero-weight special atoms must stay unreachable too.
        special_set = set(d.special)
        background_positions = np.flatnonzero(out == -1)
        for pos in background_positions.tolist():
            cand = int(gen.integers(0, d.universe.size))
            while cand in special_set:
                cand = int(gen.integers(0, d.universe.size))
            out[pos] = cand
    return out
