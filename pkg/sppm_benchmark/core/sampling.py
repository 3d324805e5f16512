"""
Arbitrary sampling over subsets of the n component functions.

A sampler is a distribution over nonempty subsets C of {0, ..., n-1}. It
induces inclusion probabilities p_i = Prob(i in C) and the weights
1/(n p_i) that make sum_{i in C} f_i / (n p_i) an unbiased estimate of f.
"""

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.typing import ArrayLike

from ..exceptions import BadDistribution, SupportTooLarge
from ..models import SampledSubset, SamplingScheme
from .numerics import sample_categorical, validate_probabilities

logger = logging.getLogger(__name__)

SUPPORT_LIMIT = 1_000_000

Partition = Tuple[Tuple[int, ...], ...]


def _validate_partition(blocks: Sequence[Sequence[int]], n: int) -> Partition:
    partition = tuple(tuple(sorted(int(i) for i in block)) for block in blocks)
    if not partition:
        raise ValueError("Partition needs at least one block")
    if any(len(block) == 0 for block in partition):
        raise ValueError("Partition blocks must be nonempty")
    members = [i for block in partition for i in block]
    if len(members) != len(set(members)):
        raise ValueError("Partition blocks must be disjoint")
    if sorted(members) != list(range(n)):
        raise ValueError(f"Partition blocks must cover 0..{n - 1}")
    return partition


@dataclass(frozen=True)
class Sampler:
    """
    Immutable sampling scheme.

    Build instances with the classmethods full, uniform, singleton, nice,
    block and stratified rather than the constructor.

    Attributes:
        scheme: sampling scheme
        n: number of functions
        probs: singleton probabilities q_i (singleton only)
        tau: subset size (nice only)
        partition: disjoint blocks covering all indices (block and stratified)
        block_probs: probability of each block (block only)
    """

    scheme: SamplingScheme
    n: int
    probs: Optional[np.ndarray] = field(default=None, compare=False)
    tau: Optional[int] = None
    partition: Optional[Partition] = None
    block_probs: Optional[np.ndarray] = field(default=None, compare=False)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("Sampler needs n >= 1")

        if self.scheme == SamplingScheme.SINGLETON:
            probs = validate_probabilities(self.probs)
            if probs.shape != (self.n,):
                raise BadDistribution(f"Expected {self.n} probabilities, got {probs.size}")
            probs.flags.writeable = False
            object.__setattr__(self, "probs", probs)

        elif self.scheme == SamplingScheme.NICE:
            if self.tau is None or not 1 <= self.tau <= self.n:
                raise ValueError(f"tau must lie in [1, {self.n}], got {self.tau!r}")

        elif self.scheme in (SamplingScheme.BLOCK, SamplingScheme.STRATIFIED):
            object.__setattr__(self, "partition", _validate_partition(self.partition or (), self.n))
            if self.scheme == SamplingScheme.BLOCK:
                block_probs = validate_probabilities(self.block_probs)
                if block_probs.shape != (len(self.partition),):
                    raise BadDistribution("Need exactly one probability per block")
                block_probs.flags.writeable = False
                object.__setattr__(self, "block_probs", block_probs)

    @classmethod
    def full(cls, n: int) -> "Sampler":
        return cls(SamplingScheme.FULL, n)

    @classmethod
    def singleton(cls, probs: ArrayLike) -> "Sampler":
        probs = np.asarray(probs, dtype=float)
        return cls(SamplingScheme.SINGLETON, probs.size, probs=probs)

    @classmethod
    def uniform(cls, n: int) -> "Sampler":
        return cls.singleton(np.full(n, 1.0 / n))

    @classmethod
    def nice(cls, n: int, tau: int) -> "Sampler":
        return cls(SamplingScheme.NICE, n, tau=int(tau))

    @classmethod
    def block(cls, partition: Sequence[Sequence[int]], block_probs: ArrayLike) -> "Sampler":
        n = sum(len(b) for b in partition)
        return cls(SamplingScheme.BLOCK, n, partition=tuple(map(tuple, partition)),
                   block_probs=np.asarray(block_probs, dtype=float))

    @classmethod
    def stratified(cls, partition: Sequence[Sequence[int]]) -> "Sampler":
        n = sum(len(b) for b in partition)
        return cls(SamplingScheme.STRATIFIED, n, partition=tuple(map(tuple, partition)))

    @property
    def is_uniform_singleton(self) -> bool:
        return (self.scheme == SamplingScheme.SINGLETON
                and bool(np.all(self.probs == self.probs[0])))

    @property
    def proper(self) -> bool:
        """Every index has a positive inclusion probability"""
        return bool(np.all(self.inclusion_probs() > 0))

    def describe(self) -> str:
        if self.scheme == SamplingScheme.NICE:
            return f"nice[tau={self.tau}]"
        if self.scheme in (SamplingScheme.BLOCK, SamplingScheme.STRATIFIED):
            return f"{self.scheme.value}[blocks={len(self.partition)}]"
        if self.is_uniform_singleton:
            return "uniform"
        return self.scheme.value

    def inclusion_probs(self) -> np.ndarray:
        """p_i = Prob(i in C) for every index"""
        if self.scheme == SamplingScheme.FULL:
            return np.ones(self.n)
        if self.scheme == SamplingScheme.SINGLETON:
            return self.probs.copy()
        if self.scheme == SamplingScheme.NICE:
            return np.full(self.n, self.tau / self.n)

        p = np.empty(self.n)
        for j, block in enumerate(self.partition):
            if self.scheme == SamplingScheme.BLOCK:
                p[list(block)] = self.block_probs[j]
            else:
                p[list(block)] = 1.0 / len(block)
        return p

    def weights(self) -> np.ndarray:
        """1/(n p_i) per index, infinite where p_i = 0"""
        with np.errstate(divide="ignore"):
            return 1.0 / (self.n * self.inclusion_probs())

    def draw(self, rng: np.random.Generator) -> SampledSubset:
        """Draw one subset with its weights"""
        if self.scheme == SamplingScheme.FULL:
            indices = np.arange(self.n)
        elif self.scheme == SamplingScheme.SINGLETON:
            indices = np.array([sample_categorical(rng, self.probs)])
        elif self.scheme == SamplingScheme.NICE:
            indices = self._partial_shuffle(rng)
        elif self.scheme == SamplingScheme.BLOCK:
            indices = np.array(self.partition[sample_categorical(rng, self.block_probs)])
        else:
            indices = np.array([block[rng.integers(len(block))] for block in self.partition])
            indices.sort()

        return SampledSubset(indices=indices, weights=self.weights()[indices])

    def _partial_shuffle(self, rng: np.random.Generator) -> np.ndarray:
        # first tau steps of Fisher-Yates
        perm = np.arange(self.n)
        for j in range(self.tau):
            k = j + int(rng.integers(self.n - j))
            perm[j], perm[k] = perm[k], perm[j]
        return np.sort(perm[:self.tau])

    def support_size(self) -> int:
        if self.scheme == SamplingScheme.FULL:
            return 1
        if self.scheme == SamplingScheme.SINGLETON:
            return self.n
        if self.scheme == SamplingScheme.NICE:
            return math.comb(self.n, self.tau)
        if self.scheme == SamplingScheme.BLOCK:
            return len(self.partition)
        return math.prod(len(block) for block in self.partition)

    def enumerate_support(self) -> List[Tuple[np.ndarray, float]]:
        """
        Every subset the sampler can emit with its probability p_C.

        Nice subsets are listed in lexicographic order.

        Raises:
            SupportTooLarge: more than SUPPORT_LIMIT subsets
        """
        size = self.support_size()
        if size > SUPPORT_LIMIT:
            raise SupportTooLarge(
                f"{self.describe()} has {size} subsets, limit is {SUPPORT_LIMIT}")

        if self.scheme == SamplingScheme.FULL:
            return [(np.arange(self.n), 1.0)]
        if self.scheme == SamplingScheme.SINGLETON:
            return [(np.array([i]), float(q)) for i, q in enumerate(self.probs)]
        if self.scheme == SamplingScheme.NICE:
            p_C = 1.0 / size
            return [(np.array(C), p_C)
                    for C in itertools.combinations(range(self.n), self.tau)]
        if self.scheme == SamplingScheme.BLOCK:
            return [(np.array(block), float(q))
                    for block, q in zip(self.partition, self.block_probs)]

        p_C = 1.0 / size
        return [(np.array(sorted(C)), p_C) for C in itertools.product(*self.partition)]

    def mu_as(self, mu_each: ArrayLike) -> float:
        """
        min over the support of sum_{i in C} mu_i / (n p_i), in closed form.
        """
        mu_each = np.asarray(mu_each, dtype=float)
        if mu_each.shape != (self.n,):
            raise ValueError(f"Expected {self.n} strong convexity constants")

        if self.scheme == SamplingScheme.FULL:
            return float(np.mean(mu_each))
        if self.scheme == SamplingScheme.SINGLETON:
            positive = self.probs > 0
            return float(np.min(mu_each[positive] / (self.n * self.probs[positive])))
        if self.scheme == SamplingScheme.NICE:
            return float(np.sum(np.sort(mu_each)[:self.tau]) / self.tau)
        if self.scheme == SamplingScheme.BLOCK:
            return float(min(
                np.sum(mu_each[list(block)]) / (self.n * q)
                for block, q in zip(self.partition, self.block_probs) if q > 0
            ))
        return float(sum(
            len(block) / self.n * np.min(mu_each[list(block)]) for block in self.partition
        ))

    def draw_weight_matrix(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """
        size x n matrix; row s holds 1/(n p_i) on the members of draw s and 0 elsewhere.
        """
        weights = self.weights()
        W = np.zeros((size, self.n))
        rows = np.arange(size)

        if self.scheme == SamplingScheme.FULL:
            W[:] = weights
        elif self.scheme == SamplingScheme.SINGLETON:
            picks = self._categorical_many(rng, self.probs, size)
            W[rows, picks] = weights[picks]
        elif self.scheme == SamplingScheme.NICE:
            picks = np.argsort(rng.random((size, self.n)), axis=1)[:, :self.tau]
            W[rows[:, None], picks] = weights[picks]
        elif self.scheme == SamplingScheme.BLOCK:
            chosen = self._categorical_many(rng, self.block_probs, size)
            membership = np.zeros((len(self.partition), self.n))
            for j, block in enumerate(self.partition):
                membership[j, list(block)] = 1.0
            W = membership[chosen] * weights
        else:
            for block in self.partition:
                block = np.array(block)
                picks = block[rng.integers(len(block), size=size)]
                W[rows, picks] = weights[picks]
        return W

    @staticmethod
    def _categorical_many(rng: np.random.Generator, probs: np.ndarray, size: int) -> np.ndarray:
        cdf = np.cumsum(probs)
        picks = np.searchsorted(cdf, rng.random(size), side="right")
        return np.minimum(picks, np.flatnonzero(probs > 0)[-1])

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {"scheme": self.scheme.value}
        if self.scheme == SamplingScheme.FULL:
            data["n"] = self.n
        elif self.scheme == SamplingScheme.SINGLETON:
            data["probs"] = self.probs.tolist()
        elif self.scheme == SamplingScheme.NICE:
            data.update(n=self.n, tau=self.tau)
        else:
            data["blocks"] = [list(block) for block in self.partition]
            if self.scheme == SamplingScheme.BLOCK:
                data["block_probs"] = self.block_probs.tolist()
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any], n: Optional[int] = None) -> "Sampler":
        """
        Build a sampler from its config description, e.g. {"scheme": "nice", "tau": 9}.

        Args:
            data: description
            n: number of functions, used when the description omits it
        """
        scheme = SamplingScheme(data["scheme"])
        n = data.get("n", n)
        if scheme == SamplingScheme.FULL:
            return cls.full(n)
        if scheme == SamplingScheme.SINGLETON:
            if "probs" in data:
                return cls.singleton(data["probs"])
            return cls.uniform(n)
        if scheme == SamplingScheme.NICE:
            return cls.nice(n, data["tau"])
        if scheme == SamplingScheme.BLOCK:
            return cls.block(data["blocks"], data["block_probs"])
        return cls.stratified(data["blocks"])


def importance_probabilities(mu_each: ArrayLike) -> np.ndarray:
    """p_i proportional to mu_i"""
    mu_each = np.asarray(mu_each, dtype=float)
    if np.any(mu_each <= 0):
        raise BadDistribution("Importance sampling needs positive mu_i")
    probs = mu_each / mu_each.sum()
    # renormalize once more so the sum is 1 to rounding
    return probs / probs.sum()


def variance_probabilities(grad_norms: ArrayLike, floor: float = 0.0) -> np.ndarray:
    """
    p_i proportional to ||grad f_i(x*)||, mixed with uniform weight floor.

    Returns (1 - floor) * g / sum(g) + floor / n. A zero gradient norm with
    floor = 0 gives an improper sampler.
    """
    grad_norms = np.asarray(grad_norms, dtype=float)
    n = grad_norms.size
    if not 0 <= floor <= 1:
        raise ValueError("floor must lie in [0, 1]")
    total = grad_norms.sum()
    if total == 0:
        return np.full(n, 1.0 / n)
    probs = (1.0 - floor) * grad_norms / total + floor / n
    if floor > 0 and np.any(grad_norms == 0):
        logger.warning(f"Variance sampling: floored {int(np.sum(grad_norms == 0))} "
                       f"zero-gradient probabilities at {floor / n!r}")
    return probs / probs.sum()
