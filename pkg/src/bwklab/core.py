"""Shared domain types and numerically safe primitives.

Everything here is either an immutable value type or single-owner mutable
state, so episodes can run on parallel workers without shared mutation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

_MASK64 = (1 << 64) - 1


class TerminationReason(Enum):
    BUDGET_EXHAUSTED = "budget_exhausted"
    HORIZON_CAP = "horizon_cap"


@dataclass(frozen=True, slots=True)
class Outcome:
    """One pull's feedback: a reward in [0, 1] and a cost in [c_min, c_max]."""

    reward: float
    cost: float


@dataclass(frozen=True)
class InstanceParams:
    """Static description of a bandit instance: arm count, budget, cost bounds.

    ``cost_min`` is a known input to the algorithms (it appears inside their
    update rules), so it must genuinely lower-bound every cost the
    environment can emit.
    """

    n_arms: int
    budget: float
    cost_min: float
    cost_max: float = 1.0

    def __post_init__(self) -> None:
        if self.n_arms < 1:
            raise ValueError("n_arms must be at least 1")
        if not self.budget > 0:
            raise ValueError("budget must be positive")
        if not 0 < self.cost_min <= self.cost_max:
            raise ValueError("need 0 < cost_min <= cost_max")

    def horizon_cap(self) -> int:
        """Hard cap on rounds per episode.

        No feasible playout exceeds ceil(B / c_min) rounds; the +1 slack lets
        the cap fire only if an environment is buggy (e.g. returns cost 0).
        """
        return math.ceil(self.budget / self.cost_min) + 1


@dataclass(frozen=True, slots=True)
class RoundRecord:
    """One completed round: selection probabilities, outcome, budget left."""

    t: int
    arm: int
    probs: tuple[float, ...]
    outcome: Outcome
    budget_after: float


@dataclass(frozen=True)
class RunTrace:
    """Complete record of one episode, the unit of evaluation.

    ``aborted_pull`` holds a final pull whose cost exceeded the remaining
    budget: its outcome was observed but neither reward was collected nor
    cost paid, so ``total_cost <= budget`` holds with probability 1.
    """

    budget: float
    rounds: tuple[RoundRecord, ...]
    terminated_by: TerminationReason
    aborted_pull: tuple[int, Outcome] | None
    total_reward: float
    total_cost: float
    tau: int

    @classmethod
    def build(
        cls,
        budget: float,
        rounds: Sequence[RoundRecord],
        terminated_by: TerminationReason,
        aborted_pull: tuple[int, Outcome] | None = None,
    ) -> "RunTrace":
        rounds = tuple(rounds)
        return cls(
            budget=budget,
            rounds=rounds,
            terminated_by=terminated_by,
            aborted_pull=aborted_pull,
            total_reward=math.fsum(r.outcome.reward for r in rounds),
            total_cost=math.fsum(r.outcome.cost for r in rounds),
            tau=len(rounds),
        )

    def pull_counts(self, n_arms: int) -> list[int]:
        counts = [0] * n_arms
        for r in self.rounds:
            counts[r.arm] += 1
        return counts

    def efficiency_total(self) -> float:
        """Sum of per-round reward/cost ratios over completed rounds."""
        return math.fsum(r.outcome.reward / r.outcome.cost for r in self.rounds)


class RngStream:
    """Deterministic uniform stream keyed by (seed, stream_id).

    All randomness in the library is drawn from these streams as uniforms on
    [0, 1), so identical keys replay identical episodes on any platform.
    Draws are internally buffered; buffering never changes the sequence.
    """

    _BUFFER = 1024

    def __init__(self, seed: int, stream_id: int = 0):
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        ss = np.random.SeedSequence(
            entropy=self.seed & _MASK64, spawn_key=(self.stream_id & _MASK64,)
        )
        self._gen = np.random.Generator(np.random.PCG64(ss))
        self._buf: np.ndarray = np.empty(0)
        self._pos = 0

    def uniform(self) -> float:
        if self._pos >= self._buf.shape[0]:
            self._buf = self._gen.random(self._BUFFER)
            self._pos = 0
        u = self._buf[self._pos]
        self._pos += 1
        return float(u)

    def uniforms(self, n: int) -> np.ndarray:
        """Next ``n`` uniforms as an array (continues the scalar sequence)."""
        left = self._buf.shape[0] - self._pos
        if n <= left:
            out = self._buf[self._pos : self._pos + n].copy()
            self._pos += n
            return out
        head = self._buf[self._pos :].copy()
        self._pos = self._buf.shape[0]
        tail = self._gen.random(n - head.shape[0])
        return np.concatenate([head, tail])

    def integer(self, n: int) -> int:
        """Uniform index in [0, n)."""
        return min(int(self.uniform() * n), n - 1)

    def bernoulli(self, p: float) -> bool:
        return self.uniform() < p

    def index(self, probs: Sequence[float]) -> int:
        """Inverse-CDF draw from a probability vector."""
        u = self.uniform()
        acc = 0.0
        last = len(probs) - 1
        for i, p in enumerate(probs):
            acc += p
            if u < acc:
                return i
        return last


class ExactSum:
    """Exactly rounded running sum of floats (Shewchuk partials).

    Budget accounting must not drift: affordability decisions and reported
    totals read the same correctly rounded sum, so a paid-cost total can
    never exceed the budget through accumulated float error.
    """

    __slots__ = ("_partials",)

    def __init__(self) -> None:
        self._partials: list[float] = []

    @staticmethod
    def _grown(partials: list[float], x: float) -> list[float]:
        out = []
        for y in partials:
            if abs(x) < abs(y):
                x, y = y, x
            hi = x + y
            lo = y - (hi - x)
            if lo:
                out.append(lo)
            x = hi
        out.append(x)
        return out

    def add(self, x: float) -> None:
        self._partials = self._grown(self._partials, x)

    def add_if_within(self, x: float, limit: float) -> bool:
        """Add ``x`` only if the new sum stays within ``limit``."""
        grown = self._grown(self._partials, x)
        if math.fsum(grown) > limit:
            return False
        self._partials = grown
        return True

    def peek_add(self, x: float) -> float:
        """Value the sum would have after adding ``x``, without committing."""
        return math.fsum(self._grown(self._partials, x))

    @property
    def value(self) -> float:
        return math.fsum(self._partials)


def log_sum_exp(log_values: Sequence[float]) -> float:
    """log(sum(exp(v))) computed with the max shifted out first.

    Entries may be -inf (treated as absent terms); returns -inf iff all are.
    """
    if len(log_values) == 0:
        raise ValueError("empty collection")
    m = max(log_values)
    if m == -math.inf:
        return -math.inf
    return m + math.log(sum(math.exp(v - m) for v in log_values))


def normalized_probs_from_log_weights(log_weights: Sequence[float]) -> list[float]:
    """Probabilities proportional to exp(log_weights), in one stable pass."""
    if len(log_weights) == 0:
        raise ValueError("empty collection")
    for v in log_weights:
        if not math.isfinite(v):
            raise ValueError("invalid weight")
    m = max(log_weights)
    exps = [math.exp(v - m) for v in log_weights]
    total = sum(exps)
    return [e / total for e in exps]


def require_simplex(probs: Iterable[float], tol: float = 1e-9) -> None:
    """Raise unless ``probs`` is a probability vector (nonneg, sums to 1)."""
    probs = list(probs)
    for p in probs:
        if p < 0:
            raise ValueError(f"negative probability {p}")
    s = math.fsum(probs)
    if abs(s - 1.0) > tol:
        raise ValueError(f"probabilities sum to {s}, not 1")


def stable_mix64(*parts: int) -> int:
    """Stable 64-bit hash of integers (splitmix64 finalizer per word).

    Used to derive replication stream ids from (budget, replication, tag) so
    that extending an experiment never perturbs existing episodes. Must stay
    frozen: changing it invalidates every recorded seed.
    """
    h = 0x9E3779B97F4A7C15
    for part in parts:
        h = (h ^ (part & _MASK64)) * 0xBF58476D1CE4E5B9 & _MASK64
        h = (h ^ (h >> 27)) * 0x94D049BB133111EB & _MASK64
        h ^= h >> 31
    return h


def float_bits(x: float) -> int:
    """IEEE-754 bit pattern of a float, for hashing real-valued parameters."""
    return int(np.float64(x).view(np.uint64))
