"""Frequency checks against exact Born predictions."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Optional, Sequence

from .quantum import BellKind

SIGMAS = 3.0
# keeps a rate sitting exactly on the bound inside it despite float residue
BOUND_SLACK = 1e-12


@dataclass(frozen=True)
class FrequencyCheck:
    label: str
    expected: float
    observed_count: int
    trials: int
    tolerance: float
    passed: bool

    @property
    def observed(self) -> float:
        return self.observed_count / self.trials

    def __str__(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return (
            f"{verdict} {self.label}: observed {self.observed:.4f} "
            f"({self.observed_count}/{self.trials}), expected {self.expected:.4f} ± {self.tolerance:.4f}"
        )


def binomial_tolerance(expected: float, trials: int, sigmas: float = SIGMAS) -> float:
    return sigmas * math.sqrt(expected * (1 - expected) / trials)


def check_count(
    label: str, expected: float, hits: int, trials: int, tolerance: Optional[float] = None
) -> FrequencyCheck:
    if trials <= 0:
        raise ValueError(f"{label}: need at least one trial")
    if not 0 <= expected <= 1:
        raise ValueError(f"{label}: expected probability {expected} outside [0, 1]")
    if tolerance is None:
        tolerance = binomial_tolerance(expected, trials)
    passed = abs(hits / trials - expected) <= tolerance + BOUND_SLACK
    return FrequencyCheck(label, expected, hits, trials, tolerance, passed)


def check_frequency(
    label: str, expected: float, outcomes: Iterable[bool], tolerance: Optional[float] = None
) -> FrequencyCheck:
    """Compare the hit rate of ``outcomes`` to ``expected``.

    The default tolerance is the 3σ binomial bound, which collapses to 0 for
    certain and impossible events.
    """
    outcomes = list(outcomes)
    return check_count(label, expected, sum(bool(o) for o in outcomes), len(outcomes), tolerance)


def compare_to_oracle(
    empirical: Mapping[BellKind, int], exact: Mapping[BellKind, float], trials: int, prefix: str = ""
) -> list[FrequencyCheck]:
    """One check per Bell outcome. Exactly-zero predictions get zero tolerance."""
    total = sum(empirical.get(k, 0) for k in BellKind)
    if total != trials:
        raise ValueError(f"counts sum to {total}, not {trials}")
    checks = []
    for kind in BellKind:
        p = exact.get(kind, 0.0)
        # snap rounding residue so impossible/certain outcomes get zero tolerance
        if abs(p) < 1e-12:
            p = 0.0
        elif abs(p - 1) < 1e-12:
            p = 1.0
        checks.append(check_count(f"{prefix}P({kind})", p, empirical.get(kind, 0), trials))
    return checks


def seed_sweep(check: Callable[[int], bool], seeds: Sequence[int] = range(100)) -> tuple[int, int]:
    """Run a seeded check over many seeds; returns ``(passes, runs)``."""
    passes = sum(bool(check(s)) for s in seeds)
    return passes, len(seeds)


@dataclass
class RoundPrediction:
    """Exact per-round statistics of a scenario.

    ``kept_and_agree`` is the probability that a round is not forbidden and the
    receiver decodes the bit that was sent.
    """

    outcomes: dict[BellKind, float]
    forbidden: float
    kept_and_agree: float
    eve_accuracy: Optional[float] = None

    @property
    def agreement(self) -> float:
        """Probability of matching bits given that the round was kept."""
        kept = 1 - self.forbidden
        return self.kept_and_agree / kept if kept > 0 else 1.0

    @classmethod
    def empty(cls) -> RoundPrediction:
        return cls({k: 0.0 for k in BellKind}, 0.0, 0.0)

    def accumulate(self, weight: float, outcome: BellKind, forbidden: bool, agree: bool) -> None:
        self.outcomes[outcome] += weight
        if forbidden:
            self.forbidden += weight
        elif agree:
            self.kept_and_agree += weight

    @staticmethod
    def mix(parts: Sequence[tuple[float, RoundPrediction]]) -> RoundPrediction:
        """Weighted average of predictions; weights must sum to 1."""
        out = RoundPrediction.empty()
        eve = []
        for w, p in parts:
            for k, v in p.outcomes.items():
                out.outcomes[k] += w * v
            out.forbidden += w * p.forbidden
            out.kept_and_agree += w * p.kept_and_agree
            if p.eve_accuracy is not None:
                eve.append(w * p.eve_accuracy)
        if eve:
            out.eve_accuracy = sum(eve)
        return out
