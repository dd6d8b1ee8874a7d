"""Ranker-agnostic evaluation: Recall@1, cross-ranker comparison, A/B analysis."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from .core import (
    AnnotationRecord,
    LabelPolicy,
    DEFAULT_POLICY,
    ResponsePool,
    preferred_set,
)
from .errors import EmptyArm, NoPreferredResponse
from .ranking import RankedPool, Ranker  # noqa: F401  (re-exported surface)


@dataclass(frozen=True)
class PoolHit:
    pool_id: str
    top_candidate: str
    hit: bool


@dataclass(frozen=True)
class EvalReport:
    ranker_name: str
    hits: int
    n: int
    per_pool: tuple[PoolHit, ...]

    @property
    def recall_at_1(self) -> float:
        return self.hits / self.n

    def to_dict(self) -> dict:
        return {
            "ranker": self.ranker_name,
            "hits": self.hits,
            "n": self.n,
            "recall_at_1": self.recall_at_1,
            "per_pool": [
                {"pool_id": h.pool_id, "top": h.top_candidate, "hit": h.hit}
                for h in self.per_pool
            ],
        }


TestSet = Sequence[tuple[ResponsePool, AnnotationRecord]]


def recall_at_1(
    ranker: Ranker,
    test: TestSet,
    policy: LabelPolicy = DEFAULT_POLICY,
) -> EvalReport:
    """Fraction of pools whose top-ranked candidate is human-preferred.

    Pools without a preferred response are rejected up front, not skipped.
    """
    preferred: list[set[str]] = []
    for pool, ann in test:
        pref = preferred_set(pool, ann, policy)
        if not pref:
            raise NoPreferredResponse(pool.pool_id)
        preferred.append(pref)

    per_pool = []
    hits = 0
    for (pool, _), pref in zip(test, preferred):
        ranked = ranker.rank(pool)
        hit = ranked.top in pref
        hits += hit
        per_pool.append(PoolHit(pool.pool_id, ranked.top, hit))
    return EvalReport(
        ranker_name=ranker.name, hits=hits, n=len(per_pool), per_pool=tuple(per_pool)
    )


def paired_significance(a: EvalReport, b: EvalReport) -> float:
    """Exact McNemar p-value on the paired hit indicators of two reports."""
    if a.n != b.n:
        raise ValueError("reports cover different test sets")
    a_only = sum(1 for x, y in zip(a.per_pool, b.per_pool) if x.hit and not y.hit)
    b_only = sum(1 for x, y in zip(a.per_pool, b.per_pool) if y.hit and not x.hit)
    discordant = a_only + b_only
    if discordant == 0:
        return 1.0
    return float(
        stats.binomtest(min(a_only, b_only), discordant, 0.5, alternative="two-sided").pvalue
    )


@dataclass(frozen=True)
class ComparisonReport:
    reports: tuple[EvalReport, ...]
    pairwise_p: dict[tuple[str, str], float]

    def to_dict(self) -> dict:
        return {
            "rankers": [
                {"name": r.ranker_name, "hits": r.hits, "n": r.n, "recall_at_1": r.recall_at_1}
                for r in self.reports
            ],
            "pairwise_p": {f"{a} vs {b}": p for (a, b), p in self.pairwise_p.items()},
        }


def compare(
    rankers: Sequence[Ranker],
    test: TestSet,
    policy: LabelPolicy = DEFAULT_POLICY,
) -> ComparisonReport:
    """Recall@1 per ranker plus pairwise exact McNemar significance."""
    reports = [recall_at_1(r, test, policy) for r in rankers]
    pairwise: dict[tuple[str, str], float] = {}
    for i in range(len(reports)):
        for j in range(i + 1, len(reports)):
            key = (reports[i].ranker_name, reports[j].ranker_name)
            pairwise[key] = paired_significance(reports[i], reports[j])
    return ComparisonReport(reports=tuple(reports), pairwise_p=pairwise)


@dataclass(frozen=True)
class ConversationRecord:
    """One conversation in an A/B log: arm, length, optional 1-5 rating."""

    arm: str
    n_turns: int
    n_system_turns: int
    rating: Optional[int] = None

    def to_dict(self) -> dict:
        return {
            "arm": self.arm,
            "n_turns": self.n_turns,
            "n_system_turns": self.n_system_turns,
            "rating": self.rating,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ConversationRecord":
        return cls(
            arm=d["arm"],
            n_turns=d["n_turns"],
            n_system_turns=d["n_system_turns"],
            rating=d.get("rating"),
        )


@dataclass(frozen=True)
class ArmStats:
    arm: str
    n_conversations: int
    median_turns: float
    mean_turns: float
    mean_rating: Optional[float]
    n_rated: int

    def to_dict(self) -> dict:
        return {
            "arm": self.arm,
            "n_conversations": self.n_conversations,
            "median_turns": self.median_turns,
            "mean_turns": round(self.mean_turns, 2),
            "mean_rating": None if self.mean_rating is None else round(self.mean_rating, 2),
            "n_rated": self.n_rated,
        }


@dataclass(frozen=True)
class ABReport:
    arms: tuple[ArmStats, ArmStats]
    turns_t_p: float
    turns_mannwhitney_p: float
    rating_t_p: Optional[float]
    rating_mannwhitney_p: Optional[float]
    note: str = (
        "records treated as independent conversations; "
        "randomization unit (conversation vs user) not modeled"
    )

    def to_dict(self) -> dict:
        return {
            "arms": [a.to_dict() for a in self.arms],
            "turns_t_p": self.turns_t_p,
            "turns_mannwhitney_p": self.turns_mannwhitney_p,
            "rating_t_p": self.rating_t_p,
            "rating_mannwhitney_p": self.rating_mannwhitney_p,
            "note": self.note,
        }


def _two_sided_tests(a: Sequence[float], b: Sequence[float]) -> tuple[float, float]:
    a_arr, b_arr = np.asarray(a, float), np.asarray(b, float)
    if np.array_equal(np.sort(a_arr), np.sort(b_arr)):
        return 1.0, 1.0
    t_p = float(stats.ttest_ind(a_arr, b_arr, equal_var=False).pvalue)
    u_p = float(stats.mannwhitneyu(a_arr, b_arr, alternative="two-sided").pvalue)
    return t_p, u_p


def ab_analyze(
    records: Sequence[ConversationRecord],
    min_system_turns: int = 4,
) -> ABReport:
    """Per-arm length and rating statistics with two-sided significance.

    Only conversations reaching ``min_system_turns`` system turns count;
    the rating columns use rated conversations only.
    """
    eligible = [r for r in records if r.n_system_turns >= min_system_turns]
    arms = sorted({r.arm for r in eligible})
    if len(arms) != 2:
        raise EmptyArm(f"need exactly two nonempty arms, got {arms}")

    def arm_stats(arm: str) -> ArmStats:
        rows = [r for r in eligible if r.arm == arm]
        turns = [r.n_turns for r in rows]
        ratings = [r.rating for r in rows if r.rating is not None]
        return ArmStats(
            arm=arm,
            n_conversations=len(rows),
            median_turns=float(np.median(turns)),
            mean_turns=float(np.mean(turns)),
            mean_rating=float(np.mean(ratings)) if ratings else None,
            n_rated=len(ratings),
        )

    stats_a, stats_b = arm_stats(arms[0]), arm_stats(arms[1])
    turns_a = [r.n_turns for r in eligible if r.arm == arms[0]]
    turns_b = [r.n_turns for r in eligible if r.arm == arms[1]]
    turns_t_p, turns_u_p = _two_sided_tests(turns_a, turns_b)

    ratings_a = [r.rating for r in eligible if r.arm == arms[0] and r.rating is not None]
    ratings_b = [r.rating for r in eligible if r.arm == arms[1] and r.rating is not None]
    if ratings_a and ratings_b:
        rating_t_p, rating_u_p = _two_sided_tests(ratings_a, ratings_b)
    else:
        rating_t_p = rating_u_p = None

    return ABReport(
        arms=(stats_a, stats_b),
        turns_t_p=turns_t_p,
        turns_mannwhitney_p=turns_u_p,
        rating_t_p=rating_t_p,
        rating_mannwhitney_p=rating_u_p,
    )
