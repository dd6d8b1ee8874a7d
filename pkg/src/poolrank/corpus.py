"""Corpus construction: sampling from logs, label smoothing, stats, train/test split."""
from __future__ import annotations

import math
import random
import statistics
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .core import (
    AnnotationRecord,
    Label,
    LabeledExample,
    LabelPolicy,
    DEFAULT_POLICY,
    ResponsePool,
    preferred_set,
)
from .errors import (
    DanglingAnnotation,
    DomainError,
    NotEnoughPositivePools,
)


@dataclass(frozen=True)
class SamplingPlan:
    """How many pools to draw, and from where.

    Defaults reproduce the production sampling recipe: 100 pools per topic,
    20 per 1-5 rating bucket, 40% ending in a user question, plus 494
    topic-free question pools.
    """

    topics: tuple[str, ...]
    per_topic: int = 100
    per_rating_quota: int = 20
    question_bias: float = 0.40
    extra_question_instances: int = 494
    min_pool_size: int = 2

    def __post_init__(self) -> None:
        if self.per_rating_quota * 5 > self.per_topic:
            raise ValueError("rating quotas exceed the per-topic budget")
        if not 0.0 <= self.question_bias <= 1.0:
            raise ValueError("question_bias must lie in [0, 1]")


@dataclass(frozen=True)
class SamplingWarning:
    """Per-topic shortfall note; sampling never hard-fails on thin data."""

    topic: str
    message: str


@dataclass(frozen=True)
class CorpusStats:
    n_pools: int
    n_annotated_responses: int
    mean_pool_size: float
    median_pool_size: float
    n_all_negative_pools: int
    n_positive_pools: int

    def to_dict(self) -> dict:
        return {
            "n_pools": self.n_pools,
            "n_annotated_responses": self.n_annotated_responses,
            "mean_pool_size": self.mean_pool_size,
            "median_pool_size": self.median_pool_size,
            "n_all_negative_pools": self.n_all_negative_pools,
            "n_positive_pools": self.n_positive_pools,
        }


@dataclass(frozen=True)
class NormalizationReport:
    negatives_before: dict[str, int]
    negatives_after: dict[str, int]
    caps_applied: dict[str, int]
    n_examples_before: int
    n_examples_after: int

    def to_dict(self) -> dict:
        return {
            "negatives_before": dict(self.negatives_before),
            "negatives_after": dict(self.negatives_after),
            "caps_applied": dict(self.caps_applied),
            "n_examples_before": self.n_examples_before,
            "n_examples_after": self.n_examples_after,
        }


def negative_cap(c_bar: float) -> int:
    """Maximum negative-example count for a recurring candidate: 8 + 2 ln(c_bar)."""
    if c_bar < 1:
        raise DomainError(f"c_bar must be >= 1, got {c_bar}")
    return math.floor(8 + 2 * math.log(c_bar))


def _eligible(pool: ResponsePool, plan: SamplingPlan) -> bool:
    return len(pool.candidates) >= plan.min_pool_size


def _is_question(pool: ResponsePool) -> bool:
    return pool.state.user_utterance_is_question


def _take(
    rng: random.Random, items: list[ResponsePool], k: int
) -> list[ResponsePool]:
    if k >= len(items):
        return list(items)
    return rng.sample(items, k)


def sample_corpus(
    logs: Iterable[ResponsePool],
    plan: SamplingPlan,
    seed: int,
) -> tuple[list[ResponsePool], list[SamplingWarning]]:
    """Draw an annotation corpus from logged pools.

    Per topic: up to ``per_topic`` pools, split evenly over the five rating
    buckets with shortfalls redistributed, each bucket biased toward
    question-final pools at ``question_bias``. Then ``extra_question_instances``
    question-final pools are drawn regardless of topic. Deterministic for a
    fixed (logs, plan, seed).
    """
    rng = random.Random(seed)
    eligible = sorted((p for p in logs if _eligible(p, plan)), key=lambda p: p.pool_id)

    chosen: list[ResponsePool] = []
    chosen_ids: set[str] = set()
    warnings: list[SamplingWarning] = []

    by_topic: dict[str, list[ResponsePool]] = defaultdict(list)
    for p in eligible:
        by_topic[p.state.current_topic].append(p)

    for topic in plan.topics:
        available = by_topic.get(topic, [])
        if len(available) < plan.per_topic:
            warnings.append(
                SamplingWarning(topic, f"only {len(available)} pools available, wanted {plan.per_topic}")
            )
        picked = _sample_topic(rng, available, plan)
        chosen.extend(picked)
        chosen_ids.update(p.pool_id for p in picked)

    question_pool = [
        p for p in eligible if _is_question(p) and p.pool_id not in chosen_ids
    ]
    extra = _take(rng, question_pool, plan.extra_question_instances)
    if len(extra) < plan.extra_question_instances:
        warnings.append(
            SamplingWarning(
                "*",
                f"only {len(extra)} extra question pools available, "
                f"wanted {plan.extra_question_instances}",
            )
        )
    chosen.extend(extra)
    return chosen, warnings


def _sample_topic(
    rng: random.Random, available: list[ResponsePool], plan: SamplingPlan
) -> list[ResponsePool]:
    by_rating: dict[Optional[int], list[ResponsePool]] = defaultdict(list)
    for p in available:
        by_rating[p.conversation_rating].append(p)

    # Bucket quotas: 20 each for ratings 1-5, shortfalls redistributed
    # uniformly over the buckets that still have spare pools.
    quotas = {r: plan.per_rating_quota for r in range(1, 6)}
    supply = {r: len(by_rating.get(r, [])) for r in range(1, 6)}
    targets = dict(quotas)
    shortfall = sum(max(0, quotas[r] - supply[r]) for r in range(1, 6))
    for r in range(1, 6):
        targets[r] = min(quotas[r], supply[r])
    while shortfall > 0:
        open_buckets = [r for r in range(1, 6) if supply[r] > targets[r]]
        if not open_buckets:
            break
        for r in open_buckets:
            if shortfall == 0:
                break
            targets[r] += 1
            shortfall -= 1

    picked: list[ResponsePool] = []
    for r in range(1, 6):
        bucket = by_rating.get(r, [])
        take = targets[r]
        questions = [p for p in bucket if _is_question(p)]
        others = [p for p in bucket if not _is_question(p)]
        want_q = min(round(plan.question_bias * take), len(questions), take)
        sel = _take(rng, questions, want_q)
        sel += _take(rng, others, take - len(sel))
        if len(sel) < take:
            # Bucket ran out of non-question pools; top up from questions.
            remaining = [p for p in questions if p not in sel]
            sel += _take(rng, remaining, take - len(sel))
        picked.extend(sel)
    return picked


def normalize(
    examples: Sequence[LabeledExample],
    seed: int,
) -> tuple[list[LabeledExample], NormalizationReport]:
    """Down-sample over-frequent negative candidates.

    A candidate seen more than 8 times as a negative keeps a uniform random
    subsample of size ``negative_cap(c_bar)``, where c_bar is its total count
    of not-selected appearances. Positives are never dropped.
    """
    rng = random.Random(seed)
    neg_by_cand: dict[str, list[int]] = defaultdict(list)
    for i, ex in enumerate(examples):
        if ex.label is Label.NEGATIVE:
            neg_by_cand[ex.candidate.candidate_id].append(i)

    negatives_before = {cid: len(ix) for cid, ix in neg_by_cand.items()}
    caps_applied: dict[str, int] = {}
    drop: set[int] = set()
    for cid in sorted(neg_by_cand):
        indices = neg_by_cand[cid]
        c_bar = len(indices)
        if c_bar <= 8:
            continue
        cap = negative_cap(c_bar)
        caps_applied[cid] = cap
        if c_bar > cap:
            keep = set(rng.sample(indices, cap))
            drop.update(i for i in indices if i not in keep)

    kept = [ex for i, ex in enumerate(examples) if i not in drop]
    negatives_after = Counter(
        ex.candidate.candidate_id for ex in kept if ex.label is Label.NEGATIVE
    )
    report = NormalizationReport(
        negatives_before=negatives_before,
        negatives_after={cid: negatives_after.get(cid, 0) for cid in negatives_before},
        caps_applied=caps_applied,
        n_examples_before=len(examples),
        n_examples_after=len(kept),
    )
    return kept, report


def corpus_stats(
    pools: Sequence[ResponsePool],
    annotations: Sequence[AnnotationRecord],
    policy: LabelPolicy = DEFAULT_POLICY,
) -> CorpusStats:
    """Descriptive statistics over an annotated corpus."""
    by_id = {p.pool_id: p for p in pools}
    for ann in annotations:
        if ann.pool_id not in by_id:
            raise DanglingAnnotation(ann.pool_id)

    sizes = [len(p.candidates) for p in pools]
    n_all_negative = 0
    n_positive = 0
    for ann in annotations:
        pool = by_id[ann.pool_id]
        if ann.none_of_the_above or not preferred_set(pool, ann, policy):
            n_all_negative += 1
        else:
            n_positive += 1
    return CorpusStats(
        n_pools=len(pools),
        n_annotated_responses=sum(sizes),
        mean_pool_size=statistics.fmean(sizes) if sizes else 0.0,
        median_pool_size=statistics.median(sizes) if sizes else 0.0,
        n_all_negative_pools=n_all_negative,
        n_positive_pools=n_positive,
    )


def split(
    pools: Sequence[ResponsePool],
    annotations: Sequence[AnnotationRecord],
    test_size: int,
    seed: int,
    policy: LabelPolicy = DEFAULT_POLICY,
) -> tuple[list[ResponsePool], list[ResponsePool]]:
    """Partition pools into (train, test).

    Test pools must have a nonempty preferred set; pools sharing a
    conversation_id never straddle the split. Deterministic given seed.
    """
    ann_by_pool = {a.pool_id: a for a in annotations}

    def conv_key(p: ResponsePool) -> str:
        return p.conversation_id or p.pool_id

    groups: dict[str, list[ResponsePool]] = defaultdict(list)
    for p in sorted(pools, key=lambda p: p.pool_id):
        groups[conv_key(p)].append(p)

    def group_all_positive(members: list[ResponsePool]) -> bool:
        # Test pools need a preferred response; the no-straddle rule means
        # the whole conversation must qualify before any of it can.
        for p in members:
            ann = ann_by_pool.get(p.pool_id)
            if ann is None or not preferred_set(p, ann, policy):
                return False
        return True

    rng = random.Random(seed)
    keys = sorted(groups)
    rng.shuffle(keys)

    n_positive_pools = sum(
        len(groups[k]) for k in keys if group_all_positive(groups[k])
    )
    if n_positive_pools < test_size:
        raise NotEnoughPositivePools(
            f"needed {test_size} test pools, only {n_positive_pools} eligible"
        )

    test: list[ResponsePool] = []
    train: list[ResponsePool] = []
    remaining = []
    for key in keys:
        members = groups[key]
        # A conversation enters the test side whole or not at all, so the
        # test set can come up short of test_size on coarse groupings.
        if len(test) < test_size and group_all_positive(members) and (
            len(test) + len(members) <= test_size
        ):
            test.extend(members)
        else:
            remaining.append(key)
    for key in remaining:
        train.extend(groups[key])
    return train, test
