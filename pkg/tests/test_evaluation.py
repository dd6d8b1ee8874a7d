from __future__ import annotations

import random

import numpy as np
import pytest

from poolrank.core import AnnotationRecord, Grade
from poolrank.errors import EmptyArm, NoPreferredResponse
from poolrank.evaluation import (
    ConversationRecord,
    ab_analyze,
    compare,
    paired_significance,
    recall_at_1,
)
from poolrank.ranking import FunctionRanker, RankedPool

from conftest import pool


def annotated(n=4, preferred_index=0):
    p = pool(n)
    grades = {p.candidates[preferred_index].candidate_id: Grade.A}
    ann = AnnotationRecord(
        pool_id=p.pool_id, grades=grades, none_of_the_above=False, annotator_id="j"
    )
    return p, ann


def oracle_for(test_set):
    preferred = {p.pool_id: min(a.grades) for p, a in test_set}

    def rank(p):
        ids = sorted(p.candidate_ids(), key=lambda c: c != preferred[p.pool_id])
        return RankedPool(pool_id=p.pool_id, ordered_ids=tuple(ids))

    return FunctionRanker("oracle", rank)


def anti_oracle_for(test_set):
    preferred = {p.pool_id: min(a.grades) for p, a in test_set}

    def rank(p):
        ids = sorted(p.candidate_ids(), key=lambda c: c == preferred[p.pool_id])
        return RankedPool(pool_id=p.pool_id, ordered_ids=tuple(ids))

    return FunctionRanker("anti-oracle", rank)


def first_candidate_ranker():
    return FunctionRanker(
        "first", lambda p: RankedPool(p.pool_id, tuple(p.candidate_ids()))
    )


class TestRecallAt1:
    def test_oracle_hits_everything(self):
        test = [annotated() for _ in range(12)]
        report = recall_at_1(oracle_for(test), test)
        assert report.recall_at_1 == 1.0

    def test_exact_fraction(self):
        # preferred candidate sits first in 3 of 8 pools
        test = [annotated(preferred_index=0 if i < 3 else 1) for i in range(8)]
        report = recall_at_1(first_candidate_ranker(), test)
        assert report.hits == 3
        assert report.recall_at_1 == pytest.approx(3 / 8)

    def test_empty_preferred_rejected(self):
        p = pool(3)
        ann = AnnotationRecord(
            pool_id=p.pool_id, grades={}, none_of_the_above=True, annotator_id="j"
        )
        with pytest.raises(NoPreferredResponse):
            recall_at_1(first_candidate_ranker(), [(p, ann)])

    def test_multiple_of_one_over_n(self):
        rng = random.Random(3)
        for _ in range(20):
            n_pools = rng.randrange(1, 30)
            test = [
                annotated(preferred_index=rng.randrange(2)) for _ in range(n_pools)
            ]
            report = recall_at_1(first_candidate_ranker(), test)
            assert (report.recall_at_1 * report.n) == pytest.approx(
                round(report.recall_at_1 * report.n)
            )


class TestCompare:
    def test_identical_rankers_p_one(self):
        test = [annotated() for _ in range(10)]
        result = compare([oracle_for(test), oracle_for(test)], test)
        assert list(result.pairwise_p.values()) == [1.0]

    def test_superset_discordance_p(self):
        # A hits everything, B misses exactly 10; exact binomial on 10
        # one-sided discordant pairs gives 2 * (1/2)^10.
        test = [annotated(preferred_index=0 if i >= 10 else 1) for i in range(89)]
        a = oracle_for(test)
        b = first_candidate_ranker()
        ra = recall_at_1(a, test)
        rb = recall_at_1(b, test)
        assert ra.hits == 89 and rb.hits == 79
        p = paired_significance(ra, rb)
        assert p == pytest.approx(2 * 0.5**10)

    def test_oracle_vs_anti_oracle(self):
        test = [annotated() for _ in range(89)]
        result = compare([oracle_for(test), anti_oracle_for(test)], test)
        assert list(result.pairwise_p.values())[0] < 1e-3

    def test_ordering_sandwich(self):
        test = [annotated(preferred_index=1) for _ in range(30)]
        oracle_r = recall_at_1(oracle_for(test), test)
        mid = recall_at_1(first_candidate_ranker(), test)
        anti = recall_at_1(anti_oracle_for(test), test)
        assert oracle_r.recall_at_1 >= mid.recall_at_1 >= anti.recall_at_1


def records(arm, turn_values, ratings=None, system_turns=None):
    ratings = ratings or [None] * len(turn_values)
    return [
        ConversationRecord(
            arm=arm,
            n_turns=t,
            n_system_turns=system_turns if system_turns is not None else max(4, t // 2),
            rating=r,
        )
        for t, r in zip(turn_values, ratings)
    ]


class TestABAnalyze:
    def test_identical_arms(self):
        turn_values = [10, 12, 14, 16] * 10
        ratings = [3, 4, 5, 2] * 10
        recs = records("A", turn_values, ratings) + records("B", turn_values, ratings)
        report = ab_analyze(recs)
        assert report.turns_t_p == 1.0
        assert report.rating_t_p == 1.0
        a, b = report.arms
        assert a.mean_turns == b.mean_turns
        assert a.mean_rating == b.mean_rating

    def test_separated_arms_significant(self):
        rng = np.random.default_rng(11)
        a_turns = np.clip(rng.normal(15, 3, 500).round().astype(int), 8, None)
        b_turns = np.clip(rng.normal(25, 3, 500).round().astype(int), 8, None)
        recs = records("A", a_turns.tolist()) + records("B", b_turns.tolist())
        report = ab_analyze(recs)
        assert report.turns_t_p < 0.01
        assert report.turns_mannwhitney_p < 0.01

    def test_minimum_length_filter(self):
        recs = records("A", [18, 19, 20, 21, 22]) + records("B", [24, 25, 26, 27, 28])
        recs += records("A", [2] * 50, system_turns=1)
        report = ab_analyze(recs, min_system_turns=4)
        a = next(s for s in report.arms if s.arm == "A")
        assert a.n_conversations == 5
        assert a.mean_turns == 20

    def test_permutation_invariant(self):
        rng = random.Random(17)
        recs = records("A", [10, 11, 12, 20]) + records("B", [22, 25, 30, 31])
        shuffled = list(recs)
        rng.shuffle(shuffled)
        assert ab_analyze(recs) == ab_analyze(shuffled)

    def test_single_arm_rejected(self):
        with pytest.raises(EmptyArm):
            ab_analyze(records("A", [10, 12, 14]))

    def test_rating_only_over_rated(self):
        recs = records("A", [10, 12], ratings=[4, None]) + records(
            "B", [20, 22], ratings=[5, None]
        )
        report = ab_analyze(recs)
        a = next(s for s in report.arms if s.arm == "A")
        assert a.n_rated == 1
        assert a.mean_rating == 4.0
