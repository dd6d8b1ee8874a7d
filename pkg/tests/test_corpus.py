from __future__ import annotations

import math
import random

import pytest

from poolrank.core import (
    AnnotationRecord,
    Grade,
    Label,
    LabeledExample,
    build_pool,
)
from poolrank.corpus import (
    SamplingPlan,
    corpus_stats,
    negative_cap,
    normalize,
    sample_corpus,
    split,
)
from poolrank.errors import DanglingAnnotation, DomainError, NotEnoughPositivePools

from conftest import candidate, pool, state, turns


class TestNegativeCap:
    def test_c_bar_one(self):
        assert negative_cap(1) == 8

    def test_c_bar_e_fourth(self):
        assert negative_cap(math.e**4) == 16

    def test_c_bar_hundred(self):
        # 8 + 2 ln(100) = 17.21...
        assert negative_cap(100) == 17

    def test_below_domain(self):
        with pytest.raises(DomainError):
            negative_cap(0.5)

    def test_monotone(self):
        values = [negative_cap(1 + i * 0.37) for i in range(2000)]
        assert all(a <= b for a, b in zip(values, values[1:]))


def labeled(cand, label=Label.NEGATIVE, pool_id="p"):
    return LabeledExample(
        context=tuple(turns(2)),
        state=state(),
        candidate=cand,
        label=label,
        pool_id=pool_id,
    )


class TestNormalize:
    def test_below_threshold_untouched(self):
        cand = candidate("rare response")
        examples = [labeled(cand) for _ in range(5)]
        kept, report = normalize(examples, seed=0)
        assert len(kept) == 5
        assert report.caps_applied == {}

    def test_thirty_negatives_capped_at_fourteen(self):
        cand = candidate("hot response")
        examples = [labeled(cand) for _ in range(30)]
        kept, report = normalize(examples, seed=0)
        expected = 8 + math.floor(2 * math.log(30))
        assert expected == 14
        assert len(kept) == 14
        assert report.negatives_after[cand.candidate_id] == 14

    def test_positives_never_dropped(self):
        cand = candidate("mixed response")
        examples = [labeled(cand) for _ in range(40)]
        examples += [labeled(cand, Label.POSITIVE) for _ in range(10)]
        kept, _ = normalize(examples, seed=3)
        positives = [ex for ex in kept if ex.label is Label.POSITIVE]
        assert len(positives) == 10

    def test_deterministic(self):
        cand = candidate("repeat")
        examples = [labeled(cand, pool_id=f"p{i}") for i in range(25)]
        a, _ = normalize(examples, seed=7)
        b, _ = normalize(examples, seed=7)
        assert a == b

    def test_empty_input(self):
        kept, report = normalize([], seed=0)
        assert kept == []
        assert report.n_examples_after == 0

    def test_post_counts_never_exceed_cap(self, seeded_rng):
        cands = [candidate(f"text {i}") for i in range(6)]
        examples = []
        for i, c in enumerate(cands):
            n = seeded_rng.randrange(1, 60)
            examples += [labeled(c, pool_id=f"p{i}-{j}") for j in range(n)]
        kept, report = normalize(examples, seed=11)
        for cid, before in report.negatives_before.items():
            after = report.negatives_after[cid]
            assert after <= max(8, negative_cap(max(before, 1)))


def annotated_pool(n=4, n_positive=1, **kw):
    p = pool(n, **kw)
    grades = {c.candidate_id: Grade.A for c in p.candidates[:n_positive]}
    ann = AnnotationRecord(
        pool_id=p.pool_id,
        grades=grades,
        none_of_the_above=False,
        annotator_id="judge-1",
    )
    return p, ann


class TestCorpusStats:
    def test_mean_median(self):
        items = [annotated_pool(4), annotated_pool(4), annotated_pool(5)]
        stats = corpus_stats([p for p, _ in items], [a for _, a in items])
        assert stats.mean_pool_size == pytest.approx(4.333, abs=1e-3)
        assert stats.median_pool_size == 4
        assert stats.n_annotated_responses == 13

    def test_all_negative_fraction(self):
        items = [annotated_pool(3, n_positive=0) for _ in range(306)]
        items += [annotated_pool(3, n_positive=1) for _ in range(1294)]
        stats = corpus_stats([p for p, _ in items], [a for _, a in items])
        assert stats.n_pools == 1600
        assert stats.n_all_negative_pools == 306
        assert stats.n_all_negative_pools / stats.n_pools == pytest.approx(0.191, abs=1e-3)

    def test_partition_invariant(self):
        items = [annotated_pool(3, n_positive=i % 2) for i in range(20)]
        stats = corpus_stats([p for p, _ in items], [a for _, a in items])
        assert stats.n_all_negative_pools + stats.n_positive_pools == stats.n_pools

    def test_empty_corpus(self):
        stats = corpus_stats([], [])
        assert stats.n_pools == 0
        assert stats.mean_pool_size == 0.0

    def test_dangling_annotation(self):
        p, ann = annotated_pool(3)
        with pytest.raises(DanglingAnnotation):
            corpus_stats([], [ann])


def log_entry(topic, rating, question, tag):
    return build_pool(
        turns(2),
        state(current_topic=topic, user_utterance_is_question=question),
        [candidate(f"{tag} first"), candidate(f"{tag} second")],
        conversation_rating=rating,
        conversation_id=f"conv-{tag}",
    )


def full_log(topics, per_rating_q=4, per_rating_nq=6, extra_questions=0):
    logs = []
    i = 0
    for topic in topics:
        for rating in range(1, 6):
            for _ in range(per_rating_q):
                logs.append(log_entry(topic, rating, True, f"{topic}-{rating}-q{i}"))
                i += 1
            for _ in range(per_rating_nq):
                logs.append(log_entry(topic, rating, False, f"{topic}-{rating}-n{i}"))
                i += 1
    for j in range(extra_questions):
        logs.append(log_entry("general", (j % 5) + 1, True, f"extra-{j}"))
    return logs


class TestSampleCorpus:
    PLAN = SamplingPlan(
        topics=("music", "movies"),
        per_topic=25,
        per_rating_quota=5,
        question_bias=0.4,
        extra_question_instances=10,
        min_pool_size=2,
    )

    def test_quotas_met_exactly(self):
        # 2 question pools per bucket matches the per-bucket question target
        # exactly, so the topic-free extras all come from the general pile.
        logs = full_log(["music", "movies"], per_rating_q=2, per_rating_nq=8,
                        extra_questions=20)
        sampled, warnings = sample_corpus(logs, self.PLAN, seed=5)
        assert warnings == []
        assert len(sampled) == 2 * 25 + 10
        for topic in ("music", "movies"):
            for rating in range(1, 6):
                bucket = [
                    p for p in sampled
                    if p.state.current_topic == topic and p.conversation_rating == rating
                ]
                assert len(bucket) == 5

    def test_question_bias_per_topic(self):
        logs = full_log(["music", "movies"], extra_questions=20)
        sampled, _ = sample_corpus(logs, self.PLAN, seed=5)
        for topic in ("music", "movies"):
            questions = [
                p for p in sampled
                if p.state.current_topic == topic and p.state.user_utterance_is_question
            ]
            assert len(questions) >= 0.4 * 25

    def test_empty_plan(self):
        plan = SamplingPlan(
            topics=("music",), per_topic=0, per_rating_quota=0,
            extra_question_instances=0,
        )
        sampled, _ = sample_corpus(full_log(["music"]), plan, seed=1)
        assert sampled == []

    def test_deterministic(self):
        logs = full_log(["music", "movies"], extra_questions=20)
        a, _ = sample_corpus(logs, self.PLAN, seed=42)
        b, _ = sample_corpus(logs, self.PLAN, seed=42)
        assert [p.pool_id for p in a] == [p.pool_id for p in b]

    def test_rating_shortfall_redistributed(self):
        # rating 5 missing entirely; the 5-pool quota moves to other buckets
        logs = [
            entry
            for entry in full_log(["music"], per_rating_q=4, per_rating_nq=6)
            if entry.conversation_rating != 5
        ]
        plan = SamplingPlan(
            topics=("music",), per_topic=25, per_rating_quota=5,
            extra_question_instances=0,
        )
        sampled, _ = sample_corpus(logs, plan, seed=9)
        assert len(sampled) == 25
        assert all(p.conversation_rating != 5 for p in sampled)

    def test_insufficient_data_warns_not_fails(self):
        logs = full_log(["music"], per_rating_q=1, per_rating_nq=1)
        plan = SamplingPlan(
            topics=("music", "movies"), per_topic=25, per_rating_quota=5,
            extra_question_instances=0,
        )
        sampled, warnings = sample_corpus(logs, plan, seed=2)
        assert len(sampled) == 10
        assert any(w.topic == "movies" for w in warnings)

    def test_min_pool_size_filter(self):
        small = build_pool(
            turns(2),
            state(current_topic="music"),
            [candidate("lonely candidate")],
            conversation_rating=3,
        )
        plan = SamplingPlan(
            topics=("music",), per_topic=5, per_rating_quota=1,
            extra_question_instances=0,
        )
        sampled, _ = sample_corpus([small] + full_log(["music"]), plan, seed=0)
        assert small.pool_id not in {p.pool_id for p in sampled}


class TestSplit:
    def make_corpus(self, n=30):
        items = [annotated_pool(3, n_positive=1, conversation_id=f"conv-{i}") for i in range(n)]
        return [p for p, _ in items], [a for _, a in items]

    def test_sizes_and_disjoint(self):
        pools, anns = self.make_corpus(30)
        train, test = split(pools, anns, test_size=5, seed=0)
        assert len(test) == 5
        assert len(train) == 25
        assert {p.pool_id for p in train} & {p.pool_id for p in test} == set()
        assert {p.pool_id for p in train} | {p.pool_id for p in test} == {
            p.pool_id for p in pools
        }

    def test_zero_test_size(self):
        pools, anns = self.make_corpus(10)
        train, test = split(pools, anns, test_size=0, seed=0)
        assert test == []
        assert len(train) == 10

    def test_no_straddle(self):
        items = [
            annotated_pool(3, n_positive=1, conversation_id="shared")
            for _ in range(2)
        ]
        pools = [p for p, _ in items]
        anns = [a for _, a in items]
        train, test = split(pools, anns, test_size=1, seed=0)
        # Both pools share a conversation, so neither can enter a test of size 1.
        sides = {p.pool_id: ("test" if p in test else "train") for p in pools}
        assert len(set(sides.values())) == 1

    def test_deterministic(self):
        pools, anns = self.make_corpus(40)
        a = split(pools, anns, test_size=8, seed=3)
        b = split(pools, anns, test_size=8, seed=3)
        assert a == b

    def test_not_enough_positive(self):
        items = [annotated_pool(3, n_positive=0, conversation_id=f"c{i}") for i in range(10)]
        with pytest.raises(NotEnoughPositivePools):
            split([p for p, _ in items], [a for _, a in items], test_size=3, seed=0)

    def test_test_pools_have_preferred(self):
        pools, anns = self.make_corpus(20)
        from poolrank.core import preferred_set

        ann_by = {a.pool_id: a for a in anns}
        _, test = split(pools, anns, test_size=4, seed=1)
        for p in test:
            assert preferred_set(p, ann_by[p.pool_id])
