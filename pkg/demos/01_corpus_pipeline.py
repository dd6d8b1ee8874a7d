"""
Building an annotation corpus from conversation logs
=====================================================

Walks the full corpus path: sample pools from raw logs, attach human
annotations, derive labeled training examples, tame over-frequent
negatives, and split into train/test without straddling conversations.

Run with: python3 demos/01_corpus_pipeline.py
"""
import random

from poolrank import (
    AnnotationRecord,
    Grade,
    RGDescriptor,
    RGType,
    SamplingPlan,
    Speaker,
    Turn,
    build_pool,
    corpus_stats,
    derive_labels,
    make_candidate,
    normalize,
    sample_corpus,
    split,
)
from poolrank.corpus import negative_cap
from poolrank.core import DialogueState

rng = random.Random(0)

TOPICS = ("music", "movies", "sports")
KG = {t: RGDescriptor(name=f"{t}_kg", rg_type=RGType.KG, topic=t) for t in TOPICS}

# --- 1. Fake a season of conversation logs ---------------------------------
# Each logged pool is one system turn: the context so far, the dialogue
# state, and every candidate the response generators produced.

def log_pool(topic, rating, is_question, conv):
    context = [
        Turn(Speaker.SYSTEM, f"want to chat about {topic}?", 0, rg=KG[topic]),
        Turn(Speaker.USER, f"yes, {topic} sounds fun ({conv})", 1),
    ]
    state = DialogueState(current_topic=topic, user_utterance_is_question=is_question)
    candidates = [
        make_candidate(f"here is a {topic} fact number {rng.randrange(10**6)}", KG[topic])
        for _ in range(rng.randrange(2, 5))
    ]
    return build_pool(context, state, candidates,
                      conversation_rating=rating, conversation_id=conv)

logs = [
    log_pool(rng.choice(TOPICS), rng.randint(1, 5), rng.random() < 0.5, f"conv-{i}")
    for i in range(600)
]
print(f"logged {len(logs)} pools across {len(TOPICS)} topics")

# --- 2. Sample an annotation corpus ----------------------------------------
# 30 pools per topic, 6 per rating bucket, biased toward question-final
# pools, plus 20 extra question pools drawn topic-free.

plan = SamplingPlan(
    topics=TOPICS, per_topic=30, per_rating_quota=6,
    question_bias=0.4, extra_question_instances=20,
)
sampled, warnings = sample_corpus(logs, plan, seed=42)
print(f"sampled {len(sampled)} pools ({len(warnings)} shortfall warnings)")

# --- 3. Pretend a human graded every pool -----------------------------------
# Grade A marks the selected response; everything else is dispreferred.

annotations = [
    AnnotationRecord(
        pool_id=p.pool_id,
        grades={p.candidates[0].candidate_id: Grade.A},
        none_of_the_above=False,
        annotator_id="demo",
    )
    for p in sampled
]
stats = corpus_stats(sampled, annotations)
print(f"corpus: {stats.n_annotated_responses} responses over {stats.n_pools} pools, "
      f"mean pool size {stats.mean_pool_size:.2f}")

# --- 4. Derive labels and normalize negative frequencies --------------------
# A candidate that keeps showing up as a negative would dominate training;
# the cap keeps at most 8 + 2 ln(count) of its appearances.

by_id = {p.pool_id: p for p in sampled}
examples = [ex for a in annotations for ex in derive_labels(by_id[a.pool_id], a)]
kept, report = normalize(examples, seed=7)
print(f"normalization: {report.n_examples_before} -> {report.n_examples_after} examples "
      f"(cap at count 30 would be {negative_cap(30)})")

# --- 5. Split without straddling conversations ------------------------------
train, test = split(sampled, annotations, test_size=25, seed=3)
train_convs = {p.conversation_id for p in train}
test_convs = {p.conversation_id for p in test}
print(f"split: train={len(train)} test={len(test)}, "
      f"shared conversations: {len(train_convs & test_convs)}")
