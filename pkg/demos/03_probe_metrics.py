"""
Scoring responses with follow-up probes
========================================

A probe metric asks: if this response were good, what would the user
plausibly say next? We append canned follow-ups ("Wow that is really
cool!" vs "That's not even related to what I said.") and let a language
model judge which continuation is more likely. No trained ranker needed.

This demo uses a toy keyword backend instead of a neural LM so it runs
instantly; any object with conditional_log_likelihood(context, text)
plugs in the same way.

Run with: python3 demos/03_probe_metrics.py
"""
import numpy as np

from poolrank import (
    RGDescriptor,
    RGType,
    Speaker,
    Turn,
    build_pool,
    make_candidate,
)
from poolrank.core import DialogueState
from poolrank.probes import (
    MetricMatrix,
    load_probe_sets,
    metric_correlations,
    preferred_vs_dispreferred_test,
    probe_rank,
    probe_score,
)


class KeywordLM:
    """Toy backend: a follow-up is 'likelier' when the response overlaps the user turn.

    Positive-sounding probes get a boost for overlapping responses, negative
    ones get the mirror-image penalty.
    """

    identity = "keyword-toy"
    _upbeat = ("cool", "great", "makes sense", "understand", "interesting", "more")

    def conditional_log_likelihood(self, context_text: str, continuation_text: str) -> float:
        lines = context_text.splitlines()
        user_words = set(lines[-2].lower().split()) if len(lines) >= 2 else set()
        overlap = len(user_words & set(lines[-1].lower().split()))
        upbeat = any(k in continuation_text.lower() for k in self._upbeat)
        return -3.0 + (0.5 * overlap if upbeat else -0.5 * overlap)


KG = RGDescriptor("space_kg", RGType.KG, "science")
context = [
    Turn(Speaker.SYSTEM, "Space is full of surprises.", 0, rg=KG),
    Turn(Speaker.USER, "how many moons does jupiter have", 1),
]
state = DialogueState(current_topic="science")
candidates = [
    make_candidate("My favorite pasta is carbonara.", KG),
    make_candidate("Jupiter has 95 confirmed moons.", KG),
    make_candidate("The moon landing was in 1969.", KG),
]
pool = build_pool(context, state, candidates)

probe_sets = load_probe_sets()
lm = KeywordLM()

# --- Rank the pool under each metric ----------------------------------------
print("per-metric scores (higher is better):")
for name, probes in probe_sets.items():
    scores = [probe_score(context, c, probes, lm) for c in candidates]
    print(f"  {name:<24}" + "  ".join(f"{s:+.2f}" for s in scores))

ranked = probe_rank(pool, probe_sets["Relevant"], lm)
print(f"\ntop response by Relevant: {pool.get_candidate(ranked.top).text!r}")

# --- How do the metrics relate to each other? -------------------------------
# Score many synthetic rows and correlate the metric columns. With a single
# toy backend the metrics are strongly coupled; with a real LM the
# correlation matrix is where the metric families start to separate.
rng = np.random.default_rng(0)
rows = []
for _ in range(50):
    noise = rng.normal(0, 0.3, size=len(probe_sets))
    base = rng.normal(0, 1.0)
    rows.append(base + noise)
matrix = MetricMatrix(tuple(probe_sets), np.array(rows))
corr = metric_correlations(matrix)
print(f"\nmean off-diagonal metric correlation: "
      f"{corr[~np.eye(len(probe_sets), dtype=bool)].mean():.2f}")

# --- Do metrics separate preferred from dispreferred responses? --------------
preferred = np.array([True] * 25 + [False] * 25)
matrix2 = MetricMatrix(tuple(probe_sets), np.array(rows) + preferred[:, None] * 1.5)
tests = preferred_vs_dispreferred_test(matrix2, preferred.tolist())
print("\nWelch t-test, preferred vs dispreferred rows:")
for name, res in tests.items():
    print(f"  {name:<24} t={res['t']:+6.2f}  p={res['p']:.1e}  {res['direction']}")
