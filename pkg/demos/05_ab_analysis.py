"""
Reading an A/B test between two rankers
========================================

Conversations from two deployment arms — one using the heuristic, one
the learned ranker — are compared on length and user rating. Short
conversations that never reached the ranker (fewer than four system
turns) are filtered out before any statistic is computed.

Run with: python3 demos/05_ab_analysis.py
"""
import random

from poolrank.evaluation import ConversationRecord, ab_analyze

rng = random.Random(2)


def simulate(arm, n, turn_mean, rate_of_rating, rating_bias):
    records = []
    for _ in range(n):
        turns = max(1, round(rng.gauss(turn_mean, turn_mean / 2)))
        rated = rng.random() < rate_of_rating
        rating = min(5, max(1, round(rng.gauss(rating_bias, 0.8)))) if rated else None
        records.append(
            ConversationRecord(
                arm=arm, n_turns=turns, n_system_turns=turns // 2, rating=rating
            )
        )
    return records


# The learned arm keeps users around longer and rates slightly higher —
# by construction here, as a stand-in for a production log export.
records = simulate("heuristic", 3500, turn_mean=15, rate_of_rating=0.06, rating_bias=3.6)
records += simulate("learned", 2900, turn_mean=25, rate_of_rating=0.06, rating_bias=3.8)

report = ab_analyze(records, min_system_turns=4)
for arm in report.arms:
    stats = arm.to_dict()
    print(f"arm {stats['arm']:<10} n={stats['n_conversations']:<5} "
          f"median turns={stats['median_turns']:<5} mean turns={stats['mean_turns']:<6} "
          f"mean rating={stats['mean_rating']} (over {stats['n_rated']} rated)")

print(f"\nturn-count delta:  t-test p={report.turns_t_p:.2e}, "
      f"Mann-Whitney p={report.turns_mannwhitney_p:.2e}")
print(f"rating delta:      t-test p={report.rating_t_p:.3f}, "
      f"Mann-Whitney p={report.rating_mannwhitney_p:.3f}")
print(f"\ncaveat: {report.note}")
