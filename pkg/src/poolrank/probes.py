"""Reference-free candidate scoring with positive/negative probe follow-ups.

Each quality metric owns a set of canned user replies; a candidate is scored
by how much more likely a language model finds the positive replies than the
negative ones after the candidate is appended to the conversation.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from typing import Protocol, Sequence

import numpy as np
from scipy import stats

from .core import ResponseCandidate, ResponsePool, Turn
from .errors import BackendError, DegenerateGroup, TooFewRows
from .ranking import RankedPool, ranked_from_scores

TURN_LEVEL_METRICS = (
    "Interesting",
    "Engaging",
    "Specific",
    "Relevant",
    "Correct",
    "SemanticallyAppropriate",
    "Understandable",
    "Fluent",
)


class LMScorer(Protocol):
    """Likelihood backend: conditional log-probability of a continuation."""

    identity: str

    def conditional_log_likelihood(self, context_text: str, continuation_text: str) -> float:
        ...


@dataclass(frozen=True)
class ProbeSet:
    metric_name: str
    positive: tuple[str, ...]
    negative: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.positive and not self.negative:
            raise ValueError("a probe set needs at least one probe")


def load_probe_sets(path: str | None = None) -> dict[str, ProbeSet]:
    """Load probe texts from JSON: {metric: {positive: [...], negative: [...]}}.

    Without a path, the bundled default probe file is used.
    """
    if path is None:
        raw = resources.files("poolrank.data").joinpath("probes.json").read_text("utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            raw = fh.read()
    data = json.loads(raw)
    return {
        name: ProbeSet(
            metric_name=name,
            positive=tuple(entry.get("positive", [])),
            negative=tuple(entry.get("negative", [])),
        )
        for name, entry in data.items()
    }


def render_context(context: Sequence[Turn], candidate: ResponseCandidate) -> str:
    """Flatten the conversation plus the candidate into backend input text."""
    lines = [t.text for t in context]
    lines.append(candidate.text)
    return "\n".join(lines)


def probe_score(
    context: Sequence[Turn],
    candidate: ResponseCandidate,
    probes: ProbeSet,
    lm: LMScorer,
) -> float:
    """Mean positive-probe log-likelihood minus mean negative-probe log-likelihood.

    One-sided probe sets use only their populated side; a negative-only set is
    negated so higher always means better.
    """
    if not context:
        raise ValueError("context must be nonempty")
    conversation = render_context(context, candidate)

    def mean_ll(side: tuple[str, ...]) -> float:
        try:
            values = [lm.conditional_log_likelihood(conversation, p) for p in side]
        except Exception as exc:
            raise BackendError(f"backend {getattr(lm, 'identity', '?')}: {exc}") from exc
        return float(np.mean(values))

    if probes.positive and probes.negative:
        return mean_ll(probes.positive) - mean_ll(probes.negative)
    if probes.positive:
        return mean_ll(probes.positive)
    return -mean_ll(probes.negative)


def probe_rank(pool: ResponsePool, probes: ProbeSet, lm: LMScorer) -> RankedPool:
    """Rank a pool by probe score, best first, input order on ties."""
    scores = [probe_score(pool.context, c, probes, lm) for c in pool.candidates]
    return ranked_from_scores(pool, scores)


class ProbeRanker:
    """Ranker-interface wrapper for one metric's probe set."""

    def __init__(self, probes: ProbeSet, lm: LMScorer):
        self.name = f"probe:{probes.metric_name}"
        self.probes = probes
        self.lm = lm

    def rank(self, pool: ResponsePool) -> RankedPool:
        return probe_rank(pool, self.probes, self.lm)


@dataclass(frozen=True)
class MetricMatrix:
    """Scores for every (candidate, metric) pair over a corpus."""

    metric_names: tuple[str, ...]
    values: np.ndarray  # shape (n_candidates, n_metrics)

    def __post_init__(self) -> None:
        if self.values.ndim != 2 or self.values.shape[1] != len(self.metric_names):
            raise ValueError("values must be (n_rows, n_metrics)")


def score_matrix(
    items: Sequence[tuple[Sequence[Turn], ResponseCandidate]],
    probe_sets: dict[str, ProbeSet],
    lm: LMScorer,
) -> MetricMatrix:
    """Score every candidate under every metric. Empty-context items are skipped."""
    names = tuple(probe_sets)
    rows = []
    for context, candidate in items:
        if not context:
            continue
        rows.append(
            [probe_score(context, candidate, probe_sets[m], lm) for m in names]
        )
    return MetricMatrix(metric_names=names, values=np.asarray(rows, dtype=float))


def metric_correlations(matrix: MetricMatrix) -> np.ndarray:
    """Pairwise Pearson correlation between metric columns.

    Symmetric with unit diagonal; entries against a constant column are NaN.
    """
    values = matrix.values
    if values.shape[0] < 2:
        raise TooFewRows("need at least two scored candidates")
    n = values.shape[1]
    out = np.full((n, n), np.nan)
    constant = values.std(axis=0) == 0
    for i in range(n):
        for j in range(i, n):
            if i == j:
                out[i, j] = 1.0
            elif not constant[i] and not constant[j]:
                r = stats.pearsonr(values[:, i], values[:, j]).statistic
                out[i, j] = out[j, i] = r
    return out


def preferred_vs_dispreferred_test(
    matrix: MetricMatrix,
    preferred_mask: Sequence[bool],
    alpha: float = 0.05,
) -> dict[str, dict]:
    """Welch two-sided t-test per metric between preferred and dispreferred rows."""
    mask = np.asarray(preferred_mask, dtype=bool)
    if mask.shape[0] != matrix.values.shape[0]:
        raise ValueError("mask length must match matrix rows")
    results: dict[str, dict] = {}
    for j, name in enumerate(matrix.metric_names):
        preferred = matrix.values[mask, j]
        dispreferred = matrix.values[~mask, j]
        if len(preferred) < 2 or len(dispreferred) < 2:
            raise DegenerateGroup(f"metric {name}: both groups need >= 2 samples")
        if np.array_equal(np.sort(preferred), np.sort(dispreferred)):
            t, p = 0.0, 1.0
        else:
            t, p = stats.ttest_ind(preferred, dispreferred, equal_var=False)
            t, p = float(t), float(p)
        if p >= alpha:
            direction = "n.s."
        elif t > 0:
            direction = "preferred_higher"
        else:
            direction = "preferred_lower"
        results[name] = {"t": t, "p": p, "direction": direction}
    return results
