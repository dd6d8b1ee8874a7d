"""Common ranker surface: every ranker maps a pool to an ordered RankedPool."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Protocol, Sequence

from .core import ResponsePool


@dataclass(frozen=True)
class RankedPool:
    """A total order over one pool's candidates, best first.

    Scores, when present, are aligned with ``ordered_ids`` and nonincreasing.
    """

    pool_id: str
    ordered_ids: tuple[str, ...]
    scores: Optional[tuple[float, ...]] = None

    def __post_init__(self) -> None:
        if self.scores is not None:
            if len(self.scores) != len(self.ordered_ids):
                raise ValueError("scores must align with ordered_ids")
            for a, b in zip(self.scores, self.scores[1:]):
                if b > a:
                    raise ValueError("scores must be nonincreasing along the order")

    @property
    def top(self) -> str:
        return self.ordered_ids[0]


class Ranker(Protocol):
    name: str

    def rank(self, pool: ResponsePool) -> RankedPool:
        ...


@dataclass
class FunctionRanker:
    """Adapter turning a plain function into a named Ranker."""

    name: str
    fn: Callable[[ResponsePool], RankedPool]

    def rank(self, pool: ResponsePool) -> RankedPool:
        return self.fn(pool)


def ranked_from_scores(
    pool: ResponsePool, scores: Sequence[float]
) -> RankedPool:
    """Order candidates by score descending, ties broken by input position."""
    order = sorted(
        range(len(pool.candidates)), key=lambda i: (-scores[i], i)
    )
    return RankedPool(
        pool_id=pool.pool_id,
        ordered_ids=tuple(pool.candidates[i].candidate_id for i in order),
        scores=tuple(scores[i] for i in order),
    )
