"""Rule-based ranker: stay with the RG in control, then stay on topic.

Candidates fall into four tiers driven by the dialogue state:

  1. candidate from the last-turn RG while that RG must continue
  2. candidate from the last-turn RG while it can continue
  3. other candidates on the current topic (including the last RG's
     candidates once it has ended), ordered by the RG-type fallback order
  4. off-topic candidates, same fallback order

Ties inside a tier keep input order, which makes reruns byte-identical.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .core import ContinuationSignal, ResponseCandidate, ResponsePool, RGType
from .errors import MissingState
from .ranking import RankedPool

DEFAULT_FALLBACK_ORDER = (
    RGType.FLOW,
    RGType.KG,
    RGType.CENTER_TRIVIA,
    RGType.QA,
    RGType.NRG,
    RGType.INTRO,
    RGType.OTHER,
)


@dataclass(frozen=True)
class HeuristicConfig:
    rg_type_fallback_order: tuple[RGType, ...] = DEFAULT_FALLBACK_ORDER
    obey_must_continue: bool = True

    def __post_init__(self) -> None:
        missing = set(RGType) - set(self.rg_type_fallback_order)
        if missing:
            raise ValueError(f"fallback order missing rg_types: {sorted(t.value for t in missing)}")


DEFAULT_HEURISTIC_CONFIG = HeuristicConfig()


def candidate_tier(
    candidate: ResponseCandidate,
    pool: ResponsePool,
    cfg: HeuristicConfig = DEFAULT_HEURISTIC_CONFIG,
) -> int:
    """Tier of one candidate, independent of the rest of the pool."""
    state = pool.state
    last = state.last_rg
    if last is not None and state.continuation_signal is ContinuationSignal.NONE:
        raise MissingState("last_rg set but continuation signal is NONE")
    signal = state.continuation_signal
    if not cfg.obey_must_continue and signal is ContinuationSignal.MUST_CONTINUE:
        signal = ContinuationSignal.CAN_CONTINUE

    if last is not None and candidate.rg.name == last.name:
        if signal is ContinuationSignal.MUST_CONTINUE:
            return 1
        if signal is ContinuationSignal.CAN_CONTINUE:
            return 2
        # ENDED: the last RG's candidates compete with the rest of the topic.
    if candidate.rg.topic == state.current_topic:
        return 3
    return 4


def heuristic_rank(
    pool: ResponsePool,
    cfg: HeuristicConfig = DEFAULT_HEURISTIC_CONFIG,
) -> RankedPool:
    """Order the pool by tier, then RG-type fallback, then input position."""
    fallback_index = {t: i for i, t in enumerate(cfg.rg_type_fallback_order)}

    def key(i: int) -> tuple[int, int, int]:
        cand = pool.candidates[i]
        tier = candidate_tier(cand, pool, cfg)
        fb = fallback_index[cand.rg.rg_type] if tier >= 3 else 0
        return (tier, fb, i)

    order = sorted(range(len(pool.candidates)), key=key)
    return RankedPool(
        pool_id=pool.pool_id,
        ordered_ids=tuple(pool.candidates[i].candidate_id for i in order),
    )


class HeuristicRanker:
    """Ranker-interface wrapper around heuristic_rank."""

    def __init__(self, cfg: HeuristicConfig = DEFAULT_HEURISTIC_CONFIG):
        self.name = "heuristic"
        self.cfg = cfg

    def rank(self, pool: ResponsePool) -> RankedPool:
        return heuristic_rank(pool, self.cfg)
