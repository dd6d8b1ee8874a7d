"""Canonical data model: conversations, dialogue state, candidate pools, annotations.

Every other module consumes these types. All values are immutable after
construction and safe to share across threads.
"""
from __future__ import annotations

import hashlib
import json
import uuid
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from enum import Enum
from typing import Iterable, Iterator, Optional, TextIO

from .errors import (
    DuplicateId,
    EmptyContext,
    EmptyPool,
    InvalidGrades,
    MismatchedPool,
    MissingState,
    UnknownCandidate,
)

SCHEMA_VERSION = 1


class Speaker(Enum):
    SYSTEM = "SYSTEM"
    USER = "USER"


class RGType(Enum):
    FLOW = "FLOW"
    KG = "KG"
    CENTER_TRIVIA = "CENTER_TRIVIA"
    QA = "QA"
    NRG = "NRG"
    INTRO = "INTRO"
    OTHER = "OTHER"


class ContinuationSignal(Enum):
    MUST_CONTINUE = "MUST_CONTINUE"
    CAN_CONTINUE = "CAN_CONTINUE"
    ENDED = "ENDED"
    NONE = "NONE"


class Grade(Enum):
    A = "A"
    B = "B"
    C = "C"
    D = "D"


class Label(Enum):
    POSITIVE = "POSITIVE"
    NEGATIVE = "NEGATIVE"


@dataclass(frozen=True)
class RGDescriptor:
    """Identity of a response generator: unique name, type, and home topic."""

    name: str
    rg_type: RGType
    topic: str


@dataclass(frozen=True)
class Turn:
    speaker: Speaker
    text: str
    turn_index: int
    rg: Optional[RGDescriptor] = None

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise ValueError("turn text must be nonempty after trimming")
        if self.speaker is Speaker.USER and self.rg is not None:
            raise ValueError("USER turns carry no response generator")
        if self.turn_index < 0:
            raise ValueError("turn_index must be nonnegative")


@dataclass(frozen=True)
class DialogueState:
    """The dialogue manager's summary of where the conversation stands."""

    current_topic: str
    previous_topic: Optional[str] = None
    system_turn_count: int = 0
    last_rg: Optional[RGDescriptor] = None
    continuation_signal: ContinuationSignal = ContinuationSignal.NONE
    user_utterance_is_question: bool = False

    def __post_init__(self) -> None:
        if self.last_rg is None and self.continuation_signal is not ContinuationSignal.NONE:
            raise ValueError("continuation_signal must be NONE when last_rg is absent")
        if self.last_rg is not None and self.continuation_signal is ContinuationSignal.NONE:
            raise MissingState("last_rg present but continuation_signal is NONE")


def candidate_id_for(text: str, rg_name: str) -> str:
    """Content hash of (text, rg name), stable across pools.

    Repeated candidates keep the same id everywhere, which is what the
    negative-frequency cap keys on.
    """
    digest = hashlib.sha1(f"{rg_name}\x00{text}".encode("utf-8")).hexdigest()
    return digest[:16]


@dataclass(frozen=True)
class ResponseCandidate:
    candidate_id: str
    text: str
    rg: RGDescriptor
    continuation_signal: ContinuationSignal = ContinuationSignal.NONE

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise ValueError("candidate text must be nonempty")


def make_candidate(
    text: str,
    rg: RGDescriptor,
    continuation_signal: ContinuationSignal = ContinuationSignal.NONE,
) -> ResponseCandidate:
    """Build a candidate with its content-hash id."""
    return ResponseCandidate(
        candidate_id=candidate_id_for(text, rg.name),
        text=text,
        rg=rg,
        continuation_signal=continuation_signal,
    )


@dataclass(frozen=True)
class ResponsePool:
    """All candidates competing for one system turn, with their context."""

    pool_id: str
    context: tuple[Turn, ...]
    state: DialogueState
    candidates: tuple[ResponseCandidate, ...]
    conversation_rating: Optional[int] = None
    conversation_id: Optional[str] = None

    def __post_init__(self) -> None:
        if not self.candidates:
            raise EmptyPool("pool must contain at least one candidate")
        if not self.context:
            raise EmptyContext("pool must carry at least one context turn")
        if self.conversation_rating is not None and not 1 <= self.conversation_rating <= 5:
            raise ValueError("conversation_rating must be in [1, 5]")
        seen: set[str] = set()
        for c in self.candidates:
            if c.candidate_id in seen:
                raise DuplicateId(f"duplicate candidate_id {c.candidate_id!r}")
            seen.add(c.candidate_id)

    def candidate_ids(self) -> list[str]:
        return [c.candidate_id for c in self.candidates]

    def get_candidate(self, candidate_id: str) -> ResponseCandidate:
        for c in self.candidates:
            if c.candidate_id == candidate_id:
                return c
        raise UnknownCandidate(candidate_id)


@dataclass(frozen=True)
class AnnotationRecord:
    """One human judgment over a pool: per-candidate grades or none-of-the-above."""

    pool_id: str
    grades: dict[str, Grade]
    none_of_the_above: bool
    annotator_id: str
    timestamp: datetime = field(default_factory=lambda: datetime.now(timezone.utc))

    def __post_init__(self) -> None:
        if self.none_of_the_above and any(g is Grade.A for g in self.grades.values()):
            raise InvalidGrades("none_of_the_above excludes any A grade")


@dataclass(frozen=True)
class LabeledExample:
    """One (context, candidate) training instance derived from an annotation."""

    context: tuple[Turn, ...]
    state: DialogueState
    candidate: ResponseCandidate
    label: Label
    pool_id: str = ""


@dataclass(frozen=True)
class LabelPolicy:
    """Which grades count as a selected (positive) response.

    Default: only A. Legacy single-select annotations are stored as A
    upstream, so they pass under any policy that includes A.
    """

    positive_grades: frozenset[Grade] = frozenset({Grade.A})


DEFAULT_POLICY = LabelPolicy()


def build_pool(
    context: Iterable[Turn],
    state: DialogueState,
    candidates: Iterable[ResponseCandidate],
    conversation_rating: Optional[int] = None,
    conversation_id: Optional[str] = None,
) -> ResponsePool:
    """Assemble a pool with a fresh pool_id, preserving candidate order."""
    return ResponsePool(
        pool_id=uuid.uuid4().hex,
        context=tuple(context),
        state=state,
        candidates=tuple(candidates),
        conversation_rating=conversation_rating,
        conversation_id=conversation_id,
    )


def _check_annotation(pool: ResponsePool, ann: AnnotationRecord) -> None:
    if ann.pool_id != pool.pool_id:
        raise MismatchedPool(f"annotation for {ann.pool_id!r}, pool is {pool.pool_id!r}")
    known = set(pool.candidate_ids())
    for cid in ann.grades:
        if cid not in known:
            raise UnknownCandidate(cid)


def derive_labels(
    pool: ResponsePool,
    ann: AnnotationRecord,
    policy: LabelPolicy = DEFAULT_POLICY,
) -> list[LabeledExample]:
    """One labeled example per candidate; positive iff its grade passes the policy.

    A none-of-the-above annotation makes every candidate negative.
    """
    _check_annotation(pool, ann)
    examples = []
    for cand in pool.candidates:
        grade = ann.grades.get(cand.candidate_id)
        positive = (
            not ann.none_of_the_above
            and grade is not None
            and grade in policy.positive_grades
        )
        examples.append(
            LabeledExample(
                context=pool.context,
                state=pool.state,
                candidate=cand,
                label=Label.POSITIVE if positive else Label.NEGATIVE,
                pool_id=pool.pool_id,
            )
        )
    return examples


def preferred_set(
    pool: ResponsePool,
    ann: AnnotationRecord,
    policy: LabelPolicy = DEFAULT_POLICY,
) -> set[str]:
    """Candidate ids a human graded as selectable. May be empty."""
    return {
        ex.candidate.candidate_id
        for ex in derive_labels(pool, ann, policy)
        if ex.label is Label.POSITIVE
    }


# ---------------------------------------------------------------------------
# Line-delimited JSON serialization (schema version 1)
# ---------------------------------------------------------------------------

def _rg_to_dict(rg: RGDescriptor) -> dict:
    return {"name": rg.name, "rg_type": rg.rg_type.value, "topic": rg.topic}


def _rg_from_dict(d: dict) -> RGDescriptor:
    return RGDescriptor(name=d["name"], rg_type=RGType(d["rg_type"]), topic=d["topic"])


def _turn_to_dict(t: Turn) -> dict:
    out = {"speaker": t.speaker.value, "text": t.text, "turn_index": t.turn_index}
    if t.rg is not None:
        out["rg_id"] = _rg_to_dict(t.rg)
    return out


def _turn_from_dict(d: dict) -> Turn:
    rg = _rg_from_dict(d["rg_id"]) if d.get("rg_id") else None
    return Turn(
        speaker=Speaker(d["speaker"]),
        text=d["text"],
        turn_index=d["turn_index"],
        rg=rg,
    )


def _state_to_dict(s: DialogueState) -> dict:
    return {
        "current_topic": s.current_topic,
        "previous_topic": s.previous_topic,
        "system_turn_count": s.system_turn_count,
        "last_rg": _rg_to_dict(s.last_rg) if s.last_rg else None,
        "continuation_signal": s.continuation_signal.value,
        "user_utterance_is_question": s.user_utterance_is_question,
    }


def _state_from_dict(d: dict) -> DialogueState:
    return DialogueState(
        current_topic=d["current_topic"],
        previous_topic=d.get("previous_topic"),
        system_turn_count=d.get("system_turn_count", 0),
        last_rg=_rg_from_dict(d["last_rg"]) if d.get("last_rg") else None,
        continuation_signal=ContinuationSignal(d["continuation_signal"]),
        user_utterance_is_question=d.get("user_utterance_is_question", False),
    )


def _candidate_to_dict(c: ResponseCandidate) -> dict:
    return {
        "candidate_id": c.candidate_id,
        "text": c.text,
        "rg": _rg_to_dict(c.rg),
        "continuation_signal": c.continuation_signal.value,
    }


def _candidate_from_dict(d: dict) -> ResponseCandidate:
    return ResponseCandidate(
        candidate_id=d["candidate_id"],
        text=d["text"],
        rg=_rg_from_dict(d["rg"]),
        continuation_signal=ContinuationSignal(d["continuation_signal"]),
    )


def pool_to_dict(pool: ResponsePool) -> dict:
    return {
        "v": SCHEMA_VERSION,
        "pool_id": pool.pool_id,
        "context": [_turn_to_dict(t) for t in pool.context],
        "state": _state_to_dict(pool.state),
        "candidates": [_candidate_to_dict(c) for c in pool.candidates],
        "conversation_rating": pool.conversation_rating,
        "conversation_id": pool.conversation_id,
    }


def pool_from_dict(d: dict) -> ResponsePool:
    return ResponsePool(
        pool_id=d["pool_id"],
        context=tuple(_turn_from_dict(t) for t in d["context"]),
        state=_state_from_dict(d["state"]),
        candidates=tuple(_candidate_from_dict(c) for c in d["candidates"]),
        conversation_rating=d.get("conversation_rating"),
        conversation_id=d.get("conversation_id"),
    )


def annotation_to_dict(ann: AnnotationRecord) -> dict:
    return {
        "v": SCHEMA_VERSION,
        "pool_id": ann.pool_id,
        "grades": {cid: g.value for cid, g in ann.grades.items()},
        "none_of_the_above": ann.none_of_the_above,
        "annotator_id": ann.annotator_id,
        "timestamp": ann.timestamp.isoformat(),
    }


def annotation_from_dict(d: dict) -> AnnotationRecord:
    # Accept the RFC 3339 "Z" suffix that JavaScript clients emit.
    timestamp = d["timestamp"].replace("Z", "+00:00")
    return AnnotationRecord(
        pool_id=d["pool_id"],
        grades={cid: Grade(g) for cid, g in d["grades"].items()},
        none_of_the_above=d["none_of_the_above"],
        annotator_id=d["annotator_id"],
        timestamp=datetime.fromisoformat(timestamp),
    )


def labeled_to_dict(ex: LabeledExample) -> dict:
    return {
        "v": SCHEMA_VERSION,
        "context": [_turn_to_dict(t) for t in ex.context],
        "state": _state_to_dict(ex.state),
        "candidate": _candidate_to_dict(ex.candidate),
        "label": ex.label.value,
        "pool_id": ex.pool_id,
    }


def labeled_from_dict(d: dict) -> LabeledExample:
    return LabeledExample(
        context=tuple(_turn_from_dict(t) for t in d["context"]),
        state=_state_from_dict(d["state"]),
        candidate=_candidate_from_dict(d["candidate"]),
        label=Label(d["label"]),
        pool_id=d.get("pool_id", ""),
    )


def write_pools(pools: Iterable[ResponsePool], fh: TextIO) -> None:
    for pool in pools:
        fh.write(json.dumps(pool_to_dict(pool), ensure_ascii=False) + "\n")


def read_pools(fh: TextIO) -> Iterator[ResponsePool]:
    for line in fh:
        if line.strip():
            yield pool_from_dict(json.loads(line))


def write_annotations(anns: Iterable[AnnotationRecord], fh: TextIO) -> None:
    for ann in anns:
        fh.write(json.dumps(annotation_to_dict(ann), ensure_ascii=False) + "\n")


def read_annotations(fh: TextIO) -> Iterator[AnnotationRecord]:
    for line in fh:
        if line.strip():
            yield annotation_from_dict(json.loads(line))


def with_pool_id(pool: ResponsePool, pool_id: str) -> ResponsePool:
    return replace(pool, pool_id=pool_id)
