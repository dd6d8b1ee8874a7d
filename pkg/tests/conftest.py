from __future__ import annotations

import itertools
import random

import pytest

from poolrank.core import (
    ContinuationSignal,
    DialogueState,
    ResponseCandidate,
    ResponsePool,
    RGDescriptor,
    RGType,
    Speaker,
    Turn,
    build_pool,
    make_candidate,
)

_counter = itertools.count()


def rg(name="music_flow", rg_type=RGType.FLOW, topic="music") -> RGDescriptor:
    return RGDescriptor(name=name, rg_type=rg_type, topic=topic)


def turns(n=2, start_speaker=Speaker.SYSTEM) -> list[Turn]:
    out = []
    speaker = start_speaker
    for i in range(n):
        out.append(
            Turn(
                speaker=speaker,
                text=f"utterance number {i}",
                turn_index=i,
                rg=rg() if speaker is Speaker.SYSTEM else None,
            )
        )
        speaker = Speaker.USER if speaker is Speaker.SYSTEM else Speaker.SYSTEM
    return out


def state(
    current_topic="music",
    last_rg=None,
    continuation_signal=ContinuationSignal.NONE,
    **kw,
) -> DialogueState:
    return DialogueState(
        current_topic=current_topic,
        last_rg=last_rg,
        continuation_signal=continuation_signal,
        **kw,
    )


def candidate(text=None, the_rg=None, signal=ContinuationSignal.NONE) -> ResponseCandidate:
    if text is None:
        text = f"candidate text {next(_counter)}"
    return make_candidate(text, the_rg or rg(), signal)


def pool(
    n_candidates=3,
    the_state=None,
    candidates=None,
    context=None,
    **kw,
) -> ResponsePool:
    cands = candidates if candidates is not None else [candidate() for _ in range(n_candidates)]
    return build_pool(
        context=context or turns(2),
        state=the_state or state(),
        candidates=cands,
        **kw,
    )


@pytest.fixture
def seeded_rng():
    return random.Random(1234)
