"""
How the heuristic ranker arbitrates between response generators
================================================================

The heuristic encodes the dialogue manager's old hand rules as a tier
lattice: keep a generator that must continue, prefer one that can, fall
back to on-topic generators in a fixed type order, and only then accept
an off-topic response.

Run with: python3 demos/02_heuristic_ranking.py
"""
from poolrank import (
    ContinuationSignal,
    RGDescriptor,
    RGType,
    Speaker,
    Turn,
    build_pool,
    heuristic_rank,
    make_candidate,
)
from poolrank.core import DialogueState

MUSIC_FLOW = RGDescriptor("music_flow", RGType.FLOW, "music")
MUSIC_KG = RGDescriptor("music_kg", RGType.KG, "music")
CENTER_MUSIC = RGDescriptor("center_music", RGType.CENTER_TRIVIA, "music")
MOVIES_KG = RGDescriptor("movies_kg", RGType.KG, "movies")

CONTEXT = [
    Turn(Speaker.SYSTEM, "Did you know Prince played 27 instruments?", 0, rg=MUSIC_FLOW),
    Turn(Speaker.USER, "wow, tell me more about prince", 1),
]

CANDIDATES = [
    make_candidate("Speaking of movies, have you seen Purple Rain?", MOVIES_KG),
    make_candidate("Here's some music trivia for you!", CENTER_MUSIC),
    make_candidate("Prince wrote his first song at age seven.", MUSIC_FLOW),
    make_candidate("Prince was born in Minneapolis in 1958.", MUSIC_KG),
]


def show(title, state):
    pool = build_pool(CONTEXT, state, CANDIDATES)
    ranked = heuristic_rank(pool)
    print(f"\n{title}")
    for i, cid in enumerate(ranked.ordered_ids, start=1):
        print(f"  {i}. {pool.get_candidate(cid).text}")


# With MUST_CONTINUE the in-flight flow generator is untouchable: whatever
# else is in the pool, its continuation wins.
show(
    "last RG must continue:",
    DialogueState(
        current_topic="music",
        last_rg=MUSIC_FLOW,
        continuation_signal=ContinuationSignal.MUST_CONTINUE,
    ),
)

# Once the flow has ended the same candidate drops into the on-topic tier,
# where the generator-type fallback order (FLOW > KG > trivia > ...) decides.
show(
    "last RG ended:",
    DialogueState(
        current_topic="music",
        last_rg=MUSIC_FLOW,
        continuation_signal=ContinuationSignal.ENDED,
    ),
)

# With no last generator at all, topic match is the only signal left and the
# off-topic movie pitch lands last.
show("fresh topic, no last RG:", DialogueState(current_topic="music"))
