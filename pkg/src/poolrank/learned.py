"""Trained next-utterance classifier over (context, state, candidate) inputs.

The input encoding is the contract here: a classification marker, dialogue
state tokens, the last four turns separated by [SEP] with speaker-aware
segment ids, the candidate's RG token, then the candidate text. The encoder
behind it is swappable; the bundled one is a small bidirectional transformer
trained from scratch, which is enough for desk-scale experiments.
"""
from __future__ import annotations

import hashlib
import json
import math
import random
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import torch
import torch.nn as nn
import torch.nn.functional as F

from .core import (
    DialogueState,
    Label,
    LabeledExample,
    ResponseCandidate,
    ResponsePool,
    Speaker,
    Turn,
)
from .errors import CorpusMissing, DivergenceDetected, OverflowAfterTruncation
from .ranking import RankedPool, ranked_from_scores

PAD, CLS, SEP, UNK_WORD, UNK_STATE = 0, 1, 2, 3, 4
N_RESERVED = 5

SEG_STATE, SEG_SYSTEM, SEG_USER, SEG_CANDIDATE = 0, 1, 2, 3
N_SEGMENTS = 4

MAX_HISTORY_TURNS = 4


def tokenize(text: str) -> list[str]:
    return text.lower().split()


@dataclass(frozen=True)
class EncodedInput:
    token_ids: tuple[int, ...]
    segment_ids: tuple[int, ...]
    attention_mask: tuple[bool, ...]

    def __post_init__(self) -> None:
        if not (len(self.token_ids) == len(self.segment_ids) == len(self.attention_mask)):
            raise ValueError("token/segment/mask lengths must agree")


class StateTokenScheme:
    """Vocabulary: reserved markers, per-topic and per-RG state tokens, words.

    Unknown topics and RG names map to the reserved UNK-state token, so a
    trained model never sees an out-of-vocabulary id.
    """

    def __init__(
        self,
        topics: Sequence[str],
        rg_names: Sequence[str],
        words: Sequence[str],
        max_len: int = 256,
    ):
        self.topics = tuple(topics)
        self.rg_names = tuple(rg_names)
        self.words = tuple(words)
        self.max_len = max_len

        base = N_RESERVED
        self.current_topic_ids = {t: base + i for i, t in enumerate(self.topics)}
        base += len(self.topics)
        self.previous_topic_ids = {t: base + i for i, t in enumerate(self.topics)}
        base += len(self.topics)
        self.rg_ids = {n: base + i for i, n in enumerate(self.rg_names)}
        base += len(self.rg_names)
        self.word_ids = {w: base + i for i, w in enumerate(self.words)}
        self.vocab_size = base + len(self.words)

    @classmethod
    def build(
        cls,
        topics: Iterable[str],
        rg_names: Iterable[str],
        texts: Iterable[str],
        max_len: int = 256,
    ) -> "StateTokenScheme":
        words = sorted({w for text in texts for w in tokenize(text)})
        return cls(sorted(set(topics)), sorted(set(rg_names)), words, max_len)

    def word_id(self, word: str) -> int:
        return self.word_ids.get(word, UNK_WORD)

    def current_topic_id(self, topic: Optional[str]) -> int:
        if topic is None:
            return UNK_STATE
        return self.current_topic_ids.get(topic, UNK_STATE)

    def previous_topic_id(self, topic: Optional[str]) -> int:
        if topic is None:
            return UNK_STATE
        return self.previous_topic_ids.get(topic, UNK_STATE)

    def rg_id(self, name: str) -> int:
        return self.rg_ids.get(name, UNK_STATE)

    def to_dict(self) -> dict:
        return {
            "topics": list(self.topics),
            "rg_names": list(self.rg_names),
            "words": list(self.words),
            "max_len": self.max_len,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StateTokenScheme":
        return cls(d["topics"], d["rg_names"], d["words"], d["max_len"])


def encode(
    context: Sequence[Turn],
    state: DialogueState,
    candidate: ResponseCandidate,
    scheme: StateTokenScheme,
) -> EncodedInput:
    """Build the model input for one candidate.

    Layout: [CLS] cur-topic prev-topic turn tokens with [SEP] after each of
    the last four turns, then the candidate's RG token, candidate tokens, and
    a closing [SEP]. When the sequence exceeds the budget, context tokens are
    dropped oldest-first; the candidate region is never truncated.
    """
    history = list(context)[-MAX_HISTORY_TURNS:]

    head = [
        (CLS, SEG_STATE),
        (scheme.current_topic_id(state.current_topic), SEG_STATE),
        (scheme.previous_topic_id(state.previous_topic), SEG_STATE),
    ]
    tail = [(scheme.rg_id(candidate.rg.name), SEG_CANDIDATE)]
    tail += [(scheme.word_id(w), SEG_CANDIDATE) for w in tokenize(candidate.text)]
    tail += [(SEP, SEG_CANDIDATE)]

    body: list[tuple[int, int]] = []
    for turn in history:
        seg = SEG_SYSTEM if turn.speaker is Speaker.SYSTEM else SEG_USER
        body += [(scheme.word_id(w), seg) for w in tokenize(turn.text)]
        body += [(SEP, seg)]

    budget = scheme.max_len - len(head) - len(tail)
    if budget < 0:
        raise OverflowAfterTruncation(
            f"candidate needs {len(head) + len(tail)} tokens, budget is {scheme.max_len}"
        )
    if len(body) > budget:
        body = body[len(body) - budget :]

    pairs = head + body + tail
    token_ids = tuple(t for t, _ in pairs)
    segment_ids = tuple(s for _, s in pairs)
    return EncodedInput(
        token_ids=token_ids,
        segment_ids=segment_ids,
        attention_mask=tuple(True for _ in pairs),
    )


class TinyEncoder(nn.Module):
    """Small bidirectional transformer with a two-way classification head."""

    def __init__(
        self,
        vocab_size: int,
        max_len: int,
        d_model: int = 64,
        n_heads: int = 4,
        n_layers: int = 2,
        dropout: float = 0.1,
    ):
        super().__init__()
        self.token_emb = nn.Embedding(vocab_size, d_model, padding_idx=PAD)
        self.segment_emb = nn.Embedding(N_SEGMENTS, d_model)
        self.position_emb = nn.Embedding(max_len, d_model)
        layer = nn.TransformerEncoderLayer(
            d_model=d_model,
            nhead=n_heads,
            dim_feedforward=4 * d_model,
            dropout=dropout,
            batch_first=True,
        )
        self.encoder = nn.TransformerEncoder(layer, num_layers=n_layers)
        self.classifier = nn.Linear(d_model, 2)

    def forward(
        self,
        token_ids: torch.Tensor,
        segment_ids: torch.Tensor,
        attention_mask: torch.Tensor,
    ) -> torch.Tensor:
        positions = torch.arange(token_ids.shape[1], device=token_ids.device)
        x = (
            self.token_emb(token_ids)
            + self.segment_emb(segment_ids)
            + self.position_emb(positions)[None, :, :]
        )
        x = self.encoder(x, src_key_padding_mask=~attention_mask)
        return self.classifier(x[:, 0, :])


@dataclass(frozen=True)
class TrainConfig:
    pretrain_corpus: Optional[str] = None
    fine_tune_corpus: Optional[str] = None
    negative_sampling: str = "RANDOM"
    epochs: int = 10
    batch_size: int = 32
    learning_rate: float = 1e-3
    seed: int = 0
    eval_ratio: float = 0.10
    d_model: int = 64
    n_heads: int = 4
    n_layers: int = 2

    def __post_init__(self) -> None:
        if not 0.0 < self.eval_ratio < 1.0:
            raise ValueError("eval_ratio must lie in (0, 1)")

    def config_hash(self) -> str:
        payload = json.dumps(
            {k: getattr(self, k) for k in (
                "negative_sampling", "epochs", "batch_size", "learning_rate",
                "seed", "eval_ratio", "d_model", "n_heads", "n_layers",
            )},
            sort_keys=True,
        )
        return hashlib.sha1(payload.encode()).hexdigest()[:12]


class ModelHandle:
    """Trained scorer: encoded input in, positive-class log-likelihood out."""

    def __init__(
        self,
        model: TinyEncoder,
        scheme: StateTokenScheme,
        cfg: TrainConfig,
        checkpoint_id: Optional[str] = None,
        validation_accuracy: Optional[float] = None,
    ):
        self.model = model
        self.scheme = scheme
        self.cfg = cfg
        self.checkpoint_id = checkpoint_id or uuid.uuid4().hex[:12]
        self.validation_accuracy = validation_accuracy
        self.model.eval()

    def score(self, encoded: EncodedInput) -> float:
        return self.score_batch([encoded])[0]

    @torch.no_grad()
    def score_batch(self, batch: Sequence[EncodedInput]) -> list[float]:
        self.model.eval()
        tokens, segments, mask = _collate(batch)
        logits = self.model(tokens, segments, mask)
        return F.log_softmax(logits, dim=-1)[:, 1].tolist()

    def save(self, directory: str | Path) -> None:
        path = Path(directory)
        path.mkdir(parents=True, exist_ok=True)
        torch.save(self.model.state_dict(), path / "model.pt")
        (path / "scheme.json").write_text(json.dumps(self.scheme.to_dict()), "utf-8")
        meta = {
            "config_hash": self.cfg.config_hash(),
            "checkpoint_id": self.checkpoint_id,
            "validation_accuracy": self.validation_accuracy,
            "config": {
                "d_model": self.cfg.d_model,
                "n_heads": self.cfg.n_heads,
                "n_layers": self.cfg.n_layers,
            },
        }
        (path / "meta.json").write_text(json.dumps(meta), "utf-8")

    @classmethod
    def load(cls, directory: str | Path) -> "ModelHandle":
        path = Path(directory)
        scheme = StateTokenScheme.from_dict(
            json.loads((path / "scheme.json").read_text("utf-8"))
        )
        meta = json.loads((path / "meta.json").read_text("utf-8"))
        cfg = TrainConfig(
            d_model=meta["config"]["d_model"],
            n_heads=meta["config"]["n_heads"],
            n_layers=meta["config"]["n_layers"],
        )
        model = TinyEncoder(
            scheme.vocab_size, scheme.max_len,
            d_model=cfg.d_model, n_heads=cfg.n_heads, n_layers=cfg.n_layers,
        )
        model.load_state_dict(torch.load(path / "model.pt", weights_only=True))
        return cls(
            model,
            scheme,
            cfg,
            checkpoint_id=meta["checkpoint_id"],
            validation_accuracy=meta.get("validation_accuracy"),
        )


def _collate(
    batch: Sequence[EncodedInput],
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    width = max(len(e.token_ids) for e in batch)
    tokens = torch.full((len(batch), width), PAD, dtype=torch.long)
    segments = torch.zeros((len(batch), width), dtype=torch.long)
    mask = torch.zeros((len(batch), width), dtype=torch.bool)
    for i, enc in enumerate(batch):
        n = len(enc.token_ids)
        tokens[i, :n] = torch.tensor(enc.token_ids, dtype=torch.long)
        segments[i, :n] = torch.tensor(enc.segment_ids, dtype=torch.long)
        mask[i, :n] = True
    return tokens, segments, mask


PretrainPair = tuple[Sequence[Turn], DialogueState, ResponseCandidate]


def _train_loop(
    model: TinyEncoder,
    make_epoch: "callable",
    eval_set: list[tuple[EncodedInput, int]],
    cfg: TrainConfig,
) -> tuple[dict, Optional[float]]:
    """Run epochs, return (best state_dict, best validation accuracy)."""
    opt = torch.optim.Adam(model.parameters(), lr=cfg.learning_rate)
    best_state = {k: v.clone() for k, v in model.state_dict().items()}
    best_acc: Optional[float] = None
    rng = random.Random(cfg.seed)
    for epoch in range(cfg.epochs):
        examples = make_epoch(rng)
        rng.shuffle(examples)
        model.train()
        for start in range(0, len(examples), cfg.batch_size):
            chunk = examples[start : start + cfg.batch_size]
            tokens, segments, mask = _collate([e for e, _ in chunk])
            labels = torch.tensor([y for _, y in chunk], dtype=torch.long)
            logits = model(tokens, segments, mask)
            loss = F.cross_entropy(logits, labels)
            if torch.isnan(loss):
                raise DivergenceDetected(f"loss is NaN at epoch {epoch}")
            opt.zero_grad()
            loss.backward()
            opt.step()
        acc = _accuracy(model, eval_set, cfg.batch_size)
        if best_acc is None or acc > best_acc:
            best_acc = acc
            best_state = {k: v.clone() for k, v in model.state_dict().items()}
    return best_state, best_acc


@torch.no_grad()
def _accuracy(
    model: TinyEncoder, eval_set: list[tuple[EncodedInput, int]], batch_size: int
) -> float:
    if not eval_set:
        return 0.0
    model.eval()
    hits = 0
    for start in range(0, len(eval_set), batch_size):
        chunk = eval_set[start : start + batch_size]
        tokens, segments, mask = _collate([e for e, _ in chunk])
        labels = torch.tensor([y for _, y in chunk], dtype=torch.long)
        preds = model(tokens, segments, mask).argmax(dim=-1)
        hits += int((preds == labels).sum())
    return hits / len(eval_set)


def pretrain(
    pairs: Sequence[PretrainPair],
    scheme: StateTokenScheme,
    cfg: TrainConfig,
) -> ModelHandle:
    """Train a fresh classifier on (context, true next utterance) pairs.

    Each positive gets one random in-corpus negative, resampled every epoch.
    The checkpoint with the best validation accuracy wins. Zero epochs
    returns an initialized-only handle.
    """
    if not pairs:
        raise CorpusMissing("pretraining corpus is empty")
    torch.manual_seed(cfg.seed)
    model = TinyEncoder(
        scheme.vocab_size, scheme.max_len,
        d_model=cfg.d_model, n_heads=cfg.n_heads, n_layers=cfg.n_layers,
    )
    split_rng = random.Random(cfg.seed)
    indices = list(range(len(pairs)))
    split_rng.shuffle(indices)
    n_eval = max(1, int(len(pairs) * cfg.eval_ratio))
    eval_idx = set(indices[:n_eval])

    all_candidates = [p[2] for p in pairs]

    def pair_examples(
        subset: Iterable[int], rng: random.Random
    ) -> list[tuple[EncodedInput, int]]:
        out = []
        for i in subset:
            context, state, candidate = pairs[i]
            out.append((encode(context, state, candidate, scheme), 1))
            negative = candidate
            while negative.text == candidate.text:
                negative = all_candidates[rng.randrange(len(all_candidates))]
            out.append((encode(context, state, negative, scheme), 0))
        return out

    eval_rng = random.Random(cfg.seed + 1)
    eval_set = pair_examples(sorted(eval_idx), eval_rng)
    train_idx = [i for i in indices if i not in eval_idx]

    if cfg.epochs == 0:
        return ModelHandle(model, scheme, cfg, validation_accuracy=None)

    best_state, best_acc = _train_loop(
        model, lambda rng: pair_examples(train_idx, rng), eval_set, cfg
    )
    model.load_state_dict(best_state)
    return ModelHandle(model, scheme, cfg, validation_accuracy=best_acc)


def fine_tune(
    handle: ModelHandle,
    examples: Sequence[LabeledExample],
    cfg: TrainConfig,
) -> ModelHandle:
    """Continue training on annotated labeled examples. Empty input is a no-op."""
    if not examples:
        return handle
    torch.manual_seed(cfg.seed)
    scheme = handle.scheme
    encoded = [
        (
            encode(ex.context, ex.state, ex.candidate, scheme),
            1 if ex.label is Label.POSITIVE else 0,
        )
        for ex in examples
    ]
    split_rng = random.Random(cfg.seed)
    split_rng.shuffle(encoded)
    n_eval = max(1, int(len(encoded) * cfg.eval_ratio))
    eval_set, train_set = encoded[:n_eval], encoded[n_eval:]

    model = TinyEncoder(
        scheme.vocab_size, scheme.max_len,
        d_model=handle.cfg.d_model, n_heads=handle.cfg.n_heads, n_layers=handle.cfg.n_layers,
    )
    model.load_state_dict(handle.model.state_dict())
    best_state, best_acc = _train_loop(
        model, lambda rng: list(train_set), eval_set, cfg
    )
    model.load_state_dict(best_state)
    return ModelHandle(model, scheme, cfg, validation_accuracy=best_acc)


def learned_rank(
    handle: ModelHandle, pool: ResponsePool, scheme: Optional[StateTokenScheme] = None
) -> RankedPool:
    """Score candidates independently, rank by positive log-likelihood."""
    scheme = scheme or handle.scheme
    encoded = [encode(pool.context, pool.state, c, scheme) for c in pool.candidates]
    scores = handle.score_batch(encoded)
    return ranked_from_scores(pool, scores)


class LearnedRanker:
    """Ranker-interface wrapper around a trained handle."""

    def __init__(self, handle: ModelHandle, name: str = "learned"):
        self.name = name
        self.handle = handle

    def rank(self, pool: ResponsePool) -> RankedPool:
        return learned_rank(self.handle, pool)
