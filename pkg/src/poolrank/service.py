"""Runtime selection service: gating, ranking, pool logging, annotation queue.

The core decision logic (gating + ranker dispatch) is plain functions so it
can be tested without HTTP; ``create_app`` wraps it in a FastAPI JSON API:

  POST /v1/rank             rank a pool (or return a gate bypass)
  POST /v1/pools            log a pool for later annotation
  GET  /v1/annotation/next  lease the next pool for an annotator
  POST /v1/annotation       submit an annotation record
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Optional

from fastapi import FastAPI, Header, HTTPException, Request
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from .core import (
    AnnotationRecord,
    ResponsePool,
    annotation_from_dict,
    pool_from_dict,
)
from .errors import (
    InvalidGrades,
    LeaseExpired,
    PoolRankError,
    UnknownRanker,
)
from .heuristic import HeuristicRanker
from .ranking import RankedPool, Ranker
from .store import AnnotationQueue, PoolStore


class Gate(Enum):
    RANKED = "RANKED"
    BYPASS_TURN = "BYPASS_TURN"
    BYPASS_SINGLETON = "BYPASS_SINGLETON"
    BYPASS_FUNCTIONAL = "BYPASS_FUNCTIONAL"


@dataclass(frozen=True)
class GatingRules:
    min_system_turn: int = 4
    skip_singleton: bool = True
    functional_act_bypass: tuple[str, ...] = ("repeat_request", "content_deflection")

    def __post_init__(self) -> None:
        if self.min_system_turn < 1:
            raise ValueError("min_system_turn must be >= 1")


@dataclass(frozen=True)
class RankRequest:
    pool: ResponsePool
    ranker: str
    request_id: str
    dialogue_act: Optional[str] = None


@dataclass(frozen=True)
class RankDecision:
    request_id: str
    gate: Gate
    selected_candidate_id: str
    ranking: Optional[RankedPool]
    fallback_used: bool = False

    def to_dict(self) -> dict:
        out = {
            "request_id": self.request_id,
            "gate": self.gate.value,
            "selected_candidate_id": self.selected_candidate_id,
            "fallback_used": self.fallback_used,
        }
        if self.ranking is not None:
            out["ranking"] = list(self.ranking.ordered_ids)
            if self.ranking.scores is not None:
                out["scores"] = list(self.ranking.scores)
        return out


def check_gates(pool: ResponsePool, rules: GatingRules, dialogue_act: Optional[str]) -> Gate:
    """Gates fire in fixed order: turn count, singleton pool, functional act."""
    if pool.state.system_turn_count < rules.min_system_turn:
        return Gate.BYPASS_TURN
    if rules.skip_singleton and len(pool.candidates) == 1:
        return Gate.BYPASS_SINGLETON
    if dialogue_act is not None and dialogue_act in rules.functional_act_bypass:
        return Gate.BYPASS_FUNCTIONAL
    return Gate.RANKED


def handle_rank(
    req: RankRequest,
    rules: GatingRules,
    rankers: dict[str, Ranker],
    store: Optional[PoolStore] = None,
) -> RankDecision:
    """Gate, rank, and log one request.

    A firing gate returns the pool's first candidate without invoking the
    ranker. A ranker failure falls back to the heuristic ranker and flags the
    decision. The pool is always logged when a store is attached.
    """
    if store is not None:
        store.log_pool(req.pool)
    gate = check_gates(req.pool, rules, req.dialogue_act)
    if gate is not Gate.RANKED:
        return RankDecision(
            request_id=req.request_id,
            gate=gate,
            selected_candidate_id=req.pool.candidates[0].candidate_id,
            ranking=None,
        )
    ranker = rankers.get(req.ranker)
    if ranker is None:
        raise UnknownRanker(req.ranker)
    fallback = False
    try:
        ranked = ranker.rank(req.pool)
    except Exception:
        ranked = HeuristicRanker().rank(req.pool)
        fallback = True
    return RankDecision(
        request_id=req.request_id,
        gate=Gate.RANKED,
        selected_candidate_id=ranked.top,
        ranking=ranked,
        fallback_used=fallback,
    )


@dataclass
class ServiceConfig:
    port: int = 8080
    default_ranker: str = "heuristic"
    pool_store_path: str = "pools.jsonl"
    annotation_path: str = "annotations.jsonl"
    annotator_token: Optional[str] = None
    lease_minutes: int = 30
    shuffle_candidates: bool = True
    show_rg_badges: bool = False
    ui_dir: Optional[str] = None
    gating: GatingRules = field(default_factory=GatingRules)


def load_config(path: Optional[str] = None) -> ServiceConfig:
    """Config file (JSON) plus POOLRANK_* environment overrides."""
    data: dict = {}
    if path:
        data = json.loads(Path(path).read_text("utf-8"))
    gating_data = data.pop("gating", {})
    cfg = ServiceConfig(**data, gating=GatingRules(
        min_system_turn=gating_data.get("min_system_turn", 4),
        skip_singleton=gating_data.get("skip_singleton", True),
        functional_act_bypass=tuple(
            gating_data.get("functional_act_bypass", ("repeat_request", "content_deflection"))
        ),
    ))
    if os.environ.get("POOLRANK_PORT"):
        cfg.port = int(os.environ["POOLRANK_PORT"])
    if os.environ.get("POOLRANK_DEFAULT_RANKER"):
        cfg.default_ranker = os.environ["POOLRANK_DEFAULT_RANKER"]
    if os.environ.get("POOLRANK_MIN_SYSTEM_TURN"):
        cfg.gating = GatingRules(
            min_system_turn=int(os.environ["POOLRANK_MIN_SYSTEM_TURN"]),
            skip_singleton=cfg.gating.skip_singleton,
            functional_act_bypass=cfg.gating.functional_act_bypass,
        )
    if os.environ.get("POOLRANK_TOKEN"):
        cfg.annotator_token = os.environ["POOLRANK_TOKEN"]
    return cfg


def create_app(
    config: Optional[ServiceConfig] = None,
    rankers: Optional[dict[str, Ranker]] = None,
):
    """Build the FastAPI application."""
    cfg = config or ServiceConfig()
    registry: dict[str, Ranker] = {"heuristic": HeuristicRanker()}
    if rankers:
        registry.update(rankers)

    store = PoolStore(cfg.pool_store_path)
    queue = AnnotationQueue(
        store,
        cfg.annotation_path,
        lease_minutes=cfg.lease_minutes,
        shuffle_candidates=cfg.shuffle_candidates,
    )

    app = FastAPI(title="poolrank selection service")
    app.state.store = store
    app.state.queue = queue
    app.state.config = cfg
    app.state.rankers = registry

    def check_token(token: Optional[str]) -> None:
        if cfg.annotator_token is not None and token != cfg.annotator_token:
            raise HTTPException(status_code=401, detail="bad annotator token")

    @app.post("/v1/rank")
    async def rank_endpoint(request: Request):
        body = await request.json()
        try:
            req = RankRequest(
                pool=pool_from_dict(body["pool"]),
                ranker=body.get("ranker", cfg.default_ranker),
                request_id=body.get("request_id", ""),
                dialogue_act=body.get("dialogue_act"),
            )
            decision = handle_rank(req, cfg.gating, registry, store)
        except UnknownRanker as exc:
            raise HTTPException(status_code=400, detail=f"unknown ranker: {exc}")
        except (KeyError, ValueError, PoolRankError) as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return decision.to_dict()

    @app.post("/v1/pools")
    async def log_pool_endpoint(request: Request):
        body = await request.json()
        try:
            pool = pool_from_dict(body)
        except (KeyError, ValueError, PoolRankError) as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        pool_id = store.log_pool(pool)
        return {"pool_id": pool_id}

    @app.get("/v1/annotation/next")
    async def annotation_next(
        annotator_id: str,
        x_annotator_token: Optional[str] = Header(default=None),
    ):
        check_token(x_annotator_token)
        payload = queue.next_for(annotator_id)
        if payload is None:
            return JSONResponse({"pool": None}, status_code=200)
        if not cfg.show_rg_badges:
            for cand in payload["candidates"]:
                cand.pop("rg_name", None)
        return {"pool": payload}

    @app.post("/v1/annotation")
    async def annotation_submit(
        request: Request,
        x_annotator_token: Optional[str] = Header(default=None),
    ):
        check_token(x_annotator_token)
        body = await request.json()
        try:
            record = annotation_from_dict(body)
            queue.submit(record)
        except LeaseExpired as exc:
            raise HTTPException(status_code=409, detail=f"lease expired: {exc}")
        except (InvalidGrades, KeyError, ValueError) as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return {"ok": True, "pool_id": record.pool_id}

    ui_dir = cfg.ui_dir
    if ui_dir and Path(ui_dir).is_dir():
        app.mount("/ui", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app
