"""Desk-scale persistence: append-only pool store and the annotation queue."""
from __future__ import annotations

import json
import random
import threading
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from enum import Enum
from pathlib import Path
from typing import Iterator, Optional

from .core import (
    AnnotationRecord,
    ResponsePool,
    annotation_to_dict,
    annotation_from_dict,
    pool_from_dict,
    pool_to_dict,
)
from .errors import InvalidGrades, LeaseExpired, StorageError, UnknownCandidate


class PoolStore:
    """Append-only line-delimited JSON store, idempotent on pool_id."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._ids: set[str] = set()
        self._order: list[str] = []
        self._pools: dict[str, ResponsePool] = {}
        if self.path.exists():
            with open(self.path, encoding="utf-8") as fh:
                for line in fh:
                    if not line.strip():
                        continue
                    pool = pool_from_dict(json.loads(line))
                    if pool.pool_id not in self._ids:
                        self._ids.add(pool.pool_id)
                        self._order.append(pool.pool_id)
                        self._pools[pool.pool_id] = pool

    def log_pool(self, pool: ResponsePool) -> str:
        """Durably append; logging the same pool_id twice stores one record."""
        with self._lock:
            if pool.pool_id in self._ids:
                return pool.pool_id
            try:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with open(self.path, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps(pool_to_dict(pool), ensure_ascii=False) + "\n")
                    fh.flush()
            except OSError as exc:
                raise StorageError(str(exc)) from exc
            self._ids.add(pool.pool_id)
            self._order.append(pool.pool_id)
            self._pools[pool.pool_id] = pool
            return pool.pool_id

    def get(self, pool_id: str) -> Optional[ResponsePool]:
        with self._lock:
            return self._pools.get(pool_id)

    def __len__(self) -> int:
        return len(self._order)

    def __iter__(self) -> Iterator[ResponsePool]:
        with self._lock:
            ids = list(self._order)
        for pid in ids:
            yield self._pools[pid]

    def compact(self) -> None:
        """Rewrite the file with one line per pool, dropping duplicates."""
        with self._lock:
            tmp = self.path.with_suffix(".tmp")
            with open(tmp, "w", encoding="utf-8") as fh:
                for pid in self._order:
                    fh.write(json.dumps(pool_to_dict(self._pools[pid]), ensure_ascii=False) + "\n")
            tmp.replace(self.path)


class AssignmentState(Enum):
    UNASSIGNED = "UNASSIGNED"
    ASSIGNED = "ASSIGNED"
    DONE = "DONE"


@dataclass
class AnnotationQueueItem:
    pool_id: str
    state: AssignmentState = AssignmentState.UNASSIGNED
    assigned_to: Optional[str] = None
    lease_expiry: Optional[datetime] = None
    shuffle_seed: Optional[int] = None


class AnnotationQueue:
    """Leased work queue over logged pools; one live assignment per pool."""

    def __init__(
        self,
        pool_store: PoolStore,
        annotation_path: str | Path,
        lease_minutes: int = 30,
        shuffle_candidates: bool = True,
    ):
        self.pool_store = pool_store
        self.annotation_path = Path(annotation_path)
        self.lease = timedelta(minutes=lease_minutes)
        self.shuffle_candidates = shuffle_candidates
        self._lock = threading.Lock()
        self._items: dict[str, AnnotationQueueItem] = {}
        self._annotations: dict[str, AnnotationRecord] = {}
        if self.annotation_path.exists():
            with open(self.annotation_path, encoding="utf-8") as fh:
                for line in fh:
                    if line.strip():
                        ann = annotation_from_dict(json.loads(line))
                        self._annotations[ann.pool_id] = ann

    def _sync_items(self) -> None:
        for pool in self.pool_store:
            if pool.pool_id not in self._items:
                item = AnnotationQueueItem(pool_id=pool.pool_id)
                if pool.pool_id in self._annotations:
                    item.state = AssignmentState.DONE
                self._items[pool.pool_id] = item

    def next_for(self, annotator_id: str, now: Optional[datetime] = None) -> Optional[dict]:
        """Lease the next unassigned pool and return its render payload."""
        now = now or datetime.now(timezone.utc)
        with self._lock:
            self._sync_items()
            for item in self._items.values():
                if item.state is AssignmentState.ASSIGNED and (
                    item.lease_expiry is not None and item.lease_expiry <= now
                ):
                    item.state = AssignmentState.UNASSIGNED
                    item.assigned_to = None
                    item.lease_expiry = None
            for item in self._items.values():
                if item.state is AssignmentState.UNASSIGNED:
                    item.state = AssignmentState.ASSIGNED
                    item.assigned_to = annotator_id
                    item.lease_expiry = now + self.lease
                    item.shuffle_seed = random.SystemRandom().randrange(2**31)
                    return self._payload(item)
            return None

    def _payload(self, item: AnnotationQueueItem) -> dict:
        pool = self.pool_store.get(item.pool_id)
        assert pool is not None
        candidates = list(pool.candidates)
        if self.shuffle_candidates:
            random.Random(item.shuffle_seed).shuffle(candidates)
        return {
            "pool_id": pool.pool_id,
            "shuffle_seed": item.shuffle_seed,
            "lease_expiry": item.lease_expiry.isoformat() if item.lease_expiry else None,
            "context": [
                {"speaker": t.speaker.value, "text": t.text}
                for t in pool.context[-4:]
            ],
            "candidates": [
                {
                    "candidate_id": c.candidate_id,
                    "text": c.text,
                    "rg_name": c.rg.name,
                }
                for c in candidates
            ],
            "none_of_the_above_available": True,
        }

    def submit(self, record: AnnotationRecord, now: Optional[datetime] = None) -> None:
        """Validate and persist one annotation, marking the queue item DONE."""
        now = now or datetime.now(timezone.utc)
        with self._lock:
            self._sync_items()
            item = self._items.get(record.pool_id)
            pool = self.pool_store.get(record.pool_id)
            if item is None or pool is None:
                raise InvalidGrades(f"unknown pool {record.pool_id!r}")
            if item.state is AssignmentState.ASSIGNED and (
                item.lease_expiry is not None and item.lease_expiry <= now
            ):
                raise LeaseExpired(record.pool_id)
            known = set(pool.candidate_ids())
            for cid in record.grades:
                if cid not in known:
                    raise InvalidGrades(f"grade for unknown candidate {cid!r}")
            try:
                with open(self.annotation_path, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps(annotation_to_dict(record), ensure_ascii=False) + "\n")
            except OSError as exc:
                raise StorageError(str(exc)) from exc
            self._annotations[record.pool_id] = record
            item.state = AssignmentState.DONE
            item.assigned_to = None
            item.lease_expiry = None

    def get_annotation(self, pool_id: str) -> Optional[AnnotationRecord]:
        with self._lock:
            return self._annotations.get(pool_id)

    def annotations(self) -> list[AnnotationRecord]:
        with self._lock:
            return list(self._annotations.values())
