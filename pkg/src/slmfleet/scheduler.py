"""Global request queue and scheduling policies.

Multiple producers enqueue routed requests; a single executor consumes them
under FIFO (arrival order) or STCF (request whose selected model has the
lowest expected inference time, from its rolling latency average).
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Callable

from .errors import DuplicateRequestError
from .telemetry import KnowledgeStore, MetricKind

FIFO = "fifo"
STCF = "stcf"


@dataclass
class RequestEnvelope:
    """One routed request awaiting execution."""

    request_id: str
    query_text: str
    selected_model: str
    client_id: str
    enqueue_time: float
    max_tokens: int
    reply_to: Callable[[dict], None] | None = None
    arrival_seq: int = field(default=-1, compare=False)

    def __post_init__(self):
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")


class RequestQueue:
    """Admission buffer between connection handlers and the executor.

    Request ids stay reserved until ``mark_done``/``fail_model`` so an id is
    unique among all in-flight requests, not just queued ones.
    """

    def __init__(self):
        self._cond = threading.Condition()
        self._items: list[RequestEnvelope] = []
        self._active_ids: set[str] = set()
        self._seq = 0

    def enqueue(self, envelope: RequestEnvelope) -> int:
        with self._cond:
            if envelope.request_id in self._active_ids:
                raise DuplicateRequestError(f"request id in flight: {envelope.request_id}")
            envelope.arrival_seq = self._seq
            self._seq += 1
            self._active_ids.add(envelope.request_id)
            self._items.append(envelope)
            position = len(self._items) - 1
            self._cond.notify()
            return position

    def next_fifo(self) -> RequestEnvelope | None:
        with self._cond:
            if not self._items:
                return None
            return self._items.pop(0)

    def next_stcf(self, knowledge: KnowledgeStore) -> RequestEnvelope | None:
        """Expected times are snapshotted once per decision; ties fall back
        to arrival order, so an all-cold fleet degenerates to FIFO."""
        with self._cond:
            if not self._items:
                return None
            expected = {
                model: knowledge.rolling_average(model, MetricKind.LATENCY)
                for model in {e.selected_model for e in self._items}
            }
            best = min(self._items,
                       key=lambda e: (expected[e.selected_model], e.arrival_seq))
            self._items.remove(best)
            return best

    def next_request(self, policy: str, knowledge: KnowledgeStore) -> RequestEnvelope | None:
        if policy == STCF:
            return self.next_stcf(knowledge)
        return self.next_fifo()

    def wait_for_request(self, policy: str, knowledge: KnowledgeStore,
                         timeout: float) -> RequestEnvelope | None:
        """Blocking variant for the wall-clock executor."""
        with self._cond:
            if not self._items:
                self._cond.wait(timeout)
        return self.next_request(policy, knowledge)

    def mark_done(self, request_id: str) -> None:
        with self._cond:
            self._active_ids.discard(request_id)

    def fail_model(self, model_id: str) -> list[RequestEnvelope]:
        """Remove every queued request targeting the model (deregistration)."""
        with self._cond:
            failed = [e for e in self._items if e.selected_model == model_id]
            self._items = [e for e in self._items if e.selected_model != model_id]
            for envelope in failed:
                self._active_ids.discard(envelope.request_id)
            return failed

    def clear(self) -> None:
        with self._cond:
            for envelope in self._items:
                self._active_ids.discard(envelope.request_id)
            self._items.clear()

    def is_empty(self) -> bool:
        with self._cond:
            return not self._items

    def __len__(self) -> int:
        with self._cond:
            return len(self._items)

    def snapshot(self) -> list[str]:
        with self._cond:
            return [e.request_id for e in self._items]
