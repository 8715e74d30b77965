"""Orchestrator core: admission, execution and the two clock drivers.

Admission routes a query and enqueues the resulting envelope; the single
executor pops per scheduling policy, brings the model into the cache,
runs the simulated inference and completes the request. Durations come
back as data, so a virtual-clock driver adds them to simulated time while
the wall-clock driver sleeps them, over the same pipeline.
"""

from __future__ import annotations

import threading
import time
from collections import deque
from dataclasses import dataclass
from typing import Callable

from .backend import BackendHost, BackendProfile, InferenceResult
from .cache import EnsureOutcome, ModelCache
from .errors import UnknownModelError, UnknownRequestError
from .registry import ModelRecord, ModelRegistry
from .router import Router, RoutingDecision
from .scheduler import FIFO, RequestEnvelope, RequestQueue
from .similarity import Embedder
from .telemetry import KnowledgeStore, ObjectiveConfig


class VirtualClock:
    def __init__(self):
        self._now = 0.0

    def now(self) -> float:
        return self._now

    def sleep(self, duration: float) -> None:
        self._now += duration

    def advance_to(self, t: float) -> None:
        self._now = max(self._now, t)


class WallClock:
    def __init__(self):
        self._t0 = time.monotonic()

    def now(self) -> float:
        return time.monotonic() - self._t0

    def sleep(self, duration: float) -> None:
        if duration > 0:
            time.sleep(duration)


@dataclass(frozen=True)
class ExecutionRecord:
    """Result of executing one envelope; durations are data."""

    outcome: EnsureOutcome
    result: InferenceResult
    started: float


@dataclass(frozen=True)
class RequestReport:
    """Everything known about a served request; source of one CSV row."""

    request_id: str
    arrival_s: float
    domain: str
    selected_model: str
    queue_wait_s: float
    service_s: float
    end_to_end_s: float
    energy_j: float
    rating: int | None
    cold_start: bool
    cache_hit: bool
    decision_time_ms: float


@dataclass(frozen=True)
class RequestFailure:
    request_id: str
    reason: str


@dataclass
class _RequestContext:
    domain: str
    decision: RoutingDecision
    reply_to: Callable | None


class Orchestrator:
    """Single-process composition of the routing and serving pipeline."""

    def __init__(
        self,
        objective: ObjectiveConfig | None = None,
        scheduler: str = FIFO,
        cache_capacity: int | None = None,
        cache_policy: str = "lru",
        seed: int = 0,
        similarity_method: str = "cosine",
        embedding_dim: int = 256,
        feedback_enabled: bool = True,
        clock=None,
    ):
        self.objective = objective or ObjectiveConfig()
        self.scheduler = scheduler
        self.seed = seed
        self.feedback_enabled = feedback_enabled
        self.clock = clock if clock is not None else VirtualClock()

        self.registry = ModelRegistry()
        self.knowledge = KnowledgeStore(window=self.objective.window)
        self.router = Router(self.registry, self.knowledge,
                             Embedder(embedding_dim), similarity_method)
        self.queue = RequestQueue()
        self.cache = ModelCache(cache_capacity, cache_policy)
        self.backends = BackendHost(seed)
        self.profiles: dict[str, BackendProfile] = {}

        self._contexts: dict[str, _RequestContext] = {}
        self._served_model: dict[str, str] = {}
        self._served_order: deque[str] = deque(maxlen=10_000)
        self._lock = threading.Lock()

    # -- fleet management ----------------------------------------------------

    def add_profile(self, profile: BackendProfile) -> None:
        self.profiles[profile.profile_id] = profile

    def register_model(self, record: ModelRecord,
                       profile: BackendProfile | None = None) -> None:
        if profile is None:
            ref = record.profile_ref or record.model_id
            if ref not in self.profiles:
                raise UnknownModelError(f"unknown profile: {ref}")
            profile = self.profiles[ref]
        self.registry.register(record)
        self.knowledge.register_model(record.model_id)
        self.backends.attach(record.model_id, profile)

    def deregister_model(self, model_id: str) -> int:
        """Remove the model; queued requests targeting it fail. Returns the
        number of failed requests."""
        self.registry.deregister(model_id)
        failed = self.queue.fail_model(model_id)
        for envelope in failed:
            with self._lock:
                ctx = self._contexts.pop(envelope.request_id, None)
            if ctx is not None and ctx.reply_to is not None:
                ctx.reply_to(RequestFailure(envelope.request_id, "routing_unavailable"))
        if self.cache.discard(model_id):
            self.backends.unload(model_id)
        self.backends.detach(model_id)
        self.knowledge.forget_model(model_id)
        return len(failed)

    # -- admission -----------------------------------------------------------

    def admit(
        self,
        request_id: str,
        query: str,
        max_tokens: int,
        domain: str = "",
        client_id: str = "",
        reply_to: Callable | None = None,
        at: float | None = None,
    ) -> RoutingDecision:
        """Route the query and enqueue the resulting envelope."""
        now = self.clock.now() if at is None else at
        decision = self.router.route(request_id, query, self.objective,
                                     self.cache.resident_ids())
        envelope = RequestEnvelope(
            request_id=request_id,
            query_text=query,
            selected_model=decision.selected,
            client_id=client_id,
            enqueue_time=now,
            max_tokens=max_tokens,
            reply_to=reply_to,
        )
        self.queue.enqueue(envelope)
        with self._lock:
            self._contexts[request_id] = _RequestContext(domain, decision, reply_to)
        return decision

    # -- execution -----------------------------------------------------------

    def execute(self, envelope: RequestEnvelope, started: float) -> ExecutionRecord:
        model_id = envelope.selected_model
        with self._lock:
            ctx = self._contexts[envelope.request_id]
        outcome = self.cache.ensure_resident(
            model_id,
            loader=lambda: self.backends.load(model_id),
            footprint_mb=self.backends.profile(model_id).footprint_mb,
            rank=self.registry.registration_index(model_id),
        )
        if outcome.evicted is not None:
            self.backends.unload(outcome.evicted)
        result = self.backends.infer(model_id, envelope.max_tokens, ctx.domain,
                                     cold_start=not outcome.hit)
        return ExecutionRecord(outcome=outcome, result=result, started=started)

    def complete(self, envelope: RequestEnvelope, record: ExecutionRecord,
                 completed: float) -> RequestReport:
        model_id = envelope.selected_model
        result = record.result
        rating = self.backends.rate(model_id, result.latent_quality)
        self.knowledge.record_request(envelope.request_id, model_id,
                                      result.service_time_s, result.energy_j)
        with self._lock:
            ctx = self._contexts.pop(envelope.request_id)
            self._remember_served(envelope.request_id, model_id)
        if self.feedback_enabled:
            self.knowledge.record_feedback(envelope.request_id, model_id, float(rating))
        report = RequestReport(
            request_id=envelope.request_id,
            arrival_s=envelope.enqueue_time,
            domain=ctx.domain,
            selected_model=model_id,
            queue_wait_s=record.started - envelope.enqueue_time,
            service_s=result.service_time_s,
            end_to_end_s=completed - envelope.enqueue_time,
            energy_j=result.energy_j,
            rating=rating,
            cold_start=result.cold_start,
            cache_hit=record.outcome.hit,
            decision_time_ms=ctx.decision.decision_time_ms,
        )
        self.queue.mark_done(envelope.request_id)
        if ctx.reply_to is not None:
            ctx.reply_to(report)
        return report

    def _remember_served(self, request_id: str, model_id: str) -> None:
        if len(self._served_order) == self._served_order.maxlen:
            self._served_model.pop(self._served_order[0], None)
        self._served_order.append(request_id)
        self._served_model[request_id] = model_id

    def apply_feedback(self, request_id: str, rating: int) -> str:
        """Client-sent rating for a completed request; returns the model
        whose confidence window absorbed it."""
        if not (1 <= rating <= 5):
            raise ValueError(f"rating outside 1-5: {rating}")
        with self._lock:
            model_id = self._served_model.get(request_id)
        if model_id is None:
            raise UnknownRequestError(f"no completed request with id: {request_id}")
        if model_id in self.registry:
            self.knowledge.record_feedback(request_id, model_id, float(rating))
        return model_id

    # -- stats ---------------------------------------------------------------

    def stats(self) -> dict:
        fleet = []
        for record in self.registry.list_models():
            snap = self.knowledge.model_snapshot(record.model_id)
            snap["model_id"] = record.model_id
            snap["resident"] = record.model_id in self.cache
            fleet.append(snap)
        state = self.cache.state()
        return {
            "fleet": fleet,
            "cache": {
                "capacity": state.capacity,
                "resident": [e["model_id"] for e in state.resident],
                "hits": state.hit_count,
                "misses": state.miss_count,
                "peak_footprint_mb": self.cache.peak_footprint_mb,
            },
            "queue_depth": len(self.queue),
        }


# -- drivers ------------------------------------------------------------------


@dataclass(frozen=True)
class TraceEntry:
    arrival_s: float
    domain: str
    max_tokens: int
    query_text: str


def run_trace(orch: Orchestrator, trace: list[TraceEntry]) -> list[RequestReport]:
    """Virtual-clock driver: replays the trace through the full pipeline
    in simulated time and returns one report per request.

    Arrivals admitted while a request executes see pre-completion
    telemetry; at equal timestamps completions are processed first.
    """
    reports: list[RequestReport] = []
    now = 0.0
    i, n = 0, len(trace)

    def admit_through(limit: float, inclusive: bool) -> None:
        nonlocal i
        while i < n and (trace[i].arrival_s <= limit if inclusive
                         else trace[i].arrival_s < limit):
            entry = trace[i]
            orch.admit(
                request_id=f"r{i:05d}",
                query=entry.query_text,
                max_tokens=entry.max_tokens,
                domain=entry.domain,
                client_id="replay",
                at=entry.arrival_s,
            )
            i += 1

    while i < n or not orch.queue.is_empty():
        admit_through(now, inclusive=True)
        if orch.queue.is_empty():
            if i >= n:
                break
            now = max(now, trace[i].arrival_s)
            continue
        envelope = orch.queue.next_request(orch.scheduler, orch.knowledge)
        record = orch.execute(envelope, started=now)
        completed = now + record.outcome.load_duration_s + record.result.service_time_s
        admit_through(completed, inclusive=False)
        now = completed
        reports.append(orch.complete(envelope, record, completed))
    return reports


class ExecutorThread(threading.Thread):
    """Wall-clock driver: the single consumer for a live server."""

    def __init__(self, orch: Orchestrator):
        super().__init__(name="slmfleet-executor", daemon=True)
        self.orch = orch
        self._stopping = threading.Event()

    def run(self):
        orch = self.orch
        while True:
            envelope = orch.queue.wait_for_request(orch.scheduler, orch.knowledge,
                                                   timeout=0.05)
            if envelope is None:
                if self._stopping.is_set():
                    return
                continue
            record = orch.execute(envelope, started=orch.clock.now())
            orch.clock.sleep(record.outcome.load_duration_s + record.result.service_time_s)
            orch.complete(envelope, record, orch.clock.now())

    def stop(self, drain: bool = True):
        """Signal shutdown; the loop exits once the queue is drained."""
        if not drain:
            self.orch.queue.clear()
        self._stopping.set()
        self.join(timeout=30.0)
