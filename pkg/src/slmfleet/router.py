"""Routing score computation, ranking and model selection.

Each policy combines the static similarity score with one normalized
dynamic metric weighted by the control parameter; pro-cache instead adds a
flat bias for resident models. The generic core supports any number of
weighted metrics, so multi-metric objectives remain available.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

from .errors import EmptyFleetError
from .registry import ModelRecord, ModelRegistry
from .similarity import Embedder, cosine_similarity, maxsim_similarity, tokenize
from .telemetry import (
    KnowledgeStore,
    MetricKind,
    ObjectiveConfig,
    RoutingPolicy,
    adjust_weights,
)

COSINE = "cosine"
MAXSIM = "maxsim"


@dataclass(frozen=True)
class ScoredCandidate:
    model_id: str
    static_score: float
    dynamic_component: float
    total_score: float


@dataclass(frozen=True)
class RoutingDecision:
    request_id: str
    scored: tuple[ScoredCandidate, ...]  # best first
    selected: str
    decision_time_ms: float


@dataclass(frozen=True)
class PlanParameters:
    """Effective control parameters implied by an objective."""

    lambdas: dict[MetricKind, float]
    maximize: bool
    invert_similarity: bool
    cache_bias: float


def plan_parameters(objective: ObjectiveConfig) -> PlanParameters:
    """Map a policy to its metric set, weight and optimization direction."""
    policy = objective.policy
    if policy is RoutingPolicy.PRO_LATENCY:
        return PlanParameters({MetricKind.LATENCY: objective.lam}, False, True, 0.0)
    if policy is RoutingPolicy.PRO_ENERGY:
        return PlanParameters({MetricKind.ENERGY: objective.lam}, False, True, 0.0)
    if policy is RoutingPolicy.PRO_CONFIDENCE:
        return PlanParameters({MetricKind.CONFIDENCE: objective.lam}, True, False, 0.0)
    if policy is RoutingPolicy.PRO_CACHE:
        return PlanParameters({}, True, False, objective.lam)
    return PlanParameters({}, True, False, 0.0)


def rank_candidates(
    model_ids: list[str],
    sims: dict[str, float],
    dynamics: dict[MetricKind, dict[str, float]],
    lambdas: dict[MetricKind, float],
    maximize: bool,
    invert_similarity: bool,
    cache_bias: float = 0.0,
    resident: frozenset[str] = frozenset(),
) -> list[ScoredCandidate]:
    """Score every candidate and sort best-first.

    ``model_ids`` must be in registration order; ties resolve to the
    earliest-registered model.
    """
    scored = []
    for model_id in model_ids:
        sim = sims[model_id]
        base = (1.0 - sim) if invert_similarity else sim
        dyn = 0.0
        for kind, lam in lambdas.items():
            dyn += lam * dynamics[kind][model_id]
        if cache_bias and model_id in resident:
            dyn += cache_bias
        scored.append(ScoredCandidate(model_id, sim, dyn, base + dyn))
    order = range(len(scored))
    if maximize:
        ranked = sorted(order, key=lambda i: (-scored[i].total_score, i))
    else:
        ranked = sorted(order, key=lambda i: (scored[i].total_score, i))
    return [scored[i] for i in ranked]


class Router:
    """Scores the registered fleet for each query and picks the best model."""

    def __init__(
        self,
        registry: ModelRegistry,
        knowledge: KnowledgeStore,
        embedder: Embedder | None = None,
        method: str = COSINE,
    ):
        if method not in (COSINE, MAXSIM):
            raise ValueError(f"unknown similarity method: {method}")
        self.registry = registry
        self.knowledge = knowledge
        self.embedder = embedder or Embedder()
        self.method = method
        self._desc_cache: dict[str, tuple[str, list[float], list[str]]] = {}

    def _description_repr(self, record: ModelRecord) -> tuple[list[float], list[str]]:
        cached = self._desc_cache.get(record.model_id)
        if cached is not None and cached[0] == record.description:
            return cached[1], cached[2]
        vec = self.embedder.embed(record.description)
        tokens = tokenize(record.description)
        self._desc_cache[record.model_id] = (record.description, vec, tokens)
        return vec, tokens

    def static_score(self, query: str, record: ModelRecord) -> float:
        desc_vec, desc_tokens = self._description_repr(record)
        if self.method == MAXSIM:
            query_tokens = tokenize(query)
            if not query_tokens or not desc_tokens:
                return 0.0
            return maxsim_similarity(query_tokens, desc_tokens, self.embedder)
        return cosine_similarity(self.embedder.embed(query), desc_vec)

    def route(
        self,
        request_id: str,
        query: str,
        objective: ObjectiveConfig,
        resident: frozenset[str] = frozenset(),
    ) -> RoutingDecision:
        started = time.perf_counter()
        records = self.registry.list_models()
        if not records:
            raise EmptyFleetError("cannot route with an empty fleet")
        sims = {rec.model_id: self.static_score(query, rec) for rec in records}
        return self._decide(request_id, [r.model_id for r in records], sims,
                            objective, resident, started)

    def select_from_scores(
        self,
        request_id: str,
        sims: dict[str, float],
        objective: ObjectiveConfig,
        resident: frozenset[str] = frozenset(),
    ) -> RoutingDecision:
        """Rank from precomputed similarity scores (custom embedders, tests)."""
        started = time.perf_counter()
        records = self.registry.list_models()
        if not records:
            raise EmptyFleetError("cannot route with an empty fleet")
        return self._decide(request_id, [r.model_id for r in records], sims,
                            objective, resident, started)

    def _decide(self, request_id, model_ids, sims, objective, resident, started):
        plan = plan_parameters(objective)
        lambdas = plan.lambdas
        if objective.correlation_adjust and lambdas:
            lambdas = adjust_weights(lambdas, self.knowledge.metric_correlations())
        dynamics = {kind: self.knowledge.normalize_across_fleet(kind) for kind in lambdas}
        ranked = rank_candidates(
            model_ids, sims, dynamics, lambdas,
            plan.maximize, plan.invert_similarity, plan.cache_bias, resident,
        )
        elapsed_ms = (time.perf_counter() - started) * 1000.0
        return RoutingDecision(
            request_id=request_id,
            scored=tuple(ranked),
            selected=ranked[0].model_id,
            decision_time_ms=elapsed_ms,
        )
