"""Deterministic simulated model backends.

Each backend replaces a real model process with a parametric profile:
load time, token throughput, a linear energy law and a latent per-domain
quality. Every model draws from its own seeded random stream, derived from
(global seed, model id), so reordering requests to one model never perturbs
the samples of another. Durations are returned as data; whoever drives the
executor decides whether to sleep them (wall clock) or add them to a
virtual clock.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .errors import UnknownModelError

FALLBACK_DOMAIN = "other"

FEEDBACK_NOISE_SIGMA = 0.25


@dataclass(frozen=True)
class BackendProfile:
    profile_id: str
    domain_tag: str
    tokens_per_second: float
    footprint_mb: float
    energy_per_token_j: float
    base_latency_s: float = 0.0
    energy_per_load_j: float = 0.0
    load_time_s: tuple[float, float] = (1.5, 2.0)
    quality: dict[str, tuple[float, float]] = field(default_factory=dict)
    token_count_law: tuple[float, float] = (0.5, 0.1)

    def __post_init__(self):
        lo, hi = self.load_time_s
        if not (0.0 <= lo <= hi <= 60.0):
            raise ValueError(f"load_time_s interval invalid: {self.load_time_s}")
        if self.tokens_per_second <= 0:
            raise ValueError("tokens_per_second must be positive")
        if self.footprint_mb <= 0:
            raise ValueError("footprint_mb must be positive")
        if self.energy_per_token_j <= 0:
            raise ValueError("energy_per_token_j must be positive")
        if self.base_latency_s < 0 or self.energy_per_load_j < 0:
            raise ValueError("base latency and load energy must be non-negative")
        if FALLBACK_DOMAIN not in self.quality:
            raise ValueError(f"quality map must include the '{FALLBACK_DOMAIN}' entry")
        for domain, (mean, stddev) in self.quality.items():
            if not (1.0 <= mean <= 5.0):
                raise ValueError(f"quality mean for {domain} outside [1, 5]: {mean}")
            if stddev < 0:
                raise ValueError(f"quality stddev for {domain} negative")


@dataclass(frozen=True)
class InferenceResult:
    tokens_generated: int
    service_time_s: float
    energy_j: float
    latent_quality: float
    cold_start: bool


def model_stream(seed: int, model_id: str) -> random.Random:
    """Independent seeded stream per model; string seeding keeps it stable
    across processes and platforms."""
    return random.Random(f"{seed}:model:{model_id}")


def sample_load_duration(profile: BackendProfile, rng: random.Random) -> float:
    lo, hi = profile.load_time_s
    if lo == hi:
        return lo
    return rng.uniform(lo, hi)


def simulate_inference(
    profile: BackendProfile,
    max_tokens: int,
    domain_tag: str,
    rng: random.Random,
    cold_start: bool,
) -> InferenceResult:
    if max_tokens < 1:
        raise ValueError("max_tokens must be >= 1")
    mean_frac, stddev_frac = profile.token_count_law
    drawn = rng.gauss(mean_frac * max_tokens, stddev_frac * max_tokens)
    tokens = int(min(max(round(drawn), 1), max_tokens))
    service = profile.base_latency_s + tokens / profile.tokens_per_second
    energy = tokens * profile.energy_per_token_j
    if cold_start:
        energy += profile.energy_per_load_j
    q_mean, q_std = profile.quality.get(domain_tag, profile.quality[FALLBACK_DOMAIN])
    latent = q_mean if q_std == 0 else rng.gauss(q_mean, q_std)
    latent = min(max(latent, 1.0), 5.0)
    return InferenceResult(tokens, service, energy, latent, cold_start)


def feedback_rating(
    latent_quality: float,
    rng: random.Random,
    noise_sigma: float = FEEDBACK_NOISE_SIGMA,
) -> int:
    """The 1-5 rating a simulated client sends back for a response."""
    if not (1.0 <= latent_quality <= 5.0):
        raise ValueError(f"latent quality outside [1, 5]: {latent_quality}")
    noisy = latent_quality + (rng.gauss(0.0, noise_sigma) if noise_sigma > 0 else 0.0)
    return int(min(max(round(noisy), 1), 5))


class BackendHost:
    """Holds the simulated backends and the set currently loaded in memory.

    The resident set must mirror the cache exactly; the cache decides *when*
    to load or evict, this class owns the simulated consequences.
    """

    def __init__(self, seed: int):
        self.seed = seed
        self._profiles: dict[str, BackendProfile] = {}
        self._streams: dict[str, random.Random] = {}
        self._loaded: set[str] = set()

    def attach(self, model_id: str, profile: BackendProfile) -> None:
        self._profiles[model_id] = profile
        self._streams[model_id] = model_stream(self.seed, model_id)

    def detach(self, model_id: str) -> None:
        self._profiles.pop(model_id, None)
        self._streams.pop(model_id, None)
        self._loaded.discard(model_id)

    def profile(self, model_id: str) -> BackendProfile:
        try:
            return self._profiles[model_id]
        except KeyError:
            raise UnknownModelError(f"no backend attached for: {model_id}") from None

    def stream(self, model_id: str) -> random.Random:
        return self._streams[model_id]

    def load(self, model_id: str) -> float:
        if model_id in self._loaded:
            raise ValueError(f"backend already loaded: {model_id}")
        duration = sample_load_duration(self.profile(model_id), self._streams[model_id])
        self._loaded.add(model_id)
        return duration

    def unload(self, model_id: str) -> None:
        self._loaded.discard(model_id)

    def infer(self, model_id: str, max_tokens: int, domain_tag: str,
              cold_start: bool) -> InferenceResult:
        if model_id not in self._loaded:
            raise ValueError(f"backend not resident: {model_id}")
        return simulate_inference(self.profile(model_id), max_tokens, domain_tag,
                                  self._streams[model_id], cold_start)

    def rate(self, model_id: str, latent_quality: float) -> int:
        return feedback_rating(latent_quality, self._streams[model_id])

    def loaded_ids(self) -> frozenset[str]:
        return frozenset(self._loaded)

    def resident_memory_mb(self) -> float:
        return sum(self._profiles[m].footprint_mb for m in self._loaded)
