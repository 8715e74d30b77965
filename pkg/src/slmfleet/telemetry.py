"""Runtime monitoring and shared knowledge for adaptive routing.

Per-model rolling windows hold the recent observations of each metric; the
store also keeps one global window of per-request metric rows so correlation
between metrics can be estimated when weight attenuation is enabled.
"""

from __future__ import annotations

import math
import threading
from collections import deque
from dataclasses import dataclass, field
from enum import Enum

from .errors import EmptyFleetError, UnknownModelError

DEFAULT_WINDOW = 100

CONFIDENCE_SCALE = 5.0


class MetricKind(Enum):
    LATENCY = "latency_seconds"
    ENERGY = "energy_joules"
    CONFIDENCE = "confidence_raw"


class RoutingPolicy(Enum):
    SIMILARITY_ONLY = "similarity_only"
    PRO_LATENCY = "pro_latency"
    PRO_ENERGY = "pro_energy"
    PRO_CONFIDENCE = "pro_confidence"
    PRO_CACHE = "pro_cache"


# Cold-start defaults: fresh models look fast, cheap and fully trusted, so
# early decisions are similarity-driven and every model gets explored.
COLD_START_DEFAULTS = {
    MetricKind.LATENCY: 0.0,
    MetricKind.ENERGY: 0.0,
    MetricKind.CONFIDENCE: 5.0,
}


@dataclass(frozen=True)
class ObjectiveConfig:
    """Routing objective: policy plus its control weight."""

    policy: RoutingPolicy = RoutingPolicy.SIMILARITY_ONLY
    lam: float = 0.0
    correlation_adjust: bool = False
    window: int = DEFAULT_WINDOW

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lambda must be non-negative")
        if self.window < 1:
            raise ValueError("window must be >= 1")


class RollingWindow:
    """Bounded FIFO of observations with an O(1) running average."""

    def __init__(self, capacity: int = DEFAULT_WINDOW):
        if capacity < 1:
            raise ValueError("window capacity must be >= 1")
        self.capacity = capacity
        self._values: deque[float] = deque()
        self._sum = 0.0

    def append(self, value: float) -> None:
        if len(self._values) == self.capacity:
            self._sum -= self._values.popleft()
        self._values.append(value)
        self._sum += value

    def average(self) -> float | None:
        if not self._values:
            return None
        return self._sum / len(self._values)

    def values(self) -> list[float]:
        return list(self._values)

    def __len__(self) -> int:
        return len(self._values)


def _validate_observation(metric: MetricKind, value: float) -> None:
    if not math.isfinite(value):
        raise ValueError(f"{metric.value} observation must be finite")
    if metric is MetricKind.CONFIDENCE:
        if not (0.0 <= value <= CONFIDENCE_SCALE):
            raise ValueError(f"confidence out of range [0, 5]: {value}")
    elif value < 0:
        raise ValueError(f"{metric.value} must be non-negative: {value}")


@dataclass
class _RequestRow:
    """Paired per-request observations for correlation estimation."""

    request_id: str
    values: dict[MetricKind, float] = field(default_factory=dict)


class KnowledgeStore:
    """MAPE-K knowledge: per-model windows plus the global pairing window.

    Writers (the executor) and readers (router snapshots) share one lock, so
    a snapshot never sees a torn window.
    """

    def __init__(self, window: int = DEFAULT_WINDOW):
        if window < 1:
            raise ValueError("window must be >= 1")
        self.window = window
        self._lock = threading.RLock()
        self._windows: dict[str, dict[MetricKind, RollingWindow]] = {}
        self._rows: deque[_RequestRow] = deque(maxlen=window)
        self._row_index: dict[str, _RequestRow] = {}

    # -- model lifecycle ----------------------------------------------------

    def register_model(self, model_id: str) -> None:
        with self._lock:
            self._windows[model_id] = {kind: RollingWindow(self.window) for kind in MetricKind}

    def forget_model(self, model_id: str) -> None:
        with self._lock:
            self._windows.pop(model_id, None)

    def known_models(self) -> list[str]:
        with self._lock:
            return list(self._windows)

    def _model_windows(self, model_id: str) -> dict[MetricKind, RollingWindow]:
        try:
            return self._windows[model_id]
        except KeyError:
            raise UnknownModelError(f"no telemetry for model: {model_id}") from None

    # -- observations -------------------------------------------------------

    def record_observation(self, model_id: str, metric: MetricKind, value: float) -> None:
        _validate_observation(metric, value)
        with self._lock:
            self._model_windows(model_id)[metric].append(value)

    def record_request(self, request_id: str, model_id: str,
                       latency_s: float, energy_j: float) -> None:
        """Log one served request: per-model windows plus the global row."""
        with self._lock:
            self.record_observation(model_id, MetricKind.LATENCY, latency_s)
            self.record_observation(model_id, MetricKind.ENERGY, energy_j)
            row = _RequestRow(request_id)
            row.values[MetricKind.LATENCY] = latency_s
            row.values[MetricKind.ENERGY] = energy_j
            if len(self._rows) == self._rows.maxlen:
                evicted = self._rows[0]
                self._row_index.pop(evicted.request_id, None)
            self._rows.append(row)
            self._row_index[request_id] = row

    def record_feedback(self, request_id: str, model_id: str, rating: float) -> None:
        with self._lock:
            self.record_observation(model_id, MetricKind.CONFIDENCE, rating)
            row = self._row_index.get(request_id)
            if row is not None:
                row.values[MetricKind.CONFIDENCE] = rating

    # -- snapshots ----------------------------------------------------------

    def rolling_average(self, model_id: str, metric: MetricKind) -> float:
        with self._lock:
            avg = self._model_windows(model_id)[metric].average()
        if avg is None:
            return COLD_START_DEFAULTS[metric]
        return avg

    def observation_count(self, model_id: str, metric: MetricKind) -> int:
        with self._lock:
            return len(self._model_windows(model_id)[metric])

    def normalize_across_fleet(self, metric: MetricKind) -> dict[str, float]:
        """Rolling averages scaled to [0, 1].

        Latency and energy divide by the fleet-wide maximum average (all
        zero when the maximum is zero); confidence divides by its fixed
        0-5 scale.
        """
        with self._lock:
            if not self._windows:
                raise EmptyFleetError("no registered models to normalize over")
            averages = {m: self.rolling_average(m, metric) for m in self._windows}
        if metric is MetricKind.CONFIDENCE:
            return {m: v / CONFIDENCE_SCALE for m, v in averages.items()}
        top = max(averages.values())
        if top == 0:
            return {m: 0.0 for m in averages}
        return {m: v / top for m, v in averages.items()}

    def metric_correlations(self) -> dict[tuple[MetricKind, MetricKind], float]:
        """Spearman correlation per metric pair over the global window,
        using rows where both metrics were observed; 0 when underdetermined."""
        with self._lock:
            rows = [dict(r.values) for r in self._rows]
        kinds = list(MetricKind)
        out: dict[tuple[MetricKind, MetricKind], float] = {}
        for i, a in enumerate(kinds):
            for b in kinds[i + 1:]:
                xs = [r[a] for r in rows if a in r and b in r]
                ys = [r[b] for r in rows if a in r and b in r]
                out[(a, b)] = spearman_correlation(xs, ys) if len(xs) >= 2 else 0.0
        return out

    def model_snapshot(self, model_id: str) -> dict:
        """Per-model stats for the stats wire message."""
        with self._lock:
            windows = self._model_windows(model_id)
            return {
                "avg_latency_s": self.rolling_average(model_id, MetricKind.LATENCY),
                "avg_energy_j": self.rolling_average(model_id, MetricKind.ENERGY),
                "avg_confidence": self.rolling_average(model_id, MetricKind.CONFIDENCE),
                "observations": {kind.value: len(windows[kind]) for kind in MetricKind},
            }


def _midranks(values: list[float]) -> list[float]:
    """1-based fractional ranks with average-rank tie handling."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        rank = (i + j) / 2 + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = rank
        i = j + 1
    return ranks


def spearman_correlation(xs: list[float], ys: list[float]) -> float:
    """Pearson correlation of mid-ranks; 0 when either side is constant."""
    if len(xs) != len(ys):
        raise ValueError(f"length mismatch: {len(xs)} vs {len(ys)}")
    if len(xs) < 2:
        raise ValueError("need at least 2 paired observations")
    ra = _midranks(list(xs))
    rb = _midranks(list(ys))
    n = len(ra)
    mean_a = sum(ra) / n
    mean_b = sum(rb) / n
    da = [a - mean_a for a in ra]
    db = [b - mean_b for b in rb]
    var_a = sum(d * d for d in da)
    var_b = sum(d * d for d in db)
    if var_a == 0.0 or var_b == 0.0:
        return 0.0
    return sum(a * b for a, b in zip(da, db)) / math.sqrt(var_a * var_b)


def adjust_weights(
    lambdas: dict, correlations: dict[tuple, float]
) -> dict:
    """Attenuate each weight by the total absolute correlation its metric
    carries with the others: lambda / (1 + sum of |rho| over partners)."""
    for pair, rho in correlations.items():
        if abs(rho) > 1.0:
            raise ValueError(f"correlation out of [-1, 1] for {pair}: {rho}")
    adjusted = {}
    for metric, lam in lambdas.items():
        if lam < 0:
            raise ValueError(f"lambda must be non-negative: {metric}")
        total = 0.0
        for (a, b), rho in correlations.items():
            if a == metric and b != metric:
                total += abs(rho)
            elif b == metric and a != metric:
                total += abs(rho)
        adjusted[metric] = lam / (1.0 + total)
    return adjusted
