"""Dynamic registry of model metadata used for routing and dispatch."""

from __future__ import annotations

import threading
from dataclasses import dataclass

from .errors import DuplicateModelError, UnknownModelError


@dataclass(frozen=True)
class ModelRecord:
    """Registration tuple: a task description plus operational metadata."""

    model_id: str
    description: str
    host: str
    port: int
    display_name: str = ""
    profile_ref: str = ""

    def __post_init__(self):
        if not self.model_id:
            raise ValueError("model_id must be non-empty")
        if not self.description.strip():
            raise ValueError("description must be non-empty")
        if not (1 <= self.port <= 65535):
            raise ValueError(f"port out of range: {self.port}")


class ModelRegistry:
    """Insertion-ordered model set. Registration order is the canonical fleet
    iteration order and the tie-break everywhere else (deterministic runs).

    Reads are lock-free snapshots; mutations are serialized.
    """

    def __init__(self):
        self._lock = threading.Lock()
        self._records: dict[str, ModelRecord] = {}

    def register(self, record: ModelRecord) -> None:
        with self._lock:
            if record.model_id in self._records:
                raise DuplicateModelError(f"model already registered: {record.model_id}")
            self._records[record.model_id] = record

    def deregister(self, model_id: str) -> ModelRecord:
        with self._lock:
            try:
                return self._records.pop(model_id)
            except KeyError:
                raise UnknownModelError(f"model not registered: {model_id}") from None

    def get(self, model_id: str) -> ModelRecord:
        try:
            return self._records[model_id]
        except KeyError:
            raise UnknownModelError(f"model not registered: {model_id}") from None

    def list_models(self) -> list[ModelRecord]:
        return list(self._records.values())

    def registration_index(self, model_id: str) -> int:
        for i, known in enumerate(self._records):
            if known == model_id:
                return i
        raise UnknownModelError(f"model not registered: {model_id}")

    def __contains__(self, model_id: str) -> bool:
        return model_id in self._records

    def __len__(self) -> int:
        return len(self._records)
