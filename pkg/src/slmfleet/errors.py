"""Exception types shared across the orchestrator."""


class FleetError(Exception):
    """Base class for orchestration errors."""


class DuplicateModelError(FleetError):
    pass


class UnknownModelError(FleetError):
    pass


class EmptyFleetError(FleetError):
    pass


class DuplicateRequestError(FleetError):
    pass


class UnknownRequestError(FleetError):
    pass


class CodecError(FleetError):
    """Wire message failed to decode. ``reason`` is a short machine tag."""

    def __init__(self, reason: str, detail: str = ""):
        super().__init__(detail or reason)
        self.reason = reason
        self.detail = detail


class ConfigError(FleetError):
    """Invalid experiment configuration; ``problems`` lists every violation."""

    def __init__(self, problems: list[str]):
        super().__init__("; ".join(problems))
        self.problems = list(problems)
