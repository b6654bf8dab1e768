"""Exception hierarchy shared across the package."""


class LwmError(Exception):
    """Base class for all errors raised by this package."""


class InvalidArgument(LwmError, ValueError):
    pass


class ProtocolViolation(LwmError):
    """An environment or agent was driven outside its lifecycle (e.g. step after done)."""


class BackendError(LwmError):
    """Transport-level failure talking to an LLM backend."""


class ParseError(BackendError):
    """The backend replied, but the tool call could not be decoded."""


class ContractError(LwmError):
    """A reply decoded fine but does not match the expected function schema."""


class MissingCassette(BackendError):
    pass


class SimulationError(LwmError):
    pass


class EstimationError(LwmError):
    pass


class PlanningError(LwmError):
    pass


class UndefinedNormalization(LwmError, ZeroDivisionError):
    pass


class FactWarning(UserWarning):
    """Non-fatal anomalies in fact handling (empty facts, compression collapse)."""


class AgentWarning(UserWarning):
    """Non-fatal anomalies in agent decisions (illegal actions, failed branches)."""
