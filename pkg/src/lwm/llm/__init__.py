from lwm.llm.backends import (
    Backend,
    CountingBackend,
    HttpBackend,
    RecordingBackend,
    ReplayBackend,
    ScriptedBackend,
    cassette_key,
    complete,
)
from lwm.llm.oracle import CrafterOracle, FrozenLakeOracle, OracleBackend, oracle_for
from lwm.llm.schemas import SCHEMAS, FunctionSchema, LlmCall, LlmResult

__all__ = [
    "Backend",
    "CountingBackend",
    "CrafterOracle",
    "FrozenLakeOracle",
    "FunctionSchema",
    "HttpBackend",
    "LlmCall",
    "LlmResult",
    "OracleBackend",
    "RecordingBackend",
    "ReplayBackend",
    "SCHEMAS",
    "ScriptedBackend",
    "cassette_key",
    "complete",
    "oracle_for",
]
