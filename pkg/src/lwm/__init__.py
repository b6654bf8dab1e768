"""Online fact learning with language-model lookahead planning, plus baselines and tabular theory checks."""
from lwm.core import EpisodeBuffer, FactMemory, HistoryBuffer, Transition
from lwm.planner import PlanConfig, Planner, compute_q

__version__ = "0.1.0"

__all__ = [
    "EpisodeBuffer",
    "FactMemory",
    "HistoryBuffer",
    "PlanConfig",
    "Planner",
    "Transition",
    "compute_q",
]
