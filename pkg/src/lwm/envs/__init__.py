from lwm.envs.base import Env, EnvSpec, StepResult, env_description
from lwm.envs.crafter import CrafterEnv, CrafterState, CrafterWorld, crafter_step, gen_crafter
from lwm.envs.frozenlake import (
    CASE_STUDY_BOARD,
    FrozenLakeBoard,
    FrozenLakeEnv,
    frozen_lake_step,
    gen_frozen_lake,
    is_solvable,
)

__all__ = [
    "CASE_STUDY_BOARD",
    "CrafterEnv",
    "CrafterState",
    "CrafterWorld",
    "Env",
    "EnvSpec",
    "FrozenLakeBoard",
    "FrozenLakeEnv",
    "StepResult",
    "crafter_step",
    "env_description",
    "frozen_lake_step",
    "gen_crafter",
    "gen_frozen_lake",
    "is_solvable",
]
