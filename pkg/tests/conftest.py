from lwm.core import EpisodeBuffer, Transition
from lwm.envs import frozenlake as fl

# the four failed episodes and the first success of the 4x4 case study, as action lists
CASE_STUDY_EPISODES = [
    ["down"],
    ["right", "down", "down"],
    ["right", "right"],
    ["right", "down", "right", "right"],
    ["right", "down", "right", "down", "right", "down"],
]
CASE_STUDY_HOLES = [(1, 0), (2, 1), (0, 2), (1, 3)]
SAFE_PATH_CELLS = [(0, 1), (1, 1), (1, 2), (2, 2), (2, 3)]


def play(env, actions) -> EpisodeBuffer:
    """Run ``actions`` from a fresh reset and return the episode buffer."""
    buf = EpisodeBuffer()
    obs = env.reset()
    for a in actions:
        r = env.step(a)
        buf.append(Transition(obs, a, r.reward, r.obs, r.done))
        obs = r.obs
        if r.done:
            break
    return buf


def case_study_episode(i: int) -> EpisodeBuffer:
    return play(fl.FrozenLakeEnv(fl.CASE_STUDY_BOARD), CASE_STUDY_EPISODES[i])
