"""Independent brute-force reference for the lookahead recurrence.

Dynamics come straight from the environment step functions; leaf values use the
exact value functions. Every action is expanded, in canonical order, first max wins.
"""
from functools import lru_cache

from lwm.envs import crafter as cm
from lwm.envs import frozenlake as fl
from lwm.llm.oracle import CrafterValueSolver, FrozenLakeOracle


def _argmax_first(qs):
    best = 0
    for i, q in enumerate(qs):
        if q > qs[best]:
            best = i
    return best


@lru_cache(maxsize=64)
def _fl_oracle(board):
    return FrozenLakeOracle(board)


@lru_cache(maxsize=16)
def _crafter_solver(n, gamma, penalty):
    # level values depend only on the level itself, so one solver serves every world of a size
    return CrafterValueSolver(n, gamma, penalty)


def frozenlake_plan(board, pos, depth, gamma=0.99, penalty=0.01):
    oracle = _fl_oracle(board)

    def leaf(p):
        return oracle.value(fl.render_obs(board, p), None, gamma, penalty)

    def q(p, a, d):
        nxt, r, done = fl.move(board, p, a)
        v = 0.0 if done else node(nxt, d - 1)
        return r - penalty + gamma * v

    def node(p, d):
        if d <= 0:
            return leaf(p)
        return max(q(p, a, d) for a in fl.ACTIONS)

    qs = [q(pos, a, depth) for a in fl.ACTIONS]
    return fl.ACTIONS[_argmax_first(qs)], qs


def crafter_plan(state, depth, gamma=0.99, penalty=0.01):
    solver = _crafter_solver(len(state.grid), gamma, penalty)

    def q(s, a, d):
        nxt, r, done = cm.transition(s, a)
        v = 0.0 if done else node(nxt, d - 1)
        return r - penalty + gamma * v

    def node(s, d):
        if d <= 0:
            return solver.value(s)
        return max(q(s, a, d) for a in cm.ACTIONS)

    qs = [q(state, a, depth) for a in cm.ACTIONS]
    return cm.ACTIONS[_argmax_first(qs)], qs
