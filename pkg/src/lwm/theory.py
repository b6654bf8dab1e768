"""Tabular checks of fact-based state abstraction.

Everything here works on explicit finite MDPs: build the abstract MDP induced
by a state aggregation, solve both, lift an abstract policy back to ground
states, and compare the realised value loss with the abstraction bound
``2 * eps_sim / (1 - gamma) + eps_plan``.

``eps_sim`` is computed as::

    max_{z, a, s in S_z}  |R(s,a) - R_abs(z,a)|  +  gamma * V_span * TV(P_Z(.|s,a), T_abs(.|z,a))

with ``V_span = (max R - min R) / (1 - gamma)`` and TV the total-variation
distance (half the L1 norm). This is a sufficient constant for the
simulation-lemma argument, so every bound checked below is sound, if loose.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from lwm.errors import InvalidArgument

VI_TOL = 1e-10
BOUND_SLACK = 1e-8
EPS_SIM_METRIC = "reward gap + gamma * V_span * total variation"


@dataclass
class TabularMdp:
    T: np.ndarray  # [S, A, S'] transition probabilities
    R: np.ndarray  # [S, A] expected rewards
    gamma: float

    def __post_init__(self):
        self.T = np.asarray(self.T, dtype=float)
        self.R = np.asarray(self.R, dtype=float)
        if self.T.ndim != 3 or self.T.shape[0] != self.T.shape[2]:
            raise InvalidArgument("T must have shape [S, A, S]")
        if self.R.shape != self.T.shape[:2]:
            raise InvalidArgument("R must have shape [S, A]")
        if not 0.0 <= self.gamma < 1.0:
            raise InvalidArgument("gamma must lie in [0, 1)")
        if not np.all(np.isfinite(self.R)):
            raise InvalidArgument("rewards must be finite")
        if np.any(self.T < 0) or not np.allclose(self.T.sum(axis=2), 1.0, rtol=0, atol=1e-12):
            raise InvalidArgument("each T[s, a] must be a probability distribution")

    @property
    def n_states(self) -> int:
        return self.T.shape[0]

    @property
    def n_actions(self) -> int:
        return self.T.shape[1]

    @property
    def v_span(self) -> float:
        return float(self.R.max() - self.R.min()) / (1.0 - self.gamma)


@dataclass(frozen=True)
class Abstraction:
    psi: tuple[int, ...]
    n_abstract: int

    def __post_init__(self):
        if set(self.psi) != set(range(self.n_abstract)):
            raise InvalidArgument("abstraction must map onto every index 0..n_abstract-1")

    @classmethod
    def from_labels(cls, labels) -> Abstraction:
        labels = [int(x) for x in labels]
        return cls(tuple(labels), max(labels) + 1)

    @classmethod
    def identity(cls, n: int) -> Abstraction:
        return cls(tuple(range(n)), n)

    def members(self, z: int) -> list[int]:
        return [s for s, k in enumerate(self.psi) if k == z]

    def lift_matrix(self) -> np.ndarray:
        """[S, Z] 0/1 membership matrix."""
        m = np.zeros((len(self.psi), self.n_abstract))
        m[np.arange(len(self.psi)), self.psi] = 1.0
        return m


@dataclass
class ValueFunction:
    v: np.ndarray
    gamma: float
    tol: float
    sweeps: int = 0
    residual: float = 0.0


def q_values(m: TabularMdp, v: np.ndarray) -> np.ndarray:
    return m.R + m.gamma * (m.T @ v)


def greedy_policy(m: TabularMdp, v: np.ndarray) -> np.ndarray:
    """Greedy action per state; ``argmax`` already prefers the lowest index on ties."""
    return np.argmax(q_values(m, v), axis=1)


def value_iteration(m: TabularMdp, tol: float = VI_TOL) -> ValueFunction:
    if tol <= 0:
        raise InvalidArgument("tol must be positive")
    # Starting from the constant midpoint keeps the first residual within half the reward span,
    # which gives the geometric sweep bound used in the tests.
    mid = 0.5 * (m.R.max() + m.R.min()) / (1.0 - m.gamma)
    v = np.full(m.n_states, mid)
    sweeps = 0
    while True:
        v_new = q_values(m, v).max(axis=1)
        sweeps += 1
        residual = float(np.max(np.abs(v_new - v)))
        v = v_new
        if residual <= tol:
            break
    final = float(np.max(np.abs(q_values(m, v).max(axis=1) - v)))
    return ValueFunction(v=v, gamma=m.gamma, tol=tol, sweeps=sweeps, residual=final)


def sweep_bound(m: TabularMdp, tol: float) -> int:
    span = float(m.R.max() - m.R.min())
    if span == 0.0 or m.gamma == 0.0:
        return 1
    return max(1, math.ceil(math.log(tol * (1.0 - m.gamma) / m.v_span) / math.log(m.gamma)))


def _policy_matrices(m: TabularMdp, policy) -> tuple[np.ndarray, np.ndarray]:
    policy = np.asarray(policy, dtype=int)
    if policy.shape != (m.n_states,):
        raise InvalidArgument("policy must assign one action to every state")
    idx = np.arange(m.n_states)
    return m.T[idx, policy], m.R[idx, policy]


def policy_evaluation(m: TabularMdp, policy, tol: float = VI_TOL) -> ValueFunction:
    """Iterative evaluation of a deterministic policy to sup-norm change <= tol."""
    P, r = _policy_matrices(m, policy)
    v = np.zeros(m.n_states)
    sweeps = 0
    while True:
        v_new = r + m.gamma * (P @ v)
        sweeps += 1
        delta = float(np.max(np.abs(v_new - v)))
        v = v_new
        if delta <= tol:
            break
    return ValueFunction(v=v, gamma=m.gamma, tol=tol, sweeps=sweeps, residual=delta)


def policy_value_exact(m: TabularMdp, policy) -> np.ndarray:
    """Direct linear solve of (I - gamma P) v = r."""
    P, r = _policy_matrices(m, policy)
    return np.linalg.solve(np.eye(m.n_states) - m.gamma * P, r)


def optimal_value(m: TabularMdp, tol: float = VI_TOL) -> np.ndarray:
    """V* from value iteration, then polished by exact evaluation of its greedy policy.

    Stopping VI at residual ``tol`` leaves an error up to tol * gamma / (1 - gamma),
    which at gamma = 0.99 is as large as the bound-check slack. A few rounds of
    policy iteration remove it.
    """
    v = value_iteration(m, tol).v
    pi = greedy_policy(m, v)
    for _ in range(m.n_states * m.n_actions + 1):
        v = policy_value_exact(m, pi)
        nxt = greedy_policy(m, v)
        if np.array_equal(nxt, pi):
            break
        pi = nxt
    return v


def build_abstract_mdp(g: TabularMdp, psi: Abstraction) -> TabularMdp:
    if len(psi.psi) != g.n_states:
        raise InvalidArgument("abstraction size does not match the MDP")
    lift = psi.lift_matrix()
    counts = lift.sum(axis=0)
    if np.any(counts == 0):
        raise InvalidArgument("every abstract state needs at least one ground state")
    weights = lift / counts  # uniform over members
    R = weights.T @ g.R
    P_Z = g.T @ lift  # [S, A, Z]
    T = np.einsum("sz,sak->zak", weights, P_Z)
    T = T / T.sum(axis=2, keepdims=True)
    return TabularMdp(T=T, R=R, gamma=g.gamma)


def epsilon_sim(g: TabularMdp, psi: Abstraction, abstract: TabularMdp) -> float:
    psi_idx = np.asarray(psi.psi)
    P_Z = g.T @ psi.lift_matrix()
    reward_gap = np.abs(g.R - abstract.R[psi_idx])
    tv = 0.5 * np.abs(P_Z - abstract.T[psi_idx]).sum(axis=2)
    return float(np.max(reward_gap + g.gamma * g.v_span * tv))


def lift_policy(abstract_policy, psi: Abstraction) -> np.ndarray:
    abstract_policy = np.asarray(abstract_policy, dtype=int)
    if abstract_policy.shape != (psi.n_abstract,):
        raise InvalidArgument("abstract policy must cover every abstract state")
    return abstract_policy[np.asarray(psi.psi)]


def suboptimal_policy(abstract: TabularMdp, v_star: np.ndarray, eps_plan: float) -> tuple[np.ndarray, float]:
    """Greedy policy with at most one state switched to its second-best action.

    Among all single switches, the one with the smallest induced abstract loss is
    taken if that loss stays within ``eps_plan``. Returns (policy, realised loss).
    """
    q = q_values(abstract, v_star)
    greedy = np.argmax(q, axis=1)
    if eps_plan <= 0 or abstract.n_actions < 2:
        return greedy, 0.0
    best = None
    for z in range(abstract.n_states):
        order = np.argsort(-q[z], kind="stable")
        candidate = greedy.copy()
        candidate[z] = order[1]
        loss = float(np.max(v_star - policy_value_exact(abstract, candidate)))
        if best is None or loss < best[1]:
            best = (candidate, loss)
    if best is not None and best[1] <= eps_plan:
        return best[0], max(best[1], 0.0)
    return greedy, 0.0


@dataclass
class BoundReport:
    lhs: float
    terms: tuple[float, float, float]
    bound_rhs: float
    holds: bool
    eps_sim: float
    eps_plan: float
    realised_eps_plan: float
    worst_state: int
    eq1_gap: float  # max_s |V*_G(s) - V*_abs(psi(s))|
    eq1_rhs: float  # eps_sim / (1 - gamma)
    eq1_holds: bool
    metric: str = EPS_SIM_METRIC


def decompose_value_loss(g, psi: Abstraction, abstract, pi_L, tol: float = VI_TOL, state: int | None = None):
    """Split V*_G(s) - V^{pi}_G(s) into abstraction, planning and simulation terms.

    ``pi_L`` is a policy on abstract states. Terms are evaluated at ``state``, or
    at the state with the largest loss when ``state`` is None.
    Returns (A, B, C, total).
    """
    psi_idx = np.asarray(psi.psi)
    v_g = optimal_value(g, tol)
    v_abs = optimal_value(abstract, tol)
    v_pi_abs = policy_value_exact(abstract, pi_L)
    v_pi_g = policy_value_exact(g, lift_policy(pi_L, psi))
    loss = v_g - v_pi_g
    s = int(np.argmax(loss)) if state is None else state
    z = psi_idx[s]
    A = v_g[s] - v_abs[z]
    B = v_abs[z] - v_pi_abs[z]
    C = v_pi_abs[z] - v_pi_g[s]
    return float(A), float(B), float(C), float(A + B + C)


def check_ifba_bound(g: TabularMdp, psi: Abstraction, eps_plan: float = 0.0, tol: float = VI_TOL,
                     slack: float = BOUND_SLACK) -> BoundReport:
    if eps_plan < 0:
        raise InvalidArgument("eps_plan must be non-negative")
    abstract = build_abstract_mdp(g, psi)
    v_g = optimal_value(g, tol)
    v_abs = optimal_value(abstract, tol)
    pi_abs, realised = suboptimal_policy(abstract, v_abs, eps_plan)
    v_pi_g = policy_value_exact(g, lift_policy(pi_abs, psi))
    loss = v_g - v_pi_g
    worst = int(np.argmax(loss))
    A, B, C, _ = decompose_value_loss(g, psi, abstract, pi_abs, tol, state=worst)
    eps = epsilon_sim(g, psi, abstract)
    rhs = 2.0 * eps / (1.0 - g.gamma) + eps_plan
    eq1_gap = float(np.max(np.abs(v_g - v_abs[np.asarray(psi.psi)])))
    eq1_rhs = eps / (1.0 - g.gamma)
    lhs = float(loss[worst])
    return BoundReport(
        lhs=lhs,
        terms=(A, B, C),
        bound_rhs=rhs,
        holds=lhs <= rhs + slack,
        eps_sim=eps,
        eps_plan=eps_plan,
        realised_eps_plan=realised,
        worst_state=worst,
        eq1_gap=eq1_gap,
        eq1_rhs=eq1_rhs,
        eq1_holds=eq1_gap <= eq1_rhs + slack,
    )


# -- learned-model perturbation (qualitative) ---------------------------------


@dataclass
class PerturbationReport:
    delta: float
    realised_delta: float
    lhs: float
    bound_rhs: float
    within: bool


def perturb_model(m: TabularMdp, delta: float, rng: np.random.Generator) -> TabularMdp:
    noise_T = rng.dirichlet(np.ones(m.n_states), size=m.T.shape[:2])
    T = (1.0 - delta) * m.T + delta * noise_T
    R = m.R + delta * rng.uniform(-1.0, 1.0, size=m.R.shape)
    return TabularMdp(T=T / T.sum(axis=2, keepdims=True), R=R, gamma=m.gamma)


def perturbed_model_report(g: TabularMdp, psi: Abstraction, delta: float, c_sum: float,
                           rng: np.random.Generator, tol: float = VI_TOL) -> PerturbationReport:
    """Plan in a perturbed abstract model and compare loss with the additive model-error term.

    ``c_sum`` stands in for the unspecified constants; nothing is asserted about it.
    """
    abstract = build_abstract_mdp(g, psi)
    learned = perturb_model(abstract, delta, rng)
    realised = float(max(np.max(np.abs(learned.R - abstract.R)),
                         np.max(0.5 * np.abs(learned.T - abstract.T).sum(axis=2))))
    pi = greedy_policy(learned, value_iteration(learned, tol).v)
    loss = float(np.max(optimal_value(g, tol) - policy_value_exact(g, lift_policy(pi, psi))))
    eps = epsilon_sim(g, psi, abstract)
    rhs = 2.0 * eps / (1.0 - g.gamma) + c_sum * realised / (1.0 - g.gamma) ** 2
    return PerturbationReport(delta=delta, realised_delta=realised, lhs=loss, bound_rhs=rhs, within=loss <= rhs)


# -- randomised sweep ---------------------------------------------------------


def random_mdp(rng: np.random.Generator, n_states: int, n_actions: int, gamma: float) -> TabularMdp:
    T = rng.dirichlet(np.full(n_states, 0.5), size=(n_states, n_actions))
    # sparsify some rows to get near-deterministic dynamics as well
    mask = rng.random((n_states, n_actions)) < 0.3
    for s, a in zip(*np.nonzero(mask)):
        row = np.zeros(n_states)
        row[rng.integers(n_states)] = 1.0
        T[s, a] = row
    T = T / T.sum(axis=2, keepdims=True)
    R = rng.uniform(-1.0, 1.0, size=(n_states, n_actions))
    return TabularMdp(T=T, R=R, gamma=gamma)


def random_abstraction(rng: np.random.Generator, n_states: int) -> Abstraction:
    k = int(rng.integers(1, n_states + 1))
    labels = np.concatenate([np.arange(k), rng.integers(0, k, size=n_states - k)])
    rng.shuffle(labels)
    return Abstraction.from_labels(labels)


@dataclass
class SweepSpec:
    instances: int = 200
    min_states: int = 2
    max_states: int = 30
    max_actions: int = 4
    gammas: tuple[float, ...] = (0.9, 0.95, 0.99)
    eps_plans: tuple[float, ...] = (0.0, 0.1)
    seed: int = 0
    tol: float = VI_TOL
    slack: float = BOUND_SLACK
    extra: dict = field(default_factory=dict)

    @classmethod
    def from_file(cls, path: str | Path) -> SweepSpec:
        data = json.loads(Path(path).read_text())
        known = {k: v for k, v in data.items() if k in cls.__dataclass_fields__}
        for key in ("gammas", "eps_plans"):
            if key in known:
                known[key] = tuple(known[key])
        return cls(**known)


SWEEP_COLUMNS = ["instance", "n_states", "n_actions", "n_abstract", "gamma", "eps_sim", "eps_plan",
                 "lhs", "rhs", "holds", "term_A", "term_B", "term_C", "telescoping_error",
                 "eq1_gap", "eq1_rhs", "eq1_holds"]


def run_sweep(spec: SweepSpec) -> list[dict]:
    rng = np.random.default_rng(spec.seed)
    rows = []
    for i in range(spec.instances):
        n_states = int(rng.integers(spec.min_states, spec.max_states + 1))
        n_actions = int(rng.integers(1, spec.max_actions + 1))
        gamma = float(spec.gammas[int(rng.integers(len(spec.gammas)))])
        g = random_mdp(rng, n_states, n_actions, gamma)
        psi = random_abstraction(rng, n_states)
        for eps_plan in spec.eps_plans:
            rep = check_ifba_bound(g, psi, eps_plan, tol=spec.tol, slack=spec.slack)
            A, B, C = rep.terms
            rows.append({
                "instance": i,
                "n_states": n_states,
                "n_actions": n_actions,
                "n_abstract": psi.n_abstract,
                "gamma": gamma,
                "eps_sim": rep.eps_sim,
                "eps_plan": eps_plan,
                "lhs": rep.lhs,
                "rhs": rep.bound_rhs,
                "holds": rep.holds,
                "term_A": A,
                "term_B": B,
                "term_C": C,
                "telescoping_error": abs(A + B + C - rep.lhs),
                "eq1_gap": rep.eq1_gap,
                "eq1_rhs": rep.eq1_rhs,
                "eq1_holds": rep.eq1_holds,
            })
    return rows


def write_sweep_csv(rows: list[dict], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# eps_sim metric: {EPS_SIM_METRIC}\n")
        writer = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)
