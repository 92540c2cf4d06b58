"""Small discrete controlled processes with an exactly computable filter.

The hidden state is finite; actions pick a row-stochastic transition
table and each state emits a symbol from a row-stochastic observation
table.  Under a blind uniform policy the process generates integer-coded
action-observation trajectories suitable for exact-match kernels, and
the true one-step observation predictions follow from elementary belief
recursion over the hidden state, giving ground truth for convergence
tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from hsepsr.windows import Trajectory


def _check_stochastic(name: str, table: np.ndarray) -> None:
    if (table < 0).any() or not np.allclose(table.sum(axis=-1), 1.0, atol=1e-12):
        raise ValueError(f"{name} rows must be probability distributions")


@dataclass(frozen=True)
class DiscreteOracleSystem:
    """transitions[a][i, j] = P(next state j | state i, action a);
    emissions[i, k] = P(symbol k | state i); start is the initial state
    distribution."""

    transitions: np.ndarray
    emissions: np.ndarray
    start: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "transitions", np.asarray(self.transitions, dtype=float)
        )
        object.__setattr__(self, "emissions", np.asarray(self.emissions, dtype=float))
        object.__setattr__(self, "start", np.asarray(self.start, dtype=float))
        if self.transitions.ndim != 3 or (
            self.transitions.shape[1] != self.transitions.shape[2]
        ):
            raise ValueError("transitions must be (n_actions, n_states, n_states)")
        if self.emissions.shape[0] != self.n_states:
            raise ValueError("emissions must have one row per state")
        if self.start.shape != (self.n_states,):
            raise ValueError("start must be a state distribution")
        _check_stochastic("transition", self.transitions)
        _check_stochastic("emission", self.emissions)
        _check_stochastic("start", self.start[None, :])

    @property
    def n_actions(self) -> int:
        return self.transitions.shape[0]

    @property
    def n_states(self) -> int:
        return self.transitions.shape[1]

    @property
    def n_obs(self) -> int:
        return self.emissions.shape[1]


def default_system() -> DiscreteOracleSystem:
    """Ergodic 3-state, 3-symbol, 2-action system with informative emissions."""
    transitions = np.array(
        [
            [[0.80, 0.10, 0.10], [0.10, 0.80, 0.10], [0.20, 0.20, 0.60]],
            [[0.10, 0.70, 0.20], [0.30, 0.10, 0.60], [0.60, 0.30, 0.10]],
        ]
    )
    emissions = np.array(
        [[0.85, 0.10, 0.05], [0.10, 0.80, 0.10], [0.05, 0.15, 0.80]]
    )
    return DiscreteOracleSystem(
        transitions=transitions, emissions=emissions, start=np.full(3, 1.0 / 3.0)
    )


def cycle_system() -> DiscreteOracleSystem:
    """Deterministic 3-cycle: action 0 rotates forward, action 1 backward,
    and each state emits its own symbol, so beliefs become exact."""
    forward = np.roll(np.eye(3), 1, axis=1)
    return DiscreteOracleSystem(
        transitions=np.stack([forward, forward.T]),
        emissions=np.eye(3),
        start=np.array([1.0, 0.0, 0.0]),
    )


def sample_trajectory(
    system: DiscreteOracleSystem, n_steps: int, seed: int = 0
) -> Trajectory:
    """Sample under the blind uniform policy; symbols are integer codes."""
    rng = np.random.default_rng(seed)
    actions = rng.integers(system.n_actions, size=n_steps)
    obs = np.empty(n_steps, dtype=np.int64)
    state = rng.choice(system.n_states, p=system.start)
    for t, a in enumerate(actions):
        state = rng.choice(system.n_states, p=system.transitions[a, state])
        obs[t] = rng.choice(system.n_obs, p=system.emissions[state])
    return Trajectory(
        actions.astype(float).reshape(-1, 1),
        obs.astype(float).reshape(-1, 1),
        discrete=True,
    )


@dataclass
class ExactFilterResult:
    """True per-step quantities: predicted_obs[t] is P(o_t | a_1..t, o_1..t-1)
    and beliefs[t] the posterior state distribution after pair t."""

    predicted_obs: np.ndarray
    beliefs: np.ndarray
    resets: list = field(default_factory=list)


def exact_filter(
    system: DiscreteOracleSystem,
    actions: np.ndarray,
    observations: np.ndarray,
) -> ExactFilterResult:
    """Exact belief recursion over the hidden state.

    A zero-probability observation (impossible under the model) resets the
    belief to the start distribution, mirroring the degenerate-belief policy
    of the learned filter.
    """
    a_seq = np.asarray(actions).reshape(-1).astype(int)
    o_seq = np.asarray(observations).reshape(-1).astype(int)
    if a_seq.shape != o_seq.shape:
        raise ValueError("actions and observations must have equal length")
    n = a_seq.shape[0]
    predicted = np.empty((n, system.n_obs))
    beliefs = np.empty((n, system.n_states))
    resets = []
    b = system.start.copy()
    for t in range(n):
        b_next = system.transitions[a_seq[t]].T @ b
        predicted[t] = system.emissions.T @ b_next
        post = system.emissions[:, o_seq[t]] * b_next
        total = post.sum()
        if total <= 0.0:
            resets.append(t)
            b = system.start.copy()
        else:
            b = post / total
        beliefs[t] = b
    return ExactFilterResult(predicted_obs=predicted, beliefs=beliefs, resets=resets)
