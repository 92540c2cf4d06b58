"""Recursive belief updates from action-observation pairs.

A belief is a weight vector over the T training samples.  Absorbing one
action-observation pair runs three stages:

1. propagate:   form the belief's own conditioning matrix against the
                shifted test-action windows (a kernel Bayes regression
                with the current weights as prior), pair it with the
                shifted test-observation windows, and project the result
                back onto the training states through their Gram matrix;
                this realigns the belief with the windows one step ahead,
2. action step: mix the per-sample action conditioning matrices by the
                propagated weights and apply them to the executed action's
                kernel vector against the training actions,
3. obs step:    kernel Bayes conditioning of the resulting weights on the
                received observation's kernel vector against the training
                observations.

The propagation conditional is recomputed from the weights at every step
(it is not linear in them), which keeps the realized pair coupled to the
advanced belief and keeps the weights near unit sum without any explicit
rescaling.  Weights are signed and are not clamped or rescaled by default.
``renormalize=True`` additionally rescales the weights to sum to one after
each update for long-horizon stability experiments.  A belief whose mass
collapses is flagged degenerate; drivers restart such beliefs from the
uniform feasible state and record where that happened.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from hsepsr.gramops import conditioning_matrix, kbr_step, kbr_step_batch, ridge_solve
from hsepsr.kernels import gram, kernel_vector
from hsepsr.learner import DEGENERATE_TOL, BeliefState, HsePsrModel


def _weights_of(state) -> np.ndarray:
    if isinstance(state, BeliefState):
        return state.weights
    return np.asarray(state, dtype=float)


def propagate(
    model: HsePsrModel, state, events: list | None = None
) -> np.ndarray:
    """Advance belief weights one step ahead of the next conditioning.

    The returned weights express the belief's shifted-window conditional
    in the training-state basis: entry i is the inner product of that
    conditional with training state i, run through the states' ridge
    inverse.  Accepts a ``BeliefState`` or a bare weight vector and
    returns the propagated weight vector.
    """
    g = model.grams
    C_w = conditioning_matrix(
        _weights_of(state), g.G_TAs_TAs, g.lam_T,
        label="shift-conditional", events=events,
    )
    inner = g.G_TO_TOs @ C_w @ g.G_TA_TAs.T
    q = model.state_conditioning_flat() @ inner.ravel()
    return ridge_solve(
        model.gram_states, g.lam_T, q, label="propagate", events=events
    )


def condition_action(
    model: HsePsrModel, weights: np.ndarray, action: np.ndarray
) -> np.ndarray:
    """Condition propagated weights on an executed action (raw units).

    The mixed conditioning tensor contracts with the outer product of the
    weights and the action's kernel vector in one matrix-vector product.
    """
    a_std = model.standardizer.transform_actions(
        np.asarray(action, dtype=float).ravel()
    )
    k_a = kernel_vector(model.kernels.action, model.cur_actions, a_std)
    return _condition_action_k(model, _weights_of(weights), k_a)


def condition_observation(
    model: HsePsrModel,
    weights: np.ndarray,
    observation: np.ndarray,
    events: list | None = None,
    renormalize: bool = False,
) -> BeliefState:
    """Kernel Bayes step absorbing a received observation (raw units).

    Returns the posterior belief, rescaled to unit sum only when
    ``renormalize`` is set; a collapsed input or output is flagged
    degenerate.
    """
    o_std = model.standardizer.transform_obs(
        np.asarray(observation, dtype=float).ravel()
    )
    k_o = kernel_vector(model.kernels.obs, model.cur_obs, o_std)
    w = _condition_observation_k(model, _weights_of(weights), k_o, events)
    return _finalize(w, renormalize=renormalize)


def _condition_action_k(
    model: HsePsrModel, weights: np.ndarray, k_action: np.ndarray
) -> np.ndarray:
    flat = model.action_conditioning_flat()
    return flat @ np.outer(weights, k_action).ravel()


def _condition_observation_k(
    model: HsePsrModel,
    weights: np.ndarray,
    k_obs: np.ndarray,
    events: list | None = None,
) -> np.ndarray:
    return kbr_step(
        weights, model.grams.G_O_O, model.grams.lam_T, k_obs,
        label="obs-conditioning", events=events,
    )


def _finalize(weights: np.ndarray, renormalize: bool) -> BeliefState:
    if renormalize:
        total = float(weights.sum())
        if abs(total) < DEGENERATE_TOL:
            return BeliefState(weights, degenerate=True)
        return BeliefState(weights / total)
    if float(np.abs(weights).sum()) < DEGENERATE_TOL:
        return BeliefState(weights, degenerate=True)
    return BeliefState(weights)


def update_standardized(
    model: HsePsrModel,
    state: BeliefState,
    action_std: np.ndarray,
    obs_std: np.ndarray,
    renormalize: bool = False,
) -> BeliefState:
    """One filter step on inputs already in the model's standardized units."""
    if state.degenerate:
        return state
    k_a = kernel_vector(model.kernels.action, model.cur_actions, action_std)
    k_o = kernel_vector(model.kernels.obs, model.cur_obs, obs_std)
    w = propagate(model, state.weights)
    w = _condition_action_k(model, w, k_a)
    w = _condition_observation_k(model, w, k_o)
    return _finalize(w, renormalize)


def update(
    model: HsePsrModel,
    state: BeliefState,
    action: np.ndarray,
    observation: np.ndarray,
    renormalize: bool = False,
) -> BeliefState:
    """Absorb one raw action-observation pair into the belief."""
    a_std = model.standardizer.transform_actions(np.asarray(action, dtype=float).ravel())
    o_std = model.standardizer.transform_obs(np.asarray(observation, dtype=float).ravel())
    return update_standardized(model, state, a_std, o_std, renormalize)


@dataclass
class FilterResult:
    """Belief sequence from filtering: states[t] is the belief after pair t.

    ``resets`` lists the pair indices whose update collapsed; the stored
    state at such an index is the feasible restart, not the collapsed one.
    """

    states: list
    resets: list = field(default_factory=list)

    @property
    def final(self) -> BeliefState:
        if not self.states:
            raise ValueError("empty filter result has no final state")
        return self.states[-1]

    def weights_matrix(self) -> np.ndarray:
        return np.stack([s.weights for s in self.states])


def filter_trajectory(
    model: HsePsrModel,
    initial_state: BeliefState | None,
    actions: np.ndarray,
    observations: np.ndarray,
    renormalize: bool = False,
) -> FilterResult:
    """Filter aligned (n, d_a) actions and (n, d_o) observations.

    Returns one belief per absorbed pair (none for empty inputs),
    restarting from the feasible state whenever the belief collapses.
    """
    state = initial_state if initial_state is not None else model.feasible_state()
    actions = np.asarray(actions, dtype=float)
    observations = np.asarray(observations, dtype=float)
    if len(actions) != len(observations):
        raise ValueError("actions and observations must have equal length")
    a_std = model.standardizer.transform_actions(actions)
    o_std = model.standardizer.transform_obs(observations)
    states = []
    resets = []
    for t in range(len(actions)):
        state = update_standardized(model, state, a_std[t], o_std[t], renormalize)
        if state.degenerate:
            resets.append(t)
            state = model.feasible_state()
        states.append(state)
    return FilterResult(states=states, resets=resets)


# --- row-batched internals -------------------------------------------------
#
# These mirror the single-belief stages across B independent beliefs held as
# the rows of a (B, T) array.  They skip the escalation fallback (stacked
# factorizations have no per-row retry), so they are used by batch drivers
# that tolerate a hard failure, and by them only.


def propagate_many(
    model: HsePsrModel, W: np.ndarray, block: int = 32
) -> np.ndarray:
    """Propagate B beliefs held as rows of W in one stacked pass.

    Same arithmetic as ``propagate`` per row (the conditional is nonlinear
    in the weights, so each row gets its own factorization), but the
    factorizations are stacked and the projections become one matrix
    product per block of rows.  ``block`` bounds the stacked temporaries
    to O(block * T^2) memory.
    """
    g = model.grams
    W = np.asarray(W, dtype=float)
    B, T = W.shape
    flat = model.state_conditioning_flat()
    eye = np.eye(T)
    out = np.empty_like(W)
    for s in range(0, B, block):
        Wb = W[s : s + block]
        lhs = Wb[:, :, None] * g.G_TAs_TAs + g.lam_T * eye
        C_w = np.linalg.solve(lhs, Wb[:, :, None] * eye)
        inner = (g.G_TO_TOs @ C_w) @ g.G_TA_TAs.T
        q = inner.reshape(len(Wb), T * T) @ flat.T
        out[s : s + block] = ridge_solve(
            model.gram_states, g.lam_T, q.T, label="propagate-many"
        ).T
    return out


def condition_action_many(
    model: HsePsrModel, W: np.ndarray, K_a: np.ndarray
) -> np.ndarray:
    B, T = W.shape
    omega = (W[:, :, None] * K_a[:, None, :]).reshape(B, T * T)
    return omega @ model.action_conditioning_flat().T


def condition_observation_many(
    model: HsePsrModel, W: np.ndarray, K_o: np.ndarray
) -> np.ndarray:
    return kbr_step_batch(W, model.grams.G_O_O, model.grams.lam_T, K_o)


def update_standardized_many(
    model: HsePsrModel,
    W: np.ndarray,
    actions_std: np.ndarray,
    obs_std: np.ndarray,
    renormalize: bool = False,
) -> np.ndarray:
    """One filter step for B beliefs at once; rows that collapse are reset
    to the feasible state."""
    K_a = gram(model.kernels.action, actions_std, model.cur_actions)
    K_o = gram(model.kernels.obs, obs_std, model.cur_obs)
    W = propagate_many(model, W)
    W = condition_action_many(model, W, K_a)
    W = condition_observation_many(model, W, K_o)
    if renormalize:
        totals = W.sum(axis=1)
        bad = np.abs(totals) < DEGENERATE_TOL
        totals[bad] = 1.0
        W = W / totals[:, None]
    else:
        bad = np.abs(W).sum(axis=1) < DEGENERATE_TOL
    if bad.any():
        W[bad] = 1.0 / model.n_samples
    return W
