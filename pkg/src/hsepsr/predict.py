"""Prediction of future observations from a filtered belief.

The belief's conditioning matrix against the shifted test-action windows
(the same kernel Bayes regression the filter's propagation step forms,
with the current weights as prior) is applied to the kernel vector of a
planned action window.  That yields weights gamma over the shifted
test-observation windows; expectations of any per-window function are
then weighted sums.  The observation predicted for step j of the window
is the j-th block of the shifted window list, mapped back to raw units
with the model's standardizer.

Horizons past the window length roll the filter forward: each advance
feeds the one-step-ahead predicted observation back through a filter
update together with the planned action, then predicts the deepest step
of the next window.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from hsepsr.filter import update_standardized, update_standardized_many
from hsepsr.gramops import kbr_step, kbr_step_batch
from hsepsr.kernels import gram, kernel_vector
from hsepsr.learner import BeliefState, HsePsrModel

MODES = ("conditioned", "direct")


def _gamma_standardized(
    model: HsePsrModel, weights: np.ndarray, window_std_flat: np.ndarray
) -> np.ndarray:
    k_w = kernel_vector(
        model.kernels.test_action, model.shifted_test_actions, window_std_flat
    )
    return kbr_step(
        weights, model.grams.G_TAs_TAs, model.grams.lam_T, k_w,
        label="window-conditioning",
    )


def condition_test_actions(
    model: HsePsrModel, state: BeliefState, action_window: np.ndarray
) -> np.ndarray:
    """Weights over shifted test-observation windows after conditioning the
    belief on a raw planned action window of shape (test_length, da)."""
    window = np.asarray(action_window, dtype=float)
    expected = (model.config.test_length, model.action_dim)
    if window.size != expected[0] * expected[1]:
        raise ValueError(
            f"planned action window must hold exactly {expected[0]} actions "
            f"of dimension {expected[1]}, got shape {window.shape}"
        )
    window = window.reshape(expected)
    window_std = model.standardizer.transform_actions(window).ravel()
    return _gamma_standardized(model, state.weights, window_std)


def expect_function(
    model: HsePsrModel, gamma: np.ndarray, values: np.ndarray
) -> np.ndarray:
    """Expectation of per-sample values (T,) or (T, m) under weights gamma."""
    values = np.asarray(values, dtype=float)
    if values.shape[0] != model.n_samples:
        raise ValueError("values must carry one row per training sample")
    return values.T @ gamma


def _obs_block(model: HsePsrModel, horizon: int) -> np.ndarray:
    do = model.obs_dim
    return model.shifted_test_obs[:, (horizon - 1) * do : horizon * do]


def predict_observation_at(
    model: HsePsrModel,
    state: BeliefState,
    future_actions: np.ndarray | None,
    horizon: int,
    mode: str = "conditioned",
) -> np.ndarray:
    """Predict the raw observation ``horizon`` steps ahead (within the window).

    ``future_actions`` holds at least ``test_length`` planned actions; the
    first window of them is conditioned on.  Mode "direct" skips action
    conditioning and evaluates the expectation under the belief weights
    themselves, a diagnostic for how informative the belief alone is.
    """
    N = model.config.test_length
    if mode not in MODES:
        raise ValueError(f"unknown prediction mode {mode!r}")
    if not 1 <= horizon <= N:
        raise ValueError(
            f"horizon {horizon} outside the test window (1..{N}); "
            "use rollout_predict for longer ranges"
        )
    if mode == "direct":
        weights = state.weights
    else:
        if future_actions is None:
            raise ValueError("conditioned prediction needs planned actions")
        future_actions = np.asarray(future_actions, dtype=float).reshape(
            -1, model.action_dim
        )
        if future_actions.shape[0] < N:
            raise ValueError(
                f"need at least {N} planned actions, got {future_actions.shape[0]}"
            )
        weights = condition_test_actions(model, state, future_actions[:N])
    pred_std = expect_function(model, weights, _obs_block(model, horizon))
    return model.standardizer.inverse_obs(pred_std)


@dataclass
class RolloutResult:
    """Predicted observations per requested horizon plus any belief resets.

    ``predictions[i]`` is the raw observation predicted ``horizons[i]``
    steps ahead; ``resets`` lists rollout levels whose feedback update
    collapsed the belief.
    """

    horizons: list
    predictions: np.ndarray
    resets: list = field(default_factory=list)


def rollout_predict(
    model: HsePsrModel,
    state: BeliefState,
    future_actions: np.ndarray,
    horizons=None,
    renormalize: bool = False,
) -> RolloutResult:
    """Predict raw observations for the requested horizons.

    Horizons within the first test window come straight from conditioning
    on it.  Each further horizon advances the belief one step by feeding
    back the one-step-ahead predicted observation through a filter update
    together with the planned action, then reads the deepest step of the
    advanced window.  ``horizons`` defaults to every step covered by the
    plan; the plan must span at least ``test_length`` actions and the
    largest horizon.
    """
    N = model.config.test_length
    do = model.obs_dim
    A = np.asarray(future_actions, dtype=float).reshape(-1, model.action_dim)
    H = A.shape[0]
    if horizons is None:
        horizons = list(range(1, H + 1))
    else:
        horizons = sorted(int(h) for h in set(horizons))
    if not horizons or horizons[0] < 1:
        raise ValueError("horizons must be positive integers")
    max_h = horizons[-1]
    if H < N:
        raise ValueError(f"need at least {N} planned actions, got {H}")
    if H < max_h:
        raise ValueError(f"horizon {max_h} needs {max_h} planned actions, got {H}")
    A_std = model.standardizer.transform_actions(A)
    obs_windows = model.shifted_test_obs

    wanted = set(horizons)
    preds_std = {}
    resets: list[int] = []
    current = state
    last_level = max(0, max_h - N)
    for level in range(last_level + 1):
        gamma = _gamma_standardized(
            model, current.weights, A_std[level : level + N].ravel()
        )
        window_pred = (obs_windows.T @ gamma).reshape(N, do)
        if level == 0:
            for h in range(1, N + 1):
                if h in wanted:
                    preds_std[h] = window_pred[h - 1]
        elif level + N in wanted:
            preds_std[level + N] = window_pred[N - 1]
        if level < last_level:
            current = update_standardized(
                model, current, A_std[level], window_pred[0], renormalize
            )
            if current.degenerate:
                resets.append(level)
                current = model.feasible_state()
    stacked = np.stack([preds_std[h] for h in horizons])
    return RolloutResult(
        horizons=horizons,
        predictions=model.standardizer.inverse_obs(stacked),
        resets=resets,
    )


# --- row-batched internals ---------------------------------------------------


def condition_test_actions_many(
    model: HsePsrModel, W: np.ndarray, windows_std: np.ndarray
) -> np.ndarray:
    """Batched gamma weights: row b conditions belief W[b] on windows_std[b].

    Skips the escalation fallback, like the other row-batched internals.
    """
    K = gram(model.kernels.test_action, windows_std, model.shifted_test_actions)
    return kbr_step_batch(W, model.grams.G_TAs_TAs, model.grams.lam_T, K)


def rollout_predict_many(
    model: HsePsrModel,
    W: np.ndarray,
    future_actions: np.ndarray,
    horizons,
    renormalize: bool = False,
) -> np.ndarray:
    """Batched ``rollout_predict``: row b rolls belief W[b] under plan b.

    ``future_actions`` has shape (B, P, da) with P covering at least the
    test window and the largest horizon.  Returns raw predictions of
    shape (B, n_horizons, d_o) with horizons sorted ascending.  Advances
    all rows through each rollout level together; rows whose feedback
    update collapses restart from the feasible state silently.
    """
    N = model.config.test_length
    do = model.obs_dim
    W = np.asarray(W, dtype=float).copy()
    A = np.asarray(future_actions, dtype=float)
    if A.ndim != 3 or A.shape[0] != W.shape[0] or A.shape[2] != model.action_dim:
        raise ValueError(
            "future_actions must be (n_beliefs, plan_length, action_dim), "
            f"got {A.shape}"
        )
    horizons = sorted(int(h) for h in set(horizons))
    if not horizons or horizons[0] < 1:
        raise ValueError("horizons must be positive integers")
    max_h = horizons[-1]
    if A.shape[1] < max(N, max_h):
        raise ValueError(
            f"plans must span at least {max(N, max_h)} actions, got {A.shape[1]}"
        )
    B, P, da = A.shape
    A_std = model.standardizer.transform_actions(A.reshape(-1, da)).reshape(A.shape)
    obs_windows = model.shifted_test_obs
    slot = {h: i for i, h in enumerate(horizons)}
    preds_std = np.empty((B, len(horizons), do))
    last_level = max(0, max_h - N)
    for level in range(last_level + 1):
        windows = A_std[:, level : level + N].reshape(B, N * da)
        gamma = condition_test_actions_many(model, W, windows)
        window_pred = (gamma @ obs_windows).reshape(B, N, do)
        if level == 0:
            for h in range(1, N + 1):
                if h in slot:
                    preds_std[:, slot[h]] = window_pred[:, h - 1]
        elif level + N in slot:
            preds_std[:, slot[level + N]] = window_pred[:, N - 1]
        if level < last_level:
            W = update_standardized_many(
                model, W, A_std[:, level], window_pred[:, 0], renormalize
            )
    raw = model.standardizer.inverse_obs(preds_std.reshape(-1, do))
    return raw.reshape(B, len(horizons), do)
