import hypothesis
import numpy as np
import pytest

from hsepsr.learner import train
from hsepsr.windows import Trajectory, WindowConfig

hypothesis.settings.register_profile(
    "fast", max_examples=25, deadline=None, derandomize=True
)
hypothesis.settings.load_profile("fast")


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def synthetic_trajectory(seed=0, n=60, da=1, do=1):
    """Smooth controlled process: leaky state pushed by the action."""
    rng = np.random.default_rng(seed)
    actions = rng.uniform(-1.0, 1.0, (n, da))
    obs = np.zeros((n, do))
    state = np.zeros(do)
    for t in range(n):
        state = 0.8 * state + 0.5 * np.tanh(actions[t, 0]) + 0.05 * rng.normal(size=do)
        obs[t] = state
    return Trajectory(actions, obs)


@pytest.fixture(scope="session")
def model_factory():
    """Train-once cache of small models keyed by their construction args."""
    cache = {}

    def make(seed=0, n=60, L=2, N=3, da=1, do=1, lam=1e-3, **train_kw):
        key = (seed, n, L, N, da, do, lam, tuple(sorted(train_kw.items())))
        if key not in cache:
            traj = synthetic_trajectory(seed, n, da, do)
            model = train(traj, WindowConfig(L, N), lam=lam, **train_kw)
            cache[key] = (model, traj)
        return cache[key]

    return make
