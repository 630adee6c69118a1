import numpy as np
import pytest

from coshf import default_scenario, initialize, random_scenario
from coshf.trajectory import CoShfTrajectory, segment_times


@pytest.fixture(scope="session")
def default_sc():
    return default_scenario()


@pytest.fixture(scope="session")
def small_sc():
    """K=2 scenario in a small area; keeps solver-backed tests quick."""
    return random_scenario(seed=3, K=2, area=300.0, T=120.0, N=1)


def perturbed_reference(scenario, seed, pos_scale=25.0):
    """Feasible interior reference: jittered start plus redrawn weights.

    Positions get a bounded jitter (the start keeps the UAV pair far apart,
    so safety margins survive), hover durations refill the time budget, and
    scheduling weights are drawn from a flat Dirichlet.
    """
    rng = np.random.default_rng(seed)
    traj = initialize(scenario)
    K, N = traj.K, traj.N
    traj = CoShfTrajectory(
        hover_S=traj.hover_S + rng.normal(0, pos_scale, (K, 2)),
        hover_J=traj.hover_J + rng.normal(0, pos_scale, (K, 2)),
        turn_S=traj.turn_S + rng.normal(0, pos_scale, (K + 1, N, 2)),
        turn_J=traj.turn_J + rng.normal(0, pos_scale, (K + 1, N, 2)),
        hover_dur=traj.hover_dur,
        sched_hover=rng.dirichlet(np.full(K, 5.0), size=K),
        sched_fly=rng.dirichlet(np.full(K, 5.0), size=(K + 1) * (N + 1)
                                ).reshape(K + 1, N + 1, K),
    )
    budget = scenario.T - float(np.sum(segment_times(traj, scenario)))
    if budget <= 0:
        raise RuntimeError("perturbation broke the time budget")
    shares = rng.dirichlet(np.full(K, 5.0))
    traj.hover_dur = budget * shares
    return traj
