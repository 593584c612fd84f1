"""Shared fixtures. The door set and its policy are expensive; fit once."""

import numpy as np
import pytest

from gplfd import generate_synthetic_door_set, learn_policy


@pytest.fixture(scope="session")
def door_demos():
    return generate_synthetic_door_set(seed=0)


@pytest.fixture(scope="session")
def door_policy(door_demos):
    return learn_policy(door_demos)


@pytest.fixture(scope="session")
def door_holdout():
    # Unseen radius, one pull, fresh seed: a truth trajectory the policy
    # never trained on.
    (demo,) = generate_synthetic_door_set(seed=7, radii=(0.75,), repeats=1)
    return demo


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)
