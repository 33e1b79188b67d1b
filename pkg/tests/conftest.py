# -*- coding: utf-8 -*-
"""Shared fixtures for the cmpslab test suite"""

import numpy as np
import pytest
from hypothesis import settings

from core.variational import OptimizerConfig

settings.register_profile("cmpslab", deadline=None, max_examples=25)
settings.load_profile("cmpslab")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def fast_optimizer():
    return OptimizerConfig(max_iters=400, restarts=2, max_outer=25, seed=7)
