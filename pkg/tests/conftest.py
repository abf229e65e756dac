import numpy as np
import pytest
from hypothesis import settings

from pauc_dro import LabeledDataset, ScoreModel, SynthSpec, generate

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


def scored(pos, neg):
    """Dataset plus identity model whose scores are exactly ``pos`` / ``neg``."""
    data = LabeledDataset.from_classes(np.reshape(pos, (-1, 1)), np.reshape(neg, (-1, 1)))
    return data, ScoreModel("linear_raw", 1, [1.0])


@pytest.fixture
def small_overlap():
    return generate(SynthSpec(n=60, pos_frac=0.25, d=4, preset="overlap", seed=3))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
