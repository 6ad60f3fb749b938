import hypothesis
import numpy as np
import pytest

hypothesis.settings.register_profile("default", max_examples=60, deadline=None)
hypothesis.settings.register_profile("ci", max_examples=200, deadline=None)
hypothesis.settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def two_block_graph(n=20, p_in=0.8, p_out=0.1, seed=0):
    from vertexnom.sbm import BlockAssignment, BlockModel, sample_sbm

    sizes = (n // 2, n - n // 2)
    lam = np.array([[p_in, p_out], [p_out, p_in]])
    a = BlockAssignment.contiguous(sizes)
    return sample_sbm(BlockModel(sizes, lam), a, seed), a, lam
