import numpy as np
import pytest
from hypothesis import strategies as st

from kslab import hilbert


@pytest.fixture
def np_rng():
    return np.random.default_rng(12345)


def random_states(n, seed=777, dim=4):
    rng = np.random.default_rng(seed)
    return [hilbert.random_state(rng, dim) for _ in range(n)]


_component = st.floats(-1.0, 1.0, allow_nan=False, allow_infinity=False)


@st.composite
def states(draw, dim=4):
    re = draw(st.lists(_component, min_size=dim, max_size=dim))
    im = draw(st.lists(_component, min_size=dim, max_size=dim))
    vec = np.array(re) + 1j * np.array(im)
    if np.linalg.norm(vec) < 1e-3:
        vec[0] += 1.0
    return hilbert.StateVector.from_amplitudes(vec)
