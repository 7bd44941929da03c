import pytest

import facshare as fs
from oracles import suite_dims


@pytest.fixture(scope="session")
def suite500():
    """500 seeded random instances with n <= 6, m <= 4 (the oracle suite)."""
    return [fs.generate_instance(*suite_dims(seed), seed=seed)
            for seed in range(500)]


@pytest.fixture
def running_instance():
    """Two agents at the two facilities: positions (0, 3), costs (2, 4)."""
    return fs.Instance(fs.Environment((0.0, 3.0), (2.0, 4.0)),
                       fs.Profile((0.0, 3.0)), name="running")
