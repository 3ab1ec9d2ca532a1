import pytest

from dmnls.ground_state import cached_ground_state


@pytest.fixture(scope="session")
def profile_cache(tmp_path_factory):
    path = tmp_path_factory.mktemp("profiles") / "q.csv"
    cached_ground_state(path, 1.0)
    return path


@pytest.fixture(scope="session")
def q_profile(profile_cache):
    return cached_ground_state(profile_cache, 1.0)
