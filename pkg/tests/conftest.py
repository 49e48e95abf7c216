import numpy as np
import pytest

from tests.helpers import CONFIG_DIR


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(autouse=True)
def shipped_config_dir(monkeypatch):
    """Named configs resolve against the repository's configs/ regardless of a local .env."""
    monkeypatch.setenv("PPC_CONFIG_DIR", str(CONFIG_DIR))
