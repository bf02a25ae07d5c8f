"""Shared fixtures for localq-cert tests."""

import numpy as np
import pytest

from src.models import bell_state, ghz_state


@pytest.fixture(autouse=True)
def isolated_cache(tmp_path, monkeypatch):
    """Keep stabilizer dictionaries out of the user's cache directory."""
    monkeypatch.setenv("LOCQ_CACHE_DIR", str(tmp_path / "cache"))
    return tmp_path / "cache"


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def bell():
    """Bell pair on qubits 0, 1."""
    return bell_state()


@pytest.fixture
def bell3():
    """Bell pair followed by one |0> qubit."""
    return bell_state(extra_zeros=1)


@pytest.fixture
def ghz3():
    return ghz_state(3)
