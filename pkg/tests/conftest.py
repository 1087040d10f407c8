"""Configure the test environment."""

from __future__ import annotations

import os
from typing import TYPE_CHECKING

import numpy as np
import pytest

from dpskit.client import VerdictCache
from dpskit.config import get_settings
from dpskit.enums import CacheStatus

if TYPE_CHECKING:
    from collections.abc import Iterator


@pytest.fixture(autouse=True)
def test_setup() -> Iterator[None]:
    """Setup TEST environment to use FakeRedis, with the cache switched off.

    Settings are re-read for every test so `monkeypatch.setenv` works.
    """
    os.environ["CACHE_ENV"] = "TEST"
    get_settings.cache_clear()
    cache = VerdictCache()
    cache.status = CacheStatus.NONE
    cache.redis = None
    yield
    get_settings.cache_clear()
    cache.status = CacheStatus.NONE
    cache.redis = None


@pytest.fixture()
def verdict_cache() -> VerdictCache:
    """Return the cache singleton connected to a fresh FakeRedis server."""
    cache = VerdictCache()
    cache.init(host_url="", ttl=60, prefix="test")
    assert cache.redis is not None
    cache.redis.flushall()
    return cache


@pytest.fixture()
def rng() -> np.random.Generator:
    """Return a seeded random generator."""
    return np.random.default_rng(1234)
