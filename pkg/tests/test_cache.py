"""Test suite for the Redis verdict cache."""

import math
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest
import redis
from fakeredis import FakeRedis

from dpskit.client import VerdictCache, cached_membership, get_cache
from dpskit.config import get_settings
from dpskit.enums import CacheStatus, Regime, SolveStatus, Verdict
from dpskit.hermitian import HermitianMatrix
from dpskit.key_gen import get_args_str, get_cache_key
from dpskit.redis import redis_connect
from dpskit.sdp import SolveReport

pytestmark = pytest.mark.unit

REPORT = SolveReport(
    status=SolveStatus.OPTIMAL,
    verdict=Verdict.INFEASIBLE,
    margin=0.125,
    iterations=12,
    block_min_eigenvalues=[-0.125, 0.5],
)


def _state() -> HermitianMatrix:
    return HermitianMatrix(np.diag([1.0, 2.0, 3.0, 4.0]), (2, 2))


def test_connected_to_fake_server(verdict_cache) -> None:
    """With CACHE_ENV=TEST the cache talks to FakeRedis."""
    assert verdict_cache.connected
    assert verdict_cache.prefix == "test"


def test_add_then_get(verdict_cache) -> None:
    """A stored report reads back equal, with the configured TTL."""
    key = verdict_cache.get_cache_key("check", _state(), {"t": 1})
    assert verdict_cache.get(key) is None
    assert verdict_cache.add(key, REPORT)
    assert verdict_cache.get(key) == REPORT
    assert 0 < verdict_cache.redis.ttl(key) <= 60


def test_garbage_is_a_miss(verdict_cache) -> None:
    """Values that are not a report are ignored."""
    verdict_cache.redis.set("test:check:bad", b"not json")
    assert verdict_cache.get("test:check:bad") is None


def test_stalled_reports_are_not_stored(verdict_cache) -> None:
    """Only converged or inconsistent reports go to Redis."""
    stalled = REPORT.model_copy(
        update={"status": SolveStatus.STALLED, "verdict": None}
    )
    key = verdict_cache.get_cache_key("check", _state(), {"t": 1})
    assert not verdict_cache.add(key, stalled)
    assert verdict_cache.redis.get(key) is None


def test_inconsistent_report_keeps_its_infinite_margin(verdict_cache) -> None:
    """An inconsistent model reads back with margin +inf."""
    report = SolveReport(
        status=SolveStatus.INCONSISTENT,
        verdict=Verdict.INFEASIBLE,
        margin=math.inf,
    )
    key = verdict_cache.get_cache_key("check", _state(), {"t": 3})
    assert verdict_cache.add(key, report)
    assert verdict_cache.get(key) == report


def test_disabled_cache() -> None:
    """A disabled cache never hits and never stores."""
    cache = VerdictCache()
    cache.disable()
    assert cache.status is CacheStatus.DISABLED
    assert cache.get("anything") is None
    assert not cache.add("anything", REPORT)


def test_get_cache_follows_settings() -> None:
    """The cache stays off unless DPSKIT_CACHE_ENABLED is set."""
    assert get_cache().status is CacheStatus.DISABLED


def test_args_str() -> None:
    """Names are sorted, enums written by value, floats round-trip."""
    params = {"tol": 1e-7, "regime": Regime.LDOI, "t": 2}
    assert get_args_str(params) == "regime=ldoi,t=2,tol=1e-07"
    assert get_args_str({**params, "regime": "ldoi"}) == get_args_str(params)


def test_key_ignores_scale() -> None:
    """Scaled copies of a state share a key; level and prefix do not."""
    rho = _state()
    key = get_cache_key("dpskit", "check", rho, {"t": 2})
    assert key.startswith("dpskit:check:")
    assert get_cache_key("dpskit", "check", rho.scaled(3.0), {"t": 2}) == key
    assert get_cache_key("dpskit", "check", rho, {"t": 3}) != key
    assert get_cache_key("", "check", rho, {"t": 2}).startswith("check:")


def test_key_sees_registers() -> None:
    """The same entries under other registers are another query."""
    rho = _state()
    other = rho.with_registers((4,))
    key = get_cache_key("p", "check", rho, {})
    assert get_cache_key("p", "check", other, {}) != key


def test_cached_membership_hits(mocker, monkeypatch) -> None:
    """The second identical query is answered from the cache."""
    monkeypatch.setenv("DPSKIT_CACHE_ENABLED", "true")
    get_settings.cache_clear()
    cache = get_cache()
    assert cache.connected
    cache.redis.flushall()
    solve = mocker.patch("dpskit.client.check_membership", return_value=REPORT)
    first = cached_membership(_state(), 1)
    second = cached_membership(_state().scaled(2.0), 1)
    assert first == second == REPORT
    solve.assert_called_once()
    cached_membership(_state(), 2)
    assert solve.call_count == 2


def test_connect_uses_the_configured_timeout(mocker, monkeypatch) -> None:
    """Outside tests a real client is built with the settings timeout."""
    monkeypatch.delenv("CACHE_ENV")
    monkeypatch.setenv("DPSKIT_CACHE_TIMEOUT", "0.5")
    get_settings.cache_clear()
    from_url = mocker.patch("dpskit.redis.redis.from_url")
    from_url.return_value.ping.return_value = True
    status, client = redis_connect("redis://cache:6379")
    assert status is CacheStatus.CONNECTED
    assert client is from_url.return_value
    from_url.assert_called_once_with(
        "redis://cache:6379", socket_connect_timeout=0.5, socket_timeout=0.5
    )


@pytest.mark.parametrize(
    ("error", "expected"),
    [
        (redis.AuthenticationError("denied"), CacheStatus.AUTH_ERROR),
        (redis.ConnectionError("refused"), CacheStatus.CONN_ERROR),
        (redis.TimeoutError("slow"), CacheStatus.CONN_ERROR),
    ],
)
def test_connect_failures(mocker, monkeypatch, error, expected) -> None:
    """A failed ping gives an error status and no client."""
    monkeypatch.delenv("CACHE_ENV")
    from_url = mocker.patch("dpskit.redis.redis.from_url")
    from_url.return_value.ping.side_effect = error
    assert redis_connect("redis://cache:6379") == (expected, None)


def test_connect_rejects_a_bad_url(monkeypatch) -> None:
    """An unknown URL scheme is a connection error, not a crash."""
    monkeypatch.delenv("CACHE_ENV")
    assert redis_connect("ftp://cache") == (CacheStatus.CONN_ERROR, None)


def test_threads_share_one_connection(mocker, monkeypatch) -> None:
    """Worker threads racing on first use connect only once."""
    monkeypatch.setenv("DPSKIT_CACHE_ENABLED", "true")
    get_settings.cache_clear()

    def slow_connect(_url: str) -> tuple[CacheStatus, FakeRedis]:
        time.sleep(0.05)
        return (CacheStatus.CONNECTED, FakeRedis())

    connect = mocker.patch(
        "dpskit.client.redis_connect", side_effect=slow_connect
    )
    with ThreadPoolExecutor(max_workers=8) as pool:
        caches = list(pool.map(lambda _: get_cache(), range(8)))
    assert connect.call_count == 1
    assert all(cache is caches[0] for cache in caches)
    assert caches[0].connected
