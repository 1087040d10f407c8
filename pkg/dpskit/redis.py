"""Open the Redis connection behind the verdict cache."""

from __future__ import annotations

import logging
import os
from typing import TYPE_CHECKING

import redis

from dpskit.config import get_settings
from dpskit.enums import CacheStatus

if TYPE_CHECKING:  # pragma: no cover
    from dpskit.types import CacheConnectType

logger = logging.getLogger(__name__)


def redis_connect(host_url: str) -> CacheConnectType:
    """Connect to `host_url` and return the status with the client.

    The client is None unless the status is CONNECTED. With CACHE_ENV=TEST
    an in-process FakeRedis server stands in for the real one.
    """
    if os.environ.get("CACHE_ENV") == "TEST":
        return _connect_fake()
    return _connect(host_url, get_settings().cache_timeout)


def _connect(host_url: str, timeout: float) -> CacheConnectType:
    """Build a client with socket timeouts and ping it once."""
    try:
        client = redis.from_url(
            host_url,
            socket_connect_timeout=timeout,
            socket_timeout=timeout,
        )
        alive = client.ping()
    except redis.AuthenticationError:
        return (CacheStatus.AUTH_ERROR, None)
    except (redis.ConnectionError, redis.TimeoutError) as exc:
        logger.debug("ping to %s failed: %s", host_url, exc)
        return (CacheStatus.CONN_ERROR, None)
    except ValueError as exc:
        # from_url refuses unknown schemes
        logger.debug("bad cache url %r: %s", host_url, exc)
        return (CacheStatus.CONN_ERROR, None)
    if not alive:
        return (CacheStatus.CONN_ERROR, None)
    return (CacheStatus.CONNECTED, client)


def _connect_fake() -> CacheConnectType:
    from fakeredis import FakeRedis

    return (CacheStatus.CONNECTED, FakeRedis())
