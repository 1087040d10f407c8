"""Define the VerdictCache class for caching membership verdicts in Redis."""

from __future__ import annotations

import logging
import math
import threading
from typing import TYPE_CHECKING, Any, ClassVar, Optional

from pydantic import ValidationError
from redis.exceptions import RedisError

from dpskit.config import get_settings
from dpskit.enums import (
    CacheEvent,
    CacheStatus,
    Formalism,
    Hierarchy,
    Regime,
    SolveStatus,
)
from dpskit.key_gen import get_cache_key
from dpskit.redis import redis_connect
from dpskit.relax import check_membership
from dpskit.sdp import SolveReport, SolverOptions
from dpskit.util import log_event

if TYPE_CHECKING:  # pragma: no cover
    from redis import client

    from dpskit.hermitian import HermitianMatrix

DEFAULT_PREFIX = "dpskit"
# stalled and unbounded reports are never stored
CACHEABLE = frozenset({SolveStatus.OPTIMAL, SolveStatus.INCONSISTENT})
_CONNECT_LOCK = threading.Lock()

logging.basicConfig()
logger = logging.getLogger(__name__)


class MetaSingleton(type):
    """Metaclass for creating singleton classes.

    These are classes that allow only a single instance to be created.
    """

    _instances: ClassVar[dict[type[Any], Any]] = {}
    _lock: ClassVar[threading.Lock] = threading.Lock()

    def __call__(cls, *args: Any, **kwargs: Any) -> Any:  # noqa: ANN401
        """Return the instance of the class.

        if it already exists then return that, otherwise create it and return.
        Creation holds a lock, so worker threads share one instance.
        """
        with cls._lock:
            if cls not in cls._instances:
                cls._instances[cls] = super().__call__(*args, **kwargs)
        return cls._instances[cls]


class VerdictCache(metaclass=MetaSingleton):
    """Communicates with a Redis server to cache solve reports."""

    host_url: str = ""
    prefix: str = DEFAULT_PREFIX
    ttl: int = 0
    status: CacheStatus = CacheStatus.NONE
    redis: client.Redis | None = None  # type: ignore

    @property
    def connected(self) -> bool:
        """Return True if the Redis client is connected to a server."""
        return self.status == CacheStatus.CONNECTED

    @property
    def not_connected(self) -> bool:
        """Return True if the Redis client is not connected to a server."""
        return not self.connected

    def init(
        self,
        host_url: str,
        ttl: int,
        prefix: str = DEFAULT_PREFIX,
    ) -> None:
        """Connect to a Redis database using `host_url` and configure cache.

        Args:
            host_url (str): URL for a Redis database.
            ttl (int): Lifetime of every stored report, in seconds.
            prefix (str, optional): Prefix to add to every cache key stored in
                the Redis database. Defaults to "dpskit".
        """
        self.host_url = host_url
        self.ttl = ttl
        self.prefix = prefix
        self._connect()

    def disable(self) -> None:
        """Stop using the cache; every lookup becomes a miss."""
        self.status = CacheStatus.DISABLED
        self.redis = None

    def _connect(self) -> None:
        self.log(
            CacheEvent.CONNECT_BEGIN,
            msg="Attempting to connect to Redis server...",
        )
        self.status, self.redis = redis_connect(self.host_url)
        if self.status == CacheStatus.CONNECTED:
            self.log(
                CacheEvent.CONNECT_SUCCESS,
                msg="Redis client is connected to server.",
            )
        if self.status == CacheStatus.AUTH_ERROR:  # pragma: no cover
            self.log(
                CacheEvent.CONNECT_FAIL,
                msg=(
                    "Unable to connect to redis server due to authentication "
                    "error."
                ),
            )
        if self.status == CacheStatus.CONN_ERROR:  # pragma: no cover
            self.log(
                CacheEvent.CONNECT_FAIL,
                msg="Redis server did not respond to PING message.",
            )

    def get_cache_key(
        self, kind: str, rho: HermitianMatrix, params: dict[str, Any]
    ) -> str:
        """Return the key of one query."""
        return get_cache_key(self.prefix, kind, rho, params)

    def get(self, key: str) -> Optional[SolveReport]:
        """Return the cached report of `key`, or None on a miss."""
        if not self.redis or self.not_connected:
            return None
        try:
            cached = self.redis.get(key)
        except RedisError as exc:
            self.log(CacheEvent.CONNECT_FAIL, msg=str(exc), key=key)
            return None
        if not cached:
            return None
        try:
            report = SolveReport.model_validate_json(cached)
        except ValidationError:
            return None
        if report.status is SolveStatus.INCONSISTENT and report.margin is None:
            # JSON has no infinity
            report = report.model_copy(update={"margin": math.inf})
        self.log(CacheEvent.KEY_FOUND_IN_CACHE, key=key)
        return report

    def add(self, key: str, report: SolveReport) -> bool:
        """Store `report` under `key` with the configured TTL.

        Only converged or inconsistent reports are stored.
        """
        if not self.redis or self.not_connected:
            return False
        if report.status not in CACHEABLE:
            self.log(
                CacheEvent.FAILED_TO_CACHE_KEY,
                msg=f"not caching a {report.status.name} report",
                key=key,
            )
            return False
        try:
            cached = self.redis.set(
                name=key, value=report.model_dump_json(), ex=self.ttl
            )
        except RedisError as exc:
            self.log(CacheEvent.FAILED_TO_CACHE_KEY, msg=str(exc), key=key)
            return False
        if not cached:
            self.log(CacheEvent.FAILED_TO_CACHE_KEY, key=key)
            return False
        self.log(CacheEvent.KEY_ADDED_TO_CACHE, key=key)
        return True

    def log(
        self,
        event: CacheEvent,
        msg: Optional[str] = None,
        key: Optional[str] = None,
        value: Optional[str] = None,
    ) -> None:
        """Log `CacheEvent` using the configured `Logger` object."""
        log_event(
            logger, event, msg=msg, key=key, value=value, level=logging.DEBUG
        )


def get_cache() -> VerdictCache:
    """Return the cache, connected on first use when enabled in settings."""
    cache = VerdictCache()
    with _CONNECT_LOCK:
        if cache.status is CacheStatus.NONE:
            settings = get_settings()
            if settings.cache_enabled:
                cache.init(settings.cache_url, settings.cache_ttl)
            else:
                cache.disable()
    return cache


def cached_membership(
    rho: HermitianMatrix,
    t: int,
    *,
    regime: Regime = Regime.GENERIC,
    hierarchy: Hierarchy = Hierarchy.DPS,
    formalism: Formalism = Formalism.MOMENT,
    face_reduction: bool | None = None,
    opts: SolverOptions | None = None,
) -> SolveReport:
    """Run `check_membership`, reusing a cached report when one exists."""
    opts = opts or SolverOptions.from_settings()
    if face_reduction is None:
        face_reduction = get_settings().face_reduction
    cache = get_cache()
    params = {
        "t": t,
        "regime": regime,
        "hierarchy": hierarchy,
        "formalism": formalism,
        "face_reduction": face_reduction,
        "tol": opts.tol,
        "gap_tol": opts.gap_tol,
        "max_iter": opts.max_iter,
        "lambda_cap": opts.lambda_cap,
    }
    key = cache.get_cache_key("check", rho, params)
    found = cache.get(key)
    if found is not None:
        return found
    report = check_membership(
        rho,
        t,
        regime=regime,
        hierarchy=hierarchy,
        formalism=formalism,
        face_reduction=face_reduction,
        opts=opts,
    )
    cache.add(key, report)
    return report
