"""Define utility functions for the dpskit package."""

from __future__ import annotations

import json
import logging
import math
from datetime import datetime
from enum import Enum
from typing import Any, Callable, Union

import numpy as np
import tzlocal
from pydantic import BaseModel

LOG_TIMESTAMP = "%m/%d/%Y %H:%M:%S %Z"

# repo-wide PSD acceptance: min eigenvalue >= -PSD_RTOL * (1 + ||M||_F)
PSD_RTOL = 1e-8
HERMITIAN_ATOL = 1e-8
SYMMETRIZED_ATOL = 1e-12
PATTERN_ATOL = 1e-10

ONE_HOUR_IN_SECONDS = 3600
ONE_DAY_IN_SECONDS = ONE_HOUR_IN_SECONDS * 24
ONE_WEEK_IN_SECONDS = ONE_DAY_IN_SECONDS * 7

HandlerType = Callable[[Any], Any]


class BetterJsonEncoder(json.JSONEncoder):
    """Subclass the JSONEncoder to handle numpy and pydantic types."""

    def default(self, obj: Any) -> Union[dict[str, Any], Any]:  # noqa: ANN401
        """Return a serializable object for the JSONEncoder to use."""
        type_mapping: dict[type, HandlerType] = {
            BaseModel: lambda o: o.model_dump(mode="json"),
            Enum: lambda o: o.value,
            np.ndarray: lambda o: o.tolist(),
            np.integer: int,
            np.floating: finite_or_none,
            np.bool_: bool,
            complex: lambda o: {"re": o.real, "im": o.imag},
            tuple: list,
        }

        for obj_type, handler in type_mapping.items():
            if isinstance(obj, obj_type):
                return handler(obj)

        return super().default(obj)


def finite_or_none(value: float) -> float | None:
    """Map NaN and the infinities to None so they serialize as null."""
    value = float(value)
    return value if math.isfinite(value) else None


def serialize_json(json_dict: Any) -> str:  # noqa: ANN401
    """Serialize a dictionary to a JSON string."""
    return json.dumps(json_dict, cls=BetterJsonEncoder)


def format_real(value: float) -> str:
    """Return the shortest decimal string that reads back to `value`.

    Python's repr never needs more than 17 significant digits for this.
    """
    return repr(float(value))


def get_log_time() -> str:
    """Get a timestamp to include with a log message."""
    local_tz = tzlocal.get_localzone()
    return datetime.now(local_tz).strftime(LOG_TIMESTAMP)


def log_event(
    logger: logging.Logger,
    event: Enum,
    msg: str | None = None,
    key: str | None = None,
    value: object | None = None,
    level: int = logging.INFO,
) -> None:
    """Log an `event` with a local timestamp, as `| EVENT: msg: key=...`."""
    message = f" {get_log_time()} | {event.name}"
    if msg:
        message += f": {msg}"
    if key:
        message += f": key={key}"
    if value is not None:
        message += f", value={value}"
    logger.log(level, message)
