from __future__ import annotations

import json as _json
import typing as t

from ..globals import current_lab
from .provider import _default


def dumps(obj: t.Any, **kwargs: t.Any) -> str:
    """Serialize data as JSON.

    If :data:`~restriction_lab.globals.current_lab` is available, it will
    use its ``lab.json.dumps()`` method, otherwise it will use
    :func:`json.dumps`.

    :param obj: The data to serialize.
    :param kwargs: Arguments passed to the ``dumps`` implementation.
    """
    if current_lab:
        return current_lab.json.dumps(obj, **kwargs)

    kwargs.setdefault("default", _default)
    kwargs.setdefault("sort_keys", True)
    return _json.dumps(obj, **kwargs)

