from __future__ import annotations

import typing as t
from contextvars import ContextVar

from werkzeug.local import LocalProxy

if t.TYPE_CHECKING:
    from .ctx import LabContext
    from .lab import Lab

_no_lab_msg = (
    "Working outside of lab context. "
    "This typically means that you attempted to use functionality "
    "that needed a running experiment lab."
)
_cv_lab: ContextVar[LabContext] = ContextVar("restriction_lab.lab_ctx")

current_lab: Lab = LocalProxy(  # type: ignore[assignment]
    _cv_lab, "lab", unbound_message=_no_lab_msg
)
