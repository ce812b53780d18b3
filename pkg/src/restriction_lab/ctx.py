from __future__ import annotations

import contextvars
import typing as t

from .globals import _cv_lab

if t.TYPE_CHECKING:
    from .lab import Lab


def has_lab_context() -> bool:
    """Check if there is a lab context available."""
    return _cv_lab.get(None) is not None


class LabContext:
    """Binds a :class:`~restriction_lab.lab.Lab` to the current context so
    numerical code can read run-wide settings (worker cap, float format)
    through :data:`~restriction_lab.globals.current_lab`."""

    def __init__(self, lab: Lab) -> None:
        self.lab = lab
        self._cv_tokens: list[contextvars.Token[LabContext]] = []

    def push(self) -> None:
        self._cv_tokens.append(_cv_lab.set(self))

    def pop(self, exc: BaseException | None = None) -> None:
        try:
            self.lab.do_teardown_run(exc)
        finally:
            ctx = _cv_lab.get()
            _cv_lab.reset(self._cv_tokens.pop())

        if ctx is not self:
            raise AssertionError(
                f"Popped wrong lab context. ({ctx!r} instead of {self!r})"
            )

    def __enter__(self) -> LabContext:
        self.push()
        return self

    def __exit__(self, exc_type, exc_value, tb) -> None:
        self.pop(exc_value)

    def __repr__(self) -> str:
        return f"<{type(self).__name__} of {self.lab.name!r}>"
