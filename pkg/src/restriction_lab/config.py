from __future__ import annotations

import typing as t

from .errors import ConfigError


class Config(dict):
    def __init__(self, defaults: dict | None = None):
        super().__init__(defaults or {})

    def update_strict(self, values: t.Mapping[str, t.Any]) -> None:
        """Update known keys only; anything not present in the defaults is
        rejected."""
        unknown = sorted(set(values) - set(self))
        if unknown:
            raise ConfigError(f"Unknown configuration keys: {', '.join(unknown)}")
        self.update(values)
