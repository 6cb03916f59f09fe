"""Shared exception types."""

from __future__ import annotations


class DivergenceError(RuntimeError):
    """A sweep produced NaN/Inf values.

    Carries the time node index at which the blow-up was detected so the
    caller can report where the explicit scheme lost stability.
    """

    def __init__(self, message: str, time_node: int):
        super().__init__(f"{message} (time node {time_node})")
        self.time_node = time_node


class ScenarioError(ValueError):
    """A scenario file failed validation.

    ``field`` names the offending entry with dotted-path notation, e.g.
    ``initial_density.center``.
    """

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field
