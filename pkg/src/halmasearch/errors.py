from __future__ import annotations


class IllegalMoveError(ValueError):
    """A move breaks the step/jump rules; ``reason`` names the first violation."""

    def __init__(self, reason: str, cell=None, index: int | None = None):
        self.reason = reason
        self.cell = cell
        self.index = index
        where = f" at {tuple(cell)}" if cell is not None else ""
        which = f"move {index}: " if index is not None else ""
        super().__init__(f"{which}{reason}{where}")


class NotationError(ValueError):
    pass


class ResourceLimitError(RuntimeError):
    """A search hit its memory cap; ``stats`` carries what was done so far."""

    def __init__(self, message: str, stats: dict | None = None):
        super().__init__(message)
        self.stats = stats or {}
