"""Exception types shared across the engine."""

from __future__ import annotations


class StudymapError(Exception):
    """Base class for all engine errors."""


class DocumentParseError(StudymapError):
    """A structured document (map, metadata block, template) failed to parse.

    Carries the position when known so authoring tools can point at it.
    """

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        if line is not None:
            where = f"line {line}" + (f", column {column}" if column is not None else "")
            message = f"{message} ({where})"
        super().__init__(message)


class ModelError(StudymapError):
    """A model object (map, meta, network) violates a structural rule."""


class InferenceBudgetError(StudymapError):
    """Variable elimination would create a factor above the size budget."""

    def __init__(self, clique_size: int, budget_entries: int):
        self.clique_size = clique_size
        self.budget_entries = budget_entries
        super().__init__(
            f"elimination would build a factor over {clique_size} variables "
            f"(2^{clique_size} entries), above the budget of {budget_entries} entries"
        )


class GenerationError(StudymapError):
    """Question instantiation failed (unsatisfiable constraint, duplicate choice)."""


class UnknownEntityError(StudymapError):
    """Lookup of a student, question, or concept that does not exist."""
