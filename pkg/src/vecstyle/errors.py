"""Exception hierarchy for vecstyle.

Every error raised by the public API derives from :class:`VecstyleError`,
so callers can catch one type at the boundary.  Subclasses carry the
structured context (line/column, byte offset, iteration index) that the
CLI turns into exit codes and messages.
"""

from __future__ import annotations


class VecstyleError(Exception):
    """Base class for all vecstyle errors."""


class SvgParseError(VecstyleError):
    """Malformed SVG input.

    Parameters
    ----------
    message:
        Human-readable description of the problem.
    line, column:
        1-based location in the source document when known, else None.
    """

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        if line is not None:
            where = f"line {line}" + (f", column {column}" if column is not None else "")
            message = f"{message} ({where})"
        super().__init__(message)


class UnsupportedSvgFeatureError(VecstyleError):
    """SVG feature outside the supported subset (e.g. text, filters).

    ``feature`` names the offending tag or attribute.
    """

    def __init__(self, feature: str, detail: str | None = None):
        self.feature = feature
        message = f"unsupported SVG feature: {feature}"
        if detail:
            message = f"{message} ({detail})"
        super().__init__(message)


class CyclicReferenceError(VecstyleError):
    """A chain of ``href`` references forms a cycle.

    ``cycle`` lists the element ids along the cycle, first id repeated last.
    """

    def __init__(self, cycle: list[str]):
        self.cycle = list(cycle)
        super().__init__("cyclic id reference: " + " -> ".join(self.cycle))


class DimensionError(VecstyleError):
    """An array or image has the wrong shape, dtype, or value range."""


class WeightFormatError(VecstyleError):
    """Malformed or incomplete weight file.

    ``offset`` is the byte position at which parsing failed, when known.
    """

    def __init__(self, message: str, offset: int | None = None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)


class TapeConsumedError(VecstyleError):
    """A render tape was used for a second backward pass."""


class NumericalAbortError(VecstyleError):
    """Optimization produced a non-finite loss or gradient.

    ``iteration`` is the 0-based iteration at which the abort happened and
    ``group`` names the offending quantity ("loss", "points", "colors",
    "widths").
    """

    def __init__(self, iteration: int, group: str, detail: str | None = None):
        self.iteration = iteration
        self.group = group
        message = f"non-finite {group} at iteration {iteration}"
        if detail:
            message = f"{message}: {detail}"
        super().__init__(message)


class GradCheckError(VecstyleError):
    """Finite-difference verification of rasterizer gradients failed."""
