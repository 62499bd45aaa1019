"""Exception hierarchy shared across the toolkit.

Every error raised by quadcode derives from QuadcodeError. InputError marks
problems caused by user-supplied files, flags, or configuration (the CLI maps
these to exit code 2); everything else is an internal failure (exit code 1).
"""

from __future__ import annotations


class QuadcodeError(Exception):
    """Base class for all quadcode errors."""


class InputError(QuadcodeError):
    """Bad user input: malformed files, invalid codes, unusable config."""
