"""Python access to the defamekit core: brief validation, poster parsing,
success statistics and the command line."""

from ._core import (
    canonicalize_brief,
    cli,
    expected_time,
    mcnemar,
    parse_poster,
    spearman,
    success_estimate,
    validate_brief,
)

__all__ = [
    "canonicalize_brief",
    "cli",
    "expected_time",
    "mcnemar",
    "parse_poster",
    "spearman",
    "success_estimate",
    "validate_brief",
]
