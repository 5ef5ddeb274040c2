"""Shared exception types."""
from __future__ import annotations


class BranchLabError(Exception):
    """Base class for package errors."""


class CapExceededError(BranchLabError):
    """A configured event or memory cap would be exceeded."""


class TableCoverageError(BranchLabError):
    """A renewal table does not cover the requested time or order."""


class FactorizationError(BranchLabError):
    """Covariance factorization failed even with diagonal jitter."""
