"""Shared exception types."""

from __future__ import annotations


class ValidationError(ValueError):
    """Raised when inputs, records, or configuration fail validation."""


class DegenerateVectorError(ValidationError):
    """Raised when a vector collapses to (near) zero where a direction is required."""
