"""Shared exception types.

Every failure mode that callers are expected to branch on gets its own
class here so that library code never signals through return codes or
sentinel values.
"""

from __future__ import annotations


class SelfSimError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(SelfSimError):
    """Invalid user-supplied configuration or input file."""


class UnknownSymbol(ConfigError):
    """A word refers to a map label the system does not define."""


class BudgetExceeded(SelfSimError):
    """A computation hit its node or iteration budget before finishing."""

    def __init__(self, message: str, *, spent: int, budget: int):
        super().__init__(message)
        self.spent = spent
        self.budget = budget


class NegativeRadicand(SelfSimError):
    """Certified square root of an interval that is entirely negative."""


class PartialDomainWarning(UserWarning):
    """Interval operation clamped part of its input to stay in domain."""


class OnAttractor(SelfSimError):
    """Query point cannot be separated from the attractor at any precision."""


class DegenerateVertex(SelfSimError):
    """An angle vertex coincides with one of its ray endpoints."""


class DegenerateSegment(SelfSimError):
    """A segment's endpoints coincide where a direction is required."""


class AmbiguousOrientation(SelfSimError):
    """The orientation witness lies on the line it should orient."""


class NotPolytopeRegime(SelfSimError):
    """Parameters lie outside the regime where the hull is a polygon."""


class SearchExhausted(SelfSimError):
    """An enumeration finished its allowed range without finding a match."""

    def __init__(self, message: str, *, cap: int):
        super().__init__(message)
        self.cap = cap


class CertificationFailed(SelfSimError):
    """A certified inequality required by a construction step did not hold.

    ``condition`` is a short machine-readable tag, ``evidence`` carries the
    interval data that witnessed the failure.
    """

    def __init__(self, condition: str, evidence: object = None):
        super().__init__(f"certified condition failed: {condition}")
        self.condition = condition
        self.evidence = evidence


class HypothesisViolation(SelfSimError):
    """Input data does not satisfy a documented precondition."""


class DomainViolation(SelfSimError):
    """Arguments fall outside the mathematical domain of the formula."""


class NoMatch(SelfSimError):
    """A lookup found nothing satisfying the requested predicate.

    ``report`` optionally carries the partial result exhibiting the
    unmatched items.
    """

    def __init__(self, message: str, report: object = None):
        super().__init__(message)
        self.report = report
