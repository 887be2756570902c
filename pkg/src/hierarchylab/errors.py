"""Exception hierarchy.

Every error carries a stable ``code`` string so the CLI can emit a
machine-parsable reason, and a ``kind`` that maps onto exit codes
("validation" -> 2, "numerical" -> 3).
"""

from __future__ import annotations


class HierarchyLabError(Exception):
    kind = "validation"

    @property
    def code(self) -> str:
        return type(self).__name__


class UnsupportedOrder(HierarchyLabError):
    pass


class NotKStarZeroClass(HierarchyLabError):
    pass


class NotPSD(HierarchyLabError):
    pass


class BadOrder(HierarchyLabError):
    pass


class OutOfRange(HierarchyLabError):
    pass


class InsufficientSamples(HierarchyLabError):
    pass


class ZeroInput(HierarchyLabError):
    pass


class NonFinite(HierarchyLabError):
    kind = "numerical"


class SingularKernel(HierarchyLabError):
    kind = "numerical"


class NoCriticalPoint(HierarchyLabError):
    kind = "numerical"


__all__ = [
    "HierarchyLabError",
    "UnsupportedOrder",
    "NotKStarZeroClass",
    "NotPSD",
    "BadOrder",
    "OutOfRange",
    "InsufficientSamples",
    "ZeroInput",
    "NonFinite",
    "SingularKernel",
    "NoCriticalPoint",
]
