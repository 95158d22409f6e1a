"""Arithmetic on [0, +inf] with the convention 0 * inf = 0.

Tail exponents, relative entropies and rate values all live on the extended
half-line, and the rate formulas multiply weights that may be zero by
exponents that may be infinite.  Plain floats get this wrong (0.0 * math.inf
is nan), so the few operations we need are wrapped here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

__all__ = ["XR", "ZERO", "INF", "as_xr"]


@dataclass(frozen=True, order=False)
class XR:
    """A value in [0, +inf]."""

    value: float

    def __post_init__(self) -> None:
        if math.isnan(self.value) or self.value < 0:
            raise ValueError(f"extended real must be in [0, +inf], got {self.value}")

    @property
    def is_inf(self) -> bool:
        return math.isinf(self.value)

    @property
    def is_finite(self) -> bool:
        return not math.isinf(self.value)

    def __add__(self, other: "XRLike") -> "XR":
        other = as_xr(other)
        return XR(self.value + other.value)

    __radd__ = __add__

    def __mul__(self, other: "XRLike") -> "XR":
        other = as_xr(other)
        # 0 * inf = 0, in either order.
        if self.value == 0.0 or other.value == 0.0:
            return ZERO
        return XR(self.value * other.value)

    __rmul__ = __mul__

    def sub(self, other: "XRLike") -> "XR":
        """Difference a - b for a >= b, with inf - inf = 0.

        This is the arithmetic used by the rate-gap formula, where the gap of
        two infinite exponents is defined to vanish.
        """
        other = as_xr(other)
        if other.value > self.value:
            raise ValueError(f"sub needs a >= b, got {self.value} < {other.value}")
        if self.is_inf and other.is_inf:
            return ZERO
        return XR(self.value - other.value)

    def __eq__(self, other: object) -> bool:
        if isinstance(other, (XR, int, float)):
            return self.value == as_xr(other).value
        return NotImplemented

    def __hash__(self) -> int:
        return hash(self.value)

    def __le__(self, other: "XRLike") -> bool:
        return self.value <= as_xr(other).value

    def __lt__(self, other: "XRLike") -> bool:
        return self.value < as_xr(other).value

    def __ge__(self, other: "XRLike") -> bool:
        return self.value >= as_xr(other).value

    def __gt__(self, other: "XRLike") -> bool:
        return self.value > as_xr(other).value

    def __float__(self) -> float:
        return self.value

    def __repr__(self) -> str:
        return "XR(+inf)" if self.is_inf else f"XR({self.value!r})"


XRLike = Union[XR, int, float]

ZERO = XR(0.0)
INF = XR(math.inf)


def as_xr(x: XRLike) -> XR:
    return x if isinstance(x, XR) else XR(float(x))
