"""Exact arithmetic in the crystallographic group Z^2 x| Cs.

An element ``(c, d, r)`` acts on the plane by ``x -> sigma^r(x) + (c, d)``
where ``sigma`` is the reflection in the x-axis.  Translations live on the
integer lattice so gains can be compared exactly.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np


class Group(str, enum.Enum):
    """Symmetry group tag carried by a gain graph."""

    Z2 = "Z2"
    CS = "Cs"
    Z2XCS = "Z2xCs"

    @classmethod
    def parse(cls, text):
        for tag in cls:
            if tag.value.lower() == str(text).strip().lower():
                return tag
        raise ValueError(f"unknown group tag {text!r}")

    @property
    def has_translations(self) -> bool:
        return self is not Group.CS

    @property
    def has_reflection(self) -> bool:
        return self is not Group.Z2

    def contains(self, g: "GroupElement") -> bool:
        if g.r and not self.has_reflection:
            return False
        if (g.c or g.d) and not self.has_translations:
            return False
        return True

    def __str__(self):
        return self.value


@dataclass(frozen=True, order=True)
class GroupElement:
    c: int
    d: int
    r: bool = False

    def __post_init__(self):
        # accept numpy ints and 0/1 flags but store plain python values
        object.__setattr__(self, "c", int(self.c))
        object.__setattr__(self, "d", int(self.d))
        object.__setattr__(self, "r", bool(self.r))

    @classmethod
    def coerce(cls, value) -> "GroupElement":
        if isinstance(value, GroupElement):
            return value
        c, d, *rest = value
        return cls(c, d, bool(rest[0]) if rest else False)

    @property
    def is_identity(self) -> bool:
        return self.c == 0 and self.d == 0 and not self.r

    @property
    def is_translation(self) -> bool:
        return not self.r

    def compose(self, other: "GroupElement") -> "GroupElement":
        """Return ``self * other`` (apply ``other`` first)."""
        d = other.d if not self.r else -other.d
        return GroupElement(self.c + other.c, self.d + d, self.r != other.r)

    __mul__ = compose

    def inverse(self) -> "GroupElement":
        d = -self.d if not self.r else self.d
        return GroupElement(-self.c, d, self.r)

    def linear_apply(self, u):
        u = np.asarray(u, dtype=float)
        if not self.r:
            return u.copy()
        out = u.copy()
        out[..., 1] = -out[..., 1]
        return out

    def apply(self, x):
        return self.linear_apply(x) + np.array([self.c, self.d], dtype=float)

    def linear_matrix(self) -> np.ndarray:
        return np.diag([1.0, -1.0 if self.r else 1.0])

    def as_tuple(self):
        return (self.c, self.d, int(self.r))

    def __str__(self):
        return f"({self.c},{self.d},{'s' if self.r else 'id'})"


IDENTITY = GroupElement(0, 0, False)
REFLECTION = GroupElement(0, 0, True)


def compose(g, h):
    return GroupElement.coerce(g).compose(GroupElement.coerce(h))


def inverse(g):
    return GroupElement.coerce(g).inverse()


def apply(g, x):
    return GroupElement.coerce(g).apply(x)


def linear_apply(g, u):
    return GroupElement.coerce(g).linear_apply(u)
