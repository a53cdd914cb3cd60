"""Small planar geometry helpers: points and axis-aligned boxes."""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from .errors import DomainError


def as_point(p) -> np.ndarray:
    """Coerce ``p`` to a finite float array of shape (2,)."""
    q = np.asarray(p, dtype=float).reshape(-1)
    if q.shape != (2,):
        raise DomainError(f"expected a 2D point, got shape {np.asarray(p).shape}")
    if not np.all(np.isfinite(q)):
        raise DomainError(f"point has non-finite components: {q}")
    return q


class Box(NamedTuple):
    """Axis-aligned rectangle [xmin, xmax] x [ymin, ymax]."""

    xmin: float
    ymin: float
    xmax: float
    ymax: float

    @property
    def width(self) -> float:
        return self.xmax - self.xmin

    @property
    def height(self) -> float:
        return self.ymax - self.ymin

    @property
    def center(self) -> np.ndarray:
        return np.array([0.5 * (self.xmin + self.xmax), 0.5 * (self.ymin + self.ymax)])

    @property
    def diagonal(self) -> float:
        return math.hypot(self.width, self.height)

    def circumradius(self, about=None) -> float:
        """Largest distance from ``about`` (default: box center) to a corner."""
        c = self.center if about is None else as_point(about)
        corners = np.array(
            [
                [self.xmin, self.ymin],
                [self.xmin, self.ymax],
                [self.xmax, self.ymin],
                [self.xmax, self.ymax],
            ]
        )
        return float(np.max(np.hypot(corners[:, 0] - c[0], corners[:, 1] - c[1])))

    def contains(self, p) -> bool:
        q = as_point(p)
        return bool(self.xmin <= q[0] <= self.xmax and self.ymin <= q[1] <= self.ymax)

    @staticmethod
    def validate(box: "Box") -> "Box":
        b = Box(*map(float, box))
        if not (b.xmax > b.xmin and b.ymax > b.ymin):
            raise DomainError(f"degenerate box {b}")
        return b
