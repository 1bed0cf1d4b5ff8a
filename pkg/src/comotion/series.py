"""Taylor-coefficient-normalized derivative stacks."""

import math

import numpy as np


class DerivSeries:
    """Stack of a quantity and its time derivatives up to order K.

    Block i holds the i-th derivative divided by i!, so products and
    compositions reduce to coefficient convolutions.  Raw derivatives
    exist only at the API boundary (``raw`` / ``from_raw``).
    """

    __slots__ = ("blocks",)

    def __init__(self, blocks):
        b = np.atleast_2d(np.asarray(blocks, dtype=float))
        if not np.all(np.isfinite(b)):
            raise ValueError("series blocks must be finite")
        self.blocks = b

    @property
    def order(self):
        return self.blocks.shape[0] - 1

    @property
    def dim(self):
        return self.blocks.shape[1]

    @classmethod
    def zeros(cls, order, dim=6):
        return cls(np.zeros((order + 1, dim)))

    @classmethod
    def from_stacked(cls, vec, dim=6):
        vec = np.asarray(vec, dtype=float)
        if vec.size % dim:
            raise ValueError("stacked length not a multiple of the block dimension")
        return cls(vec.reshape(-1, dim))

    @classmethod
    def from_raw(cls, raw_blocks):
        """Build from raw derivatives d^i a / dt^i (divides block i by i!)."""
        raw = np.atleast_2d(np.asarray(raw_blocks, dtype=float))
        fac = np.array([math.factorial(i) for i in range(raw.shape[0])])
        return cls(raw / fac[:, None])

    def stacked(self):
        return self.blocks.reshape(-1).copy()

    def raw(self):
        """Raw derivatives: block i multiplied by i!."""
        fac = np.array([math.factorial(i) for i in range(self.order + 1)])
        return self.blocks * fac[:, None]

    def truncate(self, order):
        if order > self.order:
            raise ValueError("cannot truncate to a higher order")
        return DerivSeries(self.blocks[: order + 1])

    def __repr__(self):
        return f"DerivSeries(order={self.order}, dim={self.dim})"
