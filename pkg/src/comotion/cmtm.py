"""Comprehensive motion transformation matrices and their tangent maps.

A CMTM stacks a rigid transform together with the Taylor-normalized
time derivatives of its trajectory into one block lower-triangular,
block-Toeplitz operator.  Stored as (pose, body velocity stack); the
block recurrence is the source of truth and the matrix is materialized
lazily.  The dual flavor realizes the same trajectory on force-type
quantities (built from A* with the dual cross).
"""

import numpy as np

from .series import DerivSeries
from .spatial import FORCE, MOTION, SpatialTransform, cross6, unskew3

DUAL = "dual"

MAX_ORDER = 8


def _check_order(k):
    if not 0 <= k <= MAX_ORDER:
        raise ValueError(f"derivative order {k} outside supported range 0..{MAX_ORDER}")


class Cmtm:
    """Pose plus body-velocity derivative stack, realized as a block operator."""

    __slots__ = ("pose", "vel", "flavor", "_blocks", "_mat")

    def __init__(self, pose, vel, flavor=MOTION):
        if flavor not in (MOTION, DUAL):
            raise ValueError(f"unknown CMTM flavor {flavor!r}")
        if not isinstance(vel, DerivSeries):
            vel = DerivSeries(vel)
        if vel.dim != 6:
            raise ValueError("velocity blocks must be 6-dimensional")
        _check_order(vel.order)
        self.pose = pose
        self.vel = vel
        self.flavor = flavor
        self._blocks = None
        self._mat = None

    @property
    def order(self):
        return self.vel.order

    @classmethod
    def identity(cls, order, flavor=MOTION):
        return cls(SpatialTransform.identity(), DerivSeries.zeros(order), flavor)

    def blocks(self):
        """Derivative blocks X_0..X_K from the coefficient recurrence.

        X_0 is the 6x6 pose realization; X_{l+1} is the convolution
        (1/(l+1)) sum_m X_{l-m} @ cross(v_m), with the cross flavor
        matching the CMTM flavor.  X_l equals the l-th derivative of the
        6x6 trajectory divided by l!.
        """
        if self._blocks is None:
            cross_flavor = MOTION if self.flavor == MOTION else FORCE
            x0 = (
                self.pose.motion_matrix()
                if self.flavor == MOTION
                else self.pose.force_matrix()
            )
            crosses = [cross6(v, cross_flavor) for v in self.vel.blocks]
            xs = [x0]
            for l in range(self.order):
                acc = np.zeros((6, 6))
                for m in range(l + 1):
                    acc += xs[l - m] @ crosses[m]
                xs.append(acc / (l + 1))
            self._blocks = xs
        return self._blocks

    def matrix(self):
        """Dense block lower-triangular Toeplitz realization."""
        if self._mat is None:
            xs = self.blocks()
            kp1 = self.order + 1
            out = np.zeros((6 * kp1, 6 * kp1))
            for l in range(kp1):
                for m in range(l + 1):
                    out[6 * l : 6 * l + 6, 6 * m : 6 * m + 6] = xs[l - m]
            self._mat = out
        return self._mat

    def _motion_matrix(self):
        """Motion-flavor realization of the same trajectory."""
        if self.flavor == MOTION:
            return self.matrix()
        return Cmtm(self.pose, self.vel, MOTION).matrix()

    def _motion_matrix_inverse(self):
        """Inverse of the motion realization via the inverse-block recurrence."""
        x0 = self.pose.inverse().motion_matrix()
        crosses = [cross6(v, MOTION) for v in self.vel.blocks]
        xs = [x0]
        for l in range(self.order):
            acc = np.zeros((6, 6))
            for m in range(l + 1):
                acc += crosses[m] @ xs[l - m]
            xs.append(-acc / (l + 1))
        kp1 = self.order + 1
        out = np.zeros((6 * kp1, 6 * kp1))
        for l in range(kp1):
            for m in range(l + 1):
                out[6 * l : 6 * l + 6, 6 * m : 6 * m + 6] = xs[l - m]
        return out

    def compose(self, other):
        """Chain rule: matrix(a.compose(b)) == matrix(a) @ matrix(b).

        The composed velocity stack follows the frame-local law
        v_c = inv(b) v_a + v_b, with inv(b) the motion realization.
        """
        if self.order != other.order:
            raise ValueError("CMTM order mismatch in compose")
        if self.flavor != other.flavor:
            raise ValueError("CMTM flavor mismatch in compose")
        pose = self.pose.compose(other.pose)
        vel = other._motion_matrix_inverse() @ self.vel.stacked() + other.vel.stacked()
        return Cmtm(pose, DerivSeries.from_stacked(vel), self.flavor)

    def inverse(self):
        """CMTM of the inverse trajectory: matrix(x.inverse()) @ matrix(x) == I."""
        vel = -(self._motion_matrix() @ self.vel.stacked())
        return Cmtm(self.pose.inverse(), DerivSeries.from_stacked(vel), self.flavor)

    def apply(self, stacked):
        """matrix(x) @ v for a stacked vector of matching dimension."""
        v = np.asarray(stacked, dtype=float)
        if v.shape[0] != 6 * (self.order + 1):
            raise ValueError(
                f"stacked vector has dim {v.shape[0]}, CMTM expects {6 * (self.order + 1)}"
            )
        return self.matrix() @ v

    def truncate(self, order):
        if order == self.order:
            return self
        return Cmtm(self.pose, self.vel.truncate(order), self.flavor)

    def __repr__(self):
        return f"Cmtm(order={self.order}, flavor={self.flavor!r})"


def vel_blocks_from_matrix(pose, mats):
    """Recover velocity blocks from motion-flavor derivative blocks.

    Inverts the coefficient recurrence block by block:
    cross(v_l) = X0^{-1} ((l+1) X_{l+1} - sum_{m<l} X_{l-m} cross(v_m)).
    An order K matrix determines blocks v_0..v_{K-1} only; the returned
    array has K rows.
    """
    x0_inv = pose.inverse().motion_matrix()
    n = len(mats) - 1
    vels = []
    crosses = []
    for l in range(n):
        acc = (l + 1) * mats[l + 1]
        for m in range(l):
            acc = acc - mats[l - m] @ crosses[m]
        c = x0_inv @ acc
        crosses.append(c)
        vels.append(np.concatenate([unskew3(c[:3, :3]), unskew3(c[3:, :3])]))
    if not vels:
        return np.zeros((0, 6))
    return np.vstack(vels)


def cmtm_time_derivative_matrix(higher):
    """d/dt of the order K realization, assembled from the order K+1 CMTM.

    Block (l, m) of d/dt X_(K) is (l - m + 1) X_{l-m+1}, the shifted and
    rescaled derivative block.  Satisfies inv(X) @ dX/dt == stacked_cross(v).
    """
    xs = higher.blocks()
    nb = higher.order  # block rows of the output, one less than the input
    out = np.zeros((6 * nb, 6 * nb))
    for l in range(nb):
        for m in range(l + 1):
            d = l - m
            out[6 * l : 6 * l + 6, 6 * m : 6 * m + 6] = (d + 1) * xs[d + 1]
    return out


class PsiMap:
    """Invertible block-triangular map between CMTM tangents and pose/velocity variations.

    Built from a velocity stack of order K, the map has K+2 block rows:
    row 0 is [I, 0, ...]; row r >= 1 holds the crosses of the velocity
    blocks in falling order followed by r*I on the diagonal.  It relates
    [da; d v_(K)] = Psi @ x_(K+1) for the tangent stack x.
    """

    __slots__ = ("vel_blocks",)

    def __init__(self, vel_blocks):
        b = np.atleast_2d(np.asarray(vel_blocks, dtype=float))
        if b.shape[1] != 6:
            raise ValueError("PsiMap expects 6-dimensional velocity blocks")
        self.vel_blocks = b

    @property
    def order(self):
        """Number of block rows minus one (the map is order+1 blocks square)."""
        return self.vel_blocks.shape[0] + 1

    def matrix(self):
        kp1 = self.vel_blocks.shape[0]  # velocity order K, kp1 = K+1 blocks
        nb = kp1 + 1
        crosses = [cross6(v, MOTION) for v in self.vel_blocks]
        out = np.zeros((6 * nb, 6 * nb))
        out[:6, :6] = np.eye(6)
        for r in range(1, nb):
            out[6 * r : 6 * r + 6, 6 * r : 6 * r + 6] = r * np.eye(6)
            for m in range(r):
                out[6 * r : 6 * r + 6, 6 * m : 6 * m + 6] = crosses[r - 1 - m]
        return out

    def inverse_matrix(self):
        """Forward-substitution inverse; invertibility is structural."""
        kp1 = self.vel_blocks.shape[0]
        nb = kp1 + 1
        crosses = [cross6(v, MOTION) for v in self.vel_blocks]
        inv = [[None] * nb for _ in range(nb)]
        inv[0][0] = np.eye(6)
        for l in range(1, nb):
            inv[l][l] = np.eye(6) / l
            for m in range(l):
                acc = np.zeros((6, 6))
                for n in range(m, l):
                    acc += crosses[l - n - 1] @ inv[n][m]
                inv[l][m] = -acc / l
        out = np.zeros((6 * nb, 6 * nb))
        for l in range(nb):
            for m in range(l + 1):
                out[6 * l : 6 * l + 6, 6 * m : 6 * m + 6] = inv[l][m]
        return out


def psi_map(vel):
    """PsiMap of a velocity DerivSeries (or block array) of order K."""
    if isinstance(vel, DerivSeries):
        return PsiMap(vel.blocks)
    return PsiMap(vel)
