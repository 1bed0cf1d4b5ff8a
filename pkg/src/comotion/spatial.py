"""Spatial vector algebra and the block-triangular operator calculus.

Conventions used throughout the package:

* 6D vectors store the angular part first: u = [w; v].
* Motion quantities (twists) transform with A = [[R, 0], [px R, R]],
  force-type quantities (momenta, wrenches) with A* = A^{-T}.
* Derivative stacks are Taylor-coefficient normalized: block i of a
  stacked quantity holds the i-th time derivative divided by i!.
"""

import numpy as np

MOTION = "motion"
FORCE = "force"

ORTHONORMAL_TOL = 1e-9


def skew3(v):
    """3x3 matrix S with S @ w == np.cross(v, w); S.T == -S."""
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def unskew3(m):
    """Recover v from skew3(v); antisymmetrizes first for robustness."""
    a = 0.5 * (m - m.T)
    return np.array([a[2, 1], a[0, 2], a[1, 0]])


def cross6(u, flavor=MOTION):
    """6x6 cross operator of a spatial vector.

    Motion flavor is [[wx, 0], [vx, wx]]; the force (dual) flavor is
    minus the transpose of the motion operator, the unique choice
    consistent with A* = A^{-T}.
    """
    u = np.asarray(u, dtype=float)
    w, v = u[:3], u[3:]
    m = np.zeros((6, 6))
    m[:3, :3] = skew3(w)
    m[3:, :3] = skew3(v)
    m[3:, 3:] = skew3(w)
    if flavor == MOTION:
        return m
    if flavor == FORCE:
        return -m.T
    raise ValueError(f"unknown flavor {flavor!r}")


_EYE6 = np.eye(6)


def hat6(u, flavor=MOTION):
    """Swap operator: hat6(u, flavor) @ y == cross6(y, flavor) @ u."""
    u = np.asarray(u, dtype=float)
    cols = [cross6(_EYE6[:, j], flavor) @ u for j in range(6)]
    return np.column_stack(cols)


def so3_exp(w):
    """Rotation matrix exp(skew3(w)) via the Rodrigues formula."""
    w = np.asarray(w, dtype=float)
    th = np.linalg.norm(w)
    k = skew3(w)
    if th < 1e-12:
        return np.eye(3) + k + 0.5 * (k @ k)
    a = np.sin(th) / th
    b = (1.0 - np.cos(th)) / th**2
    return np.eye(3) + a * k + b * (k @ k)


def se3_exp(u):
    """SE(3) exponential of a twist [w; v], returned as a SpatialTransform."""
    u = np.asarray(u, dtype=float)
    w, v = u[:3], u[3:]
    th = np.linalg.norm(w)
    k = skew3(w)
    r = so3_exp(w)
    if th < 1e-12:
        big_v = np.eye(3) + 0.5 * k + (k @ k) / 6.0
    else:
        big_v = (
            np.eye(3)
            + ((1.0 - np.cos(th)) / th**2) * k
            + ((th - np.sin(th)) / th**3) * (k @ k)
        )
    return SpatialTransform(r, big_v @ v)


class SpatialTransform:
    """Rigid transform (R, p) with 6x6 motion and force realizations."""

    __slots__ = ("rotation", "translation")

    def __init__(self, rotation=None, translation=None, check=True):
        r = np.eye(3) if rotation is None else np.asarray(rotation, dtype=float)
        p = np.zeros(3) if translation is None else np.asarray(translation, dtype=float)
        if check:
            err = max(
                np.abs(r @ r.T - np.eye(3)).max(),
                abs(np.linalg.det(r) - 1.0),
            )
            if err > ORTHONORMAL_TOL:
                raise ValueError(f"rotation not orthonormal (error {err:.3e})")
        self.rotation = r
        self.translation = p

    @classmethod
    def identity(cls):
        return cls()

    def compose(self, other):
        return SpatialTransform(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
            check=False,
        )

    def inverse(self):
        rt = self.rotation.T
        return SpatialTransform(rt, -rt @ self.translation, check=False)

    def motion_matrix(self):
        """A = [[R, 0], [px R, R]], mapping body twists to parent-frame twists."""
        a = np.zeros((6, 6))
        a[:3, :3] = self.rotation
        a[3:, 3:] = self.rotation
        a[3:, :3] = skew3(self.translation) @ self.rotation
        return a

    def force_matrix(self):
        """A* = [[R, px R], [0, R]] = A^{-T}, acting on momenta and wrenches."""
        a = np.zeros((6, 6))
        a[:3, :3] = self.rotation
        a[3:, 3:] = self.rotation
        a[:3, 3:] = skew3(self.translation) @ self.rotation
        return a

    def __repr__(self):
        return f"SpatialTransform(R={self.rotation.tolist()}, p={self.translation.tolist()})"


def frame_transforms(x):
    """Return the (motion, force) 6x6 pair of a SpatialTransform."""
    return x.motion_matrix(), x.force_matrix()


def n_matrix(k, m=6):
    """Derivative-shift weights: blockdiag(1 I_m, 2 I_m, ..., (k+1) I_m).

    For a Taylor-normalized stack a of order k+1,
    d/dt a_(k) = [0 | n_matrix(k, m)] @ a_(k+1).
    """
    if k < 0:
        raise ValueError("order must be nonnegative")
    return np.kron(np.diag(np.arange(1.0, k + 2.0)), np.eye(m))


def dt_shift(k, m=6):
    """The rectangular [0 | N] mapping an order k+1 stack to d/dt of the order k stack."""
    out = np.zeros((m * (k + 1), m * (k + 2)))
    out[:, m:] = n_matrix(k, m)
    return out


def stacked_cross(blocks, flavor=MOTION, hat=False):
    """Block lower-triangular Toeplitz cross operator of a derivative stack.

    blocks is a (K+1, 6) array of Taylor-normalized 6-vectors.  Block
    (l, m) of the result is the 6x6 cross (or swap, when hat=True) of
    blocks[l - m].  The hat variant H satisfies
    H(x) @ y == stacked_cross(y, flavor) @ x.
    """
    blocks = np.atleast_2d(np.asarray(blocks, dtype=float))
    if blocks.shape[1] != 6:
        raise ValueError("stacked_cross expects 6-dimensional blocks")
    kp1 = blocks.shape[0]
    op = hat6 if hat else cross6
    diag = [op(blocks[d], flavor) for d in range(kp1)]
    out = np.zeros((6 * kp1, 6 * kp1))
    for l in range(kp1):
        for m in range(l + 1):
            out[6 * l : 6 * l + 6, 6 * m : 6 * m + 6] = diag[l - m]
    return out


def u_operator(blocks, flavor=MOTION):
    """Rectangular operator [cross-stack | 0] + [0 | N] of a velocity stack.

    Shape 6(K+1) x 6(K+2).  With the motion flavor it recovers velocity
    variations from transform tangents; with the force flavor it maps an
    order K+1 momentum stack to the order K force stack
    (f = dh/dt + v x* h, order by order).
    """
    blocks = np.atleast_2d(np.asarray(blocks, dtype=float))
    kp1 = blocks.shape[0]
    out = np.zeros((6 * kp1, 6 * (kp1 + 1)))
    out[:, : 6 * kp1] = stacked_cross(blocks, flavor)
    for i in range(kp1):
        out[6 * i : 6 * i + 6, 6 * (i + 1) : 6 * (i + 2)] += (i + 1) * _EYE6
    return out


class SpatialVector:
    """A flavored 6D quantity; motion and force vectors never mix."""

    __slots__ = ("angular", "linear", "flavor")

    def __init__(self, angular, linear, flavor=MOTION):
        if flavor not in (MOTION, FORCE):
            raise ValueError(f"unknown flavor {flavor!r}")
        self.angular = np.asarray(angular, dtype=float)
        self.linear = np.asarray(linear, dtype=float)
        self.flavor = flavor

    @classmethod
    def from_array(cls, u, flavor=MOTION):
        u = np.asarray(u, dtype=float)
        return cls(u[:3], u[3:], flavor)

    @property
    def array(self):
        return np.concatenate([self.angular, self.linear])

    def cross(self):
        return cross6(self.array, self.flavor)
