"""Clamped B-spline trajectories and their derivative basis matrices.

Basis functions follow the Cox-de Boor recursion with the empty-span
convention (0/0 treated as 0).  Degree p splines on clamped knots are
C^{p-1}, reproduce degree p polynomials, and give derivative stacks that
are linear in the control points.
"""

import math

import numpy as np

from .kinodynamics import JointCoordSeries


def clamped_knots(n_c, p, duration):
    """Knot vector with the first and last knot repeated p+1 times."""
    if n_c < p + 1:
        raise ValueError(f"need at least p+1={p + 1} control points, got {n_c}")
    interior = np.linspace(0.0, duration, n_c - p + 1)
    return np.concatenate([np.zeros(p), interior, np.full(p, duration)])


def bspline_basis(i, p, t, knots, k=0):
    """k-th derivative of basis i of degree p at t.

    Zero denominators in the recursion are resolved as zero
    contributions.  The right endpoint is treated as belonging to the
    last nonempty span so the clamped end interpolates.
    """
    if k < 0:
        raise ValueError("derivative order must be nonnegative")
    if k > 0:
        out = 0.0
        d0 = knots[i + p] - knots[i]
        if d0 > 0:
            out += p / d0 * bspline_basis(i, p - 1, t, knots, k - 1)
        d1 = knots[i + p + 1] - knots[i + 1]
        if d1 > 0:
            out -= p / d1 * bspline_basis(i + 1, p - 1, t, knots, k - 1)
        return out
    if p == 0:
        if knots[i] <= t < knots[i + 1]:
            return 1.0
        # half-open spans would drop the right endpoint entirely
        if t == knots[i + 1] == knots[-1] and knots[i] < knots[i + 1]:
            return 1.0
        return 0.0
    out = 0.0
    d0 = knots[i + p] - knots[i]
    if d0 > 0:
        out += (t - knots[i]) / d0 * bspline_basis(i, p - 1, t, knots)
    d1 = knots[i + p + 1] - knots[i + 1]
    if d1 > 0:
        out += (knots[i + p + 1] - t) / d1 * bspline_basis(i + 1, p - 1, t, knots)
    return out


def basis_row(p, t, knots, n_c, k=0):
    """All n_c basis values (or k-th derivatives) at t."""
    return np.array([bspline_basis(i, p, t, knots, k) for i in range(n_c)])


def dmatrix(p, k, t, knots, n_c, n_q):
    """Derivative basis matrix: q^(k)(t) = dmatrix(...) @ theta.

    theta stacks the control points [m_0; m_1; ...], each of size n_q;
    the matrix is the row of basis derivatives Kronecker the identity.
    """
    return np.kron(basis_row(p, t, knots, n_c, k), np.eye(n_q))


class BSplineTrajectory:
    """Joint trajectory parameterized by spline control points."""

    def __init__(self, degree, n_c, duration, n_q, theta=None):
        self.degree = int(degree)
        self.n_c = int(n_c)
        self.duration = float(duration)
        self.n_q = int(n_q)
        self.knots = clamped_knots(self.n_c, self.degree, self.duration)
        if theta is None:
            theta = np.zeros(self.n_c * self.n_q)
        self.theta = np.asarray(theta, dtype=float)
        if self.theta.shape != (self.n_c * self.n_q,):
            raise ValueError("theta must have n_c * n_q entries")

    def _check_t(self, t):
        if not 0.0 <= t <= self.duration:
            raise ValueError(f"t={t} outside [0, {self.duration}]")

    def value(self, t, k=0):
        """q^(k)(t); derivatives beyond the degree are identically zero."""
        self._check_t(t)
        if k > self.degree:
            return np.zeros(self.n_q)
        return dmatrix(self.degree, k, t, self.knots, self.n_c, self.n_q) @ self.theta

    def eval_series(self, t, order):
        """Joint coordinate series at t: q plus Taylor blocks of the rates."""
        self._check_t(t)
        q = self.value(t, 0)
        qd = np.vstack(
            [self.value(t, k + 1) / math.factorial(k) for k in range(order + 1)]
        )
        dims = (1,) * self.n_q
        return JointCoordSeries(
            dims,
            order,
            [q[j : j + 1] for j in range(self.n_q)],
            [qd[:, j : j + 1] for j in range(self.n_q)],
        )

    def series_jacobian(self, t, order):
        """d(stacked coordinate series)/d(theta) at t.

        Rows follow the per-joint layout [q | rate blocks]; the rate
        block k carries the 1/k! Taylor normalization.
        """
        self._check_t(t)
        rows_by_k = [
            dmatrix(self.degree, k, t, self.knots, self.n_c, self.n_q)
            if k <= self.degree
            else np.zeros((self.n_q, self.n_c * self.n_q))
            for k in range(order + 2)
        ]
        out = []
        for j in range(self.n_q):
            out.append(rows_by_k[0][j])
            for k in range(order + 1):
                out.append(rows_by_k[k + 1][j] / math.factorial(k))
        return np.vstack(out)

    def with_theta(self, theta):
        return BSplineTrajectory(self.degree, self.n_c, self.duration, self.n_q, theta)

    @classmethod
    def fit(cls, degree, n_c, duration, times, values):
        """Least-squares control points matching q samples (rows of values)."""
        values = np.asarray(values, dtype=float)
        n_q = values.shape[1]
        traj = cls(degree, n_c, duration, n_q)
        basis = np.vstack([basis_row(degree, t, traj.knots, n_c) for t in times])
        coef, *_ = np.linalg.lstsq(basis, values, rcond=None)
        return traj.with_theta(coef.reshape(n_c * n_q))
