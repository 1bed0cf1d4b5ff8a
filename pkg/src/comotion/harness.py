"""Verification oracles, error metrics, model generators, and benchmarks.

The finite-difference machinery here is deliberately independent of the
analytical Jacobian assembly: it only drives the forward computation.
The planar Lagrangian oracle shares nothing with the spatial-algebra
stack beyond elementary trig.
"""

import math
import time

import numpy as np

from .jacobians import FAMILIES, jacobian_bundle
from .kinodynamics import (
    GRAVITY_OFF,
    GravitySpec,
    JointCoordSeries,
    compute_momenta,
    compute_torques,
    forward_state,
)
from .model import (
    REVOLUTE,
    JointSpec,
    LinkSpec,
    ModelError,
    RobotModel,
    rpy_matrix,
)
from .spatial import SpatialTransform


class FdConfig:
    """Finite-difference settings for Jacobian references.

    Coordinate-series inputs are perturbed additively (they are plain
    vector coordinates); the lie flag marks configurations whose
    pose-valued targets are probed through multiplicative group
    perturbations instead, as in the transform-variation tests.
    """

    __slots__ = ("step", "scheme", "lie")

    def __init__(self, step=1e-6, scheme="central", lie=False):
        if step <= 0:
            raise ValueError("FD step must be positive")
        if scheme not in ("central", "forward"):
            raise ValueError(f"unknown FD scheme {scheme!r}")
        self.step = step
        self.scheme = scheme
        self.lie = lie


def fd_jacobian(f, x0, cfg=None):
    """Columnwise finite-difference Jacobian of f at x0.

    f maps a flat vector to a flat vector and must be deterministic;
    non-finite outputs raise.
    """
    cfg = cfg or FdConfig()
    x0 = np.asarray(x0, dtype=float)
    h = cfg.step
    f0 = None if cfg.scheme == "central" else np.asarray(f(x0), dtype=float)
    cols = []
    for i in range(x0.size):
        e = np.zeros_like(x0)
        e[i] = h
        if cfg.scheme == "central":
            col = (np.asarray(f(x0 + e)) - np.asarray(f(x0 - e))) / (2 * h)
        else:
            col = (np.asarray(f(x0 + e)) - f0) / h
        if not np.all(np.isfinite(col)):
            raise FloatingPointError("non-finite finite-difference output")
        cols.append(col)
    return np.column_stack(cols)


def fd_time_derivative(f, t, k, h=None, richardson=True):
    """k-th time derivative of a (matrix-valued) trajectory by central stencils.

    Repeated central first differences with one Richardson step; the
    default step grows with k to keep float64 roundoff below the
    truncation error.
    """
    if h is None:
        h = (1e-6, 1e-5, 1e-4, 2e-3, 4e-3)[min(k, 4)]

    def rep(g, t0, kk, hh):
        if kk == 0:
            return np.asarray(g(t0), dtype=float)
        return (rep(g, t0 + hh, kk - 1, hh) - rep(g, t0 - hh, kk - 1, hh)) / (2 * hh)

    if k == 0:
        return np.asarray(f(t), dtype=float)
    if not richardson:
        return rep(f, t, k, h)
    d1 = rep(f, t, k, h)
    d2 = rep(f, t, k, h / 2)
    return (4.0 * d2 - d1) / 3.0


def normalized_error(j_test, j_ref):
    """(max absolute difference, that maximum over max |reference entry|)."""
    j_test = np.asarray(j_test, dtype=float)
    j_ref = np.asarray(j_ref, dtype=float)
    if j_test.shape != j_ref.shape:
        raise ValueError(f"shape mismatch {j_test.shape} vs {j_ref.shape}")
    max_abs = float(np.abs(j_test - j_ref).max()) if j_test.size else 0.0
    denom = float(np.abs(j_ref).max()) if j_ref.size else 0.0
    if denom == 0.0:
        raise ValueError("reference Jacobian is identically zero, e_J undefined")
    return max_abs, max_abs / denom


def _quantity_rows(state, family):
    if family == "v":
        return [s.stacked() for s in state.v]
    if family == "h_L":
        return [s.stacked() for s in state.h]
    if family == "wh_L":
        return [s.stacked() for s in state.wh]
    if family == "wh_J":
        return [s.stacked() for s in state.wh_joint]
    if family == "h_J":
        return [s.stacked() for s in state.h_joint]
    if family == "f_L":
        return [s.stacked() for s in state.f]
    if family == "f_J":
        return [s.stacked() for s in state.f_joint]
    if family == "tau":
        return [t.reshape(-1) for t in state.tau]
    raise ValueError(f"unknown family {family!r}")


def fd_family_reference(model, coords, gravity, family, k_out, cfg=None):
    """Finite-difference Jacobians of one family for every link/joint.

    Velocity/momentum families perturb the order k_out coordinate
    series; force/torque families the order k_out + 1 series.  Each
    forward pass runs at exactly the order the family needs, so the
    reference never touches the analytical assembly.
    """
    cfg = cfg or FdConfig()
    force_like = family in ("f_L", "f_J", "tau")
    k_in = k_out + 1 if force_like else k_out
    base = coords.truncate(k_in)
    dims = model.joint_dims
    nb = model.nb

    def evaluate(vec):
        c = JointCoordSeries.from_stacked(dims, k_in, vec)
        st = forward_state(model, c, gravity, k_in)
        if force_like:
            # force/torque stacks from an order k_in state are order k_out already
            compute_torques(st)
            rows = _quantity_rows(st, family)
        else:
            compute_momenta(st)
            rows = _quantity_rows(st, family)
        return np.concatenate(rows)

    big = fd_jacobian(evaluate, base.stacked(), cfg)
    per = np.array_split(big, nb, axis=0)
    return per


def jacobian_error_report(model, coords, gravity, orders, families=FAMILIES, cfg=None):
    """Rows (family, order, max_abs, e_J) maximized over links/joints.

    e_J is NaN when the reference is identically zero for every target.
    """
    cfg = cfg or FdConfig()
    rows = []
    for k in orders:
        bundle = jacobian_bundle(model, coords, gravity, k, families)
        for family in families:
            ref = fd_family_reference(model, coords, gravity, family, k, cfg)
            worst_abs, worst_rel = 0.0, 0.0
            defined = False
            for a, r in zip(bundle[family], ref):
                try:
                    m_abs, e_j = normalized_error(a, r)
                except ValueError:
                    continue
                defined = True
                worst_abs = max(worst_abs, m_abs)
                worst_rel = max(worst_rel, e_j)
            shape = bundle[family][-1].shape
            rows.append(
                {
                    "family": family,
                    "order": k,
                    "max_abs": worst_abs,
                    "e_J": worst_rel if defined else math.nan,
                    "rows": shape[0],
                    "cols": shape[1],
                }
            )
    return rows


# ---------------------------------------------------------------------------
# model generators


def simple_arm(n, axis=3, gravity_plane=False):
    """Serial arm of n unit links: mass 5 kg, com at mid-link, 0.1 I3 inertia."""
    links = [LinkSpec("base", 1.0, [0, 0, 0], [0.0] * 6)]
    joints = []
    for i in range(1, n + 1):
        links.append(
            LinkSpec(f"l{i}", 5.0, [0.5, 0.0, 0.0], [0.1, 0.1, 0.1, 0.0, 0.0, 0.0])
        )
        xyz = [0.0, 0.0, 0.0] if i == 1 else [1.0, 0.0, 0.0]
        joints.append(
            JointSpec(
                f"j{i}",
                "base" if i == 1 else f"l{i - 1}",
                f"l{i}",
                REVOLUTE,
                axis,
                SpatialTransform(np.eye(3), xyz),
            )
        )
    return RobotModel(f"arm{n}", links, joints, "base")


def random_chain(dof, seed=0):
    """Random serial chain with cycled axes and randomized inertial data."""
    rng = np.random.default_rng(seed)
    links = [LinkSpec("base", 1.0, [0, 0, 0], [0.0] * 6)]
    joints = []
    for i in range(1, dof + 1):
        m = rng.uniform(1.0, 5.0)
        com = rng.uniform(-0.2, 0.5, 3)
        a = rng.uniform(-1.0, 1.0, (3, 3))
        i_c = 0.05 * (a @ a.T) + 0.05 * np.eye(3)
        inertia = [i_c[0, 0], i_c[1, 1], i_c[2, 2], i_c[0, 1], i_c[0, 2], i_c[1, 2]]
        links.append(LinkSpec(f"l{i}", m, com, inertia))
        xyz = rng.uniform(0.2, 0.8, 3) if i > 1 else np.zeros(3)
        rpy = rng.uniform(-0.4, 0.4, 3)
        axis = int(rng.integers(1, 4))
        joints.append(
            JointSpec(
                f"j{i}",
                "base" if i == 1 else f"l{i - 1}",
                f"l{i}",
                REVOLUTE,
                axis,
                SpatialTransform(rpy_matrix(rpy), xyz),
            )
        )
    return RobotModel(f"chain{dof}", links, joints, "base")


def random_coords(model, order, seed=0, scale=1.0):
    """Coordinate series with every entry uniform in [-scale, scale]."""
    rng = np.random.default_rng(seed)
    dims = model.joint_dims
    q = [rng.uniform(-scale, scale, n) for n in dims]
    qd = [rng.uniform(-scale, scale, (order + 1, n)) for n in dims]
    return JointCoordSeries(dims, order, q, qd)


# ---------------------------------------------------------------------------
# planar Lagrangian oracle


def _planar_params(model, gravity):
    if model.nb > 2:
        raise ModelError("the planar oracle supports at most two links")
    g = gravity.vector if gravity.enabled else np.zeros(3)
    if abs(g[2]) > 0:
        raise ModelError("planar oracle needs gravity in the x-y plane")
    params = []
    x_off = []
    for i, joint in enumerate(model.joints):
        if joint.jtype != REVOLUTE or joint.axis != 3:
            raise ModelError("planar oracle needs revolute joints about z")
        if np.abs(joint.origin.rotation - np.eye(3)).max() > 1e-12:
            raise ModelError("planar oracle needs axis-aligned joint frames")
        if np.abs(joint.origin.translation[1:]).max() > 1e-12:
            raise ModelError("planar oracle needs joint offsets along x")
        link = model.links[model.link_order[i]]
        if np.abs(link.com[1:]).max() > 1e-12:
            raise ModelError("planar oracle needs the com on the link x axis")
        izz_com = link.inertia[2]
        params.append((link.mass, link.com[0], izz_com))
        x_off.append(joint.origin.translation[0])
    return params, x_off, g[:2]


def lagrangian_torques(model, q, qd, qdd, gravity=GRAVITY_OFF):
    """Closed-form planar torques for one- and two-link revolute-z chains.

    Derived from the standard two-link manipulator Lagrangian with link
    inertia about each joint axis Io = Izz_com + m c^2; independent of
    the spatial-algebra code paths.
    """
    params, x_off, g2 = _planar_params(model, gravity)
    q = np.asarray(q, dtype=float)
    qd = np.asarray(qd, dtype=float)
    qdd = np.asarray(qdd, dtype=float)

    def du(th):
        return np.array([-np.sin(th), np.cos(th)])

    if model.nb == 1:
        m1, c1, izz1 = params[0]
        io1 = izz1 + m1 * c1**2
        grav = -m1 * g2 @ (c1 * du(q[0]))
        return np.array([io1 * qdd[0] + grav])

    (m1, c1, izz1), (m2, c2, izz2) = params
    l1 = x_off[1]
    io1 = izz1 + m1 * c1**2
    io2 = izz2 + m2 * c2**2
    a = io1 + m2 * l1**2
    b = io2
    hh = m2 * l1 * c2
    c2q = np.cos(q[1])
    s2q = np.sin(q[1])
    m11 = a + b + 2 * hh * c2q
    m12 = b + hh * c2q
    m22 = b
    cor1 = -hh * s2q * (2 * qd[0] * qd[1] + qd[1] ** 2)
    cor2 = hh * s2q * qd[0] ** 2
    g1 = -m1 * g2 @ (c1 * du(q[0])) - m2 * g2 @ (l1 * du(q[0]) + c2 * du(q[0] + q[1]))
    g2t = -m2 * g2 @ (c2 * du(q[0] + q[1]))
    tau1 = m11 * qdd[0] + m12 * qdd[1] + cor1 + g1
    tau2 = m12 * qdd[0] + m22 * qdd[1] + cor2 + g2t
    return np.array([tau1, tau2])


# ---------------------------------------------------------------------------
# benchmark


def _fd_bundle_cost(model, coords, gravity, k, cfg):
    """Run the full finite-difference bundle once (timing path)."""
    for family in FAMILIES:
        fd_family_reference(model, coords, gravity, family, k, cfg)


def bench_sweep(dof_list, order=1, reps=10, warmup=3, seed=0, fd_cfg=None):
    """Median wall time of the analytical bundle vs the FD reference.

    Returns rows {dof, order, analytic_s, fd_s, speedup}.  The FD side
    shares forward passes across the velocity/momentum families and
    across the force/torque families, its honest evaluation cost.
    """
    fd_cfg = fd_cfg or FdConfig()
    rows = []
    for dof in dof_list:
        model = random_chain(dof, seed)
        coords = random_coords(model, order + 2, seed + 1)

        def run_analytic():
            jacobian_bundle(model, coords, GravitySpec(), order)

        def run_fd():
            _fd_grouped_bundle(model, coords, GravitySpec(), order, fd_cfg)

        rows.append(
            {
                "dof": dof,
                "order": order,
                "analytic_s": _median_time(run_analytic, reps, warmup),
                "fd_s": _median_time(run_fd, reps, warmup),
            }
        )
        rows[-1]["speedup"] = rows[-1]["fd_s"] / rows[-1]["analytic_s"]
    return rows


def _median_time(fn, reps, warmup):
    for _ in range(warmup):
        fn()
    times = []
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    times.sort()
    return times[len(times) // 2]


def _fd_grouped_bundle(model, coords, gravity, k, cfg):
    """All eight FD families with passes shared inside each order group."""
    dims = model.joint_dims

    def group(k_in, with_force):
        base = coords.truncate(k_in)

        def evaluate(vec):
            c = JointCoordSeries.from_stacked(dims, k_in, vec)
            st = forward_state(model, c, gravity, k_in)
            if with_force:
                compute_torques(st)
                parts = (
                    [s.stacked() for s in st.f]
                    + [s.stacked() for s in st.f_joint]
                    + [t.reshape(-1) for t in st.tau]
                )
            else:
                compute_momenta(st)
                parts = (
                    [s.stacked() for s in st.v]
                    + [s.stacked() for s in st.h]
                    + [s.stacked() for s in st.wh]
                    + [s.stacked() for s in st.wh_joint]
                    + [s.stacked() for s in st.h_joint]
                )
            return np.concatenate(parts)

        return fd_jacobian(evaluate, base.stacked(), cfg)

    return group(k, False), group(k + 1, True)


def loglog_slope(x, y):
    """Least-squares slope of log y against log x."""
    lx = np.log(np.asarray(x, dtype=float))
    ly = np.log(np.asarray(y, dtype=float))
    a = np.vstack([lx, np.ones_like(lx)]).T
    coef, *_ = np.linalg.lstsq(a, ly, rcond=None)
    return float(coef[0])
