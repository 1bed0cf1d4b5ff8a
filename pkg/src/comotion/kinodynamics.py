"""Forward comprehensive computation over a kinematic tree.

Builds per-link derivative-stacked transforms and velocities by the
chain rule, then momenta, forces and joint torques.  Force/torque stacks
come out one order lower than the velocity/momentum stacks they consume.
"""

import numpy as np

from .cmtm import DUAL, Cmtm
from .model import comprehensive_selection
from .series import DerivSeries
from .spatial import FORCE, SpatialTransform, u_operator


class GravitySpec:
    """Uniform gravity, handled as a fictitious base acceleration.

    The base velocity stack gets first derivative block [0; -g] in the
    base frame; this is constant under joint-coordinate variations, so
    all Jacobians are unaffected.
    """

    __slots__ = ("vector", "enabled")

    def __init__(self, vector=(0.0, 0.0, -9.81), enabled=True):
        self.vector = np.asarray(vector, dtype=float)
        self.enabled = bool(enabled)

    @classmethod
    def off(cls):
        return cls(enabled=False)


GRAVITY_OFF = GravitySpec.off()


class JointCoordSeries:
    """Per-joint coordinates q plus the Taylor stack of their rates.

    Stored per joint as q (n_i,) and qd (K+1, n_i) with qd block k equal
    to q^(k+1)/k!.  The stacked layout concatenates joints in model
    order, each as [q | qd blocks in ascending order].
    """

    __slots__ = ("dims", "order", "q", "qd")

    def __init__(self, dims, order, q, qd):
        self.dims = tuple(int(d) for d in dims)
        self.order = int(order)
        self.q = [np.asarray(x, dtype=float) for x in q]
        self.qd = [np.asarray(x, dtype=float) for x in qd]
        for n, qi, qdi in zip(self.dims, self.q, self.qd):
            if qi.shape != (n,) or qdi.shape != (self.order + 1, n):
                raise ValueError("joint coordinate series shape mismatch")

    @classmethod
    def zeros(cls, dims, order):
        return cls(
            dims,
            order,
            [np.zeros(n) for n in dims],
            [np.zeros((order + 1, n)) for n in dims],
        )

    @classmethod
    def from_stacked(cls, dims, order, vec):
        vec = np.asarray(vec, dtype=float)
        q, qd, at = [], [], 0
        for n in dims:
            q.append(vec[at : at + n])
            at += n
            qd.append(vec[at : at + n * (order + 1)].reshape(order + 1, n))
            at += n * (order + 1)
        if at != vec.size:
            raise ValueError("stacked coordinate vector has wrong length")
        return cls(dims, order, q, qd)

    def stacked(self):
        parts = []
        for qi, qdi in zip(self.q, self.qd):
            parts.append(qi)
            parts.append(qdi.reshape(-1))
        return np.concatenate(parts)

    def truncate(self, order):
        if order > self.order:
            raise ValueError("cannot truncate to a higher order")
        return JointCoordSeries(
            self.dims, order, self.q, [x[: order + 1] for x in self.qd]
        )

    @property
    def total_dim(self):
        return sum(n * (self.order + 2) for n in self.dims)


def coord_col_slices(dims, order):
    """Column slice per joint in the stacked coordinate layout."""
    out, at = [], 0
    for n in dims:
        width = n * (order + 2)
        out.append(slice(at, at + width))
        at += width
    return out


class ComprehensiveState:
    """Output of the forward pass; dynamics fields fill in progressively."""

    def __init__(self, model, coords, gravity, order):
        self.model = model
        self.coords = coords
        self.gravity = gravity
        self.order = order
        self.base_cmtm = None
        self.x_rel = []    # parent-to-link CMTMs
        self.x_world = []  # base-to-link CMTMs
        self.v = []        # link velocity stacks (DerivSeries)
        self.v_joint = []  # joint velocity stacks
        self.xs_world = None   # dual CMTMs of the world poses
        self.h = None          # link momentum stacks
        self.wh = None         # link momenta in the world frame
        self.wh_joint = None   # accumulated joint momenta, world frame
        self.h_joint = None    # joint momentum stacks, local frame
        self.f = None          # link force stacks, order one lower
        self.f_joint = None
        self.tau = None        # per-joint torque stacks (K, n_i) arrays

    @property
    def force_order(self):
        return self.order - 1


def forward_state(model, coords, gravity=GRAVITY_OFF, order=None):
    """Compose link CMTMs root-to-leaf and accumulate link velocities.

    coords must carry at least the requested derivative order.  With
    gravity enabled the base stack is seeded with the fictitious
    acceleration, which requires order >= 1.
    """
    if order is None:
        order = coords.order
    if coords.order < order:
        raise ValueError(f"coords order {coords.order} below requested state order {order}")
    if coords.dims != model.joint_dims:
        raise ValueError("coordinate dims do not match the model's joints")

    st = ComprehensiveState(model, coords, gravity, order)

    # gravity enters at derivative block 1; an order 0 stack cannot carry
    # it and none of the order 0 quantities depend on it
    base_blocks = np.zeros((order + 1, 6))
    if gravity.enabled and order >= 1:
        base_blocks[1, 3:] = -gravity.vector
    st.base_cmtm = Cmtm(SpatialTransform.identity(), base_blocks)

    for i, joint in enumerate(model.joints):
        s = joint.selection()
        vj = np.vstack([(s @ coords.qd[i][k]) for k in range(order + 1)])
        rel = Cmtm(joint.motion(coords.q[i]), vj)
        parent = st.base_cmtm if model.parent[i] < 0 else st.x_world[model.parent[i]]
        world = parent.compose(rel)
        st.x_rel.append(rel)
        st.x_world.append(world)
        st.v_joint.append(DerivSeries(vj))
        st.v.append(world.vel)
    return st


def compute_momenta(st):
    """Fill link momenta, their world-frame images, and joint momenta.

    Joint momenta accumulate in the world frame as a plain sum over the
    link's descendants (itself included) and map back through the
    inverse dual transform.
    """
    model = st.model
    st.xs_world = [Cmtm(x.pose, x.vel, DUAL) for x in st.x_world]
    st.h = []
    st.wh = []
    for i in range(model.nb):
        inertia = model.link_inertia(i)
        h_blocks = st.v[i].blocks @ inertia.T
        st.h.append(DerivSeries(h_blocks))
        st.wh.append(DerivSeries.from_stacked(st.xs_world[i].apply(h_blocks.reshape(-1))))
    wh_joint = [None] * model.nb
    for i in reversed(range(model.nb)):
        acc = st.wh[i].stacked().copy()
        for c in model.children(i):
            acc += wh_joint[c].stacked()
        wh_joint[i] = DerivSeries.from_stacked(acc)
    st.wh_joint = wh_joint
    st.h_joint = [
        DerivSeries.from_stacked(st.xs_world[i].inverse().apply(wh_joint[i].stacked()))
        for i in range(model.nb)
    ]
    return st


def compute_forces(st):
    """Map momentum stacks to force stacks, one order lower.

    Both link and joint forces use the owning link's velocity in the
    rectangular momentum-to-force operator.
    """
    if st.order < 1:
        raise ValueError("force computation needs state order >= 1")
    if st.h is None:
        compute_momenta(st)
    k_out = st.order - 1
    st.f = []
    st.f_joint = []
    for i in range(st.model.nb):
        u_star = u_operator(st.v[i].blocks[: k_out + 1], FORCE)
        st.f.append(DerivSeries.from_stacked(u_star @ st.h[i].stacked()))
        st.f_joint.append(DerivSeries.from_stacked(u_star @ st.h_joint[i].stacked()))
    return st


def compute_torques(st):
    """Project joint force stacks through the selection matrices."""
    if st.f_joint is None:
        compute_forces(st)
    k_out = st.order - 1
    st.tau = []
    for i, joint in enumerate(st.model.joints):
        s = joint.selection()
        blocks = st.f_joint[i].blocks @ s  # (K_out+1, n_i)
        st.tau.append(blocks)
    return st


def full_state(model, coords, gravity=GRAVITY_OFF, order=None):
    """Forward pass plus momenta, forces and torques."""
    st = forward_state(model, coords, gravity, order)
    return compute_torques(compute_forces(compute_momenta(st)))


def basic_jacobian(state, k):
    """Comprehensive basic Jacobian per link: v_L = Jtilde @ qdot stack.

    Maps the stacked joint-rate series (without the coordinate block) to
    the link velocity stack.  Exact as a value relation, but not the
    derivative of the velocity with respect to the coordinate series.
    """
    model = state.model
    dims = model.joint_dims
    width = sum(n * (k + 1) for n in dims)
    offs, at = [], 0
    for n in dims:
        offs.append(at)
        at += n * (k + 1)
    out = []
    for i in range(model.nb):
        mat = np.zeros((6 * (k + 1), width))
        xwi_inv = state.x_world[i].truncate(k).inverse()
        for j in model.ancestors(i) + [i]:
            rel = xwi_inv.compose(state.x_world[j].truncate(k))
            s_comp = comprehensive_selection(model.joints[j].selection(), k + 1)
            mat[:, offs[j] : offs[j] + dims[j] * (k + 1)] = rel.matrix() @ s_comp
        out.append(mat)
    return out


def whole_body_operators(state, k=None):
    """Stacked block operators relating link- and joint-space stacks.

    Returns a dict of dense matrices over the moving links:

    - X_JL / X_LJ: joint-from-link velocity map and its inverse
    - Xs_LJ / Xs_JL: local momentum maps (dual flavor)
    - Xhw_LJ / Xhw_JL: world-frame momentum maps (identity/zero blocks)
    - Xw_L, Xw_J: block-diagonal world CMTMs (joint frames coincide)
    - Xws_L, Xws_J: dual counterparts
    - I_L: block-diagonal comprehensive inertia
    - U_L, U_J: block-diagonal momentum-to-force operators
    - S_J: block-diagonal comprehensive selection
    - v_base: per-joint exogenous base-velocity term, so that
      v_J = X_JL @ v_L - v_base
    """
    model = state.model
    if k is None:
        k = state.order
    if k > state.order:
        raise ValueError("requested order exceeds the state order")
    nb = model.nb
    b = 6 * (k + 1)
    eye = np.eye(b)

    def rel_motion(i, j):
        return state.x_world[i].truncate(k).inverse().compose(
            state.x_world[j].truncate(k)
        ).matrix()

    def rel_dual(i, j):
        x = state.x_world[i].truncate(k).inverse().compose(state.x_world[j].truncate(k))
        return Cmtm(x.pose, x.vel, DUAL).matrix()

    x_jl = np.zeros((nb * b, nb * b))
    x_lj = np.zeros_like(x_jl)
    xs_lj = np.zeros_like(x_jl)
    xs_jl = np.zeros_like(x_jl)
    xhw_lj = np.zeros_like(x_jl)
    xhw_jl = np.zeros_like(x_jl)
    for i in range(nb):
        sl_i = slice(i * b, (i + 1) * b)
        x_jl[sl_i, sl_i] = eye
        x_lj[sl_i, sl_i] = eye
        xs_lj[sl_i, sl_i] = eye
        xs_jl[sl_i, sl_i] = eye
        xhw_lj[sl_i, sl_i] = eye
        xhw_jl[sl_i, sl_i] = eye
        p = model.parent[i]
        if p >= 0:
            x_jl[sl_i, p * b : (p + 1) * b] = -rel_motion(i, p)
        for j in model.ancestors(i):
            x_lj[sl_i, j * b : (j + 1) * b] = rel_motion(i, j)
        for c in model.children(i):
            xs_lj[sl_i, c * b : (c + 1) * b] = -rel_dual(i, c)
            xhw_lj[sl_i, c * b : (c + 1) * b] = -eye
        for d in model.descendants(i):
            xs_jl[sl_i, d * b : (d + 1) * b] = rel_dual(i, d)
            xhw_jl[sl_i, d * b : (d + 1) * b] = eye

    xw = np.zeros((nb * b, nb * b))
    xws = np.zeros_like(xw)
    inertia = np.zeros_like(xw)
    for i in range(nb):
        sl_i = slice(i * b, (i + 1) * b)
        xw[sl_i, sl_i] = state.x_world[i].truncate(k).matrix()
        xws[sl_i, sl_i] = Cmtm(state.x_world[i].pose, state.x_world[i].vel, DUAL).truncate(k).matrix()
        inertia[sl_i, sl_i] = np.kron(np.eye(k + 1), model.link_inertia(i))

    bu = 6 * k  # rows of each U block (force order k-1) when k >= 1
    u_l = np.zeros((nb * bu, nb * b))
    for i in range(nb):
        if k >= 1:
            u_l[i * bu : (i + 1) * bu, i * b : (i + 1) * b] = u_operator(
                state.v[i].blocks[:k], FORCE
            )
    u_j = u_l.copy()

    sel_cols = []
    for j in state.model.joints:
        sel_cols.append(comprehensive_selection(j.selection(), k + 1))
    s_j = np.zeros((nb * b, sum(s.shape[1] for s in sel_cols)))
    at = 0
    for i, s in enumerate(sel_cols):
        s_j[i * b : (i + 1) * b, at : at + s.shape[1]] = s
        at += s.shape[1]

    v_base = np.zeros(nb * b)
    for i in range(nb):
        if model.parent[i] < 0:
            v_base[i * b : (i + 1) * b] = state.x_rel[i].truncate(k).inverse().apply(
                state.base_cmtm.truncate(k).vel.stacked()
            )

    return {
        "X_JL": x_jl,
        "X_LJ": x_lj,
        "Xs_LJ": xs_lj,
        "Xs_JL": xs_jl,
        "Xhw_LJ": xhw_lj,
        "Xhw_JL": xhw_jl,
        "Xw_L": xw,
        "Xw_J": xw.copy(),
        "Xws_L": xws,
        "Xws_J": xws.copy(),
        "I_L": inertia,
        "U_L": u_l,
        "U_J": u_j,
        "S_J": s_j,
        "v_base": v_base,
    }


def stack_link_series(series_list):
    """Concatenate per-link DerivSeries stacks into one vector."""
    return np.concatenate([s.stacked() for s in series_list])
