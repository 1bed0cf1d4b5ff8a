"""Analytical Jacobians of stacked kinematic and dynamic quantities.

Every Jacobian maps variations of the stacked joint coordinate series
(per joint: coordinates, then rate blocks in ascending order) to the
variation of a link or joint quantity.  They are assembled by composing
small linear maps along the tree:

* coordinate variation -> joint tangent (selection then inverse Psi)
* joint tangents -> link tangent (transform-weighted sum over ancestors)
* link tangent -> velocity variation (rectangular shift operator)
* velocity -> momentum (inertia), local -> world momentum (dual
  transform plus a swap-operator correction), accumulation over
  descendants, world -> local recovery (inverse transform with its own
  correction)
* momentum -> force (rectangular operator plus a swap correction)
* force -> torque (selection transpose)

Velocity and momentum Jacobians at output order K take input order K;
force and torque Jacobians take input order K+1.
"""

import numpy as np

from .cmtm import psi_map
from .model import ModelError, comprehensive_selection
from .kinodynamics import coord_col_slices, forward_state, compute_momenta
from .spatial import FORCE, MOTION, stacked_cross, u_operator

FAMILIES = ("v", "h_L", "wh_L", "wh_J", "h_J", "f_L", "f_J", "tau")

_FORCE_FAMILIES = frozenset(("f_L", "f_J", "tau"))


class JacobianBundle:
    """Dense Jacobians for the requested families at one state.

    entries[family][i] is the matrix for link/joint i.  input_order maps
    each family to the coordinate-series order its columns refer to.
    """

    def __init__(self, k_out, dims):
        self.k_out = k_out
        self.dims = tuple(dims)
        self.entries = {}
        self.input_order = {}

    def add(self, family, mats, k_in):
        self.entries[family] = mats
        self.input_order[family] = k_in

    def cols(self, family):
        k_in = self.input_order[family]
        return sum(n * (k_in + 2) for n in self.dims)

    def __getitem__(self, family):
        return self.entries[family]


def _require_single_dof(model):
    if not model.is_single_dof():
        raise ModelError(
            "analytical Jacobians are assembled for single-dof joint models only"
        )


def _rel_motion_matrix(state, i, j, k):
    """Motion realization of the link-j-to-link-i transform at order k."""
    rel = state.x_world[i].truncate(k).inverse().compose(state.x_world[j].truncate(k))
    return rel.matrix()


def velocity_jacobians(state, k_out):
    """Joint tangent, link tangent, and link velocity Jacobians at order k_out.

    Returns (J_psi, J_x, J_v): J_psi[j] maps joint j's coordinate block
    to its tangent stack; J_x[i] and J_v[i] take the full coordinate
    vector.  Needs state order >= k_out + 1.
    """
    model = state.model
    _require_single_dof(model)
    if state.order < k_out + 1:
        raise ValueError(
            f"state order {state.order} insufficient for velocity Jacobians at {k_out}"
        )
    dims = model.joint_dims
    slices = coord_col_slices(dims, k_out)
    total = sum(n * (k_out + 2) for n in dims)

    j_psi = []
    for j, joint in enumerate(model.joints):
        psi_inv = psi_map(state.v_joint[j].blocks[: k_out + 1]).inverse_matrix()
        s_comp = comprehensive_selection(joint.selection(), k_out + 2)
        j_psi.append(psi_inv @ s_comp)

    j_x = []
    for i in range(model.nb):
        mat = np.zeros((6 * (k_out + 2), total))
        p = model.parent[i]
        if p >= 0:
            rel = _rel_motion_matrix(state, i, p, k_out + 1)
            mat += rel @ j_x[p]
        mat[:, slices[i]] += j_psi[i]
        j_x.append(mat)

    j_v = []
    for i in range(model.nb):
        u = u_operator(state.v[i].blocks[: k_out + 1], MOTION)
        j_v.append(u @ j_x[i])
    return j_psi, j_x, j_v


def momentum_jacobians(state, k_out, j_x, j_v):
    """Link and joint momentum Jacobians, local and world frame.

    The world-frame link map adds the transform-variation correction
    through the link tangent; accumulation over descendants runs in the
    world frame where the propagation blocks are identities; local
    recovery subtracts the inverse-transform correction.
    """
    model = state.model
    if state.h is None:
        compute_momenta(state)
    rows = 6 * (k_out + 1)

    j_h_l, j_wh_l = [], []
    for i in range(model.nb):
        inertia = np.kron(np.eye(k_out + 1), model.link_inertia(i))
        jh = inertia @ j_v[i]
        xs = state.xs_world[i].truncate(k_out).matrix()
        hat_h = stacked_cross(state.h[i].blocks[: k_out + 1], FORCE, hat=True)
        j_h_l.append(jh)
        j_wh_l.append(xs @ (jh + hat_h @ j_x[i][:rows, :]))

    j_wh_j = [None] * model.nb
    for i in reversed(range(model.nb)):
        acc = j_wh_l[i].copy()
        for c in model.children(i):
            acc += j_wh_j[c]
        j_wh_j[i] = acc

    j_h_j = []
    for i in range(model.nb):
        xs_inv = state.xs_world[i].truncate(k_out).inverse().matrix()
        hat_hj = stacked_cross(state.h_joint[i].blocks[: k_out + 1], FORCE, hat=True)
        j_h_j.append(xs_inv @ j_wh_j[i] - hat_hj @ j_x[i][:rows, :])
    return j_h_l, j_wh_l, j_wh_j, j_h_j


def force_jacobians(state, k_out, j_v_hi, j_h_l_hi, j_h_j_hi):
    """Link and joint force Jacobians at order k_out.

    Consumes the order k_out+1 velocity and momentum Jacobians; the
    columns therefore refer to the order k_out+1 coordinate series.
    """
    model = state.model
    pad = np.zeros((6 * (k_out + 1), 6))
    j_f_l, j_f_j = [], []
    for i in range(model.nb):
        u_star = u_operator(state.v[i].blocks[: k_out + 1], FORCE)
        hat_l = np.hstack(
            [stacked_cross(state.h[i].blocks[: k_out + 1], FORCE, hat=True), pad]
        )
        hat_j = np.hstack(
            [stacked_cross(state.h_joint[i].blocks[: k_out + 1], FORCE, hat=True), pad]
        )
        j_f_l.append(u_star @ j_h_l_hi[i] + hat_l @ j_v_hi[i])
        j_f_j.append(u_star @ j_h_j_hi[i] + hat_j @ j_v_hi[i])
    return j_f_l, j_f_j


def torque_jacobians(state, k_out, j_f_j):
    """Selection-transpose projection of the joint force Jacobians."""
    out = []
    for i, joint in enumerate(state.model.joints):
        s_comp = comprehensive_selection(joint.selection(), k_out + 1)
        out.append(s_comp.T @ j_f_j[i])
    return out


def jacobian_bundle(model, coords, gravity, k_out, families=FAMILIES):
    """Assemble the requested Jacobian families at output order k_out.

    Velocity/momentum families land at input order k_out; force/torque
    families at k_out + 1.  The forward state is run exactly one order
    above the highest internal requirement.
    """
    _require_single_dof(model)
    unknown = set(families) - set(FAMILIES)
    if unknown:
        raise ValueError(f"unknown Jacobian families {sorted(unknown)}")
    needs_force = bool(_FORCE_FAMILIES & set(families))
    state_order = k_out + 2 if needs_force else k_out + 1
    state = forward_state(model, coords, gravity, state_order)
    compute_momenta(state)

    bundle = JacobianBundle(k_out, model.joint_dims)
    j_psi, j_x, j_v = velocity_jacobians(state, k_out)
    if "v" in families:
        bundle.add("v", j_v, k_out)
    if {"h_L", "wh_L", "wh_J", "h_J"} & set(families) or needs_force:
        j_h_l, j_wh_l, j_wh_j, j_h_j = momentum_jacobians(state, k_out, j_x, j_v)
        for name, mats in (
            ("h_L", j_h_l),
            ("wh_L", j_wh_l),
            ("wh_J", j_wh_j),
            ("h_J", j_h_j),
        ):
            if name in families:
                bundle.add(name, mats, k_out)
    if needs_force:
        _, j_x_hi, j_v_hi = velocity_jacobians(state, k_out + 1)
        j_h_l_hi, _, _, j_h_j_hi = momentum_jacobians(state, k_out + 1, j_x_hi, j_v_hi)
        j_f_l, j_f_j = force_jacobians(state, k_out, j_v_hi, j_h_l_hi, j_h_j_hi)
        if "f_L" in families:
            bundle.add("f_L", j_f_l, k_out + 1)
        if "f_J" in families:
            bundle.add("f_J", j_f_j, k_out + 1)
        if "tau" in families:
            bundle.add("tau", torque_jacobians(state, k_out, j_f_j), k_out + 1)
    return bundle


def chain_to_spline(j_quantity, dq_dtheta):
    """Chain a coordinate-series Jacobian through d(coord series)/d(params)."""
    j_quantity = np.asarray(j_quantity, dtype=float)
    dq_dtheta = np.asarray(dq_dtheta, dtype=float)
    if j_quantity.shape[1] != dq_dtheta.shape[0]:
        raise ValueError(
            f"column dim {j_quantity.shape[1]} does not match series rows {dq_dtheta.shape[0]}"
        )
    return j_quantity @ dq_dtheta
