import math

import numpy as np
import pytest

from comotion.harness import (
    fd_time_derivative,
    lagrangian_torques,
    random_chain,
    random_coords,
    simple_arm,
)
from comotion.kinodynamics import (
    GRAVITY_OFF,
    GravitySpec,
    JointCoordSeries,
    compute_forces,
    compute_momenta,
    forward_state,
    full_state,
    stack_link_series,
    whole_body_operators,
)
from comotion.model import FLOATING, JointSpec, LinkSpec, RobotModel
from comotion.cmtm import DUAL, Cmtm
from comotion.spatial import SpatialTransform, skew3, so3_exp


GRAV_Y = GravitySpec([0.0, -9.81, 0.0])


def coords_1dof(model, q, qd_rows):
    """Coordinate series for all-1-dof models from plain arrays."""
    q = np.atleast_1d(np.asarray(q, dtype=float))
    qd = np.atleast_2d(np.asarray(qd_rows, dtype=float))
    return JointCoordSeries(
        model.joint_dims,
        qd.shape[0] - 1,
        [q[i : i + 1] for i in range(model.nb)],
        [qd[:, i : i + 1] for i in range(model.nb)],
    )


def free_body_model(inertia=(1.0, 2.0, 3.0, 0, 0, 0), com=(0, 0, 0), mass=1.0):
    links = [
        LinkSpec("base", 1.0, [0, 0, 0], [0.0] * 6),
        LinkSpec("body", mass, com, list(inertia)),
    ]
    joints = [JointSpec("f", "base", "body", FLOATING, None, SpatialTransform())]
    return RobotModel("free", links, joints, "base")


def poly_coords(model, coefs, t, order):
    """Series of q_i(t) = polynomial i evaluated at t, all joints 1-dof."""
    q, qd = [], []
    for c in coefs:
        p = np.polynomial.Polynomial(c)
        q.append(p(t))
        qd.append([p.deriv(k + 1)(t) / math.factorial(k) for k in range(order + 1)])
    return coords_1dof(model, q, np.array(qd).T)


# -- forward kinematics ------------------------------------------------------


def test_single_revolute_velocity():
    model = simple_arm(1)
    coords = coords_1dof(model, [0.0], [[1.0], [0.0], [0.0]])
    st = forward_state(model, coords, GRAVITY_OFF, 2)
    assert np.allclose(st.v[0].blocks[0], [0, 0, 1, 0, 0, 0])
    assert np.abs(st.v[0].blocks[1:]).max() == 0.0


def test_zero_series_gives_fixed_poses():
    model = simple_arm(3)
    coords = JointCoordSeries.zeros(model.joint_dims, 2)
    st = forward_state(model, coords, GRAVITY_OFF, 2)
    for i in range(3):
        assert np.abs(st.v[i].stacked()).max() == 0.0
        assert np.allclose(st.x_world[i].pose.translation, [float(i), 0.0, 0.0])


def test_chain_poses_and_velocities_match_scalar_fk(rng):
    # planar chain: independent scalar forward kinematics for the tip
    model = simple_arm(3)
    coefs = 0.5 * rng.uniform(-1, 1, (3, 6))
    t0 = 0.43

    def tip(t):
        angles = np.cumsum([np.polynomial.Polynomial(c)(t) for c in coefs])
        p = np.zeros(2)
        for a in angles:
            p += np.array([np.cos(a), np.sin(a)])
        return p

    coords = poly_coords(model, coefs, t0, 3)
    st = forward_state(model, coords, GRAVITY_OFF, 3)
    tip_pose = st.x_world[2].pose.compose(SpatialTransform(np.eye(3), [1, 0, 0]))
    assert np.abs(tip_pose.translation[:2] - tip(t0)).max() <= 1e-12

    # world-frame tip velocity derivatives against FD of the scalar FK
    for k in (1, 2, 3):
        ref = fd_time_derivative(tip, t0, k)

        def tip_now(tt):
            c = poly_coords(model, coefs, tt, 3)
            s = forward_state(model, c, GRAVITY_OFF, 3)
            return s.x_world[2].pose.compose(SpatialTransform(np.eye(3), [1, 0, 0])).translation[:2]

        got = fd_time_derivative(tip_now, t0, k)
        assert np.abs(got - ref).max() <= 1e-5


def test_link_velocity_series_matches_time_fd(rng):
    model = random_chain(3, seed=7)
    coefs = 0.5 * rng.uniform(-1, 1, (3, 7))
    t0 = 0.31
    coords = poly_coords(model, coefs, t0, 3)
    st = forward_state(model, coords, GRAVITY_OFF, 3)

    def vel0(tt):
        c = poly_coords(model, coefs, tt, 3)
        s = forward_state(model, c, GRAVITY_OFF, 3)
        return s.v[2].blocks[0]

    for k in (1, 2, 3):
        ref = fd_time_derivative(vel0, t0, k) / math.factorial(k)
        assert np.abs(st.v[2].blocks[k] - ref).max() <= 1e-5


# -- momenta -----------------------------------------------------------------


def test_zero_velocity_zero_momenta():
    model = simple_arm(3)
    st = full_state(model, JointCoordSeries.zeros(model.joint_dims, 1), GRAVITY_OFF, 1)
    for i in range(3):
        assert np.abs(st.h[i].stacked()).max() == 0.0
        assert np.abs(st.h_joint[i].stacked()).max() == 0.0


def test_single_body_momentum_diagonal_inertia():
    model = free_body_model(inertia=(0.1, 0.1, 0.1, 0, 0, 0), mass=5.0)
    coords = JointCoordSeries(
        model.joint_dims, 1, [np.zeros(6)], [np.vstack([[0, 0, 1, 0, 0, 0], [0] * 6]).astype(float)]
    )
    st = compute_momenta(forward_state(model, coords, GRAVITY_OFF, 1))
    assert np.allclose(st.h[0].blocks[0], [0, 0, 0.1, 0, 0, 0])


def test_momentum_local_recursion_equals_world_closed_form(rng):
    # independent local-frame accumulation with dual relative transforms
    for seed in range(3):
        model = random_chain(4, seed=seed)
        coords = random_coords(model, 4, seed=seed + 10)
        st = compute_momenta(forward_state(model, coords, GRAV_Y, 4))
        h_ref = [None] * model.nb
        for i in reversed(range(model.nb)):
            acc = st.h[i].stacked().copy()
            for c in model.children(i):
                rel_dual = Cmtm(st.x_rel[c].pose, st.x_rel[c].vel, DUAL)
                acc += rel_dual.matrix() @ h_ref[c]
            h_ref[i] = acc
        for i in range(model.nb):
            assert np.abs(st.h_joint[i].stacked() - h_ref[i]).max() <= 1e-10


# -- forces and torques --------------------------------------------------------


def test_static_chain_zero_forces():
    model = simple_arm(3)
    st = full_state(model, JointCoordSeries.zeros(model.joint_dims, 2), GRAVITY_OFF, 2)
    for i in range(3):
        assert np.abs(st.f[i].stacked()).max() == 0.0
        assert np.abs(st.tau[i]).max() == 0.0


def test_gyroscopic_torque_asymmetric_body():
    model = free_body_model(inertia=(1.0, 2.0, 3.0, 0, 0, 0))
    coords = JointCoordSeries(
        model.joint_dims, 1, [np.zeros(6)], [np.vstack([[1, 1, 1, 0, 0, 0], [0] * 6]).astype(float)]
    )
    st = compute_forces(compute_momenta(forward_state(model, coords, GRAVITY_OFF, 1)))
    assert np.allclose(st.f[0].blocks[0][:3], np.cross([1, 1, 1], [1.0, 2.0, 3.0]))
    assert np.allclose(st.f[0].blocks[0][3:], 0.0)


def test_force_requires_order_one():
    model = simple_arm(1)
    st = forward_state(model, JointCoordSeries.zeros(model.joint_dims, 0), GRAVITY_OFF, 0)
    with pytest.raises(ValueError):
        compute_forces(st)


def test_pendulum_static_torque():
    model = simple_arm(1)
    st = full_state(model, JointCoordSeries.zeros(model.joint_dims, 1), GRAV_Y, 1)
    assert abs(st.tau[0][0, 0] - 5.0 * 9.81 * 0.5) < 1e-12


def test_torques_match_lagrangian_oracle(rng):
    for nb in (1, 2):
        model = simple_arm(nb)
        worst = 0.0
        for _ in range(100):
            q = rng.uniform(-1, 1, nb)
            qd = rng.uniform(-1, 1, nb)
            qdd = rng.uniform(-1, 1, nb)
            coords = coords_1dof(model, q, np.vstack([qd, qdd]))
            st = full_state(model, coords, GRAV_Y, 1)
            got = np.array([st.tau[i][0, 0] for i in range(nb)])
            ref = lagrangian_torques(model, q, qd, qdd, GRAV_Y)
            worst = max(worst, np.abs(got - ref).max())
        assert worst <= 1e-8


def test_joint_force_projects_to_lagrangian(rng):
    # order-0 joint force contracted with the selection axis is the torque
    model = simple_arm(2)
    q = rng.uniform(-1, 1, 2)
    qd = rng.uniform(-1, 1, 2)
    qdd = rng.uniform(-1, 1, 2)
    st = full_state(model, coords_1dof(model, q, np.vstack([qd, qdd])), GRAV_Y, 1)
    ref = lagrangian_torques(model, q, qd, qdd, GRAV_Y)
    s = model.joints[0].selection()
    assert abs((s.T @ st.f_joint[0].blocks[0]).item() - ref[0]) <= 1e-8


def test_torque_rate_matches_time_fd(rng):
    model = simple_arm(2)
    coefs = 0.5 * rng.uniform(-1, 1, (2, 7))
    t0 = 0.52

    def tau_of_t(tt):
        c = poly_coords(model, coefs, tt, 2)
        s = full_state(model, c, GRAV_Y, 2)
        return np.array([s.tau[i][0, 0] for i in range(2)])

    st = full_state(model, poly_coords(model, coefs, t0, 2), GRAV_Y, 2)
    got = np.array([st.tau[i][1, 0] for i in range(2)])  # block 1 = tau-dot / 1!
    ref = fd_time_derivative(tau_of_t, t0, 1)
    assert np.abs(got - ref).max() <= 1e-5


def test_order_bookkeeping():
    model = simple_arm(2)
    st = full_state(model, JointCoordSeries.zeros(model.joint_dims, 3), GRAV_Y, 3)
    assert st.v[0].order == 3
    assert st.h[0].order == 3
    assert st.f[0].order == 2
    assert st.tau[0].shape == (3, 1)


# -- whole-body operators ------------------------------------------------------


@pytest.fixture
def wb_state():
    model = simple_arm(5)
    coords = random_coords(model, 3, seed=3)
    return compute_forces(compute_momenta(forward_state(model, coords, GRAV_Y, 3)))


def test_whole_body_serial_patterns(wb_state):
    model = wb_state.model
    k = 2
    ops = whole_body_operators(wb_state, k)
    b = 6 * (k + 1)
    nb = model.nb
    # joint-from-link: identity diagonal, minus relative transform subdiagonal
    for i in range(nb):
        blk = ops["X_JL"][i * b : (i + 1) * b, i * b : (i + 1) * b]
        assert np.array_equal(blk, np.eye(b))
        for j in range(nb):
            if j not in (i, i - 1):
                assert np.abs(ops["X_JL"][i * b : (i + 1) * b, j * b : (j + 1) * b]).max() == 0.0
    # world momentum maps hold only identity and zero blocks
    for name in ("Xhw_LJ", "Xhw_JL"):
        m = np.abs(ops[name])
        vals = np.unique(np.round(m, 12))
        assert set(vals).issubset({0.0, 1.0})


def test_whole_body_inverse_pairs(wb_state):
    k = 2
    ops = whole_body_operators(wb_state, k)
    n = ops["X_JL"].shape[0]
    assert np.abs(ops["X_LJ"] @ ops["X_JL"] - np.eye(n)).max() <= 1e-12
    assert np.abs(ops["Xs_LJ"] @ ops["Xs_JL"] - np.eye(n)).max() <= 1e-12
    assert np.abs(ops["Xhw_LJ"] @ ops["Xhw_JL"] - np.eye(n)).max() <= 1e-12


def test_whole_body_velocity_relation(wb_state):
    k = 2
    ops = whole_body_operators(wb_state, k)
    v_l = np.concatenate([s.truncate(k).stacked() for s in wb_state.v])
    v_j = np.concatenate([s.truncate(k).stacked() for s in wb_state.v_joint])
    assert np.abs(ops["X_JL"] @ v_l - ops["v_base"] - v_j).max() <= 1e-10


def test_whole_body_momentum_relations(wb_state):
    k = 2
    ops = whole_body_operators(wb_state, k)
    h_l = np.concatenate([s.truncate(k).stacked() for s in wb_state.h])
    h_j = np.concatenate([s.truncate(k).stacked() for s in wb_state.h_joint])
    wh_l = np.concatenate([s.truncate(k).stacked() for s in wb_state.wh])
    wh_j = np.concatenate([s.truncate(k).stacked() for s in wb_state.wh_joint])
    assert np.abs(ops["Xhw_JL"] @ wh_l - wh_j).max() <= 1e-10
    assert np.abs(ops["Xs_LJ"] @ h_j - h_l).max() <= 1e-10
    assert np.abs(ops["Xws_L"] @ h_l - wh_l).max() <= 1e-10
    assert np.abs(ops["I_L"] @ np.concatenate([s.truncate(k).stacked() for s in wb_state.v]) - h_l).max() <= 1e-10


def test_whole_body_frame_identity(wb_state):
    # local momentum map equals the world-frame conjugation
    k = 2
    ops = whole_body_operators(wb_state, k)
    lhs = ops["Xs_LJ"]
    rhs = np.linalg.solve(ops["Xws_L"], ops["Xhw_LJ"] @ ops["Xws_J"])
    assert np.abs(lhs - rhs).max() <= 1e-10


def test_whole_body_force_map(wb_state):
    k = wb_state.order
    ops = whole_body_operators(wb_state, k)
    h_l = stack_link_series(wb_state.h)
    h_j = stack_link_series(wb_state.h_joint)
    f_l = stack_link_series(wb_state.f)
    f_j = stack_link_series(wb_state.f_joint)
    assert np.abs(ops["U_L"] @ h_l - f_l).max() <= 1e-10
    assert np.abs(ops["U_J"] @ h_j - f_j).max() <= 1e-10


def test_whole_body_joint_velocity_from_selection(wb_state):
    k = 2
    ops = whole_body_operators(wb_state, k)
    qd = np.concatenate(
        [wb_state.coords.qd[i][: k + 1].reshape(-1) for i in range(wb_state.model.nb)]
    )
    v_j = np.concatenate([s.truncate(k).stacked() for s in wb_state.v_joint])
    assert np.abs(ops["S_J"] @ qd - v_j).max() <= 1e-12


def test_spherical_joint_forward():
    from comotion.model import SPHERICAL

    links = [
        LinkSpec("base", 1.0, [0, 0, 0], [0.0] * 6),
        LinkSpec("b", 2.0, [0, 0, 0], [0.5, 0.5, 0.5, 0, 0, 0]),
    ]
    joints = [JointSpec("s", "base", "b", SPHERICAL, None, SpatialTransform())]
    model = RobotModel("sph", links, joints, "base")
    w = np.array([0.3, -0.2, 0.5])
    coords = JointCoordSeries(
        model.joint_dims, 1, [np.array([0.1, 0.2, -0.1])], [np.vstack([w, np.zeros(3)])]
    )
    st = forward_state(model, coords, GRAVITY_OFF, 1)
    assert np.allclose(st.v[0].blocks[0][:3], w)
    assert np.allclose(st.v[0].blocks[0][3:], 0.0)
    assert np.allclose(st.x_world[0].pose.rotation, so3_exp([0.1, 0.2, -0.1]))


def test_force_operator_matches_world_momentum_fd():
    # f = inv(A*) d/dt (A* h) evaluated by finite differences along an
    # analytic spin matches the rectangular momentum-to-force operator
    from comotion.spatial import FORCE, u_operator

    inertia = np.diag([1.0, 2.0, 3.0, 2.0, 2.0, 2.0])
    axis = np.array([0.4, -0.8, 0.45])
    axis /= np.linalg.norm(axis)
    coef = np.polynomial.Polynomial([0.2, 1.1, -0.7, 0.3])
    t0 = 0.33
    order = 2

    def pose(t):
        return SpatialTransform(so3_exp(axis * coef(t)), np.zeros(3))

    def nu(t, d=0):
        return np.concatenate([axis * coef.deriv(d + 1)(t), np.zeros(3)])

    def wh(t):
        h = inertia @ nu(t)
        return pose(t).force_matrix() @ h

    vel = np.vstack([nu(t0, i) / math.factorial(i) for i in range(order + 1)])
    h_blocks = vel @ inertia.T
    f = u_operator(vel[:order], FORCE) @ h_blocks.reshape(-1)
    f0_ref = np.linalg.solve(pose(t0).force_matrix(), fd_time_derivative(wh, t0, 1))
    assert np.abs(f[:6] - f0_ref).max() <= 1e-6


# -- energy sanity -------------------------------------------------------------


def test_free_body_energy_conservation():
    # torque-free rigid body: integrate pose and body velocity, energy constant
    inertia_diag = np.array([1.0, 2.0, 3.0])
    model = free_body_model(inertia=tuple(inertia_diag) + (0, 0, 0), com=(0.1, -0.05, 0.2), mass=2.0)
    ii = model.link_inertia(0)

    def dyn(state):
        r = state[:9].reshape(3, 3)
        nu = state[12:]
        h = ii @ nu
        # f = dh/dt + nu x* h = 0
        from comotion.spatial import FORCE, cross6

        hdot = -cross6(nu, FORCE) @ h
        nudot = np.linalg.solve(ii, hdot)
        rdot = r @ skew3(nu[:3])
        pdot = r @ nu[3:]
        return np.concatenate([rdot.reshape(-1), pdot, nudot])

    nu0 = np.array([0.7, -0.4, 0.9, 0.2, 0.1, -0.3])
    state = np.concatenate([np.eye(3).reshape(-1), np.zeros(3), nu0])
    dt = 1e-4
    e0 = 0.5 * nu0 @ ii @ nu0
    worst = 0.0
    for _ in range(10000):
        k1 = dyn(state)
        k2 = dyn(state + 0.5 * dt * k1)
        k3 = dyn(state + 0.5 * dt * k2)
        k4 = dyn(state + dt * k3)
        state = state + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        nu = state[12:]
        worst = max(worst, abs(0.5 * nu @ ii @ nu - e0))
    assert worst <= 1e-6
