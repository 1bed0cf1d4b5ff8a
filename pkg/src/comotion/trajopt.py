"""Direct trajectory optimization and inverse cost-weight estimation.

The objective is a weighted sum of integrated squared quantities
(link spatial velocity derivatives, joint coordinate derivatives, joint
torque derivatives) over a spline-parameterized trajectory, with
boundary equalities and joint bounds folded in as quadratic penalties
roughly 1e12 times the nominal weights.  A damped Gauss-Newton method
with backtracking line search drives the residual form; the inverse
problem projects constraint directions out of the per-term cost
gradients and solves the simplex-constrained homogeneous problem
exactly by active-set enumeration.
"""

import json
import math
import os

import numpy as np

from .bspline import BSplineTrajectory, dmatrix
from .jacobians import torque_jacobians, force_jacobians, momentum_jacobians, velocity_jacobians
from .kinodynamics import GravitySpec, compute_momenta, compute_torques, forward_state
from .model import load_model_file

QUANTITIES = ("link_velocity", "joint_coordinate", "joint_torque")


class CostTerm:
    """One sub-cost: integrated squared derivative of a target quantity."""

    __slots__ = ("quantity", "order", "targets", "weight")

    def __init__(self, quantity, order, targets="all", weight=1.0):
        if quantity not in QUANTITIES:
            raise ValueError(f"unknown cost quantity {quantity!r}")
        if order < 0:
            raise ValueError("derivative order must be nonnegative")
        if weight < 0:
            raise ValueError("cost weights must be nonnegative")
        self.quantity = quantity
        self.order = int(order)
        self.targets = targets
        self.weight = float(weight)


class OptimizerSettings:
    __slots__ = ("damping", "max_iters", "step_tol", "penalty_ratio")

    def __init__(self, damping=1e-8, max_iters=500, step_tol=1e-12, penalty_ratio=1e12):
        self.damping = float(damping)
        self.max_iters = int(max_iters)
        self.step_tol = float(step_tol)
        self.penalty_ratio = float(penalty_ratio)


ARMIJO_C1 = 1e-4
LINESEARCH_SHRINK = 0.5
LINESEARCH_MAX = 40


class ExperimentSpec:
    """Model, spline, boundary, bounds, gravity, costs, optimizer settings."""

    def __init__(
        self,
        model,
        duration,
        samples,
        degree,
        n_c,
        q0,
        q_t,
        qd0,
        qd_t,
        lower,
        upper,
        gravity,
        costs,
        optimizer=None,
    ):
        self.model = model
        self.duration = float(duration)
        self.samples = int(samples)
        self.degree = int(degree)
        self.n_c = int(n_c)
        n = model.dof
        self.q0 = np.asarray(q0, dtype=float)
        self.q_t = np.asarray(q_t, dtype=float)
        self.qd0 = np.asarray(qd0, dtype=float)
        self.qd_t = np.asarray(qd_t, dtype=float)
        self.lower = np.asarray(lower, dtype=float)
        self.upper = np.asarray(upper, dtype=float)
        for name, arr in (
            ("q0", self.q0),
            ("qT", self.q_t),
            ("qd0", self.qd0),
            ("qdT", self.qd_t),
            ("lower", self.lower),
            ("upper", self.upper),
        ):
            if arr.shape != (n,):
                raise ValueError(f"boundary/bound field {name} must have {n} entries")
        if np.any(self.lower >= self.upper):
            raise ValueError("bounds must satisfy lower < upper")
        self.gravity = gravity
        self.costs = list(costs)
        if not self.costs:
            raise ValueError("at least one cost term is required")
        self.optimizer = optimizer or OptimizerSettings()
        if not model.is_single_dof():
            raise ValueError("trajectory optimization expects single-dof joints")

    # -- document loading ---------------------------------------------------

    _TOP = {
        "model_path",
        "duration_s",
        "samples",
        "spline",
        "boundary",
        "bounds",
        "gravity",
        "costs",
        "optimizer",
    }

    @classmethod
    def from_file(cls, path):
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        extra = set(doc) - cls._TOP
        if extra:
            raise ValueError(f"unknown field(s) {sorted(extra)} in experiment document")
        model = load_model_file(
            os.path.join(os.path.dirname(os.path.abspath(path)), doc["model_path"])
        )
        spline = doc["spline"]
        boundary = doc["boundary"]
        bounds = doc["bounds"]
        grav = doc["gravity"]
        costs = [
            CostTerm(c["quantity"], c["order"], c.get("targets", "all"), c["weight"])
            for c in doc["costs"]
        ]
        opt = doc.get("optimizer", {})
        return cls(
            model,
            doc["duration_s"],
            doc["samples"],
            spline["degree"],
            spline["control_points"],
            boundary["q0"],
            boundary["qT"],
            boundary["qd0"],
            boundary["qdT"],
            bounds["lower"],
            bounds["upper"],
            GravitySpec(grav["vector"], grav["enabled"]),
            costs,
            OptimizerSettings(
                opt.get("damping", 1e-8),
                opt.get("max_iters", 500),
                opt.get("step_tol", 1e-12),
                opt.get("penalty_ratio", 1e12),
            ),
        )

    # -- helpers ------------------------------------------------------------

    @property
    def dt(self):
        return self.duration / self.samples

    def sample_times(self):
        """Midpoint grid: strictly inside [0, T], boundary handled by penalties."""
        return (np.arange(self.samples) + 0.5) * self.dt

    def trajectory(self, theta=None):
        return BSplineTrajectory(self.degree, self.n_c, self.duration, self.model.dof, theta)

    def initial_theta(self):
        """Control points of the straight line between the boundary angles.

        Uses the Greville abscissae, so the spline reproduces the line
        exactly; boundary rates are then shaped by the penalties.
        """
        traj = self.trajectory()
        p = self.degree
        greville = np.array(
            [traj.knots[i + 1 : i + p + 1].mean() for i in range(self.n_c)]
        )
        alpha = greville / self.duration
        pts = self.q0[None, :] * (1 - alpha[:, None]) + self.q_t[None, :] * alpha[:, None]
        return pts.reshape(-1)

    def target_links(self, term):
        model = self.model
        if term.targets == "all":
            return list(range(model.nb))
        return [model.index(name) for name in term.targets]

    def target_joints(self, term):
        model = self.model
        if term.targets == "all":
            return list(range(model.nb))
        name_to_idx = {j.name: i for i, j in enumerate(model.joints)}
        return [name_to_idx[name] for name in term.targets]

    def orders_needed(self):
        """(max link-velocity order or -1, max torque order or -1)."""
        v_max, tau_max = -1, -1
        for term in self.costs:
            if term.quantity == "link_velocity":
                v_max = max(v_max, term.order)
            elif term.quantity == "joint_torque":
                tau_max = max(tau_max, term.order)
        return v_max, tau_max


class OptResult:
    def __init__(self, theta, iterations, cost, term_costs, eq_residual, bound_violation, converged, message):
        self.theta = theta
        self.iterations = iterations
        self.cost = cost
        self.term_costs = term_costs
        self.eq_residual = eq_residual
        self.bound_violation = bound_violation
        self.converged = converged
        self.message = message


class IocResult:
    def __init__(self, weights, residual, l1_error=None):
        self.weights = weights
        self.residual = residual
        self.l1_error = l1_error


# ---------------------------------------------------------------------------
# sample evaluation

from .bspline import basis_row
from .kinodynamics import JointCoordSeries


class _Grid:
    """Precomputed, theta-independent basis data at the sample times.

    The spline basis rows, the coordinate-series Jacobians d(series)/d(theta),
    and the direct spline rows of joint-coordinate terms depend only on the
    grid, so they are assembled once per problem.
    """

    def __init__(self, spec):
        self.spec = spec
        traj = spec.trajectory()
        self.times = spec.sample_times()
        v_max, tau_max = spec.orders_needed()
        self.v_max, self.tau_max = v_max, tau_max
        self.value_order = max(v_max, tau_max + 1, 0)
        self.jac_order = max(v_max + 1, tau_max + 2, 0)
        n_deriv = self.jac_order + 2  # q derivatives needed for the series
        p, n_c, n_q = spec.degree, spec.n_c, spec.model.dof
        self.n_q = n_q
        self.rows = []
        for t in self.times:
            self.rows.append(
                [
                    basis_row(p, t, traj.knots, n_c, k)
                    if k <= p
                    else np.zeros(n_c)
                    for k in range(n_deriv + 1)
                ]
            )
        eye = np.eye(n_q)
        self.dq_v = (
            [self._series_jacobian(s, v_max, eye) for s in range(len(self.times))]
            if v_max >= 0
            else None
        )
        self.dq_tau = (
            [self._series_jacobian(s, tau_max + 1, eye) for s in range(len(self.times))]
            if tau_max >= 0
            else None
        )
        self.q_rows = [np.kron(r[0], eye) for r in self.rows]
        self.coord_rows = {}
        for term in spec.costs:
            if term.quantity == "joint_coordinate" and term.order not in self.coord_rows:
                d = term.order
                self.coord_rows[d] = [
                    np.kron(basis_row(p, t, traj.knots, n_c, d), eye)
                    if d <= p
                    else np.zeros((n_q, n_c * n_q))
                    for t in self.times
                ]

    def _series_jacobian(self, s, order, eye):
        rows = self.rows[s]
        out = []
        for j in range(self.n_q):
            block = [np.kron(rows[0], eye)[j]]
            for k in range(order + 1):
                block.append(np.kron(rows[k + 1], eye)[j] / math.factorial(k))
            out.append(np.vstack(block))
        return np.vstack(out)

    def coords_at(self, s, theta, order):
        """Joint coordinate series at sample s from the cached basis rows."""
        th = theta.reshape(self.spec.n_c, self.n_q)
        rows = self.rows[s]
        q = rows[0] @ th
        qd = np.vstack(
            [(rows[k + 1] @ th) / math.factorial(k) for k in range(order + 1)]
        )
        dims = (1,) * self.n_q
        return JointCoordSeries(
            dims,
            order,
            [q[j : j + 1] for j in range(self.n_q)],
            [qd[:, j : j + 1] for j in range(self.n_q)],
        )


class _SampleEval:
    """Values and analytic Jacobians of all cost quantities at one sample."""

    def __init__(self, grid, s, theta, with_jacobians):
        spec = grid.spec
        self.grid = grid
        self.s = s
        self.theta = theta
        order = grid.jac_order if with_jacobians else grid.value_order
        self.coords = grid.coords_at(s, theta, order)
        self.state = forward_state(spec.model, self.coords, spec.gravity, order)
        if grid.tau_max >= 0:
            compute_torques(self.state)
        self.jac = {}
        if with_jacobians:
            vel_cache = {}

            def vel_jacs(order):
                if order not in vel_cache:
                    vel_cache[order] = velocity_jacobians(self.state, order)
                return vel_cache[order]

            if grid.v_max >= 0:
                _, _, j_v = vel_jacs(grid.v_max)
                dq = grid.dq_v[s]
                self.jac["v"] = [m @ dq for m in j_v]
            if grid.tau_max >= 0:
                compute_momenta(self.state)
                _, j_x_hi, j_v_hi = vel_jacs(grid.tau_max + 1)
                j_h_l_hi, _, _, j_h_j_hi = momentum_jacobians(
                    self.state, grid.tau_max + 1, j_x_hi, j_v_hi
                )
                _, j_f_j = force_jacobians(
                    self.state, grid.tau_max, j_v_hi, j_h_l_hi, j_h_j_hi
                )
                j_tau = torque_jacobians(self.state, grid.tau_max, j_f_j)
                dq_hi = grid.dq_tau[s]
                self.jac["tau"] = [m @ dq_hi for m in j_tau]

    def value(self, term):
        """Raw-derivative quantity stacked over the term's targets."""
        spec = self.grid.spec
        if term.quantity == "joint_coordinate":
            rows = self.grid.coord_rows[term.order][self.s]
            return rows @ self.theta
        d = term.order
        fac = math.factorial(d)
        if term.quantity == "link_velocity":
            return np.concatenate(
                [fac * self.state.v[i].blocks[d] for i in spec.target_links(term)]
            )
        return np.concatenate(
            [fac * self.state.tau[i][d] for i in spec.target_joints(term)]
        )

    def jacobian(self, term):
        """d(value)/d(theta) rows matching value()."""
        spec = self.grid.spec
        if term.quantity == "joint_coordinate":
            return self.grid.coord_rows[term.order][self.s]
        d = term.order
        fac = math.factorial(d)
        if term.quantity == "link_velocity":
            return np.vstack(
                [fac * self.jac["v"][i][6 * d : 6 * d + 6] for i in spec.target_links(term)]
            )
        return np.vstack(
            [fac * self.jac["tau"][i][d : d + 1] for i in spec.target_joints(term)]
        )


def _penalty_weight(spec):
    w = np.array([t.weight for t in spec.costs])
    return spec.optimizer.penalty_ratio * float(w.mean())


def _boundary_rows(spec):
    """Equality rows E and offsets e with E @ theta - e the boundary residual."""
    traj = spec.trajectory()
    rows, offs = [], []
    for t, target, k in (
        (0.0, spec.q0, 0),
        (spec.duration, spec.q_t, 0),
        (0.0, spec.qd0, 1),
        (spec.duration, spec.qd_t, 1),
    ):
        rows.append(dmatrix(spec.degree, k, t, traj.knots, spec.n_c, spec.model.dof))
        offs.append(target)
    return np.vstack(rows), np.concatenate(offs)


def evaluate_cost(spec, theta, with_gradients=False, grid=None):
    """Total objective, per-term integrated costs, and optionally gradients.

    Returns (f, c) or (f, c, grads) with c_i = dt * sum_s |y_i(t_s)|^2
    and f = sum_i w_i c_i plus the penalty terms.
    """
    theta = np.asarray(theta, dtype=float)
    grid = grid or _Grid(spec)
    dt = spec.dt
    m = len(spec.costs)
    c = np.zeros(m)
    grads = np.zeros((m, theta.size)) if with_gradients else None
    for s in range(len(grid.times)):
        ev = _SampleEval(grid, s, theta, with_gradients)
        for i, term in enumerate(spec.costs):
            y = ev.value(term)
            c[i] += dt * float(y @ y)
            if with_gradients:
                jy = ev.jacobian(term)
                grads[i] += 2.0 * dt * (jy.T @ y)
    weights = np.array([t.weight for t in spec.costs])
    f = float(weights @ c) + _penalty_value(spec, theta, grid)
    if with_gradients:
        return f, c, grads
    return f, c


def _penalty_value(spec, theta, grid):
    mu = _penalty_weight(spec)
    e_rows, e_off = _boundary_rows(spec)
    eq = e_rows @ theta - e_off
    val = mu * float(eq @ eq)
    for rows in grid.q_rows:
        q = rows @ theta
        v = np.maximum(0.0, q - spec.upper) + np.maximum(0.0, spec.lower - q)
        val += mu * float(v @ v)
    return val


# ---------------------------------------------------------------------------
# residual form and Gauss-Newton


class _Residuals:
    """Stacked residual vector r with f = |r|^2 and its Jacobian."""

    def __init__(self, spec):
        self.spec = spec
        self.grid = _Grid(spec)
        self.mu = _penalty_weight(spec)
        self.e_rows, self.e_off = _boundary_rows(spec)
        self.sqrt_mu = math.sqrt(self.mu)
        self.q_rows = self.grid.q_rows

    def __call__(self, theta, with_jacobian=True):
        spec = self.spec
        dt = spec.dt
        res, jac = [], []
        for s in range(len(self.grid.times)):
            ev = _SampleEval(self.grid, s, theta, with_jacobian)
            for term in spec.costs:
                scale = math.sqrt(term.weight * dt)
                res.append(scale * ev.value(term))
                if with_jacobian:
                    jac.append(scale * ev.jacobian(term))
            q = self.q_rows[s] @ theta
            up = np.maximum(0.0, q - spec.upper)
            lo = np.maximum(0.0, spec.lower - q)
            res.append(self.sqrt_mu * up)
            res.append(self.sqrt_mu * lo)
            if with_jacobian:
                jac.append(self.sqrt_mu * (up > 0)[:, None] * self.q_rows[s])
                jac.append(-self.sqrt_mu * (lo > 0)[:, None] * self.q_rows[s])
        res.append(self.sqrt_mu * (self.e_rows @ theta - self.e_off))
        if with_jacobian:
            jac.append(self.sqrt_mu * self.e_rows)
        r = np.concatenate(res)
        return (r, np.vstack(jac)) if with_jacobian else (r, None)


def gauss_newton(residual_fn, x0, damping=1e-8, max_iters=500, step_tol=1e-12):
    """Damped Gauss-Newton with Armijo backtracking on |r|^2.

    residual_fn(x, with_jacobian) returns (r, J) or (r, None); the line
    search only needs residual values.  Returns (x, info) with the
    iteration count, convergence flag, and a status message.
    """
    x = np.asarray(x0, dtype=float).copy()
    r, jac = residual_fn(x, True)
    f = float(r @ r)
    info = {"iterations": 0, "converged": False, "message": "max iterations reached"}
    for it in range(1, max_iters + 1):
        info["iterations"] = it
        g = 2.0 * (jac.T @ r)
        h = 2.0 * (jac.T @ jac) + damping * np.eye(x.size)
        try:
            step = -np.linalg.solve(h, g)
        except np.linalg.LinAlgError:
            step = -np.linalg.lstsq(h, g, rcond=None)[0]
        alpha = 1.0
        accepted = False
        for _ in range(LINESEARCH_MAX):
            x_new = x + alpha * step
            r_new, _ = residual_fn(x_new, False)
            f_new = float(r_new @ r_new)
            if f_new <= f + ARMIJO_C1 * alpha * float(g @ step):
                accepted = True
                break
            alpha *= LINESEARCH_SHRINK
        if not accepted:
            info["message"] = "line search failed"
            return x, info
        update = float(np.linalg.norm(alpha * step))
        x, f = x_new, f_new
        r, jac = residual_fn(x, True)
        if update < step_tol:
            info["converged"] = True
            info["message"] = "step tolerance reached"
            return x, info
    return x, info


def direct_optimize(spec, theta0=None):
    """Minimize the penalized objective over the spline control points."""
    problem = _Residuals(spec)
    theta0 = spec.initial_theta() if theta0 is None else np.asarray(theta0, dtype=float)
    opt = spec.optimizer
    theta, info = gauss_newton(
        problem,
        theta0,
        damping=opt.damping,
        max_iters=opt.max_iters,
        step_tol=opt.step_tol,
    )
    f, c = evaluate_cost(spec, theta, grid=problem.grid)
    eq = problem.e_rows @ theta - problem.e_off
    viol = 0.0
    for rows in problem.q_rows:
        q = rows @ theta
        viol = max(
            viol,
            float(np.maximum(0.0, q - spec.upper).max()),
            float(np.maximum(0.0, spec.lower - q).max()),
        )
    return OptResult(
        theta,
        info["iterations"],
        f,
        c,
        float(np.abs(eq).max()),
        viol,
        info["converged"],
        info["message"],
    )


# ---------------------------------------------------------------------------
# inverse problem


def estimate_weights(c_matrix):
    """Nonnegative normalized w minimizing |C^T w| by active-set enumeration.

    C rows are per-term cost gradients.  Exact for the small term counts
    used here (at most 16 rows).
    """
    c_matrix = np.asarray(c_matrix, dtype=float)
    m = c_matrix.shape[0]
    if m > 16:
        raise ValueError("weight estimation enumerates subsets; 16 terms max")
    if not np.any(np.abs(c_matrix) > 0):
        raise ValueError("uninformative trajectory: all cost gradients vanish")
    q = c_matrix @ c_matrix.T
    best_w, best_val = None, np.inf
    for mask in range(1, 1 << m):
        idx = [i for i in range(m) if mask >> i & 1]
        k = len(idx)
        kkt = np.zeros((k + 1, k + 1))
        kkt[:k, :k] = 2.0 * q[np.ix_(idx, idx)]
        kkt[:k, k] = 1.0
        kkt[k, :k] = 1.0
        rhs = np.zeros(k + 1)
        rhs[k] = 1.0
        try:
            sol = np.linalg.solve(kkt, rhs)
        except np.linalg.LinAlgError:
            continue
        w_sub = sol[:k]
        if np.any(w_sub < -1e-12):
            continue
        w = np.zeros(m)
        w[idx] = np.maximum(w_sub, 0.0)
        w /= w.sum()
        val = float(w @ q @ w)
        if best_w is None or val < best_val:
            best_val = val
            best_w = w
    if best_w is None:
        raise ValueError("weight estimation found no feasible active set")
    return best_w, math.sqrt(max(best_val, 0.0))


def inverse_kkt(spec, theta_obs, truth=None, active_tol=1e-8):
    """Estimate cost weights that make theta_obs stationary.

    Builds the matrix of per-term cost gradients, projects out the
    directions spanned by the boundary-equality rows and any active
    bound rows (the penalty formulation's constraint gradients), and
    solves the simplex-constrained homogeneous problem.
    """
    if len(spec.costs) < 2:
        raise ValueError("weight estimation needs at least two cost terms")
    theta_obs = np.asarray(theta_obs, dtype=float)
    grid = _Grid(spec)
    _, _, grads = evaluate_cost(spec, theta_obs, with_gradients=True, grid=grid)

    e_rows, _ = _boundary_rows(spec)
    con_rows = [e_rows]
    problem_rows = grid.q_rows
    for s, t in enumerate(spec.sample_times()):
        q = problem_rows[s] @ theta_obs
        for j in range(spec.model.dof):
            if q[j] >= spec.upper[j] - active_tol or q[j] <= spec.lower[j] + active_tol:
                con_rows.append(problem_rows[s][j : j + 1])
    a = np.vstack(con_rows)
    # project each gradient onto the null space of the constraint rows
    _, sv, vt = np.linalg.svd(a, full_matrices=False)
    rank = int(np.sum(sv > sv[0] * 1e-12)) if sv.size else 0
    v_range = vt[:rank]
    c_matrix = grads - (grads @ v_range.T) @ v_range
    weights, residual = estimate_weights(c_matrix)
    l1 = None
    if truth is not None:
        l1 = float(np.abs(weights - np.asarray(truth, dtype=float)).sum())
    return IocResult(weights, residual, l1)
