"""Command-line interface.

Subcommands: check-model, fk, jac-test, optimize, ioc, bench.  Data goes
to files or standard output, diagnostics to standard error.  Exit codes:
0 success, 1 input or validation error, 2 numerical failure, 3
non-convergence (partial results are still written).
"""

import argparse
import csv
import json
import os
import sys

import numpy as np

from .harness import (
    FdConfig,
    bench_sweep,
    jacobian_error_report,
    loglog_slope,
    random_chain,
    random_coords,
)
from .kinodynamics import GravitySpec, compute_torques, forward_state
from .model import ModelError, load_model_file
from .trajopt import ExperimentSpec, direct_optimize, inverse_kkt
from .bspline import BSplineTrajectory


def _fmt(x):
    return f"{float(x):.17g}"


def _write_rows(path, header, rows):
    out = sys.stdout if path is None else open(path, "w", newline="", encoding="utf-8")
    try:
        writer = csv.writer(out)
        writer.writerow(header)
        for row in rows:
            writer.writerow([c if isinstance(c, str) else _fmt(c) for c in row])
    finally:
        if path is not None:
            out.close()


def _trajectory_rows(spec, theta):
    """Sample-grid trajectory table: t, q, qd, qdd, tau."""
    traj = spec.trajectory(theta)
    n = spec.model.dof
    header = (
        ["t"]
        + [f"q_{j}" for j in range(n)]
        + [f"qd_{j}" for j in range(n)]
        + [f"qdd_{j}" for j in range(n)]
        + [f"tau_{j}" for j in range(n)]
    )
    rows = []
    for t in spec.sample_times():
        coords = traj.eval_series(t, 1)
        st = forward_state(spec.model, coords, spec.gravity, 1)
        compute_torques(st)
        q = traj.value(t, 0)
        qd = traj.value(t, 1)
        qdd = traj.value(t, 2)
        tau = np.array([st.tau[i][0, 0] for i in range(n)])
        rows.append([t, *q, *qd, *qdd, *tau])
    return header, rows


def _cmd_check_model(args):
    model = load_model_file(args.model)
    print(
        f"ok: {model.name}: {model.nb} moving links, {model.dof} dof, root {model.root!r}"
    )
    return 0


def _read_trajectory_csv(path):
    with open(path, "r", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        data = np.array([[float(c) for c in row] for row in reader])
    q_cols = [i for i, name in enumerate(header) if name.startswith("q_")]
    t_col = header.index("t")
    return data[:, t_col], data[:, q_cols]


def _cmd_fk(args):
    model = load_model_file(args.model)
    k = args.order
    if args.trajectory.endswith(".json"):
        spec = ExperimentSpec.from_file(args.trajectory)
        traj = spec.trajectory(spec.initial_theta())
        times = spec.sample_times()
        gravity = spec.gravity
    else:
        times, q = _read_trajectory_csv(args.trajectory)
        duration = float(times[-1])
        n_c = min(len(times), 50)
        traj = BSplineTrajectory.fit(max(5, k + 2), n_c, duration, times, q)
        gravity = GravitySpec.off()
    header = (
        ["t", "link"]
        + [f"p_{a}" for a in "xyz"]
        + [f"r_{i}{j}" for i in range(3) for j in range(3)]
        + [f"v_{i}" for i in range(6 * (k + 1))]
    )
    rows = []
    for t in times:
        coords = traj.eval_series(t, k)
        st = forward_state(model, coords, gravity, k)
        for i, name in enumerate(model.link_order):
            pose = st.x_world[i].pose
            rows.append(
                [t, name, *pose.translation, *pose.rotation.reshape(-1), *st.v[i].stacked()]
            )
    _write_rows(args.out, header, rows)
    return 0


def _cmd_jac_test(args):
    if (args.model is None) == (args.dof is None):
        raise ValueError("give exactly one of a model file or --dof")
    if args.model:
        model = load_model_file(args.model)
    else:
        model = random_chain(args.dof, args.seed)
    orders = [int(x) for x in args.orders.split(",")]
    coords = random_coords(model, max(orders) + 2, args.seed + 1)
    gravity = GravitySpec()
    rows = jacobian_error_report(
        model, coords, gravity, orders, cfg=FdConfig(args.fd_step)
    )
    header = ["family", "order", "max_abs", "e_J"]
    _write_rows(args.out, header, [[r["family"], r["order"], r["max_abs"], r["e_J"]] for r in rows])
    if args.out:
        from .plotting import save_jacobian_error_figure

        save_jacobian_error_figure(rows, os.path.splitext(args.out)[0] + ".png")
    worst = max(r["e_J"] for r in rows)
    print(f"worst normalized error: {worst:.3e}", file=sys.stderr)
    return 0 if np.isfinite(worst) else 2


def _cmd_optimize(args):
    spec = ExperimentSpec.from_file(args.experiment)
    os.makedirs(args.out, exist_ok=True)
    result = direct_optimize(spec)
    header, rows = _trajectory_rows(spec, result.theta)
    _write_rows(os.path.join(args.out, "trajectory.csv"), header, rows)
    _write_rows(
        os.path.join(args.out, "theta.csv"),
        [f"theta_{j}" for j in range(spec.model.dof)],
        result.theta.reshape(spec.n_c, spec.model.dof).tolist(),
    )
    summary = {
        "converged": bool(result.converged),
        "message": result.message,
        "iterations": int(result.iterations),
        "cost": result.cost,
        "term_costs": [float(c) for c in result.term_costs],
        "weights": [t.weight for t in spec.costs],
        "eq_residual": result.eq_residual,
        "bound_violation": result.bound_violation,
    }
    with open(os.path.join(args.out, "summary.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2)
    from .plotting import save_trajectory_figure

    data = np.array([[float(c) for c in row] for row in rows])
    n = spec.model.dof
    save_trajectory_figure(
        data[:, 0],
        data[:, 1 : 1 + n],
        data[:, 1 + 3 * n : 1 + 4 * n],
        os.path.join(args.out, "trajectory.png"),
    )
    if not result.converged:
        print(f"did not converge: {result.message}", file=sys.stderr)
        return 3
    print(
        f"converged in {result.iterations} iterations, cost {result.cost:.6e}",
        file=sys.stderr,
    )
    return 0


def _cmd_ioc(args):
    spec = ExperimentSpec.from_file(args.experiment)
    times, q = _read_trajectory_csv(args.trajectory)
    traj = BSplineTrajectory.fit(spec.degree, spec.n_c, spec.duration, times, q)
    truth = None
    if args.truth:
        with open(args.truth, "r", encoding="utf-8") as fh:
            truth = [float(x) for x in fh.read().replace(",", " ").split()]
    result = inverse_kkt(spec, traj.theta, truth=truth)
    writer = csv.writer(sys.stdout)
    writer.writerow(["term", "quantity", "order", "weight"])
    for i, (term, w) in enumerate(zip(spec.costs, result.weights)):
        writer.writerow([i, term.quantity, term.order, _fmt(w)])
    writer.writerow(["residual", "", "", _fmt(result.residual)])
    if result.l1_error is not None:
        writer.writerow(["l1_error", "", "", _fmt(result.l1_error)])
    return 0


def _cmd_bench(args):
    dofs = [int(x) for x in args.dof_list.split(",")]
    rows = bench_sweep(dofs, args.order, reps=args.reps, warmup=args.warmup, seed=args.seed)
    header = ["dof", "order", "analytic_s", "fd_s", "speedup"]
    _write_rows(
        args.out,
        header,
        [[r["dof"], r["order"], r["analytic_s"], r["fd_s"], r["speedup"]] for r in rows],
    )
    if args.out:
        from .plotting import save_bench_figure

        save_bench_figure(
            [r["dof"] for r in rows],
            [r["analytic_s"] for r in rows],
            [r["fd_s"] for r in rows],
            os.path.splitext(args.out)[0] + ".png",
        )
    if len(rows) >= 3:
        slope_a = loglog_slope([r["dof"] for r in rows], [r["analytic_s"] for r in rows])
        slope_f = loglog_slope([r["dof"] for r in rows], [r["fd_s"] for r in rows])
        print(
            f"log-log slopes: analytical {slope_a:.2f}, finite differences {slope_f:.2f}",
            file=sys.stderr,
        )
    return 0


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="comotion",
        description="Derivative-stacked motion computation, Jacobians, and trajectory optimization.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check-model", help="validate a model document")
    p.add_argument("model")
    p.set_defaults(fn=_cmd_check_model)

    p = sub.add_parser("fk", help="forward kinematics along a trajectory")
    p.add_argument("model")
    p.add_argument(
        "trajectory",
        help="trajectory CSV (q columns are spline-fit for derivatives) or an "
        "experiment JSON, whose boundary-interpolating initial guess is evaluated",
    )
    p.add_argument("--order", type=int, default=1)
    p.add_argument("--out", default=None, help="output CSV (default stdout)")
    p.set_defaults(fn=_cmd_fk)

    p = sub.add_parser("jac-test", help="analytical vs finite-difference Jacobians")
    p.add_argument("model", nargs="?", default=None, help="model JSON (or use --dof)")
    p.add_argument("--dof", type=int, default=None, help="random chain size instead of a model file")
    p.add_argument("--orders", default="0,1,3,4")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--fd-step", type=float, default=1e-6)
    p.add_argument("--out", default=None, help="report CSV (default stdout)")
    p.set_defaults(fn=_cmd_jac_test)

    p = sub.add_parser("optimize", help="direct trajectory optimization")
    p.add_argument("experiment")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(fn=_cmd_optimize)

    p = sub.add_parser("ioc", help="inverse cost-weight estimation")
    p.add_argument("experiment")
    p.add_argument("trajectory", help="observed trajectory CSV")
    p.add_argument("--truth", default=None, help="file with the true weights")
    p.set_defaults(fn=_cmd_ioc)

    p = sub.add_parser("bench", help="scaling benchmark, analytical vs FD")
    p.add_argument("--dof-list", default="2,4,8,16,32,64")
    p.add_argument("--order", type=int, default=1)
    p.add_argument("--reps", type=int, default=10)
    p.add_argument("--warmup", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="timing CSV (default stdout)")
    p.set_defaults(fn=_cmd_bench)
    return parser


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on usage problems; those are input errors here
        return 1 if exc.code not in (0, None) else 0
    try:
        return args.fn(args)
    except (ModelError, ValueError, OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
