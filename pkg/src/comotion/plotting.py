"""Figure rendering for the report-producing CLI paths.

Every report command writes its delimited data first; these helpers
render companion PNG files next to it.  CSV stays the machine contract,
the figures are for eyeballing results.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

plt.rcParams["figure.figsize"] = (7.0, 4.5)
plt.rcParams["font.size"] = 9
plt.rcParams["axes.grid"] = True
plt.rcParams["grid.alpha"] = 0.3


def save_trajectory_figure(times, q, tau, path):
    """Joint angles and torques over time, stacked panels."""
    q = np.asarray(q)
    fig, axes = plt.subplots(2 if tau is not None else 1, 1, sharex=True, squeeze=False)
    ax = axes[0][0]
    for j in range(q.shape[1]):
        ax.plot(times, q[:, j], label=f"q{j}")
    ax.set_ylabel("joint angle [rad]")
    ax.legend(loc="best", fontsize=8)
    if tau is not None:
        tau = np.asarray(tau)
        ax2 = axes[1][0]
        for j in range(tau.shape[1]):
            ax2.plot(times, tau[:, j], label=f"tau{j}")
        ax2.set_ylabel("joint torque [Nm]")
        ax2.set_xlabel("time [s]")
        ax2.legend(loc="best", fontsize=8)
    else:
        ax.set_xlabel("time [s]")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_bench_figure(dofs, analytic_s, fd_s, path):
    """Log-log scaling of analytical vs finite-difference evaluation time."""
    fig, ax = plt.subplots()
    ax.loglog(dofs, analytic_s, "o-", label="analytical")
    ax.loglog(dofs, fd_s, "s-", label="finite differences")
    ax.set_xlabel("degrees of freedom")
    ax.set_ylabel("median wall time [s]")
    ax.legend(loc="best")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_jacobian_error_figure(rows, path):
    """Normalized error per Jacobian family across derivative orders."""
    fig, ax = plt.subplots()
    families = sorted({r["family"] for r in rows})
    for fam in families:
        pts = sorted((r["order"], r["e_J"]) for r in rows if r["family"] == fam)
        ax.semilogy([p[0] for p in pts], [p[1] for p in pts], "o-", label=fam)
    ax.set_xlabel("derivative order")
    ax.set_ylabel("normalized max elementwise error")
    ax.legend(loc="best", fontsize=8, ncol=2)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
