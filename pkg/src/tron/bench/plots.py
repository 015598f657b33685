"""SVG figures rendered from a run directory's CSVs.

* ``convergence.svg``  raw cost against iteration and against wall time
  (lasso: objective gap and TRON's dual weights instead)
* ``path.svg``         diff-drive paths over the obstacle field
* ``controls.svg``     per-timestep control stems (needle twist, satellite thrust)
* ``weights.svg``      evolution of TRON's dual weights (trajectory experiments)
"""
from __future__ import annotations

import csv
import json
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

COLORS = {"tron": "tab:blue", "ilqr": "tab:red", "admm": "tab:green", "newton": "tab:orange", "subgradient": "tab:purple"}
# fixed hash salt and no dates keep the SVG output stable across runs
RC = {"svg.hashsalt": "tron-bench", "svg.fonttype": "none", "font.size": 9}
META = {"Date": None, "Creator": None}


def _read(path) -> dict:
    if not os.path.exists(path):
        raise FileNotFoundError(f"missing artifact: {path}")
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    cols = {}
    for j, name in enumerate(header):
        vals = [r[j] for r in body]
        try:
            cols[name] = np.array([float(v) if v != "" else np.nan for v in vals])
        except ValueError:
            cols[name] = np.array(vals)
    return cols


def _save(fig, path) -> str:
    fig.savefig(path, format="svg", metadata=META)
    plt.close(fig)
    return path


def _oracle(out_dir):
    path = os.path.join(out_dir, "oracle.csv")
    if not os.path.exists(path):
        return None
    return float(_read(path)["value"][0])


def _convergence(out_dir, experiment, solvers, weights_cols):
    logy = experiment == "diffdrive"
    data = {s: _read(os.path.join(out_dir, f"convergence_{s}.csv")) for s in solvers}
    if experiment == "lasso":
        opt = _oracle(out_dir)
        fig, (ax, ax2) = plt.subplots(1, 2, figsize=(9, 3.4))
        for s, d in data.items():
            y = d["cost"] - opt if opt is not None else d["cost"]
            ax.plot(d["iter"], np.maximum(y, 1e-16) if opt is not None else y, label=s, color=COLORS.get(s))
        ax.set_yscale("log" if opt is not None else "linear")
        ax.set_xlabel("iteration")
        ax.set_ylabel("objective - optimum" if opt is not None else "objective")
        ax.legend(frameon=False)
        if weights_cols is not None:
            w = weights_cols
            for pair in np.unique(w["pair"]):
                sel = w["pair"] == pair
                ax2.plot(w["iter"][sel], w["theta1"][sel], label=f"theta1, pair {int(pair)}")
            ax2.set_ylim(-0.05, 1.05)
            ax2.legend(frameon=False)
        ax2.set_xlabel("iteration")
        ax2.set_ylabel("TRON dual weight")
        fig.tight_layout()
        return _save(fig, os.path.join(out_dir, "convergence.svg"))
    timed = any(np.any(d["wall_s"] > 0) for d in data.values())
    fig, axes = plt.subplots(1, 2 if timed else 1, figsize=(9 if timed else 5, 3.4), squeeze=False)
    for s, d in data.items():
        axes[0, 0].plot(d["iter"], d["cost"], label=s, color=COLORS.get(s))
        if timed:
            axes[0, 1].plot(d["wall_s"], d["cost"], label=s, color=COLORS.get(s))
    axes[0, 0].set_xlabel("iteration")
    if timed:
        axes[0, 1].set_xlabel("wall time (s)")
    for ax in axes[0]:
        ax.set_ylabel("cost")
        if logy:
            ax.set_yscale("log")
        ax.legend(frameon=False)
    fig.tight_layout()
    return _save(fig, os.path.join(out_dir, "convergence.svg"))


def _path(out_dir, model, solvers):
    fig, ax = plt.subplots(figsize=(5, 5))
    for (cx, cy), r in model["obstacles"]:
        ax.add_patch(plt.Circle((cx, cy), r, color="0.6", alpha=0.6, lw=0))
    cmaps = {"tron": "Blues", "ilqr": "Reds", "admm": "Greens"}
    for s in solvers:
        d = _read(os.path.join(out_dir, f"trajectory_{s}.csv"))
        x, y = d["x_0"], d["x_1"]
        shade = np.linspace(0.35, 1.0, x.size)
        ax.plot(x, y, color=COLORS.get(s), lw=0.8, label=s)
        ax.scatter(x, y, c=shade, cmap=cmaps.get(s, "Greys"), s=9, vmin=0, vmax=1, zorder=3)
    sx, sy = model["start"][:2]
    gx, gy = model["goal"][:2]
    ax.plot([sx], [sy], marker="D", color="black", ms=7, ls="none", label="start")
    ax.plot([gx], [gy], marker="D", color="tab:green", ms=7, ls="none", label="goal")
    ax.set_aspect("equal")
    ax.set_xlabel("p_x (m)")
    ax.set_ylabel("p_y (m)")
    ax.legend(frameon=False, fontsize=7, loc="upper left")
    fig.tight_layout()
    return _save(fig, os.path.join(out_dir, "path.svg"))


def _controls(out_dir, experiment, solvers):
    cols = ["u_1"] if experiment == "needle" else ["u_0", "u_1", "u_2"]
    labels = {"needle": {"u_1": "angular speed w"}, "satellite": {c: f"thrust {c}" for c in cols}}[experiment]
    fig, axes = plt.subplots(len(solvers), len(cols), figsize=(3.2 * len(cols), 1.9 * len(solvers)),
                             squeeze=False, sharex=True)
    for i, s in enumerate(solvers):
        d = _read(os.path.join(out_dir, f"trajectory_{s}.csv"))
        keep = ~np.isnan(d[cols[0]])
        for j, c in enumerate(cols):
            ax = axes[i, j]
            ax.stem(d["t"][keep], d[c][keep], linefmt=COLORS.get(s, "k"), markerfmt=" ", basefmt="k-")
            ax.set_title(f"{s}: {labels[c]}", fontsize=8)
    for ax in axes[-1]:
        ax.set_xlabel("timestep")
    fig.tight_layout()
    return _save(fig, os.path.join(out_dir, "controls.svg"))


def _weights(out_dir, w, max_curves: int = 8):
    fig, ax = plt.subplots(figsize=(5, 3.4))
    keys = np.stack([w["t"], w["pair"]], axis=1)
    uniq = np.unique(keys, axis=0)
    # show the (t, pair) weights that moved the most
    spread = []
    for t, p in uniq:
        sel = (w["t"] == t) & (w["pair"] == p)
        spread.append(np.ptp(w["theta1"][sel]))
    order = np.argsort(-np.asarray(spread), kind="stable")[:max_curves]
    for k in order:
        t, p = uniq[k]
        sel = (w["t"] == t) & (w["pair"] == p)
        ax.plot(w["iter"][sel], w["theta1"][sel], lw=1, label=f"t={int(t)}, pair {int(p)}")
    ax.set_ylim(-0.05, 1.05)
    ax.set_xlabel("outer iteration")
    ax.set_ylabel("theta1")
    ax.legend(frameon=False, fontsize=6, ncol=2)
    fig.tight_layout()
    return _save(fig, os.path.join(out_dir, "weights.svg"))


def emit_plots(out_dir: str) -> list:
    """Render every figure that applies to the run in ``out_dir``; returns the file paths."""
    mpath = os.path.join(out_dir, "manifest.json")
    if not os.path.exists(mpath):
        raise FileNotFoundError(f"missing artifact: {mpath}")
    with open(mpath) as fh:
        manifest = json.load(fh)
    experiment = manifest["experiment"]
    solvers = [s for s in manifest["config"]["solvers"] if s not in manifest.get("aborted", {})]
    if not solvers:
        return []
    wpath = os.path.join(out_dir, "weights_tron.csv")
    weights = _read(wpath) if "tron" in solvers else None
    out = []
    with plt.rc_context(RC):
        out.append(_convergence(out_dir, experiment, solvers, weights))
        if experiment == "diffdrive":
            out.append(_path(out_dir, manifest["config"]["model"], solvers))
        if experiment in ("needle", "satellite"):
            out.append(_controls(out_dir, experiment, solvers))
        if weights is not None and experiment != "lasso" and weights["iter"].size:
            out.append(_weights(out_dir, weights))
    return out
