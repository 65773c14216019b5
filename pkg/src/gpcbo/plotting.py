"""SVG figures rendered from run artifacts (history.csv, solution.csv).

Everything here reads the CSV files only, so figures can be regenerated for
any finished run without repeating the optimization.
"""

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

plt.rcParams.update(
    {
        "figure.figsize": (6.0, 4.0),
        "axes.grid": True,
        "grid.alpha": 0.3,
        "font.size": 10,
        "svg.hashsalt": "gpcbo",
    }
)

SVG_META = {"Date": None}


def read_csv(path):
    """Return ``(header, columns)`` where columns maps names to float arrays (NaN for blanks)."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"missing file: {path}")
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"empty CSV: {path}")
    header, body = rows[0], rows[1:]
    data = np.array([[float(x) if x != "" else np.nan for x in r] for r in body], dtype=float)
    data = data.reshape(len(body), len(header))
    return header, {name: data[:, i] for i, name in enumerate(header)}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata=SVG_META)
    plt.close(fig)
    return path


def plot_cost(history, path):
    fig, ax = plt.subplots()
    it = history["iteration"]
    ax.semilogy(it, history["consensus_cost"], label="consensus")
    ax.semilogy(it, history["best_cost"], label="best agent", alpha=0.7)
    ax.set_xlabel("iteration")
    ax.set_ylabel("cost")
    ax.legend()
    return _save(fig, path)


def plot_errors(history, path):
    fig, ax = plt.subplots()
    it = history["iteration"]
    ax.semilogy(it, history["err_l2"], label=r"$\|e\|_{L_2}$")
    ax.semilogy(it, history["err_linf"], label=r"$\|e\|_{L_\infty}$")
    ax.set_xlabel("iteration")
    ax.set_ylabel("error")
    ax.legend()
    return _save(fig, path)


def plot_profile(sol, path):
    fig, ax = plt.subplots()
    ax.plot(sol["x"], sol["value"], label="CBO")
    if "exact" in sol:
        ax.plot(sol["x"], sol["exact"], "--", label="exact")
    ax.set_xlabel("x")
    ax.set_ylabel("u")
    ax.legend()
    return _save(fig, path)


def _grid(sol):
    xs = np.unique(sol["x"])
    ys = np.unique(sol["y"])
    shape = (xs.size, ys.size)
    return xs, ys, shape


def plot_heatmap(sol, values, path, vmin, vmax, title, cmap="viridis"):
    xs, ys, shape = _grid(sol)
    fig, ax = plt.subplots(figsize=(5.0, 4.2))
    im = ax.imshow(
        values.reshape(shape).T,
        origin="lower",
        extent=(xs[0], xs[-1], ys[0], ys[-1]),
        vmin=vmin,
        vmax=vmax,
        cmap=cmap,
        aspect="equal",
    )
    fig.colorbar(im, ax=ax)
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.set_title(title)
    ax.grid(False)
    return _save(fig, path)


def plot_snapshots(sol, path, frames=6, target=None):
    """Sheep (circles), dogs (triangles) and target (star) at evenly spaced time nodes."""
    t = sol["t"]
    sheep = sorted({k.rsplit("_", 1)[0] for k in sol if k.startswith("sheep")},
                   key=lambda s: int(s[5:]))
    dogs = sorted({k.rsplit("_", 1)[0] for k in sol if k.startswith("dog")},
                  key=lambda s: int(s[3:]))
    xs = np.concatenate([sol[f"{a}_x"] for a in sheep + dogs])
    ys = np.concatenate([sol[f"{a}_y"] for a in sheep + dogs])
    if target is not None:
        xs, ys = np.append(xs, target[0]), np.append(ys, target[1])
    pad = 0.05 * max(np.ptp(xs), np.ptp(ys), 1.0)
    idx = np.unique(np.linspace(0, t.size - 1, frames).round().astype(int))
    fig, axes = plt.subplots(1, idx.size, figsize=(2.6 * idx.size, 2.8), sharex=True, sharey=True)
    axes = np.atleast_1d(axes)
    for ax, k in zip(axes, idx):
        ax.scatter([sol[f"{s}_x"][k] for s in sheep], [sol[f"{s}_y"][k] for s in sheep],
                   s=12, c="tab:blue", marker="o")
        ax.scatter([sol[f"{d}_x"][k] for d in dogs], [sol[f"{d}_y"][k] for d in dogs],
                   s=40, c="tab:red", marker="^")
        if target is not None:
            ax.scatter([target[0]], [target[1]], s=80, c="tab:orange", marker="*")
        ax.set_title(f"t = {t[k]:.2f}")
    axes[0].set_xlim(xs.min() - pad, xs.max() + pad)
    axes[0].set_ylim(ys.min() - pad, ys.max() + pad)
    return _save(fig, path)


def plot_controls(sol, path):
    fig, ax = plt.subplots()
    for name in sol:
        if name.startswith("u"):
            ax.plot(sol["t"], sol[name], label=name)
    ax.set_xlabel("t")
    ax.set_ylabel("dog velocity")
    ax.legend()
    return _save(fig, path)


def _target(rep):
    """Shepherd target from the sibling config echo, if there is one."""
    for cand in (rep / "config_echo.json", rep.parent / "config_echo.json"):
        if cand.is_file():
            with open(cand) as fh:
                return json.load(fh).get("shepherd", {}).get("x_des")
    return None


def _repeat_dirs(run_dir):
    run_dir = Path(run_dir)
    reps = sorted(p for p in run_dir.glob("repeat_*") if p.is_dir())
    if reps:
        return reps
    if (run_dir / "history.csv").exists() or (run_dir / "solution.csv").exists():
        return [run_dir]
    raise FileNotFoundError(f"missing file: {run_dir / 'repeat_000' / 'history.csv'}")


def emit_plots(run_dirs):
    """Render figures for one or more run directories.

    Heat maps of ``|u - u_exact|`` share one colour range across every 2D
    solution passed in, so constrained and unconstrained runs compare
    directly. Figures go to ``<repeat dir>/plots/``.

    Returns
    -------
    list of Path
    """
    if isinstance(run_dirs, (str, Path)):
        run_dirs = [run_dirs]
    loaded = []
    for rd in run_dirs:
        for rep in _repeat_dirs(rd):
            _, hist = read_csv(rep / "history.csv")
            _, sol = read_csv(rep / "solution.csv")
            loaded.append((rep, hist, sol))

    grids = [sol for _, _, sol in loaded if "y" in sol and "exact" in sol]
    abs_max = max((np.max(np.abs(s["value"] - s["exact"])) for s in grids), default=0.0)

    written = []
    for rep, hist, sol in loaded:
        out = rep / "plots"
        out.mkdir(exist_ok=True)
        written.append(plot_cost(hist, out / "cost.svg"))
        if np.any(np.isfinite(hist["err_l2"])):
            written.append(plot_errors(hist, out / "errors.svg"))
        if "t" in sol:
            written.append(plot_snapshots(sol, out / "snapshots.svg", target=_target(rep)))
            written.append(plot_controls(sol, out / "controls.svg"))
        elif "y" in sol:
            if "exact" in sol:
                diff = sol["value"] - sol["exact"]
                written.append(plot_heatmap(sol, np.abs(diff), out / "abs_diff.svg", 0.0,
                                            abs_max or 1.0, r"$|u_{CBO} - u_{exact}|$"))
                m = float(np.max(np.abs(diff))) or 1.0
                written.append(plot_heatmap(sol, diff, out / "signed_diff.svg", -m, m,
                                            r"$u_{CBO} - u_{exact}$", cmap="RdBu_r"))
            written.append(plot_heatmap(sol, sol["value"], out / "solution.svg",
                                        None, None, "CBO solution"))
        else:
            written.append(plot_profile(sol, out / "solution.svg"))
    return written
