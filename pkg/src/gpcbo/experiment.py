"""Wire a resolved configuration into measures, costs and the optimizer, and
write run artifacts.

Layout of an output directory::

    config_echo.json     resolved configuration plus derived quantities
    summary.json         final costs over repeats
    repeat_000/history.csv
    repeat_000/solution.csv
    ...
"""

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from gpcbo import __version__
from gpcbo.bvp import make_problem
from gpcbo.cbo import HISTORY_COLUMNS, CboParams, ensemble_norm, run
from gpcbo.config import config_hash
from gpcbo.control import (
    MorseParams,
    ShepherdParams,
    make_initial_flock,
    reduced_cost,
    simulate,
    zero_control,
)
from gpcbo.gp import (
    PointEvaluator,
    TrainingData,
    build_posterior,
    build_prior,
    homogeneous,
    sample,
    with_components,
)
from gpcbo.kernel import KernelSpec
from gpcbo.mesh import make_grid_mesh, make_interval_mesh

log = logging.getLogger(__name__)

BVP_PROBLEMS = {
    "harmonic1d": ("harmonic1d", False),
    "harmonic1d_constrained": ("harmonic1d", True),
    "poisson2d": ("poisson2d", False),
    "poisson2d_constrained": ("poisson2d", True),
    "nonlinear2d": ("nonlinear2d", False),
}


@dataclass
class Setup:
    problem: str
    mesh: object
    cost: object
    gp_c: object
    gp_0: object
    training: TrainingData
    exact: np.ndarray = None
    scenario: ShepherdParams = None
    baseline: dict = field(default_factory=dict)
    evaluator: PointEvaluator = None

    def constraint_residual(self, u):
        """Largest deviation of ``u`` from the prescribed data at the training points."""
        if len(self.training) == 0:
            return 0.0
        return float(np.max(np.abs(self.evaluator(u) - self.training.values)))


def kernel_spec(cfg):
    k = cfg["kernel"]
    return KernelSpec(k["family"], k["length_scale"], k["nu"], k["signal_variance"])


def cbo_params(cfg, seed=None):
    c = cfg["cbo"]
    return CboParams(
        n_agents=c["n_agents"],
        alpha=float(c["alpha"]),
        lam=float(c["lam"]),
        tau=float(c["tau"]),
        horizon=float(c["horizon"]),
        seed=cfg["seed"] if seed is None else seed,
        workers=c["workers"],
        seminorm=c["seminorm"],
    )


def shepherd_params(cfg):
    s = cfg["shepherd"]
    x0, v0 = make_initial_flock(
        s["n_sheep"], s["flock_center"], s["flock_radius"], seed=s["flock_seed"]
    )
    return ShepherdParams(
        sheep_x0=x0,
        sheep_v0=v0,
        dogs_d0=np.asarray(s["dogs"], dtype=float),
        morse_ss=MorseParams(**s["morse_ss"]),
        morse_sd=MorseParams(**s["morse_sd"]),
        damping=s["damping"],
        sigma1=s["sigma1"],
        sigma2=s["sigma2"],
        sigma3=s["sigma3"],
        V0=s["V0"],
        x_des=tuple(s["x_des"]),
        T=s["T"],
        M=s["M"],
    )


def build_setup(cfg):
    """Construct mesh, measures and cost functional for ``cfg["problem"]``."""
    problem = cfg["problem"]
    spec = kernel_spec(cfg)
    k = cfg["kernel"]
    if problem in BVP_PROBLEMS:
        tag, constrained = BVP_PROBLEMS[problem]
        size = cfg["mesh"]["points"] if tag == "harmonic1d" else None
        mesh = None
        if tag != "harmonic1d":
            mesh = make_grid_mesh(cfg["mesh"]["nx"], cfg["mesh"]["ny"])
        bvp = make_problem(tag, mesh, include_state_constraints=constrained, size=size)
        gp_c = build_posterior(spec, bvp.mesh, k["sigma_gp2"], bvp.data, k["noise_on_train"])
        return Setup(
            problem,
            bvp.mesh,
            bvp.cost_function(),
            gp_c,
            homogeneous(gp_c),
            bvp.data,
            bvp.exact,
            evaluator=PointEvaluator(spec, bvp.mesh, bvp.data.points),
        )

    if problem == "quadratic_sanity":
        q = cfg["quadratic"]
        mesh = make_interval_mesh(q["lower"], q["upper"], cfg["mesh"]["points"])
        data = TrainingData([q["lower"], q["upper"]], [q["left"], q["right"]])
        gp_c = build_posterior(spec, mesh, k["sigma_gp2"], data, k["noise_on_train"])
        target = sample(gp_c, np.random.default_rng(q["target_seed"]), 1)[0]

        def cost(U):
            return ensemble_norm(np.asarray(U) - target, mesh) ** 2

        return Setup(
            problem, mesh, cost, gp_c, homogeneous(gp_c), data, target,
            evaluator=PointEvaluator(spec, mesh, data.points),
        )

    if problem == "shepherd":
        scenario = shepherd_params(cfg)
        mesh = scenario.time_mesh()
        prior = build_prior(spec, mesh, k["sigma_gp2"])
        gp_c = with_components(prior, 2 * scenario.n_dogs)

        def cost(U):
            return reduced_cost(scenario, U)

        baseline = {"zero_control_cost": reduced_cost(scenario, zero_control(scenario))}
        return Setup(
            problem,
            mesh,
            cost,
            gp_c,
            homogeneous(gp_c),
            TrainingData.empty(1),
            scenario=scenario,
            baseline=baseline,
        )
    raise ValueError(f"unknown problem {problem!r}")


def run_repeat(setup, params):
    """One optimizer run; returns a dict with the consensus, history and key costs."""
    initial = {}

    def grab_initial(ens, v):
        if ens.iteration == 0:
            initial["costs"] = ens.costs.copy()

    v, ens, history = run(
        setup.cost, setup.gp_c, setup.gp_0, params, setup.mesh,
        exact=setup.exact, callback=grab_initial,
    )
    return {
        "seed": params.seed,
        "consensus": v,
        "ensemble": ens,
        "history": history,
        "initial_median_cost": float(np.median(initial["costs"])),
        "best_initial_cost": float(np.min(initial["costs"])),
        "final_cost": history.rows[-1][HISTORY_COLUMNS.index("consensus_cost")],
    }


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_history(path, history):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(HISTORY_COLUMNS)
        for row in history.rows:
            w.writerow([_fmt(x) for x in row])


def solution_table(setup, v):
    """Header and rows of solution.csv for consensus ``v``."""
    mesh = setup.mesh
    if setup.scenario is not None:
        sc = setup.scenario
        traj = simulate(sc, v, raise_on_blowup=False)
        u = v.reshape(2 * sc.n_dogs, sc.M + 1).T
        header = ["t"]
        header += [f"u{k}_{a}" for k in range(sc.n_dogs) for a in "xy"]
        header += [f"dog{k}_{a}" for k in range(sc.n_dogs) for a in "xy"]
        header += [f"sheep{i}_{a}" for i in range(sc.n_sheep) for a in "xy"]
        body = np.column_stack(
            [sc.times, u, traj.d.reshape(sc.M + 1, -1), traj.x.reshape(sc.M + 1, -1)]
        )
        return header, body
    coords = ["x"] if mesh.dim == 1 else ["x", "y"]
    cols = [mesh.points, v[:, None]]
    header = coords + ["value"]
    if setup.exact is not None:
        header.append("exact")
        cols.append(setup.exact[:, None])
    return header, np.hstack(cols)


def write_solution(path, setup, v):
    header, body = solution_table(setup, v)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in body:
            w.writerow([repr(float(x)) for x in row])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(_jsonable(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


def run_experiment(cfg):
    """Execute all repeats of ``cfg`` and write artifacts under ``cfg["out"]``.

    Repeat ``r`` uses seed ``cfg["seed"] + r``. Returns the summary dict.
    """
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    setup = build_setup(cfg)
    base = cbo_params(cfg)
    derived = {
        "iterations": base.iterations,
        "mesh_nodes": setup.mesh.size,
        "dimension": setup.gp_c.dimension,
        "training_points": len(setup.training),
        "jitter_used": setup.gp_c.jitter_used,
        "version": __version__,
    }
    echo = dict(cfg)
    echo["derived"] = derived
    write_json(out / "config_echo.json", echo)

    results = []
    for r in range(cfg["repeats"]):
        seed = cfg["seed"] + r
        log.info("%s: repeat %d (seed %d), %d iterations", cfg["problem"], r, seed, base.iterations)
        res = run_repeat(setup, cbo_params(cfg, seed))
        rdir = out / f"repeat_{r:03d}"
        rdir.mkdir(exist_ok=True)
        write_history(rdir / "history.csv", res["history"])
        write_solution(rdir / "solution.csv", setup, res["consensus"])
        results.append(res)

    finals = [r["final_cost"] for r in results]
    summary = {
        "problem": cfg["problem"],
        "repeats": cfg["repeats"],
        "seeds": [r["seed"] for r in results],
        "final_costs": finals,
        "mean_final_cost": float(np.mean(finals)),
        "best_final_cost": float(np.min(finals)),
        "max_final_cost": float(np.max(finals)),
        "initial_median_costs": [r["initial_median_cost"] for r in results],
        "best_initial_costs": [r["best_initial_cost"] for r in results],
        "resampled_agents": [int(r["ensemble"].resampled) for r in results],
        "config_hash": config_hash(cfg),
    }
    summary.update(setup.baseline)
    if setup.exact is not None:
        hist = [r["history"] for r in results]
        summary["final_err_l2"] = [h.rows[-1][HISTORY_COLUMNS.index("err_l2")] for h in hist]
        summary["final_err_linf"] = [h.rows[-1][HISTORY_COLUMNS.index("err_linf")] for h in hist]
    if len(setup.training):
        summary["constraint_residuals"] = [
            setup.constraint_residual(r["consensus"]) for r in results
        ]
    write_json(out / "summary.json", summary)
    return summary
