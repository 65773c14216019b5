"""Run configuration: YAML scenario files, per-problem presets, validation.

Resolution order (later wins): built-in defaults, problem preset, config
file, command-line overrides. Unknown keys are rejected with their dotted
path so typos never silently fall back to defaults.
"""

import copy
import hashlib
import json
import re
from pathlib import Path

import yaml

from gpcbo.cbo import CboParams
from gpcbo.errors import ConfigError, GpcboError
from gpcbo.kernel import MATERN_NUS


class _Loader(yaml.SafeLoader):
    """Safe loader that also reads exponents without a sign (``1e5``) as floats."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(
        r"""^(?:[-+]?(?:[0-9][0-9_]*)\.[0-9_]*(?:[eE][-+]?[0-9]+)?
        |[-+]?(?:[0-9][0-9_]*)(?:[eE][-+]?[0-9]+)
        |\.[0-9_]+(?:[eE][-+]?[0-9]+)?
        |[-+]?\.(?:inf|Inf|INF)
        |\.(?:nan|NaN|NAN))$""",
        re.X,
    ),
    list("-+0123456789."),
)

PROBLEMS = (
    "harmonic1d",
    "harmonic1d_constrained",
    "poisson2d",
    "poisson2d_constrained",
    "nonlinear2d",
    "shepherd",
    "quadratic_sanity",
)

DEFAULTS = {
    "problem": "harmonic1d",
    "seed": 0,
    "repeats": 1,
    "out": "runs/out",
    "mesh": {"points": 50, "nx": 30, "ny": 30},
    "kernel": {
        "family": "matern",
        "nu": 2.5,
        "length_scale": 1.0,
        "signal_variance": 1.0,
        "sigma_gp2": 0.0,
        "noise_on_train": False,
    },
    "cbo": {
        "n_agents": 100,
        "alpha": 1.0e5,
        "lam": 1.0,
        "tau": 0.1,
        "horizon": 200.0,
        "workers": 1,
        "seminorm": False,
    },
    "quadratic": {"target_seed": 12345, "lower": 0.0, "upper": 1.0, "left": 0.0, "right": 1.0},
    "shepherd": {
        "n_sheep": 20,
        "flock_seed": 0,
        "flock_center": [0.0, 0.0],
        "flock_radius": 1.0,
        "dogs": [[-3.0, 0.0]],
        "damping": 1.0,
        # with the model's sign convention the C_a branch repels: C_a/l_a
        # dominates at short range for sheep-sheep, everywhere for sheep-dog
        "morse_ss": {"C_r": 1.0, "l_r": 2.0, "C_a": 2.0, "l_a": 0.5},
        "morse_sd": {"C_r": 0.1, "l_r": 0.5, "C_a": 4.0, "l_a": 1.5},
        "sigma1": 1.0,
        "sigma2": 1.0,
        "sigma3": 0.01,
        "V0": 0.25,
        "x_des": [4.0, 0.0],
        "T": 10.0,
        "M": 100,
    },
}

PRESETS = {
    "harmonic1d": {"kernel": {"signal_variance": 5.0}},
    "harmonic1d_constrained": {"kernel": {"signal_variance": 5.0}},
    "poisson2d": {"mesh": {"nx": 15, "ny": 15}},
    "poisson2d_constrained": {"mesh": {"nx": 15, "ny": 15}},
    "nonlinear2d": {"mesh": {"nx": 15, "ny": 15}},
    "shepherd": {
        "kernel": {"nu": 0.5, "signal_variance": 0.05},
        "cbo": {"n_agents": 50, "horizon": 50.0},
    },
    "quadratic_sanity": {
        "mesh": {"points": 30},
        "cbo": {"n_agents": 50, "horizon": 50.0},
    },
}


def _merge(base, update, path=""):
    for key, value in update.items():
        where = f"{path}{key}"
        if key not in base:
            raise ConfigError(f"{where}: unknown key")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{where}: expected a mapping, got {type(value).__name__}")
            _merge(base[key], value, where + ".")
        else:
            base[key] = value
    return base


def resolve(raw=None, overrides=None):
    """Merge defaults, the problem preset, ``raw`` and ``overrides`` and validate."""
    raw = dict(raw or {})
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    problem = overrides.get("problem", raw.get("problem", DEFAULTS["problem"]))
    if problem not in PROBLEMS:
        raise ConfigError(f"problem: unknown problem {problem!r}; choose from {', '.join(PROBLEMS)}")
    cfg = copy.deepcopy(DEFAULTS)
    _merge(cfg, PRESETS.get(problem, {}))
    _merge(cfg, raw)
    _merge(cfg, overrides)
    validate(cfg)
    return cfg


def load(path, overrides=None):
    """Read a YAML scenario file and resolve it. I/O errors propagate unchanged."""
    path = Path(path)
    text = path.read_text()
    try:
        raw = yaml.load(text, Loader=_Loader) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML ({exc})") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return resolve(raw, overrides)


def _require(cond, where, message):
    if not cond:
        raise ConfigError(f"{where}: {message}")


def _is_int(x):
    return isinstance(x, int) and not isinstance(x, bool)


def _is_num(x):
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def validate(cfg):
    """Check every field; raise :class:`ConfigError` naming the first bad one."""
    _require(_is_int(cfg["seed"]) and cfg["seed"] >= 0, "seed", "must be a nonnegative integer")
    _require(_is_int(cfg["repeats"]) and cfg["repeats"] >= 1, "repeats", "must be an integer >= 1")
    _require(isinstance(cfg["out"], str) and cfg["out"], "out", "must be a path")
    for key in ("points", "nx", "ny"):
        v = cfg["mesh"][key]
        _require(_is_int(v) and v >= 3, f"mesh.{key}", "must be an integer >= 3")

    k = cfg["kernel"]
    for key in ("nu", "length_scale", "signal_variance", "sigma_gp2"):
        _require(_is_num(k[key]), f"kernel.{key}", "must be a number")
    _require(k["sigma_gp2"] >= 0, "kernel.sigma_gp2", "must be nonnegative")
    _require(isinstance(k["noise_on_train"], bool), "kernel.noise_on_train", "must be true/false")
    _require(k["family"] in ("matern", "se"), "kernel.family", "must be 'matern' or 'se'")
    _require(k["length_scale"] > 0, "kernel.length_scale", "must be positive")
    _require(k["signal_variance"] > 0, "kernel.signal_variance", "must be positive")
    if k["family"] == "matern":
        _require(
            float(k["nu"]) in MATERN_NUS,
            "kernel.nu",
            f"smoothness must be one of {', '.join(map(str, MATERN_NUS))}, got {k['nu']}",
        )

    c = cfg["cbo"]
    _require(_is_int(c["n_agents"]), "cbo.n_agents", "must be an integer")
    _require(_is_int(c["workers"]), "cbo.workers", "must be an integer")
    _require(isinstance(c["seminorm"], bool), "cbo.seminorm", "must be true/false")
    for key in ("alpha", "lam", "tau", "horizon"):
        _require(_is_num(c[key]), f"cbo.{key}", "must be a number")
    try:
        CboParams(
            c["n_agents"], c["alpha"], c["lam"], c["tau"], c["horizon"], cfg["seed"], c["workers"]
        )
    except GpcboError as exc:
        raise ConfigError(f"cbo: {exc}") from None

    q = cfg["quadratic"]
    _require(_is_int(q["target_seed"]), "quadratic.target_seed", "must be an integer")
    _require(q["lower"] < q["upper"], "quadratic.lower", "must be below quadratic.upper")

    s = cfg["shepherd"]
    _require(_is_int(s["n_sheep"]) and s["n_sheep"] >= 1, "shepherd.n_sheep", "must be >= 1")
    _require(_is_int(s["M"]) and s["M"] >= 2, "shepherd.M", "must be an integer >= 2")
    dogs = s["dogs"]
    _require(
        isinstance(dogs, list) and 1 <= len(dogs) <= 2 and all(_pair(d) for d in dogs),
        "shepherd.dogs",
        "must list one or two [x, y] start positions",
    )
    _require(_pair(s["x_des"]), "shepherd.x_des", "must be [x, y]")
    _require(_pair(s["flock_center"]), "shepherd.flock_center", "must be [x, y]")
    for key in ("damping", "T", "flock_radius"):
        _require(_is_num(s[key]) and s[key] > 0, f"shepherd.{key}", "must be positive")
    for key in ("sigma1", "sigma2", "sigma3", "V0"):
        _require(_is_num(s[key]) and s[key] >= 0, f"shepherd.{key}", "must be nonnegative")
    for block in ("morse_ss", "morse_sd"):
        for key, v in s[block].items():
            _require(_is_num(v) and v > 0, f"shepherd.{block}.{key}", "must be positive")
    return cfg


def _pair(v):
    return isinstance(v, (list, tuple)) and len(v) == 2 and all(_is_num(x) for x in v)


def config_hash(cfg):
    """SHA-256 of the resolved configuration, ignoring the output path."""
    payload = {k: v for k, v in cfg.items() if k != "out"}
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()
