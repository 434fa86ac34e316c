"""Scenario files: everything needed to reproduce one run.

Scenarios are YAML mappings with the sections ``problem``, ``exosystem``,
``fit``, ``gains``, ``controller``, ``simulation`` and ``compare``. The
built-in ones ship as package data in ``feedopt/scenarios``. Missing keys
take the defaults in :data:`DEFAULTS`.
"""

from __future__ import annotations

import copy
import hashlib
import json
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .errors import InvalidInput
from .problems import BUILTIN_NAMES, Problem, builtin

DEFAULTS = {
    "name": "unnamed",
    "problem": {"builtin": "lq", "params": {}},
    "exosystem": {},
    "fit": {"d_pi": 4, "d_gamma": 4, "count": None, "seed": 0, "tol": None, "max_iter": 200},
    "gains": {"k_region": [-3.0, -2.0], "l_region": [-2.0, -1.0], "k_poles": None, "l_poles": None},
    "controller": {"kind": "dynamic"},
    "simulation": {"horizon": 30.0, "step": 1e-3, "record_every": 10, "method": "rk4",
                   "x0": None, "z0": None, "w0": None, "tolerance": 1e-6},
    "compare": {"etas": [0.01, 0.1, 1.0]},
}

SECTIONS = tuple(DEFAULTS)


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def resolve(raw: dict) -> dict:
    """Fill defaults and validate section names."""
    if not isinstance(raw, dict):
        raise InvalidInput("scenario must be a mapping")
    unknown = set(raw) - set(SECTIONS)
    if unknown:
        raise InvalidInput(f"unknown scenario sections: {', '.join(sorted(unknown))}")
    sc = _merge(DEFAULTS, raw)
    name = sc["problem"].get("builtin")
    if name not in BUILTIN_NAMES:
        raise InvalidInput(f"unknown problem {name!r}")
    return sc


def builtin_scenario_names() -> list[str]:
    files = resources.files("feedopt") / "scenarios"
    return sorted(p.name[:-5] for p in files.iterdir() if p.name.endswith(".yaml"))


def load(source: str) -> dict:
    """Load a scenario from a file path or a built-in scenario name."""
    path = Path(source)
    if path.suffix in (".yaml", ".yml") or path.exists():
        try:
            text = path.read_text()
        except OSError as exc:
            raise InvalidInput(f"cannot read scenario {source}: {exc}") from exc
    else:
        res = resources.files("feedopt") / "scenarios" / f"{source}.yaml"
        if not res.is_file():
            raise InvalidInput(f"no scenario named {source!r}; built-ins: {', '.join(builtin_scenario_names())}")
        text = res.read_text()
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise InvalidInput(f"scenario is not valid YAML: {exc}") from exc
    return resolve(raw or {})


def dumps(sc: dict) -> str:
    return yaml.safe_dump(sc, sort_keys=True)


def scenario_hash(sc: dict) -> str:
    """SHA-256 of the canonical JSON form of a resolved scenario."""
    canon = json.dumps(sc, sort_keys=True, separators=(",", ":"), default=float)
    return hashlib.sha256(canon.encode()).hexdigest()


def build_problem(sc: dict) -> Problem:
    params = dict(sc["problem"].get("params") or {})
    exo = sc.get("exosystem") or {}
    for key in ("frequencies", "amplitudes"):
        if exo.get(key) is not None:
            params[key] = exo[key]
    return builtin(sc["problem"]["builtin"], **params)


def initial_state(sc: dict, loop) -> np.ndarray:
    """Initial state from the ``simulation`` section.

    ``z0: exosystem`` starts an observer-based controller at the equilibrium
    plant state and the true disturbance state; other controller kinds
    ignore it and start at their equilibrium.
    """
    sim = sc["simulation"]
    w0 = sim.get("w0")
    z0 = sim.get("z0")
    if z0 == "exosystem" and getattr(loop.controller, "kind", None) != "dynamic":
        z0 = None
    elif z0 == "exosystem":
        w = loop.problem.exo.w0 if w0 is None else np.asarray(w0, float)
        z0 = np.concatenate([loop.problem.plant.x_eq, w])
    elif isinstance(z0, str):
        raise InvalidInput(f"unknown z0 shorthand {z0!r}")
    return loop.initial_state(sim.get("x0"), z0, w0)
