"""Run-configuration files: TOML parsing, validation, object construction.

A config has up to four sections; unknown sections or keys are rejected
before any computation starts.

    [system]
    electrons = 2
    nuclei = [{pos = [0.0, 0.0, 0.0], charge = 2.0}]

    [model]                    # needed by density commands only
    family = "hydrogenic"      # or "correlated"
    a = 1.0                    # orbital exponent
    Z = 2.0                    # optional nuclear charge (hydrogenic)
    b = 0.25                   # pair exponent (correlated)
    c = 1.0                    # optional decay-certificate amplitude
    lambda = 1.0               # optional decay-certificate rate

    [mc]
    samples = 100000
    seed = 7
    proposal_scale = 1.0       # optional
    mu = 1.0                   # optional importance exponent
    threads = 1                # optional

    [task]                     # command-specific keys, see _TASK_SPECS

Electron indices (in selections) are 0-based; electron 0 is the
distinguished one pinned at the probe point.
"""

from __future__ import annotations

import sys

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

import numpy as np

from .errors import ConfigError
from .mc import MCSettings
from .system import MolecularSystem
from .wavefunction import CorrelatedToy, DecayCertificate, HydrogenicProduct

__all__ = ["load_config", "resolve_run", "build_system", "build_model", "build_mc"]

_MODEL_KEYS = {"family", "a", "b", "Z", "N", "c", "lambda"}
_MC_KEYS = {"samples", "seed", "proposal_scale", "mu", "threads"}

# allowed [task] keys and their defaults (None = required, no default)
_TASK_SPECS = {
    "verify ansatz": {"configs": 10000, "scale": 1.5, "tolerance": 1e-10},
    "verify pou": {"samples": 1000, "R": 1.0, "scale": 0.5, "tolerance": 1e-12},
    "verify cluster": {},
    "verify transform": {"tolerance": 1e-12, "trials": 32},
    "verify supports": {"samples": 100000, "R": 1.0, "budget": 10**7, "selections": None},
    "density eval": {
        "quantity": "density",
        "point": None,
        "point2": None,
        "terms": "first",
        "normalize": False,
    },
    "density profile": {"radii": None, "direction": [1.0, 0.0, 0.0], "terms": "first"},
    "density derivatives": {
        "point": None,
        "max_order": 3,
        "base_step": 0.1,
        "axes": [0, 1, 2],
        "terms": "first",
        "require_order": None,
        "cusp_threshold": None,
        "gammas": None,
        "R": None,
        "selection": None,
    },
    "density decay": {
        "gamma": [0, 0, 0],
        "radii": None,
        "direction": [1.0, 0.0, 0.0],
        "eps_tol": 0.1,
        "step": 0.01,
        "terms": "first",
        "expected_slope": None,
        "slope_tol": None,
    },
}

_NEEDS_MODEL = {"density eval", "density profile", "density derivatives", "density decay"}


def load_config(path):
    try:
        with open(path, "rb") as handle:
            return tomllib.load(handle)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed TOML in {path}: {exc}") from exc


def _reject_unknown(mapping, allowed, where):
    unknown = set(mapping) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in [{where}]: {', '.join(sorted(unknown))}")


def build_system(config):
    if "system" not in config:
        raise ConfigError("missing [system] section")
    section = config["system"]
    _reject_unknown(section, {"electrons", "nuclei"}, "system")
    if "electrons" not in section or "nuclei" not in section:
        raise ConfigError("[system] needs both 'electrons' and 'nuclei'")
    nuclei = section["nuclei"]
    if not isinstance(nuclei, list) or not nuclei:
        raise ConfigError("[system] nuclei must be a non-empty list of tables")
    positions, charges = [], []
    for entry in nuclei:
        if not isinstance(entry, dict):
            raise ConfigError("each nucleus must be a table with 'pos' and 'charge'")
        _reject_unknown(entry, {"pos", "charge"}, "system.nuclei")
        if "pos" not in entry or "charge" not in entry:
            raise ConfigError("each nucleus needs 'pos' and 'charge'")
        if not isinstance(entry["pos"], list) or len(entry["pos"]) != 3:
            raise ConfigError("nucleus pos must be a 3-element list")
        positions.append([float(v) for v in entry["pos"]])
        charges.append(float(entry["charge"]))
    try:
        return MolecularSystem(np.array(positions), np.array(charges), int(section["electrons"]))
    except ValueError as exc:
        raise ConfigError(f"invalid [system]: {exc}") from exc


def build_model(config, n_electrons):
    if "model" not in config:
        raise ConfigError("this command needs a [model] section")
    section = config["model"]
    _reject_unknown(section, _MODEL_KEYS, "model")
    family = section.get("family")
    if "N" in section and int(section["N"]) != n_electrons:
        raise ConfigError(
            f"model N = {section['N']} disagrees with system electrons = {n_electrons}"
        )
    certificate = None
    if ("c" in section) != ("lambda" in section):
        raise ConfigError("certificate overrides need both 'c' and 'lambda'")
    if "c" in section:
        try:
            certificate = DecayCertificate(float(section["c"]), float(section["lambda"]))
        except ValueError as exc:
            raise ConfigError(f"invalid certificate: {exc}") from exc
    try:
        if family == "hydrogenic":
            if "b" in section:
                raise ConfigError("'b' is not a hydrogenic parameter")
            model = HydrogenicProduct(
                n_electrons,
                float(section["a"]),
                charge=float(section["Z"]) if "Z" in section else None,
                certificate=certificate,
            )
        elif family == "correlated":
            if "Z" in section:
                raise ConfigError("'Z' is not a correlated-model parameter")
            model = CorrelatedToy(
                n_electrons,
                float(section["a"]),
                float(section["b"]),
                certificate=certificate,
            )
        else:
            raise ConfigError(f"unknown model family {family!r}")
    except KeyError as exc:
        raise ConfigError(f"missing model parameter {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"invalid [model]: {exc}") from exc
    return model


def build_mc(config, seed_override=None, samples_override=None, threads_override=None):
    section = config.get("mc", {})
    _reject_unknown(section, _MC_KEYS, "mc")
    samples = samples_override if samples_override is not None else section.get("samples", 100000)
    seed = seed_override if seed_override is not None else section.get("seed", 0)
    threads = threads_override if threads_override is not None else section.get("threads", 1)
    try:
        return MCSettings(
            samples=int(samples),
            seed=int(seed),
            proposal_scale=float(section.get("proposal_scale", 1.0)),
            mu=float(section["mu"]) if "mu" in section else None,
            threads=int(threads),
        )
    except ValueError as exc:
        raise ConfigError(f"invalid [mc]: {exc}") from exc


def resolve_task(config, command):
    spec = _TASK_SPECS[command]
    section = config.get("task", {})
    _reject_unknown(section, set(spec), "task")
    resolved = {}
    for key, default in spec.items():
        if key in section:
            resolved[key] = section[key]
        elif default is not None:
            resolved[key] = default
        elif key in ("point2", "selections", "selection", "gammas", "require_order",
                     "cusp_threshold", "expected_slope", "slope_tol", "R"):
            resolved[key] = None  # genuinely optional
        else:
            raise ConfigError(f"[task] is missing required key '{key}' for '{command}'")
    return resolved


def resolve_run(config, command, seed_override=None, samples_override=None, threads_override=None):
    """Validate everything up front; returns (system, model, mc, task, resolved).

    ``resolved`` is the fully-expanded parameter dict (defaults injected,
    overrides applied) that gets hashed into the report's config digest.
    """
    known_sections = {"system", "model", "mc", "task"}
    _reject_unknown(config, known_sections, "config")
    system = build_system(config)
    model = build_model(config, system.n_electrons) if command in _NEEDS_MODEL else None
    mc = build_mc(config, seed_override, samples_override, threads_override)
    task = resolve_task(config, command)
    resolved = {
        "command": command,
        "system": {
            "electrons": system.n_electrons,
            "nuclei": [
                {"pos": list(map(float, p)), "charge": float(c)}
                for p, c in zip(system.nuclei_positions, system.nuclei_charges)
            ],
        },
        "model": dict(config.get("model", {})) if model is not None else None,
        "mc": {
            "samples": mc.samples,
            "seed": mc.seed,
            "proposal_scale": mc.proposal_scale,
            "mu": mc.mu,
            "threads": mc.threads,
        },
        "task": task,
    }
    return system, model, mc, task, resolved
