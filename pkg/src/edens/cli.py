"""Command-line surface: verification suites and density computations.

Every command reads a TOML run configuration, writes a canonical JSON
report ``{command, config_digest, parameters, results, pass}``, and
exits 0 when the report passes, 2 on a property violation, and 1 on a
usage or configuration error.  Reports are byte-identical given the
same config and seed, independent of the thread count.
"""

from __future__ import annotations

import sys
from dataclasses import replace
from itertools import chain, combinations

import click
import numpy as np

from .cluster import (
    ClusterSelection,
    CutoffFamily,
    PairSet,
    equivalence_class,
    phi,
    support_certificate,
)
from .density import (
    decay_fit,
    estimate_density,
    estimate_density_derivative,
    estimate_norm_squared,
    estimate_on_top_density,
    estimate_pair_density,
    estimate_rdm1,
    smoothness_probe,
)
from .errors import ConfigError, EdensError
from .regularization import RegularizingFactors, ansatz_defect
from .reportio import config_digest, write_profile_csv, write_report
from .runconfig import load_config, resolve_run
from .system import potential
from .transform import build_frame

__all__ = ["main"]


# -- verification handlers -------------------------------------------------


def _run_verify_ansatz(system, model, mc, task):
    rng = np.random.default_rng(mc.seed)
    count = int(task["configs"])
    x = rng.normal(scale=float(task["scale"]), size=(count, system.n_electrons, 3))
    factors = RegularizingFactors(system)
    defect = np.abs(ansatz_defect(factors, x))
    scale = 1.0 + np.abs(potential(system, x))
    worst = float(np.max(defect / scale))
    tolerance = float(task["tolerance"])
    results = {"configs": count, "max_normalized_defect": worst, "tolerance": tolerance}
    return results, worst <= tolerance


def _run_verify_pou(system, model, mc, task):
    n = system.n_electrons
    family = CutoffFamily(float(task["R"]), n)
    rng = np.random.default_rng(mc.seed)
    count = int(task["samples"])
    x = rng.normal(scale=float(task["scale"]), size=(count, n, 3))
    total = np.zeros(count)
    subsets = 0
    for selection in PairSet(n).selections():
        total += phi(selection, family, x)
        subsets += 1
    worst = float(np.max(np.abs(total - 1.0)))
    tolerance = float(task["tolerance"])
    results = {
        "samples": count,
        "subsets": subsets,
        "max_deviation": worst,
        "tolerance": tolerance,
    }
    return results, worst <= tolerance


def _closure_cluster(selection):
    """Independent oracle: transitive closure by boolean matrix powers."""
    n = selection.n_electrons
    adjacency = np.eye(n, dtype=int)
    for j, k in selection.pairs:
        adjacency[j, k] = adjacency[k, j] = 1
    reach = adjacency.copy()
    for _ in range(n):
        reach = ((reach @ adjacency) > 0).astype(int)
    return tuple(int(j) for j in np.nonzero(reach[0])[0])


def _run_verify_cluster(system, model, mc, task):
    n = system.n_electrons
    mismatches = 0
    subsets = 0
    for selection in PairSet(n).selections():
        subsets += 1
        if equivalence_class(selection).cluster != _closure_cluster(selection):
            mismatches += 1
    results = {"subsets": subsets, "mismatches": mismatches}
    return results, mismatches == 0


def _nonempty_subsets(n):
    return chain.from_iterable(combinations(range(n), k) for k in range(1, n + 1))


def _run_verify_transform(system, model, mc, task):
    n = system.n_electrons
    rng = np.random.default_rng(mc.seed)
    trials = int(task["trials"])
    worst_orth = worst_round = worst_indep = 0.0
    subsets = 0
    for cluster in _nonempty_subsets(n):
        subsets += 1
        frame = build_frame(n, cluster)
        full = frame.matrix()
        worst_orth = max(worst_orth, float(np.max(np.abs(full @ full.T - np.eye(3 * n)))))
        x = rng.normal(size=(trials, n, 3))
        xc, xr = frame.forward(x)
        worst_round = max(worst_round, float(np.max(np.abs(frame.inverse(xc, xr) - x))))
        if len(cluster) >= 2:
            j, k = cluster[0], cluster[1]
            shift = rng.normal(size=(trials, 3))
            base = frame.inverse(xc, xr)
            moved = frame.inverse(xc + shift, xr)
            delta = (moved[..., j, :] - moved[..., k, :]) - (base[..., j, :] - base[..., k, :])
            worst_indep = max(worst_indep, float(np.max(np.abs(delta))))
    tolerance = float(task["tolerance"])
    results = {
        "subsets": subsets,
        "max_orthogonality_error": worst_orth,
        "max_roundtrip_error": worst_round,
        "max_cluster_difference_drift": worst_indep,
        "tolerance": tolerance,
    }
    return results, max(worst_orth, worst_round, worst_indep) <= tolerance


def _parse_selection(entry, n):
    try:
        pairs = frozenset((int(j), int(k)) for j, k in entry)
        return ClusterSelection(n, pairs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad selection {entry!r}: {exc}") from exc


def _run_verify_supports(system, model, mc, task):
    n = system.n_electrons
    family = CutoffFamily(float(task["R"]), n)
    if task["selections"] is None:
        selections = list(PairSet(n).selections())
    else:
        selections = [_parse_selection(entry, n) for entry in task["selections"]]
    records = []
    total_violations = 0
    for index, selection in enumerate(selections):
        report = support_certificate(
            selection,
            family,
            system,
            sample_count=int(task["samples"]),
            seed=mc.seed + index,
            proposal_budget=int(task["budget"]),
        )
        total_violations += report.violations
        records.append(report.as_record())
    results = {"certificates": records, "total_violations": total_violations}
    return results, total_violations == 0


# -- density handlers -------------------------------------------------------


def _run_density_eval(system, model, mc, task):
    quantity = task["quantity"]
    terms = task["terms"]
    point = task["point"]
    nonnegative = quantity in ("density", "pair_density", "on_top")
    if quantity == "density":
        estimate = estimate_density(model, system, point, mc, terms=terms)
    elif quantity == "rdm1":
        if task["point2"] is None:
            raise ConfigError("'rdm1' needs task.point2")
        estimate = estimate_rdm1(model, system, point, task["point2"], mc, terms=terms)
    elif quantity == "pair_density":
        if task["point2"] is None:
            raise ConfigError("'pair_density' needs task.point2")
        estimate = estimate_pair_density(model, system, point, task["point2"], mc, terms=terms)
    elif quantity == "on_top":
        estimate = estimate_on_top_density(model, system, point, mc, terms=terms)
    elif quantity == "norm":
        estimate = estimate_norm_squared(model, mc)
    else:
        raise ConfigError(f"unknown quantity {quantity!r}")
    results = {"quantity": quantity, "estimate": estimate.as_record()}
    if task["normalize"]:
        # unnormalized by policy; this optional pass divides by a separate
        # Monte-Carlo estimate of the squared norm, clearly labeled
        norm = estimate_norm_squared(model, replace(mc, seed=mc.seed + 1))
        results["normalization"] = norm.as_record()
        results["normalized_value"] = estimate.value / norm.value
    passed = estimate.value >= 0.0 if nonnegative else True
    return results, bool(passed)


def _run_density_profile(system, model, mc, task):
    direction = np.asarray(task["direction"], dtype=float)
    direction = direction / np.linalg.norm(direction)
    rows = []
    for index, radius in enumerate(task["radii"]):
        local = replace(mc, seed=mc.seed + index)
        estimate = estimate_density(
            model, system, float(radius) * direction, local, terms=task["terms"]
        )
        rows.append({"radius": float(radius), **estimate.as_record()})
    results = {"direction": [float(v) for v in direction], "rows": rows}
    return results, all(row["value"] >= 0.0 for row in rows)


def _run_density_derivatives(system, model, mc, task):
    table = smoothness_probe(
        model,
        system,
        task["point"],
        mc,
        max_order=int(task["max_order"]),
        base_step=float(task["base_step"]),
        axes=tuple(int(a) for a in task["axes"]),
        terms=task["terms"],
    )
    results = {"table": table.as_record()}
    passed = True
    if task["require_order"] is not None:
        floor = float(task["require_order"])
        passed = all(row.consistency_order >= floor for row in table.rows)
    if task["cusp_threshold"] is not None:
        passed = passed and abs(table.one_sided.mismatch) > float(task["cusp_threshold"])
    if task["gammas"] is not None:
        if task["R"] is None:
            raise ConfigError("chain-rule derivatives need task.R")
        n = system.n_electrons
        family = CutoffFamily(float(task["R"]), n)
        if task["selection"] is not None:
            selections = [_parse_selection(task["selection"], n)]
        else:
            selections = list(PairSet(n).selections())
        entries = []
        for gamma in task["gammas"]:
            gamma = tuple(int(g) for g in gamma)
            total, variance = 0.0, 0.0
            for selection in selections:
                est = estimate_density_derivative(
                    model, system, task["point"], gamma, selection, family, mc
                )
                total += est.value
                variance += est.std_error**2
            entries.append(
                {
                    "gamma": list(gamma),
                    "value": total,
                    "std_error": float(np.sqrt(variance)),
                    "selections": len(selections),
                }
            )
        results["chain_rule"] = entries
    return results, bool(passed)


def _run_density_decay(system, model, mc, task):
    fit = decay_fit(
        model,
        system,
        tuple(int(g) for g in task["gamma"]),
        [float(r) for r in task["radii"]],
        mc,
        direction=task["direction"],
        epsilon_tol=float(task["eps_tol"]),
        step=float(task["step"]),
        terms=task["terms"],
    )
    results = {"fit": fit.as_record()}
    passed = fit.bound_satisfied
    if task["expected_slope"] is not None:
        if task["slope_tol"] is None:
            raise ConfigError("'expected_slope' needs 'slope_tol'")
        passed = passed and abs(fit.slope - float(task["expected_slope"])) <= float(
            task["slope_tol"]
        )
    return results, bool(passed)


_HANDLERS = {
    "verify ansatz": _run_verify_ansatz,
    "verify pou": _run_verify_pou,
    "verify cluster": _run_verify_cluster,
    "verify transform": _run_verify_transform,
    "verify supports": _run_verify_supports,
    "density eval": _run_density_eval,
    "density profile": _run_density_profile,
    "density derivatives": _run_density_derivatives,
    "density decay": _run_density_decay,
}


def run(command, config_path, out_path, seed=None, samples=None, threads=None, csv_path=None):
    """Execute one subcommand; returns the process exit status."""
    try:
        config = load_config(config_path)
        system, model, mc, task, resolved = resolve_run(
            config, command, seed_override=seed, samples_override=samples,
            threads_override=threads,
        )
        digest = config_digest(resolved)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    report = {"command": command, "config_digest": digest, "parameters": resolved}
    try:
        results, passed = _HANDLERS[command](system, model, mc, task)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (EdensError, ValueError) as exc:
        report["results"] = {"error": str(exc)}
        report["pass"] = False
        write_report(report, out_path)
        return 2
    report["results"] = results
    report["pass"] = bool(passed)
    write_report(report, out_path)
    if csv_path is not None and command == "density profile":
        write_profile_csv(csv_path, results["rows"])
    return 0 if passed else 2


def _common_options(func):
    func = click.option("--config", "config_path", required=True,
                        type=click.Path(), help="TOML run configuration")(func)
    func = click.option("--out", "out_path", default=None, type=click.Path(),
                        help="report path (stdout when omitted)")(func)
    func = click.option("--seed", default=None, type=int, help="override mc.seed")(func)
    func = click.option("--samples", default=None, type=int, help="override mc.samples")(func)
    func = click.option("--threads", default=None, type=int,
                        help="shard workers, 0 = auto (never changes results)")(func)
    return func


@click.group()
def main():
    """Coulomb electron-density verification suites and estimators."""


@main.group()
def verify():
    """Property-verification suites."""


@main.group()
def density():
    """Density estimation and diagnostics."""


def _make_command(group, name, command):
    @_common_options
    def _cmd(config_path, out_path, seed, samples, threads, csv_path=None):
        sys.exit(run(command, config_path, out_path, seed, samples, threads, csv_path))

    _cmd.__name__ = name.replace(" ", "_")
    if command == "density profile":
        _cmd = click.option("--csv", "csv_path", default=None, type=click.Path(),
                            help="also write the profile as CSV")(_cmd)
    group.command(name)(_cmd)


for _name in ("ansatz", "pou", "cluster", "transform", "supports"):
    _make_command(verify, _name, f"verify {_name}")
for _name in ("eval", "profile", "derivatives", "decay"):
    _make_command(density, _name, f"density {_name}")


if __name__ == "__main__":
    main()
