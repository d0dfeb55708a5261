"""Acceptance gate: one test per criterion, one printed line per criterion.

Every stochastic computation is wrapped in a builder parameterized only
by the worker-thread count; the final criterion re-runs each builder
(on two worker threads) and demands byte-identical canonical records,
witnessing that results depend on seeds alone.
"""

import time
from contextlib import contextmanager
from itertools import chain, combinations

import numpy as np
import pytest
from scipy import integrate

from edens import (
    ClusterSelection,
    CorrelatedToy,
    CutoffFamily,
    HydrogenicProduct,
    MCSettings,
    MolecularSystem,
    PairSet,
    RegularizingFactors,
    ansatz_defect,
    build_frame,
    decay_fit,
    equivalence_class,
    estimate_clustered_density,
    estimate_density,
    estimate_density_derivative,
    fd_density_derivative,
    phi,
    potential,
    regularized_residual,
    schrodinger_residual,
    smoothness_probe,
    support_certificate,
)
from edens.reportio import canonical_json

_RECORDS = {}


@pytest.fixture
def announce(capsys):
    def _print(line):
        with capsys.disabled():
            print(line)

    return _print


@contextmanager
def criterion(announce, number, label, budget_seconds):
    start = time.monotonic()
    info = {}
    try:
        yield info
    except Exception:
        announce(f"[acceptance] criterion {number:2d} ({label}): FAIL")
        raise
    elapsed = time.monotonic() - start
    detail = info.get("detail", "")
    announce(
        f"[acceptance] criterion {number:2d} ({label}): PASS"
        f"{'  ' + detail if detail else ''}  [{elapsed:.1f}s / {budget_seconds}s]"
    )
    assert elapsed < budget_seconds


def _freeze(name, builder):
    record = builder(threads=1)
    _RECORDS[name] = (builder, canonical_json(record))
    return record


# -- criterion 1: the cusp factor's Laplacian matches the potential --------


def _build_ansatz(threads):
    del threads
    record = {}
    for n_electrons, n_nuclei in ((1, 1), (2, 1), (3, 1), (4, 1), (2, 2), (3, 2)):
        if n_nuclei == 1:
            system = MolecularSystem.atom(2.0, n_electrons)
        else:
            system = MolecularSystem([[0, 0, 0], [1.2, 0, 0]], [1.0, 2.0], n_electrons)
        factors = RegularizingFactors(system)
        rng = np.random.default_rng(1000 + 10 * n_electrons + n_nuclei)
        x = rng.normal(scale=1.5, size=(10000, n_electrons, 3))
        defect = np.abs(ansatz_defect(factors, x))
        scale = 1.0 + np.abs(potential(system, x))
        record[f"N{n_electrons}_L{n_nuclei}"] = float(np.max(defect / scale))
    return record


def test_criterion_01_ansatz_identity(announce):
    with criterion(announce, 1, "cusp-factor Laplacian equals potential", 5.0) as info:
        record = _freeze("ansatz", _build_ansatz)
        worst = max(record.values())
        assert worst <= 1e-10
        info["detail"] = f"max normalized defect {worst:.2e} over 6x10^4 configs"


# -- criterion 2: the selection weights sum to one --------------------------


def _build_pou(threads):
    del threads
    record = {}
    for n in (2, 3, 4):
        family = CutoffFamily(1.0, n)
        rng = np.random.default_rng(2000 + n)
        x = rng.normal(scale=0.45, size=(1000, n, 3))
        total = sum(phi(selection, family, x) for selection in PairSet(n).selections())
        record[f"N{n}"] = float(np.max(np.abs(total - 1.0)))
    return record


def test_criterion_02_partition_of_unity(announce):
    with criterion(announce, 2, "partition-of-unity completeness", 10.0) as info:
        record = _freeze("pou", _build_pou)
        worst = max(record.values())
        assert worst <= 1e-12
        info["detail"] = f"max |sum - 1| = {worst:.2e} at 10^3 configs, N in 2..4"


# -- criterion 3: cluster equals brute-force transitive closure -------------


def _closure(selection):
    n = selection.n_electrons
    adjacency = np.eye(n, dtype=int)
    for j, k in selection.pairs:
        adjacency[j, k] = adjacency[k, j] = 1
    reach = adjacency.copy()
    for _ in range(n):
        reach = ((reach @ adjacency) > 0).astype(int)
    return tuple(int(j) for j in np.nonzero(reach[0])[0])


def _build_cluster(threads):
    del threads
    mismatches = 0
    subsets = 0
    for selection in PairSet(5).selections():
        subsets += 1
        if equivalence_class(selection).cluster != _closure(selection):
            mismatches += 1
    chain_case = equivalence_class(ClusterSelection(3, frozenset({(0, 1), (1, 2)}))).cluster
    pair_case = equivalence_class(ClusterSelection(3, frozenset({(0, 1)}))).cluster
    return {
        "subsets": subsets,
        "mismatches": mismatches,
        "chain_case": list(chain_case),
        "pair_case": list(pair_case),
    }


def test_criterion_03_cluster_closure(announce):
    with criterion(announce, 3, "cluster closure vs brute force", 5.0) as info:
        record = _freeze("cluster", _build_cluster)
        assert record["subsets"] == 1024
        assert record["mismatches"] == 0
        assert record["chain_case"] == [0, 1, 2]  # chain joins all three
        assert record["pair_case"] == [0, 1]  # lone pair leaves the third out
        info["detail"] = "1024/1024 subsets match at N=5"


# -- criterion 4: sampled support certificates -------------------------------


def _build_supports(threads):
    del threads
    system = MolecularSystem.atom(3.0, 3)
    family = CutoffFamily(1.0, 3)
    certificates = []
    for index, selection in enumerate(PairSet(3).selections()):
        report = support_certificate(
            selection, family, system, sample_count=100000, seed=4000 + index
        )
        certificates.append(report.as_record())
    return {"certificates": certificates}


def test_criterion_04_support_certificates(announce):
    with criterion(announce, 4, "cluster support certificates", 60.0) as info:
        record = _freeze("supports", _build_supports)
        assert len(record["certificates"]) == 8
        for cert in record["certificates"]:
            assert cert["samples_tested"] == 100000
            assert cert["violations"] == 0
            assert cert["min_margins"]["nuclear"] > 0.25  # R/4
            if cert["min_margins"]["separation"] is not None:
                assert cert["min_margins"]["separation"] > 1.0 / 12.0  # R/(4N)
        info["detail"] = "8 selections x 10^5 samples, zero violations"


# -- criterion 5: frame correctness -----------------------------------------


def _build_frames(threads):
    del threads
    worst_orth = worst_round = worst_indep = 0.0
    frames = 0
    rng = np.random.default_rng(5000)
    for n in range(1, 7):
        x = rng.normal(size=(32, n, 3))
        for size in range(1, n + 1):
            for cluster in combinations(range(n), size):
                frames += 1
                frame = build_frame(n, cluster)
                full = frame.matrix()
                worst_orth = max(
                    worst_orth, float(np.max(np.abs(full @ full.T - np.eye(3 * n))))
                )
                xc, xr = frame.forward(x)
                worst_round = max(
                    worst_round, float(np.max(np.abs(frame.inverse(xc, xr) - x)))
                )
                if size >= 2:
                    j, k = cluster[0], cluster[1]
                    base = frame.inverse(np.zeros(3), xr)
                    moved = frame.inverse(rng.normal(size=3) * 4.0, xr)
                    drift = (moved[..., j, :] - moved[..., k, :]) - (
                        base[..., j, :] - base[..., k, :]
                    )
                    worst_indep = max(worst_indep, float(np.max(np.abs(drift))))
    return {
        "frames": frames,
        "max_orthogonality_error": worst_orth,
        "max_roundtrip_error": worst_round,
        "max_cluster_difference_drift": worst_indep,
    }


def test_criterion_05_frame_correctness(announce):
    with criterion(announce, 5, "cluster frame correctness", 5.0) as info:
        record = _freeze("frames", _build_frames)
        assert record["frames"] == 120
        assert record["max_orthogonality_error"] < 1e-12
        assert record["max_roundtrip_error"] < 1e-12
        assert record["max_cluster_difference_drift"] < 1e-12
        info["detail"] = (
            f"120 frames, worst error "
            f"{max(record['max_orthogonality_error'], record['max_roundtrip_error']):.1e}"
        )


# -- criterion 6: eigen machinery on the solvable one-electron atom ----------


def _build_eigen(threads):
    del threads
    system = MolecularSystem.atom(1.0, 1)
    factors = RegularizingFactors(system)
    model = HydrogenicProduct(1, 0.5, charge=1.0)
    energy = model.energy
    rng = np.random.default_rng(6000)
    direction = rng.normal(size=(100, 3))
    direction /= np.linalg.norm(direction, axis=-1, keepdims=True)
    radii = rng.uniform(0.15, 4.0, size=100)
    worst_schrodinger = worst_regularized = 0.0
    for r, u in zip(radii, direction):
        x = (r * u).reshape(1, 3)
        worst_schrodinger = max(
            worst_schrodinger, float(abs(schrodinger_residual(system, model, energy, x, step=1e-4)))
        )
        worst_regularized = max(
            worst_regularized, float(abs(regularized_residual(factors, model, energy, x, step=1e-4)))
        )
    return {
        "energy": float(energy),
        "max_schrodinger_residual": worst_schrodinger,
        "max_regularized_residual": worst_regularized,
    }


def test_criterion_06_eigen_machinery(announce):
    with criterion(announce, 6, "one-electron eigen machinery", 5.0) as info:
        record = _freeze("eigen", _build_eigen)
        assert record["energy"] == -0.25
        assert record["max_schrodinger_residual"] < 1e-5
        assert record["max_regularized_residual"] < 1e-5
        info["detail"] = (
            f"residuals {record['max_schrodinger_residual']:.1e} / "
            f"{record['max_regularized_residual']:.1e} at 100 points"
        )


# -- criterion 7: Monte-Carlo density against the radial quadrature oracle ---


def _build_density_oracle(threads):
    system = MolecularSystem.atom(2.0, 2)
    model = HydrogenicProduct(2, 1.0)
    norm, abserr = integrate.quad(
        lambda r: np.exp(-2.0 * r) * 4.0 * np.pi * r**2, 0.0, np.inf
    )
    rows = []
    for index, radius in enumerate((0.5, 1.0, 2.0)):
        mc = MCSettings(samples=10**6, seed=7000 + index, threads=threads)
        est = estimate_density(model, system, [radius, 0.0, 0.0], mc)
        rows.append(
            {
                "radius": radius,
                "value": est.value,
                "std_error": est.std_error,
                "oracle": float(np.exp(-2.0 * radius) * norm),
                "oracle_error": float(np.exp(-2.0 * radius) * abserr),
            }
        )
    return {"orbital_norm": float(norm), "rows": rows}


def test_criterion_07_density_closed_form(announce):
    with criterion(announce, 7, "density vs radial quadrature oracle", 60.0) as info:
        record = _freeze("density_oracle", _build_density_oracle)
        assert record["orbital_norm"] == pytest.approx(np.pi, abs=1e-10)
        rels = []
        for row in record["rows"]:
            gap = abs(row["value"] - row["oracle"])
            assert gap <= 3.0 * row["std_error"] + 3.0 * row["oracle_error"]
            assert gap <= 0.01 * row["oracle"]
            rels.append(gap / row["oracle"])
        info["detail"] = f"10^6 samples, worst relative gap {max(rels):.1e}"


# -- criterion 8: clustered decomposition sums back to the density -----------


def _build_decomposition(threads):
    system = MolecularSystem.atom(3.0, 3)
    model = HydrogenicProduct(3, 1.0)
    family = CutoffFamily(1.0, 3)
    points = (
        (1.2, 0.0, 0.0),
        (0.0, 1.5, 0.0),
        (1.0, 1.0, 0.3),
        (2.0, 0.0, 0.0),
        (-1.1, 0.8, -0.6),
    )
    rows = []
    for p_index, point in enumerate(points):
        mc = MCSettings(samples=150000, seed=8000 + p_index, threads=threads)
        total, variance = 0.0, 0.0
        for selection in PairSet(3).selections():
            est = estimate_clustered_density(model, system, point, selection, family, mc)
            total += est.value
            variance += est.std_error**2
        direct = estimate_density(model, system, point, mc)
        rows.append(
            {
                "point": list(point),
                "clustered_sum": total,
                "clustered_sigma": float(np.sqrt(variance)),
                "direct": direct.value,
                "direct_sigma": direct.std_error,
            }
        )
    return {"rows": rows}


def test_criterion_08_clustered_decomposition(announce):
    with criterion(announce, 8, "clustered decomposition", 120.0) as info:
        record = _freeze("decomposition", _build_decomposition)
        pulls = []
        for row in record["rows"]:
            sigma = float(np.hypot(row["clustered_sigma"], row["direct_sigma"]))
            gap = abs(row["clustered_sum"] - row["direct"])
            assert gap <= 3.0 * sigma
            pulls.append(gap / sigma if sigma > 0 else 0.0)
        info["detail"] = f"5 points, worst pull {max(pulls):.2f} sigma"


# -- criterion 9: chain-rule derivative estimator vs finite differences ------


def _build_chain_rule(threads):
    system = MolecularSystem.atom(2.0, 2)
    model = HydrogenicProduct(2, 1.0)
    family = CutoffFamily(0.8, 2)
    point = (1.0, 0.0, 0.0)
    rows = []
    for g_index, gamma in enumerate(((1, 0, 0), (2, 0, 0), (1, 1, 0))):
        mc = MCSettings(samples=400000, seed=9000 + g_index, threads=threads)
        total, variance = 0.0, 0.0
        for selection in PairSet(2).selections():
            est = estimate_density_derivative(model, system, point, gamma, selection, family, mc)
            total += est.value
            variance += est.std_error**2
        oracle = fd_density_derivative(model, system, point, gamma, mc, step=1e-2)
        rows.append(
            {
                "gamma": list(gamma),
                "chain_rule": total,
                "chain_sigma": float(np.sqrt(variance)),
                "fd": oracle.value,
                "fd_sigma": oracle.std_error,
            }
        )
    return {"rows": rows}


def test_criterion_09_chain_rule_derivatives(announce):
    with criterion(announce, 9, "chain-rule derivative estimator", 120.0) as info:
        record = _freeze("chain_rule", _build_chain_rule)
        for row in record["rows"]:
            sigma = float(np.hypot(row["chain_sigma"], row["fd_sigma"]))
            gap = abs(row["chain_rule"] - row["fd"])
            assert gap <= max(3.0 * sigma, 1e-3 * abs(row["fd"]))
        info["detail"] = "gamma orders 1 and 2 match FD with common random numbers"


# -- criterion 10: smoothness witness and cusp detection ---------------------


def _build_smoothness(threads):
    system = MolecularSystem.atom(4.0, 2)
    toy = CorrelatedToy(2, 2.0, 0.25)
    mc = MCSettings(samples=400000, seed=10000, threads=threads)
    away = smoothness_probe(toy, system, [1.0, 0.0, 0.0], mc, max_order=3, axes=(0,))
    at_nucleus = smoothness_probe(toy, system, [0.0, 0.0, 0.0], mc, max_order=1, axes=(0,))
    return {
        "away": away.as_record(),
        "at_nucleus": {
            "value": at_nucleus.value.as_record(),
            "one_sided": at_nucleus.one_sided.as_record(),
        },
    }


def test_criterion_10_smoothness_witness(announce):
    with criterion(announce, 10, "smoothness witness and cusp flag", 120.0) as info:
        record = _freeze("smoothness", _build_smoothness)
        orders = [row["consistency_order"] for row in record["away"]["rows"]]
        assert len(orders) == 3
        assert all(order >= 1.5 for order in orders)
        rho0 = record["at_nucleus"]["value"]["value"]
        mismatch = abs(record["at_nucleus"]["one_sided"]["mismatch"])
        assert mismatch > 0.1 * 2.0 * rho0  # exponent a = 2
        info["detail"] = (
            f"orders {', '.join(f'{o:.2f}' for o in orders)}; "
            f"cusp mismatch {mismatch:.2f} vs threshold {0.2 * rho0:.3f}"
        )


# -- criterion 11: exponential decay of density derivatives ------------------


def _build_decay(threads):
    system = MolecularSystem.atom(2.0, 2)
    model = HydrogenicProduct(2, 1.0)
    radii = [2.0, 2.75, 3.5, 4.25, 5.0]
    rows = []
    for g_index, gamma in enumerate(((0, 0, 0), (1, 0, 0))):
        mc = MCSettings(samples=100000, seed=11000 + 100 * g_index, threads=threads)
        fit = decay_fit(model, system, gamma, radii, mc, epsilon_tol=0.1)
        rows.append(fit.as_record())
    return {"rows": rows}


def test_criterion_11_derivative_decay(announce):
    with criterion(announce, 11, "derivative decay rate", 120.0) as info:
        record = _freeze("decay", _build_decay)
        zeroth, first = record["rows"]
        assert zeroth["slope"] == pytest.approx(-2.0, abs=0.05)
        assert first["slope"] == pytest.approx(-2.0, abs=0.1)
        for row in record["rows"]:
            assert row["bound_satisfied"]
            assert row["slope"] <= row["rate_bound"]
        info["detail"] = f"slopes {zeroth['slope']:.4f} and {first['slope']:.4f}"


# -- criterion 12: byte-identical determinism --------------------------------


def test_criterion_12_determinism(announce):
    with criterion(announce, 12, "byte-identical determinism", 600.0) as info:
        assert len(_RECORDS) == 11, "all prior criteria must have run"
        for name, (builder, frozen) in _RECORDS.items():
            rerun = canonical_json(builder(threads=2))
            assert rerun == frozen, f"criterion record {name!r} is not reproducible"
        info["detail"] = f"{len(_RECORDS)} records re-run on 2 threads, all byte-identical"
