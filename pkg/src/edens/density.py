"""Monte-Carlo reduced densities and their smoothness/decay diagnostics.

All densities are *unnormalized* functionals of the model wavefunction
as given (no attempt is made to fix ||psi||); ``estimate_norm_squared``
provides the normalization integral separately for callers that want
normalized values.

Two restriction modes exist everywhere: ``terms="first"`` integrates a
single pinned-electron term (electron 0 at the probe point), while
``terms="all"`` sums over every choice of pinned electron(s).  For the
permutation-symmetric models in this package the full sum is exactly
the term count times the first term.

The clustered estimator integrates ``psi^2 * phi_I`` through the
orthogonal cluster frame: sampling the complement coordinates x' and
solving the pinning constraint for the cluster coordinate,

    rho_I(x) = N1^(3/2) * integral (psi^2 phi_I)(inverse(sqrt(N1)(x - t0 x'), x')) dx',

with N1 the cluster size (the constant Jacobian keeps the decomposition
``sum_I rho_I = rho`` exact).  Its derivative form pushes x-derivatives
onto the cluster coordinate, where they hit only pair distances that
straddle the cluster boundary; those stay bounded away from the
singular set on the support of phi_I, which is what makes the
differentiated integrand well-behaved.  Analytic model derivatives are
hard-coded to order 2; order-3 probes use finite differences of the
Monte-Carlo estimate with common random numbers.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from itertools import permutations

import numpy as np

from . import fd
from .cluster import all_pairs, equivalence_class
from .errors import SignalBelowNoise, TooFewElectrons, UnsupportedOrder
from .mc import exponential_density, exponential_positions, sharded_mean
from .transform import build_frame

__all__ = [
    "DensityEstimate",
    "estimate_density",
    "estimate_rdm1",
    "estimate_pair_density",
    "estimate_on_top_density",
    "estimate_norm_squared",
    "estimate_clustered_density",
    "estimate_density_derivative",
    "fd_density_derivative",
    "derivative_prefactor",
    "smoothness_probe",
    "decay_fit",
    "DerivativeTable",
    "LadderRow",
    "OneSidedDifference",
    "DecayFit",
]


@dataclass(frozen=True)
class DensityEstimate:
    """A Monte-Carlo value with its standard error.

    ``samples == 0`` marks variance-free evaluations (nothing was left
    to integrate); reproducibility is exact: the same seed and settings
    give a bit-identical value regardless of thread count.
    """

    value: float
    std_error: float
    samples: int
    seed: int

    def as_record(self):
        return {
            "value": self.value,
            "std_error": self.std_error,
            "samples": self.samples,
            "seed": self.seed,
        }


def _as_point(x):
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape != (3,):
        raise ValueError(f"expected a point in R^3, got shape {x.shape}")
    return x


def _check_counts(model, system):
    if model.n_electrons != system.n_electrons:
        raise ValueError(
            f"model has {model.n_electrons} electrons but system has {system.n_electrons}"
        )


def _plain_rate(model, settings):
    base = settings.mu if settings.mu is not None else model.decay.rate
    return base / settings.proposal_scale


def _transformed_rate(model, settings, blocks):
    # certificate envelope exp(-rate*||x'||) versus the product proposal:
    # sum_i |x'_i| <= sqrt(blocks) * ||x'||, so divide the default rate to
    # keep the proposal tails at least as fat as the integrand
    if settings.mu is not None:
        base = settings.mu
    else:
        base = model.decay.rate / np.sqrt(max(blocks, 1))
    return base / settings.proposal_scale


def _term_slots(n, n_pins, terms):
    if terms == "first":
        return (tuple(range(n_pins)),)
    if terms == "all":
        return tuple(permutations(range(n), n_pins))
    raise ValueError(f"terms must be 'first' or 'all', got {terms!r}")


def _splice(free_positions, pin_values, slots_list, n):
    """Insert pins into the given slots, free positions into the rest.

    Returns configurations of shape (m, n_terms, n, 3).
    """
    m = free_positions.shape[0]
    out = np.empty((m, len(slots_list), n, 3))
    for t, slots in enumerate(slots_list):
        taken = set(slots)
        free_slots = [j for j in range(n) if j not in taken]
        for slot, value in zip(slots, pin_values):
            out[:, t, slot, :] = value
        out[:, t, free_slots, :] = free_positions
    return out


def _pinned_product(model, system, pins_a, pins_b, settings, terms):
    """Sum over terms of ``integral psi(splice_a) psi(splice_b) dz``."""
    _check_counts(model, system)
    n = system.n_electrons
    n_pins = len(pins_a)
    slots_list = _term_slots(n, n_pins, terms)
    n_free = n - n_pins
    identical = all(a is b or np.array_equal(a, b) for a, b in zip(pins_a, pins_b))

    if n_free == 0:
        empty = np.empty((1, 0, 3))
        va = model(_splice(empty, pins_a, slots_list, n))
        vb = va if identical else model(_splice(empty, pins_b, slots_list, n))
        return DensityEstimate(float((va * vb).sum()), 0.0, 0, settings.seed)

    rate = _plain_rate(model, settings)

    def draw(rng, count):
        z = exponential_positions(rng, count, n_free, rate)
        weight = 1.0 / exponential_density(z, rate)
        va = model(_splice(z, pins_a, slots_list, n))
        vb = va if identical else model(_splice(z, pins_b, slots_list, n))
        return (va * vb).sum(axis=-1) * weight

    value, std_error = sharded_mean(draw, settings)
    return DensityEstimate(value, std_error, settings.samples, settings.seed)


def estimate_density(model, system, x, settings, terms="first"):
    """The electron density at ``x``: ``integral psi^2(x, z) dz`` (first term).

    ``terms="all"`` sums over every pinned electron.  One-electron
    systems need no integration and come back exact.
    """
    x = _as_point(x)
    return _pinned_product(model, system, (x,), (x,), settings, terms)


def estimate_rdm1(model, system, x, x_other, settings, terms="first"):
    """One-electron density matrix entry ``integral psi(x, z) psi(x', z) dz``."""
    return _pinned_product(model, system, (_as_point(x),), (_as_point(x_other),), settings, terms)


def estimate_pair_density(model, system, x, x_other, settings, terms="first"):
    """Two-electron density ``integral psi^2(x, x', z) dz``; needs N >= 2."""
    _check_counts(model, system)
    if system.n_electrons < 2:
        raise TooFewElectrons("the pair density needs at least two electrons")
    pins = (_as_point(x), _as_point(x_other))
    return _pinned_product(model, system, pins, pins, settings, terms)


def estimate_on_top_density(model, system, x, settings, terms="first"):
    """The pair density on its diagonal; identical code path to x' = x."""
    return estimate_pair_density(model, system, x, x, settings, terms)


def estimate_norm_squared(model, settings):
    """Monte-Carlo estimate of ``integral psi^2`` over all 3N coordinates."""
    rate = _plain_rate(model, settings)
    n = model.n_electrons

    def draw(rng, count):
        z = exponential_positions(rng, count, n, rate)
        values = model(z)
        return values * values / exponential_density(z, rate)

    value, std_error = sharded_mean(draw, settings)
    return DensityEstimate(value, std_error, settings.samples, settings.seed)


# -- clustered estimators -----------------------------------------------


def derivative_prefactor(cluster_size, order):
    """Constant in front of the clustered integral: N1^(3/2) * sqrt(N1)^order.

    Built by repeated multiplication so each derivative order scales the
    previous prefactor by exactly sqrt(N1).
    """
    root = float(np.sqrt(cluster_size))
    value = float(cluster_size) * root
    for _ in range(order):
        value *= root
    return value


def _gamma_axes(gamma):
    gamma = tuple(int(g) for g in gamma)
    if len(gamma) != 3 or any(g < 0 for g in gamma):
        raise ValueError(f"gamma must be a length-3 multi-index, got {gamma!r}")
    axes = []
    for axis, g in enumerate(gamma):
        axes.extend([axis] * g)
    return tuple(axes)


def _oriented_straddling(selection, partition):
    """Boundary-crossing pairs, oriented cluster-member first.

    When the partition is the equivalence class of the selection these
    are exactly the complement (J) pairs with one endpoint in each part;
    selected (I) pairs can never straddle a connected component.
    """
    inside = set(partition.cluster)
    out = []
    for j, k in all_pairs(selection.n_electrons):
        if (j in inside) != (k in inside):
            out.append((j, k) if j in inside else (k, j))
    return tuple(out)


def _static_weight(selection, family, straddle, configs):
    """Product of the cutoff factors that are constant along cluster shifts."""
    n = selection.n_electrons
    crossing = {tuple(sorted(p)) for p in straddle}
    value = np.ones(configs.shape[:-2])
    for j, k in all_pairs(n):
        if (j, k) in crossing:
            continue
        dist = np.linalg.norm(configs[..., j, :] - configs[..., k, :], axis=-1)
        c1 = family.chi1(dist)
        value = value * (c1 if (j, k) in selection.pairs else 1.0 - c1)
    return value


def _cluster_weight_derivatives(selection, family, straddle, configs, cluster_size, order):
    """phi_I and its cluster-shift derivatives at the given configurations.

    Returns (phi, dphi, d2phi) with shapes (m,), (m, 3), (m, 3, 3);
    higher entries are None when not requested.  Only chi2 factors of
    boundary-crossing pairs vary under a cluster shift, so the product
    rule runs over those alone (leave-one-out products, no division).
    """
    static = _static_weight(selection, family, straddle, configs)
    m = configs.shape[0]
    if not straddle:
        phi_val = static
        dphi = np.zeros((m, 3)) if order >= 1 else None
        d2phi = np.zeros((m, 3, 3)) if order >= 2 else None
        return phi_val, dphi, d2phi

    scale = 1.0 / np.sqrt(cluster_size)
    values, first, second = [], [], []
    for j, k in straddle:
        u = configs[..., j, :] - configs[..., k, :]
        r = np.linalg.norm(u, axis=-1)
        # coincident straddling pairs sit on the chi2 plateau (factor and
        # derivatives all 0); the guard only avoids 0/0 warnings there
        r = np.maximum(r, 1e-300)
        unit = u / r[..., None]
        c2 = 1.0 - family.chi1(r)
        values.append(c2)
        if order >= 1:
            cp = family.chi2_prime(r)
            dr = scale * unit
            first.append(cp[..., None] * dr)
        if order >= 2:
            cpp = family.chi2_second(r)
            d2r = (np.eye(3) - unit[..., :, None] * unit[..., None, :]) / (
                r[..., None, None] * cluster_size
            )
            second.append(
                cpp[..., None, None] * dr[..., :, None] * dr[..., None, :]
                + cp[..., None, None] * d2r
            )

    stack = np.stack(values)
    phi_val = static * stack.prod(axis=0)
    k_count = len(values)

    def product_excluding(skip):
        out = np.ones(m)
        for idx in range(k_count):
            if idx not in skip:
                out = out * stack[idx]
        return out

    dphi = d2phi = None
    if order >= 1:
        dphi = np.zeros((m, 3))
        for s in range(k_count):
            dphi += first[s] * product_excluding({s})[..., None]
        dphi *= static[..., None]
    if order >= 2:
        d2phi = np.zeros((m, 3, 3))
        for s in range(k_count):
            d2phi += second[s] * product_excluding({s})[..., None, None]
            for t in range(k_count):
                if t == s:
                    continue
                d2phi += (
                    first[s][..., :, None]
                    * first[t][..., None, :]
                    * product_excluding({s, t})[..., None, None]
                )
        d2phi *= static[..., None, None]
    return phi_val, dphi, d2phi


def _cluster_directions(n, cluster):
    """Unit-strength cluster shift fields v_axis, shape (3, n, 3)."""
    v = np.zeros((3, n, 3))
    members = list(cluster)
    for axis in range(3):
        v[axis, members, axis] = 1.0 / np.sqrt(len(members))
    return v


def estimate_density_derivative(model, system, x, gamma, selection, family, settings):
    """Chain-rule Monte-Carlo estimate of ``d^gamma rho_I`` at ``x``.

    Pushes the x-derivative onto the cluster coordinate of the frame
    built from ``equivalence_class(selection)``; supports |gamma| <= 2
    (the analytic model derivative tables stop there).  ``gamma = 0``
    is exactly the clustered density estimate.
    """
    _check_counts(model, system)
    if selection.n_electrons != system.n_electrons or family.n_electrons != system.n_electrons:
        raise ValueError("selection/family electron counts must match the system")
    x = _as_point(x)
    axes = _gamma_axes(gamma)
    order = len(axes)
    if order > 2:
        raise UnsupportedOrder(
            f"analytic derivatives are tabulated up to order 2, got |gamma| = {order}"
        )
    if family.outer_radius <= 0.0:
        raise ValueError("cutoff family needs a positive outer radius")
    clearance = np.linalg.norm(x - system.nuclei_positions, axis=-1).min()
    if clearance <= family.outer_radius:
        raise ValueError(
            f"probe point must stay outside every nuclear ball of radius "
            f"{family.outer_radius} (clearance {clearance:.6g})"
        )

    n = system.n_electrons
    partition = equivalence_class(selection)
    frame = build_frame(n, partition.cluster)
    n1 = frame.cluster_size
    straddle = _oriented_straddling(selection, partition)
    directions = _cluster_directions(n, partition.cluster)
    prefactor = derivative_prefactor(n1, order)
    members = list(partition.cluster)

    if n == 1:
        # no coordinates left to integrate: rho_I(x) = psi(x)^2 exactly
        config = x.reshape(1, 1, 3)
        if order == 0:
            return DensityEstimate(float(model(config)[0] ** 2), 0.0, 0, settings.seed)
        psi = model(config)
        if order == 1:
            dpsi = (model.gradient(config)[:, members, axes[0]]).sum(axis=-1) / np.sqrt(n1)
            return DensityEstimate(float(2.0 * psi[0] * dpsi[0]), 0.0, 0, settings.seed)
        dpsi_a = (model.gradient(config)[:, members, axes[0]]).sum(axis=-1) / np.sqrt(n1)
        dpsi_b = (model.gradient(config)[:, members, axes[1]]).sum(axis=-1) / np.sqrt(n1)
        d2psi = model.directional_second(config, directions[axes[0]], directions[axes[1]])
        value = 2.0 * (dpsi_a[0] * dpsi_b[0] + psi[0] * d2psi[0])
        return DensityEstimate(float(value), 0.0, 0, settings.seed)

    rate = _transformed_rate(model, settings, n - 1)

    def draw(rng, count):
        z = exponential_positions(rng, count, n - 1, rate)
        weight = 1.0 / exponential_density(z, rate)
        flat = z.reshape(count, 3 * (n - 1))
        x_cluster = np.sqrt(n1) * (x - frame.electron0_offset(flat))
        configs = frame.inverse(x_cluster, flat)
        phi_val, dphi, d2phi = _cluster_weight_derivatives(
            selection, family, straddle, configs, n1, order
        )
        psi = model(configs)
        if order == 0:
            g = psi * psi * phi_val
        else:
            grad = model.gradient(configs)
            dpsi_a = grad[..., members, axes[0]].sum(axis=-1) / np.sqrt(n1)
            if order == 1:
                g = 2.0 * psi * dpsi_a * phi_val + psi * psi * dphi[..., axes[0]]
            else:
                dpsi_b = grad[..., members, axes[1]].sum(axis=-1) / np.sqrt(n1)
                d2psi = model.directional_second(
                    configs, directions[axes[0]], directions[axes[1]]
                )
                g = (
                    2.0 * (dpsi_a * dpsi_b + psi * d2psi) * phi_val
                    + 2.0 * psi * dpsi_a * dphi[..., axes[1]]
                    + 2.0 * psi * dpsi_b * dphi[..., axes[0]]
                    + psi * psi * d2phi[..., axes[0], axes[1]]
                )
        return prefactor * g * weight

    value, std_error = sharded_mean(draw, settings)
    return DensityEstimate(value, std_error, settings.samples, settings.seed)


def estimate_clustered_density(model, system, x, selection, family, settings):
    """The selection's share rho_I of the density; gamma = 0 derivative path."""
    return estimate_density_derivative(
        model, system, x, (0, 0, 0), selection, family, settings
    )


# -- finite differences of the Monte-Carlo density ------------------------


def fd_density_derivative(model, system, x, gamma, settings, step, terms="first"):
    """Finite-difference ``d^gamma rho`` with common random numbers.

    Applies the tensor-product central stencil to the per-sample pinned
    integrand, so every stencil point sees the same draws and the
    difference quotient is averaged as a single Monte-Carlo quantity.
    Supports per-axis orders up to 3.
    """
    _check_counts(model, system)
    x = _as_point(x)
    axes = _gamma_axes(gamma)
    order = len(axes)
    if step <= 0.0:
        raise ValueError("step must be positive")
    offsets, coeffs = fd.tensor_stencil(gamma)
    points = x + step * offsets
    n = system.n_electrons
    slots_list = _term_slots(n, 1, terms)
    n_free = n - 1

    if n_free == 0:
        values = np.array(
            [float((model(_splice(np.empty((1, 0, 3)), (p,), slots_list, n)) ** 2).sum()) for p in points]
        )
        return DensityEstimate(float(values @ coeffs / step**order), 0.0, 0, settings.seed)

    rate = _plain_rate(model, settings)

    def draw(rng, count):
        z = exponential_positions(rng, count, n_free, rate)
        weight = 1.0 / exponential_density(z, rate)
        per_point = np.empty((count, len(points)))
        for idx, point in enumerate(points):
            vals = model(_splice(z, (point,), slots_list, n))
            per_point[:, idx] = (vals * vals).sum(axis=-1)
        return (per_point @ coeffs) / step**order * weight

    value, std_error = sharded_mean(draw, settings)
    return DensityEstimate(value, std_error, settings.samples, settings.seed)


# -- smoothness probe ------------------------------------------------------


@dataclass(frozen=True)
class LadderRow:
    """One derivative's step ladder with its Richardson consistency order."""

    axis: int
    order: int
    steps: tuple
    estimates: tuple
    std_errors: tuple
    richardson: tuple
    consistency_order: float
    smooth_consistent: bool

    def as_record(self):
        return {
            "axis": self.axis,
            "order": self.order,
            "steps": list(self.steps),
            "estimates": list(self.estimates),
            "std_errors": list(self.std_errors),
            "richardson": list(self.richardson),
            "consistency_order": self.consistency_order,
            "smooth_consistent": self.smooth_consistent,
        }


@dataclass(frozen=True)
class OneSidedDifference:
    """Forward/backward radial derivatives at the probe point."""

    direction: tuple
    step: float
    forward: float
    backward: float
    mismatch: float
    mismatch_std_error: float

    def as_record(self):
        return {
            "direction": list(self.direction),
            "step": self.step,
            "forward": self.forward,
            "backward": self.backward,
            "mismatch": self.mismatch,
            "mismatch_std_error": self.mismatch_std_error,
        }


@dataclass(frozen=True)
class DerivativeTable:
    """Smoothness diagnostics of the density at one point."""

    point: tuple
    value: DensityEstimate
    rows: tuple
    one_sided: OneSidedDifference
    base_step: float

    def as_record(self):
        return {
            "point": list(self.point),
            "value": self.value.as_record(),
            "rows": [row.as_record() for row in self.rows],
            "one_sided": self.one_sided.as_record(),
            "base_step": self.base_step,
        }


# a ladder consistency order at or above this marks the derivative as
# indistinguishable from a smooth function at the probed resolution
SMOOTH_ORDER_THRESHOLD = 1.5


def _one_sided_probe(model, system, x, settings, step, terms):
    n = system.n_electrons
    slots_list = _term_slots(n, 1, terms)
    radius = np.linalg.norm(x)
    direction = x / radius if radius > 0.0 else np.array([1.0, 0.0, 0.0])
    points = np.stack([x + step * direction, x, x - step * direction])
    n_free = n - 1
    rate = _plain_rate(model, settings)

    def draw_quantity(combine):
        def draw(rng, count):
            z = exponential_positions(rng, count, n_free, rate)
            weight = 1.0 / exponential_density(z, rate)
            per_point = np.empty((count, 3))
            for idx, point in enumerate(points):
                vals = model(_splice(z, (point,), slots_list, n))
                per_point[:, idx] = (vals * vals).sum(axis=-1)
            return combine(per_point) * weight

        return sharded_mean(draw, settings)

    forward, _ = draw_quantity(lambda p: (p[:, 0] - p[:, 1]) / step)
    backward, _ = draw_quantity(lambda p: (p[:, 1] - p[:, 2]) / step)
    mismatch, mismatch_se = draw_quantity(lambda p: (p[:, 0] - 2.0 * p[:, 1] + p[:, 2]) / step)
    return OneSidedDifference(
        direction=tuple(direction),
        step=step,
        forward=forward,
        backward=backward,
        mismatch=mismatch,
        mismatch_std_error=mismatch_se,
    )


def smoothness_probe(
    model,
    system,
    x,
    settings,
    max_order=3,
    base_step=0.1,
    axes=(0, 1, 2),
    terms="first",
):
    """Finite-difference derivative ladders of the density at ``x``.

    For each axis and derivative order the stencil is evaluated at
    steps (h, h/2, h/4) on common random numbers; the observed
    convergence order ``log2(|D_h - D_{h/2}| / |D_{h/2} - D_{h/4}|)``
    sits near 2 where the density is smooth and collapses at a kink.
    The one-sided radial difference detects the nuclear cusp directly.
    """
    x = _as_point(x)
    value = estimate_density(model, system, x, settings, terms=terms)
    rows = []
    for axis in axes:
        for order in range(1, max_order + 1):
            gamma = tuple(order if a == axis else 0 for a in range(3))
            steps = (base_step, base_step / 2.0, base_step / 4.0)
            ests = [
                fd_density_derivative(model, system, x, gamma, settings, step, terms=terms)
                for step in steps
            ]
            d01 = ests[0].value - ests[1].value
            d12 = ests[1].value - ests[2].value
            if d12 == 0.0:
                consistency = np.inf if d01 == 0.0 else 0.0
            else:
                ratio = abs(d01) / abs(d12)
                consistency = float(np.log2(ratio)) if ratio > 0.0 else -np.inf
            richardson = (
                (4.0 * ests[1].value - ests[0].value) / 3.0,
                (4.0 * ests[2].value - ests[1].value) / 3.0,
            )
            rows.append(
                LadderRow(
                    axis=axis,
                    order=order,
                    steps=steps,
                    estimates=tuple(e.value for e in ests),
                    std_errors=tuple(e.std_error for e in ests),
                    richardson=richardson,
                    consistency_order=consistency,
                    smooth_consistent=bool(consistency >= SMOOTH_ORDER_THRESHOLD),
                )
            )
    one_sided = _one_sided_probe(model, system, x, settings, base_step / 2.0, terms)
    return DerivativeTable(
        point=tuple(x),
        value=value,
        rows=tuple(rows),
        one_sided=one_sided,
        base_step=base_step,
    )


# -- exponential decay fit -------------------------------------------------


@dataclass(frozen=True)
class DecayFit:
    """Log-linear fit of |d^gamma rho| against the probe radius."""

    gamma: tuple
    radii: tuple
    values: tuple
    std_errors: tuple
    slope: float
    intercept: float
    rate_bound: float
    bound_satisfied: bool
    direction: tuple

    def as_record(self):
        return {
            "gamma": list(self.gamma),
            "radii": list(self.radii),
            "values": list(self.values),
            "std_errors": list(self.std_errors),
            "slope": self.slope,
            "intercept": self.intercept,
            "rate_bound": self.rate_bound,
            "bound_satisfied": self.bound_satisfied,
            "direction": list(self.direction),
        }


def decay_fit(
    model,
    system,
    gamma,
    radii,
    settings,
    direction=(1.0, 0.0, 0.0),
    epsilon_tol=0.1,
    step=0.01,
    noise_factor=3.0,
    terms="first",
):
    """Fit the exponential falloff rate of ``|d^gamma rho|`` along a ray.

    All radii must exceed ``max_l |R_l| + 1`` (the regime where the
    derivative decay bound applies).  Raises
    :class:`SignalBelowNoise` when any probed value is within
    ``noise_factor`` standard errors of zero; otherwise returns the
    least-squares slope of ``log |d^gamma rho|`` versus radius together
    with the one-sided check ``slope <= -(rate - epsilon_tol)`` against
    the model's certified decay rate.
    """
    _check_counts(model, system)
    gamma = tuple(int(g) for g in gamma)
    order = len(_gamma_axes(gamma))
    radii = tuple(float(r) for r in radii)
    if len(radii) < 2:
        raise ValueError("need at least two radii to fit a slope")
    threshold = float(np.linalg.norm(system.nuclei_positions, axis=-1).max()) + 1.0
    if min(radii) <= threshold:
        raise ValueError(
            f"all radii must exceed max nuclear radius + 1 = {threshold:.6g}, "
            f"got minimum {min(radii):.6g}"
        )
    unit = np.asarray(direction, dtype=float)
    unit = unit / np.linalg.norm(unit)

    values, errors = [], []
    for index, radius in enumerate(radii):
        local = dataclasses.replace(settings, seed=settings.seed + index)
        point = radius * unit
        if order == 0:
            est = estimate_density(model, system, point, local, terms=terms)
        else:
            est = fd_density_derivative(model, system, point, gamma, local, step, terms=terms)
        if abs(est.value) <= noise_factor * est.std_error or est.value == 0.0:
            raise SignalBelowNoise(
                f"|d^gamma rho| = {est.value:.3e} +/- {est.std_error:.3e} at radius "
                f"{radius:.6g} is not resolved"
            )
        values.append(est.value)
        errors.append(est.std_error)

    slope, intercept = np.polyfit(radii, np.log(np.abs(values)), 1)
    rate_bound = -(model.decay.rate - epsilon_tol)
    return DecayFit(
        gamma=gamma,
        radii=radii,
        values=tuple(values),
        std_errors=tuple(errors),
        slope=float(slope),
        intercept=float(intercept),
        rate_bound=float(rate_bound),
        bound_satisfied=bool(slope <= rate_bound),
        direction=tuple(unit),
    )
