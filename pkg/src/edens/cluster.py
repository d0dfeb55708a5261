"""Electron-pair selections, smooth cutoffs, and cluster support certificates.

A selection I of "close" electron pairs induces a weight

    phi_I(x) = prod_{(j,k) in I} chi1(|x_j - x_k|) * prod_{(j,k) not in I} chi2(|x_j - x_k|)

where chi1 + chi2 = 1 is a smooth partition of unity on the half line
with chi1 equal to 1 on [0, R/(4N)] and supported in [0, R/(2N)].
Summed over all selections the weights telescope back to 1.

The connected component of electron 0 under the pairs of I is the
cluster P; on the support of phi_I, whenever electron 0 keeps distance
R from every nucleus, every P-electron stays R/4 from the nuclei and
R/(4N) from every non-cluster electron.  ``support_certificate``
witnesses those bounds by rejection sampling.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import FrozenSet, Tuple

import numpy as np

from .errors import SamplingExhausted
from .system import as_configuration

__all__ = [
    "PairSet",
    "ClusterSelection",
    "ClusterPartition",
    "CutoffFamily",
    "equivalence_class",
    "connected_components",
    "phi",
    "in_separated_region",
    "support_margins",
    "support_certificate",
    "CertificateReport",
]

# exhaustive subset enumeration is exponential in N*(N-1)/2
MAX_EXHAUSTIVE_ELECTRONS = 6


def all_pairs(n_electrons):
    """All index pairs (j, k) with 0 <= j < k < N, in lexicographic order."""
    j, k = np.triu_indices(n_electrons, k=1)
    return tuple((int(a), int(b)) for a, b in zip(j, k))


@dataclass(frozen=True)
class PairSet:
    """The full set of electron index pairs for an N-electron system."""

    n_electrons: int

    def __post_init__(self):
        if self.n_electrons < 1:
            raise ValueError("n_electrons must be >= 1")

    @property
    def pairs(self):
        return all_pairs(self.n_electrons)

    def __len__(self):
        return self.n_electrons * (self.n_electrons - 1) // 2

    def selections(self):
        """Iterate over all 2^|pairs| selections (N <= 6 only)."""
        if self.n_electrons > MAX_EXHAUSTIVE_ELECTRONS:
            raise ValueError(
                f"exhaustive enumeration is capped at N = {MAX_EXHAUSTIVE_ELECTRONS}; "
                "construct selections explicitly for larger systems"
            )
        pairs = self.pairs
        for mask in range(1 << len(pairs)):
            chosen = frozenset(p for i, p in enumerate(pairs) if mask >> i & 1)
            yield ClusterSelection(self.n_electrons, chosen)


@dataclass(frozen=True)
class ClusterSelection:
    """A subset I of electron pairs declared close; the complement is J."""

    n_electrons: int
    pairs: FrozenSet[Tuple[int, int]]

    def __post_init__(self):
        normalized = frozenset((int(j), int(k)) for j, k in self.pairs)
        for j, k in normalized:
            if not 0 <= j < k < self.n_electrons:
                raise ValueError(f"pair ({j}, {k}) is not ordered within 0..{self.n_electrons - 1}")
        object.__setattr__(self, "pairs", normalized)

    @property
    def complement(self):
        return frozenset(all_pairs(self.n_electrons)) - self.pairs

    def sorted_pairs(self):
        return tuple(sorted(self.pairs))


@dataclass(frozen=True)
class ClusterPartition:
    """Partition of {0..N-1} into the cluster P (containing 0) and the rest Q."""

    n_electrons: int
    cluster: Tuple[int, ...]

    def __post_init__(self):
        members = tuple(sorted(int(j) for j in self.cluster))
        if not members or members[0] != 0:
            raise ValueError("the cluster must contain electron 0")
        if len(set(members)) != len(members) or members[-1] >= self.n_electrons:
            raise ValueError("cluster indices must be distinct and within range")
        object.__setattr__(self, "cluster", members)

    @property
    def rest(self):
        inside = set(self.cluster)
        return tuple(j for j in range(self.n_electrons) if j not in inside)


class _UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, a):
        root = a
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[a] != root:
            self.parent[a], a = root, self.parent[a]
        return root

    def union(self, a, b):
        self.parent[self.find(b)] = self.find(a)


def connected_components(selection):
    """Connected components of {0..N-1} under the pairs of the selection."""
    uf = _UnionFind(selection.n_electrons)
    for j, k in selection.pairs:
        uf.union(j, k)
    groups = {}
    for j in range(selection.n_electrons):
        groups.setdefault(uf.find(j), []).append(j)
    return [tuple(sorted(g)) for g in sorted(groups.values())]


def equivalence_class(selection):
    """The cluster P: all electrons reachable from electron 0 through pairs of I."""
    uf = _UnionFind(selection.n_electrons)
    for j, k in selection.pairs:
        uf.union(j, k)
    root = uf.find(0)
    members = tuple(j for j in range(selection.n_electrons) if uf.find(j) == root)
    return ClusterPartition(selection.n_electrons, members)


# -- smooth step -------------------------------------------------------

# e^(-1/u) underflows double precision far above this threshold, so the
# step and all its derivatives are numerically exact plateaus outside it
_INTERIOR_LO = 2e-3


def _mollifier(u):
    out = np.zeros_like(u)
    mask = u > _INTERIOR_LO
    out[mask] = np.exp(-1.0 / u[mask])
    return out


def _mollifier_d1(u):
    out = np.zeros_like(u)
    mask = u > _INTERIOR_LO
    ui = u[mask]
    out[mask] = np.exp(-1.0 / ui) / ui**2
    return out


def _mollifier_d2(u):
    out = np.zeros_like(u)
    mask = u > _INTERIOR_LO
    ui = u[mask]
    out[mask] = np.exp(-1.0 / ui) * (1.0 - 2.0 * ui) / ui**4
    return out


def _smooth_step(u, order=0):
    """C-infinity step s(u) = sigma(u)/(sigma(u)+sigma(1-u)) or a derivative.

    s is 0 for u <= 0 and 1 for u >= 1 with all derivatives vanishing at
    the junctions.
    """
    u = np.asarray(u, dtype=float)
    g, h = _mollifier(u), _mollifier(1.0 - u)
    gp, hp = _mollifier_d1(u), -_mollifier_d1(1.0 - u)
    den = g + h
    # outside (0,1) the denominator degenerates; plateau values are exact
    inner = (u > 0.0) & (u < 1.0)
    safe = np.where(inner, den, 1.0)
    if order == 0:
        return np.where(u >= 1.0, 1.0, np.where(inner, g / safe, 0.0))
    num = gp * h - g * hp
    if order == 1:
        return np.where(inner, num / safe**2, 0.0)
    if order == 2:
        gpp, hpp = _mollifier_d2(u), _mollifier_d2(1.0 - u)
        nump = gpp * h - g * hpp
        dend = gp + hp
        return np.where(inner, (nump * safe - 2.0 * num * dend) / safe**3, 0.0)
    raise ValueError(f"unsupported smooth-step derivative order {order}")


@dataclass(frozen=True)
class CutoffFamily:
    """Complementary smooth cutoffs chi1, chi2 of a pair distance.

    chi1(t) = 1 for t <= R/(4N), chi1(t) = 0 for t >= R/(2N), both
    C-infinity, chi1 + chi2 identically 1.
    """

    outer_radius: float
    n_electrons: int

    def __post_init__(self):
        if self.outer_radius <= 0.0:
            raise ValueError("outer_radius must be positive")
        if self.n_electrons < 1:
            raise ValueError("n_electrons must be >= 1")

    @property
    def inner_plateau(self):
        """End of the chi1 == 1 plateau, R/(4N)."""
        return self.outer_radius / (4.0 * self.n_electrons)

    @property
    def support_end(self):
        """End of the chi1 support, R/(2N)."""
        return self.outer_radius / (2.0 * self.n_electrons)

    def _arg(self, t):
        return (self.support_end - np.asarray(t, dtype=float)) / self.inner_plateau

    def chi1(self, t):
        return _smooth_step(self._arg(t))

    def chi2(self, t):
        return 1.0 - self.chi1(t)

    def chi(self, t):
        """Both cutoff values as a (chi1, chi2) pair."""
        c1 = self.chi1(t)
        return c1, 1.0 - c1

    def chi1_prime(self, t):
        return -_smooth_step(self._arg(t), order=1) / self.inner_plateau

    def chi1_second(self, t):
        return _smooth_step(self._arg(t), order=2) / self.inner_plateau**2

    def chi2_prime(self, t):
        return -self.chi1_prime(t)

    def chi2_second(self, t):
        return -self.chi1_second(t)


def _pair_distances(n, x):
    j, k = np.triu_indices(n, k=1)
    return np.linalg.norm(x[..., j, :] - x[..., k, :], axis=-1), j, k


def phi(selection, family, x):
    """The selection weight phi_I(x) in [0, 1]; batched over leading axes."""
    n = selection.n_electrons
    x = np.asarray(x, dtype=float)
    if x.shape[-2:] != (n, 3):
        raise ValueError(f"configuration must have shape (..., {n}, 3), got {x.shape}")
    if n == 1:
        return np.ones(x.shape[:-2])
    dist, j, k = _pair_distances(n, x)
    in_i = np.array([(int(a), int(b)) in selection.pairs for a, b in zip(j, k)])
    c1 = family.chi1(dist)
    vals = np.where(in_i, c1, 1.0 - c1)
    return vals.prod(axis=-1)


def support_margins(partition, system, x):
    """Cluster margins: (min nuclear distance over P, min P-to-Q separation).

    The separation is +inf when Q is empty.  Both entries are batched
    over the leading axes of ``x``.
    """
    x = as_configuration(system, x)
    p = list(partition.cluster)
    q = list(partition.rest)
    diff = x[..., p, None, :] - system.nuclei_positions
    nuclear = np.linalg.norm(diff, axis=-1).min(axis=(-1, -2))
    if q:
        sep = np.linalg.norm(x[..., p, None, :] - x[..., None, q, :], axis=-1).min(axis=(-1, -2))
    else:
        sep = np.full(x.shape[:-2], np.inf)
    return nuclear, sep


def in_separated_region(partition, system, epsilon, x):
    """True where all P-electrons stay ``epsilon`` from every nucleus and from Q."""
    if epsilon <= 0.0:
        raise ValueError("epsilon must be positive")
    nuclear, sep = support_margins(partition, system, x)
    return (nuclear > epsilon) & (sep > epsilon)


@dataclass(frozen=True)
class CertificateReport:
    """Outcome of a sampled support check for one selection."""

    selection: Tuple[Tuple[int, int], ...]
    cluster: Tuple[int, ...]
    samples_tested: int
    violations: int
    min_margins: dict
    proposals_used: int
    seed: int

    def as_record(self):
        return {
            "selection": [list(p) for p in self.selection],
            "P": list(self.cluster),
            "samples_tested": self.samples_tested,
            "violations": self.violations,
            "min_margins": dict(self.min_margins),
            "proposals_used": self.proposals_used,
            "seed": self.seed,
        }


_CERT_BATCH = 32768


def _propose_batch(rng, system, selection, comps, radius, count):
    """Gaussian clouds around per-component centers; component of 0 sits
    beyond ``radius`` from a nucleus, the rest land near the molecule."""
    n = selection.n_electrons
    n_nuc = system.n_nuclei
    x = np.empty((count, n, 3))
    scale = radius / (8.0 * n) * np.exp(rng.uniform(np.log(0.5), np.log(2.0), size=(count, 1)))
    for comp in comps:
        anchor = system.nuclei_positions[rng.integers(0, n_nuc, size=count)]
        direction = rng.standard_normal((count, 3))
        direction /= np.linalg.norm(direction, axis=-1, keepdims=True)
        if 0 in comp:
            dist = radius * (1.0 + rng.uniform(0.05, 1.5, size=(count, 1)))
        else:
            dist = rng.uniform(0.0, 2.5 * radius, size=(count, 1))
        center = anchor + dist * direction
        jitter = scale[..., None] * rng.standard_normal((count, len(comp), 3))
        x[:, list(comp), :] = center[:, None, :] + jitter
    return x


def support_certificate(selection, family, system, sample_count, seed, proposal_budget=10**7):
    """Sample the support of phi_I and certify the cluster separation bounds.

    Rejection-samples configurations with ``phi_I > 0`` and electron 0
    farther than R from every nucleus, then checks that every cluster
    electron keeps distance R/4 from the nuclei and R/(4N) from every
    non-cluster electron (i.e. the configuration lies in the separated
    region with epsilon = R/(4N)).  Raises :class:`SamplingExhausted` if
    the proposal budget runs out first.
    """
    if family.n_electrons != selection.n_electrons:
        raise ValueError("cutoff family and selection disagree on the electron count")
    if system.n_electrons != selection.n_electrons:
        raise ValueError("system and selection disagree on the electron count")
    radius = family.outer_radius
    partition = equivalence_class(selection)
    comps = connected_components(selection)
    nuclear_bound = radius / 4.0
    separation_bound = radius / (4.0 * selection.n_electrons)

    accepted = 0
    proposals = 0
    violations = 0
    min_nuclear = np.inf
    min_separation = np.inf
    root = np.random.SeedSequence(seed)
    while accepted < sample_count:
        if proposals >= proposal_budget:
            raise SamplingExhausted(
                f"only {accepted}/{sample_count} support samples found within "
                f"{proposal_budget} proposals"
            )
        rng = np.random.default_rng(root.spawn(1)[0])
        count = min(_CERT_BATCH, proposal_budget - proposals)
        x = _propose_batch(rng, system, selection, comps, radius, count)
        proposals += count
        first_nuclear = np.linalg.norm(
            x[:, 0, None, :] - system.nuclei_positions, axis=-1
        ).min(axis=-1)
        keep = (first_nuclear > radius) & (phi(selection, family, x) > 0.0)
        x = x[keep][: sample_count - accepted]
        if x.shape[0] == 0:
            continue
        nuclear, sep = support_margins(partition, system, x)
        violations += int(np.sum((nuclear <= nuclear_bound) | (sep <= separation_bound)))
        min_nuclear = min(min_nuclear, float(nuclear.min()))
        if np.isfinite(sep).any():
            min_separation = min(min_separation, float(sep.min()))
        accepted += x.shape[0]

    margins = {
        "nuclear": min_nuclear,
        "separation": min_separation if np.isfinite(min_separation) else None,
        "nuclear_bound": nuclear_bound,
        "separation_bound": separation_bound,
    }
    return CertificateReport(
        selection=selection.sorted_pairs(),
        cluster=partition.cluster,
        samples_tested=accepted,
        violations=violations,
        min_margins=margins,
        proposals_used=proposals,
        seed=seed,
    )
