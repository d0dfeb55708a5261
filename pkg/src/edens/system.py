"""Molecular systems and the Coulomb potential.

Units
-----
The kinetic term is ``-laplacian`` with **no** factor 1/2, i.e. the
eigenvalue problem solved throughout this package is

    (-laplacian + V) psi = E psi,

with ``V = -sum_{j,l} Z_l/|x_j - R_l| + sum_{i<j} 1/|x_i - x_j|``.
This differs from the Hartree convention common in quantum chemistry
(where the kinetic term is ``-laplacian/2``); e.g. the one-electron atom
with charge Z has ground state ``exp(-Z/2 |x|)`` and energy ``-Z**2/4``
here.  The internuclear repulsion is an additive constant and is never
computed.

Configurations are plain numpy arrays of shape ``(..., N, 3)``; leading
axes are broadcast batch dimensions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import fd
from .errors import CoalescentConfiguration, TooCloseToSingularity

__all__ = [
    "MolecularSystem",
    "potential",
    "coalescence_distance",
    "schrodinger_residual",
]


@dataclass(frozen=True)
class MolecularSystem:
    """Fixed nuclei (positions and positive charges) plus an electron count.

    Attributes:
        nuclei_positions: array of shape (L, 3), pairwise distinct.
        nuclei_charges: array of shape (L,), strictly positive.
        n_electrons: number of electrons N >= 1.
    """

    nuclei_positions: np.ndarray
    nuclei_charges: np.ndarray
    n_electrons: int

    def __post_init__(self):
        pos = np.array(self.nuclei_positions, dtype=float)
        charges = np.array(self.nuclei_charges, dtype=float)
        if pos.ndim != 2 or pos.shape[1] != 3:
            raise ValueError(f"nuclei_positions must have shape (L, 3), got {pos.shape}")
        if charges.shape != (pos.shape[0],):
            raise ValueError("need exactly one charge per nucleus")
        if pos.shape[0] < 1:
            raise ValueError("at least one nucleus is required")
        if np.any(charges <= 0.0):
            raise ValueError("nuclear charges must be strictly positive")
        if self.n_electrons < 1:
            raise ValueError("n_electrons must be >= 1")
        diff = pos[:, None, :] - pos[None, :, :]
        dist = np.linalg.norm(diff, axis=-1)
        iu = np.triu_indices(pos.shape[0], k=1)
        if iu[0].size and np.min(dist[iu]) == 0.0:
            raise ValueError("nuclei positions must be pairwise distinct")
        pos.setflags(write=False)
        charges.setflags(write=False)
        object.__setattr__(self, "nuclei_positions", pos)
        object.__setattr__(self, "nuclei_charges", charges)

    @classmethod
    def atom(cls, charge, n_electrons, center=(0.0, 0.0, 0.0)):
        """Single nucleus of the given charge at ``center``."""
        return cls(np.array([center], dtype=float), np.array([charge], dtype=float), n_electrons)

    @property
    def n_nuclei(self):
        return self.nuclei_positions.shape[0]


def as_configuration(system, x):
    """Coerce ``x`` to a float array of shape (..., N, 3) and validate N."""
    x = np.asarray(x, dtype=float)
    if x.ndim < 2 or x.shape[-2:] != (system.n_electrons, 3):
        raise ValueError(
            f"configuration must have shape (..., {system.n_electrons}, 3), got {x.shape}"
        )
    return x


def electron_nucleus_distances(system, x):
    """All distances |x_j - R_l|, shape (..., N, L)."""
    x = as_configuration(system, x)
    diff = x[..., :, None, :] - system.nuclei_positions
    return np.linalg.norm(diff, axis=-1)


def electron_pair_distances(system, x):
    """Distances |x_j - x_k| for j < k, shape (..., N*(N-1)/2)."""
    x = as_configuration(system, x)
    j, k = np.triu_indices(system.n_electrons, k=1)
    return np.linalg.norm(x[..., j, :] - x[..., k, :], axis=-1)


def coalescence_distance(system, x):
    """Smallest of all electron-nucleus and electron-electron distances."""
    en = electron_nucleus_distances(system, x).min(axis=(-1, -2))
    if system.n_electrons == 1:
        return en
    ee = electron_pair_distances(system, x).min(axis=-1)
    return np.minimum(en, ee)


def potential(system, x, *, tolerance=1e-12):
    """Coulomb potential V at ``x`` (no internuclear term).

    Refuses configurations whose coalescence distance underflows
    ``tolerance`` rather than returning +/-inf.
    """
    x = as_configuration(system, x)
    closest = np.min(coalescence_distance(system, x))
    if closest < tolerance:
        raise CoalescentConfiguration(
            f"pairwise distance {closest:.3e} below tolerance {tolerance:.3e}"
        )
    en = electron_nucleus_distances(system, x)
    attraction = -(system.nuclei_charges / en).sum(axis=(-1, -2))
    if system.n_electrons == 1:
        return attraction
    repulsion = (1.0 / electron_pair_distances(system, x)).sum(axis=-1)
    return attraction + repulsion


def schrodinger_residual(system, model, energy, x, step=1e-4):
    """Pointwise residual ``(-laplacian psi + V psi - E psi)(x)``.

    The Laplacian is taken by central finite differences (with one
    Richardson refinement) in all 3N coordinates.  Vanishes, up to
    finite-difference error, exactly when ``model`` is an eigenfunction
    with eigenvalue ``energy``.
    """
    x = as_configuration(system, x)
    closest = np.min(coalescence_distance(system, x))
    if closest <= 10.0 * step:
        raise TooCloseToSingularity(
            f"coalescence distance {closest:.3e} is within 10 steps of the stencil ({step:.1e})"
        )
    n = system.n_electrons

    def flat_psi(v):
        return model(v.reshape(v.shape[:-1] + (n, 3)))

    lap = fd.laplacian(flat_psi, x.reshape(x.shape[:-2] + (3 * n,)), step=step)
    return -lap + (potential(system, x) - energy) * model(x)
