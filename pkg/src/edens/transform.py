"""Block-orthogonal coordinates that expose a cluster's scaled center of mass.

For a nonempty electron subset P the frame maps a configuration
``x = (x_0, ..., x_{N-1})`` to ``(x_P, x')`` where

    x_P = (1/sqrt(|P|)) * sum_{j in P} x_j

and ``x'`` collects the remaining 3N-3 coordinates.  The map never
mixes the three spatial axes, so it is stored as an N x N orthogonal
matrix acting on position blocks (the full 3N x 3N matrix is its
Kronecker product with the 3 x 3 identity).

The completion below the distinguished first row is a fixed,
reproducible representative (any orthogonal completion would do):
cluster electrons are relabeled to the front, the remaining rows come
from modified Gram-Schmidt over the standard basis in index order, and
each new row's leading entry is made nonnegative.  Tests that assert
specific completion entries are convention-dependent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyCluster

__all__ = ["ClusterFrame", "build_frame"]

_PIVOT_TOL = 1e-10


def _complete_orthogonal(first_row):
    """Orthogonal matrix whose first row is ``first_row`` (unit norm)."""
    n = first_row.shape[0]
    rows = [first_row]
    for cand in range(n):
        if len(rows) == n:
            break
        v = np.zeros(n)
        v[cand] = 1.0
        # two Gram-Schmidt passes keep orthogonality at machine precision
        for _ in range(2):
            for row in rows:
                v -= (row @ v) * row
        norm = np.linalg.norm(v)
        if norm <= _PIVOT_TOL:
            continue
        v /= norm
        lead = np.argmax(np.abs(v) > _PIVOT_TOL)
        if v[lead] < 0.0:
            v = -v
        rows.append(v)
    if len(rows) != n:
        raise RuntimeError("orthogonal completion failed")  # unreachable for unit first row
    return np.array(rows)


@dataclass(frozen=True)
class ClusterFrame:
    """Orthogonal coordinates (x_P, x') for one cluster choice.

    Attributes:
        n_electrons: N.
        cluster: the subset P, sorted.
        permutation: electron order used internally (P first, then the rest).
        block: the N x N orthogonal block matrix; row 0 is the scaled
            cluster sum in the internal ordering.
    """

    n_electrons: int
    cluster: tuple
    permutation: np.ndarray
    block: np.ndarray

    @property
    def cluster_size(self):
        return len(self.cluster)

    @property
    def _inverse_permutation(self):
        inv = np.empty(self.n_electrons, dtype=int)
        inv[self.permutation] = np.arange(self.n_electrons)
        return inv

    def matrix(self):
        """The full 3N x 3N orthogonal matrix (block matrix x identity)."""
        perm = np.zeros((self.n_electrons, self.n_electrons))
        perm[np.arange(self.n_electrons), self.permutation] = 1.0
        return np.kron(self.block @ perm, np.eye(3))

    def forward(self, x):
        """Map configurations (..., N, 3) to ``(x_P, x')``.

        Returns the cluster coordinate with shape (..., 3) and the
        complement with shape (..., 3N-3).
        """
        x = np.asarray(x, dtype=float)
        if x.shape[-2:] != (self.n_electrons, 3):
            raise ValueError(f"expected shape (..., {self.n_electrons}, 3), got {x.shape}")
        internal = x[..., self.permutation, :]
        y = np.einsum("ij,...jc->...ic", self.block, internal)
        return y[..., 0, :], y[..., 1:, :].reshape(x.shape[:-2] + (3 * (self.n_electrons - 1),))

    def inverse(self, x_cluster, x_rest):
        """Map ``(x_P, x')`` back to configurations (..., N, 3)."""
        x_cluster = np.asarray(x_cluster, dtype=float)
        x_rest = np.asarray(x_rest, dtype=float)
        lead = np.broadcast_shapes(x_cluster.shape[:-1], x_rest.shape[:-1])
        y = np.concatenate(
            [
                np.broadcast_to(x_cluster, lead + (3,))[..., None, :],
                np.broadcast_to(x_rest, lead + (3 * (self.n_electrons - 1),)).reshape(
                    lead + (self.n_electrons - 1, 3)
                ),
            ],
            axis=-2,
        )
        internal = np.einsum("ji,...jc->...ic", self.block, y)
        return internal[..., self._inverse_permutation, :]

    def electron0_offset(self, x_rest):
        """Position of electron 0 at ``x_P = 0``, i.e. the x'-only part of x_0."""
        x_rest = np.asarray(x_rest, dtype=float)
        blocks = x_rest.reshape(x_rest.shape[:-1] + (self.n_electrons - 1, 3))
        slot = int(self._inverse_permutation[0])
        return np.einsum("i,...ic->...c", self.block[1:, slot], blocks)


def build_frame(n_electrons, cluster):
    """Build the deterministic frame for the electron subset ``cluster``."""
    members = tuple(sorted(int(j) for j in cluster))
    if not members:
        raise EmptyCluster("a cluster frame needs at least one electron")
    if len(set(members)) != len(members):
        raise ValueError("cluster indices must be distinct")
    if members[0] < 0 or members[-1] >= n_electrons:
        raise ValueError(f"cluster indices must lie in 0..{n_electrons - 1}")
    rest = tuple(j for j in range(n_electrons) if j not in set(members))
    permutation = np.array(members + rest, dtype=int)
    first_row = np.zeros(n_electrons)
    first_row[: len(members)] = 1.0 / np.sqrt(len(members))
    block = _complete_orthogonal(first_row)
    block.setflags(write=False)
    permutation.setflags(write=False)
    return ClusterFrame(
        n_electrons=n_electrons, cluster=members, permutation=permutation, block=block
    )
