"""Central finite differences with one Richardson refinement.

All helpers treat the target as a scalar function of a flat coordinate
vector and accept arbitrary leading batch dimensions: ``f`` maps
``(..., dim)`` arrays to ``(...)`` values.  Stencils are second-order
central; the refined variants combine steps ``h`` and ``h/2`` as
``(4*A(h/2) - A(h)) / 3``, which cancels the leading truncation term.
"""

from __future__ import annotations

import numpy as np

__all__ = ["gradient", "laplacian", "stencil_1d", "tensor_stencil"]


def _displaced(x, step):
    """Points ``x + step*e_d`` and ``x - step*e_d`` for every axis d.

    Returns an array of shape ``(..., 2*dim, dim)``.
    """
    x = np.asarray(x, dtype=float)
    dim = x.shape[-1]
    eye = np.eye(dim)
    offsets = np.concatenate([step * eye, -step * eye], axis=0)
    return x[..., None, :] + offsets


def gradient(f, x, step=1e-4, refine=True):
    """Central-difference gradient of ``f`` at ``x``.

    Returns an array of shape ``(..., dim)``.
    """
    x = np.asarray(x, dtype=float)

    def grad_at(h):
        vals = f(_displaced(x, h))
        dim = x.shape[-1]
        return (vals[..., :dim] - vals[..., dim:]) / (2.0 * h)

    if not refine:
        return grad_at(step)
    return (4.0 * grad_at(step / 2.0) - grad_at(step)) / 3.0


def laplacian(f, x, step=1e-4, refine=True):
    """Central-difference Laplacian of ``f`` at ``x``.

    Returns an array of shape ``(...)``.
    """
    x = np.asarray(x, dtype=float)
    center = f(x)

    def lap_at(h):
        vals = f(_displaced(x, h))
        dim = x.shape[-1]
        return (vals[..., :dim] + vals[..., dim:] - 2.0 * center[..., None]).sum(axis=-1) / h**2

    if not refine:
        return lap_at(step)
    return (4.0 * lap_at(step / 2.0) - lap_at(step)) / 3.0


# Second-order central stencils, one per derivative order.  Each entry is
# (offsets in units of h, coefficients); the divisor is h**order.
_STENCILS = {
    0: (np.array([0.0]), np.array([1.0])),
    1: (np.array([-1.0, 1.0]), np.array([-0.5, 0.5])),
    2: (np.array([-1.0, 0.0, 1.0]), np.array([1.0, -2.0, 1.0])),
    3: (np.array([-2.0, -1.0, 1.0, 2.0]), np.array([-0.5, 1.0, -1.0, 0.5])),
}


def stencil_1d(order):
    """Offsets (units of h) and coefficients of the central stencil.

    The estimate is ``sum(c_k * f(x + o_k*h)) / h**order``; supported
    orders are 0 through 3.
    """
    if order not in _STENCILS:
        raise ValueError(f"no central stencil tabulated for order {order}")
    return _STENCILS[order]


def tensor_stencil(gamma):
    """Tensor-product stencil for the mixed partial ``d^gamma``.

    ``gamma`` is a length-3 multi-index.  Returns ``(offsets, coeffs)``
    with offsets of shape ``(K, 3)`` in units of h and coefficients of
    shape ``(K,)``; the estimate is
    ``sum(c_k * f(x + h*offsets[k])) / h**|gamma|``.
    """
    gamma = tuple(int(g) for g in gamma)
    if len(gamma) != 3 or any(g < 0 for g in gamma):
        raise ValueError(f"gamma must be a length-3 multi-index, got {gamma!r}")
    offsets = np.zeros((1, 3))
    coeffs = np.array([1.0])
    for axis, order in enumerate(gamma):
        off_1d, c_1d = stencil_1d(order)
        new_offsets = np.repeat(offsets, len(off_1d), axis=0)
        new_offsets[:, axis] += np.tile(off_1d, len(offsets))
        coeffs = (coeffs[:, None] * c_1d[None, :]).ravel()
        offsets = new_offsets
    return offsets, coeffs
