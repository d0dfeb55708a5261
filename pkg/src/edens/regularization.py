"""Cusp-matching factor pair and the regularized eigenvalue equation.

The cusp factor

    F(x)  = sum_{l,j} -(Z_l/2) |x_j - R_l|  +  sum_{j<k} (1/4) |x_j - x_k|

satisfies ``laplacian(F) = V`` identically away from coalescences
(``laplacian |u| = 2/|u|`` in three dimensions, and each pair term is
hit by two electron Laplacians).  Its companion

    F1(x) = sum_{l,j} -(Z_l/2) sqrt(|x_j-R_l|^2+1) + sum_{j<k} (1/4) sqrt(|x_j-x_k|^2+1)

replaces every |u| by sqrt(|u|^2+1), which keeps F - F1 and all its
derivatives globally bounded.  Writing ``psi = exp(F - F1) * psi1``
turns the eigenvalue equation into

    laplacian(psi1) + b . grad(psi1) + W psi1 = 0,
    b = 2 grad(F - F1),   W = |grad(F - F1)|^2 - laplacian(F1) + E,

an elliptic equation with bounded coefficients: the wavefunction's
coalescence cusps are absorbed entirely by the explicit prefactor.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import fd
from .errors import CoalescentConfiguration, TooCloseToSingularity
from .system import as_configuration, coalescence_distance, potential

__all__ = [
    "RegularizingFactors",
    "OperatorCoefficients",
    "ansatz_defect",
    "regularized_value",
    "regularized_residual",
]


@dataclass(frozen=True)
class OperatorCoefficients:
    """Coefficients of the regularized operator at one or more configurations.

    Attributes:
        drift: ``2 grad(F - F1)``, shape (..., N, 3).
        scalar: ``|grad(F - F1)|^2 - laplacian(F1) + E``, shape (...).
    """

    drift: np.ndarray
    scalar: np.ndarray


class RegularizingFactors:
    """Evaluates F, F1 and their closed-form derivative data for one system.

    Values of both factors are defined everywhere (F is merely
    continuous across coalescences); gradient and Laplacian evaluations
    involving F refuse configurations whose coalescence distance
    underflows ``tolerance`` instead of returning NaN-contaminated
    arrays.
    """

    def __init__(self, system, tolerance=1e-12):
        self.system = system
        self.tolerance = float(tolerance)

    # -- geometry -----------------------------------------------------

    def _nuclear_vectors(self, x):
        """(x_j - R_l) as shape (..., N, L, 3)."""
        return x[..., :, None, :] - self.system.nuclei_positions

    def _pair_vectors(self, x):
        """(x_j - x_k) for j < k as shape (..., P, 3) plus the index pair."""
        j, k = np.triu_indices(self.system.n_electrons, k=1)
        return x[..., j, :] - x[..., k, :], j, k

    def _guard(self, x, what):
        closest = np.min(coalescence_distance(self.system, x))
        if closest < self.tolerance:
            raise CoalescentConfiguration(
                f"{what} is undefined at coalescences "
                f"(distance {closest:.3e} < tolerance {self.tolerance:.3e})"
            )

    # -- values -------------------------------------------------------

    def cusp_factor(self, x):
        """F(x); finite (though not smooth) at coalescences."""
        x = as_configuration(self.system, x)
        en = np.linalg.norm(self._nuclear_vectors(x), axis=-1)
        total = (-0.5 * self.system.nuclei_charges * en).sum(axis=(-1, -2))
        if self.system.n_electrons > 1:
            uv, _, _ = self._pair_vectors(x)
            total = total + 0.25 * np.linalg.norm(uv, axis=-1).sum(axis=-1)
        return total

    def smooth_factor(self, x):
        """F1(x); globally smooth."""
        x = as_configuration(self.system, x)
        en = np.linalg.norm(self._nuclear_vectors(x), axis=-1)
        total = (-0.5 * self.system.nuclei_charges * np.sqrt(en**2 + 1.0)).sum(axis=(-1, -2))
        if self.system.n_electrons > 1:
            uv, _, _ = self._pair_vectors(x)
            r = np.linalg.norm(uv, axis=-1)
            total = total + 0.25 * np.sqrt(r**2 + 1.0).sum(axis=-1)
        return total

    def log_prefactor(self, x):
        """F(x) - F1(x), evaluated in the cancellation-free form.

        Each term uses ``r - sqrt(r^2+1) = -1/(r + sqrt(r^2+1))``, so the
        result stays accurate (and manifestly bounded) at large radii.
        """
        x = as_configuration(self.system, x)
        en = np.linalg.norm(self._nuclear_vectors(x), axis=-1)
        gap = -1.0 / (en + np.sqrt(en**2 + 1.0))
        total = (-0.5 * self.system.nuclei_charges * gap).sum(axis=(-1, -2))
        if self.system.n_electrons > 1:
            uv, _, _ = self._pair_vectors(x)
            r = np.linalg.norm(uv, axis=-1)
            total = total + 0.25 * (-1.0 / (r + np.sqrt(r**2 + 1.0))).sum(axis=-1)
        return total

    # -- first derivatives ---------------------------------------------

    def cusp_gradient(self, x):
        """grad F, shape (..., N, 3).  Refuses coalescent configurations."""
        x = as_configuration(self.system, x)
        self._guard(x, "grad F")
        uv_n = self._nuclear_vectors(x)
        en = np.linalg.norm(uv_n, axis=-1)
        grad = (-0.5 * self.system.nuclei_charges[..., None] * uv_n / en[..., None]).sum(axis=-2)
        if self.system.n_electrons > 1:
            uv, j, k = self._pair_vectors(x)
            unit = uv / np.linalg.norm(uv, axis=-1, keepdims=True)
            for m, (jj, kk) in enumerate(zip(j, k)):
                grad[..., jj, :] += 0.25 * unit[..., m, :]
                grad[..., kk, :] -= 0.25 * unit[..., m, :]
        return grad

    def smooth_gradient(self, x):
        """grad F1, shape (..., N, 3); defined everywhere."""
        x = as_configuration(self.system, x)
        uv_n = self._nuclear_vectors(x)
        s = np.sqrt(np.linalg.norm(uv_n, axis=-1) ** 2 + 1.0)
        grad = (-0.5 * self.system.nuclei_charges[..., None] * uv_n / s[..., None]).sum(axis=-2)
        if self.system.n_electrons > 1:
            uv, j, k = self._pair_vectors(x)
            sp = np.sqrt(np.linalg.norm(uv, axis=-1, keepdims=True) ** 2 + 1.0)
            scaled = uv / sp
            for m, (jj, kk) in enumerate(zip(j, k)):
                grad[..., jj, :] += 0.25 * scaled[..., m, :]
                grad[..., kk, :] -= 0.25 * scaled[..., m, :]
        return grad

    def log_prefactor_gradient(self, x):
        """grad(F - F1), shape (..., N, 3), in the cancellation-free form.

        Per term, ``u/r - u/s = u / (r s (r+s))`` with ``s = sqrt(r^2+1)``
        (using ``s^2 - r^2 = 1``), each bounded by the term coefficient.
        """
        x = as_configuration(self.system, x)
        self._guard(x, "grad(F - F1)")
        uv_n = self._nuclear_vectors(x)
        r = np.linalg.norm(uv_n, axis=-1)
        s = np.sqrt(r**2 + 1.0)
        gap = uv_n / (r * s * (r + s))[..., None]
        grad = (-0.5 * self.system.nuclei_charges[..., None] * gap).sum(axis=-2)
        if self.system.n_electrons > 1:
            uv, j, k = self._pair_vectors(x)
            rp = np.linalg.norm(uv, axis=-1)
            sp = np.sqrt(rp**2 + 1.0)
            gapp = uv / (rp * sp * (rp + sp))[..., None]
            for m, (jj, kk) in enumerate(zip(j, k)):
                grad[..., jj, :] += 0.25 * gapp[..., m, :]
                grad[..., kk, :] -= 0.25 * gapp[..., m, :]
        return grad

    # -- Laplacians ----------------------------------------------------

    def cusp_laplacian(self, x):
        """laplacian F assembled term by term: -(Z_l/2)(2/r) and (1/4)(2/r)*2.

        Symbolically identical to the potential; kept as an independent
        arithmetic path so the identity can be checked numerically.
        """
        x = as_configuration(self.system, x)
        self._guard(x, "laplacian F")
        en = np.linalg.norm(self._nuclear_vectors(x), axis=-1)
        total = (-0.5 * self.system.nuclei_charges * (2.0 / en)).sum(axis=(-1, -2))
        if self.system.n_electrons > 1:
            uv, _, _ = self._pair_vectors(x)
            r = np.linalg.norm(uv, axis=-1)
            total = total + 0.25 * (2.0 / r + 2.0 / r).sum(axis=-1)
        return total

    def smooth_laplacian(self, x):
        """laplacian F1 in closed form.

        Each 3-dimensional sqrt(r^2+1) term contributes
        ``2/s + 1/s^3`` with ``s = sqrt(r^2+1)``; pair terms are doubled
        because both electron Laplacians act on them.
        """
        x = as_configuration(self.system, x)
        s = np.sqrt(np.linalg.norm(self._nuclear_vectors(x), axis=-1) ** 2 + 1.0)
        total = (-0.5 * self.system.nuclei_charges * (2.0 / s + 1.0 / s**3)).sum(axis=(-1, -2))
        if self.system.n_electrons > 1:
            uv, _, _ = self._pair_vectors(x)
            sp = np.sqrt(np.linalg.norm(uv, axis=-1) ** 2 + 1.0)
            total = total + 0.25 * 2.0 * (2.0 / sp + 1.0 / sp**3).sum(axis=-1)
        return total

    # -- operator coefficients and explicit bounds ----------------------

    def operator_coefficients(self, x, energy):
        """Drift and scalar coefficient of the regularized operator."""
        grad = self.log_prefactor_gradient(x)
        drift = 2.0 * grad
        scalar = (grad**2).sum(axis=(-1, -2)) - self.smooth_laplacian(x) + energy
        return OperatorCoefficients(drift=drift, scalar=scalar)

    def prefactor_bound(self):
        """Explicit constant with |F - F1| <= bound (each term's gap is <= 1)."""
        n = self.system.n_electrons
        return 0.5 * n * self.system.nuclei_charges.sum() + n * (n - 1) / 8.0

    def gradient_bound(self):
        """Explicit constant bounding every component of grad(F - F1)."""
        n = self.system.n_electrons
        return 0.5 * self.system.nuclei_charges.sum() + 0.25 * (n - 1)

    def smooth_laplacian_bound(self):
        """Explicit constant with |laplacian F1| <= bound (2/s + 1/s^3 <= 3)."""
        n = self.system.n_electrons
        return 3.0 * (0.5 * n * self.system.nuclei_charges.sum() + 0.25 * n * (n - 1))


def ansatz_defect(factors, x):
    """Closed-form ``laplacian(F) - V``; zero up to rounding by construction."""
    return factors.cusp_laplacian(x) - potential(
        factors.system, x, tolerance=factors.tolerance
    )


def regularized_value(factors, model, x):
    """The regularized wavefunction ``psi1 = exp(F1 - F) * psi`` at ``x``."""
    x = as_configuration(factors.system, x)
    return np.exp(-factors.log_prefactor(x)) * model(x)


def regularized_residual(factors, model, energy, x, step=1e-4):
    """Residual of the regularized equation at ``x``.

    Computes ``laplacian(psi1) + b . grad(psi1) + W psi1`` with psi1
    derivatives by central finite differences of ``step``; vanishes (to
    finite-difference accuracy) exactly when ``model`` is an
    eigenfunction with eigenvalue ``energy``.
    """
    x = as_configuration(factors.system, x)
    closest = np.min(coalescence_distance(factors.system, x))
    if closest <= 10.0 * step:
        raise TooCloseToSingularity(
            f"coalescence distance {closest:.3e} is within 10 steps of the stencil ({step:.1e})"
        )
    n = factors.system.n_electrons

    def flat_psi1(v):
        return regularized_value(factors, model, v.reshape(v.shape[:-1] + (n, 3)))

    flat_x = x.reshape(x.shape[:-2] + (3 * n,))
    lap = fd.laplacian(flat_psi1, flat_x, step=step)
    grad = fd.gradient(flat_psi1, flat_x, step=step).reshape(x.shape)
    coeff = factors.operator_coefficients(x, energy)
    return lap + (coeff.drift * grad).sum(axis=(-1, -2)) + coeff.scalar * regularized_value(
        factors, model, x
    )
