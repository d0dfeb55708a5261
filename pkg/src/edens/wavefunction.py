"""Analytic wavefunction models with exponential-decay certificates.

Closed-form N-body eigenfunctions only exist for one-electron systems,
so the models here are desk-scale stand-ins that share the structural
features of true eigenfunctions: particle-coalescence cusps and
exponential falloff.  Each model is real-valued, permutation symmetric
in the electron labels, and carries a certificate (c, rate) with
``|psi(x)| <= c * exp(-rate * ||x||)`` over the full 3N-dimensional
configuration space.

Both families have the form ``psi = exp(S)`` with S a sum of radial
terms, so gradients and second directional derivatives are available in
closed form; nothing here falls back on nested finite differences.
"""

from __future__ import annotations

import abc
from dataclasses import dataclass

import numpy as np

from .errors import CertificateViolated

__all__ = [
    "DecayCertificate",
    "WavefunctionModel",
    "HydrogenicProduct",
    "CorrelatedToy",
    "decay_check",
    "DecayCheckReport",
]


@dataclass(frozen=True)
class DecayCertificate:
    """Constants (amplitude, rate) with |psi(x)| <= amplitude * exp(-rate*||x||)."""

    amplitude: float
    rate: float

    def __post_init__(self):
        if self.amplitude <= 0.0 or self.rate <= 0.0:
            raise ValueError("certificate amplitude and rate must be positive")

    def bound(self, radius):
        return self.amplitude * np.exp(-self.rate * np.asarray(radius, dtype=float))


class WavefunctionModel(abc.ABC):
    """Real-valued model wavefunction on ``(..., N, 3)`` configurations."""

    n_electrons: int

    @property
    @abc.abstractmethod
    def decay(self) -> DecayCertificate:
        """Certified exponential-decay envelope."""

    @property
    def energy(self):
        """Known eigenvalue, or None when the model is not an eigenfunction."""
        return None

    @abc.abstractmethod
    def __call__(self, x):
        """Value psi(x); batched over leading axes."""

    @abc.abstractmethod
    def gradient(self, x):
        """Full gradient, shape ``(..., N, 3)``.  Undefined on coalescences."""

    @abc.abstractmethod
    def directional_second(self, x, v, w):
        """Second derivative ``(v . grad)(w . grad) psi`` for constant fields v, w.

        ``v`` and ``w`` have shape (N, 3) and are held fixed; the result
        has the batch shape of ``x``.
        """


def _unit_and_inverse(u):
    """(u/|u|, 1/|u|) with zeros substituted on the measure-zero set u == 0."""
    r = np.linalg.norm(u, axis=-1)
    safe = np.where(r > 0.0, r, 1.0)
    return u / safe[..., None], np.where(r > 0.0, 1.0 / safe, 0.0)


def _radial_hessian_quad(p, q, unit, inv_r):
    """Quadratic form p^T H q of H = Hess(|u|) = (I - u u^T/|u|^2)/|u|."""
    return ((p * q).sum(axis=-1) - (p * unit).sum(axis=-1) * (q * unit).sum(axis=-1)) * inv_r


@dataclass(frozen=True)
class HydrogenicProduct(WavefunctionModel):
    """Product of identical 1s-type orbitals: psi = prod_j exp(-a |x_j|).

    For ``n_electrons == 1`` and ``exponent == charge/2`` this is the
    exact ground state of the one-electron atom in these units, with
    energy ``-charge**2/4``; for two or more electrons it is *not* an
    eigenfunction (the electron repulsion is unbalanced).
    """

    n_electrons: int
    exponent: float
    charge: float | None = None
    certificate: DecayCertificate | None = None

    def __post_init__(self):
        if self.n_electrons < 1:
            raise ValueError("n_electrons must be >= 1")
        if self.exponent <= 0.0:
            raise ValueError("orbital exponent must be positive")

    @property
    def decay(self):
        if self.certificate is not None:
            return self.certificate
        # sum_j |x_j| >= ||x||, worst case all mass in one coordinate block
        return DecayCertificate(1.0, self.exponent)

    @property
    def energy(self):
        if self.n_electrons == 1 and self.charge is not None and self.exponent == self.charge / 2.0:
            return -self.charge**2 / 4.0
        return None

    def _log_value(self, x):
        return -self.exponent * np.linalg.norm(x, axis=-1).sum(axis=-1)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.exp(self._log_value(x))

    def _log_gradient(self, x):
        unit, _ = _unit_and_inverse(x)
        return -self.exponent * unit

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        return self(x)[..., None, None] * self._log_gradient(x)

    def directional_second(self, x, v, w):
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        w = np.asarray(w, dtype=float)
        grad_s = self._log_gradient(x)
        vs = (grad_s * v).sum(axis=(-1, -2))
        ws = (grad_s * w).sum(axis=(-1, -2))
        unit, inv_r = _unit_and_inverse(x)
        quad = -self.exponent * _radial_hessian_quad(
            np.broadcast_to(v, x.shape), np.broadcast_to(w, x.shape), unit, inv_r
        ).sum(axis=-1)
        return self(x) * (vs * ws + quad)


@dataclass(frozen=True)
class CorrelatedToy(WavefunctionModel):
    """Cusped, pair-correlated model: exp(-a sum|x_j| + b sum_{i<j}|x_i-x_j|).

    Mirrors the structure of the potential-matching cusp factor (it is
    not an eigenfunction).  Requires ``0 < pair_exponent < exponent``
    and a positive net decay rate ``exponent - pair_exponent*(N-1)``.
    """

    n_electrons: int
    exponent: float
    pair_exponent: float
    certificate: DecayCertificate | None = None

    def __post_init__(self):
        if self.n_electrons < 1:
            raise ValueError("n_electrons must be >= 1")
        if not 0.0 < self.pair_exponent < self.exponent:
            raise ValueError("need 0 < pair_exponent < exponent")
        if self._rate() <= 0.0:
            raise ValueError(
                "net decay rate exponent - pair_exponent*(N-1) = "
                f"{self._rate():.6g} must be positive"
            )

    def _rate(self):
        return self.exponent - self.pair_exponent * (self.n_electrons - 1)

    @property
    def decay(self):
        if self.certificate is not None:
            return self.certificate
        # |x_i - x_j| <= |x_i| + |x_j| turns the pair sum into (N-1) sum|x_j|
        return DecayCertificate(1.0, self._rate())

    def _pair_index(self):
        return np.triu_indices(self.n_electrons, k=1)

    def _log_value(self, x):
        s = -self.exponent * np.linalg.norm(x, axis=-1).sum(axis=-1)
        if self.n_electrons > 1:
            j, k = self._pair_index()
            pair = np.linalg.norm(x[..., j, :] - x[..., k, :], axis=-1)
            s = s + self.pair_exponent * pair.sum(axis=-1)
        return s

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.exp(self._log_value(x))

    def _log_gradient(self, x):
        unit, _ = _unit_and_inverse(x)
        grad = -self.exponent * unit
        if self.n_electrons > 1:
            j, k = self._pair_index()
            pair_unit, _ = _unit_and_inverse(x[..., j, :] - x[..., k, :])
            contrib = np.zeros_like(grad)
            for m, (jj, kk) in enumerate(zip(j, k)):
                contrib[..., jj, :] += self.pair_exponent * pair_unit[..., m, :]
                contrib[..., kk, :] -= self.pair_exponent * pair_unit[..., m, :]
            grad = grad + contrib
        return grad

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        return self(x)[..., None, None] * self._log_gradient(x)

    def directional_second(self, x, v, w):
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        w = np.asarray(w, dtype=float)
        grad_s = self._log_gradient(x)
        vs = (grad_s * v).sum(axis=(-1, -2))
        ws = (grad_s * w).sum(axis=(-1, -2))
        unit, inv_r = _unit_and_inverse(x)
        quad = -self.exponent * _radial_hessian_quad(
            np.broadcast_to(v, x.shape), np.broadcast_to(w, x.shape), unit, inv_r
        ).sum(axis=-1)
        if self.n_electrons > 1:
            j, k = self._pair_index()
            pair_unit, pair_inv = _unit_and_inverse(x[..., j, :] - x[..., k, :])
            dv = np.broadcast_to(v[j] - v[k], pair_unit.shape)
            dw = np.broadcast_to(w[j] - w[k], pair_unit.shape)
            quad = quad + self.pair_exponent * _radial_hessian_quad(
                dv, dw, pair_unit, pair_inv
            ).sum(axis=-1)
        return self(x) * (vs * ws + quad)


@dataclass(frozen=True)
class DecayCheckReport:
    samples: int
    max_ratio: float
    seed: int


def decay_check(model, sample_count, radius_range, seed, certificate=None):
    """Sample configurations and test the decay certificate.

    Draws ``sample_count`` points uniformly in direction on the
    3N-sphere with radius uniform in ``radius_range`` and checks
    ``|psi| <= c * exp(-rate * ||x||)``.  Returns the largest observed
    ratio |psi| / bound; raises :class:`CertificateViolated` (with the
    witnessing configuration attached) if any sample exceeds 1.
    """
    cert = certificate if certificate is not None else model.decay
    lo, hi = float(radius_range[0]), float(radius_range[1])
    if not 0.0 <= lo <= hi:
        raise ValueError("radius_range must satisfy 0 <= lo <= hi")
    rng = np.random.default_rng(seed)
    dim = 3 * model.n_electrons
    direction = rng.standard_normal((sample_count, dim))
    direction /= np.linalg.norm(direction, axis=-1, keepdims=True)
    radius = rng.uniform(lo, hi, size=sample_count)
    configs = (radius[:, None] * direction).reshape(sample_count, model.n_electrons, 3)
    ratio = np.abs(model(configs)) / cert.bound(radius)
    worst = int(np.argmax(ratio))
    if ratio[worst] > 1.0:
        raise CertificateViolated(
            f"|psi| exceeds certificate by factor {ratio[worst]:.6g} "
            f"at radius {radius[worst]:.6g}",
            witness=configs[worst],
        )
    return DecayCheckReport(samples=sample_count, max_ratio=float(ratio[worst]), seed=seed)
