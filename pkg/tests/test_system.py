import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from edens import (
    CoalescentConfiguration,
    HydrogenicProduct,
    MolecularSystem,
    TooCloseToSingularity,
    coalescence_distance,
    potential,
    schrodinger_residual,
)


def test_potential_single_coulomb_term():
    system = MolecularSystem.atom(1.0, 1)
    assert potential(system, [[1.0, 0.0, 0.0]]) == pytest.approx(-1.0, abs=0)


def test_potential_two_electron_atom_hand_sum():
    system = MolecularSystem.atom(2.0, 2)
    value = potential(system, [[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]])
    assert value == pytest.approx(-3.5, rel=1e-15)


def test_potential_diatomic_hand_sum():
    system = MolecularSystem([[0, 0, 0], [1, 0, 0]], [1.0, 1.0], 2)
    value = potential(system, [[0.5, 0, 0], [2.0, 0, 0]])
    # -(2 + 2) - (0.5 + 1) + 1/1.5
    assert value == pytest.approx(-4.0 - 1.5 + 1.0 / 1.5, rel=1e-15)


def test_potential_refuses_coalescence():
    system = MolecularSystem.atom(1.0, 2)
    with pytest.raises(CoalescentConfiguration):
        potential(system, [[1.0, 0, 0], [1.0, 0, 0]])
    with pytest.raises(CoalescentConfiguration):
        potential(system, [[0.0, 0, 0], [1.0, 0, 0]])


def test_coalescence_distance_examples():
    one = MolecularSystem.atom(1.0, 1)
    assert coalescence_distance(one, [[1.0, 0, 0]]) == pytest.approx(1.0, abs=0)
    two = MolecularSystem.atom(1.0, 2)
    assert coalescence_distance(two, [[0.5, 0, 0], [0.5, 0, 0]]) == 0.0
    assert coalescence_distance(two, [[3.0, 0, 0], [0, 4.0, 0]]) == pytest.approx(3.0)


@given(st.integers(0, 2**32 - 1), st.permutations(list(range(3))))
@settings(max_examples=60, deadline=None)
def test_potential_permutation_symmetry(seed, perm):
    # exact identity; relabeling only reorders the floating-point sums
    system = MolecularSystem([[0, 0, 0], [1.5, 0, 0]], [1.0, 2.0], 3)
    x = np.random.default_rng(seed).normal(size=(3, 3))
    assert potential(system, x[list(perm)]) == pytest.approx(potential(system, x), rel=1e-14)


def test_potential_decays_monotonically_along_rays():
    rng = np.random.default_rng(0)
    for system in (
        MolecularSystem.atom(1.0, 1),
        MolecularSystem([[0, 0, 0], [0.8, 0, 0]], [1.0, 3.0], 1),
    ):
        for _ in range(20):
            direction = rng.normal(size=3)
            direction /= np.linalg.norm(direction)
            ts = np.linspace(2.0, 60.0, 40)
            values = np.array([abs(potential(system, [t * direction])) for t in ts])
            assert np.all(np.diff(values) < 0.0)
            assert values[-1] < 0.1 * values[0]


def test_coalescence_distance_rotation_invariant():
    rng = np.random.default_rng(1)
    base_nuclei = rng.normal(size=(2, 3))
    x = rng.normal(size=(4, 3))
    reference = coalescence_distance(MolecularSystem(base_nuclei, [1.0, 2.0], 4), x)
    for _ in range(25):
        q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
        rotated = coalescence_distance(
            MolecularSystem(base_nuclei @ q.T, [1.0, 2.0], 4), x @ q.T
        )
        assert rotated == pytest.approx(reference, abs=1e-12)


def test_system_validation():
    with pytest.raises(ValueError):
        MolecularSystem([[0, 0, 0], [0, 0, 0]], [1.0, 1.0], 1)
    with pytest.raises(ValueError):
        MolecularSystem([[0, 0, 0]], [-1.0], 1)
    with pytest.raises(ValueError):
        MolecularSystem([[0, 0, 0]], [1.0], 0)


class TestSchrodingerResidual:
    system = MolecularSystem.atom(1.0, 1)
    eigen = HydrogenicProduct(1, 0.5, charge=1.0)

    def test_exact_eigenpair_residual_vanishes(self):
        x = np.array([[0.3, -0.8, 0.5]])
        x /= np.linalg.norm(x)
        residual = schrodinger_residual(self.system, self.eigen, -0.25, x, step=1e-4)
        assert abs(residual) < 1e-6 * abs(self.eigen(x))

    def test_energy_shift_is_linear(self):
        x = np.array([[1.0, 0.0, 0.0]])
        base = schrodinger_residual(self.system, self.eigen, -0.25, x, step=1e-4)
        shifted = schrodinger_residual(self.system, self.eigen, -0.25 + 0.1, x, step=1e-4)
        assert shifted - base == pytest.approx(-0.1 * self.eigen(x), abs=1e-13)

    def test_non_eigenfunction_has_large_residual(self):
        wrong = HydrogenicProduct(1, 1.0)
        x = np.array([[1.0, 0.0, 0.0]])
        residual = schrodinger_residual(self.system, wrong, -0.25, x, step=1e-4)
        # analytic: (-a^2 + 2a/r - 1/r - E) psi = (-1 + 2 - 1 + 1/4) psi = psi/4
        assert abs(residual) > 0.1 * abs(wrong(x))
        assert residual == pytest.approx(0.25 * wrong(x), rel=1e-5)

    def test_refuses_stencil_near_singularity(self):
        with pytest.raises(TooCloseToSingularity):
            schrodinger_residual(self.system, self.eigen, -0.25, [[5e-4, 0, 0]], step=1e-4)
