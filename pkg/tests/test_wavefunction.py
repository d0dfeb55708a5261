import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from edens import (
    CertificateViolated,
    CorrelatedToy,
    DecayCertificate,
    HydrogenicProduct,
    MolecularSystem,
    decay_check,
    schrodinger_residual,
)
from edens import fd


class TestEvaluation:
    def test_product_value(self):
        model = HydrogenicProduct(2, 1.0)
        assert model(np.array([[1.0, 0, 0], [0.0, 0, 0]])) == pytest.approx(np.exp(-1.0))

    def test_correlated_value_with_coincident_pair(self):
        model = CorrelatedToy(2, 2.0, 0.25)
        x = np.array([[1.0, 0, 0], [1.0, 0, 0]])
        assert model(x) == pytest.approx(np.exp(-4.0))

    def test_value_at_origin(self):
        assert HydrogenicProduct(3, 1.0)(np.zeros((3, 3))) == 1.0

    @given(st.integers(0, 2**32 - 1), st.permutations([0, 1, 2]))
    @settings(max_examples=30, deadline=None)
    def test_permutation_symmetry(self, seed, perm):
        x = np.random.default_rng(seed).normal(size=(3, 3))
        for model in (HydrogenicProduct(3, 1.0), CorrelatedToy(3, 1.5, 0.3)):
            assert model(x[list(perm)]) == pytest.approx(model(x), rel=1e-13)


class TestDerivatives:
    @pytest.mark.parametrize(
        "model",
        [HydrogenicProduct(3, 1.2), CorrelatedToy(3, 1.5, 0.3)],
        ids=["hydrogenic", "correlated"],
    )
    def test_gradient_matches_fd(self, model):
        rng = np.random.default_rng(71)
        flat = lambda v: model(v.reshape(v.shape[:-1] + (3, 3)))
        for _ in range(25):
            x = rng.normal(size=(3, 3)) * 1.3
            oracle = fd.gradient(flat, x.reshape(9), step=1e-5)
            closed = model.gradient(x).reshape(9)
            assert np.allclose(closed, oracle, rtol=1e-6, atol=1e-9)

    @pytest.mark.parametrize(
        "model",
        [HydrogenicProduct(3, 1.2), CorrelatedToy(3, 1.5, 0.3)],
        ids=["hydrogenic", "correlated"],
    )
    def test_directional_second_matches_fd(self, model):
        rng = np.random.default_rng(73)
        for _ in range(25):
            x = rng.normal(size=(3, 3)) * 1.3
            v = rng.normal(size=(3, 3))
            w = rng.normal(size=(3, 3))
            # (v.grad)(w.grad) psi via nested central differences
            h = 1e-4

            def dw(point):
                return (model(point + h * w) - model(point - h * w)) / (2 * h)

            oracle = (dw(x + h * v) - dw(x - h * v)) / (2 * h)
            closed = model.directional_second(x, v, w)
            assert closed == pytest.approx(oracle, rel=5e-6, abs=1e-10)
            # symmetry of second derivatives
            assert closed == pytest.approx(model.directional_second(x, w, v), rel=1e-12)


class TestDecayCertificates:
    def test_hydrogenic_certificate_holds(self):
        model = HydrogenicProduct(2, 1.0)
        report = decay_check(model, 20000, (0.5, 8.0), seed=3)
        assert report.max_ratio <= 1.0

    def test_correlated_certificate_holds(self):
        model = CorrelatedToy(3, 2.0, 0.25)
        assert model.decay.rate == pytest.approx(1.5)
        report = decay_check(model, 20000, (0.5, 8.0), seed=5)
        assert report.max_ratio <= 1.0

    def test_overstated_rate_is_caught(self):
        model = HydrogenicProduct(2, 1.0)
        wrong = DecayCertificate(1.0, 2.0)
        with pytest.raises(CertificateViolated) as info:
            decay_check(model, 1000, (0.5, 8.0), seed=7, certificate=wrong)
        assert info.value.witness.shape == (2, 3)

    def test_unstable_constructor_rejected(self):
        with pytest.raises(ValueError):
            CorrelatedToy(3, 1.0, 0.6)  # rate 1.0 - 1.2 < 0
        with pytest.raises(ValueError):
            CorrelatedToy(2, 1.0, 1.5)  # b > a
        with pytest.raises(ValueError):
            DecayCertificate(0.0, 1.0)


class TestEigenpairs:
    def test_known_energy_only_for_exact_case(self):
        assert HydrogenicProduct(1, 0.5, charge=1.0).energy == pytest.approx(-0.25)
        assert HydrogenicProduct(1, 1.0, charge=1.0).energy is None
        assert HydrogenicProduct(2, 1.0, charge=2.0).energy is None
        assert CorrelatedToy(2, 1.0, 0.2).energy is None

    def test_single_electron_residual_vanishes_but_pair_does_not(self):
        one = MolecularSystem.atom(2.0, 1)
        eigen = HydrogenicProduct(1, 1.0, charge=2.0)
        x = np.array([[0.7, 0.1, -0.3]])
        assert abs(schrodinger_residual(one, eigen, eigen.energy, x, step=1e-4)) < 1e-5

        two = MolecularSystem.atom(2.0, 2)
        product = HydrogenicProduct(2, 1.0, charge=2.0)
        x2 = np.array([[0.7, 0.1, -0.3], [-0.5, 0.6, 0.2]])
        residual = schrodinger_residual(two, product, -2.0, x2, step=1e-4)
        assert abs(residual) > 0.01 * abs(product(x2))
