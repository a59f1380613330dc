"""Jet arithmetic against exact algebra and finite-difference oracles."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blenderlab.errors import DimensionMismatch
from blenderlab.jets import (Jet, SignedPolynomial, d_prime, eval_P_delta,
                             identity_jets, jet_add, jet_compose_scalar,
                             jet_mul, multi_indices)
from helpers import fd_derivative


def rand_jet(rng, k, d, scale=1.0):
    return Jet(k, d, rng.uniform(-scale, scale, len(multi_indices(k, d))))


class TestBasics:
    def test_add_cancellation(self):
        a, = identity_jets(1, 2)
        s = jet_add(1 + a, 1 - a)
        assert np.allclose(s.c, [2.0, 0.0, 0.0])

    def test_add_identity(self):
        rng = np.random.default_rng(1)
        x = rand_jet(rng, 2, 2)
        z = Jet.constant(2, 2, 0.0)
        assert np.array_equal((x + z).c, x.c)

    def test_mul_trivial(self):
        a, = identity_jets(1, 2)
        p = jet_mul(1 + a, 1 - a)
        assert np.allclose(p.c, [1.0, 0.0, -1.0])

    def test_mul_identity(self):
        rng = np.random.default_rng(2)
        x = rand_jet(rng, 2, 3)
        one = Jet.constant(2, 3, 1.0)
        assert np.allclose((x * one).c, x.c)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            jet_add(Jet.constant(1, 2, 0.0), Jet.constant(1, 3, 0.0))
        with pytest.raises(DimensionMismatch):
            jet_mul(Jet.constant(1, 2, 0.0), Jet.constant(2, 2, 0.0))

    def test_deriv_vs_coeff(self):
        x = Jet.from_coeffs(1, 3, {(0,): 1.0, (1,): 2.0, (2,): 3.0, (3,): 4.0})
        assert x.deriv((2,)) == pytest.approx(6.0)
        assert x.deriv((3,)) == pytest.approx(24.0)


class TestAlgebraicLaws:
    def test_thousand_random_pairs(self):
        rng = np.random.default_rng(7)
        for _ in range(1000):
            k = int(rng.integers(1, 3))
            d = int(rng.integers(0, 4))
            x, y, z = (rand_jet(rng, k, d) for _ in range(3))
            assert np.max(np.abs((x * y).c - (y * x).c)) <= 1e-12
            assert np.max(np.abs(((x * y) * z).c - (x * (y * z)).c)) <= 1e-12
            lhs = (x * (y + z)).c
            rhs = (x * y + x * z).c
            assert np.max(np.abs(lhs - rhs)) <= 1e-12  # coefficient-wise

    @given(st.lists(st.floats(-2, 2), min_size=3, max_size=3),
           st.lists(st.floats(-2, 2), min_size=3, max_size=3))
    @settings(max_examples=50, deadline=None)
    def test_commutativity_hypothesis(self, cx, cy):
        x = Jet(1, 2, np.array(cx))
        y = Jet(1, 2, np.array(cy))
        assert np.max(np.abs((x * y).c - (y * x).c)) <= 1e-12


class TestComposition:
    def test_identity(self):
        rng = np.random.default_rng(3)
        x = rand_jet(rng, 1, 3, 0.5)
        out = jet_compose_scalar([x.value(), 1.0, 0.0, 0.0], x)
        assert np.allclose(out.c, x.c, atol=1e-14)

    def test_square(self):
        a, = identity_jets(1, 2)
        out = jet_compose_scalar([0.0, 0.0, 2.0], a)
        assert np.allclose(out.c, [0.0, 0.0, 1.0])

    def test_sin_vs_fd(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            base = rng.uniform(-1, 1)
            a, = identity_jets(1, 2, [base])
            derivs = [math.sin(base), math.cos(base), -math.sin(base)]
            out = jet_compose_scalar(derivs, a)
            for order in (1, 2):
                want = fd_derivative(lambda v: math.sin(v[0]), [base], (order,))
                assert out.deriv((order,)) == pytest.approx(want, rel=1e-6, abs=1e-8)

    def test_inverse_recovers(self):
        # exp then log recovers the input to 1e-9
        rng = np.random.default_rng(5)
        for _ in range(25):
            x = rand_jet(rng, 1, 3, 0.4)
            x0 = x.value()
            e = x.compose_scalar([math.exp(x0)] * 4)
            y0 = e.value()
            logd = [math.log(y0), 1 / y0, -1 / y0 ** 2, 2 / y0 ** 3]
            back = e.compose_scalar(logd)
            assert np.max(np.abs(back.c - x.c)) <= 1e-9

    def test_reciprocal_and_sqrt(self):
        rng = np.random.default_rng(6)
        x = rand_jet(rng, 2, 2, 0.3) + 2.0
        assert np.max(np.abs((x * x.reciprocal()).c
                             - Jet.constant(2, 2, 1.0).c)) <= 1e-12
        s = x.sqrt()
        assert np.max(np.abs((s * s).c - x.c)) <= 1e-12


class TestSignedPolynomials:
    def test_k1_d2_example(self):
        # delta = (+1, -1, +1): P(a) = -a + a^2/2, derivatives (0, -1, +1)
        p = SignedPolynomial((1, -1, 1), 1, 2)
        jet = eval_P_delta(p, identity_jets(1, 2))
        assert jet.deriv((0,)) == 0.0
        assert jet.deriv((1,)) == pytest.approx(-1.0)
        assert jet.deriv((2,)) == pytest.approx(1.0)

    def test_vanishes_at_zero(self):
        rng = np.random.default_rng(8)
        for _ in range(10):
            k = int(rng.integers(1, 3))
            d = int(rng.integers(1, 4 - k))
            delta = tuple(rng.choice([-1, 1], d_prime(k, d) + 1))
            p = SignedPolynomial(delta, k, d)
            assert eval_P_delta(p, identity_jets(k, d)).value() == 0.0

    def test_k2_d1_basis_order(self):
        # graded lex basis (X1, X2): delta = (+1, -1, +1) -> P = -X1 + X2
        p = SignedPolynomial((1, -1, 1), 2, 1)
        jet = eval_P_delta(p, identity_jets(2, 1))
        assert jet.deriv((1, 0)) == pytest.approx(-1.0)
        assert jet.deriv((0, 1)) == pytest.approx(1.0)
        # direct polynomial evaluation oracle
        val = p.eval([0.3, -0.2])
        assert val == pytest.approx(-0.3 - 0.2)

    def test_wrong_signature(self):
        with pytest.raises(DimensionMismatch):
            SignedPolynomial((1, -1), 1, 2)
        with pytest.raises(ValueError):
            SignedPolynomial((1, 0, 1), 1, 2)

    def test_dprime_counts(self):
        assert d_prime(1, 2) == 2
        assert d_prime(2, 1) == 2
        assert d_prime(2, 2) == 5
        assert d_prime(1, 0) == 0


class TestFiniteDifferenceAgreement:
    def test_random_products(self):
        rng = np.random.default_rng(9)
        for _ in range(50):
            base = rng.uniform(-0.5, 0.5, 2)
            c1 = rng.uniform(-2, 2, 3)
            c2 = rng.uniform(-2, 2, 3)

            def f(v, c1=c1, c2=c2):
                g = c1[0] + c1[1] * v[0] + c1[2] * v[1] ** 2
                h = c2[0] + c2[1] * math.sin(v[1]) + c2[2] * v[0] * v[1]
                return g * h

            a1, a2 = identity_jets(2, 2, base)
            g = c1[0] + c1[1] * a1 + c1[2] * a2 * a2
            sin_a2 = a2.compose_scalar(
                [math.sin(base[1]), math.cos(base[1]), -math.sin(base[1])])
            h = c2[0] + c2[1] * sin_a2 + c2[2] * a1 * a2
            jet = g * h
            for alpha in multi_indices(2, 2):
                want = fd_derivative(f, base, alpha)
                got = jet.deriv(alpha)
                assert got == pytest.approx(want, rel=1e-6, abs=1e-7)
