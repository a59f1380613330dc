"""Greedy coding: min jets, pullback recursion, offset verdicts."""

import numpy as np
import pytest

from blenderlab.dynamics import make_family, param_jets
from blenderlab.errors import DomainError, InvariantError
from blenderlab.ifs import SymbolWord, y_series
from blenderlab.jets import Jet
from blenderlab.paratangency import (ParabolaFamily, certify_parabola,
                                     constant_parabola, default_tolerance,
                                     eta_jet, greedy_code, greedy_step,
                                     min_gamma_jet, parabola_preimage,
                                     paratangency_verdict)
from helpers import fd_derivative


def wiggly_family(rng, k, d, eps, curvature=2.0):
    """Random admissible V_gamma member around 2 t^2."""
    from blenderlab.jets import multi_indices

    n = len(multi_indices(k, d))
    c0 = np.zeros(n)
    c0[1:] = rng.uniform(-eps / 4, eps / 4, n - 1)
    c0[0] = rng.uniform(-eps / 2, eps / 2)
    c1 = rng.uniform(-0.05, 0.05, n)
    c2 = np.zeros(n)
    c2[0] = curvature + rng.uniform(-0.2, 0.2)
    c2[1:] = rng.uniform(-0.02, 0.02, n - 1)
    coeffs = [Jet(k, d, c) for c in (c0, c1, c2)]
    return ParabolaFamily(0.0, coeffs, -1.0, 1.0)


class TestMinJet:
    def test_vertical_shift(self):
        # gamma_a(t) = 2 t^2 + c a: min jet (0, c, 0)
        k, d = 1, 2
        c = 0.017
        coeffs = [Jet.from_coeffs(k, d, {(1,): c}), Jet.constant(k, d, 0.0),
                  Jet.constant(k, d, 2.0)]
        p = ParabolaFamily(0.0, coeffs, -1.0, 1.0)
        m = min_gamma_jet(p, param_jets(make_family(k=k, d=d), [0.0]))
        assert m.c == pytest.approx(0.0, abs=1e-12)
        assert np.allclose(m.m.c, [0.0, c, 0.0], atol=1e-13)

    def test_moving_vertex(self):
        # gamma_a(t) = 2 (t - a)^2 + a^2: min value a^2, coefficient 1 at order 2
        k, d = 1, 2
        a, = param_jets(make_family(k=k, d=d))
        # expand in t around 0: 2(t-a)^2 + a^2 = 2t^2 - 4at + 3a^2
        coeffs = [3.0 * a * a, -4.0 * a, Jet.constant(k, d, 2.0)]
        p = ParabolaFamily(0.0, coeffs, -1.0, 1.0)
        m = min_gamma_jet(p, [a])
        assert m.m.coeff((2,)) == pytest.approx(1.0, abs=1e-12)
        assert m.m.value() == pytest.approx(0.0, abs=1e-14)
        assert m.m.coeff((1,)) == pytest.approx(0.0, abs=1e-12)

    def test_envelope_vs_numeric_minimization(self):
        rng = np.random.default_rng(41)
        k, d = 1, 2
        aj = param_jets(make_family(k=k, d=d), [0.0])
        for _ in range(10):
            p = wiggly_family(rng, k, d, 0.1)
            m = min_gamma_jet(p, aj)

            def minval(v):
                cs = [c.c[0] + c.c[1] * v[0] + c.c[2] * v[0] ** 2 for c in p.coeffs]
                # exact quadratic minimum in t
                t_star = -cs[1] / (2 * cs[2])
                t_star = min(max(t_star, -1.0), 1.0)
                return cs[0] + cs[1] * t_star + cs[2] * t_star ** 2

            for order in (1, 2):
                want = fd_derivative(minval, [0.0], (order,))
                assert m.m.deriv((order,)) == pytest.approx(want, rel=1e-5, abs=1e-7)


class TestPreimage:
    def test_exact_recursion(self):
        h = make_family("expanding", k=1, d=2, eps=0.05)
        aj = param_jets(h)
        rng = np.random.default_rng(42)
        for _ in range(20):
            p = wiggly_family(rng, 1, 2, 0.05)
            m = min_gamma_jet(p, aj)
            letter = greedy_step(m, 0.05)
            pre = parabola_preimage(h, p, letter, aj)
            m2 = min_gamma_jet(pre, aj)
            d1, d2 = m.derivs(), m2.derivs()
            pred = np.array([
                1.5 * (d1[0] - letter[0] / 3.0),
                1.5 * (d1[1] - 0.05 * letter[1]),
                1.5 * (d1[2] - 0.05 * letter[2]),
            ])
            assert np.max(np.abs(d2 - pred)) <= 1e-13

    def test_plain_value_step(self):
        # m0 = 0 and delta(0) = +1 pulls back to -1/2
        h = make_family("expanding", k=1, d=0, eps=0.05)
        aj = param_jets(h)
        p = constant_parabola(1, 0)
        pre = parabola_preimage(h, p, (1,), aj)
        m = min_gamma_jet(pre, aj)
        assert m.m.value() == pytest.approx(-0.5, abs=1e-13)

    def test_endpoints_preserved(self):
        h = make_family("expanding", k=1, d=1, eps=0.05)
        aj = param_jets(h)
        p = constant_parabola(1, 1)
        cur = p
        for _ in range(8):
            m = min_gamma_jet(cur, aj)
            cur = parabola_preimage(h, cur, greedy_step(m, 0.05), aj)
            cert = certify_parabola(cur)
            assert cert.endpoint_lo >= 1.5 - 1e-12
            assert cert.endpoint_hi >= 1.5 - 1e-12
            assert cert.curvature_min >= 1.0


class TestGreedy:
    def test_sign_readout_and_tie(self):
        k, d = 1, 2
        m = min_gamma_jet(constant_parabola(k, d), param_jets(make_family(k=k, d=d)))
        assert greedy_step(m, 0.05) == (1, 1, 1)  # ties resolve to +1
        shifted = ParabolaFamily(
            0.0,
            [Jet.from_coeffs(k, d, {(0,): 0.5, (1,): 0.03, (2,): -0.03}),
             Jet.constant(k, d, 0.0), Jet.constant(k, d, 2.0)],
            -1.0, 1.0)
        m2 = min_gamma_jet(shifted, param_jets(make_family(k=k, d=d)))
        assert greedy_step(m2, 0.05) == (1, 1, -1)

    def test_dagger_violation_raises(self):
        k, d = 1, 1
        bad = ParabolaFamily(
            0.0,
            [Jet.from_coeffs(k, d, {(0,): 0.0, (1,): 0.5}),
             Jet.constant(k, d, 0.0), Jet.constant(k, d, 2.0)],
            -1.0, 1.0)
        m = min_gamma_jet(bad, param_jets(make_family(k=k, d=d)))
        with pytest.raises(InvariantError):
            greedy_step(m, 0.05)  # |d_a min| = 0.5 > 2 eps

    def test_constant_parabola_trace(self):
        # all m_i = 0 for i >= 1; (dagger) margins >= 1/6 at every step
        h = make_family("expanding", k=1, d=2, eps=0.03)
        trace = greedy_code(h, constant_parabola(1, 2), param_jets(h), 25)
        for rec in trace.steps:
            assert abs(rec.min_derivs[0]) <= 2 / 3 - 1 / 6 + 1e-12
            assert rec.margin_m0 >= -1e-12
            assert rec.margin_mi >= -1e-12

    def test_depth_zero_empty(self):
        h = make_family("expanding", k=1, d=1, eps=0.05)
        trace = greedy_code(h, constant_parabola(1, 1), param_jets(h), 0)
        assert trace.word is None and trace.steps == []

    def test_smoothness_refusal(self):
        h = make_family("expanding", k=1, d=1, eps=0.05, smooth_order=1)
        with pytest.raises(DomainError):
            greedy_code(h, constant_parabola(1, 1), param_jets(h), 3)

    def test_admissibility_gate(self):
        h = make_family("expanding", k=1, d=1, eps=0.05)
        bad = ParabolaFamily(
            0.0,
            [Jet.from_coeffs(1, 1, {(0,): 0.3}), Jet.constant(1, 1, 0.0),
             Jet.constant(1, 1, 2.0)],
            -1.0, 1.0)
        with pytest.raises(InvariantError):
            greedy_code(h, bad, param_jets(h), 3)  # |min| > eps initially


class TestEta:
    def test_greedy_bound(self):
        h = make_family("expanding", k=1, d=2, eps=0.05)
        aj = param_jets(h)
        p = constant_parabola(1, 2)
        N = 30
        trace = greedy_code(h, p, aj, N)
        eta = eta_jet(h, p, trace.word, aj)
        for i in range(3):
            assert abs(eta.deriv((i,))) <= 4.0 * (2 / 3) ** N

    def test_wrong_word_detected(self):
        h = make_family("expanding", k=1, d=1, eps=0.05)
        aj = param_jets(h)
        p = constant_parabola(1, 1)
        trace = greedy_code(h, p, aj, 20)
        eta_good = eta_jet(h, p, trace.word, aj)
        flip_at = 4
        letters = list(trace.word.letters)
        letters[flip_at] = tuple(-s for s in letters[flip_at])
        eta_bad = eta_jet(h, p, SymbolWord(tuple(letters)), aj)
        # flipping delta_{-j}(0) moves the height by ~ (2/3)^{j-1} * 2/3
        gap = abs(eta_bad.value()) - abs(eta_good.value())
        assert gap >= 0.1 * (2 / 3) ** (flip_at + 1)

    def test_self_tangent_zero(self):
        # parabola whose min jet equals the word height: eta == 0
        h = make_family("expanding", k=1, d=1, eps=0.05)
        aj = param_jets(h)
        w = SymbolWord(((1, 1), (-1, -1), (1, -1)), periodic=False)
        height = y_series(SymbolWord(w.letters, periodic=True), 0.05, aj,
                          k=1, d=1).jet
        coeffs = [height, Jet.constant(1, 1, 0.0), Jet.constant(1, 1, 2.0)]
        p = ParabolaFamily(0.0, coeffs, -1.0, 1.0)
        eta = eta_jet(h, p, w, aj)
        assert np.max(np.abs(eta.c)) <= 1e-10

    def test_verdict_cases(self):
        z = Jet.constant(1, 2, 0.0)
        assert paratangency_verdict(z, 1e-12) == [True, True, True]
        bad = Jet.from_coeffs(1, 2, {(2,): 10 * 1e-3 / 2})  # order-2 entry 10 tol
        v = paratangency_verdict(bad, lambda i: 1e-3)
        assert v == [True, True, False]

    def test_coordinate_change_invariance(self):
        # a fixed parameter-independent affine chart leaves pass/fail unchanged
        h = make_family("expanding", k=1, d=2, eps=0.05)
        aj = param_jets(h)
        p = constant_parabola(1, 2)
        trace = greedy_code(h, p, aj, 30)
        eta = eta_jet(h, p, trace.word, aj)
        tol = default_tolerance(30)
        v1 = paratangency_verdict(eta, lambda i: tol)
        # chart (x, y) -> (x + 0.3, y + 0.7): offsets both families equally,
        # eta is untouched; a vertical scale gamma > 0 scales eta and tol alike
        for scale in (1.0, 2.0, 0.5):
            v2 = paratangency_verdict(eta * scale, lambda i: tol * scale)
            assert v1 == v2
