"""Truncated Taylor arithmetic against closed-form derivatives and finite differences."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gen_randers import jets
from gen_randers.jets import Jet, JetDomainError, jet_space


def seeds(values, order=4):
    space = jet_space(len(values), order)
    return [Jet.variable(i, v, space, order) for i, v in enumerate(values)]


class TestSpace:
    def test_monomial_count(self):
        space = jet_space(4, 4)
        assert space.size(4) == math.comb(8, 4)
        assert space.size(0) == 1

    def test_cached(self):
        assert jet_space(3, 2) is jet_space(3, 2)


class TestArithmetic:
    def test_polynomial_derivatives_exact(self):
        x, y = seeds([0.7, -1.3])
        f = x ** 3 * y + 2 * x * y ** 2 - 5
        assert f.value == pytest.approx(0.7 ** 3 * -1.3 + 2 * 0.7 * 1.69 - 5)
        assert f.partial((1, 0)) == pytest.approx(3 * 0.49 * -1.3 + 2 * 1.69)
        assert f.partial((1, 1)) == pytest.approx(3 * 0.49 + 4 * -1.3)
        assert f.partial((3, 1)) == pytest.approx(6.0)
        assert f.partial((2, 2)) == pytest.approx(0.0)

    def test_division_and_reciprocal(self):
        x, y = seeds([2.0, 3.0])
        f = x / y
        assert f.partial((0, 1)) == pytest.approx(-2.0 / 9.0)
        assert f.partial((0, 3)) == pytest.approx(-6 * 2.0 / 3.0 ** 4)

    def test_division_by_zero_jet_raises(self):
        x, = seeds([0.0])
        with pytest.raises(JetDomainError):
            jets.reciprocal(x)

    def test_log_domain(self):
        x, = seeds([-1.0])
        with pytest.raises(JetDomainError):
            jets.log(x)

    def test_derivative_lowers_order(self):
        x, y = seeds([0.5, 0.5], order=3)
        f = jets.sin(x * y)
        assert f.d(0).order == 2
        assert f.d(0).d(1).d(1).order == 0

    def test_integer_power_matches_repeated_product(self):
        x, y = seeds([1.1, 0.4])
        u = x + 2 * y
        np.testing.assert_allclose(jets.power(u, 5).c, (u * u * u * u * u).c, rtol=1e-13)

    def test_mixed_order_truncates(self):
        x, = seeds([1.0], order=4)
        low = x.truncate(2)
        assert (x * low).order == 2


class TestTranscendental:
    @pytest.mark.parametrize("fn,ref", [
        (jets.exp, lambda t: math.exp(t)),
        (jets.sin, lambda t: math.sin(t)),
        (jets.cos, lambda t: math.cos(t)),
        (jets.sqrt, lambda t: math.sqrt(t)),
        (jets.log, lambda t: math.log(t)),
    ])
    def test_against_finite_differences(self, fn, ref):
        a, b = 0.8, 0.3
        x, y = seeds([a, b])
        f = fn(x * x + y)
        g = lambda s, t: ref(s * s + t)  # noqa: E731
        h = 1e-4
        d_x = (g(a + h, b) - g(a - h, b)) / (2 * h)
        d_xy = (g(a + h, b + h) - g(a + h, b - h) - g(a - h, b + h) + g(a - h, b - h)) / (4 * h * h)
        assert f.partial((1, 0)) == pytest.approx(d_x, rel=1e-7)
        assert f.partial((1, 1)) == pytest.approx(d_xy, rel=1e-6)

    def test_univariate_high_order_exp(self):
        x, = seeds([0.3], order=6)
        f = jets.exp(2 * x)
        for k in range(7):
            assert f.partial((k,)) == pytest.approx(2 ** k * math.exp(0.6), rel=1e-13)


class TestTensors:
    def test_einsum_matches_numpy_on_values(self):
        x, y = seeds([0.2, 0.9])
        m = jets.stack([jets.stack([x, y]), jets.stack([y * y, x + 1])])
        v = jets.stack([x, 2 * y])
        out = jets.einsum("ij,j->i", m, v)
        np.testing.assert_allclose(out.value, m.value @ v.value)

    def test_inverse(self):
        x, y = seeds([0.4, -0.2])
        m = jets.stack([jets.stack([2 + x, y]), jets.stack([y, 1 + x * y])])
        mi = jets.inv(m)
        prod = jets.einsum("ij,jk->ik", m, mi)
        np.testing.assert_allclose(prod.c[..., 0], np.eye(2), atol=1e-14)
        np.testing.assert_allclose(prod.c[..., 1:], 0.0, atol=1e-13)

    def test_numpy_operand_defers_to_jet(self):
        x, = seeds([1.0])
        out = np.eye(2) - jets.stack([x, x])
        assert isinstance(out, Jet)


finite = st.floats(min_value=-2.0, max_value=2.0, allow_nan=False)


class TestProperties:
    @settings(max_examples=40, deadline=None)
    @given(finite, finite, finite)
    def test_leibniz_rule(self, a, b, c):
        x, y = seeds([a, b])
        u = jets.sin(x) + c * y
        v = jets.exp(y) * x
        lhs = (u * v).d(0)
        rhs = u.d(0) * v + u * v.d(0)
        np.testing.assert_allclose(lhs.c, rhs.c, atol=1e-10 * (1 + np.abs(lhs.c).max()))

    @settings(max_examples=40, deadline=None)
    @given(st.floats(min_value=0.1, max_value=5.0), finite)
    def test_exp_log_roundtrip(self, a, b):
        x, y = seeds([a, b])
        u = x + 0.01 * y * y
        np.testing.assert_allclose(jets.exp(jets.log(u)).c, u.c, rtol=1e-11, atol=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(finite, finite)
    def test_mixed_partials_commute(self, a, b):
        x, y = seeds([a, b])
        f = jets.cos(x * y) * jets.exp(x - y)
        np.testing.assert_allclose(f.d(0).d(1).c, f.d(1).d(0).c, atol=1e-12)
