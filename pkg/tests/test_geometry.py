"""Cartan-frame tensors on metrics with known closed forms."""

import numpy as np
import pytest

from gen_randers import jets
from gen_randers.geometry import (DegenerateMetricError, MetricField, SlitPoint,
                                  fundamental_tensor, spray_and_nonlinear_connection)

E = jets.einsum

EUCLID = MetricField.from_expression("sqrt(y1^2+y2^2)", 2)
CONFORMAL = MetricField.from_expression("exp(x1)*sqrt(y1^2+y2^2)", 2)
HYPERBOLIC = MetricField.from_expression("sqrt(y1^2+y2^2)/x2", 2)
FINSLER = MetricField.from_expression("sqrt((1+x2^2)*y1^2+y2^2)+0.2*sin(x1)*y2", 2)
EUCLID3 = MetricField.from_expression("sqrt(y1^2+y2^2+y3^2)", 3)

P = SlitPoint((0.3, -0.2), (0.8, 0.5))
PH = SlitPoint((0.3, 1.4), (0.8, 0.5))


def conformal_christoffel(x, y):
    """Levi-Civita symbols of exp(2 x1) delta written out by hand."""
    G = np.zeros((2, 2, 2))
    G[0, 0, 0] = 1.0
    G[0, 1, 1] = -1.0
    G[1, 0, 1] = G[1, 1, 0] = 1.0
    return G


class TestSlitPoint:
    def test_zero_vector_rejected(self):
        with pytest.raises(ValueError):
            SlitPoint((0.0, 0.0), (0.0, 0.0))

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            SlitPoint((0.0, 0.0), (1.0,))


class TestEuclidean:
    def test_flat_quantities(self):
        fr = EUCLID.frame(P)
        np.testing.assert_allclose(fr.g.value, np.eye(2), atol=1e-15)
        np.testing.assert_allclose(fr.C.value, 0.0, atol=1e-15)
        np.testing.assert_allclose(fr.G.value, 0.0, atol=1e-15)
        for t in fr.curvatures():
            np.testing.assert_allclose(t.value, 0.0, atol=1e-14)

    def test_angular_metric_projects_out_y(self):
        fr = EUCLID3.frame(SlitPoint((0.0, 0.0, 0.0), (1.0, 2.0, 2.0)))
        u = np.array([1.0, 2.0, 2.0]) / 3.0
        np.testing.assert_allclose(fr.h.value, np.eye(3) - np.outer(u, u), atol=1e-15)


class TestConformal:
    def test_metric_and_spray(self):
        fr = CONFORMAL.frame(P)
        e = np.exp(2 * P.x[0])
        np.testing.assert_allclose(fr.g.value, e * np.eye(2), rtol=1e-14, atol=1e-15)
        y = np.array(P.y)
        G = 0.5 * np.einsum("ijk,j,k->i", conformal_christoffel(P.x, y), y, y)
        np.testing.assert_allclose(fr.G.value, G, rtol=1e-14, atol=1e-15)

    def test_cartan_coefficients_are_levi_civita(self):
        fr = CONFORMAL.frame(P)
        np.testing.assert_allclose(fr.Gamma_bar.value, conformal_christoffel(P.x, P.y), atol=1e-14)
        np.testing.assert_allclose(fr.Gamma.value, fr.Gamma_bar.value, atol=1e-14)

    def test_flat_in_two_dimensions(self):
        R, P_, Q = CONFORMAL.frame(P).curvatures()
        np.testing.assert_allclose(R.value, 0.0, atol=1e-13)


class TestHyperbolic:
    def test_sectional_curvature_minus_one(self):
        fr = HYPERBOLIC.frame(PH)
        R, P_, Q = fr.curvatures("commutator")
        g = fr.g.value
        K = np.einsum("h,h->", g[0], R.value[:, 1, 0, 1]) / (g[0, 0] * g[1, 1] - g[0, 1] ** 2)
        assert K == pytest.approx(-1.0, rel=1e-12)

    def test_negated_convention(self):
        fr = HYPERBOLIC.frame(PH)
        for a, b in zip(fr.curvatures("commutator"), fr.curvatures("negated")):
            np.testing.assert_allclose(a.value, -b.value)

    def test_riemannian_mixed_curvatures_vanish(self):
        _, P_, Q = HYPERBOLIC.frame(PH).curvatures()
        np.testing.assert_allclose(P_.value, 0.0, atol=1e-12)
        np.testing.assert_allclose(Q.value, 0.0, atol=1e-12)

    def test_unknown_convention(self):
        with pytest.raises(ValueError):
            HYPERBOLIC.frame(PH).curvatures("other")


class TestFinslerBase:
    def test_homogeneity(self):
        fr = FINSLER.frame(P, 3)
        for lam in (0.5, 2.5):
            sc = FINSLER.frame(P.scaled(lam), 3)
            assert sc.L.value == pytest.approx(lam * fr.L.value)
            np.testing.assert_allclose(sc.g.value, fr.g.value, rtol=1e-13)
            np.testing.assert_allclose(sc.C_lower.value, fr.C_lower.value / lam, rtol=1e-12)
            np.testing.assert_allclose(sc.G.value, lam ** 2 * fr.G.value, rtol=1e-12)
            np.testing.assert_allclose(sc.N.value, lam * fr.N.value, rtol=1e-12)

    def test_euler_and_torsion_symmetry(self):
        fr = FINSLER.frame(P, 3)
        y = np.array(P.y)
        assert y @ fr.g.value @ y == pytest.approx(fr.L.value ** 2, rel=1e-14)
        C = fr.C_lower.value
        np.testing.assert_allclose(C, C.transpose(1, 0, 2), atol=1e-15)
        np.testing.assert_allclose(C, C.transpose(2, 1, 0), atol=1e-15)
        np.testing.assert_allclose(C @ y, 0.0, atol=1e-14)
        assert np.abs(C).max() > 1e-2

    def test_metric_compatibility_and_deflection(self):
        fr = FINSLER.frame(P, 3)
        np.testing.assert_allclose(fr.hcov(fr.g, "ll").value, 0.0, atol=1e-13)
        np.testing.assert_allclose(fr.vcov(fr.g, "ll").value, 0.0, atol=1e-13)
        np.testing.assert_allclose(E("hij,j->hi", fr.Gamma_bar, fr.y).value, fr.N.value,
                                   atol=1e-14)

    def test_two_dimensional_q_vanishes(self):
        _, _, Q = FINSLER.frame(P).curvatures()
        np.testing.assert_allclose(Q.value, 0.0, atol=1e-12)

    def test_operation_helpers(self):
        g = fundamental_tensor(FINSLER, P)
        assert g.variance == "ll"
        G, N = spray_and_nonlinear_connection(FINSLER, P)
        np.testing.assert_allclose(np.asarray(N.components) @ np.array(P.y),
                                   2 * np.asarray(G.components), atol=1e-13)


class TestErrors:
    def test_degenerate_metric(self):
        m = MetricField.from_expression("y1+0*y2", 2)
        with pytest.raises(DegenerateMetricError):
            m.frame(SlitPoint((0.0, 0.0), (1.0, 0.5))).ginv

    def test_nonpositive_L(self):
        m = MetricField.from_expression("y1+0*y2", 2)
        with pytest.raises(DegenerateMetricError):
            m.frame(SlitPoint((0.0, 0.0), (-1.0, 0.5)))

    def test_evaluation_matches_float(self):
        assert FINSLER(P.x, P.y) == pytest.approx(FINSLER.frame(P, 1).L.value)
