"""Generalized Randers structure ``L* = L + b_i(x) y^i`` and the closed-form
relations between the Cartan data of ``L`` and ``L*``.

Two independent routes are kept apart on purpose:

* :class:`StarQuantities` evaluates closed forms built only from the base
  frame and the 1-form (``C*`` inside the ``N``/``B`` formulas is ``C + A``);
* :class:`DirectDifferences` runs the geometry engine on ``L*`` itself and
  subtracts the base connection.

Indices are raised and lowered with the base metric ``g`` unless the name
carries ``star``.
"""

from __future__ import annotations

from functools import cached_property
from typing import Sequence

import numpy as np

from . import jets
from .expr import EvalContext, ExprAst, eval_jet, parse_expression
from .geometry import FinslerFrame, MetricField, SlitPoint
from .jets import Jet

ADMISSIBLE_B2 = 0.9


class AdmissibilityError(ValueError):
    """``b^2 = g^ij b_i b_j`` is too large for ``L*`` to be a Finsler metric."""


class OneFormField:
    """Components ``b_i(x)`` of a 1-form on the base manifold."""

    def __init__(self, components: Sequence[str | ExprAst], n: int):
        if len(components) != n:
            raise ValueError(f"expected {n} components, got {len(components)}")
        asts = []
        for c in components:
            ast = c if isinstance(c, ExprAst) else parse_expression(str(c), n)
            if any(kind == "y" for kind, _ in ast.variables()):
                raise ValueError(f"1-form component {str(ast)!r} depends on y")
            asts.append(ast)
        self.n = n
        self.components = tuple(asts)

    @classmethod
    def zero(cls, n: int) -> "OneFormField":
        return cls(["0"] * n, n)

    def jet(self, point: SlitPoint, ctx: EvalContext) -> Jet:
        return jets.stack([eval_jet(a, point.x, point.y, ctx) for a in self.components])

    def values(self, x: Sequence[float]) -> np.ndarray:
        y = (1.0,) + (0.0,) * (self.n - 1)
        ctx = EvalContext(self.n, 0)
        return np.array([float(eval_jet(a, x, y, ctx).value) for a in self.components])

    def __repr__(self) -> str:
        return f"OneFormField({[str(a) for a in self.components]})"


class RandersBundle:
    """A base metric together with a 1-form; synthesizes ``L*``."""

    def __init__(self, base: MetricField, form: OneFormField):
        if base.n != form.n:
            raise ValueError("metric and 1-form dimensions differ")
        self.base = base
        self.form = form
        self.n = base.n
        self.star = build_star_metric(self)

    def b_squared(self, point: SlitPoint) -> float:
        fr = self.base.frame(point, order=2)
        b = self.form.values(point.x)
        return float(b @ np.linalg.solve(fr.g.value, b))

    def check_admissible(self, point: SlitPoint, bound: float = 1.0) -> float:
        b2 = self.b_squared(point)
        if not b2 < bound:
            raise AdmissibilityError(f"b^2 = {b2:.6g} >= {bound} at {point}")
        return b2

    def quantities(self, point: SlitPoint, order: int = 4) -> "StarQuantities":
        return StarQuantities(self, point, order)

    def direct(self, point: SlitPoint, order: int = 4) -> "DirectDifferences":
        return DirectDifferences(self, point, order)


def build_star_metric(bundle: RandersBundle, checked: bool = True) -> MetricField:
    """``L* = L + b_i(x) y^i`` as a metric field.

    With ``checked`` the builder refuses points where ``b^2 >= 1``.
    """
    base, form = bundle.base, bundle.form

    def builder(point: SlitPoint, ctx: EvalContext) -> Jet:
        if checked:
            bundle.check_admissible(point)
        L = base.jet(point, ctx.order)
        b = form.jet(point, ctx)
        y = jets.stack([Jet.variable(ctx.n + i, point.y[i], ctx.space, ctx.order)
                        for i in range(ctx.n)])
        return L + jets.einsum("i,i->", b, y)

    return MetricField(base.n, builder, name=f"{base.name}*")


class StarQuantities:
    """Closed-form starred tensors and difference tensors at one point."""

    def __init__(self, bundle: RandersBundle, point: SlitPoint, order: int = 4,
                 base_frame: FinslerFrame | None = None):
        self.bundle = bundle
        self.point = point
        self.n = bundle.n
        self.order = order
        self.fr = base_frame or bundle.base.frame(point, order)
        self.b = bundle.form.jet(point, EvalContext(self.n, order))

    # scalars ---------------------------------------------------------
    @cached_property
    def alpha(self) -> Jet:
        return jets.einsum("i,i->", self.b, self.fr.y)

    @cached_property
    def L_star(self) -> Jet:
        return self.fr.L + self.alpha

    @cached_property
    def tau(self) -> Jet:
        return self.L_star / self.fr.L

    @cached_property
    def b_up(self) -> Jet:
        return jets.einsum("ij,j->i", self.fr.ginv, self.b)

    @cached_property
    def b2(self) -> Jet:
        return jets.einsum("i,i->", self.b, self.b_up)

    @cached_property
    def mu(self) -> Jet:
        return (self.fr.L * self.b2 + self.alpha) / (self.L_star * self.tau * self.tau)

    # starred metric tensors (closed form) ---------------------------------
    @cached_property
    def omega(self) -> Jet:
        """``omega_i = dot-d_i alpha = b_i``."""
        return self.b

    @cached_property
    def ell_star(self) -> Jet:
        return self.fr.ell + self.omega

    @cached_property
    def ell_star_up(self) -> Jet:
        return self.fr.y / self.L_star

    @cached_property
    def h_star(self) -> Jet:
        return self.tau * self.fr.h

    @cached_property
    def g_star(self) -> Jet:
        return self.h_star + jets.einsum("i,j->ij", self.ell_star, self.ell_star)

    @cached_property
    def g_star_inv(self) -> Jet:
        fr = self.fr
        lu, bu = fr.ell_up, self.b_up
        lb = jets.einsum("i,j->ij", lu, bu)
        return (fr.ginv / self.tau + self.mu * jets.einsum("i,j->ij", lu, lu)
                - (lb + lb.T) / (self.tau * self.tau))

    @cached_property
    def h_star_mixed(self) -> Jet:
        """``h*^h_i = g*^hk h*_ki``, stored ``[h, i]``."""
        return jets.einsum("hk,ki->hi", self.g_star_inv, self.h_star)

    # m, nu, phi -------------------------------------------------------
    @cached_property
    def m(self) -> Jet:
        L = self.fr.L
        return self.b_up - self.fr.y * (self.alpha / (L * L))

    @cached_property
    def nu(self) -> Jet:
        return jets.einsum("ij,j->i", self.fr.g, self.m)

    @cached_property
    def nu_closed(self) -> Jet:
        """``nu_i = b_i - (alpha / L) l_i`` without going through ``g``."""
        return self.b - self.fr.ell * (self.alpha / self.fr.L)

    @cached_property
    def phi(self) -> Jet:
        """``phi^i_j = delta^i_j - l^i l_j``."""
        return np.eye(self.n) - jets.einsum("i,j->ij", self.fr.ell_up, self.fr.ell)

    @cached_property
    def phi_star(self) -> Jet:
        return self.phi - jets.einsum("i,j->ij", self.fr.y, self.nu) / self.L_star

    @cached_property
    def nu_m(self) -> Jet:
        return jets.einsum("i,i->", self.nu, self.m)

    # torsion-side closed forms --------------------------------------------
    @cached_property
    def omega_T(self) -> Jet:
        """``omega(T(d_i, d_j)) = b_h C^h_ij``."""
        return jets.einsum("h,hij->ij", self.omega, self.fr.C)

    @cached_property
    def A(self) -> Jet:
        """Vertical difference tensor ``A^h_ij`` from its closed form."""
        fr, Ls = self.fr, self.L_star
        nu, phi, y = self.nu, self.phi, fr.y
        first = (jets.einsum("ij,h->hij", fr.h, self.m)
                 + jets.einsum("i,hj->hij", nu, phi)
                 + jets.einsum("hi,j->hij", phi, nu)) / (2 * Ls)
        second = (2 * Ls * jets.einsum("ij,h->hij", self.omega_T, y)
                  + 2 * jets.einsum("i,j,h->hij", nu, nu, y)
                  + self.nu_m * jets.einsum("ij,h->hij", fr.h, y)) / (2 * Ls * Ls)
        return first - second

    @cached_property
    def A_star_lower(self) -> Jet:
        """``A*(X,Y,Z) = g*(A(X,Y), Z)`` with the closed-form ``A``."""
        return jets.einsum("hij,hk->ijk", self.A, self.g_star)

    @cached_property
    def A_star_eq10(self) -> Jet:
        h, nu = self.fr.h, self.nu
        sym = (jets.einsum("ij,k->ijk", h, nu) + jets.einsum("jk,i->ijk", h, nu)
               + jets.einsum("ik,j->ijk", h, nu))
        return sym / (2 * self.fr.L) - jets.einsum("ij,k->ijk", self.omega_T, self.ell_star)

    @cached_property
    def h_nu_sym(self) -> Jet:
        h, nu = self.fr.h, self.nu
        return (jets.einsum("ij,k->ijk", h, nu) + jets.einsum("jk,i->ijk", h, nu)
                + jets.einsum("ik,j->ijk", h, nu))

    @cached_property
    def T_star_lower(self) -> Jet:
        """``T*(X,Y,Z)`` per the torsion relation ``tau T + (1/2L) h.nu``."""
        return self.tau * self.fr.C_lower + self.h_nu_sym / (2 * self.fr.L)

    @cached_property
    def C_star(self) -> Jet:
        """``C*^h_ij = C^h_ij + A^h_ij`` (closed form)."""
        return self.fr.C + self.A

    @cached_property
    def C_star_lower(self) -> Jet:
        return jets.einsum("hij,hk->ijk", self.C_star, self.g_star)

    @cached_property
    def C_star_trace(self) -> Jet:
        """Trace form ``C* = C + (n+1)/(2L*) nu``."""
        return self.fr.C_trace + (self.n + 1) / (2 * self.L_star) * self.nu

    # covariant derivative of b --------------------------------------------
    @cached_property
    def b_cov(self) -> Jet:
        """``b_ij = nabla_{e_i} b_j``, stored ``[i, j]``."""
        return self.fr.hcov(self.b, "l").T

    @cached_property
    def b_sym(self) -> Jet:
        return 0.5 * (self.b_cov + self.b_cov.T)

    @cached_property
    def b_skew(self) -> Jet:
        return 0.5 * (self.b_cov - self.b_cov.T)

    @cached_property
    def b_i0(self) -> Jet:
        return jets.einsum("ik,k->i", self.b_cov, self.fr.y)

    @cached_property
    def b_00(self) -> Jet:
        return jets.einsum("i,i->", self.b_i0, self.fr.y)

    @cached_property
    def b_skew_0(self) -> Jet:
        """``b_[k0]``."""
        return jets.einsum("kj,j->k", self.b_skew, self.fr.y)

    @cached_property
    def b_sym_0(self) -> Jet:
        """``b_(i0)``."""
        return jets.einsum("ij,j->i", self.b_sym, self.fr.y)

    # N0, N, B closed forms ---------------------------------------------
    @cached_property
    def N0(self) -> Jet:
        Ls = self.L_star
        return (self.ell_star_up * jets.einsum("ij,i,j->", self.b_sym, self.fr.y, self.fr.y)
                - 2 * Ls * jets.einsum("hr,r->h", self.g_star_inv, self.b_skew_0))

    @cached_property
    def N(self) -> Jet:
        """``N^h_i`` stored ``[h, i]``."""
        Ls = self.L_star
        gsi, ls, lsu = self.g_star_inv, self.ell_star, self.ell_star_up
        inner = Ls * self.b_skew - jets.einsum("i,k->ik", ls, self.b_skew_0)
        return (jets.einsum("hk,ik->hi", gsi, inner)
                + jets.einsum("h,i->hi", lsu, self.b_sym_0)
                + self.h_star_mixed * (self.b_00 / (2 * Ls))
                + 2 * Ls * jets.einsum("rk,hir,k->hi", gsi, self.C_star, self.b_skew_0))

    @cached_property
    def B(self) -> Jet:
        """Horizontal difference tensor ``B^h_ij`` stored ``[h, i, j]``."""
        Ls = self.L_star
        gsi, ls, lsu = self.g_star_inv, self.ell_star, self.ell_star_up
        hm = self.h_star_mixed
        bs = self.b_skew
        t1 = (jets.einsum("hr,i,jr->hij", gsi, ls, bs)
              + jets.einsum("hr,j,ir->hij", gsi, ls, bs))
        t2 = jets.einsum("h,ij->hij", lsu, self.b_sym)
        t3 = (jets.einsum("i,hj->hij", self.b_i0, hm) + jets.einsum("j,hi->hij", self.b_i0, hm)
              - jets.einsum("hk,k,ij->hij", gsi, self.b_i0, self.h_star)) / (2 * Ls)
        Cl = self.C_star_lower
        t4 = jets.einsum("hp,ijr,rp->hij", gsi, Cl, self.N)
        t5 = jets.einsum("hp,irp,rj->hij", gsi, Cl, self.N)
        return t1 + t2 + t3 + t4 - t5

    # sundry --------------------------------------------------------------
    def eq15_terms(self):
        """Left side ``b_ij`` and its expansion through B, A, N and T, as printed
        (the A-term enters with a plus sign)."""
        fr = self.fr
        N = self.N
        rhs = (jets.einsum("kij,k->ij", self.B, self.ell_star)
               + jets.einsum("krj,ri,k->ij", self.A, N, self.ell_star)
               + jets.einsum("ri,rj->ij", N, fr.h) / fr.L
               - jets.einsum("k,ri,krj->ij", self.b, N, fr.C))
        return self.b_cov, rhs

    def tensor(self, name: str):
        return jets.value(getattr(self, name))


class DirectDifferences:
    """Difference tensors read off two independently computed Cartan frames."""

    def __init__(self, bundle: RandersBundle, point: SlitPoint, order: int = 4,
                 base_frame: FinslerFrame | None = None, star_frame: FinslerFrame | None = None):
        self.bundle = bundle
        self.point = point
        self.fr = base_frame or bundle.base.frame(point, order)
        self.star = star_frame or bundle.star.frame(point, order)

    @cached_property
    def A(self) -> Jet:
        return self.star.C - self.fr.C

    @cached_property
    def N(self) -> Jet:
        return self.star.N - self.fr.N

    @cached_property
    def N0(self) -> Jet:
        return 2 * (self.star.G - self.fr.G)

    @cached_property
    def B(self) -> Jet:
        """Coefficients of ``nabla*_{e_i} d_j - nabla_{e_i} d_j`` along the
        base horizontal basis ``e_i``."""
        return (self.star.Gamma_bar - self.fr.Gamma_bar
                + jets.einsum("ri,hrj->hij", self.N, self.star.C))


def eq15_residual(bundle: RandersBundle, point: SlitPoint, order: int = 3) -> float:
    q = bundle.quantities(point, order)
    lhs, rhs = q.eq15_terms()
    lhs, rhs = jets.value(lhs), jets.value(rhs)
    return float(np.max(np.abs(lhs - rhs)))


def omega_and_derivatives(bundle: RandersBundle, point: SlitPoint, order: int = 3):
    """``(omega, nabla_gamma omega, nabla_beta omega)``; derivatives stored
    ``[j, i] = (nabla_{d_i} omega)_j``."""
    q = bundle.quantities(point, order)
    fr = q.fr
    return (q.omega.value, fr.vcov(q.omega, "l").value, fr.hcov(q.omega, "l").value)


def m_nu_phi(bundle: RandersBundle, point: SlitPoint, order: int = 2):
    q = bundle.quantities(point, order)
    return q.m.value, q.nu.value, q.phi.value, q.phi_star.value, float(q.b2.value)


def star_tensors_closed_form(bundle: RandersBundle, point: SlitPoint):
    q = bundle.quantities(point, 2)
    return (q.ell_star.value, q.h_star.value, q.g_star.value, q.g_star_inv.value,
            float(q.mu.value))


def A_closed_form(bundle: RandersBundle, point: SlitPoint):
    q = bundle.quantities(point, 3)
    return q.A.value, q.A_star_lower.value


def N0_N_B_closed_form(bundle: RandersBundle, point: SlitPoint):
    q = bundle.quantities(point, 3)
    return q.N0.value, q.N.value, q.B.value


def Cstar_closed_form(bundle: RandersBundle, point: SlitPoint):
    return bundle.quantities(point, 3).C_star_trace.value


def b_derivative_matrix(bundle: RandersBundle, point: SlitPoint):
    q = bundle.quantities(point, 3)
    return (q.b_cov.value, q.b_sym.value, q.b_skew.value, q.b_i0.value, float(q.b_00.value))


def difference_tensors_direct(bundle: RandersBundle, point: SlitPoint):
    d = bundle.direct(point, 3)
    return d.A.value, d.B.value, d.N.value, d.N0.value
