"""Finsler frame, Cartan connection and curvature at a point of the slit
tangent bundle, all carried in jet arithmetic.

Index conventions used throughout the package:

* seeds ``0..n-1`` are ``x^1..x^n`` and ``n..2n-1`` are ``y^1..y^n``;
* a vector-valued tensor stores its upper index first, ``A[h, i, j] = A^h_ij``;
* covariant derivatives append the direction index last,
  ``hcov(A)[h, i, j, k] = (nabla_{e_k} A)^h_ij``;
* curvature arrays are ``R[h, k, i, j]`` = component ``h`` of
  ``R(d_i, d_j) d_k``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from . import jets
from .expr import EvalContext, ExprAst, eval_float, eval_jet, parse_expression
from .jets import Jet

DET_THRESHOLD = 1e-12
MAX_DIM = 6


class DegenerateMetricError(ArithmeticError):
    """The fundamental tensor is (numerically) singular at the point."""


@dataclass(frozen=True)
class SlitPoint:
    x: tuple[float, ...]
    y: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "x", tuple(float(v) for v in self.x))
        object.__setattr__(self, "y", tuple(float(v) for v in self.y))
        if len(self.x) != len(self.y):
            raise ValueError("x and y must have the same length")
        if not any(self.y):
            raise ValueError("y must be nonzero on the slit tangent bundle")

    @property
    def n(self) -> int:
        return len(self.x)

    def scaled(self, lam: float) -> "SlitPoint":
        return SlitPoint(self.x, tuple(lam * v for v in self.y))


JetBuilder = Callable[[SlitPoint, EvalContext], Jet]


class MetricField:
    """A Finsler function ``L(x, y)`` evaluable in jets."""

    def __init__(self, n: int, builder: JetBuilder, name: str = "L",
                 ast: ExprAst | None = None):
        if not 1 <= n <= MAX_DIM:
            raise ValueError(f"dimension must be in [1, {MAX_DIM}]")
        self.n = n
        self.name = name
        self.ast = ast
        self._builder = builder

    @classmethod
    def from_expression(cls, source: str | ExprAst, n: int, name: str = "L") -> "MetricField":
        ast = source if isinstance(source, ExprAst) else parse_expression(source, n)
        return cls(n, lambda p, ctx: eval_jet(ast, p.x, p.y, ctx), name=name, ast=ast)

    def jet(self, point: SlitPoint, order: int) -> Jet:
        if point.n != self.n:
            raise ValueError("point dimension does not match metric")
        return self._builder(point, EvalContext(self.n, order))

    def __call__(self, x: Sequence[float], y: Sequence[float]) -> float:
        if self.ast is not None:
            return eval_float(self.ast, x, y)
        return float(self.jet(SlitPoint(x, y), 0).value)

    def frame(self, point: SlitPoint, order: int = 4) -> "FinslerFrame":
        return FinslerFrame(self.jet(point, order), point)

    def __repr__(self) -> str:
        return f"MetricField(n={self.n}, name={self.name!r})"


@dataclass(frozen=True)
class TensorValue:
    """Numeric components of a pi-tensor at a point.

    ``variance`` is a string over ``u``/``l``, one letter per axis, e.g.
    ``"ull"`` for ``A^h_ij``.
    """

    components: np.ndarray
    variance: str
    site: SlitPoint

    def __post_init__(self):
        comps = np.asarray(self.components, dtype=float)
        object.__setattr__(self, "components", comps)
        if comps.ndim != len(self.variance) or set(self.variance) - {"u", "l"}:
            raise ValueError("variance signature does not match array rank")
        if any(s != self.site.n for s in comps.shape):
            raise ValueError("every axis must have extent n")


def _letters(k: int, skip: str = "") -> str:
    pool = [c for c in "abcdefghijklmnopstuvw" if c not in skip]
    return "".join(pool[:k])


class FinslerFrame:
    """All base quantities of ``L`` at one point, as jets.

    Attributes are computed lazily; each one loses jet orders according to
    how many derivatives of ``L`` it contains (``g`` two, ``C`` and ``N`` three,
    curvature four).
    """

    def __init__(self, L: Jet, point: SlitPoint):
        self.point = point
        self.n = point.n
        self.L = L
        space = L.space
        if space.nvars != 2 * self.n:
            raise ValueError("frame needs jets seeded in all 2n variables")
        self.x = jets.stack([Jet.variable(i, point.x[i], space, L.order) for i in range(self.n)])
        self.y = jets.stack([Jet.variable(self.n + i, point.y[i], space, L.order)
                             for i in range(self.n)])
        if L.value <= 0:
            raise DegenerateMetricError("L must be positive")

    @property
    def order(self) -> int:
        return self.L.order

    # raw derivatives ---------------------------------------------------
    def grad_x(self, t: Jet) -> Jet:
        """``d_i t`` with ``i`` appended as the last axis."""
        return jets.stack([t.d(i) for i in range(self.n)], axis=-1)

    def grad_y(self, t: Jet) -> Jet:
        return jets.stack([t.d(self.n + i) for i in range(self.n)], axis=-1)

    def delta(self, t: Jet) -> Jet:
        """Horizontal derivative ``delta_i t = d_i t - N^r_i dot-d_r t``."""
        sub = _letters(t.ndim, skip="ri")
        dy = self.grad_y(t)
        return self.grad_x(t) - jets.einsum(f"{sub}r,ri->{sub}i", dy, self.N)

    # metric ------------------------------------------------------------
    @cached_property
    def energy(self) -> Jet:
        return 0.5 * self.L * self.L

    @cached_property
    def g(self) -> Jet:
        return self.grad_y(self.grad_y(self.energy))

    @cached_property
    def det_g(self) -> float:
        return float(np.linalg.det(self.g.value))

    @cached_property
    def ginv(self) -> Jet:
        if abs(self.det_g) < DET_THRESHOLD:
            raise DegenerateMetricError(f"det g = {self.det_g:.3e}")
        return jets.inv(self.g)

    @cached_property
    def ell(self) -> Jet:
        """``l_i = dot-d_i L``."""
        return self.grad_y(self.L)

    @cached_property
    def ell_up(self) -> Jet:
        """``l^i = y^i / L``."""
        return self.y / self.L

    @cached_property
    def h(self) -> Jet:
        return self.g - jets.einsum("i,j->ij", self.ell, self.ell)

    # Cartan torsion ----------------------------------------------------
    @cached_property
    def C_lower(self) -> Jet:
        """``C_ijk = 1/2 dot-d_k g_ij``."""
        return 0.5 * self.grad_y(self.g)

    @cached_property
    def C(self) -> Jet:
        """Mixed torsion ``T^h_ij = C^h_ij``."""
        return jets.einsum("hk,kij->hij", self.ginv, self.C_lower)

    @cached_property
    def C_trace(self) -> Jet:
        """``C_i = g^jk C_ijk``."""
        return jets.einsum("jk,ijk->i", self.ginv, self.C_lower)

    # spray and nonlinear connection -------------------------------------
    @cached_property
    def G(self) -> Jet:
        """Spray coefficients: geodesics solve ``x'' + 2 G(x, x') = 0``."""
        F = self.energy
        mixed = self.grad_x(self.grad_y(F))  # [l, k] = d_k dot-d_l F
        rhs = jets.einsum("lk,k->l", mixed, self.y) - self.grad_x(F)
        return 0.5 * jets.einsum("il,l->i", self.ginv, rhs)

    @cached_property
    def N(self) -> Jet:
        """``N^i_j = dot-d_j G^i`` stored ``[i, j]``."""
        return self.grad_y(self.G)

    # Cartan connection -------------------------------------------------
    @cached_property
    def Gamma_bar(self) -> Jet:
        """Coefficients along the horizontal basis, ``[h, i, j]``."""
        dg = self.delta(self.g)  # [j, k, i] = delta_i g_jk
        low = dg.transpose(2, 0, 1) + dg.transpose(0, 2, 1) - dg
        # low[i, j, k] = delta_i g_jk + delta_j g_ik - delta_k g_ij
        return 0.5 * jets.einsum("hk,ijk->hij", self.ginv, low)

    @cached_property
    def Gamma(self) -> Jet:
        """Coefficients along ``d_i``: ``Gamma-bar + N^r_i C^h_rj``."""
        return self.Gamma_bar + jets.einsum("ri,hrj->hij", self.N, self.C)

    @cached_property
    def S(self) -> Jet:
        """Horizontal torsion ``S(d_i, d_j)``; identically zero for Cartan."""
        return self.Gamma_bar - self.Gamma_bar.transpose(0, 2, 1)

    @cached_property
    def bracket_hh(self) -> Jet:
        """``[e_i, e_j] = W^r_ij dot-d_r``; returns ``W[r, i, j]``."""
        dN = self.delta(self.N)  # [r, i, j] = delta_j N^r_i
        return dN - dN.transpose(0, 2, 1)

    # covariant derivatives ---------------------------------------------
    def _covariant(self, t: Jet, variance: str, conn: Jet, base: Jet) -> Jet:
        rank = len(variance)
        if t.ndim != rank:
            raise ValueError("variance does not match tensor rank")
        idx = _letters(rank, skip="mk")
        out = base
        for s, kind in enumerate(variance):
            if kind == "u":
                spec = f"{idx[:s]}m{idx[s + 1:]},{idx[s]}km->{idx}k"
            else:
                spec = f"{idx[:s]}m{idx[s + 1:]},mk{idx[s]}->{idx}k"
            term = jets.einsum(spec, t, conn)
            out = out + term if kind == "u" else out - term
        return out

    def hcov(self, t: Jet, variance: str) -> Jet:
        """``nabla_{e_k}`` of a pi-tensor field, ``k`` appended last."""
        return self._covariant(t, variance, self.Gamma_bar, self.delta(t))

    def vcov(self, t: Jet, variance: str) -> Jet:
        """``nabla_{dot-d_k}`` of a pi-tensor field, ``k`` appended last."""
        return self._covariant(t, variance, self.C, self.grad_y(t))

    # curvature ---------------------------------------------------------
    def curvatures(self, convention: str = "commutator") -> tuple[Jet, Jet, Jet]:
        """``(R, P, Q)`` as ``[h, k, i, j]`` arrays.

        ``"commutator"`` uses ``R(X,Y) = [nabla_X, nabla_Y] - nabla_[X,Y]``;
        ``"negated"`` is its negative, ``-[nabla_X, nabla_Y] + nabla_[X,Y]``.
        """
        R, P, Q = self._curvatures
        if convention == "commutator":
            return R, P, Q
        if convention == "negated":
            return -R, -P, -Q
        raise ValueError(f"unknown curvature convention {convention!r}")

    @cached_property
    def _curvatures(self):
        Gb, C, N = self.Gamma_bar, self.C, self.N
        dGb = self.delta(Gb)  # [h, j, k, i] = delta_i Gb^h_jk
        W = self.bracket_hh
        R = (dGb.transpose(0, 2, 3, 1) - dGb.transpose(0, 2, 1, 3)
             + jets.einsum("mjk,him->hkij", Gb, Gb) - jets.einsum("mik,hjm->hkij", Gb, Gb)
             - jets.einsum("rij,hrk->hkij", W, C))
        vGb = self.grad_y(Gb)  # [h, j, k, i] = dot-d_i Gb^h_jk
        dC = self.delta(C)  # [h, i, k, j] = delta_j C^h_ik
        dyN = self.grad_y(N)  # [r, j, i] = dot-d_i N^r_j
        P = (vGb.transpose(0, 2, 3, 1) - dC.transpose(0, 2, 1, 3)
             + jets.einsum("mjk,him->hkij", Gb, C) - jets.einsum("mik,hjm->hkij", C, Gb)
             + jets.einsum("rji,hrk->hkij", dyN, C))
        vC = self.grad_y(C)  # [h, j, k, i] = dot-d_i C^h_jk
        Q = (vC.transpose(0, 2, 3, 1) - vC.transpose(0, 2, 1, 3)
             + jets.einsum("mjk,him->hkij", C, C) - jets.einsum("mik,hjm->hkij", C, C))
        return R, P, Q

    # numeric views -----------------------------------------------------
    def tensor(self, name: str, variance: str) -> TensorValue:
        return TensorValue(jets.value(getattr(self, name)), variance, self.point)


# ----------------------------------------------------------------------
# operation-level helpers
# ----------------------------------------------------------------------

def fundamental_tensor(metric: MetricField, p: SlitPoint) -> TensorValue:
    fr = metric.frame(p, order=2)
    if abs(fr.det_g) < DET_THRESHOLD:
        raise DegenerateMetricError(f"det g = {fr.det_g:.3e}")
    return fr.tensor("g", "ll")


def ell_and_angular(frame: FinslerFrame) -> tuple[TensorValue, TensorValue]:
    return frame.tensor("ell", "l"), frame.tensor("h", "ll")


def cartan_torsion(metric: MetricField, p: SlitPoint):
    fr = metric.frame(p, order=3)
    return fr.tensor("C_lower", "lll"), fr.tensor("C", "ull"), fr.tensor("C_trace", "l")


def spray_and_nonlinear_connection(metric: MetricField, p: SlitPoint):
    fr = metric.frame(p, order=3)
    return fr.tensor("G", "u"), fr.tensor("N", "ul")


def cartan_coefficients(metric: MetricField, p: SlitPoint):
    fr = metric.frame(p, order=3)
    return fr.tensor("Gamma", "ull"), fr.tensor("Gamma_bar", "ull")


def curvatures(metric: MetricField, p: SlitPoint, convention: str = "commutator"):
    fr = metric.frame(p, order=4)
    return tuple(TensorValue(t.value, "ulll", p) for t in fr.curvatures(convention))
