"""Residual checks over seeded sample plans.

Every check maps a :class:`PointContext` to a non-negative residual.  Relative
checks divide the absolute discrepancy by ``1 + max |term|``; norm checks
report the plain max-abs of a tensor that a hypothesis or theorem says should
vanish (or, on a violating instance, should not).
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from . import jets
from .catalog import CatalogEntry, get_entry
from .geometry import DET_THRESHOLD, DegenerateMetricError, FinslerFrame, SlitPoint
from .jets import JetError
from .randers import ADMISSIBLE_B2, DirectDifferences, RandersBundle, StarQuantities

E = jets.einsum
MAX_SKIP_FRACTION = 0.10
LARGE = 1e-3
WORKERS_ENV = "GEN_RANDERS_WORKERS"


class VerifyError(ValueError):
    """Configuration-level problem with a check request."""


class UnknownCheckError(VerifyError):
    pass


class InadmissibleInstanceError(RuntimeError):
    """No sample point of the instance passed the admissibility screen."""


class MissingTagsError(VerifyError):
    pass


# ----------------------------------------------------------------------
# data types
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class SamplePlan:
    instance: str
    count: int = 100
    seed: int = 0
    x_box: tuple[tuple[float, float], ...] | None = None
    y_scale: tuple[float, float] = (0.5, 2.0)

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("sample count must be >= 1")
        lo, hi = self.y_scale
        if not 0 < lo <= hi:
            raise ValueError("y_scale must satisfy 0 < lo <= hi")

    def points(self, n: int, default_box=None) -> list[SlitPoint]:
        """Uniform x in the box; y uniform on the unit sphere times a uniform scale."""
        box = np.array(self.x_box or default_box or ((-1.0, 1.0),) * n, dtype=float)
        if box.shape != (n, 2):
            raise ValueError(f"x_box must have {n} intervals")
        rng = np.random.default_rng(self.seed)
        pts = []
        for _ in range(self.count):
            x = box[:, 0] + (box[:, 1] - box[:, 0]) * rng.random(n)
            u = rng.standard_normal(n)
            u /= np.linalg.norm(u)
            y = rng.uniform(*self.y_scale) * u
            pts.append(SlitPoint(tuple(x), tuple(y)))
        return pts


@dataclass(frozen=True)
class CheckSpec:
    check_id: str
    tolerance: float | None = None
    instance: str | None = None
    expect: str | None = None  # "small" or "large"; default from registry


@dataclass
class ResidualReport:
    check_id: str
    instance: str
    evaluated: int
    skipped: int
    max_residual: float
    mean_residual: float
    tolerance: float
    expect: str
    passed: bool
    witness: dict | None = None
    note: str = ""

    def to_dict(self) -> dict:
        d = asdict(self)
        return {"id": d.pop("check_id"), "max": d.pop("max_residual"),
                "mean": d.pop("mean_residual"), "pass": d.pop("passed"), **d}


# ----------------------------------------------------------------------
# evaluation context
# ----------------------------------------------------------------------

class PointContext:
    """Lazily built base frame, ``L*`` frame and closed forms at a point."""

    def __init__(self, bundle: RandersBundle, point: SlitPoint, order: int):
        self.bundle = bundle
        self.point = point
        self.order = order
        self.n = bundle.n

    @cached_property
    def fr(self) -> FinslerFrame:
        return self.bundle.base.frame(self.point, self.order)

    @cached_property
    def star(self) -> FinslerFrame:
        return self.bundle.star.frame(self.point, self.order)

    @cached_property
    def q(self) -> StarQuantities:
        return StarQuantities(self.bundle, self.point, self.order, base_frame=self.fr)

    @cached_property
    def d(self) -> DirectDifferences:
        return DirectDifferences(self.bundle, self.point, self.order,
                                 base_frame=self.fr, star_frame=self.star)

    def frames(self) -> tuple[FinslerFrame, FinslerFrame]:
        return self.fr, self.star


def _arr(t) -> np.ndarray:
    return np.asarray(jets.value(t), dtype=float)


def rel(lhs, rhs, *terms) -> float:
    """``max|lhs - rhs| / (1 + max magnitude of lhs, rhs and extra terms)``."""
    a, b = _arr(lhs), _arr(rhs)
    scale = max([float(np.max(np.abs(a))), float(np.max(np.abs(b)))]
                + [float(np.max(np.abs(_arr(t)))) for t in terms])
    return float(np.max(np.abs(a - b)) / (1.0 + scale))


def norm(t) -> float:
    return float(np.max(np.abs(_arr(t))))


# ----------------------------------------------------------------------
# registry
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class Check:
    id: str
    fn: Callable[[PointContext], float] = field(repr=False)
    order: int
    tolerance: float
    kind: str = "relative"
    expect: str = "small"
    description: str = ""


REGISTRY: dict[str, Check] = {}


def register(check_id: str, order: int, tolerance: float, kind: str = "relative",
             description: str = ""):
    def deco(fn):
        REGISTRY[check_id] = Check(check_id, fn, order, tolerance, kind, "small",
                                   description or (fn.__doc__ or "").strip())
        return fn
    return deco


# engine invariants ---------------------------------------------------------

HOMOGENEITY = (("L", 1), ("g", 0), ("C_lower", -1), ("G", 2), ("N", 1))


@register("engine_homogeneity", 3, 1e-9)
def _engine_homogeneity(c: PointContext) -> float:
    """L, g, C, G, N have y-degrees 1, 0, -1, 2, 1 (base and L*)."""
    worst = 0.0
    for metric, frame in ((c.bundle.base, c.fr), (c.bundle.star, c.star)):
        for lam in (0.5, 2.0, 3.0):
            scaled = metric.frame(c.point.scaled(lam), 3)
            for name, deg in HOMOGENEITY:
                worst = max(worst, rel(getattr(scaled, name), lam ** deg * _arr(getattr(frame, name))))
    return worst


@register("engine_euler", 3, 1e-10)
def _engine_euler(c: PointContext) -> float:
    """g(y, y) = L^2, g y = L l, h y = 0, C(., ., y) = 0."""
    worst = 0.0
    for fr in c.frames():
        y = fr.y
        worst = max(worst,
                    rel(E("ij,i,j->", fr.g, y, y), fr.L * fr.L),
                    rel(E("ij,j->i", fr.g, y), fr.L * fr.ell),
                    rel(E("ij,j->i", fr.h, y), 0.0, fr.h),
                    rel(E("ijk,k->ij", fr.C_lower, y), 0.0, fr.C_lower))
    return worst


@register("engine_cartan_axioms", 3, 1e-9)
def _engine_cartan(c: PointContext) -> float:
    """h- and v-metricity, S = 0, deflection-free, N y = 2G, Gamma = Gamma-bar + N C."""
    worst = 0.0
    for fr in c.frames():
        y = fr.y
        worst = max(worst,
                    rel(fr.hcov(fr.g, "ll"), 0.0, fr.g),
                    rel(fr.vcov(fr.g, "ll"), 0.0, fr.g),
                    rel(fr.S, 0.0, fr.Gamma_bar),
                    rel(E("hij,j->hi", fr.Gamma_bar, y), fr.N),
                    rel(E("ij,j->i", fr.N, y), 2 * fr.G),
                    rel(fr.Gamma - fr.Gamma_bar, E("ri,hrj->hij", fr.N, fr.C)),
                    rel(fr.Gamma_bar, fr.Gamma_bar.transpose(0, 2, 1)))
    return worst


# vertical and horizontal derivatives of L, l, h ----------------------------

def _ell_eq2(fr: FinslerFrame):
    return E("ij,j->i", fr.g, fr.y) / fr.L


@register("lemma1_a", 3, 1e-8)
def _lemma1_a(c: PointContext) -> float:
    """nabla_{gamma X} L = l(X)."""
    return max(rel(fr.vcov(fr.L, ""), _ell_eq2(fr)) for fr in c.frames())


@register("lemma1_b", 3, 1e-8)
def _lemma1_b(c: PointContext) -> float:
    """(nabla_{gamma X} l)(Y) = h(X, Y) / L."""
    return max(rel(fr.vcov(_ell_eq2(fr), "l").T, fr.h / fr.L) for fr in c.frames())


@register("lemma1_c", 3, 1e-8)
def _lemma1_c(c: PointContext) -> float:
    """(nabla_{gamma X} h)(Y, Z) = -(h(X,Y) l(Z) + h(X,Z) l(Y)) / L."""
    worst = 0.0
    for fr in c.frames():
        lhs = E("jki->ijk", fr.vcov(fr.h, "ll"))
        rhs = -(E("ij,k->ijk", fr.h, fr.ell) + E("ik,j->ijk", fr.h, fr.ell)) / fr.L
        worst = max(worst, rel(lhs, rhs))
    return worst


@register("lemma1_d", 3, 1e-8)
def _lemma1_d(c: PointContext) -> float:
    """L, l and h are horizontally parallel."""
    worst = 0.0
    for fr in c.frames():
        worst = max(worst, rel(fr.hcov(fr.L, ""), 0.0, fr.L),
                    rel(fr.hcov(_ell_eq2(fr), "l"), 0.0, fr.ell),
                    rel(fr.hcov(fr.h, "ll"), 0.0, fr.h))
    return worst


# starred metric tensors ------------------------------------------------------

@register("eq5_ell_star", 2, 1e-9)
def _eq5_ell(c: PointContext) -> float:
    """l* = l + omega against the gradient of L*."""
    return rel(c.q.ell_star, c.star.ell)


@register("eq5_h_star", 2, 1e-9)
def _eq5_h(c: PointContext) -> float:
    """h* = tau h against the engine's angular metric of L*."""
    return rel(c.q.h_star, c.star.h)


@register("eq12_star_metric", 2, 1e-9)
def _eq12_g(c: PointContext) -> float:
    """g* = tau (g - l l) + l* l* against the y-Hessian of L*^2 / 2."""
    return rel(c.q.g_star, c.star.g)


@register("eq12_star_inverse", 2, 1e-9)
def _eq12_ginv(c: PointContext) -> float:
    """Closed-form inverse of g* against the engine inverse."""
    return rel(c.q.g_star_inv, c.star.ginv)


# the vectors m, nu and the endomorphisms phi, phi* ---------------------------

def _b2_minus(q: StarQuantities):
    return q.b2 - (q.alpha / q.fr.L) * (q.alpha / q.fr.L)


@register("prop1_a", 2, 1e-8)
def _prop1_a(c: PointContext) -> float:
    """l(m) = 0."""
    return rel(E("i,i->", c.fr.ell, c.q.m), 0.0, c.q.m)


@register("prop1_b", 2, 1e-8)
def _prop1_b(c: PointContext) -> float:
    """l*(m) = b^2 - (alpha/L)^2."""
    return rel(E("i,i->", c.q.ell_star, c.q.m), _b2_minus(c.q))


@register("prop1_c", 2, 1e-8)
def _prop1_c(c: PointContext) -> float:
    """nu(m) = b^2 - (alpha/L)^2, with nu = b - (alpha/L) l."""
    return rel(E("i,i->", c.q.nu_closed, c.q.m), _b2_minus(c.q))


@register("prop1_d", 2, 1e-8)
def _prop1_d(c: PointContext) -> float:
    """phi(m) = m."""
    return rel(E("ij,j->i", c.q.phi, c.q.m), c.q.m)


@register("prop1_e", 2, 1e-8)
def _prop1_e(c: PointContext) -> float:
    """nu(X) = L nabla_{gamma X} tau."""
    q = c.q
    return rel(q.nu, q.fr.L * c.fr.vcov(q.tau, ""))


@register("prop1_f", 2, 1e-8)
def _prop1_f(c: PointContext) -> float:
    """phi* = phi - nu (x) eta / L* against I - l* (x) eta / L* from the engine."""
    direct = np.eye(c.n) - E("i,j->ij", c.fr.y, c.star.ell) / c.star.L
    return rel(c.q.phi_star, direct)


# derivatives of omega ------------------------------------------------------

@register("lemma3_a", 3, 1e-8)
def _lemma3_a(c: PointContext) -> float:
    """(nabla_{gamma X} omega)(Y) = -omega(T(X, Y))."""
    lhs = c.fr.vcov(c.q.omega, "l").T
    return rel(lhs, -c.q.omega_T)


def _lemma3_b_rhs(c: PointContext, a_sign: float = 1.0):
    d, q, fr = c.d, c.q, c.fr
    ls = c.star.ell
    return (E("kij,k->ij", d.B, ls)
            + a_sign * E("krj,ri,k->ij", d.A, d.N, ls)
            + E("ri,rj->ij", d.N, fr.h) / fr.L
            - E("k,ri,krj->ij", q.omega, d.N, fr.C))


@register("lemma3_b", 3, 1e-8)
def _lemma3_b(c: PointContext) -> float:
    """nabla_beta omega from the engine vs. its expansion in the direct B, A, N."""
    return rel(c.q.b_cov, _lemma3_b_rhs(c))


@register("lemma3_special", 3, 1e-8)
def _lemma3_special(c: PointContext) -> float:
    """(nabla_{gamma X} omega)(eta) = 0 and (nabla_{beta X} omega)(eta) = l*(N(X))."""
    q, y = c.q, c.fr.y
    v = E("ji,j->i", c.fr.vcov(q.omega, "l"), y)
    return max(rel(v, 0.0, q.omega),
               rel(q.b_i0, E("h,hi->i", c.star.ell, c.d.N)))


# torsion of L* and the vertical difference tensor A ---------------------------

@register("prop2_a", 3, 1e-8)
def _prop2_a(c: PointContext) -> float:
    """T* = T + A (engine T* vs. closed-form A)."""
    return rel(c.star.C, c.fr.C + c.q.A)


@register("prop2_b", 3, 1e-8)
def _prop2_b(c: PointContext) -> float:
    """B(X,Y) - B(Y,X) = T*(N X, Y) - T*(N Y, X)."""
    B, N, Ts = c.q.B, c.q.N, c.star.C
    lhs = B - B.transpose(0, 2, 1)
    rhs = E("ai,haj->hij", N, Ts) - E("aj,hai->hij", N, Ts)
    return rel(lhs, rhs, B)


@register("prop2_c", 3, 1e-8)
def _prop2_c(c: PointContext) -> float:
    """T*(X,Y,Z) = tau T(X,Y,Z) + omega(T(X,Y)) l*(Z) + A*(X,Y,Z)."""
    q = c.q
    A_star = E("hij,hk->ijk", q.A, c.star.g)
    rhs = q.tau * c.fr.C_lower + E("ij,k->ijk", q.omega_T, q.ell_star) + A_star
    return rel(c.star.C_lower, rhs)


@register("cor1_a", 3, 1e-8)
def _cor1_a(c: PointContext) -> float:
    """A*(X,Y,Z) = A*(X,Z,Y) + omega(T(X,Z)) l*(Y) - omega(T(X,Y)) l*(Z)."""
    q = c.q
    As = q.A_star_lower
    rhs = (As.transpose(0, 2, 1) + E("ik,j->ijk", q.omega_T, q.ell_star)
           - E("ij,k->ijk", q.omega_T, q.ell_star))
    return rel(As, rhs)


@register("cor1_b", 3, 1e-8)
def _cor1_b(c: PointContext) -> float:
    """A*(X, Y, eta) = -L* omega(T(X, Y))."""
    q = c.q
    return rel(E("ijk,k->ij", q.A_star_lower, c.fr.y), -q.L_star * q.omega_T)


@register("cor2_c", 3, 1e-8)
def _cor2_c(c: PointContext) -> float:
    """A is symmetric and A(X, eta) = 0."""
    A = c.q.A
    return max(rel(A, A.transpose(0, 2, 1)), rel(E("hij,j->hi", A, c.fr.y), 0.0, A))


@register("prop4_A", 3, 1e-8)
def _prop4_A(c: PointContext) -> float:
    """Closed-form A against C* - C from two engine runs."""
    return rel(c.q.A, c.d.A)


@register("eq10_A_star", 3, 1e-8)
def _eq10(c: PointContext) -> float:
    """g*(A(X,Y), Z) against its expansion in h, nu, omega(T) and l*."""
    return rel(c.q.A_star_lower, c.q.A_star_eq10)


@register("cor3_T_star", 3, 1e-8)
def _cor3(c: PointContext) -> float:
    """Engine T*_ijk against tau T_ijk + (1/2L) symmetrized h nu."""
    return rel(c.star.C_lower, c.q.T_star_lower)


@register("lemma5_trace", 3, 1e-9)
def _lemma5(c: PointContext) -> float:
    """Engine trace form C* against C + (n+1)/(2L*) nu."""
    return rel(c.star.C_trace, c.q.C_star_trace)


# horizontal difference tensors N0, N, B -------------------------------------

@register("eq14_N0", 3, 1e-7)
def _eq14_N0(c: PointContext) -> float:
    """Closed-form N0 against 2(G* - G)."""
    return rel(c.q.N0, c.d.N0)


@register("eq14_N", 3, 1e-7)
def _eq14_N(c: PointContext) -> float:
    """Closed-form N against N* - N of the nonlinear connections."""
    return rel(c.q.N, c.d.N)


@register("eq14_B", 3, 1e-7)
def _eq14_B(c: PointContext) -> float:
    """Closed-form B against nabla*_{e_i} - nabla_{e_i} on the base horizontal basis."""
    return rel(c.q.B, c.d.B)


@register("cor2_b_N_N0", 3, 1e-8)
def _n_n0(c: PointContext) -> float:
    """N(eta) = N0 for the closed forms."""
    return rel(E("hi,i->h", c.q.N, c.fr.y), c.q.N0)


@register("eq9_beta_star", 3, 1e-8)
def _eq9(c: PointContext) -> float:
    """e*_i = e_i - N^r_i dot-d_r annihilates L* (base e_i, closed-form N)."""
    q = c.q
    lhs = c.fr.delta(q.L_star) - E("r,ri->i", q.ell_star, q.N)
    return max(rel(lhs, 0.0, c.fr.grad_x(q.L_star)), rel(c.star.delta(c.star.L), 0.0, q.ell_star))


@register("eq15", 3, 1e-8)
def _eq15(c: PointContext) -> float:
    """b_ij = B^k_ij l*_k + A^k_rj N^r_i l*_k + N^r_i h_rj / L - b_k N^r_i T^k_rj."""
    lhs, rhs = c.q.eq15_terms()
    return rel(lhs, rhs)


@register("eq15_sign_corrected", 3, 1e-8)
def _eq15_fixed(c: PointContext) -> float:
    """Same relation with the A-term entering with a minus sign."""
    q = c.q
    lhs, rhs = q.eq15_terms()
    a_term = E("krj,ri,k->ij", q.A, q.N, q.ell_star)
    return rel(lhs, rhs - 2 * a_term)


# curvature relations --------------------------------------------------------

def prop3_residual(c: PointContext, part: str, convention: str = "negated") -> float:
    """Residual of the curvature relation ``part`` in ``{"a", "b", "c"}``.

    ``A``, ``B``, ``N`` are the closed forms; their derivatives in the
    correction terms use the base Cartan connection.
    """
    if c.order < 4:
        raise JetError("curvature relations need jet order >= 4")
    fr, st, q = c.fr, c.star, c.q
    A, B, N, y = q.A, q.B, q.N, fr.y
    R, P, Q = fr.curvatures(convention)
    Rs, Ps, Qs = st.curvatures(convention)
    if part == "a":
        lhs = (Rs + E("ai,hkaj->hkij", N, Ps) - E("aj,hkai->hkij", N, Ps)
               + E("ai,bj,hkab->hkij", N, N, Qs))
        hB = fr.hcov(B, "ull")
        omega = (E("hikj->hkij", hB) - E("hjki->hkij", hB)
                 + E("hmk,mij->hkij", A, E("mlij,l->mij", R, y))
                 + E("hjm,mik->hkij", B, B) - E("him,mjk->hkij", B, B))
        return rel(lhs, R + omega)
    if part == "b":
        lhs = Ps + E("bj,hkib->hkij", N, Qs)
        vB, hA = fr.vcov(B, "ull"), fr.hcov(A, "ull")
        omega = (-E("hjki->hkij", vB) + E("hikj->hkij", hA)
                 + E("hmk,mij->hkij", A, E("mlij,l->mij", P, y))
                 - E("hmk,mij->hkij", B, fr.C)
                 + E("hjm,mik->hkij", B, A) - E("him,mjk->hkij", A, B))
        return rel(lhs, P + omega)
    if part == "c":
        vA = fr.vcov(A, "ull")
        omega = (E("hikj->hkij", vA) - E("hjki->hkij", vA)
                 + E("hjm,mik->hkij", A, A) - E("him,mjk->hkij", A, A))
        return rel(Qs, Q + omega)
    raise ValueError(f"unknown part {part!r}")


def check_prop3(bundle: RandersBundle, point: SlitPoint, part: str,
                convention: str = "negated", order: int = 4) -> float:
    return prop3_residual(PointContext(bundle, point, order), part, convention)


for _part in "abc":
    REGISTRY[f"prop3_{_part}"] = Check(
        f"prop3_{_part}", (lambda c, _p=_part: prop3_residual(c, _p)), 4, 1e-6,
        description=f"curvature relation ({_part}) with closed-form A, B, N")
    # same relation with curvature taken as the plain commutator, for comparison
    REGISTRY[f"prop3_{_part}_commutator"] = Check(
        f"prop3_{_part}_commutator",
        (lambda c, _p=_part: prop3_residual(c, _p, "commutator")), 4, 1e-6,
        description=f"curvature relation ({_part}) under R = [nabla, nabla] - nabla_[,]")


# trace of the horizontal derivative of C* ------------------------------------

def _prop6_general_rhs(c: PointContext):
    fr, q, y = c.fr, c.q, c.fr.y
    N0 = q.N0

    def piece(form):
        return (E("ik,k->i", fr.hcov(form, "l"), y) - E("ik,k->i", fr.vcov(form, "l"), N0)
                + E("h,hij,i->j", form, q.A, N0) - E("h,hij,i->j", form, q.B, y))

    return piece(fr.C_trace) + (c.n + 1) / (2 * q.L_star) * piece(q.nu)


def _star_general_landsberg(c: PointContext):
    return E("ik,k->i", c.star.hcov(c.star.C_trace, "l"), c.fr.y)


@register("prop6_general", 4, 1e-6)
def _prop6_general(c: PointContext) -> float:
    """Horizontal derivative of C* along eta* expanded through C, nu, A, B, N0."""
    return rel(_star_general_landsberg(c), _prop6_general_rhs(c))


# theorem-level norms ---------------------------------------------------------

def _norm_check(check_id, order, tol, description):
    def deco(fn):
        REGISTRY[check_id] = Check(check_id, fn, order, tol, "norm", "small", description)
        return fn
    return deco


@_norm_check("theorem1_parallel_omega", 3, 1e-10, "|nabla_beta omega|")
def _t1_hyp(c):
    return norm(c.q.b_cov)


@_norm_check("theorem1_B_zero", 3, 1e-9, "|B| (closed form)")
def _t1_concl(c):
    return norm(c.q.B)


@_norm_check("theorem2_closed", 1, 1e-12, "|d_i b_j - d_j b_i|")
def _t2_hyp(c):
    db = c.fr.grad_x(c.q.b)  # [j, i] = d_i b_j
    return norm(db - db.T)


@_norm_check("theorem2_N_zero", 3, 1e-9, "|N| (closed form)")
def _t2_concl(c):
    return norm(c.q.N)


@_norm_check("theorem2_N0_zero", 3, 1e-9, "|N0| (closed form)")
def _t2_n0(c):
    return norm(c.q.N0)


@_norm_check("theorem3_hA_zero", 4, 1e-7, "|nabla_beta A|")
def _t3_hyp(c):
    return norm(c.fr.hcov(c.q.A, "ull"))


@_norm_check("theorem3_berwald_base", 4, 1e-7, "|nabla_beta T| of L")
def _t3_base(c):
    return norm(c.fr.hcov(c.fr.C, "ull"))


@_norm_check("theorem3_berwald_star", 4, 1e-7, "|nabla*_beta* T*| of L*")
def _t3_star(c):
    return norm(c.star.hcov(c.star.C, "ull"))


def _p_eta(fr: FinslerFrame):
    _, P, _ = fr.curvatures()
    return E("hkij,k->hij", P, fr.y)


def _r_eta(fr: FinslerFrame):
    R, _, _ = fr.curvatures()
    return E("hkij,k->hij", R, fr.y)


@_norm_check("theorem4_landsberg_base", 4, 1e-7, "|P(X,Y) eta| of L")
def _t4_base(c):
    return norm(_p_eta(c.fr))


@_norm_check("theorem4_landsberg_star", 4, 1e-7, "|P*(X,Y) eta| of L*")
def _t4_star(c):
    return norm(_p_eta(c.star))


@_norm_check("prop5_R_base", 4, 1e-8, "|R| of L")
def _p5_base(c):
    return norm(c.fr.curvatures()[0])


@_norm_check("prop5_R_star", 4, 1e-8, "|R*| of L*")
def _p5_star(c):
    return norm(c.star.curvatures()[0])


@_norm_check("theorem5_integrable_base", 4, 1e-8, "|R(X,Y) eta| of L")
def _t5_base(c):
    return norm(_r_eta(c.fr))


@_norm_check("theorem5_integrable_star", 4, 1e-8, "|R*(X,Y) eta| of L*")
def _t5_star(c):
    return norm(_r_eta(c.star))


@_norm_check("theorem6_general_landsberg_base", 4, 1e-7, "|nabla_{beta eta} C|")
def _t6_base(c):
    return norm(E("ik,k->i", c.fr.hcov(c.fr.C_trace, "l"), c.fr.y))


@_norm_check("theorem6_general_landsberg_star", 4, 1e-7, "|nabla*_{beta* eta} C*|")
def _t6_star(c):
    return norm(_star_general_landsberg(c))


@_norm_check("theorem6_nu_parallel", 3, 1e-7, "|nabla_{beta eta} nu|")
def _t6_nu(c):
    return norm(E("ik,k->i", c.fr.hcov(c.q.nu, "l"), c.fr.y))


@_norm_check("form_zero", 1, 1e-14, "|b|")
def _form_zero(c):
    return norm(c.q.b)


@_norm_check("base_riemannian", 3, 1e-10, "|C| of L")
def _base_riemannian(c):
    return norm(c.fr.C_lower)


@register("theorem6_prop6_closed", 4, 1e-7)
def _t6_closed(c: PointContext) -> float:
    """nabla*_{beta* eta} C* = nabla_{beta eta} C + (n+1)/(2L*) nabla_{beta eta} nu."""
    fr, q, y = c.fr, c.q, c.fr.y
    rhs = (E("ik,k->i", fr.hcov(fr.C_trace, "l"), y)
           + (c.n + 1) / (2 * q.L_star) * E("ik,k->i", fr.hcov(q.nu, "l"), y))
    return rel(_star_general_landsberg(c), rhs)


DEFAULT_SUITE = (
    "engine_homogeneity", "engine_euler", "engine_cartan_axioms",
    "lemma1_a", "lemma1_b", "lemma1_c", "lemma1_d",
    "eq5_ell_star", "eq5_h_star", "eq12_star_metric", "eq12_star_inverse",
    "prop1_a", "prop1_b", "prop1_c", "prop1_d", "prop1_e", "prop1_f",
    "lemma3_a", "lemma3_b", "lemma3_special",
    "prop2_a", "prop2_b", "prop2_c", "cor1_a", "cor1_b", "cor2_c", "cor2_b_N_N0",
    "prop4_A", "eq10_A_star", "cor3_T_star", "lemma5_trace",
    "eq9_beta_star", "eq14_N0", "eq14_N", "eq14_B", "eq15",
    "prop3_a", "prop3_b", "prop3_c", "prop6_general",
)


TAG_CHECKS = {
    "zero_b": "form_zero",
    "flat": "prop5_R_base",
    "parallel_b": "theorem1_parallel_omega",
    "closed": "theorem2_closed",
    "berwald_base": "theorem3_berwald_base",
    "landsberg_base": "theorem4_landsberg_base",
    "general_landsberg_base": "theorem6_general_landsberg_base",
    "riemannian_base": "base_riemannian",
}


def get_check(check_id: str) -> Check:
    try:
        return REGISTRY[check_id]
    except KeyError:
        raise UnknownCheckError(f"unknown check id {check_id!r}") from None


# ----------------------------------------------------------------------
# running
# ----------------------------------------------------------------------

def _entry_payload(entry: CatalogEntry) -> tuple:
    return (entry.id, entry.description, entry.n, entry.base, tuple(entry.form),
            tuple(sorted(entry.tags)), entry.x_box)


def _entry_from_payload(payload) -> CatalogEntry:
    i, desc, n, base, form, tags, box = payload
    return CatalogEntry(i, desc, n, base, form, frozenset(tags), box)


def admissibility(bundle: RandersBundle, point: SlitPoint) -> str | None:
    """Reason to skip ``point``, or ``None`` if it is usable."""
    try:
        b2 = bundle.b_squared(point)
        if not b2 <= ADMISSIBLE_B2:
            return f"b^2={b2:.3g} above {ADMISSIBLE_B2}"
        fr = bundle.base.frame(point, 2)
        st = bundle.star.frame(point, 2)
        if abs(fr.det_g) < DET_THRESHOLD or abs(st.det_g) < DET_THRESHOLD:
            return "degenerate fundamental tensor"
    except (DegenerateMetricError, JetError, ValueError) as exc:
        return f"{type(exc).__name__}: {exc}"
    return None


def _evaluate_point(payload, point: SlitPoint, check_ids: Sequence[str], order: int):
    entry = _entry_from_payload(payload) if not isinstance(payload, CatalogEntry) else payload
    bundle = entry.bundle
    reason = admissibility(bundle, point)
    if reason is not None:
        return None, reason
    ctx = PointContext(bundle, point, order)
    out = {}
    for cid in check_ids:
        try:
            out[cid] = float(get_check(cid).fn(ctx))
        except (DegenerateMetricError, jets.JetDomainError) as exc:
            return None, f"{type(exc).__name__}: {exc}"
    return out, None


def _workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def evaluate_checks(entry: CatalogEntry, check_ids: Sequence[str], plan: SamplePlan):
    """Per-point residuals: ``(points, rows, skip_log)`` with ``rows[i]`` a dict or None."""
    for cid in check_ids:
        get_check(cid)
    order = max([get_check(cid).order for cid in check_ids] + [2])
    points = plan.points(entry.n, entry.box())
    workers = _workers()
    if workers > 1 and len(points) > 1:
        payload = _entry_payload(entry)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_evaluate_point, [payload] * len(points), points,
                                    [tuple(check_ids)] * len(points), [order] * len(points)))
    else:
        results = [_evaluate_point(entry, p, check_ids, order) for p in points]
    rows = [r for r, _ in results]
    skip_log = [(i, reason) for i, (_, reason) in enumerate(results) if reason is not None]
    return points, rows, skip_log


def _summarize(check: Check, entry_id: str, points, rows, tolerance: float,
               expect: str) -> ResidualReport:
    vals = [(i, r[check.id]) for i, r in enumerate(rows) if r is not None]
    skipped = len(rows) - len(vals)
    if not vals:
        raise InadmissibleInstanceError(f"instance {entry_id!r} inadmissible at every sample point")
    arr = np.array([v for _, v in vals])
    k = int(np.argmax(arr))
    wi = vals[k][0]
    mx, mean = float(arr[k]), float(arr.mean())
    ok_skip = skipped <= MAX_SKIP_FRACTION * len(rows)
    if expect == "small":
        passed = bool(mx <= tolerance) and ok_skip
    else:
        passed = bool(mx >= tolerance) and ok_skip
    witness = {"x": list(points[wi].x), "y": list(points[wi].y)}
    return ResidualReport(check.id, entry_id, len(vals), skipped, mx, mean, tolerance, expect,
                          passed, witness)


def run_checks(entry: CatalogEntry | str, check_specs: Sequence[CheckSpec | str],
               plan: SamplePlan) -> list[ResidualReport]:
    """Evaluate several checks on one shared sample; one report per check."""
    if isinstance(entry, str):
        entry = get_entry(entry)
    specs = [s if isinstance(s, CheckSpec) else CheckSpec(s) for s in check_specs]
    if not specs:
        return []
    ids = list(dict.fromkeys(s.check_id for s in specs))
    points, rows, _ = evaluate_checks(entry, ids, plan)
    reports = []
    for s in specs:
        check = get_check(s.check_id)
        tol = check.tolerance if s.tolerance is None else s.tolerance
        reports.append(_summarize(check, entry.id, points, rows, tol, s.expect or check.expect))
    return reports


def run_check(spec: CheckSpec, plan: SamplePlan, entry: CatalogEntry | None = None) -> ResidualReport:
    entry = entry or get_entry(spec.instance or plan.instance)
    return run_checks(entry, [spec], plan)[0]


# ----------------------------------------------------------------------
# theorem suites
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class Biconditional:
    hypothesis: str
    conclusion: str
    requires: frozenset = frozenset()
    extras: tuple[tuple[str, float], ...] = ()


THEOREMS: dict[str, Biconditional] = {
    "theorem1": Biconditional("theorem1_parallel_omega", "theorem1_B_zero", frozenset(),
                            (("eq15", 1e-8),)),
    "theorem2": Biconditional("theorem2_closed", "theorem2_N_zero", frozenset(),
                            (("cor2_b_N_N0", 1e-8),)),
    "prop5": Biconditional("prop5_R_base", "prop5_R_star", frozenset({"parallel_b"})),
    "theorem3": Biconditional("theorem3_hA_zero", "theorem3_berwald_star",
                            frozenset({"parallel_b", "berwald_base"})),
    "theorem4": Biconditional("theorem4_landsberg_base", "theorem4_landsberg_star",
                            frozenset({"parallel_b"})),
    "theorem5": Biconditional("theorem5_integrable_base", "theorem5_integrable_star",
                            frozenset({"closed"})),
    "theorem6": Biconditional("theorem6_nu_parallel", "theorem6_general_landsberg_star",
                            frozenset({"closed", "general_landsberg_base"}),
                            (("theorem6_prop6_closed", 1e-7),)),
}


def theorem_suite(entry: CatalogEntry | str, theorem_id: str, plan: SamplePlan,
                  large: float = LARGE) -> list[ResidualReport]:
    """Hypothesis and conclusion reports for one biconditional.

    If the hypothesis residual is small everywhere, the conclusion must be
    small everywhere.  Otherwise the hypothesis must exceed ``large`` at its
    witness and the conclusion is re-evaluated at that same witness, where
    it must exceed ``large`` too.
    """
    if isinstance(entry, str):
        entry = get_entry(entry)
    try:
        spec = THEOREMS[theorem_id]
    except KeyError:
        raise UnknownCheckError(f"unknown theorem {theorem_id!r}") from None
    missing = spec.requires - entry.tags
    if missing:
        raise MissingTagsError(f"{entry.id} lacks tags {sorted(missing)} for {theorem_id}")
    ids = [spec.hypothesis, spec.conclusion] + [e for e, _ in spec.extras]
    points, rows, _ = evaluate_checks(entry, ids, plan)
    hyp_check = get_check(spec.hypothesis)
    concl_check = get_check(spec.conclusion)
    hyp = _summarize(hyp_check, entry.id, points, rows, hyp_check.tolerance, "small")
    reports = []
    if hyp.passed:
        hyp.note = f"{theorem_id}: hypothesis holds"
        concl = _summarize(concl_check, entry.id, points, rows, concl_check.tolerance, "small")
        concl.note = f"{theorem_id}: conclusion must vanish"
        reports += [hyp, concl]
    else:
        hyp = _summarize(hyp_check, entry.id, points, rows, large, "large")
        hyp.note = f"{theorem_id}: hypothesis violated"
        wi = next(i for i, p in enumerate(points)
                  if list(p.x) == hyp.witness["x"] and list(p.y) == hyp.witness["y"])
        at = rows[wi][spec.conclusion]
        concl = ResidualReport(spec.conclusion, entry.id, 1, 0, at, at, large, "large",
                               bool(at >= large), hyp.witness,
                               f"{theorem_id}: conclusion at hypothesis witness")
        reports += [hyp, concl]
    for cid, tol in spec.extras:
        rep = _summarize(get_check(cid), entry.id, points, rows, tol, "small")
        rep.note = f"{theorem_id}: supporting identity"
        reports.append(rep)
    return reports


def verify_tags(entry: CatalogEntry | str, plan: SamplePlan,
                large: float = LARGE) -> list[ResidualReport]:
    """Each carried tag must hold (defining residual small); each absent tag
    must visibly fail (residual above ``large`` somewhere)."""
    if isinstance(entry, str):
        entry = get_entry(entry)
    specs = []
    for tag, cid in sorted(TAG_CHECKS.items()):
        if tag in entry.tags:
            specs.append(CheckSpec(cid, expect="small"))
        else:
            specs.append(CheckSpec(cid, tolerance=large, expect="large"))
    reports = run_checks(entry, specs, plan)
    for (tag, _), rep in zip(sorted(TAG_CHECKS.items()), reports):
        rep.note = f"tag {tag} {'present' if tag in entry.tags else 'absent'}"
    return reports
