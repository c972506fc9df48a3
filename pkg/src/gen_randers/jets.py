"""Truncated multivariate Taylor arithmetic.

A :class:`Jet` holds the Taylor coefficients (``c_alpha = d^alpha f / alpha!``)
of a tensor-valued function of ``m`` seed variables, truncated at a total
degree ``order``.  The tensor axes come first and the monomial axis is last,
so a ``(2, 2)`` matrix field with order 4 in 4 seeds is stored as an array of
shape ``(2, 2, 70)``.

Arithmetic between jets of different orders truncates to the smaller order.
Differentiating with respect to a seed lowers the order by one, which is how
the geometry code keeps track of how many derivatives are still exact.
"""

from __future__ import annotations

import itertools
import math
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np


class JetError(ArithmeticError):
    """Base class for jet arithmetic failures."""


class JetDomainError(JetError):
    """A function was evaluated outside its (real, smooth) domain."""


class JetOrderError(JetError):
    """Not enough Taylor orders left for the requested derivative."""


class JetSpace:
    """Monomial bookkeeping for ``nvars`` seeds up to total degree ``order``."""

    def __init__(self, nvars: int, order: int):
        if nvars < 1 or order < 0:
            raise ValueError("need nvars >= 1 and order >= 0")
        self.nvars = nvars
        self.order = order
        exps = []
        self.sizes = []
        for d in range(order + 1):
            for combo in itertools.combinations_with_replacement(range(nvars), d):
                e = [0] * nvars
                for v in combo:
                    e[v] += 1
                exps.append(tuple(e))
            self.sizes.append(len(exps))
        self.exponents = np.array(exps, dtype=np.int64).reshape(len(exps), nvars)
        self.index = {e: i for i, e in enumerate(exps)}
        self.degree = self.exponents.sum(axis=1)
        self._mul = {}
        self._deriv = {}

    def size(self, order: int) -> int:
        return self.sizes[order]

    def mul_table(self, order: int):
        """Pairs ``(I, J)`` sorted by product monomial, plus reduceat offsets."""
        tab = self._mul.get(order)
        if tab is None:
            M = self.sizes[order]
            triples = []
            for i in range(M):
                ei = self.exponents[i]
                di = self.degree[i]
                for j in range(self.sizes[order - di]):
                    r = self.index[tuple(ei + self.exponents[j])]
                    triples.append((r, i, j))
            triples.sort()
            arr = np.array(triples, dtype=np.int64)
            starts = np.searchsorted(arr[:, 0], np.arange(M))
            tab = (arr[:, 1].copy(), arr[:, 2].copy(), starts)
            self._mul[order] = tab
        return tab

    def deriv_table(self, var: int, order: int):
        """Source indices and factors mapping an order-``order`` jet to its
        ``var`` partial (order ``order - 1``)."""
        key = (var, order)
        tab = self._deriv.get(key)
        if tab is None:
            M = self.sizes[order - 1]
            src = np.empty(M, dtype=np.int64)
            fac = np.empty(M)
            for b in range(M):
                e = list(self.exponents[b])
                fac[b] = e[var] + 1
                e[var] += 1
                src[b] = self.index[tuple(e)]
            tab = (src, fac)
            self._deriv[key] = tab
        return tab


@lru_cache(maxsize=None)
def jet_space(nvars: int, order: int) -> JetSpace:
    return JetSpace(nvars, order)


def _const_coeffs(value, space: JetSpace, order: int) -> np.ndarray:
    value = np.asarray(value, dtype=float)
    c = np.zeros(value.shape + (space.size(order),))
    c[..., 0] = value
    return c


class Jet:
    """Tensor-valued truncated Taylor expansion."""

    __slots__ = ("space", "order", "c")
    __array_priority__ = 1000
    __array_ufunc__ = None

    def __init__(self, space: JetSpace, order: int, coeffs: np.ndarray):
        if order > space.order:
            raise ValueError("jet order exceeds its space")
        self.space = space
        self.order = order
        self.c = coeffs

    # construction -----------------------------------------------------
    @classmethod
    def constant(cls, value, space: JetSpace, order: int | None = None) -> "Jet":
        order = space.order if order is None else order
        return cls(space, order, _const_coeffs(value, space, order))

    @classmethod
    def variable(cls, var: int, value: float, space: JetSpace, order: int | None = None) -> "Jet":
        jet = cls.constant(value, space, order)
        if jet.order >= 1:
            jet.c[1 + var] = 1.0
        return jet

    # basic accessors ----------------------------------------------------
    @property
    def shape(self) -> tuple:
        return self.c.shape[:-1]

    @property
    def ndim(self) -> int:
        return self.c.ndim - 1

    @property
    def value(self) -> np.ndarray:
        v = self.c[..., 0]
        return v.copy() if isinstance(v, np.ndarray) else float(v)

    def coefficient(self, alpha: Sequence[int]) -> np.ndarray:
        return self.c[..., self.space.index[tuple(alpha)]]

    def partial(self, alpha: Sequence[int]) -> np.ndarray:
        """Exact partial derivative ``d^alpha`` at the expansion point."""
        if sum(alpha) > self.order:
            raise JetOrderError(f"derivative of order {sum(alpha)} from order-{self.order} jet")
        fact = math.prod(math.factorial(a) for a in alpha)
        return self.coefficient(alpha) * fact

    def truncate(self, order: int) -> "Jet":
        if order > self.order:
            raise JetOrderError(f"cannot raise jet order {self.order} to {order}")
        if order == self.order:
            return self
        return Jet(self.space, order, self.c[..., : self.space.size(order)])

    def d(self, var: int) -> "Jet":
        """Partial derivative with respect to seed ``var``."""
        if self.order < 1:
            raise JetOrderError("jet order exhausted; raise the evaluation order")
        src, fac = self.space.deriv_table(var, self.order)
        return Jet(self.space, self.order - 1, self.c[..., src] * fac)

    def __getitem__(self, key) -> "Jet":
        if not isinstance(key, tuple):
            key = (key,)
        return Jet(self.space, self.order, self.c[key + (slice(None),)])

    def transpose(self, *axes) -> "Jet":
        if not axes:
            axes = tuple(reversed(range(self.ndim)))
        return Jet(self.space, self.order, self.c.transpose(tuple(axes) + (self.ndim,)))

    @property
    def T(self) -> "Jet":
        return self.transpose()

    def reshape(self, *shape) -> "Jet":
        return Jet(self.space, self.order, self.c.reshape(tuple(shape) + (self.c.shape[-1],)))

    def sum(self, axis=None) -> "Jet":
        if axis is None:
            axis = tuple(range(self.ndim))
        elif isinstance(axis, int):
            axis = (axis % self.ndim,)
        else:
            axis = tuple(a % self.ndim for a in axis)
        return Jet(self.space, self.order, self.c.sum(axis=axis))

    def __repr__(self) -> str:
        return f"Jet(shape={self.shape}, order={self.order}, value={self.value!r})"

    # arithmetic ---------------------------------------------------------
    def _coerce(self, other) -> "Jet":
        if isinstance(other, Jet):
            if other.space is not self.space:
                raise ValueError("jets live in different spaces")
            return other
        return Jet.constant(other, self.space, self.order)

    def _align(self, other: "Jet"):
        k = min(self.order, other.order)
        return self.truncate(k), other.truncate(k), k

    def __add__(self, other):
        if not isinstance(other, Jet):
            other = np.asarray(other, dtype=float)
            shape = np.broadcast_shapes(self.shape, other.shape)
            c = np.broadcast_to(self.c, shape + self.c.shape[-1:]).copy()
            c[..., 0] += other
            return Jet(self.space, self.order, c)
        a, b, k = self._align(self._coerce(other))
        return Jet(self.space, k, a.c + b.c)

    __radd__ = __add__

    def __neg__(self):
        return Jet(self.space, self.order, -self.c)

    def __pos__(self):
        return self

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.space, self.order, self.c * np.asarray(other, dtype=float)[..., None])
        a, b, k = self._align(self._coerce(other))
        I, J, starts = self.space.mul_table(k)
        prod = a.c[..., I] * b.c[..., J]
        return Jet(self.space, k, np.add.reduceat(prod, starts, axis=-1))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            return self * (1.0 / np.asarray(other, dtype=float))
        return self * reciprocal(other)

    def __rtruediv__(self, other):
        return reciprocal(self) * other

    def __pow__(self, p):
        if isinstance(p, Jet):
            return exp(p * log(self))
        return power(self, p)


# ----------------------------------------------------------------------
# composition with univariate functions
# ----------------------------------------------------------------------

def compose(u: Jet, taylor: Sequence[np.ndarray]) -> Jet:
    """Evaluate ``f(u)`` given ``taylor[j] = f^(j)(u0) / j!``, j = 0..order."""
    delta = Jet(u.space, u.order, u.c.copy())
    delta.c[..., 0] = 0.0
    result = Jet.constant(np.broadcast_to(taylor[u.order], u.shape), u.space, u.order)
    for j in range(u.order - 1, -1, -1):
        result = result * delta + taylor[j]
    return result


def _check_finite(arr, what):
    if not np.all(np.isfinite(arr)):
        raise JetDomainError(f"{what}: non-finite value")


def exp(u: Jet) -> Jet:
    e0 = np.exp(u.value)
    return compose(u, [e0 / math.factorial(j) for j in range(u.order + 1)])


def log(u: Jet) -> Jet:
    u0 = np.asarray(u.value)
    if np.any(u0 <= 0):
        raise JetDomainError("log of non-positive value")
    coeffs = [np.log(u0)]
    for j in range(1, u.order + 1):
        coeffs.append((-1.0) ** (j - 1) / (j * u0 ** j))
    return compose(u, coeffs)


def power(u: Jet, p) -> Jet:
    """``u ** p`` for a real constant ``p``; integer ``p`` also allows u0 <= 0."""
    p = float(p)
    if p.is_integer() and p >= 0:
        k = int(p)
        result = Jet.constant(np.ones(u.shape), u.space, u.order)
        base = u
        while k:
            if k & 1:
                result = result * base
            k >>= 1
            if k:
                base = base * base
        return result
    u0 = np.asarray(u.value, dtype=float)
    if p.is_integer():
        if np.any(u0 == 0):
            raise JetDomainError("division by zero")
    elif np.any(u0 <= 0) and u.order > 0 or np.any(u0 < 0):
        raise JetDomainError(f"non-integer power {p} of non-positive value")
    coeffs = []
    falling = 1.0
    for j in range(u.order + 1):
        coeffs.append(falling / math.factorial(j) * u0 ** (p - j))
        falling *= p - j
    return compose(u, coeffs)


def reciprocal(u: Jet) -> Jet:
    return power(u, -1)


def sqrt(u: Jet) -> Jet:
    u0 = np.asarray(u.value)
    if np.any(u0 < 0) or (u.order > 0 and np.any(u0 == 0)):
        raise JetDomainError("sqrt of non-positive value")
    return power(u, 0.5)


def sin(u: Jet) -> Jet:
    s, c = np.sin(u.value), np.cos(u.value)
    cycle = (s, c, -s, -c)
    return compose(u, [cycle[j % 4] / math.factorial(j) for j in range(u.order + 1)])


def cos(u: Jet) -> Jet:
    s, c = np.sin(u.value), np.cos(u.value)
    cycle = (c, -s, -c, s)
    return compose(u, [cycle[j % 4] / math.factorial(j) for j in range(u.order + 1)])


FUNCTIONS: dict[str, Callable[[Jet], Jet]] = {
    "sqrt": sqrt,
    "sin": sin,
    "cos": cos,
    "exp": exp,
    "log": log,
}


# ----------------------------------------------------------------------
# tensor algebra
# ----------------------------------------------------------------------

def _parse_subscripts(subscripts: str):
    inputs, _, output = subscripts.replace(" ", "").partition("->")
    return inputs.split(","), output


def _einsum2(a, sa: str, b, sb: str, so: str):
    if not isinstance(a, Jet) and not isinstance(b, Jet):
        return np.einsum(f"{sa},{sb}->{so}", a, b)
    used = set(sa + sb + so)
    z = next(ch for ch in "zZqQwWpP" if ch not in used)
    if not isinstance(a, Jet):
        return Jet(b.space, b.order, np.einsum(f"{sa},{sb}{z}->{so}{z}", np.asarray(a, float), b.c))
    if not isinstance(b, Jet):
        return Jet(a.space, a.order, np.einsum(f"{sa}{z},{sb}->{so}{z}", a.c, np.asarray(b, float)))
    a, b, k = a._align(b)
    I, J, starts = a.space.mul_table(k)
    prod = np.einsum(f"{sa}{z},{sb}{z}->{so}{z}", a.c[..., I], b.c[..., J])
    return Jet(a.space, k, np.add.reduceat(prod, starts, axis=-1))


def einsum(subscripts: str, *operands):
    """``numpy.einsum`` over the tensor axes of jets (no ellipsis support)."""
    ins, out = _parse_subscripts(subscripts)
    if len(ins) != len(operands):
        raise ValueError("operand count does not match subscripts")
    if len(operands) == 1:
        (a,) = operands
        if isinstance(a, Jet):
            z = next(ch for ch in "zZqQ" if ch not in ins[0] + out)
            return Jet(a.space, a.order, np.einsum(f"{ins[0]}{z}->{out}{z}", a.c))
        return np.einsum(subscripts, a)
    cur, scur = operands[0], ins[0]
    for pos in range(1, len(operands)):
        nxt, snxt = operands[pos], ins[pos]
        later = set("".join(ins[pos + 1:]) + out)
        keep = "".join(dict.fromkeys(ch for ch in scur + snxt if ch in later))
        target = out if pos == len(operands) - 1 else keep
        cur, scur = _einsum2(cur, scur, nxt, snxt, target), target
    return cur


def stack(jets: Sequence[Jet], axis: int = 0) -> Jet:
    """Stack jets along a new tensor axis."""
    k = min(j.order for j in jets)
    first = jets[0]
    ndim = first.ndim + 1
    axis = axis % ndim
    return Jet(first.space, k, np.stack([j.truncate(k).c for j in jets], axis=axis))


def inv(m: Jet) -> Jet:
    """Inverse of a square matrix jet via the Neumann series about its value."""
    m0 = m.value
    m0inv = np.linalg.inv(m0)
    dev = Jet(m.space, m.order, m.c.copy())
    dev.c[..., 0] = 0.0
    step = einsum("ij,jk->ik", -m0inv, dev)
    total = Jet.constant(np.eye(m0.shape[0]), m.space, m.order)
    term = step
    for _ in range(m.order):
        total = total + term
        term = einsum("ij,jk->ik", term, step)
    return einsum("ij,jk->ik", total, m0inv)


def value(obj):
    """Order-0 part of a jet, or the object itself for plain numbers."""
    return obj.value if isinstance(obj, Jet) else obj
