"""Geodesics of ``L`` and ``L*`` and path comparison up to reparametrization.

The geodesic equation ``x'' + 2 G(x, x') = 0`` is integrated with an embedded
Dormand-Prince 5(4) pair.  Arc length of the base metric is carried along as
an extra state component so both traces can be put on a common parameter.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .expr import EvalContext
from .geometry import MetricField, SlitPoint
from .randers import OneFormField, RandersBundle, build_star_metric


class GeodesicError(RuntimeError):
    pass


class StepUnderflowError(GeodesicError):
    pass


class DomainExitError(GeodesicError):
    pass


# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4


@dataclass(frozen=True)
class IntegratorConfig:
    rtol: float = 1e-9
    atol: float = 1e-12
    first_step: float | None = None
    max_steps: int = 100_000
    min_step: float = 1e-14
    x_box: tuple[tuple[float, float], ...] | None = None


@dataclass
class IntegratorStats:
    steps: int = 0
    rejected: int = 0
    evaluations: int = 0
    max_error_estimate: float = 0.0


def _dp_stages(f, t, z, h, k1):
    ks = [k1]
    for s in range(1, 7):
        zs = z + h * sum(a * k for a, k in zip(_A[s], ks))
        ks.append(f(t + _C[s] * h, zs))
    return np.array(ks)


def dormand_prince(f: Callable[[float, np.ndarray], np.ndarray], z0: Sequence[float],
                   t_end: float, config: IntegratorConfig = IntegratorConfig(),
                   check: Callable[[np.ndarray], None] | None = None):
    """Adaptive integration of ``z' = f(t, z)`` on ``[0, t_end]``.

    Returns accepted times, states, derivatives at those states and stats.
    ``check`` is called on every accepted state and may raise.
    """
    z = np.asarray(z0, dtype=float)
    t = 0.0
    stats = IntegratorStats()
    k1 = f(t, z)
    stats.evaluations += 1
    ts, zs, dz = [t], [z.copy()], [k1.copy()]
    h = config.first_step
    if h is None:
        scale = config.atol + config.rtol * np.abs(z)
        d0 = np.linalg.norm(z / scale) / np.sqrt(z.size)
        d1 = np.linalg.norm(k1 / scale) / np.sqrt(z.size)
        h = 0.01 * d0 / d1 if d0 > 1e-5 and d1 > 1e-5 else 1e-6
        h = min(h, t_end)
    while t < t_end:
        if stats.steps + stats.rejected >= config.max_steps:
            raise GeodesicError(f"exceeded {config.max_steps} steps at t={t:.6g}")
        last = h >= t_end - t
        h = t_end - t if last else h
        if h < config.min_step * max(1.0, abs(t)):
            raise StepUnderflowError(f"step size underflow at t={t:.6g}")
        ks = _dp_stages(f, t, z, h, k1)
        stats.evaluations += 6
        z_new = z + h * (_B5 @ ks)
        err_vec = h * (_E @ ks)
        scale = config.atol + config.rtol * np.maximum(np.abs(z), np.abs(z_new))
        err = float(np.sqrt(np.mean((err_vec / scale) ** 2)))
        if err <= 1.0:
            t = t_end if last else t + h
            z = z_new
            k1 = ks[6]  # first-same-as-last
            stats.steps += 1
            stats.max_error_estimate = max(stats.max_error_estimate, float(np.max(np.abs(err_vec))))
            if check is not None:
                check(z)
            ts.append(t)
            zs.append(z.copy())
            dz.append(k1.copy())
            factor = 5.0 if err == 0 else min(5.0, 0.9 * err ** -0.2)
        else:
            stats.rejected += 1
            factor = max(0.2, 0.9 * err ** -0.2)
        h *= factor
    return np.array(ts), np.array(zs), np.array(dz), stats


def fixed_step(f, z0, t_end: float, steps: int, method: str = "rk4") -> np.ndarray:
    """Final state after ``steps`` equal steps of classical RK4 or the
    fifth-order Dormand-Prince solution (``method="dp5"``)."""
    z = np.asarray(z0, dtype=float)
    h = t_end / steps
    t = 0.0
    for _ in range(steps):
        if method == "rk4":
            k1 = f(t, z)
            k2 = f(t + h / 2, z + h / 2 * k1)
            k3 = f(t + h / 2, z + h / 2 * k2)
            k4 = f(t + h, z + h * k3)
            z = z + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        elif method == "dp5":
            ks = _dp_stages(f, t, z, h, f(t, z))
            z = z + h * (_B5 @ ks)
        else:
            raise ValueError(f"unknown method {method!r}")
        t += h
    return z


# ----------------------------------------------------------------------
# geodesic flow
# ----------------------------------------------------------------------

def spray(metric: MetricField, x: Sequence[float], y: Sequence[float]) -> np.ndarray:
    """Spray coefficients ``G^i`` at one point."""
    return np.asarray(metric.frame(SlitPoint(tuple(x), tuple(y)), 2).G.value, dtype=float)


def geodesic_rhs(metric: MetricField, length: MetricField | None = None):
    """Right side of the first-order system in ``(x, y, s)`` where ``s`` is
    arc length of ``length`` (default: ``metric`` itself)."""
    length = length or metric

    def f(t, z):
        n = (z.size - 1) // 2
        x, y = z[:n], z[n:2 * n]
        fr = metric.frame(SlitPoint(tuple(x), tuple(y)), 2)
        acc = -2.0 * np.asarray(fr.G.value, dtype=float)
        speed = float(fr.L.value) if length is metric else float(length(x, y))
        return np.concatenate([y, acc, [speed]])

    return f


@dataclass
class GeodesicTrace:
    metric: str
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    s: np.ndarray  # arc length of the reference metric
    ds: np.ndarray  # reference speed, ds/dt
    stats: IntegratorStats = field(default_factory=IntegratorStats)
    speed_drift: float = 0.0

    @property
    def n(self) -> int:
        return self.x.shape[1]

    def rows(self):
        for k in range(self.t.size):
            yield [self.t[k], *self.x[k], *self.y[k]]

    def path_spline(self) -> CubicHermiteSpline:
        """Position as a function of reference arc length."""
        return CubicHermiteSpline(self.s, self.x, self.y / self.ds[:, None])


def _box_check(box):
    if box is None:
        return None
    lo = np.array([b[0] for b in box])
    hi = np.array([b[1] for b in box])

    def check(z):
        n = lo.size
        if np.any(z[:n] < lo) or np.any(z[:n] > hi):
            raise DomainExitError(f"trace left the x-box at x={z[:n].tolist()}")

    return check


def integrate_geodesic(metric: MetricField, x0: Sequence[float], y0: Sequence[float],
                       t_end: float, config: IntegratorConfig = IntegratorConfig(),
                       length: MetricField | None = None) -> GeodesicTrace:
    """Geodesic of ``metric`` from ``(x0, y0)`` over ``[0, t_end]``.

    ``length`` selects the metric whose arc length is tracked (defaults to
    ``metric``).  ``speed_drift`` reports the relative variation of
    ``metric``'s own speed along the trace.
    """
    if t_end <= 0:
        raise ValueError("t_end must be positive")
    x0 = np.asarray(x0, dtype=float)
    y0 = np.asarray(y0, dtype=float)
    if x0.size != metric.n or y0.size != metric.n:
        raise ValueError("initial point has wrong dimension")
    if not np.any(y0):
        raise ValueError("initial velocity must be nonzero")
    length = length or metric
    f = geodesic_rhs(metric, length)
    ts, zs, dz, stats = dormand_prince(f, np.concatenate([x0, y0, [0.0]]), t_end, config,
                                       _box_check(config.x_box))
    n = metric.n
    x, y, s = zs[:, :n], zs[:, n:2 * n], zs[:, 2 * n]
    own = np.array([metric(xi, yi) for xi, yi in zip(x, y)])
    return GeodesicTrace(metric.name, ts, x, y, s, dz[:, 2 * n], stats,
                         float(np.max(np.abs(own / own[0] - 1.0))))


@dataclass(frozen=True)
class PathComparison:
    max_deviation: float
    grid: np.ndarray = field(repr=False)
    length: float = 0.0

    def to_dict(self) -> dict:
        return {"max_deviation": self.max_deviation, "grid_points": int(self.grid.size),
                "arc_length": self.length}


def compare_traces(a: GeodesicTrace, b: GeodesicTrace, grid_points: int = 201) -> PathComparison:
    """Max coordinate distance of two traces on a common arc-length grid."""
    length = float(min(a.s[-1], b.s[-1]))
    grid = np.linspace(0.0, length, grid_points)
    pa, pb = a.path_spline()(grid), b.path_spline()(grid)
    dev = float(np.max(np.linalg.norm(pa - pb, axis=1)))
    return PathComparison(dev, grid, length)


def compare_geodesics(bundle: RandersBundle, x0, y0, t_end: float,
                      config: IntegratorConfig = IntegratorConfig(), grid_points: int = 201):
    """Geodesics of ``L`` and ``L*`` from the same initial vector, compared as
    paths parametrized by ``L``-arc length.  Returns ``(comparison, base, star)``."""
    star = build_star_metric(bundle, checked=False)
    base_trace = integrate_geodesic(bundle.base, x0, y0, t_end, config)
    star_trace = integrate_geodesic(star, x0, y0, t_end, config, length=bundle.base)
    star_trace.speed_drift = float(
        np.max(np.abs(np.array([star(xi, yi) for xi, yi in zip(star_trace.x, star_trace.y)])
                      / star(x0, y0) - 1.0)))
    return compare_traces(base_trace, star_trace, grid_points), base_trace, star_trace


def dJ_alpha_closedness(form: OneFormField, box: Sequence[tuple[float, float]],
                        samples: int = 64, seed: int = 0) -> float:
    """``max |d_i b_j - d_j b_i|`` over seeded points of the box."""
    n = form.n
    rng = np.random.default_rng(seed)
    lo = np.array([b[0] for b in box], dtype=float)
    hi = np.array([b[1] for b in box], dtype=float)
    ctx = EvalContext(n, order=1, seeds=tuple(f"x{i + 1}" for i in range(n)))
    worst = 0.0
    for _ in range(samples):
        x = lo + (hi - lo) * rng.random(n)
        b = form.jet(SlitPoint(tuple(x), (1.0,) + (0.0,) * (n - 1)), ctx)
        db = np.array([[b[j].d(i).value for j in range(n)] for i in range(n)])
        worst = max(worst, float(np.max(np.abs(db - db.T))))
    return worst


def write_trace_csv(trace: GeodesicTrace, path: str | Path) -> Path:
    path = Path(path)
    n = trace.n
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"x{i + 1}" for i in range(n)] + [f"y{i + 1}" for i in range(n)])
        for row in trace.rows():
            w.writerow([repr(float(v)) for v in row])
    return path
