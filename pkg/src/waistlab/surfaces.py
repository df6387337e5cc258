"""Rotationally symmetric surfaces ``dr^2 + h(r)^2 dtheta^2`` and their geodesics.

Points are stored in geodesic normal coordinates around the pole:
``x = r (cos theta, sin theta)``, so ``|x|`` is the distance to the pole and
the chart is smooth through it. Tangent vectors are coordinate vectors in the
same chart. At ``x`` the metric is ``u u^T + (h(r)/r)^2 (I - u u^T)`` with
``u = x / r``.

The geodesic equation in this chart reads

    x'' = th'^2 (h h' - r) u + 2 r' th' (1 - r h'/h) u_perp,

with ``r' = <x, v>/r`` and ``th' = (x_1 v_2 - x_2 v_1)/r^2``; both terms
vanish at the pole. It is integrated for unit time by a vectorized
Dormand-Prince 5(4) pair with a step shared across the batch.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DomainError, NumericError, ValidationError
from .geometry import model_distance_polar

__all__ = [
    "RotSymSurface",
    "exp_map",
    "log_map",
    "surface_distance",
    "metric_norm",
    "max_curvature",
]

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
_B4 = np.array(
    [5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40]
)

_POLE_EPS = 1e-9
SPEED_DRIFT_TOL = 1e-9


@dataclass(frozen=True)
class RotSymSurface:
    """Surface of revolution with profile ``h`` (``h(0) = 0``, ``h'(0) = 1``).

    ``dh`` and ``d2h`` are the first and second derivatives of the profile.
    When ``d2h`` is omitted the curvature is evaluated with a central
    difference of ``dh``.
    """

    h: Callable
    dh: Callable
    max_radius: float = math.inf
    d2h: Optional[Callable] = None
    name: str = "surface"
    kappa: Optional[float] = field(default=None, compare=False)

    @classmethod
    def model(cls, kappa):
        """The model surface ``M^2_kappa`` (profile ``sn_kappa``)."""
        if kappa > 0:
            s = math.sqrt(kappa)
            return cls(
                h=lambda r: np.sin(s * r) / s,
                dh=lambda r: np.cos(s * r),
                d2h=lambda r: -s * np.sin(s * r),
                max_radius=math.pi / s,
                name=f"sphere(kappa={kappa:g})",
                kappa=kappa,
            )
        if kappa < 0:
            s = math.sqrt(-kappa)
            return cls(
                h=lambda r: np.sinh(s * r) / s,
                dh=lambda r: np.cosh(s * r),
                d2h=lambda r: s * np.sinh(s * r),
                name=f"hyperbolic(kappa={kappa:g})",
                kappa=kappa,
            )
        return cls(
            h=lambda r: np.asarray(r, dtype=float) * 1.0,
            dh=lambda r: np.ones_like(np.asarray(r, dtype=float)),
            d2h=lambda r: np.zeros_like(np.asarray(r, dtype=float)),
            name="flat",
            kappa=0.0,
        )

    def curvature(self, r):
        """Gaussian curvature ``-h''(r)/h(r)``."""
        r = np.asarray(r, dtype=float)
        if self.d2h is not None:
            d2 = self.d2h(r)
        else:
            step = 1e-5 * np.maximum(1.0, np.abs(r))
            d2 = (self.dh(r + step) - self.dh(r - step)) / (2 * step)
        return -d2 / self.h(r)

    def polar(self, x):
        x = np.asarray(x, dtype=float)
        return np.hypot(x[..., 0], x[..., 1]), np.arctan2(x[..., 1], x[..., 0])


def max_curvature(surface, radius, num=2001):
    """Largest sampled curvature of ``surface`` on ``(0, radius]``."""
    r = np.linspace(radius / num, radius, num)
    return float(np.max(surface.curvature(r)))


def _ratio_terms(surface, r):
    """Return ``h/r``, ``(h h' - r)/r^3`` and ``(1 - r h'/h)/r^2`` with safe pole limits."""
    rs = np.where(r < _POLE_EPS, 1.0, r)
    h = surface.h(rs)
    dh = surface.dh(rs)
    f = np.where(r < _POLE_EPS, 1.0, h / rs)
    a = np.where(r < _POLE_EPS, 0.0, (h * dh - rs) / rs**3)
    b = np.where(r < _POLE_EPS, 0.0, (1.0 - rs * dh / h) / rs**2)
    return f, a, b


def _acceleration(surface, x, v):
    r = np.hypot(x[:, 0], x[:, 1])
    _, a, b = _ratio_terms(surface, r)
    w = x[:, 0] * v[:, 1] - x[:, 1] * v[:, 0]
    xv = x[:, 0] * v[:, 0] + x[:, 1] * v[:, 1]
    # th'^2 (hh' - r) u       = (w/r)^2 * a * x
    # 2 r' th' (1 - rh'/h) u_perp = 2 xv w * b * x_perp / r^2 ... with b already / r^2
    rs = np.where(r < _POLE_EPS, 1.0, r)
    wr = w / rs
    c1 = wr * wr * a
    c2 = 2.0 * xv * w * b / (rs * rs)
    acc = np.empty_like(x)
    acc[:, 0] = c1 * x[:, 0] - c2 * x[:, 1]
    acc[:, 1] = c1 * x[:, 1] + c2 * x[:, 0]
    return acc


def metric_norm(surface, x, v):
    """Riemannian length of the coordinate vector ``v`` at ``x``."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    v = np.atleast_2d(np.asarray(v, dtype=float))
    r = np.hypot(x[:, 0], x[:, 1])
    f, _, _ = _ratio_terms(surface, r)
    rs = np.where(r < _POLE_EPS, 1.0, r)
    ur = np.where(r < _POLE_EPS, 0.0, (x[:, 0] * v[:, 0] + x[:, 1] * v[:, 1]) / rs)
    ut = np.where(r < _POLE_EPS, 0.0, (x[:, 0] * v[:, 1] - x[:, 1] * v[:, 0]) / rs)
    vv = v[:, 0] ** 2 + v[:, 1] ** 2
    sq = np.where(r < _POLE_EPS, vv, ur * ur + (f * ut) ** 2)
    return np.sqrt(sq)


def _integrate(surface, x0, v0, rtol=1e-12, atol=1e-13, max_steps=200000):
    """Integrate geodesics for unit time; returns final positions and velocities."""
    x = x0.copy()
    v = v0.copy()
    n = x.shape[0]
    y = np.concatenate([x, v], axis=1)

    def rhs(state):
        return np.concatenate([state[:, 2:], _acceleration(surface, state[:, :2], state[:, 2:])], axis=1)

    speed = np.max(np.abs(v0)) if n else 0.0
    t = 0.0
    h = 0.05 / max(1.0, speed)
    steps = 0
    k = [None] * 7
    k[0] = rhs(y)
    while t < 1.0 - 1e-15:
        h = min(h, 1.0 - t)
        for i in range(1, 7):
            inc = sum(_A[i][j] * k[j] for j in range(i) if _A[i][j] != 0.0)
            k[i] = rhs(y + h * inc)
        y5 = y + h * sum(_B5[j] * k[j] for j in range(7) if _B5[j] != 0.0)
        err = h * sum((_B5[j] - _B4[j]) * k[j] for j in range(7))
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y5))
        e = float(np.max(np.abs(err) / scale)) if n else 0.0
        if not math.isfinite(e):
            raise NumericError("geodesic integration produced non-finite values")
        if e <= 1.0:
            t += h
            y = y5
            k[0] = k[6]
            r = np.hypot(y[:, 0], y[:, 1])
            if np.any(r >= surface.max_radius):
                raise DomainError("geodesic left the chart of the surface")
        h *= min(5.0, max(0.2, 0.9 * (1.0 / max(e, 1e-30)) ** 0.2))
        steps += 1
        if steps > max_steps:
            raise NumericError("geodesic integration exceeded its step budget")
    return y[:, :2], y[:, 2:]


def exp_map(surface, base, v):
    """Exponential map: endpoint at time 1 of the geodesic from ``base`` with velocity ``v``.

    ``base`` and ``v`` are arrays of shape ``(2,)`` or ``(m, 2)``.
    """
    base = np.asarray(base, dtype=float)
    v = np.asarray(v, dtype=float)
    single = base.ndim == 1 and v.ndim == 1
    b2, v2 = np.broadcast_arrays(np.atleast_2d(base), np.atleast_2d(v))
    b2 = np.array(b2, dtype=float)
    v2 = np.array(v2, dtype=float)
    if np.any(np.hypot(b2[:, 0], b2[:, 1]) >= surface.max_radius):
        raise DomainError("base point lies outside the chart")
    x1, v1 = _integrate(surface, b2, v2)
    s0 = metric_norm(surface, b2, v2)
    s1 = metric_norm(surface, x1, v1)
    drift = np.abs(s1 - s0) / np.maximum(s0, 1.0)
    if np.any(drift > SPEED_DRIFT_TOL):
        raise NumericError(
            f"geodesic speed drifted by {float(np.max(drift)):.2e}", residual=float(np.max(drift))
        )
    return x1[0] if single else x1


def log_map(surface, base, target, tol=1e-11, max_iter=60):
    """Inverse of :func:`exp_map` by Newton shooting with a finite-difference Jacobian.

    Raises :class:`NumericError` (with the worst residual) if some pair does
    not converge within ``max_iter`` iterations.
    """
    base = np.asarray(base, dtype=float)
    target = np.asarray(target, dtype=float)
    single = base.ndim == 1 and target.ndim == 1
    b2, q2 = np.broadcast_arrays(np.atleast_2d(base), np.atleast_2d(target))
    b2 = np.array(b2, dtype=float)
    q2 = np.array(q2, dtype=float)
    v = q2 - b2
    res = exp_map(surface, b2, v) - q2
    rn = np.hypot(res[:, 0], res[:, 1])
    active = rn > tol
    it = 0
    while np.any(active):
        it += 1
        if it > max_iter:
            raise NumericError(
                f"shooting did not converge for {int(active.sum())} pairs",
                residual=float(np.max(rn)),
            )
        idx = np.flatnonzero(active)
        bb, vv, rr = b2[idx], v[idx], res[idx]
        step = 1e-7 * np.maximum(1.0, np.hypot(vv[:, 0], vv[:, 1]))[:, None]
        e0 = exp_map(surface, bb, vv + step * np.array([1.0, 0.0]))
        e1 = exp_map(surface, bb, vv + step * np.array([0.0, 1.0]))
        f0 = rr + q2[idx]
        j0 = (e0 - f0) / step
        j1 = (e1 - f0) / step
        det = j0[:, 0] * j1[:, 1] - j0[:, 1] * j1[:, 0]
        if np.any(np.abs(det) < 1e-14):
            raise NumericError("singular shooting Jacobian (conjugate point?)", residual=float(np.max(rn)))
        dx = -(j1[:, 1] * rr[:, 0] - j1[:, 0] * rr[:, 1]) / det
        dy = -(-j0[:, 1] * rr[:, 0] + j0[:, 0] * rr[:, 1]) / det
        delta = np.column_stack([dx, dy])
        old = np.hypot(rr[:, 0], rr[:, 1])
        lam = np.ones(len(idx))
        new_res = None
        for _ in range(30):
            trial = vv + lam[:, None] * delta
            try:
                new_res = exp_map(surface, bb, trial) - q2[idx]
            except DomainError:
                lam *= 0.5
                continue
            nn = np.hypot(new_res[:, 0], new_res[:, 1])
            worse = nn > old * (1.0 - 1e-4 * lam) + tol
            if not np.any(worse):
                break
            lam = np.where(worse, 0.5 * lam, lam)
        if new_res is None:
            raise NumericError("shooting step left the chart", residual=float(np.max(rn)))
        v[idx] = trial
        res[idx] = new_res
        rn[idx] = nn
        active = rn > tol
    return v[0] if single else v


def surface_distance(surface, p, q):
    """Geodesic distance by shooting: the metric length of ``log_p(q)``."""
    p = np.atleast_2d(np.asarray(p, dtype=float))
    q = np.atleast_2d(np.asarray(q, dtype=float))
    p, q = np.broadcast_arrays(p, q)
    v = log_map(surface, np.array(p), np.array(q))
    return metric_norm(surface, p, np.atleast_2d(v))


def model_distance(kappa, p, q):
    """Closed-form distance in ``M^2_kappa`` for points in normal coordinates."""
    p = np.atleast_2d(np.asarray(p, dtype=float))
    q = np.atleast_2d(np.asarray(q, dtype=float))
    r1, t1 = np.hypot(p[:, 0], p[:, 1]), np.arctan2(p[:, 1], p[:, 0])
    r2, t2 = np.hypot(q[:, 0], q[:, 1]), np.arctan2(q[:, 1], q[:, 0])
    return model_distance_polar(kappa, r1, t1, r2, t2)


def validate_profile(surface, radius, num=401):
    """Check ``h > 0`` on ``(0, radius]`` and finite curvature there."""
    r = np.linspace(radius / num, radius, num)
    hv = surface.h(r)
    if np.any(hv <= 0):
        raise ValidationError(f"profile of {surface.name} is not positive on (0, {radius}]")
    K = surface.curvature(r)
    if not np.all(np.isfinite(K)):
        raise ValidationError(f"curvature of {surface.name} is not finite on (0, {radius}]")
