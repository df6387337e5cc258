"""Volumes and conformal charts of the constant-curvature model spaces.

Notation follows the usual conventions: ``v_m`` is the volume of the unit
Euclidean m-ball, ``vol S^k`` the area of the unit round k-sphere and
``sn_kappa`` the warping function of the model space of curvature ``kappa``.

Projection conventions
----------------------
Stereographic projection is taken from the north pole ``e_{n+1}`` onto the
equatorial plane. With this choice the round metric pulls back to
``(2 / (1 + |x|^2))^2 |dx|^2`` and a geodesic cap of radius ``R`` about the
south pole maps onto the Euclidean ball of radius ``tan(R / 2)``. The
Poincare ball carries the metric ``(2 / (1 - |x|^2))^2 |dx|^2`` and a geodesic
ball of radius ``R`` about the origin is the Euclidean ball of radius
``tanh(R / 2)``. Other normalizations of these factors differ by a global
constant that cancels in every ratio used by :mod:`waistlab.transport`.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .quadrature import integrate

__all__ = [
    "ModelSpace",
    "BallSpec",
    "unit_ball_volume",
    "sphere_volume",
    "sn",
    "geodesic_ball_volume",
    "tube_volume_subsphere",
    "stereographic",
    "inverse_stereographic",
    "stereographic_conformal_factor",
    "cap_image_radius",
    "poincare_conformal_factor",
    "poincare_distance",
    "hyperbolic_ball_image_radius",
    "model_distance_polar",
]


@dataclass(frozen=True)
class ModelSpace:
    """The simply connected space of constant curvature ``curvature`` and dimension ``dim``."""

    curvature: float
    dim: int

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 1:
            raise DomainError(f"dimension must be a positive integer, got {self.dim}")

    @property
    def max_radius(self):
        """Supremum of admissible ball radii (``pi / sqrt(kappa)`` for spheres)."""
        if self.curvature > 0:
            return math.pi / math.sqrt(self.curvature)
        return math.inf

    def check_radius(self, radius):
        if not radius >= 0:
            raise DomainError(f"radius must be nonnegative, got {radius}")
        if radius >= self.max_radius:
            raise DomainError(
                f"radius {radius} is not below pi/sqrt(kappa) = {self.max_radius} "
                f"for curvature {self.curvature}"
            )

    def sn(self, t):
        return sn(self.curvature, t)


@dataclass(frozen=True)
class BallSpec:
    """A geodesic ball of radius ``radius`` in the ``subdim``-dimensional model space.

    ``space`` fixes the curvature and the ambient dimension ``n``; the ball
    itself lives in ``M^k_kappa`` with ``k = subdim <= n``.
    """

    space: ModelSpace
    radius: float
    subdim: int = None

    def __post_init__(self):
        if self.subdim is None:
            object.__setattr__(self, "subdim", self.space.dim)
        if self.subdim < 1 or self.subdim > self.space.dim:
            raise DomainError(f"subdim must lie in [1, {self.space.dim}], got {self.subdim}")
        self.space.check_radius(self.radius)


def unit_ball_volume(m):
    """Volume ``v_m = pi^(m/2) / Gamma(m/2 + 1)`` of the unit Euclidean m-ball."""
    if int(m) != m or m < 0:
        raise DomainError(f"dimension must be a nonnegative integer, got {m}")
    m = int(m)
    return math.exp(0.5 * m * math.log(math.pi) - math.lgamma(0.5 * m + 1.0))


def sphere_volume(k):
    """Area of the unit round k-sphere, ``(k + 1) v_{k+1}``.

    ``k = 0`` is accepted and gives 2 (two points).
    """
    if int(k) != k or k < 0:
        raise DomainError(f"sphere dimension must be a nonnegative integer, got {k}")
    return (k + 1) * unit_ball_volume(k + 1)


def sn(kappa, t):
    """Warping function: ``sin(sqrt(k) t)/sqrt(k)``, ``t`` or ``sinh(sqrt(-k) t)/sqrt(-k)``."""
    t = np.asarray(t, dtype=float)
    if kappa > 0:
        s = math.sqrt(kappa)
        out = np.sin(s * t) / s
    elif kappa < 0:
        s = math.sqrt(-kappa)
        out = np.sinh(s * t) / s
    else:
        out = t.copy()
    return out if out.ndim else float(out)


def geodesic_ball_volume(spec):
    """Volume of the k-dimensional geodesic ball ``B^k(R)`` in ``M^k_kappa``.

    Computed as ``vol S^{k-1} * int_0^R sn_kappa(t)^{k-1} dt`` by adaptive
    quadrature.
    """
    if not isinstance(spec, BallSpec):
        raise TypeError("geodesic_ball_volume expects a BallSpec")
    k = spec.subdim
    kappa = spec.space.curvature
    if spec.radius == 0:
        return 0.0
    if k == 1:
        radial = spec.radius
    else:
        radial = integrate(lambda t: sn(kappa, t) ** (k - 1), 0.0, spec.radius)
    return sphere_volume(k - 1) * radial


def tube_volume_subsphere(n, k, t):
    """Volume of the t-neighborhood of a great ``S^k`` inside ``S^n``.

    ``vol S^k * vol S^{n-k-1} * int_0^t cos^k(th) sin^{n-k-1}(th) dth`` for
    ``0 <= t <= pi/2``.
    """
    if not (0 <= k < n):
        raise DomainError(f"need 0 <= k < n, got k={k}, n={n}")
    if not (0.0 <= t <= math.pi / 2):
        raise DomainError(f"tube radius must lie in [0, pi/2], got {t}")
    m = n - k - 1
    radial = integrate(lambda th: math.cos(th) ** k * math.sin(th) ** m, 0.0, t)
    return sphere_volume(k) * sphere_volume(m) * radial


def _as_points(x):
    x = np.asarray(x, dtype=float)
    return x, x.ndim == 1


def stereographic(p):
    """Project points of ``S^n`` (last coordinate = height) to ``R^n``.

    The projection centre is the north pole; the south pole goes to 0.
    """
    p, single = _as_points(p)
    p2 = np.atleast_2d(p)
    denom = 1.0 - p2[:, -1]
    if np.any(denom <= 1e-300) or np.any(np.isclose(p2[:, -1], 1.0, rtol=0, atol=1e-15)):
        raise DomainError("the north pole has no stereographic image")
    x = p2[:, :-1] / denom[:, None]
    return x[0] if single else x


def inverse_stereographic(x):
    """Inverse of :func:`stereographic`."""
    x, single = _as_points(x)
    x2 = np.atleast_2d(x)
    sq = np.sum(x2 * x2, axis=1)
    top = 2.0 * x2 / (1.0 + sq)[:, None]
    height = (sq - 1.0) / (sq + 1.0)
    p = np.column_stack([top, height])
    return p[0] if single else p


def stereographic_conformal_factor(x):
    """Length scale factor ``2 / (1 + |x|^2)`` of the round metric in the chart."""
    x = np.asarray(x, dtype=float)
    sq = np.sum(x * x, axis=-1) if x.ndim else x * x
    return 2.0 / (1.0 + sq)


def cap_image_radius(R):
    """Euclidean radius of the stereographic image of a cap of radius ``R`` about the south pole."""
    if not (0.0 <= R < math.pi):
        raise DomainError(f"cap radius must lie in [0, pi), got {R}")
    return math.tan(0.5 * R)


def poincare_conformal_factor(x):
    """Length scale factor ``2 / (1 - |x|^2)`` of the Poincare ball metric."""
    x = np.asarray(x, dtype=float)
    sq = np.sum(x * x, axis=-1) if x.ndim else x * x
    if np.any(sq >= 1.0):
        raise DomainError("point is not inside the open unit ball")
    return 2.0 / (1.0 - sq)


def poincare_distance(u, v):
    """Hyperbolic distance between points of the Poincare ball."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    uu = np.sum(u * u, axis=-1)
    vv = np.sum(v * v, axis=-1)
    if np.any(uu >= 1.0) or np.any(vv >= 1.0):
        raise DomainError("point is not inside the open unit ball")
    duv = np.sum((u - v) ** 2, axis=-1)
    # arccosh(1 + z) written as 2 asinh(sqrt(z/2)) to keep precision at short range
    z = 2.0 * duv / ((1.0 - uu) * (1.0 - vv))
    return 2.0 * np.arcsinh(np.sqrt(0.5 * z))


def hyperbolic_ball_image_radius(R):
    """Euclidean radius of the Poincare image of a hyperbolic ball of radius ``R``."""
    if not R >= 0:
        raise DomainError(f"radius must be nonnegative, got {R}")
    return math.tanh(0.5 * R)


def model_distance_polar(kappa, r1, th1, r2, th2):
    """Distance in ``M^2_kappa`` between points given in geodesic polar coordinates.

    Uses haversine-type forms of the law of cosines, which stay accurate for
    nearby points.
    """
    r1 = np.asarray(r1, dtype=float)
    r2 = np.asarray(r2, dtype=float)
    half = np.sin(0.5 * (np.asarray(th1) - np.asarray(th2))) ** 2
    if kappa == 0:
        return np.sqrt((r1 - r2) ** 2 + 4.0 * r1 * r2 * half)
    s = math.sqrt(abs(kappa))
    if kappa > 0:
        q = np.sin(0.5 * s * (r1 - r2)) ** 2 + np.sin(s * r1) * np.sin(s * r2) * half
        return 2.0 * np.arcsin(np.sqrt(np.clip(q, 0.0, 1.0))) / s
    q = np.sinh(0.5 * s * (r1 - r2)) ** 2 + np.sinh(s * r1) * np.sinh(s * r2) * half
    return 2.0 * np.arcsinh(np.sqrt(q)) / s
