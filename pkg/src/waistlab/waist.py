"""Fiber sweeps of explicit maps against waist lower bounds.

A sweep evaluates the k-dimensional size of the fibers ``f^{-1}(y)`` of a
test map over a grid of levels and compares the largest one with the volume
of the k-ball of the same radius in the model space. Fibers are measured two
ways when possible:

* chart quadrature, when the map ships an exact parametrization of each
  fiber (curves only, ``k = 1``), using the metric speed of the chart;
* a co-area band estimate, ``(1 / 2 eps) int_{|f - y| <= eps} |grad f|``,
  by Monte Carlo over the domain. This converges to the fiber volume as
  ``eps -> 0`` with an ``O(eps^2)`` bias for smooth maps.

The module also carries the convex-body checks (homothety lemma for
log-concave measures, norm waist of the cube, the max-map and ball
distance-map examples), the Gaussian plane check and the comparison check for
surfaces with curvature bounded above.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import special, stats
from scipy.spatial import ConvexHull

from .errors import DomainError, ValidationError
from .geometry import BallSpec, ModelSpace, geodesic_ball_volume, sphere_volume, unit_ball_volume
from .rng import map_chunks, reduce_moments, substream
from .surfaces import (
    RotSymSurface,
    max_curvature,
    metric_norm,
    model_distance,
    surface_distance,
    validate_profile,
)

__all__ = [
    "EuclideanRegion",
    "SphereCapRegion",
    "SurfaceRegion",
    "TestMap",
    "FiberSweep",
    "waist_bound",
    "chart_fiber_volume",
    "sweep_waist",
    "Polytope",
    "LpBall",
    "ConvexBodyMeasure",
    "validate_log_concave",
    "cube_max_map_check",
    "norm_waist_check",
    "pancake_lemma_check",
    "ball_distance_map_check",
    "gaussian_plane_check",
    "check_curvature_bound",
    "cat_comparison_check",
    "cat_waist_scenario",
    "distance_map_on_cap",
    "distance_map_on_surface",
    "disk_projection_map",
    "punctured_sphere_map",
    "cube_max_map",
    "pancake_scenarios",
    "COUNTEREXAMPLE_PROFILE",
    "bumped_hyperbolic_surface",
    "SCENARIOS",
    "run_scenario",
]

CHART_TOL = 1e-10
FD_STEP = 1e-6
GL_NODES = 64


def _gl(num):
    x, w = np.polynomial.legendre.leggauss(num)
    return 0.5 * (x + 1.0), 0.5 * w


# -- domains ----------------------------------------------------------------


@dataclass
class EuclideanRegion:
    """Subset of ``R^n`` given by a box and an optional membership test."""

    lo: np.ndarray
    hi: np.ndarray
    inside: Optional[Callable] = None
    name: str = "box"

    def __post_init__(self):
        self.lo = np.asarray(self.lo, dtype=float)
        self.hi = np.asarray(self.hi, dtype=float)
        if self.lo.shape != self.hi.shape or np.any(self.hi <= self.lo):
            raise DomainError("region box needs lo < hi componentwise")

    @property
    def dim(self):
        return len(self.lo)

    def sample(self, rng, m):
        x = self.lo + (self.hi - self.lo) * rng.random((m, self.dim))
        w = np.full(m, float(np.prod(self.hi - self.lo)))
        if self.inside is not None:
            w = w * self.inside(x)
        return x, w

    def grad_norm(self, f, x):
        g = np.zeros(len(x))
        for i in range(self.dim):
            e = np.zeros(self.dim)
            e[i] = FD_STEP
            g += ((f(x + e) - f(x - e)) / (2 * FD_STEP)) ** 2
        return np.sqrt(g)

    def speed(self, x, v):
        return np.linalg.norm(v, axis=1)


@dataclass
class SphereCapRegion:
    """Geodesic cap of radius ``radius`` about the south pole of ``S^2 subset R^3``."""

    radius: float
    name: str = "cap"

    def __post_init__(self):
        if not 0 < self.radius <= math.pi:
            raise DomainError(f"cap radius must lie in (0, pi], got {self.radius}")

    dim = 3

    def sample(self, rng, m):
        # Archimedes: height is uniform on the cap
        z = -1.0 + (1.0 - math.cos(self.radius)) * rng.random(m)
        th = 2 * math.pi * rng.random(m)
        s = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
        x = np.column_stack([s * np.cos(th), s * np.sin(th), z])
        return x, np.full(m, 2 * math.pi * (1.0 - math.cos(self.radius)))

    def grad_norm(self, f, x):
        a = np.where(np.abs(x[:, :1]) < 0.9, np.array([[1.0, 0.0, 0.0]]), np.array([[0.0, 1.0, 0.0]]))
        t1 = a - np.sum(a * x, axis=1, keepdims=True) * x
        t1 /= np.linalg.norm(t1, axis=1, keepdims=True)
        t2 = np.cross(x, t1)
        g = np.zeros(len(x))
        for t in (t1, t2):
            xp = x + FD_STEP * t
            xm = x - FD_STEP * t
            xp /= np.linalg.norm(xp, axis=1, keepdims=True)
            xm /= np.linalg.norm(xm, axis=1, keepdims=True)
            g += ((f(xp) - f(xm)) / (2 * FD_STEP)) ** 2
        return np.sqrt(g)

    def speed(self, x, v):
        return np.linalg.norm(v, axis=1)


@dataclass
class SurfaceRegion:
    """Geodesic ball of radius ``radius`` about the pole of a surface of revolution.

    Points are in geodesic normal coordinates. Samples are uniform in
    ``(r, theta)`` with weight ``2 pi R h(r)``, the area element.
    """

    surface: RotSymSurface
    radius: float
    name: str = "surface-ball"

    dim = 2

    def __post_init__(self):
        if not 0 < self.radius < self.surface.max_radius:
            raise DomainError(f"ball radius {self.radius} is outside (0, {self.surface.max_radius})")

    def sample(self, rng, m):
        r = self.radius * rng.random(m)
        th = 2 * math.pi * rng.random(m)
        x = np.column_stack([r * np.cos(th), r * np.sin(th)])
        return x, 2 * math.pi * self.radius * np.asarray(self.surface.h(r), dtype=float)

    def grad_norm(self, f, x):
        d = np.column_stack([
            (f(x + [FD_STEP, 0.0]) - f(x - [FD_STEP, 0.0])) / (2 * FD_STEP),
            (f(x + [0.0, FD_STEP]) - f(x - [0.0, FD_STEP])) / (2 * FD_STEP),
        ])
        r = np.hypot(x[:, 0], x[:, 1])
        safe = np.where(r > 0, r, 1.0)
        u = x / safe[:, None]
        radial = np.sum(d * u, axis=1)
        tang = d - radial[:, None] * u
        scale = np.where(r > 0, safe / np.asarray(self.surface.h(safe), dtype=float), 1.0)
        return np.sqrt(radial**2 + scale**2 * np.sum(tang * tang, axis=1))

    def speed(self, x, v):
        return metric_norm(self.surface, x, v)


# -- maps and sweeps ----------------------------------------------------------


@dataclass
class TestMap:
    """Continuous map from a domain to ``R^(codomain_dim)`` with optional exact fibers.

    ``fiber_chart(y)`` returns a function ``s -> points`` on ``s in [0, 1]``
    parametrizing the fiber over ``y`` (a curve), or ``None`` when the fiber is
    empty. ``fiber_nearest(z, y)`` returns, for each point ``z``, a fiber
    point minimizing the gauge distance; it is used by the convex-body checks.
    """

    __test__ = False

    name: str
    evaluate: Callable
    domain: object = None
    k: int = 1
    codomain_dim: int = 1
    fiber_chart: Optional[Callable] = None
    fiber_nearest: Optional[Callable] = None
    exact_measure: Optional[Callable] = None
    claim: str = ""

    def __call__(self, x):
        return self.evaluate(np.asarray(x, dtype=float))


def waist_bound(spec):
    """Lower bound for the largest fiber.

    ``spec`` is a :class:`BallSpec` (volume of the k-ball in the model space)
    or a nonnegative int ``k`` (area of the great k-sphere).
    """
    if isinstance(spec, BallSpec):
        return geodesic_ball_volume(spec)
    if isinstance(spec, (int, np.integer)):
        return sphere_volume(int(spec))
    raise TypeError("bound spec must be a BallSpec or a sphere dimension")


def chart_fiber_volume(tmap, y):
    """Length of the fiber over ``y`` by Gauss-Legendre quadrature of the chart speed.

    Returns ``(length, error)``, with the error taken as the change between
    64 and 128 nodes, or ``None`` for an empty fiber.
    """
    if tmap.k != 1:
        raise DomainError("chart quadrature is implemented for curves (k = 1)")
    gamma = tmap.fiber_chart(y)
    if gamma is None:
        return None
    out = []
    for num in (GL_NODES, 2 * GL_NODES):
        s, w = _gl(num)
        pts = gamma(s)
        res = np.max(np.abs(tmap(pts) - y))
        if res > CHART_TOL:
            raise ValidationError(f"fiber chart of {tmap.name} misses level {y} by {res:.2e}")
        h = 1e-6
        v = (gamma(s + h) - gamma(s - h)) / (2 * h)
        out.append(float(np.sum(w * tmap.domain.speed(pts, v))))
    # finite-difference speed is good to ~1e-10 relative
    err = abs(out[1] - out[0]) + 1e-9 * abs(out[1])
    return out[1], err


@dataclass
class FiberSweep:
    """Per-level fiber sizes and the verdict against the waist bound."""

    name: str
    levels: np.ndarray
    values: np.ndarray
    errors: np.ndarray
    chart_values: Optional[np.ndarray]
    mc_values: Optional[np.ndarray]
    mc_stderr: Optional[np.ndarray]
    bound: float
    max_value: float
    argmax_level: float
    combined_error: float
    passed: bool
    expected_violation: bool = False
    empty_levels: list = field(default_factory=list)
    mc_interior: Optional[np.ndarray] = None
    band: Optional[float] = None
    chart_band: Optional[np.ndarray] = None
    claim: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def verdict(self):
        if self.expected_violation:
            return "expected-violation" if self.passed else "fail"
        return "pass" if self.passed else "fail"

    @property
    def agreement(self):
        """Largest relative gap between Monte Carlo and band-averaged chart values on interior levels.

        The co-area estimate measures the band average of the fiber size, so
        it is compared with the chart averaged over the same band.
        """
        if self.chart_values is None or self.mc_values is None:
            return None
        ref = self.chart_values if self.chart_band is None else self.chart_band
        mask = self.mc_interior & np.isfinite(ref) & (ref > 0)
        if not np.any(mask):
            return None
        gap = np.abs(self.mc_values[mask] - ref[mask]) / ref[mask]
        return float(np.max(gap))

    def as_dict(self):
        def arr(a):
            return None if a is None else [float(v) for v in a]

        return {
            "name": self.name,
            "claim": self.claim,
            "verdict": self.verdict,
            "bound": self.bound,
            "max_value": self.max_value,
            "argmax_level": self.argmax_level,
            "combined_error": self.combined_error,
            "levels": arr(self.levels),
            "values": arr(self.values),
            "chart_values": arr(self.chart_values),
            "mc_values": arr(self.mc_values),
            "mc_stderr": arr(self.mc_stderr),
            "band": self.band,
            "chart_band": arr(self.chart_band),
            "agreement": self.agreement,
            "empty_levels": [float(v) for v in self.empty_levels],
            **self.extra,
        }

    def to_csv(self, fh):
        fh.write("level,value,error,chart,mc,mc_stderr\n")
        for i, y in enumerate(self.levels):
            c = "" if self.chart_values is None else repr(float(self.chart_values[i]))
            m = "" if self.mc_values is None else repr(float(self.mc_values[i]))
            s = "" if self.mc_stderr is None else repr(float(self.mc_stderr[i]))
            fh.write(f"{float(y)!r},{float(self.values[i])!r},{float(self.errors[i])!r},{c},{m},{s}\n")


def _coarea(tmap, levels, band, budget, seed, workers):
    f = tmap.evaluate
    region = tmap.domain
    L = len(levels)

    def chunk(rng, size):
        x, w = region.sample(rng, size)
        fx = f(x)
        g = region.grad_norm(f, x)
        out = np.zeros((L, 3))
        for i, y in enumerate(levels):
            v = w * g * (np.abs(fx - y) <= band) / (2 * band)
            out[i] = (v.sum(), (v * v).sum(), size)
        live = w > 0
        lo = float(fx[live].min()) if np.any(live) else math.inf
        hi = float(fx[live].max()) if np.any(live) else -math.inf
        return out, lo, hi

    parts = map_chunks(chunk, budget, seed, ("coarea", tmap.name), workers)
    vals = np.zeros(L)
    errs = np.zeros(L)
    for i in range(L):
        vals[i], errs[i], _ = reduce_moments([p[0][i] for p in parts])
    fmin = min(p[1] for p in parts)
    fmax = max(p[2] for p in parts)
    interior = (levels - band >= fmin) & (levels + band <= fmax)
    return vals, errs, interior


def _band_average(tmap, levels, band, interior, num=8):
    # (1/2 eps) * integral of the chart fiber size over [y - eps, y + eps]
    s, w = _gl(num)
    out = np.full(len(levels), np.nan)
    for i, y in enumerate(levels):
        if not interior[i]:
            continue
        vals = [chart_fiber_volume(tmap, y + band * (2 * u - 1)) for u in s]
        if all(v is not None for v in vals):
            out[i] = float(np.sum(w * np.array([v[0] for v in vals])))
    return out


def sweep_waist(tmap, levels, bound, budget=0, seed=0, band=None, workers=1, nsigma=3.0,
                expected_violation=False):
    """Measure the fibers of ``tmap`` over ``levels`` and compare the largest with ``bound``.

    Parameters
    ----------
    tmap : TestMap
        Map with a domain region; a fiber chart is used when present.
    levels : array_like
        Level grid (scalar levels, codomain dimension 1).
    bound : BallSpec or int
        Passed to :func:`waist_bound`; the bound is computed at run time.
    budget : int
        Monte Carlo samples for the co-area band estimate (0 disables it).
        Required when the map has no chart.
    band : float, optional
        Half width ``eps`` of the co-area band; defaults to 2.5% of the
        range spanned by the levels.
    expected_violation : bool
        Mark a scenario where the bound is known to fail; the sweep then
        passes when the largest fiber stays below the bound.
    """
    levels = np.asarray(levels, dtype=float)
    if levels.ndim != 1 or len(levels) == 0:
        raise DomainError("levels must be a nonempty 1-d grid")
    if tmap.codomain_dim != 1:
        raise DomainError("sweeps are implemented for scalar maps")
    if tmap.fiber_chart is None and budget <= 0:
        raise ValidationError(f"{tmap.name} has no fiber chart; a Monte Carlo budget is required")
    b = waist_bound(bound)
    L = len(levels)
    chart = None
    chart_err = np.zeros(L)
    empty = []
    if tmap.fiber_chart is not None:
        chart = np.zeros(L)
        for i, y in enumerate(levels):
            r = chart_fiber_volume(tmap, y)
            if r is None:
                empty.append(float(y))
            else:
                chart[i], chart_err[i] = r
    mc = mcs = interior = chart_band = None
    if budget > 0:
        if band is None:
            span = float(levels.max() - levels.min())
            band = 0.025 * (span if span > 0 else 1.0)
        mc, mcs, interior = _coarea(tmap, levels, band, int(budget), seed, workers)
        if chart is not None:
            chart_band = _band_average(tmap, levels, band, interior)
        else:
            empty = [float(y) for y, v in zip(levels, mc) if v == 0]
    if chart is not None:
        values, errors = chart, chart_err
    else:
        values, errors = mc, nsigma * mcs
    i = int(np.argmax(values))
    combined = float(errors[i])
    if expected_violation:
        passed = bool(values[i] + combined < b)
    else:
        passed = bool(values[i] >= b - combined)
    return FiberSweep(
        name=tmap.name, levels=levels, values=values, errors=errors, chart_values=chart,
        mc_values=mc, mc_stderr=mcs, bound=b, max_value=float(values[i]),
        argmax_level=float(levels[i]), combined_error=combined, passed=passed,
        expected_violation=expected_violation, empty_levels=empty, mc_interior=interior,
        band=band, chart_band=chart_band, claim=tmap.claim,
    )


# -- shipped maps ---------------------------------------------------------------


def distance_map_on_cap(R):
    """Distance to the south pole on the cap ``B(R) subset S^2``; fibers are latitude circles."""

    def f(x):
        return np.arctan2(np.hypot(x[:, 0], x[:, 1]), -x[:, 2])

    def chart(r):
        if r < 0 or r > R:
            return None

        def gamma(s):
            th = 2 * math.pi * np.asarray(s)
            return np.column_stack([math.sin(r) * np.cos(th), math.sin(r) * np.sin(th),
                                    np.full(len(th), -math.cos(r))])

        return gamma

    return TestMap(f"cap-distance(R={R:g})", f, SphereCapRegion(R), fiber_chart=chart,
                   claim="distance map on a spherical cap has a fiber at least as long as a diameter of the cap")


def distance_map_on_surface(surface, R, name=None):
    """Distance to the pole on the geodesic ball ``B(R)`` of a surface of revolution."""

    def f(x):
        return np.hypot(x[:, 0], x[:, 1])

    def chart(r):
        if r < 0 or r > R:
            return None

        def gamma(s):
            th = 2 * math.pi * np.asarray(s)
            return np.column_stack([r * np.cos(th), r * np.sin(th)])

        return gamma

    return TestMap(name or f"distance({surface.name}, R={R:g})", f, SurfaceRegion(surface, R),
                   fiber_chart=chart, claim="distance map on a geodesic ball has a fiber at least as long as a diameter")


def disk_projection_map():
    """Projection ``(x, y) -> x`` of the unit disk; the central chord attains the bound."""

    def f(x):
        return x[:, 0]

    def chart(y):
        if abs(y) > 1:
            return None
        half = math.sqrt(max(1.0 - y * y, 0.0))
        return lambda s: np.column_stack([np.full(len(np.atleast_1d(s)), y), (2 * np.asarray(s) - 1) * half])

    region = EuclideanRegion([-1.0, -1.0], [1.0, 1.0], inside=lambda x: np.sum(x * x, axis=1) <= 1.0, name="disk")
    return TestMap("disk-projection", f, region, fiber_chart=chart,
                   claim="linear projection of a Euclidean ball: the central fiber is a diameter")


def punctured_sphere_map():
    """Longitude on ``S^2`` minus the poles; every fiber is an open meridian of length pi."""

    def f(x):
        return np.mod(np.arctan2(x[:, 1], x[:, 0]), 2 * math.pi)

    def chart(th):
        def gamma(s):
            ph = math.pi * np.asarray(s)
            return np.column_stack([np.sin(ph) * math.cos(th), np.sin(ph) * math.sin(th), -np.cos(ph)])

        return gamma

    return TestMap("two-punctures", f, SphereCapRegion(math.pi), fiber_chart=chart,
                   claim="with two punctures the sphere admits a map whose fibers are all shorter than a great circle")


def cube_max_map(n):
    """``f = max(x_1, ..., x_n)`` on ``(-1, 1)^n`` with the sup-norm nearest fiber point."""

    def f(x):
        return np.max(x, axis=1)

    def nearest(z, y):
        # above the level: clip coordinates down to y; below: raise the largest to y
        m = np.max(z, axis=1)
        w = np.minimum(z, y)
        low = m < y
        if np.any(low):
            j = np.argmax(z[low], axis=1)
            wl = z[low].copy()
            wl[np.arange(len(j)), j] = y
            w[low] = wl
        return w

    def exact(y, t):
        return (min(y + t, 1.0) + 1.0) ** n - (max(y - t, -1.0) + 1.0) ** n

    return TestMap(f"cube-max(n={n})", f, EuclideanRegion(-np.ones(n), np.ones(n)), fiber_nearest=nearest,
                   exact_measure=exact, claim="sup-norm neighborhoods of the max map fibers on the cube")


# -- convex bodies --------------------------------------------------------------


@dataclass
class Polytope:
    """``{x : A x <= b}`` with ``b > 0`` (the origin is interior)."""

    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        self.b = np.asarray(self.b, dtype=float).ravel()
        if len(self.b) != len(self.A) or np.any(self.b <= 0):
            raise DomainError("polytope needs b > 0 so that the origin is interior")

    @property
    def dim(self):
        return self.A.shape[1]

    def gauge(self, z):
        z = np.atleast_2d(np.asarray(z, dtype=float))
        return np.maximum(np.max(z @ self.A.T / self.b, axis=1), 0.0)

    def bounding_box(self):
        from scipy.optimize import linprog

        lo, hi = np.zeros(self.dim), np.zeros(self.dim)
        for i in range(self.dim):
            c = np.zeros(self.dim)
            c[i] = 1.0
            bnd = [(None, None)] * self.dim
            lo[i] = linprog(c, A_ub=self.A, b_ub=self.b, bounds=bnd).fun
            hi[i] = -linprog(-c, A_ub=self.A, b_ub=self.b, bounds=bnd).fun
        return lo, hi

    @classmethod
    def cube(cls, n, half=1.0):
        eye = np.eye(n)
        return cls(np.vstack([eye, -eye]), np.full(2 * n, float(half)))

    @classmethod
    def from_points(cls, points):
        hull = ConvexHull(np.asarray(points, dtype=float))
        eq = hull.equations
        return cls(eq[:, :-1], -eq[:, -1])


@dataclass
class LpBall:
    """``{x in R^n : |x|_p <= radius}``."""

    n: int
    p: float
    radius: float = 1.0

    def __post_init__(self):
        if self.p < 1 or self.radius <= 0:
            raise DomainError("need p >= 1 and radius > 0 for a convex l_p ball")

    @property
    def dim(self):
        return self.n

    def gauge(self, z):
        z = np.atleast_2d(np.asarray(z, dtype=float))
        return np.linalg.norm(z, ord=self.p, axis=1) / self.radius

    def bounding_box(self):
        return -np.full(self.n, self.radius), np.full(self.n, self.radius)


@dataclass
class ConvexBodyMeasure:
    """Convex body ``K`` with a log-concave density and the point of maximal density."""

    body: object
    density: Callable
    mode: np.ndarray
    name: str = "body"
    exact_ratio: Optional[Callable] = None

    def __post_init__(self):
        if not hasattr(self.body, "gauge"):
            raise ValidationError("convex body needs a gauge function")
        self.mode = np.asarray(self.mode, dtype=float).ravel()
        if len(self.mode) != self.dim:
            raise DomainError("mode has the wrong dimension")
        if self.body.gauge(self.mode)[0] > 1.0:
            raise DomainError("mode lies outside the body")

    @property
    def dim(self):
        return self.body.dim

    def contains(self, z):
        return self.body.gauge(z) <= 1.0

    def sample(self, rng, m):
        """Uniform points in the bounding box with weights ``box volume * density * 1_K``."""
        lo, hi = self.box
        z = lo + (hi - lo) * rng.random((m, self.dim))
        w = float(np.prod(hi - lo)) * self.density(z) * self.contains(z)
        return z, w

    @property
    def box(self):
        if not hasattr(self, "_box"):
            self._box = self.body.bounding_box()
        return self._box


def validate_log_concave(body, seed=0, pairs=2000, tol=1e-12):
    """Midpoint test of log-concavity on random segments of ``K`` and of the mode.

    Raises :class:`ValidationError` on the first violation.
    """
    rng = substream(seed, "log-concave", body.name)
    pts = []
    while sum(len(p) for p in pts) < 2 * pairs:
        z, w = body.sample(rng, 4 * pairs)
        pts.append(z[w > 0])
    pts = np.vstack(pts)[: 2 * pairs]
    a, b = pts[:pairs], pts[pairs:]
    la, lb, lm = (np.log(body.density(p)) for p in (a, b, 0.5 * (a + b)))
    bad = lm < 0.5 * (la + lb) - tol * np.maximum(1.0, np.abs(lm))
    if np.any(bad):
        raise ValidationError(f"density of {body.name} fails midpoint log-concavity on {int(bad.sum())} segments")
    top = float(body.density(body.mode[None, :])[0])
    if np.max(body.density(pts)) > top * (1 + 1e-12):
        raise ValidationError(f"supplied mode of {body.name} is not a point of maximal density")
    return True


def _moments(v):
    return np.array([v.sum(), (v * v).sum(), len(v)])


def cube_max_map_check(n, t, budget, seed=0, workers=1, nsigma=3.0):
    """Volume of the sup-norm ``t``-neighborhood of ``{max x_i = 0}`` in ``(-1, 1)^n``.

    The distance of ``z`` to the fiber is ``|gauge(z - w)|`` for the explicit
    nearest point ``w``; the Monte Carlo estimate is compared with
    ``(1 + t)^n - (1 - t)^n`` and with the asymptotic ``2 n t``.
    """
    if int(n) != n or n < 2:
        raise DomainError(f"need n >= 2, got {n}")
    if not 0 < t <= 0.05 and t != 1:
        raise DomainError(f"need 0 < t <= 0.05 (or t = 1), got {t}")
    tm = cube_max_map(n)
    body = Polytope.cube(n)

    def chunk(rng, size):
        z = -1.0 + 2.0 * rng.random((size, n))
        d = body.gauge(z - tm.fiber_nearest(z, 0.0))
        return _moments((2.0**n) * (d <= t))

    parts = map_chunks(chunk, budget, seed, ("cube-max", n, t), workers)
    vol, se, count = reduce_moments(parts)
    exact = tm.exact_measure(0.0, t)
    ratio = vol / t
    ratio_lo, ratio_hi = 2 * n * 0.95, 2 * n * 1.05
    below = 2 * n * t < t * 2**n
    within = ratio_lo <= ratio <= ratio_hi if t <= 0.05 else abs(vol - 2.0**n) <= nsigma * se + 1e-12
    consistent = abs(vol - exact) <= nsigma * se + 1e-12
    passed = bool(within and consistent and (below or n < 3))
    return {
        "name": tm.name, "n": n, "t": t, "samples": count,
        "volume": vol, "stderr": se, "exact": exact, "ratio": ratio,
        "ratio_window": [ratio_lo, ratio_hi], "asymptotic": 2 * n * t,
        "expected_t_2n": t * 2**n, "below_expected": bool(below),
        "verdict": "pass" if passed else "fail", "passed": passed,
    }


def norm_waist_check(body, tmap, t_grid, levels, budget, seed=0, workers=1, nsigma=3.0):
    """For each ``t`` find a level with ``mu(f^{-1}(y) + tK) >= t^(n-k) mu(K)``.

    ``levels`` is an array or a callable ``t -> array``; the level is chosen
    separately for every ``t``. When the map supplies ``exact_measure`` the
    level maximizing it is taken and checked by Monte Carlo; otherwise every
    level is estimated with common samples. Membership uses
    ``gauge(z - w) <= t`` with ``w`` the gauge-nearest fiber point.
    """
    if not hasattr(body.body, "gauge"):
        raise ValidationError("body has no gauge function")
    if tmap.fiber_nearest is None:
        raise ValidationError(f"{tmap.name} supplies no nearest fiber point")
    t_grid = np.asarray(t_grid, dtype=float)
    if np.any(t_grid < 0) or np.any(t_grid > 1):
        raise DomainError("t grid must lie in [0, 1]")
    codim = tmap.codomain_dim
    muK, muK_se, _ = reduce_moments(map_chunks(lambda r, s: _moments(body.sample(r, s)[1]),
                                               budget, seed, ("norm-waist-K", body.name), workers))
    exact_K = tmap.exact_measure(0.0, 2.0) if tmap.exact_measure is not None else None
    rows = []
    for t in t_grid:
        ys = np.asarray(levels(t) if callable(levels) else levels, dtype=float)
        ref = exact_K if exact_K is not None else muK
        bound = t**codim * ref
        exact_vals = None
        if tmap.exact_measure is not None:
            exact_vals = np.array([tmap.exact_measure(y, t) for y in ys])
            cand = ys[[int(np.argmax(exact_vals))]]
        else:
            cand = ys

        def chunk(rng, size, cand=cand, t=t):
            z, w = body.sample(rng, size)
            return np.array([_moments(w * (body.body.gauge(z - tmap.fiber_nearest(z, y)) <= t)) for y in cand])

        parts = map_chunks(chunk, budget, seed, ("norm-waist", body.name, float(t)), workers)
        est = [reduce_moments([p[i] for p in parts]) for i in range(len(cand))]
        vals = np.array([e[0] for e in est])
        ses = np.array([e[1] for e in est])
        j = int(np.argmax(vals))
        row = {"t": float(t), "level": float(cand[j]), "bound": float(bound),
               "mc": float(vals[j]), "mc_stderr": float(ses[j])}
        if exact_vals is not None:
            ex = float(np.max(exact_vals))
            row["exact"] = ex
            row["exact_pass"] = bool(ex >= bound * (1 - 1e-12) - 1e-15)
            tol = nsigma * ses[j] + 1e-12
            if ses[j] == 0:
                # every sample fell on the same side: rule of three on the missed fraction
                tol += nsigma * abs(vals[j]) / budget
            row["mc_tolerance"] = float(tol)
            row["mc_agrees"] = bool(abs(vals[j] - ex) <= tol)
            row["passed"] = row["exact_pass"] and row["mc_agrees"]
        else:
            row["passed"] = bool(vals[j] >= bound - nsigma * ses[j])
        rows.append(row)
    passed = all(r["passed"] for r in rows)
    argmax = [r["level"] for r in rows]
    return {
        "name": f"norm-waist({body.name}, {tmap.name})", "mu_K": exact_K if exact_K is not None else muK,
        "mu_K_mc": muK, "mu_K_stderr": muK_se, "rows": rows,
        "level_varies_with_t": bool(len(set(np.round(argmax, 12))) > 1),
        "verdict": "pass" if passed else "fail", "passed": passed,
    }


def pancake_lemma_check(body, t_grid, budget, seed=0, workers=1, nsigma=3.0, validate=True):
    """Check ``mu(t(L - c) + c) >= t^l mu(L)`` for a log-concave ``mu`` with mode ``c``.

    Paired samples give the standard error of the difference
    ``mu(t(L - c) + c) - t^l mu(L)``, which must exceed ``-nsigma`` of it.
    """
    if validate:
        validate_log_concave(body, seed=seed)
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or np.any(t_grid <= 0) or np.any(t_grid > 1):
        raise DomainError("t grid must lie in (0, 1]")
    ell = body.dim
    c = body.mode

    def chunk(rng, size):
        z, w = body.sample(rng, size)
        out = [_moments(w)]
        for t in t_grid:
            a = w * (body.body.gauge(c + (z - c) / t) <= 1.0)
            out += [_moments(a), _moments(a - t**ell * w)]
        return np.array(out)

    parts = map_chunks(chunk, budget, seed, ("pancake", body.name), workers)
    muL, muL_se, _ = reduce_moments([p[0] for p in parts])
    rows = []
    for i, t in enumerate(t_grid):
        mt, mt_se, _ = reduce_moments([p[1 + 2 * i] for p in parts])
        d, d_se, _ = reduce_moments([p[2 + 2 * i] for p in parts])
        row = {"t": float(t), "mu_t": mt, "mu_t_stderr": mt_se, "bound": t**ell * muL,
               "diff": d, "diff_stderr": d_se, "passed": bool(d >= -nsigma * d_se)}
        if body.exact_ratio is not None:
            row["exact_ratio"] = float(body.exact_ratio(t))
            row["exact_pass"] = bool(row["exact_ratio"] >= t**ell * (1 - 1e-12))
            row["passed"] = row["passed"] and row["exact_pass"]
            if abs(row["exact_ratio"] - t**ell) <= 1e-12:
                # equality case: the estimate must match from both sides
                row["equality"] = True
                row["passed"] = row["passed"] and bool(abs(d) <= nsigma * d_se + 1e-12)
        rows.append(row)
    passed = all(r["passed"] for r in rows)
    return {"name": f"pancake({body.name})", "dim": ell, "mode": [float(v) for v in c], "mu_L": muL,
            "mu_L_stderr": muL_se, "rows": rows, "verdict": "pass" if passed else "fail", "passed": passed}


def pancake_scenarios(seed=0):
    """The shipped log-concave bodies: uniform hexagon, 1-d Gaussian, ``exp(-|x|_1)`` on a random polygon."""
    ang = np.arange(6) * math.pi / 3
    hexagon = Polytope.from_points(np.column_stack([np.cos(ang), np.sin(ang)]))
    uniform = ConvexBodyMeasure(hexagon, lambda z: np.ones(len(z)), [0.2, 0.1], name="uniform-hexagon",
                                exact_ratio=lambda t: t**2)
    seg = Polytope([[1.0], [-1.0]], [1.0, 1.0])
    a = math.sqrt(math.pi)
    gauss = ConvexBodyMeasure(seg, lambda z: np.exp(-math.pi * z[:, 0] ** 2), [0.0], name="gaussian-segment",
                              exact_ratio=lambda t: special.erf(a * t) / special.erf(a))
    rng = substream(seed, "random-polygon")
    m = 8
    # stratified angles keep every angular gap below pi, so the hull contains 0
    th = 2 * math.pi * (np.arange(m) + rng.random(m)) / m
    rad = 0.5 + rng.random(m)
    poly = Polytope.from_points(np.column_stack([rad * np.cos(th), rad * np.sin(th)]))
    laplace = ConvexBodyMeasure(poly, lambda z: np.exp(-np.sum(np.abs(z), axis=1)), [0.0, 0.0],
                                name="laplace-polygon")
    return {b.name: b for b in (uniform, gauss, laplace)}


def ball_distance_map_check(n, budget=0, seed=0, workers=1, nsigma=3.0):
    """Compare the cap-area bound ``2 (sqrt(3)/2)^(n-1) v_(n-1)`` with ``v_n / 2``.

    With a budget (``n = 3`` in the shipped checks) the area of the cap
    ``{|x - p| = 1, |x| <= 1}`` is estimated by uniform sampling of the unit
    sphere about ``p`` and must stay below the bound.
    """
    if int(n) != n or n < 3:
        raise DomainError(f"need n >= 3, got {n}")
    bound = 2.0 * (math.sqrt(3) / 2) ** (n - 1) * unit_ball_volume(n - 1)
    half = 0.5 * unit_ball_volume(n)
    out = {"n": n, "cap_bound": bound, "half_ball": half, "ratio": bound / half,
           "bound_below_half": bool(bound < half)}
    passed = bound < half if n >= 20 else True
    if budget:
        area_total = sphere_volume(n - 1)

        def chunk(rng, size):
            u = rng.standard_normal((size, n))
            u /= np.linalg.norm(u, axis=1, keepdims=True)
            x = u.copy()
            x[:, 0] += 1.0
            return _moments(area_total * (np.sum(x * x, axis=1) <= 1.0))

        area, se, count = reduce_moments(map_chunks(chunk, budget, seed, ("ball-cap", n), workers))
        # exact: a cap of angular radius pi/3 on the unit (n-1)-sphere
        from .quadrature import integrate

        exact = sphere_volume(n - 2) * integrate(lambda a: math.sin(a) ** (n - 2), 0.0, math.pi / 3)
        below = bool(area <= bound + nsigma * se)
        out.update({"mc_area": area, "mc_stderr": se, "samples": count, "exact_area": exact,
                    "mc_below_bound": below, "mc_matches_exact": bool(abs(area - exact) <= nsigma * se)})
        passed = passed and below
    out["passed"] = bool(passed)
    out["verdict"] = "pass" if passed else "fail"
    return out


def gaussian_plane_check(n, k, t, d_grid):
    """Gaussian measure (density ``exp(-pi |x|^2)``) of the ``t``-neighborhood of a k-plane at distance ``d``.

    In the ``n - k`` normal directions the measure is ``P(|Z - d e| <= t)``
    for ``Z`` centred normal with variance ``1 / (2 pi)``, a noncentral
    chi-square probability. The check asserts the measures decrease along the
    sorted grid, so the plane through the origin is the largest.
    """
    if not 0 < k < n:
        raise DomainError(f"need 0 < k < n, got k={k}, n={n}")
    if t <= 0:
        raise DomainError("t must be positive")
    d = np.asarray(d_grid, dtype=float)
    if np.any(d < 0):
        raise DomainError("distances must be nonnegative")
    m = n - k
    x = 2 * math.pi * t * t
    vals = np.where(d == 0, stats.chi2.cdf(x, m), stats.ncx2.cdf(x, m, 2 * math.pi * d * d))
    order = np.argsort(d)
    sv = vals[order]
    monotone = bool(np.all(np.diff(sv) <= 1e-15))
    at_origin = float(stats.chi2.cdf(x, m))
    passed = monotone and bool(np.all(vals <= at_origin + 1e-15))
    return {"n": n, "k": k, "t": t, "d": [float(v) for v in d], "measure": [float(v) for v in vals],
            "at_origin": at_origin, "monotone": monotone, "passed": passed,
            "verdict": "pass" if passed else "fail"}


# -- comparison of surfaces ---------------------------------------------------------


def bumped_hyperbolic_surface():
    """Profile ``sinh r + 0.1 r^3``; its curvature stays below -1 for ``r <= sqrt(6)``."""
    return RotSymSurface(
        h=lambda r: np.sinh(r) + 0.1 * np.asarray(r) ** 3,
        dh=lambda r: np.cosh(r) + 0.3 * np.asarray(r) ** 2,
        d2h=lambda r: np.sinh(r) + 0.6 * np.asarray(r),
        name="bumped-hyperbolic",
    )


def _counterexample():
    # sin r (1 - 0.2 r^2): curvature exceeds 1 near the pole
    return RotSymSurface(
        h=lambda r: np.sin(r) * (1 - 0.2 * np.asarray(r) ** 2),
        dh=lambda r: np.cos(r) * (1 - 0.2 * np.asarray(r) ** 2) - 0.4 * np.asarray(r) * np.sin(r),
        d2h=lambda r: (-np.sin(r) * (1 - 0.2 * np.asarray(r) ** 2) - 0.8 * np.asarray(r) * np.cos(r)
                       - 0.4 * np.sin(r)),
        max_radius=math.sqrt(5.0),
        name="counterexample",
    )


COUNTEREXAMPLE_PROFILE = _counterexample()


def check_curvature_bound(surface, kappa, R, num=2001, tol=1e-9):
    """Raise :class:`ValidationError` unless ``-h''/h <= kappa`` on ``(0, R]``."""
    validate_profile(surface, R)
    top = max_curvature(surface, R, num)
    if top > kappa + tol:
        raise ValidationError(f"curvature of {surface.name} reaches {top:.6g} > {kappa:g} on (0, {R:g}]")
    return top


def cat_comparison_check(surface, kappa, R, pairs=10_000, seed=0, tol=1e-6):
    """Sample pairs in the model ball and compare distances after ``exp_target o exp_model^{-1}``.

    Both exponential maps are taken at the pole and both surfaces are charted
    by geodesic normal coordinates there, so the comparison map is the
    identity in coordinates. Model distances are closed form; target
    distances come from geodesic shooting.
    """
    if kappa > 0 and R >= math.pi / math.sqrt(kappa):
        raise DomainError("radius exceeds the model injectivity radius")
    top = check_curvature_bound(surface, kappa, R)
    rng = substream(seed, "cat-pairs", surface.name, float(kappa), float(R))
    r = R * np.sqrt(rng.random((pairs, 2)))
    th = 2 * math.pi * rng.random((pairs, 2))
    p = np.column_stack([r[:, 0] * np.cos(th[:, 0]), r[:, 0] * np.sin(th[:, 0])])
    q = np.column_stack([r[:, 1] * np.cos(th[:, 1]), r[:, 1] * np.sin(th[:, 1])])
    dm = model_distance(kappa, p, q)
    dt = surface_distance(surface, p, q)
    excess = dt - dm
    bad = excess < -tol
    passed = not bool(np.any(bad))
    return {"surface": surface.name, "kappa": kappa, "R": R, "pairs": int(pairs), "max_curvature": top,
            "violations": int(bad.sum()), "min_excess": float(excess.min()),
            "max_excess": float(excess.max()), "passed": passed, "verdict": "pass" if passed else "fail"}


def cat_waist_scenario(surface, kappa, R, levels=None, budget=0, seed=0, pairs=2000, workers=1):
    """Distance-map sweep on a surface ball against the k = 1 ball of the comparison model.

    The surface must first pass :func:`cat_comparison_check`. The smooth
    fibers have equal lower and upper content, so both proxies are reported
    with the same value; only the upper one is asserted.
    """
    comp = cat_comparison_check(surface, kappa, R, pairs=pairs, seed=seed)
    if not comp["passed"]:
        raise ValidationError(f"{surface.name} fails the comparison check: {comp['violations']} pairs")
    if levels is None:
        levels = np.linspace(0.0, R, 21)
    tm = distance_map_on_surface(surface, R)
    sweep = sweep_waist(tm, levels, BallSpec(ModelSpace(kappa, 2), R, subdim=1), budget=budget, seed=seed,
                        workers=workers)
    sweep.extra.update({"comparison": comp, "upper_content": sweep.max_value,
                        "lower_content": sweep.max_value, "lower_asserted": False})
    return sweep


# -- registry -------------------------------------------------------------------------


def _sweep_cap(budget, seed, workers, R=2.0, **_):
    return sweep_waist(distance_map_on_cap(R), np.linspace(0.0, R, 21), BallSpec(ModelSpace(1.0, 2), R, 1),
                       budget=budget, seed=seed, workers=workers).as_dict()


def _sweep_hyperbolic(budget, seed, workers, R=1.0, **_):
    S = RotSymSurface.model(-1.0)
    return sweep_waist(distance_map_on_surface(S, R), np.linspace(0.0, R, 21),
                       BallSpec(ModelSpace(-1.0, 2), R, 1), budget=budget, seed=seed, workers=workers).as_dict()


def _sweep_disk(budget, seed, workers, **_):
    return sweep_waist(disk_projection_map(), np.linspace(-1.0, 1.0, 21), BallSpec(ModelSpace(0.0, 2), 1.0, 1),
                       budget=budget, seed=seed, workers=workers).as_dict()


def _sweep_punctures(budget, seed, workers, **_):
    # the bound is the great circle, the waist of the unpunctured sphere
    return sweep_waist(punctured_sphere_map(), np.linspace(0.0, 2 * math.pi, 13)[:-1], 1,
                       expected_violation=True).as_dict()


def _cat_waist(surface_name, kappa):
    def run(budget, seed, workers, R=1.0, pairs=2000, **_):
        surface = {"hyperbolic": RotSymSurface.model(-1.0), "bumped": bumped_hyperbolic_surface(),
                   "sphere": RotSymSurface.model(1.0)}[surface_name]
        return cat_waist_scenario(surface, kappa, R, budget=budget, seed=seed, pairs=pairs,
                                  workers=workers).as_dict()

    return run


def _cat_compare(surface_name, kappa):
    def run(budget, seed, workers, R=1.0, pairs=10_000, **_):
        surface = {"hyperbolic": RotSymSurface.model(-1.0), "flat": RotSymSurface.model(0.0)}[surface_name]
        return cat_comparison_check(surface, kappa, R, pairs=pairs, seed=seed)

    return run


def _cube_max(budget, seed, workers, n=3, t=0.01, **_):
    return cube_max_map_check(int(n), float(t), budget, seed=seed, workers=workers)


def _norm_cube(budget, seed, workers, n=3, **_):
    n = int(n)
    tm = cube_max_map(n)
    body = ConvexBodyMeasure(Polytope.cube(n), lambda z: np.ones(len(z)), np.zeros(n), name=f"cube{n}")
    grid = np.linspace(-1.0, 1.0, 41)
    return norm_waist_check(body, tm, np.linspace(0.02, 1.0, 50), lambda t: np.append(grid, 1.0 - t),
                            budget, seed=seed, workers=workers)


def _pancake(name):
    def run(budget, seed, workers, **_):
        body = pancake_scenarios(seed)[name]
        return pancake_lemma_check(body, np.linspace(0.1, 1.0, 10), budget, seed=seed, workers=workers)

    return run


def _ball_map(budget, seed, workers, n=3, **_):
    return ball_distance_map_check(int(n), budget=budget, seed=seed, workers=workers)


def _gauss_plane(budget, seed, workers, n=3, k=1, t=0.5, **_):
    return gaussian_plane_check(int(n), int(k), float(t), np.linspace(0.0, 3.0, 31))


SCENARIOS = {
    "sphere-cap-distance": _sweep_cap,
    "hyperbolic-disk-distance": _sweep_hyperbolic,
    "disk-projection": _sweep_disk,
    "two-punctures": _sweep_punctures,
    "cat-hyperbolic": _cat_waist("hyperbolic", 0.0),
    "cat-bumped": _cat_waist("bumped", -1.0),
    "cat-model-sphere": _cat_waist("sphere", 1.0),
    "cat-compare-euclid-hyperbolic": _cat_compare("hyperbolic", 0.0),
    "cat-compare-sphere-flat": _cat_compare("flat", 1.0),
    "cube-max": _cube_max,
    "norm-cube": _norm_cube,
    "pancake-uniform": _pancake("uniform-hexagon"),
    "pancake-gaussian": _pancake("gaussian-segment"),
    "pancake-laplace": _pancake("laplace-polygon"),
    "ball-distance-map": _ball_map,
    "gaussian-plane": _gauss_plane,
}


def run_scenario(name, budget=1_000_000, seed=0, workers=1, **params):
    """Run a shipped scenario by name and return its JSON-ready report."""
    if name not in SCENARIOS:
        raise ValidationError(f"unknown scenario {name!r}; choose from {sorted(SCENARIOS)}")
    out = SCENARIOS[name](budget=int(budget), seed=seed, workers=workers, **params)
    out = dict(out)
    out["scenario"] = name
    return out
