"""Monte Carlo estimators of Minkowski and Gaussian Minkowski content.

A :class:`SampledSet` is a dense point cloud on a set ``X`` in Euclidean space
or on the unit sphere (embedded in the next dimension), optionally with the
parametric chart that produced it. Distances to ``X`` come from a k-d tree
query over the cloud followed by Gauss-Newton projection onto the chart, so
they are exact up to the projection tolerance rather than the cloud spacing.

Normalizations: the Minkowski ratio at radius ``t`` is
``vol nu_t(X) / (v_{n-k} t^{n-k})`` and the Gaussian value at scale ``u`` is
``u^{n-k} int exp(-pi u^2 dist(x, X)^2) dvol``. Both tend to the k-volume of a
smooth compact k-submanifold.
"""

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.spatial import cKDTree

from .errors import ResourceError, ValidationError
from .geometry import sphere_volume, unit_ball_volume
from .quadrature import integrate
from .rng import map_chunks, reduce_moments

__all__ = [
    "SampledSet",
    "CurveEntry",
    "NeighborhoodVolumeCurve",
    "ContentEstimate",
    "GaussianEstimate",
    "distance_to_set",
    "neighborhood_volume",
    "content_estimate",
    "weighted_content_estimate",
    "gaussian_content",
    "gaussian_value",
    "gaussian_content_from_tube",
    "weight_identity",
    "verify_sandwich",
    "gaussian_product_check",
    "fubini_tube_identity",
    "lift_tube_volume",
    "chart_volume",
    "point_set",
    "segment_set",
    "circle_set",
    "polyline_set",
    "flat_ball_set",
    "sphere_latitude_set",
    "equator_set",
    "meridian_arc_set",
    "product_set",
]

MIN_BUDGET = 1000
MAX_PRODUCT_DIM = 6
GN_STEPS = 4


@dataclass
class SampledSet:
    """A k-dimensional set represented by a point cloud and an optional chart.

    Parameters
    ----------
    cloud : ndarray, shape (N, D)
        Points of the set in ambient coordinates. For ``ambient="sphere"``
        they are unit vectors in ``R^D`` and the ambient manifold is
        ``S^{D-1}``.
    k : int
        Intended dimension.
    ambient : {"euclidean", "sphere"}
    chart : callable, optional
        Vectorized map from parameters ``(m, k)`` to points ``(m, D)``.
    params : ndarray, shape (N, k), optional
        Parameters of the cloud points.
    param_box : ndarray, shape (k, 2), optional
        Parameter bounds used to clip projection steps.
    periodic : sequence of bool, optional
        Parameter directions that wrap instead of clip.
    clip : callable, optional
        Replaces box clipping (for non-rectangular parameter domains).
    """

    cloud: np.ndarray
    k: int
    ambient: str = "euclidean"
    chart: Optional[Callable] = None
    params: Optional[np.ndarray] = None
    param_box: Optional[np.ndarray] = None
    periodic: Optional[tuple] = None
    clip: Optional[Callable] = None
    name: str = "set"
    fill: float = field(default=None)
    factors: tuple = field(default=(), repr=False)

    def __post_init__(self):
        self.cloud = np.atleast_2d(np.asarray(self.cloud, dtype=float))
        if self.cloud.size == 0:
            raise ValidationError("the cloud is empty")
        if self.ambient not in ("euclidean", "sphere"):
            raise ValidationError(f"unknown ambient {self.ambient!r}")
        if self.ambient == "sphere":
            norms = np.linalg.norm(self.cloud, axis=1)
            if np.max(np.abs(norms - 1.0)) > 1e-10:
                raise ValidationError("sphere cloud points must be unit vectors")
        if self.k < 0 or self.k > self.n:
            raise ValidationError(f"k={self.k} is not in [0, {self.n}]")
        if self.chart is not None:
            if self.params is None or self.param_box is None:
                raise ValidationError("a chart needs params and param_box")
            self.params = np.atleast_2d(np.asarray(self.params, dtype=float))
            if self.params.shape[0] != self.cloud.shape[0]:
                self.params = self.params.reshape(self.cloud.shape[0], -1)
            self.param_box = np.asarray(self.param_box, dtype=float).reshape(-1, 2)
            if self.periodic is None:
                self.periodic = (False,) * self.param_box.shape[0]
            off = np.max(np.linalg.norm(self.chart(self.params) - self.cloud, axis=1))
            if off > 1e-10:
                raise ValidationError(f"cloud is off the chart image by {off:.2e}")
        if self.fill is None:
            self.fill = _fill_distance(self.cloud, self.k)
        self._tree = None
        self._regions = {}

    @property
    def n(self):
        """Dimension of the ambient manifold."""
        return self.cloud.shape[1] - (1 if self.ambient == "sphere" else 0)

    @property
    def dim(self):
        """Dimension of the coordinate space holding the cloud."""
        return self.cloud.shape[1]

    @property
    def tree(self):
        if self._tree is None:
            self._tree = cKDTree(self.cloud)
        return self._tree

    def clip_params(self, p):
        if self.clip is not None:
            return self.clip(p)
        lo, hi = self.param_box[:, 0], self.param_box[:, 1]
        out = np.clip(p, lo, hi)
        for j, per in enumerate(self.periodic):
            if per:
                width = hi[j] - lo[j]
                out[:, j] = lo[j] + np.mod(p[:, j] - lo[j], width)
        return out

    def to_csv(self, fh=None):
        """Write the cloud (and parameters when present) as CSV."""
        own = fh is None
        if own:
            fh = io.StringIO()
        w = csv.writer(fh, lineterminator="\n")
        cols = [f"x{i}" for i in range(self.dim)]
        if self.params is not None:
            cols += [f"p{i}" for i in range(self.params.shape[1])]
        w.writerow(cols)
        rows = self.cloud if self.params is None else np.hstack([self.cloud, self.params])
        for row in rows:
            w.writerow([repr(float(v)) for v in row])
        return fh.getvalue() if own else None


def _fill_distance(cloud, k):
    """Fill-distance proxy: half the largest nearest-neighbour spacing, times sqrt(k)."""
    if len(cloud) < 2 or k == 0:
        return 0.0
    d, _ = cKDTree(cloud).query(cloud, k=2)
    return float(np.max(d[:, 1]) * 0.5 * math.sqrt(k))


def _chord_to_geodesic(c):
    return 2.0 * np.arcsin(np.clip(0.5 * c, 0.0, 1.0))


def _geodesic_to_chord(t):
    return 2.0 * math.sin(0.5 * min(t, math.pi))


def _project(X, y, p):
    """Gauss-Newton projection of points ``y`` onto the chart, starting from ``p``."""
    widths = X.param_box[:, 1] - X.param_box[:, 0]
    h = 1e-6 * np.maximum(widths, 1e-3)
    kdim = p.shape[1]
    for _ in range(GN_STEPS):
        base = X.chart(p)
        r = y - base
        J = np.empty(y.shape + (kdim,))
        for j in range(kdim):
            e = np.zeros(kdim)
            e[j] = h[j]
            J[:, :, j] = (X.chart(p + e) - X.chart(p - e)) / (2 * h[j])
        JtJ = np.einsum("mdi,mdj->mij", J, J)
        Jtr = np.einsum("mdi,md->mi", J, r)
        JtJ += 1e-14 * np.eye(kdim)
        step = np.linalg.solve(JtJ, Jtr[..., None])[..., 0]
        p = X.clip_params(p + step)
    return np.linalg.norm(y - X.chart(p), axis=1)


def distance_to_set(X, pts, cutoff=math.inf):
    """Distance from each point to ``X`` (geodesic on the sphere).

    Points farther than ``cutoff`` (plus the fill distance) may be reported
    as ``inf``.
    """
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    if X.ambient == "sphere":
        bound = _geodesic_to_chord(cutoff) + X.fill if math.isfinite(cutoff) else math.inf
    else:
        bound = cutoff + X.fill
    d0, idx = X.tree.query(pts, k=1, distance_upper_bound=bound * (1 + 1e-12) if math.isfinite(bound) else np.inf)
    d = np.array(d0, dtype=float)
    hit = np.isfinite(d0)
    if X.chart is not None and np.any(hit):
        refined = _project(X, pts[hit], X.params[idx[hit]].copy())
        d[hit] = np.minimum(d0[hit], refined)
    if X.ambient == "sphere":
        d = np.where(np.isfinite(d), _chord_to_geodesic(d), np.inf)
    return d


# ---------------------------------------------------------------- regions


@dataclass
class _BoxRegion:
    lo: np.ndarray
    hi: np.ndarray

    @property
    def volume(self):
        return float(np.prod(self.hi - self.lo))

    def sample(self, rng, m):
        return self.lo + rng.random((m, len(self.lo))) * (self.hi - self.lo)


@dataclass
class _CellRegion:
    """Union of congruent grid cells; uniform sampling picks a cell, then a point in it."""

    origin: np.ndarray
    h: float
    cells: np.ndarray

    @property
    def volume(self):
        return float(len(self.cells) * self.h ** self.cells.shape[1])

    def sample(self, rng, m):
        pick = rng.integers(0, len(self.cells), size=m)
        return self.origin + (self.cells[pick] + rng.random((m, self.cells.shape[1]))) * self.h


MAX_CELLS = 2_000_000


def _cell_cover(cloud, h):
    """Cells of side ``h`` within one step (in every coordinate) of a cloud point, or None."""
    D = cloud.shape[1]
    origin = cloud.min(axis=0) - 2 * h
    base = np.unique(np.floor((cloud - origin) / h).astype(np.int64), axis=0)
    if len(base) * 3**D > 4 * MAX_CELLS:
        return None
    offsets = np.stack(np.meshgrid(*[[-1, 0, 1]] * D, indexing="ij"), axis=-1).reshape(-1, D)
    cells = np.unique((base[:, None, :] + offsets[None, :, :]).reshape(-1, D), axis=0)
    if len(cells) > MAX_CELLS:
        return None
    return _CellRegion(origin, h, cells)


@dataclass
class _BandRegion:
    """Points of ``S^2`` with ``z_lo <= <x, axis> <= z_hi`` (uniform by Archimedes)."""

    axis: np.ndarray
    e1: np.ndarray
    e2: np.ndarray
    z_lo: float
    z_hi: float

    @property
    def volume(self):
        return 2.0 * math.pi * (self.z_hi - self.z_lo)

    def sample(self, rng, m):
        u = rng.random((m, 2))
        z = self.z_lo + u[:, 0] * (self.z_hi - self.z_lo)
        ang = 2.0 * math.pi * u[:, 1]
        s = np.sqrt(np.clip(1.0 - z * z, 0.0, 1.0))
        return (
            z[:, None] * self.axis
            + (s * np.cos(ang))[:, None] * self.e1
            + (s * np.sin(ang))[:, None] * self.e2
        )


@dataclass
class _SphereRegion:
    dim: int

    @property
    def volume(self):
        return sphere_volume(self.dim - 1)

    def sample(self, rng, m):
        g = rng.standard_normal((m, self.dim))
        return g / np.linalg.norm(g, axis=1)[:, None]


def _orthonormal_completion(a):
    a = a / np.linalg.norm(a)
    trial = np.eye(3)[np.argmin(np.abs(a))]
    e1 = np.cross(a, trial)
    e1 /= np.linalg.norm(e1)
    return a, e1, np.cross(a, e1)


def bounding_region(X, reach):
    """Sampling region containing the ``reach``-neighborhood of ``X``.

    Euclidean: the smaller of the cloud's bounding box inflated by
    ``1.1 reach + fill`` and a cover by grid cells of that side length (every
    point within ``reach`` of ``X`` lies in a cell adjacent to a cell holding
    a cloud point). Sphere ``S^2``: the narrowest zonal band (over a few candidate axes)
    containing the inflated set; other spheres use the whole sphere.
    """
    pad = 1.1 * reach + X.fill
    if X.ambient == "euclidean":
        box = _BoxRegion(X.cloud.min(axis=0) - pad, X.cloud.max(axis=0) + pad)
        key = ("cells", float(pad))
        cover = X._regions.get(key) if key in X._regions else X._regions.setdefault(key, _cell_cover(X.cloud, pad))
        if cover is not None and cover.volume < box.volume:
            return cover
        return box
    if X.dim != 3:
        return _SphereRegion(X.dim)
    candidates = []
    mean = X.cloud.mean(axis=0)
    if np.linalg.norm(mean) > 1e-8:
        candidates.append(mean / np.linalg.norm(mean))
    _, vecs = np.linalg.eigh(X.cloud.T @ X.cloud)
    candidates.extend(vecs.T)
    best = None
    for a in candidates:
        a, e1, e2 = _orthonormal_completion(np.asarray(a, dtype=float))
        polar = np.arccos(np.clip(X.cloud @ a, -1.0, 1.0))
        th_lo = max(0.0, float(polar.min()) - pad)
        th_hi = min(math.pi, float(polar.max()) + pad)
        band = _BandRegion(a, e1, e2, math.cos(th_hi), math.cos(th_lo))
        if best is None or band.volume < best.volume:
            best = band
    return best


# ---------------------------------------------------------------- curves


@dataclass(frozen=True)
class CurveEntry:
    t: float
    volume: float
    stderr: float
    samples: int


@dataclass
class NeighborhoodVolumeCurve:
    """Neighborhood volumes (or Gaussian values) along a schedule."""

    entries: list
    kind: str = "minkowski"

    def to_csv(self, fh=None):
        """CSV with columns ``t_or_u, value, stderr, samples``."""
        own = fh is None
        if own:
            fh = io.StringIO()
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t_or_u", "value", "stderr", "samples"])
        for e in self.entries:
            w.writerow([repr(e.t), repr(e.volume), repr(e.stderr), e.samples])
        return fh.getvalue() if own else None

    def check_monotone(self, nsigma=3.0):
        """Volumes nondecreasing in ``t`` up to ``nsigma`` combined standard errors."""
        es = sorted(self.entries, key=lambda e: e.t)
        for a, b in zip(es[:-1], es[1:]):
            if b.volume < a.volume - nsigma * math.hypot(a.stderr, b.stderr):
                return False
        return True

    def as_list(self):
        return [[e.t, e.volume, e.stderr, e.samples] for e in self.entries]


@dataclass
class ContentEstimate:
    """Lower/upper proxies from the asymptotic window and the slope diagnostic."""

    lower: float
    upper: float
    fit_exponent: float
    ci: dict
    curve: NeighborhoodVolumeCurve
    ratios: np.ndarray
    ratio_stderr: np.ndarray
    window: list
    gaussian: Optional[float] = None

    @property
    def spread(self):
        return self.upper - self.lower

    @property
    def stderr(self):
        return float(np.max(self.ratio_stderr[self.window]))

    def as_dict(self):
        return {
            "lower": self.lower,
            "upper": self.upper,
            "gaussian": self.gaussian,
            "fit_exponent": self.fit_exponent,
            "ci": self.ci,
        }

    def to_json(self):
        return json.dumps(self.as_dict(), sort_keys=True)


@dataclass
class GaussianEstimate:
    lower: float
    upper: float
    ci: dict
    curve: NeighborhoodVolumeCurve
    values: np.ndarray
    stderr: np.ndarray
    window: list
    admissible_u: float

    @property
    def spread(self):
        return self.upper - self.lower

    def as_dict(self):
        return {"lower": self.lower, "upper": self.upper, "ci": self.ci, "u_cap": self.admissible_u}


# ---------------------------------------------------------------- estimators


def _check_budget(budget):
    budget = int(budget)
    if budget < MIN_BUDGET:
        raise ValidationError(f"budget must be at least {MIN_BUDGET} samples, got {budget}")
    return budget


def _check_resolution(X, t):
    """Chartless clouds measure distance only to within the fill distance."""
    if X.chart is None and X.fill > 0.1 * t:
        raise ValidationError(
            f"fill distance {X.fill:.3g} of {X.name} is too coarse for t={t:.3g}; "
            "supply a chart or a denser cloud"
        )


def _density_weight(density, X):
    if density is None:
        return None
    if hasattr(density, "support") and hasattr(density, "moment"):
        # a radial density from waistlab.transport, applied to |x|
        return lambda pts: np.asarray(density(np.linalg.norm(pts, axis=1)), dtype=float)
    return lambda pts: np.asarray(density(pts), dtype=float)


def _mc_integral(X, region, integrand, budget, seed, key, workers):
    """Mean and stderr of ``region.volume * integrand(points)``."""

    def chunk(rng, m):
        pts = region.sample(rng, m)
        vals = integrand(pts)
        if not np.all(np.isfinite(vals)):
            raise ValidationError("integrand is not finite on the sampling region")
        vals = vals * region.volume
        return float(vals.sum()), float(np.dot(vals, vals)), m

    parts = map_chunks(chunk, budget, seed, key, workers)
    mean, se, n = reduce_moments(parts)
    return mean, se, n


def neighborhood_volume(X, t, budget, seed, workers=1, density=None, key=()):
    """Monte Carlo volume of ``nu_t(X)``, optionally weighted by ``density``.

    Returns ``(volume, stderr)``.
    """
    if not t > 0:
        raise ValidationError(f"t must be positive, got {t}")
    budget = _check_budget(budget)
    _check_resolution(X, t)
    region = bounding_region(X, t)
    weight = _density_weight(density, X)

    def integrand(pts):
        inside = distance_to_set(X, pts, cutoff=t) <= t
        out = inside.astype(float)
        if weight is not None:
            out = out * weight(pts)
        return out

    mean, se, _ = _mc_integral(X, region, integrand, budget, seed, ("nbhd", X.name, float(t)) + tuple(key), workers)
    return mean, se


def _validate_schedule(schedule, decreasing, name):
    s = np.asarray(schedule, dtype=float)
    if s.ndim != 1 or len(s) < 5:
        raise ValidationError(f"{name} schedule needs at least 5 levels")
    if np.any(s <= 0):
        raise ValidationError(f"{name} schedule must be positive")
    d = np.diff(s)
    if (decreasing and np.any(d >= 0)) or (not decreasing and np.any(d <= 0)):
        raise ValidationError(f"{name} schedule must be strictly {'de' if decreasing else 'in'}creasing")
    return s


def _window(levels, values, stderr, finest_first, count=3, snr=100.0):
    order = np.argsort(levels)
    if not finest_first:
        order = order[::-1]
    good = [i for i in order if values[i] > snr * stderr[i]]
    return good[:count]


def _content_from_curve(X, k, entries, density_name=None):
    m = X.n - k
    t = np.array([e.t for e in entries])
    vol = np.array([e.volume for e in entries])
    se = np.array([e.stderr for e in entries])
    norm = unit_ball_volume(m) * t**m
    ratios = vol / norm
    rse = se / norm
    win = _window(t, vol, se, finest_first=True)
    if len(win) < 2:
        raise ValidationError("fewer than two levels resolve the volume above 100 standard errors; raise the budget")
    slope = float(np.polyfit(np.log(t[win]), np.log(vol[win]), 1)[0])
    lo_i = win[int(np.argmin(ratios[win]))]
    hi_i = win[int(np.argmax(ratios[win]))]
    ci = {"lower": 1.96 * float(rse[lo_i]), "upper": 1.96 * float(rse[hi_i])}
    return ContentEstimate(
        lower=float(ratios[lo_i]),
        upper=float(ratios[hi_i]),
        fit_exponent=slope,
        ci=ci,
        curve=NeighborhoodVolumeCurve(list(entries)),
        ratios=ratios,
        ratio_stderr=rse,
        window=list(win),
    )


def weighted_content_estimate(X, k, density, t_schedule, budget, seed, workers=1):
    """Minkowski content with samples weighted by ``density``.

    ``density`` is a vectorized callable on ambient points or a radial
    density (applied to ``|x|``). ``budget`` is the sample count per level.
    """
    ts = _validate_schedule(t_schedule, decreasing=True, name="t")
    ratios = ts[1:] / ts[:-1]
    if np.max(np.abs(ratios / ratios[0] - 1.0)) > 1e-9:
        raise ValidationError("t schedule must be geometric")
    if density is not None:
        region = bounding_region(X, ts[0])
        pilot = region.sample(np.random.default_rng(0), 4096)
        vals = _density_weight(density, X)(pilot)
        if not np.all(np.isfinite(vals)) or np.any(vals < 0):
            raise ValidationError("density is unbounded or negative on the sampling region")
    entries = []
    for t in ts:
        v, s = neighborhood_volume(X, t, budget, seed, workers, density=density)
        entries.append(CurveEntry(float(t), v, s, int(budget)))
    return _content_from_curve(X, k, entries)


def content_estimate(X, k, t_schedule, budget, seed, workers=1):
    """Lower/upper Minkowski content proxies and the log-log slope.

    ``t_schedule`` must be geometric and decreasing with at least 5 levels;
    ``budget`` is the sample count per level.
    """
    return weighted_content_estimate(X, k, None, t_schedule, budget, seed, workers)


def gaussian_value(X, k, u, budget, seed, workers=1, key=()):
    """``u^{n-k} int exp(-pi u^2 d^2)`` over the ``6/u``-neighborhood of ``X``.

    Returns ``(value, stderr)``.
    """
    budget = _check_budget(budget)
    eps = 6.0 / u
    m = X.n - k
    region = bounding_region(X, eps)
    scale = u**m

    def integrand(pts):
        d = distance_to_set(X, pts, cutoff=eps)
        return np.where(d <= eps, scale * np.exp(-math.pi * (u * d) ** 2), 0.0)

    mean, se, _ = _mc_integral(X, region, integrand, budget, seed, ("gauss", X.name, float(u)) + tuple(key), workers)
    return mean, se


def gaussian_content(X, k, u_schedule, budget, seed, workers=1):
    """Lower/upper Gaussian content proxies over the three largest admissible ``u``.

    ``u`` is admissible when ``1/u`` exceeds five times the fill distance.
    """
    us = _validate_schedule(u_schedule, decreasing=False, name="u")
    cap = math.inf if X.fill == 0 else 1.0 / (5.0 * X.fill)
    entries = []
    for u in us:
        v, s = gaussian_value(X, k, u, budget, seed, workers)
        entries.append(CurveEntry(float(u), v, s, int(budget)))
    vals = np.array([e.volume for e in entries])
    se = np.array([e.stderr for e in entries])
    admissible = [i for i in range(len(us)) if us[i] <= cap]
    if not admissible:
        raise ValidationError(f"no u in the schedule is admissible (cap {cap:.3g}); densify the cloud")
    win = sorted(admissible, key=lambda i: -us[i])[:3]
    lo_i = win[int(np.argmin(vals[win]))]
    hi_i = win[int(np.argmax(vals[win]))]
    return GaussianEstimate(
        lower=float(vals[lo_i]),
        upper=float(vals[hi_i]),
        ci={"lower": 1.96 * float(se[lo_i]), "upper": 1.96 * float(se[hi_i])},
        curve=NeighborhoodVolumeCurve(entries, kind="gaussian"),
        values=vals,
        stderr=se,
        window=win,
        admissible_u=cap,
    )


def gaussian_content_from_tube(tube_volume, n, k, u, upper=math.inf):
    """Gaussian value from a tube-volume function by integration by parts.

    ``u^{n-k} int_0^inf V(t) 2 pi u^2 t exp(-pi u^2 t^2) dt``, valid when
    ``V(0) = 0`` (``k < n``).
    """
    m = n - k
    # substitute s = u t so the integrand is O(1) for every u
    scale = float(u) ** m
    f = lambda s: scale * tube_volume(s / u) * 2.0 * math.pi * s * math.exp(-math.pi * s * s)
    top = min(upper * u, 12.0)
    return integrate(f, 0.0, top)


def weight_identity(m):
    """``int_0^inf v_m s^m d(-exp(-pi s^2))``, which equals 1 for every ``m >= 0``."""
    f = lambda s: unit_ball_volume(m) * s**m * 2.0 * math.pi * s * math.exp(-math.pi * s * s)
    return integrate(f, 0.0, 1.0) + integrate(f, 1.0, math.inf)


@dataclass
class SandwichReport:
    passed: bool
    chain: dict
    tolerance: float
    weight_identity: float
    failures: list

    def as_dict(self):
        return {
            "passed": bool(self.passed),
            "chain": self.chain,
            "tolerance": self.tolerance,
            "weight_identity": self.weight_identity,
            "failures": self.failures,
        }


def verify_sandwich(mink, gauss, codim, nsigma=3.0):
    """Check ``M_lower <= G_lower <= G_upper <= M_upper`` within combined error.

    The tolerance is ``nsigma`` combined standard errors plus the larger of
    the two window spreads, since both sides are finite-scale proxies of
    limits. The averaging-weight identity for ``codim = n - k`` is checked
    to 1e-10.
    """
    m_se = float(np.max(mink.ratio_stderr[mink.window]))
    g_se = float(np.max(gauss.stderr[gauss.window]))
    tol = nsigma * math.hypot(m_se, g_se) + max(mink.spread, gauss.spread)
    chain = [
        ("M_lower", mink.lower),
        ("G_lower", gauss.lower),
        ("G_upper", gauss.upper),
        ("M_upper", mink.upper),
    ]
    failures = []
    for (na, a), (nb, b) in zip(chain[:-1], chain[1:]):
        if a > b + tol:
            failures.append(f"{na}={a:.6g} exceeds {nb}={b:.6g} by more than {tol:.3g}")
    w = weight_identity(codim)
    if abs(w - 1.0) > 1e-10:
        failures.append(f"weight identity gives {w!r}")
    return SandwichReport(not failures, dict(chain), tol, w, failures)


def fubini_tube_identity(m, l):
    """Check ``v_m v_l l int_0^1 x^{m+1} (1-x^2)^{(l-2)/2} dx = v_{m+l}``.

    The endpoint factor ``(1-x)^{(l-2)/2}`` is handled by an algebraic weight.
    Returns ``(lhs, rhs)``.
    """
    if m < 0 or l < 1:
        raise ValidationError("need m >= 0 and l >= 1")
    beta = 0.5 * (l - 2)
    f = lambda x: x ** (m + 1) * (1.0 + x) ** beta
    integral = integrate(f, 0.0, 1.0, weight="alg", wvar=(0.0, beta))
    lhs = unit_ball_volume(m) * unit_ball_volume(l) * l * integral
    return lhs, unit_ball_volume(m + l)


def lift_tube_volume(X, t, l, budget, seed, workers=1):
    """Volume of the t-tube of ``X`` after embedding ``R^n`` into ``R^{n+l}``.

    Integrates the slice volume ``v_l (t^2 - d^2)^{l/2}`` over ``nu_t(X)`` in
    ``R^n``. Returns ``(volume, stderr)``.
    """
    if X.ambient != "euclidean":
        raise ValidationError("lifting is defined for Euclidean sets")
    budget = _check_budget(budget)
    region = bounding_region(X, t)
    vl = unit_ball_volume(l)

    def integrand(pts):
        d = distance_to_set(X, pts, cutoff=t)
        return np.where(d <= t, vl * np.clip(t * t - d * d, 0.0, None) ** (0.5 * l), 0.0)

    mean, se, _ = _mc_integral(X, region, integrand, budget, seed, ("lift", X.name, float(t), l), workers)
    return mean, se


@dataclass
class ProductReport:
    passed: bool
    u: list
    product: list
    factors: list
    z_scores: list
    limit: float
    limit_stderr: float

    def as_dict(self):
        return {
            "passed": bool(self.passed),
            "u": self.u,
            "product": self.product,
            "factor_product": self.factors,
            "z_scores": self.z_scores,
            "limit": self.limit,
            "limit_stderr": self.limit_stderr,
        }


def gaussian_product_check(X, Y, kx, ky, u_schedule, budget, seed, workers=1, nsigma=3.0):
    """Compare ``G(X x Y)(u)`` with ``G(X)(u) G(Y)(u)`` at every admissible ``u``.

    The finite-``u`` values factor exactly (Fubini), so each comparison is a
    pure Monte Carlo test. ``limit`` is the product value at the largest
    admissible ``u``.
    """
    if X.n + Y.n > MAX_PRODUCT_DIM:
        raise ResourceError(f"product dimension {X.n + Y.n} exceeds {MAX_PRODUCT_DIM}")
    XY = product_set(X, Y)
    us = np.asarray(u_schedule, dtype=float)
    if us.ndim != 1 or len(us) < 1 or np.any(us <= 0) or np.any(np.diff(us) <= 0):
        raise ValidationError("u schedule must be positive and strictly increasing")
    cap = math.inf if XY.fill == 0 else 1.0 / (5.0 * XY.fill)
    us = [float(u) for u in us if u <= cap]
    if not us:
        raise ValidationError("no admissible u for the product cloud")
    prod, fac, zs = [], [], []
    last = None
    for u in us:
        gxy, sxy = gaussian_value(XY, kx + ky, u, budget, seed, workers, key=("xy",))
        gx, sx = gaussian_value(X, kx, u, budget, seed, workers, key=("x",))
        gy, sy = gaussian_value(Y, ky, u, budget, seed, workers, key=("y",))
        f = gx * gy
        sf = math.hypot(sx * gy, sy * gx)
        comb = math.hypot(sxy, sf)
        z = (gxy - f) / comb if comb > 0 else (0.0 if gxy == f else math.inf)
        prod.append(gxy)
        fac.append(f)
        zs.append(z)
        last = (gxy, sxy)
    passed = all(abs(z) <= nsigma for z in zs)
    return ProductReport(passed, us, prod, fac, zs, last[0], last[1])


def chart_volume(X):
    """Riemannian k-volume of the chart image by quadrature (k = 1 or 2)."""
    if X.chart is None:
        raise ValidationError("chart_volume needs a chart")
    box = X.param_box
    kdim = box.shape[0]
    h = 1e-6

    def jac(p):
        cols = []
        for j in range(kdim):
            e = np.zeros(kdim)
            e[j] = h
            cols.append((X.chart((p + e)[None])[0] - X.chart((p - e)[None])[0]) / (2 * h))
        J = np.column_stack(cols)
        return math.sqrt(max(np.linalg.det(J.T @ J), 0.0))

    if kdim == 1:
        return integrate(lambda a: jac(np.array([a])), box[0, 0], box[0, 1], epsrel=1e-9)
    if kdim == 2:
        inner = lambda a: integrate(lambda b: jac(np.array([a, b])), box[1, 0], box[1, 1], epsrel=1e-9)
        return integrate(inner, box[0, 0], box[0, 1], epsrel=1e-8)
    raise ValidationError("chart_volume supports k = 1 or 2")


# ---------------------------------------------------------------- built-in sets


def _grid_1d(lo, hi, num, periodic=False):
    if periodic:
        return np.linspace(lo, hi, num, endpoint=False)
    return np.linspace(lo, hi, num)


def point_set(n=2, at=None):
    """A single point in ``R^n`` (k = 0)."""
    at = np.zeros(n) if at is None else np.asarray(at, dtype=float)
    return SampledSet(at[None, :], 0, name="point")


def segment_set(length=1.0, n=2, num=2000):
    """The segment ``[0, length] x {0}`` in ``R^n``."""
    e = np.zeros(n)
    e[0] = 1.0
    chart = lambda p: p[:, :1] * e
    p = _grid_1d(0.0, length, num)[:, None]
    return SampledSet(chart(p), 1, chart=chart, params=p, param_box=[[0.0, length]], name=f"segment({length:g})")


def circle_set(radius=1.0, num=4000):
    """The circle of given radius about the origin of ``R^2``."""
    chart = lambda p: radius * np.column_stack([np.cos(p[:, 0]), np.sin(p[:, 0])])
    p = _grid_1d(0.0, 2 * math.pi, num, periodic=True)[:, None]
    return SampledSet(
        chart(p), 1, chart=chart, params=p, param_box=[[0.0, 2 * math.pi]], periodic=(True,),
        name=f"circle({radius:g})",
    )


def polyline_set(vertices, num=2000):
    """Piecewise linear curve through ``vertices`` in ``R^n``, parametrized by arc length."""
    V = np.asarray(vertices, dtype=float)
    seg = np.linalg.norm(np.diff(V, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    total = float(cum[-1])

    def chart(p):
        s = np.clip(p[:, 0], 0.0, total)
        i = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, len(seg) - 1)
        frac = (s - cum[i]) / seg[i]
        return V[i] + frac[:, None] * (V[i + 1] - V[i])

    p = _grid_1d(0.0, total, num)[:, None]
    p = np.unique(np.concatenate([p[:, 0], cum]))[:, None]
    return SampledSet(chart(p), 1, chart=chart, params=p, param_box=[[0.0, total]], name="polyline")


def flat_ball_set(k, radius, n, num=60):
    """The flat k-ball of given radius in ``R^k x 0`` inside ``R^n``."""
    if not 1 <= k <= n:
        raise ValidationError("need 1 <= k <= n")

    def chart(p):
        out = np.zeros((p.shape[0], n))
        out[:, :k] = p
        return out

    def clip(p):
        r = np.linalg.norm(p, axis=1)
        scale = np.where(r > radius, radius / np.maximum(r, 1e-300), 1.0)
        return p * scale[:, None]

    axes = np.meshgrid(*[np.linspace(-radius, radius, num)] * k, indexing="ij")
    p = np.column_stack([a.ravel() for a in axes])
    p = p[np.linalg.norm(p, axis=1) <= radius]
    if k == 2:
        # boundary points so the cloud reaches the rim
        ang = np.linspace(0, 2 * math.pi, 8 * num, endpoint=False)
        p = np.vstack([p, radius * np.column_stack([np.cos(ang), np.sin(ang)])])
    box = [[-radius, radius]] * k
    return SampledSet(chart(p), k, chart=chart, params=p, param_box=box, clip=clip, name=f"flat-ball({k},{radius:g})")


def sphere_latitude_set(polar_angle, num=4000):
    """The circle at the given polar angle on ``S^2`` (the equator at ``pi/2``)."""
    sa, ca = math.sin(polar_angle), math.cos(polar_angle)
    chart = lambda p: np.column_stack([sa * np.cos(p[:, 0]), sa * np.sin(p[:, 0]), np.full(len(p), ca)])
    p = _grid_1d(0.0, 2 * math.pi, num, periodic=True)[:, None]
    return SampledSet(
        chart(p), 1, ambient="sphere", chart=chart, params=p, param_box=[[0.0, 2 * math.pi]],
        periodic=(True,), name=f"latitude({polar_angle:g})",
    )


def equator_set(num=4000):
    return sphere_latitude_set(math.pi / 2, num)


def meridian_arc_set(a, b, num=2000):
    """The meridian arc of ``S^2`` between polar angles ``a < b`` at longitude 0."""
    chart = lambda p: np.column_stack([np.sin(p[:, 0]), np.zeros(len(p)), np.cos(p[:, 0])])
    p = _grid_1d(a, b, num)[:, None]
    return SampledSet(chart(p), 1, ambient="sphere", chart=chart, params=p, param_box=[[a, b]], name=f"meridian({a:g},{b:g})")


def product_set(X, Y):
    """``X x Y`` in ``R^{n+m}`` with the product cloud and product chart."""
    if X.ambient != "euclidean" or Y.ambient != "euclidean":
        raise ValidationError("products are formed of Euclidean sets")
    if X.n + Y.n > MAX_PRODUCT_DIM:
        raise ResourceError(f"product dimension {X.n + Y.n} exceeds {MAX_PRODUCT_DIM}")
    for F in (X, Y):
        if F.chart is None and len(F.cloud) > 1:
            raise ValidationError("a chartless factor must be a single point")
    nx, ny = len(X.cloud), len(Y.cloud)
    if nx * ny > 5_000_000:
        raise ResourceError(f"product cloud of {nx * ny} points is too large")
    ix, iy = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    ix, iy = ix.ravel(), iy.ravel()
    cloud = np.hstack([X.cloud[ix], Y.cloud[iy]])
    fill = math.hypot(X.fill, Y.fill)
    name = f"{X.name}x{Y.name}"
    if X.chart is None and Y.chart is None:
        return SampledSet(cloud, X.k + Y.k, name=name, fill=fill, factors=(X, Y))
    kx = X.params.shape[1] if X.chart is not None else 0
    ky = Y.params.shape[1] if Y.chart is not None else 0

    def chart(p):
        a = X.chart(p[:, :kx]) if kx else np.broadcast_to(X.cloud[0], (len(p), X.dim))
        b = Y.chart(p[:, kx:]) if ky else np.broadcast_to(Y.cloud[0], (len(p), Y.dim))
        return np.hstack([a, b])

    def clip(p):
        out = p.copy()
        if kx:
            out[:, :kx] = X.clip_params(p[:, :kx])
        if ky:
            out[:, kx:] = Y.clip_params(p[:, kx:])
        return out

    parts = []
    if kx:
        parts.append(X.params[ix])
    if ky:
        parts.append(Y.params[iy])
    params = np.hstack(parts)
    box = np.vstack([b for b in (X.param_box if kx else None, Y.param_box if ky else None) if b is not None])
    return SampledSet(cloud, X.k + Y.k, chart=chart, params=params, param_box=box, clip=clip, name=name, fill=fill, factors=(X, Y))
