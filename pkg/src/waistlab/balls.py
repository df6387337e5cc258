"""Unions of congruent balls and monotonicity experiments under contractions.

If ``f`` does not increase distances between centers, the volume of the
union of equal balls should not increase either. The experiments here move
the centers along the linear homotopy ``f_a(x) = cos(a) x + sin(a) f(x)``
with ``x`` in ``V = R^d`` and ``f(x)`` in a second copy ``V'`` of ``R^d``,
along which every pairwise distance is nonincreasing, and track the union
volume in ``R^{2d}`` with the same Monte Carlo samples at every ``a``.
"""

import csv
import io
import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import ValidationError
from .minkowski import SampledSet, neighborhood_volume
from .rng import map_chunks

__all__ = [
    "BallSystem",
    "ContractionPath",
    "lens_area",
    "union_volume",
    "interpolate",
    "pairwise_monotonicity_check",
    "kp_experiment",
    "KPReport",
    "planar_lipschitz_content_check",
    "kp_scenarios",
]

MIN_BUDGET = 10_000
BRUTE_FORCE_CENTERS = 64


@dataclass
class BallSystem:
    """Balls of a common radius about ``centers`` (shape ``(m, d)``)."""

    centers: np.ndarray
    radius: float

    def __post_init__(self):
        c = _as_centers(self.centers)
        self.centers = c
        if c.shape[0] == 0 or c.shape[1] < 1:
            raise ValidationError("need at least one center in dimension >= 1")
        if not np.all(np.isfinite(c)):
            raise ValidationError("centers must be finite")
        if not self.radius > 0:
            raise ValidationError(f"radius must be positive, got {self.radius}")
        if len(np.unique(c, axis=0)) != len(c):
            raise ValidationError("centers must be distinct")

    @property
    def dim(self):
        return self.centers.shape[1]


def lens_area(r, dist):
    """Area of the union of two planar disks of radius ``r`` at center distance ``dist``."""
    if dist >= 2 * r:
        return 2 * math.pi * r * r
    overlap = 2 * r * r * math.acos(dist / (2 * r)) - 0.5 * dist * math.sqrt(4 * r * r - dist * dist)
    return 2 * math.pi * r * r - overlap


def _covered(centers, r, pts, tree=None):
    """Boolean mask of points within ``r`` of some center."""
    if tree is None and len(centers) <= BRUTE_FORCE_CENTERS:
        inside = np.zeros(len(pts), dtype=bool)
        r2 = r * r
        for c in centers:
            diff = pts - c
            inside |= np.einsum("ij,ij->i", diff, diff) <= r2
        return inside
    tree = tree if tree is not None else cKDTree(centers)
    d, _ = tree.query(pts, k=1, distance_upper_bound=r * (1 + 1e-12))
    return d <= r


def _box(centers_list, r):
    lo = np.min([c.min(axis=0) for c in centers_list], axis=0) - r
    hi = np.max([c.max(axis=0) for c in centers_list], axis=0) + r
    return lo, hi


def _exact_volume(system):
    c = system.centers
    if system.dim == 2 and len(c) <= 2:
        if len(c) == 1:
            return math.pi * system.radius**2
        return lens_area(system.radius, float(np.linalg.norm(c[0] - c[1])))
    return None


def union_volume(system, budget, seed, workers=1, exact=True):
    """Volume of the union of the balls; returns ``(volume, stderr)``.

    The planar one- and two-ball cases use the lens formula (stderr 0) unless
    ``exact=False``; otherwise uniform sampling in the bounding box of the
    inflated centers.
    """
    if exact:
        v = _exact_volume(system)
        if v is not None:
            return v, 0.0
    budget = int(budget)
    if budget < MIN_BUDGET:
        raise ValidationError(f"budget must be at least {MIN_BUDGET}, got {budget}")
    lo, hi = _box([system.centers], system.radius)
    vol = float(np.prod(hi - lo))
    tree = cKDTree(system.centers) if len(system.centers) > BRUTE_FORCE_CENTERS else None

    def chunk(rng, m):
        pts = lo + rng.random((m, len(lo))) * (hi - lo)
        return int(np.count_nonzero(_covered(system.centers, system.radius, pts, tree))), m

    parts = map_chunks(chunk, budget, seed, ("union", system.dim, len(system.centers)), workers)
    hits = sum(p[0] for p in parts)
    n = sum(p[1] for p in parts)
    p = hits / n
    return vol * p, vol * math.sqrt(max(p * (1 - p), 0.0) / n)


@dataclass
class ContractionPath:
    """Centers ``source`` and their images ``image`` under a map meant to be 1-Lipschitz."""

    source: np.ndarray
    image: np.ndarray
    alpha_grid: np.ndarray = None
    name: str = "path"

    def __post_init__(self):
        self.source = _as_centers(self.source)
        self.image = _as_centers(self.image)
        if self.image.shape != self.source.shape:
            raise ValidationError("source and image must have the same shape")
        if self.alpha_grid is None:
            self.alpha_grid = np.linspace(0.0, math.pi / 2, 9)
        self.alpha_grid = _check_alpha(self.alpha_grid)

    @property
    def dim(self):
        return self.source.shape[1]

    def lipschitz_violations(self, tol=1e-12):
        """Pairs ``(i, j, |x_i - x_j|, |f x_i - f x_j|)`` where the image distance is larger."""
        a = _pair_distances(self.source)
        b = _pair_distances(self.image)
        i, j = np.nonzero(np.triu(b > a * (1 + tol) + tol, k=1))
        return [(int(p), int(q), float(a[p, q]), float(b[p, q])) for p, q in zip(i, j)]

    def validate(self):
        bad = self.lipschitz_violations()
        if bad:
            shown = ", ".join(f"({i},{j}): {a:.6g} -> {b:.6g}" for i, j, a, b in bad[:5])
            raise ValidationError(f"map is not 1-Lipschitz on {len(bad)} pairs, e.g. {shown}")


def _as_centers(x):
    x = np.asarray(x, dtype=float)
    return x[:, None] if x.ndim == 1 else x


def _check_alpha(grid):
    g = np.asarray(grid, dtype=float)
    if g.ndim != 1 or len(g) < 2:
        raise ValidationError("alpha grid needs at least two values")
    if np.any(np.diff(g) <= 0) or g[0] < 0 or g[-1] > math.pi / 2 + 1e-15:
        raise ValidationError("alpha grid must increase within [0, pi/2]")
    return g


def _pair_distances(x):
    diff = x[:, None, :] - x[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def interpolate(path, alpha):
    """Centers ``cos(alpha) x + sin(alpha) f(x)`` in ``R^{2d}``."""
    if not (0.0 <= alpha <= math.pi / 2 + 1e-15):
        raise ValidationError(f"alpha must lie in [0, pi/2], got {alpha}")
    return np.hstack([math.cos(alpha) * path.source, math.sin(alpha) * path.image])


@dataclass
class PairwiseReport:
    passed: bool
    alpha: np.ndarray
    max_increase: float
    strictly_decreasing_pairs: int
    constant_pairs: int

    def as_dict(self):
        return {
            "passed": bool(self.passed),
            "levels": int(len(self.alpha)),
            "max_increase": self.max_increase,
            "strictly_decreasing_pairs": self.strictly_decreasing_pairs,
            "constant_pairs": self.constant_pairs,
        }


def pairwise_monotonicity_check(path, alpha_grid=None):
    """Confirm every pairwise center distance is nonincreasing along the homotopy.

    Raises :class:`ValidationError` when the map increases some distance.
    """
    path.validate()
    grid = path.alpha_grid if alpha_grid is None else _check_alpha(alpha_grid)
    dists = np.array([_pair_distances(interpolate(path, a)) for a in grid])
    iu = np.triu_indices(len(path.source), k=1)
    series = dists[:, iu[0], iu[1]]
    scale = max(float(series.max()), 1e-300) if series.size else 1.0
    steps = np.diff(series, axis=0)
    max_inc = float(steps.max()) if steps.size else 0.0
    tol = 1e-12 * scale
    strict = int(np.sum(np.all(steps < -tol, axis=0))) if steps.size else 0
    const = int(np.sum(np.all(np.abs(steps) <= tol, axis=0))) if steps.size else 0
    return PairwiseReport(max_inc <= tol, grid, max_inc, strict, const)


@dataclass
class KPReport:
    """Union volume along the homotopy with paired differences between levels."""

    name: str
    alpha: np.ndarray
    volumes: np.ndarray
    stderr: np.ndarray
    diffs: np.ndarray
    diff_stderr: np.ndarray
    passed: bool
    exact: bool
    samples: int

    def to_csv(self, fh=None):
        own = fh is None
        if own:
            fh = io.StringIO()
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["alpha", "volume", "stderr"])
        for a, v, s in zip(self.alpha, self.volumes, self.stderr):
            w.writerow([repr(float(a)), repr(float(v)), repr(float(s))])
        return fh.getvalue() if own else None

    def as_dict(self):
        return {
            "name": self.name,
            "passed": bool(self.passed),
            "exact": bool(self.exact),
            "samples": int(self.samples),
            "alpha": [float(a) for a in self.alpha],
            "volume": [float(v) for v in self.volumes],
            "stderr": [float(s) for s in self.stderr],
            "max_increase_z": float(np.max(self._z())) if len(self.diffs) else 0.0,
        }

    def _z(self):
        se = np.where(self.diff_stderr > 0, self.diff_stderr, np.inf)
        z = np.where(self.diff_stderr > 0, self.diffs / se, np.where(self.diffs > 0, np.inf, 0.0))
        return z


def kp_experiment(path, t, budget, seed, alpha_grid=None, workers=1, nsigma=3.0, name=None):
    """Union volume of radius-``t`` balls about ``f_alpha(X)`` for each alpha.

    All levels share one sampling box and one sample stream, so consecutive
    differences are estimated from paired samples. The curve passes when no
    difference exceeds ``nsigma`` of its standard error. When the centers
    stay in a plane and there are at most two of them the lens formula is
    used instead.
    """
    if not t > 0:
        raise ValidationError(f"t must be positive, got {t}")
    path.validate()
    grid = path.alpha_grid if alpha_grid is None else _check_alpha(alpha_grid)
    centers = [interpolate(path, a) for a in grid]
    label = name or path.name
    if len(path.source) <= 2 and 2 * path.dim == 2:
        vols = np.array([_exact_volume(BallSystem(_distinct(c), t)) for c in centers])
        diffs = np.diff(vols)
        zeros = np.zeros(len(grid))
        passed = bool(np.all(diffs <= 1e-12 * vols.max()))
        return KPReport(label, grid, vols, zeros, diffs, np.zeros(len(diffs)), passed, True, 0)
    budget = int(budget)
    if budget < MIN_BUDGET:
        raise ValidationError(f"budget must be at least {MIN_BUDGET}, got {budget}")
    lo, hi = _box(centers, t)
    box_vol = float(np.prod(hi - lo))
    L = len(grid)
    trees = [cKDTree(c) if len(c) > BRUTE_FORCE_CENTERS else None for c in centers]

    def chunk(rng, m):
        pts = lo + rng.random((m, len(lo))) * (hi - lo)
        ind = np.array([_covered(c, t, pts, tr) for c, tr in zip(centers, trees)], dtype=np.int64)
        d = np.diff(ind, axis=0)
        return ind.sum(axis=1), np.abs(d).sum(axis=1), d.sum(axis=1), m

    parts = map_chunks(chunk, budget, seed, ("kp", label, float(t)), workers)
    hits = np.zeros(L, dtype=np.int64)
    dabs = np.zeros(L - 1, dtype=np.int64)
    dsum = np.zeros(L - 1, dtype=np.int64)
    n = 0
    for h, a, s, m in parts:
        hits += h
        dabs += a
        dsum += s
        n += m
    p = hits / n
    vols = box_vol * p
    se = box_vol * np.sqrt(p * (1 - p) / n)
    # paired differences take values in {-1, 0, 1}, so sum d^2 = sum |d|
    dm = dsum / n
    dvar = np.maximum(dabs / n - dm * dm, 0.0)
    diffs = box_vol * dm
    dse = box_vol * np.sqrt(dvar / n)
    passed = bool(np.all(diffs <= nsigma * dse))
    return KPReport(label, grid, vols, se, diffs, dse, passed, False, n)


def _distinct(c):
    return np.unique(c, axis=0)


@dataclass
class LipschitzContentReport:
    passed: bool
    t: list
    source_volumes: list
    image_volumes: list
    stderr: list

    def as_dict(self):
        return {
            "passed": bool(self.passed),
            "t": self.t,
            "source_volume": self.source_volumes,
            "image_volume": self.image_volumes,
            "stderr": self.stderr,
        }


def _image_set(X, f):
    cloud = np.asarray(f(X.cloud), dtype=float)
    if X.chart is None:
        return SampledSet(cloud, X.k, name=f"f({X.name})")
    chart = lambda p: np.asarray(f(X.chart(p)), dtype=float)
    return SampledSet(
        cloud, X.k, chart=chart, params=X.params, param_box=X.param_box,
        periodic=X.periodic, clip=X.clip, name=f"f({X.name})",
    )


def planar_lipschitz_content_check(X, f, t_schedule, budget, seed, workers=1, image=None, nsigma=3.0, pairs=20000):
    """Check ``vol nu_t(f(X)) <= vol nu_t(X)`` (within ``nsigma``) for planar ``X``.

    ``f`` is a vectorized map on points of ``R^2``; it is validated as
    1-Lipschitz on random pairs of cloud points and on nearby pairs. ``image``
    may supply a sampled version of ``f(X)``; by default it is the image of
    the cloud with the chart composed with ``f``.
    """
    if X.ambient != "euclidean" or X.dim != 2:
        raise ValidationError("the set must lie in the plane")
    rng = np.random.default_rng(0)
    i = rng.integers(0, len(X.cloud), pairs)
    j = rng.integers(0, len(X.cloud), pairs)
    a = X.cloud[i]
    b = np.vstack([X.cloud[j], a + 1e-3 * rng.standard_normal(a.shape)])
    a = np.vstack([a, a])
    da = np.linalg.norm(a - b, axis=1)
    db = np.linalg.norm(np.asarray(f(a)) - np.asarray(f(b)), axis=1)
    bad = db > da * (1 + 1e-9) + 1e-15
    if np.any(bad):
        k = int(np.argmax(db - da))
        raise ValidationError(
            f"map is not 1-Lipschitz: |x-y|={da[k]:.6g} but |f(x)-f(y)|={db[k]:.6g} at x={a[k]}, y={b[k]}"
        )
    Y = image if image is not None else _image_set(X, f)
    ts = [float(t) for t in t_schedule]
    sv, iv, se = [], [], []
    passed = True
    for t in ts:
        vx, sx = neighborhood_volume(X, t, budget, seed, workers, key=("source",))
        vy, sy = neighborhood_volume(Y, t, budget, seed, workers, key=("image",))
        s = math.hypot(sx, sy)
        if vy > vx + nsigma * s:
            passed = False
        sv.append(vx)
        iv.append(vy)
        se.append(s)
    return LipschitzContentReport(passed, ts, sv, iv, se)


# ---------------------------------------------------------------- scenarios


def _projection_to_line(x, angle=0.3):
    u = np.array([math.cos(angle), math.sin(angle)])
    return np.outer(x @ u, u)


def kp_scenarios(seed=0):
    """The shipped homotopy scenarios: ``name -> (ContractionPath, t)``."""
    rng = np.random.default_rng(seed)
    out = {}
    pts = rng.uniform(-1, 1, (10, 2))
    out["identity"] = (ContractionPath(pts, pts.copy(), name="identity"), 0.5)
    out["two-balls-merge"] = (
        ContractionPath(np.array([[0.0], [2.0]]), np.zeros((2, 1)), name="two-balls-merge"),
        1.0,
    )
    pts = rng.uniform(-1, 1, (15, 2))
    out["projection-15"] = (ContractionPath(pts, _projection_to_line(pts), name="projection-15"), 0.3)
    pts = rng.uniform(-1, 1, (20, 2))
    centroid = pts.mean(axis=0)
    out["contraction-20"] = (
        ContractionPath(pts, centroid + 0.5 * (pts - centroid), name="contraction-20"),
        0.3,
    )
    pts = rng.uniform(-1, 1, (12, 2))
    folded = np.column_stack([pts[:, 0], np.abs(pts[:, 1])])
    out["fold-line"] = (ContractionPath(pts, folded, name="fold-line"), 0.4)
    return out
