"""Radial densities, cumulative moments and the monotone radial transport.

Given radial densities ``sigma`` and ``rho`` with the same total k-moment,
the map ``psi = Sigma^{-1} o P`` (``P``, ``Sigma`` the cumulative k-moments)
satisfies ``psi'(x) sigma_k(psi(x)) = rho_k(x)``. Its inverse ``phi`` drives
the radial map ``F(x) = phi(|x|) x / |x|``. The certificates in this module
check the stretch condition ``x phi'(x) > phi(x)`` and the ratio criterion
that ``t -> sigma_k(c t) / rho_k(t)`` is nondecreasing.

Densities are normalized with the factor-2 conformal convention (see
:mod:`waistlab.geometry`), so the sphere density integrates to ``vol S^k``
over a k-plane. Note that the ratio criterion is stated with ``rho_k(t)`` in
the denominator.
"""

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, ValidationError
from .geometry import cap_image_radius, hyperbolic_ball_image_radius, sphere_volume
from .quadrature import integrate

__all__ = [
    "RadialDensity",
    "CumulativeMoment",
    "TransportMap",
    "sphere_density",
    "cap_density",
    "hyperbolic_ball_density",
    "uniform_density",
    "cumulative",
    "build_transport",
    "transport_residual",
    "check_radial_condition",
    "psi_ratio_monotone",
    "apply_radial_map",
    "jacobian_on_subspace",
    "gromov_ratio_monotone",
    "spherical_ratio",
    "hyperbolic_ratio",
    "constructed_c",
    "verify_kball_preservation",
    "MonotoneReport",
    "transport_certificates",
]

TABLE_SIZE = 4096
TAIL_FRACTION = 1e-12
MONOTONE_TOL = 1e-10


@dataclass(frozen=True)
class RadialDensity:
    """A radial weight ``scale * func(x)`` on ``[0, support)``, weighting k-dimensional fibers."""

    func: Callable
    support: float = math.inf
    k: int = 1
    name: str = "density"
    scale: float = 1.0

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise DomainError(f"k must be a positive integer, got {self.k}")
        if not self.support > 0:
            raise DomainError("support must be positive")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        inside = (x >= 0) & (x < self.support)
        xs = np.where(inside, x, 0.0)
        out = np.where(inside, self.scale * np.asarray(self.func(xs), dtype=float), 0.0)
        return out if out.ndim else float(out)

    def moment(self, x):
        """``rho_k(x) = rho(x) x^{k-1}``."""
        x = np.asarray(x, dtype=float)
        out = self(x) * x ** (self.k - 1)
        return out if np.ndim(out) else float(out)

    def total_moment(self):
        f = lambda s: float(self.moment(s))
        if math.isinf(self.support):
            _, head, tail = _truncation(f, self.name)
            return head + tail
        return integrate(f, 0.0, self.support)

    def weighted_ball_volume(self, r):
        """k-volume of the flat k-ball of radius ``r`` weighted by this density."""
        return sphere_volume(self.k - 1) * cumulative(self)(r)


def sphere_density(k):
    """Density ``(2/(1+x^2))^k`` of the stereographically projected unit sphere."""
    return RadialDensity(lambda x: (2.0 / (1.0 + x * x)) ** k, math.inf, k, "sphere")


def uniform_density(k, support=math.inf, value=1.0):
    return RadialDensity(
        lambda x: np.full_like(np.asarray(x, dtype=float), value), support, k, "uniform"
    )


def _normalizing_scale(base_func, k, support):
    target = sphere_density(k).total_moment()
    partial = integrate(lambda s: base_func(s) * s ** (k - 1), 0.0, support)
    return target / partial


def cap_density(k, R):
    """Density of the spherical cap of radius ``R``, rescaled to the full-sphere total.

    ``A (2/(1+x^2))^k`` on ``[0, tan(R/2))``; ``A`` is stored as ``scale``.
    """
    if not (0.0 < R < math.pi):
        raise DomainError(f"cap radius must lie in (0, pi), got {R}")
    support = cap_image_radius(R)
    func = lambda x: (2.0 / (1.0 + x * x)) ** k
    A = _normalizing_scale(func, k, support)
    if not A > 1.0:
        raise ValidationError(f"cap normalization A={A} is not above 1")
    return RadialDensity(func, support, k, f"cap(R={R:g})", A)


def hyperbolic_ball_density(k, R):
    """Poincare density ``A (2/(1-x^2))^k`` on ``[0, tanh(R/2))``, rescaled to ``vol S^k``.

    Unlike the cap, ``A`` may fall below 1 once the hyperbolic k-ball is
    larger than the unit k-sphere.
    """
    if not R > 0:
        raise DomainError(f"radius must be positive, got {R}")
    support = hyperbolic_ball_image_radius(R)
    func = lambda x: (2.0 / (1.0 - x * x)) ** k
    A = _normalizing_scale(func, k, support)
    return RadialDensity(func, support, k, f"hyperbolic-ball(R={R:g})", A)


def _panel_integrals(density, f, nodes, tol=1e-15):
    """Integrals of the k-moment over consecutive table panels.

    Gauss-Legendre rules of orders 12 and 24 are applied to every panel at
    once; panels where they disagree by more than ``tol`` (relative to the
    running total) are redone with adaptive quadrature.
    """
    a, b = nodes[:-1], nodes[1:]
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    est = []
    for order in (12, 24):
        xg, wg = np.polynomial.legendre.leggauss(order)
        pts = mid[:, None] + half[:, None] * xg[None, :]
        vals = np.asarray(density.moment(pts), dtype=float)
        est.append(half * (vals @ wg))
    coarse, fine = est
    scale = max(float(np.sum(np.abs(fine))), 1e-300)
    redo = np.flatnonzero(~np.isfinite(fine) | (np.abs(fine - coarse) > tol * scale))
    for i in redo:
        fine[i] = integrate(f, a[i], b[i])
    return fine


def _truncation(f, name="density", max_blocks=60):
    """Find ``top`` with ``int_top^inf f < TAIL_FRACTION * int_0^top f``.

    The moment is integrated over blocks ``[4^j, 4^(j+1)]``; a block that is
    no smaller than its predecessor once past ``x = 1`` signals divergence.
    The remaining tail is computed with the ``x = 1/u`` substitution and
    compared with the last block as a consistency check.

    Returns ``(top, head, tail)``.
    """
    head = integrate(f, 0.0, 1.0)
    top, prev = 1.0, math.inf
    for _ in range(max_blocks):
        block = integrate(f, top, 4.0 * top)
        head += block
        top *= 4.0
        if block <= TAIL_FRACTION * head:
            tail = _tail(f, top)
            if not (0.0 <= tail <= 10.0 * block + 1e-300):
                break
            return top, head, tail
        if block >= prev:
            break
        prev = block
    raise DomainError(f"moment of {name} diverges or decays too slowly to tabulate")


def _tail(f, top):
    """``int_top^inf f`` via ``x = 1/u``, which keeps slowly decaying tails finite-range."""
    g = lambda u: f(1.0 / u) / (u * u) if u > 0 else 0.0
    return integrate(g, 0.0, 1.0 / top)


class CumulativeMoment:
    """Tabulated cumulative k-moment ``P(t) = int_0^t rho_k`` with exact refinement.

    The table holds ``TABLE_SIZE`` log-spaced nodes on the (possibly
    truncated) support, with both the running integral and the remaining
    tail at every node. Evaluation adds a quadrature from the nearest node,
    so values are accurate to the quadrature tolerance rather than the
    interpolation order. The tail form keeps full relative precision where
    ``P`` is close to its total. Inverses bracket with the table and then
    run a bracketed root search.
    """

    def __init__(self, density, table_size=TABLE_SIZE):
        self.density = density
        f = lambda s: float(density.moment(s))
        self._f = f
        infinite = math.isinf(density.support)
        if infinite:
            top, head, beyond = _truncation(f, density.name)
            total = head + beyond
        else:
            top = density.support
            beyond = 0.0
        lo = min(top * (1e-10 if infinite else 1e-8), 1e-6)
        nodes = np.concatenate([[0.0], np.geomspace(lo, top, table_size - 1)])
        pieces = _panel_integrals(density, f, nodes)
        values = np.concatenate([[0.0], np.cumsum(pieces)])
        tails = np.concatenate([np.cumsum(pieces[::-1])[::-1], [0.0]]) + beyond
        self.total = float(values[-1] + beyond) if not infinite else float(total)
        self.nodes = nodes
        self.values = values
        self.tails = tails
        self.top = top
        if np.any(np.diff(values) <= 0):
            raise DomainError(f"cumulative moment of {density.name} is not strictly increasing")

    @property
    def support(self):
        return self.density.support

    def _index(self, t):
        return min(int(np.searchsorted(self.nodes, t, side="right")) - 1, len(self.nodes) - 1)

    def _eval(self, t):
        if t <= 0:
            return 0.0
        if t >= self.density.support:
            return self.total
        i = self._index(t)
        return float(self.values[i] + integrate(self._f, self.nodes[i], t))

    def _tail_eval(self, t):
        """``int_t^support rho_k``."""
        if t <= 0:
            return self.total
        if t >= self.density.support:
            return 0.0
        if t >= self.top:
            return _tail(self._f, t)
        i = self._index(t)
        return float(self.tails[i + 1] + integrate(self._f, t, self.nodes[i + 1]))

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.vectorize(self._eval, otypes=[float])(t)
        return out if out.ndim else float(out)

    def tail(self, t):
        t = np.asarray(t, dtype=float)
        out = np.vectorize(self._tail_eval, otypes=[float])(t)
        return out if out.ndim else float(out)

    def _bracket(self, table, y, decreasing):
        if decreasing:
            i = int(np.searchsorted(-table, -y, side="right")) - 1
        else:
            i = int(np.searchsorted(table, y, side="right")) - 1
        if i < len(self.nodes) - 1:
            return self.nodes[i], self.nodes[i + 1]
        a, b = self.top, self.top * 2.0
        if decreasing:
            while self._tail_eval(b) > y:
                a, b = b, b * 2.0
        else:
            while self._eval(b) < y:
                a, b = b, b * 2.0
        return a, b

    def _solve(self, g, a, b):
        ga, gb = g(a), g(b)
        if ga == 0:
            return float(a)
        if gb == 0:
            return float(b)
        return brentq(g, a, b, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=400)

    def _inverse(self, y):
        if y <= 0:
            return 0.0
        if y >= self.total:
            if math.isinf(self.density.support) or y > self.total * (1 + 1e-12):
                raise DomainError(f"value {y} is not below the total moment {self.total}")
            return self.density.support
        a, b = self._bracket(self.values, y, False)
        return self._solve(lambda s: self._eval(s) - y, a, b)

    def _tail_inverse(self, y):
        if y >= self.total:
            return 0.0
        if y <= 0:
            if math.isinf(self.density.support):
                raise DomainError("a zero tail has no finite preimage")
            return self.density.support
        a, b = self._bracket(self.tails, y, True)
        return self._solve(lambda s: self._tail_eval(s) - y, a, b)

    def inverse(self, y):
        y = np.asarray(y, dtype=float)
        out = np.vectorize(self._inverse, otypes=[float])(y)
        return out if out.ndim else float(out)

    def tail_inverse(self, y):
        y = np.asarray(y, dtype=float)
        out = np.vectorize(self._tail_inverse, otypes=[float])(y)
        return out if out.ndim else float(out)

    def match(self, other, t):
        """Solve ``self(s) = other(t)`` for ``s``, switching to tails past the median."""
        head = other._eval(t)
        if head <= 0.5 * other.total:
            return self._inverse(min(head, self.total))
        return self._tail_inverse(other._tail_eval(t))


def cumulative(density):
    """Tabulate the cumulative k-moment of ``density``.

    Raises :class:`DomainError` when the total moment diverges.
    """
    try:
        total = density.total_moment()
    except Exception as exc:
        raise DomainError(f"moment of {density.name} is not integrable: {exc}") from exc
    if not math.isfinite(total):
        raise DomainError(f"moment of {density.name} diverges")
    return CumulativeMoment(density)


def _richardson(f, x, lo, hi, rel=1e-3):
    """Central difference with one Richardson step, shrinking near the domain ends."""
    x = float(x)
    h = rel * max(abs(x), 1e-3)
    room = min(x - lo, hi - x)
    if math.isfinite(room):
        h = min(h, 0.4 * room)
    if h <= 0:
        raise DomainError(f"no room for a derivative at {x}")
    d1 = (f(x + h) - f(x - h)) / (2 * h)
    d2 = (f(x + h / 2) - f(x - h / 2)) / h
    return (4 * d2 - d1) / 3


class TransportMap:
    """A strictly increasing ``phi`` with ``phi(0) = 0`` and its inverse ``psi``.

    ``domain`` is the interval on which ``phi`` is evaluated (the sigma
    side); ``psi`` acts on ``psi_domain`` (the rho side).
    """

    def __init__(self, phi, psi, domain, psi_domain, name="transport", sigma=None, rho=None):
        self._phi = phi
        self._psi = psi
        self.domain = tuple(domain)
        self.psi_domain = tuple(psi_domain)
        self.name = name
        self.sigma = sigma
        self.rho = rho
        self._table = None

    @classmethod
    def from_function(cls, phi, domain=(0.0, math.inf), psi=None, name="phi"):
        """Wrap an explicit increasing ``phi``; the inverse is found by bracketing if not given."""
        lo, hi = domain

        def phi_scalar(x):
            return float(phi(x))

        image_hi = phi_scalar(hi) if math.isfinite(hi) else math.inf

        def invert(y):
            if y <= 0:
                return 0.0
            b = 1.0 if not math.isfinite(hi) else hi
            a = 0.0
            while phi_scalar(b) < y:
                a, b = b, b * 2.0
                if b > 1e300:
                    raise DomainError(f"{y} is outside the image of phi")
            return brentq(lambda s: phi_scalar(s) - y, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps)

        psi_scalar = (lambda y: float(psi(y))) if psi is not None else invert
        return cls(phi_scalar, psi_scalar, (lo, hi), (0.0, image_hi), name)

    @staticmethod
    def _check(x, dom):
        lo, hi = dom
        x = np.asarray(x, dtype=float)
        if np.any(~(x >= lo)) or np.any(x > hi):
            raise DomainError(f"argument outside the domain [{lo}, {hi})")
        return x

    def phi(self, x):
        x = self._check(x, self.domain)
        out = np.vectorize(self._phi, otypes=[float])(x)
        return out if out.ndim else float(out)

    def psi(self, y):
        y = self._check(y, self.psi_domain)
        out = np.vectorize(self._psi, otypes=[float])(y)
        return out if out.ndim else float(out)

    def dphi(self, x):
        x = self._check(x, self.domain)
        g = lambda s: _richardson(self._phi, s, *self.domain)
        out = np.vectorize(g, otypes=[float])(x)
        return out if out.ndim else float(out)

    def dpsi(self, y):
        y = self._check(y, self.psi_domain)
        g = lambda s: _richardson(self._psi, s, *self.psi_domain)
        out = np.vectorize(g, otypes=[float])(y)
        return out if out.ndim else float(out)

    def table(self, size=TABLE_SIZE):
        """Log-spaced table ``(x, psi, psi', psi/x)`` on the rho side."""
        if self._table is None or len(self._table[0]) != size:
            lo, hi = self.psi_domain
            top = hi if math.isfinite(hi) else 1e6
            x = np.geomspace(1e-4 * min(top, 1.0), top * (1 - 1e-6) if math.isfinite(hi) else top, size)
            psi = self.psi(x)
            dpsi = self.dpsi(x)
            self._table = (x, psi, dpsi, psi / x)
        return self._table

    def to_csv(self, fh=None, size=TABLE_SIZE):
        """Write the table as CSV (``x, psi, psi_prime, ratio_psi_over_x``)."""
        x, psi, dpsi, ratio = self.table(size)
        own = fh is None
        if own:
            fh = io.StringIO()
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "psi", "psi_prime", "ratio_psi_over_x"])
        for row in zip(x, psi, dpsi, ratio):
            w.writerow([repr(float(v)) for v in row])
        if own:
            return fh.getvalue()
        return None


def build_transport(sigma, rho, moment_rtol=1e-8):
    """Construct ``psi = Sigma^{-1} o P`` and ``phi = P^{-1} o Sigma``.

    Raises
    ------
    ValidationError
        If the densities weight different fiber dimensions or their total
        moments differ by more than ``moment_rtol``.
    """
    if sigma.k != rho.k:
        raise ValidationError(f"fiber dimensions differ: sigma.k={sigma.k}, rho.k={rho.k}")
    Sig = cumulative(sigma)
    P = cumulative(rho)
    if abs(Sig.total - P.total) > moment_rtol * abs(P.total):
        raise ValidationError(
            f"total moments differ: sigma {Sig.total!r} vs rho {P.total!r}"
        )

    def psi(x):
        return Sig.match(P, x)

    def phi(s):
        return P.match(Sig, s)

    tm = TransportMap(phi, psi, (0.0, sigma.support), (0.0, rho.support),
                      f"{rho.name}->{sigma.name}", sigma=sigma, rho=rho)
    tm.Sigma = Sig
    tm.P = P
    return tm


def transport_residual(tm, x):
    """``Sigma(psi(x)) - P(x)`` on the rho side."""
    return tm.Sigma(tm.psi(x)) - tm.P(x)


@dataclass
class MonotoneReport:
    """Outcome of a monotonicity certificate on a grid."""

    passed: bool
    grid: np.ndarray
    values: np.ndarray
    violations: list = field(default_factory=list)
    flat: list = field(default_factory=list)

    def as_dict(self):
        return {
            "passed": bool(self.passed),
            "points": int(len(self.grid)),
            "violations": [[float(a), float(b)] for a, b in self.violations],
            "flat_points": int(len(self.flat)),
        }


def _monotone(grid, values, increasing=True, tol=MONOTONE_TOL):
    grid = np.asarray(grid, dtype=float)
    values = np.asarray(values, dtype=float)
    diffs = np.diff(values) if increasing else -np.diff(values)
    scale = float(np.max(np.abs(values))) if len(values) else 1.0
    bad = np.flatnonzero(diffs < -tol * scale)
    flat = np.flatnonzero(np.abs(diffs) <= tol * scale)
    return MonotoneReport(
        passed=len(bad) == 0,
        grid=grid,
        values=values,
        violations=[(grid[i + 1], diffs[i]) for i in bad],
        flat=[grid[i + 1] for i in flat],
    )


@dataclass
class RadialConditionReport:
    """Pointwise certificate of ``x phi'(x) > phi(x)`` plus the ratio monotonicity."""

    holds: bool
    grid: np.ndarray
    excess: np.ndarray
    violations: list
    equalities: list
    ratio: MonotoneReport

    @property
    def boundary(self):
        return not self.holds and not self.violations

    def as_dict(self):
        return {
            "holds": bool(self.holds),
            "boundary_equality": bool(self.boundary),
            "points": int(len(self.grid)),
            "violations": [[float(a), float(b)] for a, b in self.violations],
            "equality_points": int(len(self.equalities)),
            "phi_over_x_increasing": bool(self.ratio.passed),
        }


def check_radial_condition(tm, grid, rtol=1e-7):
    """Certify ``x phi'(x) > phi(x)`` on ``grid`` (points of phi's domain).

    The normalized excess ``x phi'/phi - 1`` is compared with ``rtol``:
    values below ``-rtol`` are violations, values within ``rtol`` of zero are
    reported as equality points. The equivalent statement that ``phi(x)/x``
    increases (``psi(y)/y`` decreases) is checked on the same grid.
    """
    grid = np.asarray(grid, dtype=float)
    if np.any(grid <= 0):
        raise DomainError("grid must be positive")
    phi = tm.phi(grid)
    dphi = tm.dphi(grid)
    excess = grid * dphi / phi - 1.0
    violations = [(x, e) for x, e in zip(grid, excess) if e < -rtol]
    equalities = [x for x, e in zip(grid, excess) if abs(e) <= rtol]
    ratio = _monotone(grid, phi / grid, increasing=True)
    holds = not violations and not equalities
    return RadialConditionReport(holds, grid, excess, violations, equalities, ratio)


def psi_ratio_monotone(tm, size=1000):
    """Check that ``psi(x)/x`` is nonincreasing on the map's log-spaced table."""
    x, _, _, ratio = tm.table(size)
    return _monotone(x, ratio, increasing=False)


def apply_radial_map(tm, x):
    """``F(x) = phi(|x|) x / |x|`` with ``F(0) = 0``; ``x`` has shape ``(n,)`` or ``(m, n)``."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x2 = np.atleast_2d(x)
    r = np.linalg.norm(x2, axis=1)
    lo, hi = tm.domain
    if np.any(r >= hi):
        raise DomainError("point lies outside the domain of the radial map")
    out = np.zeros_like(x2)
    nz = r > 0
    if np.any(nz):
        out[nz] = (tm.phi(r[nz]) / r[nz])[:, None] * x2[nz]
    return out[0] if single else out


def jacobian_on_subspace(tm, x, frame):
    """k-volume distortion of ``DF(x)`` restricted to ``span(frame)``.

    ``frame`` has shape ``(n, k)`` with orthonormal columns. ``DF`` has
    eigenvalue ``phi'(r)`` along ``x`` and ``phi(r)/r`` across it; with
    ``a = |frame^T u|^2`` the determinant is
    ``(phi/r)^{k-1} sqrt((phi/r)^2 (1 - a) + phi'^2 a)``.
    """
    x = np.asarray(x, dtype=float)
    E = np.asarray(frame, dtype=float)
    if E.ndim == 1:
        E = E[:, None]
    r = float(np.linalg.norm(x))
    if r == 0:
        raise DomainError("the Jacobian is evaluated away from the origin")
    k = E.shape[1]
    gram = E.T @ E
    if E.shape[0] != x.shape[0] or not np.allclose(gram, np.eye(k), atol=1e-10):
        raise DomainError("frame is not an orthonormal k-frame at x")
    u = x / r
    proj = E.T @ u
    a = float(np.clip(proj @ proj, 0.0, 1.0))
    lam_t = float(tm.phi(r)) / r
    lam_r = float(tm.dphi(r))
    return lam_t ** (k - 1) * math.sqrt(lam_t**2 * (1.0 - a) + lam_r**2 * a)


def spherical_ratio(t, c, A, k):
    """Closed form of ``sigma_k(ct)/rho_k(t)`` for the cap against the sphere."""
    t = np.asarray(t, dtype=float)
    return A * c ** (k - 1) * ((1 + t * t) / (1 + (c * t) ** 2)) ** k


def hyperbolic_ratio(t, c, A, k):
    """Closed form of ``sigma_k(ct)/rho_k(t)`` for the hyperbolic ball against the sphere."""
    t = np.asarray(t, dtype=float)
    return A * c ** (k - 1) * ((1 + t * t) / (1 - (c * t) ** 2)) ** k


def gromov_ratio_monotone(sigma, rho, c, grid):
    """Certify that ``t -> sigma_k(c t) / rho_k(t)`` is nondecreasing on ``grid``."""
    grid = np.asarray(grid, dtype=float)
    if not c > 0:
        raise DomainError(f"c must be positive, got {c}")
    if np.any(grid <= 0):
        raise DomainError("grid must be positive")
    if np.any(c * grid >= sigma.support) or np.any(grid >= rho.support):
        raise DomainError("grid leaves the supports (c t must stay inside sigma's support)")
    den = rho.moment(grid)
    if np.any(den == 0):
        raise DomainError("rho_k vanishes on the grid")
    ratio = sigma.moment(c * grid) / den
    return _monotone(grid, ratio, increasing=True)


def constructed_c(tm, x1):
    """The homothety constant ``c = psi(x1) / x1`` used by the ratio criterion."""
    return float(tm.psi(x1)) / float(x1)


@dataclass
class KBallReport:
    passed: bool
    radii: np.ndarray
    sigma_volumes: np.ndarray
    rho_volumes: np.ndarray
    relative_residuals: np.ndarray

    def as_dict(self):
        return {
            "passed": bool(self.passed),
            "radii": int(len(self.radii)),
            "max_relative_residual": float(np.max(self.relative_residuals)),
        }


def verify_kball_preservation(tm, sigma, rho, radii, rtol=1e-7):
    """Compare ``vol_{k,sigma} B^k(r)`` with ``vol_{k,rho} B^k(phi(r))`` for each ``r``."""
    radii = np.asarray(radii, dtype=float)
    Sig = getattr(tm, "Sigma", None) or cumulative(sigma)
    P = getattr(tm, "P", None) or cumulative(rho)
    scale = sphere_volume(sigma.k - 1)
    vs = scale * Sig(radii)
    vr = scale * P(tm.phi(radii))
    rel = np.abs(vs - vr) / np.maximum(np.abs(vs), 1e-300)
    rel = np.where(vs == 0, np.abs(vr), rel)
    return KBallReport(bool(np.all(rel < rtol)), radii, vs, vr, rel)


def transport_certificates(sigma, rho, size=1000, x1=1e-4, kball_radii=20):
    """Build the transport from ``rho`` to ``sigma`` and run every certificate.

    Returns ``(tm, report)`` where ``report`` is a JSON-ready dict with the
    identity residual on a ``size``-point log grid, the total-moment gap, the
    small-``x`` comparison of ``psi`` with the identity, the radial condition,
    the monotonicity of ``psi(x)/x``, the ratio certificate with the
    constructed ``c`` and the k-ball preservation residual.
    """
    tm = build_transport(sigma, rho)
    x = np.geomspace(1e-3, 1e3, size)
    if rho.support < math.inf:
        x = np.geomspace(1e-3, 0.999 * rho.support, size)
    residual = float(np.max(np.abs(transport_residual(tm, x))))
    moment_gap = abs(tm.Sigma.total - tm.P.total) / abs(tm.P.total)
    small = np.geomspace(1e-5, 1e-3, 20)
    psi_small = tm.psi(small)
    top = 0.999 * sigma.support if sigma.support < math.inf else 1e3
    cond = check_radial_condition(tm, np.geomspace(1e-3, top, size))
    ratio = psi_ratio_monotone(tm, size)
    c = constructed_c(tm, x1)
    c_top = 0.999 * sigma.support / c if sigma.support < math.inf else 1e3
    if rho.support < math.inf:
        c_top = min(c_top, 0.999 * rho.support)
    gromov = gromov_ratio_monotone(sigma, rho, c, np.linspace(1e-3, c_top, size))
    kball = verify_kball_preservation(tm, sigma, rho, np.geomspace(1e-3, top, kball_radii))
    passed = (residual < 1e-9 and moment_gap < 1e-8 and not cond.violations and ratio.passed
              and gromov.passed and kball.passed)
    report = {
        "map": tm.name,
        "k": sigma.k,
        "A": float(sigma.scale),
        "grid_points": int(size),
        "max_residual": residual,
        "moment_gap": float(moment_gap),
        "psi_below_identity_near_zero": bool(np.all(psi_small < small)),
        "radial_condition": cond.as_dict(),
        "psi_ratio_nonincreasing": bool(ratio.passed),
        "c": c,
        "c_below_one": bool(c < 1),
        "ratio_certificate": bool(gromov.passed),
        "kball": kball.as_dict(),
        "passed": bool(passed),
    }
    return tm, report
