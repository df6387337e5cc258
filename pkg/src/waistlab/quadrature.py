"""Adaptive quadrature with the package-wide tolerances.

All one-dimensional integrals go through :func:`integrate`, a thin layer over
QUADPACK (``scipy.integrate.quad``, adaptive Gauss-Kronrod 21-point rules).
"""

import math

from scipy import integrate as _integrate

from .errors import NumericError

EPSABS = 1e-12
EPSREL = 1e-10


def integrate(f, a, b, epsabs=EPSABS, epsrel=EPSREL, limit=500, points=None, **kwargs):
    """Integrate a scalar function ``f`` over ``[a, b]``.

    Infinite endpoints are allowed. Extra keyword arguments (``weight``,
    ``wvar``) are forwarded to QUADPACK.

    Raises
    ------
    NumericError
        If QUADPACK reports an estimated error larger than 100x the requested
        tolerance, or flags a failure without meeting the tolerance.
    """
    if a == b:
        return 0.0
    # full_output turns QUADPACK warnings into a returned message
    out = _integrate.quad(
        f, a, b, epsabs=epsabs, epsrel=epsrel, limit=limit, points=points, full_output=1, **kwargs
    )
    value, err = out[0], out[1]
    tol = max(epsabs, epsrel * abs(value))
    if not math.isfinite(value) or err > 100.0 * tol:
        raise NumericError(
            f"quadrature on [{a}, {b}] did not reach tolerance (error estimate {err:.3e})",
            residual=err,
        )
    if len(out) > 3 and err > tol:
        raise NumericError(f"quadrature on [{a}, {b}] failed: {out[3].splitlines()[0]}", residual=err)
    return value
