"""Central finite differences with the package-wide stencil policy.

The step for first derivatives of smooth functions is cbrt(eps) * max(1, |x|),
applied per coordinate. All finite-difference fallbacks (metric derivatives,
potential derivatives, wave-coefficient derivatives) share this policy so the
accuracy model is uniform.
"""

import numpy as np

#: cube root of double-precision machine epsilon, the optimal central-difference step scale
FD_STEP_SCALE = float(np.cbrt(np.finfo(float).eps))


def fd_step(x):
    """Stencil half-width for differentiating at scalar coordinate value x."""
    return FD_STEP_SCALE * max(1.0, abs(float(x)))


def partial_in_coord(f, x, i, h=None):
    """Central difference of f (scalar- or array-valued) in coordinate i at point x."""
    x = np.asarray(x, dtype=float)
    hi = fd_step(x[i]) if h is None else h
    xp = x.copy()
    xm = x.copy()
    xp[i] += hi
    xm[i] -= hi
    return (np.asarray(f(xp)) - np.asarray(f(xm))) / (2.0 * hi)


def partial_in_scalar(f, t, h=None):
    """Central difference of f in a scalar argument t."""
    ht = fd_step(t) if h is None else h
    return (f(t + ht) - f(t - ht)) / (2.0 * ht)


def gradient_fd(f, x, h=None):
    """All first partials of scalar f at x, as a covector array."""
    x = np.asarray(x, dtype=float)
    return np.array([partial_in_coord(f, x, i, h=h) for i in range(x.size)])
