"""Closed-form scalar objects of the point-interaction problem.

Conventions: spectral parameters ``lam`` are complex numbers off the cut
``lam - |v|^2/4 <= 0``; all square roots are principal (``Re > 0``), so the
formulas below are the analytic continuation of the real-``lam`` ones.
The interaction strength ``alpha`` is a real number, or ``DECOUPLED``
(``+inf``) meaning no interaction at all.
"""

import math

import numpy as np

from .errors import BranchCutError, PoleError, SingularPointError

FOUR_PI = 4.0 * math.pi
DECOUPLED = math.inf

# Evaluation points closer than this to a singular point are refused.
SINGULAR_RADIUS = 1e-12
POLE_GUARD = 1e-12


def is_decoupled(alpha):
    return alpha == DECOUPLED


def branch_sqrt(z, strict=True):
    """Principal square root with ``Re(w) > 0`` off the negative real axis.

    With ``strict`` a point on the closed negative real axis (where no root
    with positive real part exists) raises :class:`BranchCutError`; zero is
    allowed and maps to zero.
    """
    z = np.asarray(z, dtype=complex)
    if strict:
        on_cut = (z.imag == 0.0) & (z.real < 0.0)
        if np.any(on_cut):
            raise BranchCutError(f"square root requested on the branch cut: {z[on_cut].ravel()[:3]}")
    w = np.sqrt(z)
    return w[()] if w.ndim == 0 else w


def _velocity(v):
    v = np.zeros(3) if v is None else np.asarray(v, dtype=float)
    if v.shape != (3,) or not np.all(np.isfinite(v)):
        raise ValueError(f"velocity must be a finite 3-vector, got {v!r}")
    return v


def speed_squared(v):
    v = _velocity(v)
    return float(v @ v)


def shifted_root(lam, v=None):
    """``sqrt(lam - |v|^2/4)``, the decay rate of the drifted Green function."""
    return branch_sqrt(complex(lam) - speed_squared(v) / 4.0)


def gamma_alpha(alpha, lam):
    """``alpha + sqrt(lam)/(4 pi)``."""
    if is_decoupled(alpha):
        return complex(math.inf)
    return alpha + branch_sqrt(complex(lam)) / FOUR_PI


def gamma_v_alpha(alpha, v, lam):
    """``alpha + sqrt(lam - |v|^2/4)/(4 pi)``; equals :func:`gamma_alpha` at ``v = 0``."""
    if is_decoupled(alpha):
        return complex(math.inf)
    return alpha + shifted_root(lam, v) / FOUR_PI


def _radius(x):
    x = np.asarray(x, dtype=float)
    r = np.sqrt(np.sum(x * x, axis=-1))
    if np.any(r < SINGULAR_RADIUS):
        raise SingularPointError("Green function evaluated at its singular point")
    return x, r


def green_free(lam, x):
    """Yukawa kernel ``exp(-sqrt(lam)|x|)/(4 pi |x|)``; ``x`` has shape (..., 3)."""
    _, r = _radius(x)
    a = branch_sqrt(complex(lam))
    out = np.exp(-a * r) / (FOUR_PI * r)
    return out[()] if out.ndim == 0 else out


def green_drift(lam, v, x):
    """Green function of ``-Laplacian + i v.grad + lam``.

    ``exp(-sqrt(lam - |v|^2/4)|x|)/(4 pi |x|) * exp(i v.x/2)``.
    """
    v = _velocity(v)
    x, r = _radius(x)
    a = shifted_root(lam, v)
    out = np.exp(-a * r + 0.5j * (x @ v)) / (FOUR_PI * r)
    return out[()] if out.ndim == 0 else out


def resolvent_kernel_point(alpha, v, lam, x1, x2):
    """Integral kernel of ``(H_{v,alpha} + lam)^{-1}`` at the point pair (x1, x2).

    Free part ``G^v(x1 - x2)`` plus the rank-one term
    ``G^v(x1) G^{-v}(x2) / Gamma_{v,alpha}(lam)``.
    """
    v = _velocity(v)
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    free = green_drift(lam, v, x1 - x2)
    if is_decoupled(alpha):
        return free
    gamma = gamma_v_alpha(alpha, v, lam)
    if abs(gamma) < POLE_GUARD:
        raise PoleError(f"Gamma_(v,alpha)({lam}) = {gamma} vanishes: lam is a resolvent pole")
    return free + green_drift(lam, v, x1) * green_drift(lam, -v, x2) / gamma


def green_difference_at_origin(lam, v, radii=None, direction=None):
    """Richardson-extrapolated ``lim_{x->0} (G^v_lam - G_lam)(x)``.

    The drift phase contributes a direction-dependent term ``i v.x/(8 pi |x|)``
    that survives the limit, so the even part ``(f(x) + f(-x))/2`` along
    ``direction`` is extrapolated (this is the limit of the real, isotropic
    part, which is the quantity entering the form identity).
    Returns ``(estimate, error_estimate)``.
    """
    v = _velocity(v)
    if direction is None:
        direction = np.array([0.36, -0.48, 0.8])
    direction = np.asarray(direction, dtype=float)
    direction = direction / np.linalg.norm(direction)
    if radii is None:
        radii = 0.05 * 0.5 ** np.arange(8)

    def even_part(r):
        x = r * direction
        fp = green_drift(lam, v, x) - green_free(lam, x)
        fm = green_drift(lam, v, -x) - green_free(lam, -x)
        return 0.5 * (fp + fm)

    # Neville table in the variable r (the even part is analytic in r).
    r = np.asarray(radii, dtype=float)
    table = [complex(even_part(ri)) for ri in r]
    best, err = table[-1], math.inf
    for level in range(1, len(r)):
        new = []
        for i in range(len(table) - 1):
            new.append((r[i] * table[i + 1] - r[i + level] * table[i]) / (r[i] - r[i + level]))
        if len(new) >= 1:
            cand_err = abs(new[-1] - table[-1])
            if cand_err < err:
                best, err = new[-1], cand_err
        table = new
        if len(table) < 2:
            break
    return best, err
