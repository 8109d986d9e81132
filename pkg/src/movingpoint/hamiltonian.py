"""Drifted Laplacian on the grid and its rank-one point perturbation.

``H_v = -Laplacian + i v.grad`` is the Fourier multiplier
``s(k) = |k|^2 - v.k``.  The point interaction is the genuine rank-one
operator ``H_v + g delta <delta, .>`` with the unit-mass lattice delta, so its
resolvent is exactly (Sherman-Morrison)

    K(lam) f = R0 f + (R0 f)(0) / Gamma_d(lam) * G_d(lam; .),

with ``G_d = R0 delta`` the lattice Green function and
``Gamma_d(lam) = -1/g - G_d(lam; 0)``.  The coupling ``g`` is fixed by
matching ``Gamma_d`` to the continuum ``Gamma_{v,alpha}`` at a calibration
point ``lam_star``.
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.fft as sfft

from . import kernels
from .errors import DegenerateCouplingError, PoleError, ResolventSetError, SizeGuardError
from .grid import WaveField, apply_multiplier, fft, ifft, lattice_delta_hat

RESOLVENT_GUARD = 1e-12
DENSE_MAX_N = 12


@dataclass(frozen=True, eq=False)
class DriftHamiltonian:
    grid: object
    v: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "v", kernels._velocity(self.v))

    @cached_property
    def symbol(self):
        return self.grid.k2 - self.grid.k_dot(self.v)

    @property
    def lower_bound(self):
        return -kernels.speed_squared(self.v) / 4.0

    def _denominator(self, lam):
        d = self.symbol + complex(lam)
        if np.min(np.abs(d)) < RESOLVENT_GUARD:
            raise ResolventSetError(f"lam = {lam} is in the spectrum of the grid operator")
        return d

    def green_origin(self, lam):
        """``G_d(lam; 0) = L^-3 sum_k 1/(s(k) + lam)``."""
        return complex(np.sum(1.0 / self._denominator(lam))) / self.grid.L**3

    def green_field(self, lam):
        """Lattice Green function ``R0(lam) delta`` as a field."""
        return WaveField(ifft(lattice_delta_hat(self.grid) / self._denominator(lam)), self.grid)


def apply_hv(H, f):
    return apply_multiplier(f, H.symbol)


def apply_lv(H, f):
    """``L_v f = v.grad f`` (spectral)."""
    return apply_multiplier(f, 1j * H.grid.k_dot(H.v))


def apply_laplacian(f):
    return apply_multiplier(f, -f.grid.k2)


def free_resolvent_apply(H, lam, f):
    return WaveField(ifft(fft(f.values) / H._denominator(lam)), f.grid)


def default_lambda_star(alpha, v):
    """Calibration point: the continuum bound-state pole when there is one."""
    v2 = kernels.speed_squared(v)
    if not kernels.is_decoupled(alpha) and alpha < 0:
        return (kernels.FOUR_PI * alpha) ** 2 + v2 / 4.0
    return 1.0 + v2 / 4.0


def renormalize_coupling(alpha, v, grid, lambda_star=None):
    """Coupling ``g`` with ``-1/g = Gamma_{v,alpha}(lam*) + G_d(lam*; 0)``.

    Returns 0 for the decoupled sentinel.
    """
    if kernels.is_decoupled(alpha):
        return 0.0
    v = kernels._velocity(v)
    if lambda_star is None:
        lambda_star = default_lambda_star(alpha, v)
    lam = float(lambda_star)
    if not lam > kernels.speed_squared(v) / 4.0:
        raise ValueError(f"calibration point {lam} must exceed |v|^2/4")
    H = DriftHamiltonian(grid, v)
    target = kernels.gamma_v_alpha(alpha, v, lam) + H.green_origin(lam)
    if abs(target) < 1e-14 * max(1.0, abs(H.green_origin(lam))):
        raise DegenerateCouplingError("calibration demands infinite coupling")
    return float(-1.0 / target.real)


@dataclass(frozen=True, eq=False)
class PointInteractionOperator:
    """``H_v + g delta <delta, .>`` with ``g`` calibrated from ``alpha``."""

    base: DriftHamiltonian
    alpha: float
    coupling: float
    lambda_star: float

    @classmethod
    def calibrated(cls, alpha, v, grid, lambda_star=None):
        v = kernels._velocity(v)
        if lambda_star is None:
            lambda_star = default_lambda_star(alpha, v)
        g = renormalize_coupling(alpha, v, grid, lambda_star)
        return cls(DriftHamiltonian(grid, v), alpha, g, float(lambda_star))

    @property
    def grid(self):
        return self.base.grid

    @property
    def v(self):
        return self.base.v

    @property
    def decoupled(self):
        return self.coupling == 0.0

    def gamma_d(self, lam):
        if self.decoupled:
            return complex(np.inf)
        return -1.0 / self.coupling - self.base.green_origin(lam)

    def apply(self, f):
        out = apply_hv(self.base, f)
        if self.decoupled:
            return out
        vals = out.values.copy()
        vals[0, 0, 0] += self.coupling * f.at_origin() / self.grid.cell_volume
        return WaveField(vals, self.grid)

    def lattice_charge(self, f):
        """Charge ``-g f(0)`` of a grid state (see ``forms`` lattice flavor)."""
        return -self.coupling * f.at_origin()


def krein_resolvent_apply(P, lam, f, allow_pole=False):
    """``(P + lam)^{-1} f`` via free multiplier plus rank-one correction."""
    u = free_resolvent_apply(P.base, lam, f)
    if P.decoupled:
        return u
    gamma = P.gamma_d(lam)
    if abs(gamma) < RESOLVENT_GUARD and not allow_pole:
        raise PoleError(f"Gamma_d({lam}) = {gamma:.3e}: lam is a pole of the resolvent")
    return u + (u.at_origin() / gamma) * P.base.green_field(lam)


def dense_materialize(P, lam=None):
    """Explicit matrix of ``P`` (or of ``(P + lam)^{-1}`` when ``lam`` is given).

    The matrix acts on the flattened grid values; it is Hermitian in the
    plain Euclidean product because the quadrature weight is uniform.
    """
    grid = P.grid
    if grid.n > DENSE_MAX_N:
        raise SizeGuardError(f"dense materialization refused for n = {grid.n} > {DENSE_MAX_N}")
    base = P.base if isinstance(P, PointInteractionOperator) else P
    N = grid.n**3
    eye = np.eye(N, dtype=complex).reshape((N,) + grid.shape)
    cols = ifft_batch(base.symbol * fft_batch(eye))
    M = cols.reshape(N, N).T.copy()
    if isinstance(P, PointInteractionOperator) and not P.decoupled:
        M[0, 0] += P.coupling / grid.cell_volume
    if lam is None:
        return M
    return np.linalg.inv(M + complex(lam) * np.eye(N))


def fft_batch(a):
    return sfft.fftn(a, axes=(1, 2, 3), norm="ortho", workers=-1)


def ifft_batch(a):
    return sfft.ifftn(a, axes=(1, 2, 3), norm="ortho", workers=-1)


def kato_rellich_sides(v, f):
    """``(||L_v f||^2, 3|v|^2 |<Lap f, f>|)`` for the grid Kato-Rellich bound."""
    H = DriftHamiltonian(f.grid, v)
    lv = apply_lv(H, f)
    lap = apply_laplacian(f)
    return lv.norm() ** 2, 3.0 * kernels.speed_squared(v) * abs(lap.inner(f))


def gamma_difference_defect(grid, v, lam, mu):
    """Relative error of ``G_d(lam; 0) - G_d(mu; 0)`` against its continuum value.

    The continuum difference is ``(sqrt(mu - |v|^2/4) - sqrt(lam - |v|^2/4)) / (4 pi)``.
    """
    H = DriftHamiltonian(grid, v)
    grid_value = H.green_origin(lam) - H.green_origin(mu)
    exact = (kernels.shifted_root(mu, v) - kernels.shifted_root(lam, v)) / kernels.FOUR_PI
    return abs(grid_value - exact) / abs(exact)
