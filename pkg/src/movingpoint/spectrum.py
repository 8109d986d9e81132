"""Bound states, resolvent poles and norm-resolvent comparisons."""

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from . import kernels
from .errors import BoxTooSmallError, DegenerateCouplingError
from .forms import green_profile
from .grid import WaveField
from .hamiltonian import PointInteractionOperator, dense_materialize, krein_resolvent_apply

TAIL_BOUND = 1e-8
RESIDUE_DELTAS = (1e-2, 1e-3, 1e-4)
POWER_ITERATIONS = 30
POWER_SEED = 20240917


def essential_edge(v):
    return -kernels.speed_squared(v) / 4.0


def bound_state_energy(alpha, v):
    """``-(4 pi alpha)^2 - |v|^2/4`` for ``alpha < 0``, else ``None``."""
    if kernels.is_decoupled(alpha) or alpha >= 0:
        return None
    return -((kernels.FOUR_PI * alpha) ** 2) - kernels.speed_squared(v) / 4.0


def gamma_root(alpha, v, xtol=1e-15):
    """Real zero of ``Gamma_{v,alpha}`` above the essential edge, by bracketed root finding."""
    if kernels.is_decoupled(alpha) or alpha >= 0:
        return None
    shift = kernels.speed_squared(v) / 4.0
    lo, hi = shift, shift + (2.0 * kernels.FOUR_PI * alpha) ** 2

    def gamma(lam):
        return kernels.gamma_v_alpha(alpha, v, lam).real

    return brentq(gamma, lo, hi, xtol=xtol * max(1.0, hi), rtol=4 * np.finfo(float).eps, maxiter=200)


def bound_state_field(alpha, v, grid, normalize=True):
    """Sampled ``G^v`` at the pole; unit grid norm unless ``normalize`` is false.

    The origin node uses the ``"norm"`` cell rule so the grid norm tracks the
    continuum one.  Requires the box to hold the exponential tail,
    ``exp(4 pi alpha L/2) < 1e-8``.
    """
    lam0 = gamma_root(alpha, v)
    if lam0 is None:
        raise ValueError("no bound state for alpha >= 0")
    tail = math.exp(kernels.FOUR_PI * alpha * grid.L / 2.0)
    if not tail < TAIL_BOUND:
        raise BoxTooSmallError(f"bound-state tail exp(4 pi alpha L/2) = {tail:.2e} on the box seam")
    f = green_profile(grid, lam0, "drift", v, rule="norm")
    return f / f.norm() if normalize else f


def discrete_pole(P):
    """Largest real ``lam`` with ``Gamma_d(lam) = 0``; ``None`` without a grid bound state."""
    if P.decoupled:
        return None
    lo = -float(P.base.symbol.min())
    eps = 1e-9 * max(1.0, abs(lo))

    def gamma(lam):
        return P.gamma_d(lam).real

    if gamma(lo + eps) >= 0:
        return None
    hi = max(1.0, 2.0 * abs(lo))
    while gamma(hi) <= 0:
        hi *= 2.0
        if hi > 1e12:
            raise DegenerateCouplingError("no sign change of Gamma_d found")
    return brentq(gamma, lo + eps, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=500)


def discrete_bound_state(P, lam0=None):
    """Normalized eigenvector ``G_d(lam0)`` of the grid operator and its energy ``-lam0``."""
    if lam0 is None:
        lam0 = discrete_pole(P)
    if lam0 is None:
        raise ValueError("grid operator has no bound state")
    f = P.base.green_field(lam0)
    return f / f.norm(), -lam0


@dataclass
class SpectrumReport:
    essential_edge: float
    point_spectrum: float | None = None
    gamma_root: float | None = None
    eigenfunction: WaveField | None = None

    def __post_init__(self):
        if (self.point_spectrum is None) != (self.gamma_root is None):
            raise ValueError("point spectrum and gamma root must both be present or absent")
        if self.point_spectrum is not None:
            scale = max(1.0, abs(self.point_spectrum))
            if abs(self.point_spectrum + self.gamma_root) > 1e-12 * scale:
                raise ValueError("point spectrum must equal -gamma_root")

    def to_dict(self):
        return {
            "essential_edge": self.essential_edge,
            "point_spectrum": self.point_spectrum,
            "gamma_root": self.gamma_root,
        }


def spectrum_report(alpha, v, grid=None):
    root = gamma_root(alpha, v)
    field = None
    if root is not None and grid is not None:
        field = bound_state_field(alpha, v, grid)
    return SpectrumReport(essential_edge(v), None if root is None else -root, root, field)


def _residue_map(P, lam0, f, delta):
    return delta * krein_resolvent_apply(P, lam0 + delta, f, allow_pole=True)


def _extrapolate(deltas, values):
    """Neville extrapolation of ``values(delta)`` to ``delta = 0``."""
    d = list(deltas)
    table = list(values)
    for level in range(1, len(d)):
        table = [(d[i] * table[i + 1] - d[i + level] * table[i]) / (d[i] - d[i + level]) for i in range(len(table) - 1)]
    return table[0]


@dataclass
class ResidueCheck:
    deltas: tuple
    defects: list
    limit_defect: float
    orthogonal_leak: float


def residue_projection_check(P, lambda_0, f=None, rng=None):
    """``(lam - lam0) K(lam) f -> <b, f> b`` as ``lam -> lam0`` from above.

    ``b`` is the normalized grid eigenvector at the pole.  Reports the
    projection defect for each ``delta`` in :data:`RESIDUE_DELTAS`, the
    defect of the polynomial extrapolation to ``delta = 0``, and the
    limit's response to the component of ``f`` orthogonal to ``b``.
    """
    b, _ = discrete_bound_state(P, lambda_0)
    if f is None:
        rng = np.random.default_rng(0) if rng is None else rng
        vals = rng.normal(size=P.grid.shape) + 1j * rng.normal(size=P.grid.shape)
        f = WaveField(vals, P.grid)
    f = f / f.norm()
    target = b.inner(f) * b
    maps = [_residue_map(P, lambda_0, f, d) for d in RESIDUE_DELTAS]
    defects = [(m - target).norm() for m in maps]
    limit = _extrapolate(RESIDUE_DELTAS, maps)
    g = f - b.inner(f) * b
    g = g / g.norm()
    glim = _extrapolate(RESIDUE_DELTAS, [_residue_map(P, lambda_0, g, d) for d in RESIDUE_DELTAS])
    return ResidueCheck(RESIDUE_DELTAS, defects, (limit - target).norm(), glim.norm())


def residue_trace(P, lambda_0):
    """Trace of the extrapolated residue map from the dense resolvent (small grids only)."""
    M = dense_materialize(P)
    eye = np.eye(M.shape[0])
    traces = [d * np.trace(np.linalg.inv(M + (lambda_0 + d) * eye)) for d in RESIDUE_DELTAS]
    return complex(_extrapolate(RESIDUE_DELTAS, traces))


def norm_resolvent_gap(alpha, v, lam, grid, iterations=POWER_ITERATIONS, seed=POWER_SEED):
    """Power-iteration estimate of ``||K_v(lam) - K_0(lam)||`` with default calibrations."""
    Pv = PointInteractionOperator.calibrated(alpha, v, grid)
    P0 = PointInteractionOperator.calibrated(alpha, np.zeros(3), grid)

    def A(f):
        return krein_resolvent_apply(Pv, lam, f) - krein_resolvent_apply(P0, lam, f)

    def Ah(f):
        # adjoint of K(lam) is K(conj(lam)) for the self-adjoint grid operators
        lc = complex(lam).conjugate()
        return krein_resolvent_apply(Pv, lc, f) - krein_resolvent_apply(P0, lc, f)

    rng = np.random.default_rng(seed)
    f = WaveField(rng.normal(size=grid.shape) + 1j * rng.normal(size=grid.shape), grid)
    f = f / f.norm()
    sigma = 0.0
    for _ in range(iterations):
        g = Ah(A(f))
        nrm = g.norm()
        if nrm == 0.0:
            return 0.0
        sigma = math.sqrt(nrm)
        f = g / nrm
    return sigma
