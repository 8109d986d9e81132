"""Form-domain decompositions and the quadratic forms of the point interaction.

A form-domain state is stored as ``psi = regular + q * G`` where ``G`` is a
Green profile chosen by the *flavor*:

``"free"``     sampled ``G_lam(x) = exp(-sqrt(lam)|x|)/(4 pi |x|)``
``"drift"``    sampled ``G^v_lam`` (carries the phase ``exp(i v.x/2)``)
``"lattice"``  the lattice Green function ``R0(lam) delta`` of the grid
               operator; ``Gamma`` is then the discrete ``-1/g - G_d(lam; 0)``
               of a calibrated coupling ``g``, and the forms coincide with the
               exact grid forms of ``H_v + g delta<delta,.>``.

The sampled profiles are singular at the origin node; its value is replaced
by an origin-cell regularization (see :func:`origin_cell_value`).  All forms
are reported without the ``+lam`` shift, so their ``lam_ref`` independence is
a property to test rather than a definition.
"""

import itertools
import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from . import kernels
from .errors import ChargeFitError, FlavorMismatchError, UnderResolvedError
from .grid import WaveField, fft, ifft, lattice_delta_hat
from .hamiltonian import DriftHamiltonian

FLAVORS = ("free", "drift", "lattice")

# -Z(1) and -Z(1/2) for the Epstein zeta function of Z^3, i.e. the analytic
# continuations of sum' |n|^-2 and sum' |n|^-1.
LATTICE_ZETA_1 = 8.91363291758515
LATTICE_ZETA_HALF = 2.83729747948062

ORIGIN_RULE = "zeta"


def origin_cell_value(a, h, rule=None):
    """Regularized value of ``exp(-a r)/(4 pi r)`` at the origin node.

    ``"average"``: mean over the ball with the cell's volume (closed form).
    ``"norm"``: value making the grid sum of ``|G|^2`` match its integral up
    to O(h^4), from the zeta-corrected trapezoidal rule applied to
    ``exp(-2 a r)/r^2`` (terms in ``Z(1)``, ``Z(1/2)`` and ``Z(0) = -1``).
    ``"zeta"`` (default): ``(sqrt(Z1)/h - a)/(4 pi)``; keeps the leading
    norm correction of ``"norm"`` and the exact constant term of the
    expansion, so differences of profiles at two ``lam`` take the correct
    origin value ``(b - a)/(4 pi)``.
    """
    rule = rule or ORIGIN_RULE
    a = complex(a)
    R = h * (3.0 / (4.0 * math.pi)) ** (1.0 / 3.0)
    if rule == "average":
        if abs(a * R) < 1e-8:
            return 3.0 / (8.0 * math.pi * R)
        aR = a * R
        return complex(3.0 * (1.0 - np.exp(-aR) * (1.0 + aR)) / (4.0 * math.pi * R**3 * a * a)).real
    if rule == "zeta":
        return (math.sqrt(LATTICE_ZETA_1) / h - a.real) / kernels.FOUR_PI
    if rule == "norm":
        eps = 2.0 * a.real * h
        sq = (LATTICE_ZETA_1 - eps * LATTICE_ZETA_HALF + 0.5 * eps * eps) / h**2
        if sq <= 0.0:
            return origin_cell_value(a, h, "average")
        return math.sqrt(sq) / kernels.FOUR_PI
    raise ValueError(f"unknown origin rule {rule!r}")


def _vkey(v):
    return tuple(float(c) for c in (np.zeros(3) if v is None else np.asarray(v, dtype=float)))


@lru_cache(maxsize=64)
def _green_profile(grid, lam, flavor, v, rule):
    v = np.asarray(v)
    if flavor == "lattice":
        return DriftHamiltonian(grid, v).green_field(lam)
    if flavor == "free":
        v = np.zeros(3)
    elif flavor != "drift":
        raise FlavorMismatchError(f"unknown flavor {flavor!r}")
    a = kernels.shifted_root(lam, v)
    r = grid.radius
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = np.exp(-a * r) / (kernels.FOUR_PI * r)
    vals[0, 0, 0] = origin_cell_value(a, grid.h, rule)
    if np.any(v):
        vals = vals * np.exp(0.5j * grid.x_dot(v))
    return WaveField(vals, grid)


def green_profile(grid, lam, flavor="free", v=None, rule=None):
    return _green_profile(grid, float(lam), flavor, _vkey(v), rule or ORIGIN_RULE)


@dataclass(frozen=True)
class DecomposedState:
    """``psi = regular + charge * G`` for the Green profile of ``flavor``."""

    regular: WaveField
    charge: complex
    lambda_ref: float
    flavor: str = "free"
    v: tuple = (0.0, 0.0, 0.0)
    coupling: float | None = None

    def __post_init__(self):
        if self.flavor not in FLAVORS:
            raise FlavorMismatchError(f"unknown flavor {self.flavor!r}")
        object.__setattr__(self, "charge", complex(self.charge))
        object.__setattr__(self, "lambda_ref", float(self.lambda_ref))
        object.__setattr__(self, "v", _vkey(self.v))
        if not self.lambda_ref > kernels.speed_squared(self.v) / 4.0:
            raise ValueError("lambda_ref must exceed |v|^2/4")
        if self.flavor == "lattice" and self.coupling is None:
            raise FlavorMismatchError("lattice flavor needs the coupling g")

    @property
    def grid(self):
        return self.regular.grid

    def green(self):
        return green_profile(self.grid, self.lambda_ref, self.flavor, self.v)

    def scaled(self, c):
        return replace(self, regular=self.regular * c, charge=self.charge * c)


def assemble(d):
    if d.charge == 0:
        return d.regular
    return d.regular + d.charge * d.green()


def convert(d, flavor, v=None, coupling=None):
    """Same assembled field, decomposed against another Green profile."""
    v = _vkey(v if v is not None else d.v)
    coupling = d.coupling if coupling is None else coupling
    new = DecomposedState(d.regular, d.charge, d.lambda_ref, flavor, v, coupling)
    if d.charge == 0:
        return new
    diff = d.green() - new.green()
    return replace(new, regular=d.regular + d.charge * diff)


def change_lambda(d, lam):
    """Re-decompose about another reference ``lam`` (same flavor)."""
    new = replace(d, lambda_ref=float(lam))
    if d.charge == 0:
        return new
    return replace(new, regular=d.regular + d.charge * (d.green() - new.green()))


def gamma_value(alpha, d):
    if d.flavor == "lattice":
        return -1.0 / d.coupling - DriftHamiltonian(d.grid, d.v).green_origin(d.lambda_ref)
    if d.flavor == "free":
        return kernels.gamma_alpha(alpha, d.lambda_ref)
    return kernels.gamma_v_alpha(alpha, d.v, d.lambda_ref)


def _check_pair(d1, d2, flavors):
    if d1.flavor != d2.flavor or d1.flavor not in flavors:
        raise FlavorMismatchError(f"forms need matching flavors in {flavors}, got {d1.flavor}/{d2.flavor}")
    if d1.lambda_ref != d2.lambda_ref:
        raise FlavorMismatchError("states decomposed about different lambda_ref")
    if d1.grid != d2.grid:
        raise FlavorMismatchError("states live on different grids")
    if d1.v != d2.v or d1.coupling != d2.coupling:
        raise FlavorMismatchError("states decomposed with different drift or coupling")


def _charge_term(alpha, d1, d2):
    qq = np.conj(d1.charge) * d2.charge
    if qq == 0:
        return 0.0
    if d1.flavor != "lattice" and kernels.is_decoupled(alpha):
        raise ValueError("charged states are outside the form domain of the decoupled operator")
    return gamma_value(alpha, d1) * qq


def _spectral_pair(a, b, symbol):
    return complex(np.vdot(fft(a.values), symbol * fft(b.values))) * a.grid.cell_volume


def form_f_alpha0(alpha, d1, d2):
    """Form of the static point interaction at the origin, ``F_{alpha,0}(psi, phi)``."""
    _check_pair(d1, d2, ("free", "lattice"))
    if any(d1.v):
        raise FlavorMismatchError("F_alpha0 needs a drift-free decomposition")
    lam = d1.lambda_ref
    grid = d1.grid
    val = _spectral_pair(d1.regular, d2.regular, grid.k2 + lam)
    val += _charge_term(alpha, d1, d2)
    val -= lam * assemble(d1).inner(assemble(d2))
    return val


def _ilv_symbol(grid, v):
    # i v.grad  ->  i * (i v.k)
    return -grid.k_dot(v)


def form_qv(v, d1, d2):
    """``<iL_v r1, r2> + conj(q1) <G, iL_v r2> + q2 <iL_v r1, G>``."""
    _check_pair(d1, d2, ("free", "lattice"))
    grid = d1.grid
    sym = _ilv_symbol(grid, v)
    r1 = fft(d1.regular.values)
    r2 = fft(d2.regular.values)
    w = grid.cell_volume
    val = complex(np.vdot(r1, sym * r2)) * w
    if d1.charge != 0 or d2.charge != 0:
        g = fft(d1.green().values)
        val += np.conj(d1.charge) * complex(np.vdot(g, sym * r2)) * w
        val += d2.charge * complex(np.vdot(sym * r1, g)) * w
    return val


def form_fv_alpha(alpha, v, d1, d2):
    """Form of the drifted point interaction, evaluated in drift flavor.

    ``<(s + lam) r1, r2> + Gamma_{v,alpha}(lam) conj(q1) q2 - lam <psi, phi>``
    with ``s(k) = |k|^2 - v.k``.  Free-flavor inputs are converted first;
    lattice-flavor inputs are converted to the drifted lattice Green function.
    """
    _check_pair(d1, d2, ("free", "drift", "lattice"))
    v = _vkey(v)
    lam = d1.lambda_ref
    if not lam > kernels.speed_squared(v) / 4.0:
        raise ValueError("lambda_ref below the lower bound of the drifted form")
    target = "lattice" if d1.flavor == "lattice" else "drift"
    e1 = convert(d1, target, v) if (d1.flavor, d1.v) != (target, v) else d1
    e2 = convert(d2, target, v) if (d2.flavor, d2.v) != (target, v) else d2
    grid = d1.grid
    symbol = grid.k2 - grid.k_dot(v) + lam
    val = _spectral_pair(e1.regular, e2.regular, symbol)
    val += _charge_term(alpha, e1, e2)
    val -= lam * assemble(e1).inner(assemble(e2))
    return val


def form_identity_residual(alpha, v, d1, d2):
    """``F_{v,alpha}``, ``F_{alpha,0}``, ``Q_v`` and ``|F_v - F_0 - Q_v| / |F_v|`` for a pair."""
    fv = form_fv_alpha(alpha, v, d1, d2)
    f0 = form_f_alpha0(alpha, d1, d2)
    qv = form_qv(v, d1, d2)
    scale = abs(fv) if fv != 0 else 1.0
    return fv, f0, qv, abs(fv - f0 - qv) / scale


def mollified_green(grid, lam, eps):
    """Periodic ``G_lam * J_eps`` for the unit-mass Gaussian ``J_eps`` of width ``eps``."""
    if eps < 2.0 * grid.h * (1.0 - 1e-12):
        raise UnderResolvedError(f"mollifier width {eps} below 2h = {2 * grid.h}")
    symbol = lattice_delta_hat(grid) * np.exp(-0.5 * eps**2 * grid.k2) / (grid.k2 + lam)
    return WaveField(ifft(symbol), grid)


def mollified_qv(v, d1, d2, eps):
    """``<i L_v psi_eps, phi_eps>`` with the Green part replaced by ``G_lam * J_eps``."""
    _check_pair(d1, d2, ("free",))
    grid = d1.grid
    ge = mollified_green(grid, d1.lambda_ref, eps)
    p1 = d1.regular + d1.charge * ge
    p2 = d2.regular + d2.charge * ge
    return _spectral_pair(p1, p2, _ilv_symbol(grid, v))


def mollified_cross_term(v, grid, lam, eps):
    """``<L_v (G*J_eps), G*J_eps>``; zero for a real even profile."""
    ge = mollified_green(grid, lam, eps)
    return _spectral_pair(ge, ge, 1j * grid.k_dot(v))


@dataclass(frozen=True)
class ChargeFit:
    state: DecomposedState
    intercept: complex
    residual: float
    shell_residual: float
    condition: float


CHARGE_BAND = (0.5, 1.0)
SHELLS = (1.0, 3.0)
SHELL_DEGREE = 4


def _monomials(x, y, z, degree):
    cols = []
    for total in range(degree + 1):
        for a, b, c in itertools.product(range(total + 1), repeat=3):
            if a + b + c == total:
                cols.append(x**a * y**b * z**c)
    return cols


def shell_intercept(f, shells=SHELLS, degree=SHELL_DEGREE, max_condition=1e10):
    """Value at the origin of a local polynomial fitted on ``shells[0]*h <= |x| <= shells[1]*h``.

    Returns ``(intercept, relative_residual, condition)``.
    """
    grid = f.grid
    r = grid.radius
    lo, hi = shells[0] * grid.h, shells[1] * grid.h
    mask = (r >= lo * (1 - 1e-12)) & (r <= hi * (1 + 1e-12))
    x, y, z = (np.broadcast_to(c, grid.shape)[mask] / grid.h for c in grid.coords)
    A = np.stack(_monomials(x, y, z, degree), axis=1).astype(complex)
    if A.shape[0] <= A.shape[1]:
        raise ChargeFitError(f"{A.shape[0]} shell points cannot fit {A.shape[1]} coefficients")
    scale = np.abs(A).max(axis=0)
    As = A / scale
    cond = float(np.linalg.cond(As))
    if not cond < max_condition:
        raise ChargeFitError(f"shell fit ill-conditioned (cond = {cond:.2e})")
    b = f.values[mask]
    coef, *_ = np.linalg.lstsq(As, b, rcond=None)
    bn = np.linalg.norm(b)
    residual = float(np.linalg.norm(b - As @ coef) / bn) if bn > 0 else 0.0
    return complex(coef[0] / scale[0]), residual, cond


def band_charge(f, green, band=CHARGE_BAND):
    """Least-squares charge from the modes with ``band[0] <= |k|/k_max <= band[1]``.

    A smooth regular part has no weight there while the ``1/|x|`` singularity
    decays only like ``|k|^-2``, so the projection onto the Green profile
    isolates the charge.  Returns ``(charge, relative_residual)``.
    """
    grid = f.grid
    kmax = math.pi / grid.h
    kabs = np.sqrt(grid.k2)
    m = (kabs >= band[0] * kmax) & (kabs <= band[1] * kmax)
    F = fft(f.values)[m]
    G = fft(green.values)[m]
    gg = np.vdot(G, G).real
    if gg == 0.0:
        raise ChargeFitError("Green profile has no weight in the charge band")
    q = complex(np.vdot(G, F) / gg)
    fn = np.linalg.norm(F)
    residual = float(np.linalg.norm(F - q * G) / fn) if fn > 0 else 0.0
    return q, residual


def fit_charge(f, lambda_ref, flavor="free", v=None, coupling=None, band=CHARGE_BAND, shells=SHELLS,
               degree=SHELL_DEGREE, charge=None):
    """Split ``f`` into regular part and Green-function charge.

    Sampled flavors take the charge from :func:`band_charge` (unless ``charge``
    is given) and estimate ``regular(0)`` by a polynomial shell fit of
    ``f - q G`` that skips the origin node.  The lattice flavor uses the exact
    grid charge ``q = -g f(0)``.

    ``residual`` is the band misfit; ``shell_residual`` and ``condition``
    belong to the shell fit.
    """
    if flavor == "lattice":
        if coupling is None:
            raise FlavorMismatchError("lattice charge needs the coupling g")
        q = -coupling * f.at_origin() if charge is None else complex(charge)
        state = DecomposedState(f, 0.0, lambda_ref, "lattice", v, coupling)
        state = replace(state, charge=q, regular=f - q * state.green())
        return ChargeFit(state, state.regular.at_origin(), 0.0, 0.0, 1.0)
    proto = DecomposedState(f, 0.0, lambda_ref, flavor, v if flavor == "drift" else None)
    green = proto.green()
    if charge is None:
        q, residual = band_charge(f, green, band)
    else:
        q, residual = complex(charge), 0.0
    regular = f - q * green
    intercept, shell_residual, cond = shell_intercept(regular, shells, degree)
    return ChargeFit(replace(proto, charge=q, regular=regular), intercept, residual, shell_residual, cond)


def charge_extract(f, lambda_ref, flavor="free", v=None, coupling=None):
    return fit_charge(f, lambda_ref, flavor, v, coupling).state
