"""Periodic-box discretization of L^2(R^3).

The box ``[-L/2, L/2)^3`` is sampled on ``n`` points per axis with the origin
at array index ``(0, 0, 0)`` (FFT ordering, so coordinate ``x_j = h*j`` for
``j < n/2`` and ``h*(j - n)`` otherwise).  Spectral transforms use the
orthonormal DFT, hence the continuum inner product
``<f, g> = h^3 sum conj(f) g`` is the same number in both representations.
"""

import struct
import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft as sfft

from .errors import GridMismatchError

FFT_WORKERS = -1


@dataclass(frozen=True)
class GridSpec:
    n: int
    L: float

    def __post_init__(self):
        if self.n < 4 or self.n % 2:
            raise ValueError(f"n must be even and >= 4, got {self.n}")
        if not self.L > 0:
            raise ValueError(f"box length must be positive, got {self.L}")

    @property
    def h(self):
        return self.L / self.n

    @property
    def shape(self):
        return (self.n, self.n, self.n)

    @property
    def cell_volume(self):
        return self.h**3

    @cached_property
    def axis(self):
        """Signed coordinates along one axis, FFT ordered, in ``[-L/2, L/2)``."""
        return self.h * np.fft.fftfreq(self.n) * self.n

    @cached_property
    def wavenumbers(self):
        """``2 pi m / L`` for ``m`` in the symmetric range, FFT ordered."""
        return 2.0 * np.pi * np.fft.fftfreq(self.n) * self.n / self.L

    @cached_property
    def coords(self):
        """Tuple of broadcastable coordinate arrays (x, y, z)."""
        a = self.axis
        return (a[:, None, None], a[None, :, None], a[None, None, :])

    @cached_property
    def kvec(self):
        k = self.wavenumbers
        return (k[:, None, None], k[None, :, None], k[None, None, :])

    @cached_property
    def k2(self):
        kx, ky, kz = self.kvec
        return kx**2 + ky**2 + kz**2

    @cached_property
    def radius(self):
        x, y, z = self.coords
        return np.sqrt(x**2 + y**2 + z**2)

    def k_dot(self, a):
        a = np.asarray(a, dtype=float)
        kx, ky, kz = self.kvec
        return kx * a[0] + ky * a[1] + kz * a[2]

    def x_dot(self, a):
        a = np.asarray(a, dtype=float)
        x, y, z = self.coords
        return x * a[0] + y * a[1] + z * a[2]

    def points(self):
        """All grid points as an array of shape (n, n, n, 3)."""
        x, y, z = np.broadcast_arrays(*self.coords)
        return np.stack([x, y, z], axis=-1)


def _frozen(a):
    a = np.ascontiguousarray(a, dtype=complex)
    a.flags.writeable = False
    return a


class WaveField:
    """Complex field sampled on a :class:`GridSpec`; immutable."""

    __slots__ = ("values", "grid")

    def __init__(self, values, grid):
        values = np.asarray(values)
        if values.shape != grid.shape:
            raise GridMismatchError(f"values of shape {values.shape} do not fit grid {grid}")
        object.__setattr__(self, "values", _frozen(values))
        object.__setattr__(self, "grid", grid)

    def __setattr__(self, name, value):
        raise AttributeError("WaveField is immutable")

    def __repr__(self):
        return f"WaveField(n={self.grid.n}, L={self.grid.L}, norm={self.norm():.6g})"

    def _check(self, other):
        if self.grid != other.grid:
            raise GridMismatchError(f"{self.grid} vs {other.grid}")

    def __add__(self, other):
        self._check(other)
        return WaveField(self.values + other.values, self.grid)

    def __sub__(self, other):
        self._check(other)
        return WaveField(self.values - other.values, self.grid)

    def __mul__(self, c):
        return WaveField(self.values * complex(c), self.grid)

    __rmul__ = __mul__

    def __truediv__(self, c):
        return WaveField(self.values / complex(c), self.grid)

    def __neg__(self):
        return WaveField(-self.values, self.grid)

    def inner(self, other):
        """``<self, other>``, antilinear in ``self``."""
        self._check(other)
        return complex(np.vdot(self.values, other.values)) * self.grid.cell_volume

    def norm(self):
        return float(np.sqrt(np.vdot(self.values, self.values).real * self.grid.cell_volume))

    def at_origin(self):
        return complex(self.values[0, 0, 0])

    def conj(self):
        return WaveField(np.conj(self.values), self.grid)

    @classmethod
    def zeros(cls, grid):
        return cls(np.zeros(grid.shape, dtype=complex), grid)

    @classmethod
    def from_function(cls, grid, func):
        """Sample ``func(x, y, z)`` on broadcastable coordinate arrays."""
        vals = np.broadcast_to(func(*grid.coords), grid.shape)
        return cls(vals, grid)


class FourierField:
    """Orthonormal DFT coefficients of a :class:`WaveField`."""

    __slots__ = ("coeffs", "grid")

    def __init__(self, coeffs, grid):
        coeffs = np.asarray(coeffs)
        if coeffs.shape != grid.shape:
            raise GridMismatchError(f"coefficients of shape {coeffs.shape} do not fit grid {grid}")
        object.__setattr__(self, "coeffs", _frozen(coeffs))
        object.__setattr__(self, "grid", grid)

    def __setattr__(self, name, value):
        raise AttributeError("FourierField is immutable")

    def inner(self, other):
        if self.grid != other.grid:
            raise GridMismatchError(f"{self.grid} vs {other.grid}")
        return complex(np.vdot(self.coeffs, other.coeffs)) * self.grid.cell_volume


def fft(values):
    return sfft.fftn(values, norm="ortho", workers=FFT_WORKERS)


def ifft(coeffs):
    return sfft.ifftn(coeffs, norm="ortho", workers=FFT_WORKERS)


def spectral_forward(f):
    return FourierField(fft(f.values), f.grid)


def spectral_inverse(F):
    return WaveField(ifft(F.coeffs), F.grid)


def apply_multiplier(f, symbol):
    """Apply the Fourier multiplier ``symbol`` (array over modes) to ``f``."""
    return WaveField(ifft(symbol * fft(f.values)), f.grid)


def translate(f, y):
    """``psi(.) -> psi(. + y)``, exactly unitary for any (non grid-aligned) ``y``."""
    y = np.asarray(y, dtype=float)
    if not np.any(y):
        return f
    return apply_multiplier(f, np.exp(1j * f.grid.k_dot(y)))


def phase_v(f, v):
    """Multiply by ``exp(i v.x/2)`` with ``x`` the centered coordinate."""
    v = np.asarray(v, dtype=float)
    if not np.any(v):
        return f
    return WaveField(f.values * np.exp(0.5j * f.grid.x_dot(v)), f.grid)


def lattice_delta(grid):
    """Unit-mass lattice delta: ``1/h^3`` at the origin node, so ``<delta, f> = f(0)``."""
    vals = np.zeros(grid.shape, dtype=complex)
    vals[0, 0, 0] = 1.0 / grid.cell_volume
    return WaveField(vals, grid)


def lattice_delta_hat(grid):
    """Constant DFT coefficient of :func:`lattice_delta`."""
    return 1.0 / (grid.cell_volume * grid.n**1.5)


def boundary_fraction(f):
    """Largest modulus on the periodic seam planes relative to the peak modulus."""
    a = np.abs(f.values)
    peak = a.max()
    if peak == 0.0:
        return 0.0
    j = f.grid.n // 2
    seam = max(a[j, :, :].max(), a[:, j, :].max(), a[:, :, j].max())
    return float(seam / peak)


def gaussian_state(grid, center=(0.0, 0.0, 0.0), width=1.0, momentum=(0.0, 0.0, 0.0), tail_tol=1e-10):
    """Normalized ``exp(-|x - c|^2/(4 w^2) + i p.x)``.

    ``width`` is the position standard deviation of ``|psi|^2``.  Warns if the
    packet is not negligible on the periodic seam.
    """
    if not width > 0:
        raise ValueError("width must be positive")
    c = np.asarray(center, dtype=float)
    p = np.asarray(momentum, dtype=float)
    x, y, z = grid.coords
    r2 = (x - c[0]) ** 2 + (y - c[1]) ** 2 + (z - c[2]) ** 2
    vals = np.exp(-r2 / (4.0 * width**2))
    if np.any(p):
        vals = vals * np.exp(1j * grid.x_dot(p))
    f = WaveField(vals, grid)
    f = f / f.norm()
    frac = boundary_fraction(f)
    if frac > tail_tol:
        warnings.warn(f"gaussian tail on the periodic seam is {frac:.2e} (> {tail_tol:.0e})", stacklevel=2)
    return f


def random_smooth_field(grid, rng, n_bumps=3, width=(0.8, 1.6), spread=2.0):
    """Superposition of a few random complex Gaussian packets near the origin."""
    out = np.zeros(grid.shape, dtype=complex)
    x, y, z = grid.coords
    for _ in range(n_bumps):
        c = rng.uniform(-spread, spread, size=3)
        w = rng.uniform(*width)
        p = rng.normal(scale=0.5, size=3)
        amp = rng.normal() + 1j * rng.normal()
        r2 = (x - c[0]) ** 2 + (y - c[1]) ** 2 + (z - c[2]) ** 2
        out = out + amp * np.exp(-r2 / (4 * w * w) + 1j * (p[0] * x + p[1] * y + p[2] * z))
    return WaveField(out, grid)


# -- snapshot formats ---------------------------------------------------------

_MAGIC = b"MPFIELD1"
_HEADER = struct.Struct("<8sqd")


def write_field(path, f):
    """Flat little-endian binary: magic, int64 n, float64 L, then interleaved re/im doubles (C order)."""
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, f.grid.n, f.grid.L))
        fh.write(np.ascontiguousarray(f.values, dtype="<c16").tobytes())


def read_field(path):
    with open(path, "rb") as fh:
        magic, n, L = _HEADER.unpack(fh.read(_HEADER.size))
        if magic != _MAGIC:
            raise ValueError(f"{path}: not a field snapshot")
        data = np.frombuffer(fh.read(), dtype="<c16")
    grid = GridSpec(int(n), float(L))
    return WaveField(data.reshape(grid.shape), grid)


def write_slice_png(path, f, axis=2, index=0):
    """Save ``|psi|`` on the coordinate plane ``x_axis = coords[index]`` as a PNG."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plane = np.take(np.abs(f.values), index, axis=axis)
    plane = np.fft.fftshift(plane)
    plt.imsave(path, plane.T, origin="lower", cmap="viridis")
