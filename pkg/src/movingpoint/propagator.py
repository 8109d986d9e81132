"""Time evolution with a moving point interaction.

The state is advanced in the comoving frame, where the interaction sits at
the origin and the generator is ``H_{v(t)} + g(v(t)) delta<delta, .>``.  Each
step is the Cayley transform of that generator frozen at the step midpoint,
so it is exactly unitary and a step with ``-dt`` inverts a step with ``dt``.
Lab-frame states are ``psi_lab(t) = T_t^{-1} psi_comoving(t)`` with
``T_t = translate(., y(t))``.

Times live on the step lattice ``t_start + k dt``; evolutions between
lattice times run forward or backward.
"""

import csv
import json
import math
import os
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.interpolate import CubicSpline

from . import forms, kernels
from .errors import MisalignedTimeError
from .grid import GridSpec, WaveField, boundary_fraction, fft, ifft, translate, write_field
from .hamiltonian import DriftHamiltonian, PointInteractionOperator, renormalize_coupling

ALIGN_TOL = 1e-9
TRACE_COLUMNS = ("t", "norm", "form_energy", "q_re", "q_im", "weak_residual", "fit_residual")


# -- trajectories --------------------------------------------------------------


@dataclass(frozen=True)
class Trajectory:
    """Center ``y(t)`` and its velocity.

    Presets (``line``, ``circle``, ``sinusoid``, ``stationary``) have
    closed-form velocities; ``spline`` interpolates sampled positions with a
    cubic spline and uses its derivative.
    """

    kind: str
    params: dict = field(default_factory=dict)
    smoothness: str = "C3"

    def __post_init__(self):
        if self.kind not in ("line", "circle", "sinusoid", "stationary", "spline"):
            raise ValueError(f"unknown trajectory kind {self.kind!r}")
        if self.kind == "spline":
            object.__setattr__(self, "smoothness", "C2")
            object.__setattr__(self, "_spline", _build_spline(self.params))

    def _vec(self, key, default=(0.0, 0.0, 0.0)):
        return np.asarray(self.params.get(key, default), dtype=float)

    def position(self, t):
        p, k = self.params, self.kind
        if k == "stationary":
            return self._vec("center")
        if k == "line":
            return self._vec("start") + t * self._vec("velocity")
        if k == "circle":
            R, w, ph = p["radius"], p["omega"], p.get("phase", 0.0)
            return self._vec("center") + R * np.array([math.cos(w * t + ph), math.sin(w * t + ph), 0.0])
        if k == "sinusoid":
            return self._vec("center") + self._vec("amplitude") * math.sin(p["omega"] * t)
        return np.asarray(self._spline(t), dtype=float)

    def velocity(self, t):
        p, k = self.params, self.kind
        if k == "stationary":
            return self._vec("velocity")
        if k == "line":
            return self._vec("velocity")
        if k == "circle":
            R, w, ph = p["radius"], p["omega"], p.get("phase", 0.0)
            return R * w * np.array([-math.sin(w * t + ph), math.cos(w * t + ph), 0.0])
        if k == "sinusoid":
            return self._vec("amplitude") * p["omega"] * math.cos(p["omega"] * t)
        return np.asarray(self._spline(t, 1), dtype=float)

    def to_dict(self):
        params = {k: (list(v) if isinstance(v, (list, tuple, np.ndarray)) else v) for k, v in self.params.items()}
        return {"kind": self.kind, "params": params, "smoothness": self.smoothness}


def _build_spline(params):
    times = np.asarray(params["times"], dtype=float)
    points = np.asarray(params["points"], dtype=float)
    if points.shape != (times.size, 3) or times.size < 4:
        raise ValueError("spline needs >= 4 samples of 3-vectors")
    if np.any(np.diff(times) <= 0):
        raise ValueError("spline times must increase")
    # A kink in the samples shows up as a third difference comparable to the
    # first differences; the spline is C2 anyway, but its velocity is not smooth.
    d1 = np.abs(np.diff(points, axis=0)).max()
    d3 = np.abs(np.diff(points, n=3, axis=0)).max()
    if d1 > 0 and d3 > 0.5 * d1:
        warnings.warn(f"spline samples look rough (third/first difference ratio {d3 / d1:.2f})", stacklevel=3)
    return CubicSpline(times, points, axis=0)


def line(velocity, start=(0.0, 0.0, 0.0)):
    return Trajectory("line", {"velocity": list(velocity), "start": list(start)})


def circle(radius, omega, center=(0.0, 0.0, 0.0), phase=0.0):
    return Trajectory("circle", {"radius": radius, "omega": omega, "center": list(center), "phase": phase})


def sinusoid(amplitude, omega, center=(0.0, 0.0, 0.0)):
    return Trajectory("sinusoid", {"amplitude": list(amplitude), "omega": omega, "center": list(center)})


def stationary(velocity=(0.0, 0.0, 0.0), center=(0.0, 0.0, 0.0)):
    """Fixed center with a constant comoving drift ``velocity`` (a Galilean frame at rest)."""
    return Trajectory("stationary", {"velocity": list(velocity), "center": list(center)})


def spline(times, points):
    return Trajectory("spline", {"times": list(times), "points": [list(p) for p in points]})


# -- configuration -------------------------------------------------------------


@dataclass(frozen=True)
class PropagatorConfig:
    grid: GridSpec
    alpha: float
    trajectory: Trajectory
    t_start: float = 0.0
    t_end: float = 1.0
    dt: float = 1e-3
    stride: int = 10
    lambda_star: float | None = None
    tail_tol: float = 1e-6

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.stride < 1:
            raise ValueError("checkpoint stride must be a positive number of steps")
        steps = (self.t_end - self.t_start) / self.dt
        if steps < 0 or abs(steps - round(steps)) > ALIGN_TOL * max(1.0, abs(steps)):
            raise MisalignedTimeError(f"(t_end - t_start)/dt = {steps} is not a whole number of steps")

    @property
    def n_steps(self):
        return int(round((self.t_end - self.t_start) / self.dt))

    def step_index(self, t):
        k = (t - self.t_start) / self.dt
        if abs(k - round(k)) > ALIGN_TOL * max(1.0, abs(k)):
            raise MisalignedTimeError(f"t = {t} is not on the step lattice")
        return int(round(k))

    def time(self, k):
        return self.t_start + k * self.dt

    def coupling(self, t):
        return renormalize_coupling(self.alpha, self.trajectory.velocity(t), self.grid, self.lambda_star)

    def operator(self, t):
        return PointInteractionOperator.calibrated(self.alpha, self.trajectory.velocity(t), self.grid, self.lambda_star)

    def to_dict(self):
        return {
            "n": self.grid.n,
            "L": self.grid.L,
            "alpha": None if kernels.is_decoupled(self.alpha) else self.alpha,
            "trajectory": self.trajectory.to_dict(),
            "t_start": self.t_start,
            "t_end": self.t_end,
            "dt": self.dt,
            "stride": self.stride,
            "lambda_star": self.lambda_star,
            "tail_tol": self.tail_tol,
        }


# -- stepping ------------------------------------------------------------------


@lru_cache(maxsize=16)
def _step_kernel(grid, alpha, vkey, lambda_star, dt):
    """Pieces of ``(I + i dt/2 H)^{-1}`` for one frozen generator."""
    P = PointInteractionOperator.calibrated(alpha, np.array(vkey), grid, lambda_star)
    lam = -2j / dt
    denom = P.base._denominator(lam)
    if P.decoupled:
        return denom, None, None
    return denom, P.base.green_field(lam).values, P.gamma_d(lam)


def comoving_step(psi, t, dt, cfg):
    """One Cayley step from ``t`` to ``t + dt`` (``dt`` may be negative)."""
    v = cfg.trajectory.velocity(t + 0.5 * dt)
    denom, green, gamma = _step_kernel(cfg.grid, cfg.alpha, tuple(float(c) for c in v), cfg.lambda_star, float(dt))
    u = ifft(fft(psi.values) / denom)
    if green is not None:
        u = u + (u[0, 0, 0] / gamma) * green
    # (I + i tau H)^{-1} = (-2i/dt) K(-2i/dt)
    return WaveField((-4j / dt) * u - psi.values, psi.grid)


@dataclass
class EvolutionResult:
    """Checkpointed evolution; ``comoving`` holds the comoving-frame fields."""

    cfg: PropagatorConfig
    times: list
    comoving: list
    norms: list
    charges: list
    frame: str = "comoving"

    def field(self, i, frame=None):
        frame = frame or self.frame
        psi = self.comoving[i]
        if frame == "lab":
            return translate(psi, -self.cfg.trajectory.position(self.times[i]))
        return psi

    @property
    def fields(self):
        return [self.field(i) for i in range(len(self.times))]

    @property
    def final(self):
        return self.field(len(self.times) - 1)

    def index(self, t):
        k = self.cfg.step_index(t)
        for i, s in enumerate(self.times):
            if self.cfg.step_index(s) == k:
                return i
        raise MisalignedTimeError(f"t = {t} is not a checkpoint")


def _charge(cfg, t, psi):
    return -cfg.coupling(t) * psi.at_origin()


def evolve_comoving(psi0, s, t, cfg, stride=None):
    """Evolve the comoving-frame state ``psi0`` from ``s`` to ``t`` (either direction)."""
    k0, k1 = cfg.step_index(s), cfg.step_index(t)
    stride = cfg.stride if stride is None else stride
    direction = 1 if k1 >= k0 else -1
    dt = direction * cfg.dt
    psi = psi0
    times, fields = [cfg.time(k0)], [psi]
    for j in range(abs(k1 - k0)):
        psi = comoving_step(psi, cfg.time(k0 + direction * j), dt, cfg)
        if (j + 1) % stride == 0 or j + 1 == abs(k1 - k0):
            times.append(cfg.time(k0 + direction * (j + 1)))
            fields.append(psi)
    norms = [f.norm() for f in fields]
    charges = [_charge(cfg, tt, f) for tt, f in zip(times, fields)]
    return EvolutionResult(cfg, times, fields, norms, charges, "comoving")


def evolve_lab(psi0, s, t, cfg, stride=None):
    """``U_{t,s} psi0 = T_t^{-1} U~_{t,s} T_s psi0`` for a lab-frame ``psi0``."""
    start = translate(psi0, cfg.trajectory.position(cfg.time(cfg.step_index(s))))
    res = evolve_comoving(start, s, t, cfg, stride)
    res.frame = "lab"
    # The box is periodic in comoving coordinates, so wrap-around is judged there.
    # Lattice eigenstates carry a small stationary seam ringing; only growth counts.
    initial = boundary_fraction(res.comoving[0])
    worst = max(boundary_fraction(f) for f in res.comoving)
    if worst > max(cfg.tail_tol, 10.0 * initial):
        warnings.warn(f"evolved state reaches the periodic seam (fraction {worst:.2e})", stacklevel=2)
    return res


# -- diagnostics -----------------------------------------------------------------


def lattice_decomposition(cfg, t, psi, lambda_ref=None):
    """Lab-form decomposition of a comoving field: lattice flavor, no drift, coupling ``g(v(t))``."""
    lam = _lambda_ref(cfg, t) if lambda_ref is None else lambda_ref
    g = cfg.coupling(t)
    if g == 0.0:
        return forms.DecomposedState(psi, 0.0, lam, "free")
    return forms.fit_charge(psi, lam, "lattice", None, g).state


def _lambda_ref(cfg, t):
    return 1.0 + kernels.speed_squared(cfg.trajectory.velocity(t)) / 4.0


def _as_phi(phi, d_psi):
    if phi.lambda_ref != d_psi.lambda_ref:
        phi = forms.change_lambda(phi, d_psi.lambda_ref)
    if d_psi.flavor == "free":
        if phi.charge != 0:
            raise ValueError("charged test state paired with a decoupled evolution")
        return forms.DecomposedState(phi.regular, 0.0, d_psi.lambda_ref, "free")
    return forms.convert(phi, "lattice", np.zeros(3), d_psi.coupling)


def _lab_form(cfg, t, psi, phi, method):
    if method == "lattice":
        d_psi = lattice_decomposition(cfg, t, psi)
        d_phi = _as_phi(phi, d_psi)
    elif method == "fit":
        lam = _lambda_ref(cfg, t)
        d_psi = forms.charge_extract(psi, lam)
        d_phi = forms.convert(forms.change_lambda(phi, lam), "free", np.zeros(3))
    else:
        raise ValueError(f"unknown decomposition method {method!r}")
    return forms.form_f_alpha0(cfg.alpha, d_psi, d_phi)


def weak_equation_residual(result, phi, t, method="lattice"):
    """``| -i d/dt <psi_t, phi> - F_{alpha, y(t)}(psi_t, phi) |`` by central differences.

    ``phi`` is a :class:`~movingpoint.forms.DecomposedState` in comoving
    coordinates at time ``t`` (centered on the interaction); it is held
    fixed in the lab frame.  The difference step is the checkpoint spacing.
    ``method="lattice"`` decomposes ``psi_t`` against the lattice Green
    function of the grid generator, ``"fit"`` uses :func:`forms.charge_extract`.
    """
    i = result.index(t)
    if i == 0 or i == len(result.times) - 1:
        raise MisalignedTimeError("weak residual needs an interior checkpoint")
    tm, tp = result.times[i - 1], result.times[i + 1]
    delta = tp - result.times[i]
    if not math.isclose(result.times[i] - tm, delta, rel_tol=1e-9):
        raise MisalignedTimeError("checkpoints around t are not equally spaced")
    cfg = result.cfg
    phi_lab = translate(forms.assemble(phi), -cfg.trajectory.position(result.times[i]))
    plus = result.field(i + 1, "lab").inner(phi_lab)
    minus = result.field(i - 1, "lab").inner(phi_lab)
    lhs = -1j * (plus - minus) / (2.0 * delta)
    rhs = _lab_form(cfg, result.times[i], result.comoving[i], phi, method)
    return abs(lhs - rhs)


def form_energy_trace(result, method="lattice"):
    """``(t, F_{alpha, y(t)}(psi_t, psi_t))`` at every checkpoint."""
    cfg = result.cfg
    out = []
    for t, psi in zip(result.times, result.comoving):
        d = lattice_decomposition(cfg, t, psi) if method == "lattice" else forms.charge_extract(psi, _lambda_ref(cfg, t))
        out.append((t, forms.form_f_alpha0(cfg.alpha, d, d).real))
    return out


def increment_constant(trace):
    """Smallest ``C`` with ``|F(t_{i+1}) - F(t_i)| <= C (t_{i+1} - t_i)``."""
    if len(trace) < 2:
        return 0.0
    return max(abs(b[1] - a[1]) / abs(b[0] - a[0]) for a, b in zip(trace, trace[1:]))


def fit_residual_trace(result):
    """Shell-fit residual of the sampled drift-flavor charge extraction at each checkpoint."""
    cfg = result.cfg
    out = []
    for t, psi in zip(result.times, result.comoving):
        v = cfg.trajectory.velocity(t)
        fit = forms.fit_charge(psi, _lambda_ref(cfg, t), "drift", v)
        out.append(fit.shell_residual)
    return out


def chapman_kolmogorov_defect(cfg, s, r, t, psi0):
    """``|| U_{t,r} U_{r,s} psi0 - U_{t,s} psi0 ||`` for lab-frame propagators."""
    for x in (s, r, t):
        cfg.step_index(x)
    mid = evolve_lab(psi0, s, r, cfg).final
    two = evolve_lab(mid, r, t, cfg).final
    one = evolve_lab(psi0, s, t, cfg).final
    return (two - one).norm()


def time_reversal_defect(cfg, s, t, psi0):
    """``|| U_{s,t} U_{t,s} psi0 - psi0 ||``."""
    there = evolve_lab(psi0, s, t, cfg).final
    back = evolve_lab(there, t, s, cfg).final
    return (back - psi0).norm()


def tilde_domain_diagnostic(result, t, lambda_ref=None):
    """Operator-domain consistency of ``psi_t`` with the continuum boundary condition.

    In the comoving frame the state is split against the drifted lattice
    Green function at ``lambda_ref`` (default ``lambda* + 1``), giving the
    charge ``q`` and the regular value ``a = psi_lam(0)``.  Returns
    ``|q - a/Gamma| / (|q| + |a/Gamma|)`` with the continuum
    ``Gamma = Gamma_{v(t), alpha}(lambda_ref)``; 0 when both vanish.
    """
    cfg = result.cfg
    i = result.index(t)
    psi = result.comoving[i]
    v = cfg.trajectory.velocity(result.times[i])
    P = cfg.operator(result.times[i])
    if P.decoupled:
        return 0.0
    lam = (P.lambda_star + 1.0) if lambda_ref is None else lambda_ref
    fit = forms.fit_charge(psi, lam, "lattice", v, P.coupling)
    q, a = fit.state.charge, fit.intercept
    ratio = a / kernels.gamma_v_alpha(cfg.alpha, v, lam)
    denom = abs(q) + abs(ratio)
    return 0.0 if denom == 0.0 else abs(q - ratio) / denom


def stationary_eigenstate(cfg, t=None):
    """Normalized comoving bound state of the generator at ``t`` and its grid eigenvalue."""
    from .spectrum import discrete_bound_state

    P = cfg.operator(cfg.t_start if t is None else t)
    return discrete_bound_state(P)


# -- persistence -----------------------------------------------------------------


def _fmt(x):
    return "nan" if x is None or (isinstance(x, float) and math.isnan(x)) else format(float(x), ".17g")


def trace_rows(result, with_weak=True):
    """Rows of :data:`TRACE_COLUMNS`; the weak residual pairs ``psi_t`` with itself."""
    cfg = result.cfg
    energies = form_energy_trace(result)
    fits = fit_residual_trace(result)
    rows = []
    for i, t in enumerate(result.times):
        weak = float("nan")
        interior = 0 < i < len(result.times) - 1
        if with_weak and interior:
            d = lattice_decomposition(cfg, t, result.comoving[i])
            weak = weak_equation_residual(result, d, t)
        q = result.charges[i]
        rows.append((t, result.norms[i], energies[i][1], q.real, q.imag, weak, fits[i]))
    return rows


def save_result(result, directory, snapshots=True):
    """Write ``config.json``, ``traces.csv`` and binary field snapshots into ``directory``."""
    os.makedirs(directory, exist_ok=True)
    with open(os.path.join(directory, "config.json"), "w") as fh:
        json.dump({"frame": result.frame, **result.cfg.to_dict()}, fh, indent=2, sort_keys=True)
    rows = trace_rows(result)
    with open(os.path.join(directory, "traces.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_COLUMNS)
        for row in rows:
            w.writerow([_fmt(x) for x in row])
    if snapshots:
        for i in range(len(result.times)):
            write_field(os.path.join(directory, f"field_{i:05d}.bin"), result.field(i))
    return rows


def free_evolution(psi0, s, t, cfg):
    """Closed-form decoupled lab evolution: product of Cayley factors with the drift undone.

    The comoving multiplier for each step is the Cayley factor of
    ``s(k) = |k|^2 - v.k`` at the step midpoint; translations contribute
    ``exp(i k.(y(s) - y(t)))``.
    """
    grid = cfg.grid
    k0, k1 = cfg.step_index(s), cfg.step_index(t)
    direction = 1 if k1 >= k0 else -1
    dt = direction * cfg.dt
    mult = np.ones(grid.shape, dtype=complex)
    for j in range(abs(k1 - k0)):
        v = cfg.trajectory.velocity(cfg.time(k0 + direction * j) + 0.5 * dt)
        sym = DriftHamiltonian(grid, v).symbol
        mult *= (1.0 - 0.5j * dt * sym) / (1.0 + 0.5j * dt * sym)
    shift = cfg.trajectory.position(cfg.time(k0)) - cfg.trajectory.position(cfg.time(k1))
    mult *= np.exp(1j * grid.k_dot(shift))
    return WaveField(ifft(mult * fft(psi0.values)), grid)
