"""Time integration of the spectral Navier-Stokes system.

The state advances according to

    d uhat / dt = -nu |k|^2 uhat - Bhat(u, u) + P fhat(t),

with the viscous part integrated exactly through the factor
exp(-nu |k|^2 dt) and the convection/forcing part treated by an explicit
Runge-Kutta scheme (classical RK4 by default, Heun's RK2 as the low-order
option).  Every accepted step appends L2/H1/H2 norms, the force inner
product, and trapezoidal running integrals to a :class:`NormTrace`.
"""

import io
import time as _time
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import _kernels
from .errors import ConfigurationError, GridMismatchError, NumericalBlowupError
from .spectral import (
    SpectralVelocity,
    leray_project,
    shear_field,
    sobolev_norm,
    to_physical,
)

TRACE_COLUMNS = ("t", "l2_sq", "h1_sq", "h2_sq", "f_dot_u", "int_h1_sq", "int_f_sq", "residual")


@dataclass(frozen=True)
class ForcingSpec:
    """Body force: zero, a steady field in V0, or a time-dependent generator."""

    kind: str
    steady_field: Optional[SpectralVelocity] = None
    generator: Optional[Callable[[float], SpectralVelocity]] = None

    @classmethod
    def zero(cls):
        return cls(kind="zero")

    @classmethod
    def steady(cls, f):
        f.validate()
        return cls(kind="steady", steady_field=f)

    @classmethod
    def time_dependent(cls, generator):
        return cls(kind="time_dependent", generator=generator)

    def at(self, t):
        """Force field at time t, or None for zero forcing."""
        if self.kind == "zero":
            return None
        if self.kind == "steady":
            return self.steady_field
        return self.generator(t)


def kolmogorov_forcing(grid, amplitude=1.0):
    """Steady single-mode forcing amplitude * (sin y, 0, 0)."""
    return ForcingSpec.steady(shear_field(grid, amplitude))


@dataclass(frozen=True)
class SolverConfig:
    nu: float
    dt: float
    t_end: float
    integrator: str = "if_rk4"
    dealias: bool = True
    cfl: Optional[float] = None
    blowup_h1_sq_ceiling: float = 1e12

    def __post_init__(self):
        if not self.nu > 0:
            raise ConfigurationError(f"viscosity must be positive, got {self.nu}")
        if not self.dt > 0:
            raise ConfigurationError(f"time step must be positive, got {self.dt}")
        if not self.t_end > 0:
            raise ConfigurationError(f"final time must be positive, got {self.t_end}")
        if self.integrator not in ("if_rk4", "if_rk2"):
            raise ConfigurationError(f"unknown integrator {self.integrator!r}")
        if self.dealias is not True:
            raise ConfigurationError("dealiasing is mandatory for this solver")
        if self.cfl is not None and not self.cfl > 0:
            raise ConfigurationError(f"cfl factor must be positive, got {self.cfl}")


@dataclass(frozen=True)
class NormTrace:
    """Norm time series of one run, immutable after construction.

    ``int_h1_sq`` and ``int_f_sq`` are trapezoidal running integrals of
    ``h1_sq`` and of the squared force norm ``f_sq``.
    """

    t: np.ndarray
    l2_sq: np.ndarray
    h1_sq: np.ndarray
    h2_sq: np.ndarray
    f_dot_u: np.ndarray
    f_sq: np.ndarray
    int_h1_sq: np.ndarray
    int_f_sq: np.ndarray
    nu: float

    def __post_init__(self):
        arrays = (self.t, self.l2_sq, self.h1_sq, self.h2_sq, self.f_dot_u,
                  self.f_sq, self.int_h1_sq, self.int_f_sq)
        n = len(self.t)
        if any(len(a) != n for a in arrays):
            raise GridMismatchError("trace arrays have mismatched lengths")
        if n > 1 and not np.all(np.diff(self.t) > 0):
            raise ConfigurationError("trace times must be strictly increasing")
        for name in ("l2_sq", "h1_sq", "h2_sq", "f_sq"):
            if np.any(getattr(self, name) < 0):
                raise ConfigurationError(f"trace column {name} has negative entries")
        for name in ("int_h1_sq", "int_f_sq"):
            vals = getattr(self, name)
            if n > 1 and np.any(np.diff(vals) < -1e-15 * (1 + abs(vals).max())):
                raise ConfigurationError(f"cumulative column {name} must not decrease")
        for a in arrays:
            a.setflags(write=False)

    def __len__(self):
        return len(self.t)

    def to_csv(self, path=None):
        """Serialize with the pinned header; returns the CSV text."""
        residual = energy_balance_residual(self) if len(self) >= 2 else np.zeros(len(self))
        buf = io.StringIO()
        buf.write(",".join(TRACE_COLUMNS) + "\n")
        cols = (self.t, self.l2_sq, self.h1_sq, self.h2_sq, self.f_dot_u,
                self.int_h1_sq, self.int_f_sq, residual)
        for row in zip(*cols):
            buf.write(",".join("%.17g" % v for v in row) + "\n")
        text = buf.getvalue()
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, path, nu):
        """Load a trace written by :meth:`to_csv`.

        The per-sample force norm is reconstructed from the slope of the
        running integral ``int_f_sq``.
        """
        with open(path) as fh:
            header = fh.readline().strip()
            if header != ",".join(TRACE_COLUMNS):
                raise ConfigurationError(f"{path}: unexpected trace header {header!r}")
            data = np.loadtxt(fh, delimiter=",", ndmin=2)
        if data.shape[1] != len(TRACE_COLUMNS):
            raise ConfigurationError(f"{path}: wrong column count")
        t = data[:, 0]
        f_sq = np.gradient(data[:, 6], t) if len(t) > 1 else np.zeros_like(t)
        f_sq = np.maximum(f_sq, 0.0)
        return cls(t=t, l2_sq=data[:, 1], h1_sq=data[:, 2], h2_sq=data[:, 3],
                   f_dot_u=data[:, 4], f_sq=f_sq, int_h1_sq=data[:, 5],
                   int_f_sq=data[:, 6], nu=nu)


@dataclass(frozen=True)
class SimulationResult:
    trace: NormTrace
    final_state: SpectralVelocity
    termination: str  # "completed" | "blowup"
    blowup_time: Optional[float]
    blowup_reason: Optional[str]
    wall_time_s: float


class _TraceBuilder:
    def __init__(self, nu):
        self.nu = nu
        self.rows = {name: [] for name in
                     ("t", "l2_sq", "h1_sq", "h2_sq", "f_dot_u", "f_sq")}
        self.int_h1_sq = []
        self.int_f_sq = []

    def append(self, t, l2_sq, h1_sq, h2_sq, f_dot_u, f_sq):
        r = self.rows
        if r["t"]:
            dt = t - r["t"][-1]
            self.int_h1_sq.append(self.int_h1_sq[-1] + 0.5 * dt * (r["h1_sq"][-1] + h1_sq))
            self.int_f_sq.append(self.int_f_sq[-1] + 0.5 * dt * (r["f_sq"][-1] + f_sq))
        else:
            self.int_h1_sq.append(0.0)
            self.int_f_sq.append(0.0)
        for name, value in zip(r, (t, l2_sq, h1_sq, h2_sq, f_dot_u, f_sq)):
            r[name].append(value)

    def build(self):
        r = {name: np.array(vals) for name, vals in self.rows.items()}
        return NormTrace(t=r["t"], l2_sq=r["l2_sq"], h1_sq=r["h1_sq"],
                         h2_sq=r["h2_sq"], f_dot_u=r["f_dot_u"], f_sq=r["f_sq"],
                         int_h1_sq=np.array(self.int_h1_sq),
                         int_f_sq=np.array(self.int_f_sq), nu=self.nu)


class _Stepper:
    """Integrating-factor Runge-Kutta stepper bound to one grid and config."""

    def __init__(self, grid, forcing, config):
        self.grid = grid
        self.forcing = forcing
        self.config = config
        self._exp_cache = {}
        from .spectral import _convection_spectrum  # local alias, hot path
        self._convection = _convection_spectrum

    def _factors(self, dt):
        cached = self._exp_cache.get(dt)
        if cached is None:
            lam = self.config.nu * self.grid.ksq
            cached = (np.exp(-lam * dt), np.exp(-lam * (0.5 * dt)))
            if len(self._exp_cache) > 8:
                self._exp_cache.clear()
            self._exp_cache[dt] = cached
        return cached

    def force_spectrum(self, t):
        f = self.forcing.at(t)
        if f is None:
            return None
        if f.grid != self.grid:
            raise GridMismatchError("forcing grid does not match the state grid")
        fhat = f.coefficients * self.grid.dealias_mask
        if self.forcing.kind == "time_dependent":
            fhat = leray_project(fhat, self.grid).coefficients
        return fhat

    def rhs(self, coeffs, t):
        """Convection + projected forcing; the stiff viscous part is exact."""
        out = -self._convection(coeffs, self.grid)
        out = leray_project(out, self.grid).coefficients.copy()
        fhat = self.force_spectrum(t)
        if fhat is not None:
            out += fhat
        return out

    def step(self, coeffs, t, dt):
        e_full, e_half = self._factors(dt)
        if self.config.integrator == "if_rk4":
            n1 = self.rhs(coeffs, t)
            u2 = e_half * (coeffs + (0.5 * dt) * n1)
            n2 = self.rhs(u2, t + 0.5 * dt)
            u3 = e_half * coeffs + (0.5 * dt) * n2
            n3 = self.rhs(u3, t + 0.5 * dt)
            u4 = e_full * coeffs + dt * e_half * n3
            n4 = self.rhs(u4, t + dt)
            return e_full * coeffs + (dt / 6.0) * (
                e_full * n1 + 2.0 * e_half * (n2 + n3) + n4
            )
        n1 = self.rhs(coeffs, t)
        u2 = e_full * (coeffs + dt * n1)
        n2 = self.rhs(u2, t + dt)
        return e_full * coeffs + (0.5 * dt) * (e_full * n1 + n2)

    def cfl_dt(self, coeffs):
        if self.config.cfl is None:
            return self.config.dt
        speed = float(np.abs(to_physical(SpectralVelocity(self.grid, coeffs.copy())).samples).max())
        if speed == 0.0:
            return self.config.dt
        dx = self.grid.length / self.grid.n
        return min(self.config.dt, self.config.cfl * dx / speed)


def step(u, forcing, t, dt, config):
    """Advance one step of length dt from time t; returns the new state.

    Raises :class:`NumericalBlowupError` (carrying t as the last valid time)
    if the step produces non-finite coefficients.
    """
    if dt <= 0:
        raise ConfigurationError(f"step size must be positive, got {dt}")
    stepper = _Stepper(u.grid, forcing, config)
    new = stepper.step(u.coefficients, t, dt)
    if not np.all(np.isfinite(new)):
        raise NumericalBlowupError(
            f"non-finite coefficients after step from t={t:g}", last_valid_time=t
        )
    return SpectralVelocity(u.grid, np.ascontiguousarray(new))


def _sample(grid, coeffs, fhat):
    state = SpectralVelocity(grid, coeffs)
    l2_sq = sobolev_norm(state, 0) ** 2
    h1_sq = sobolev_norm(state, 1) ** 2
    h2_sq = sobolev_norm(state, 2) ** 2
    if fhat is None:
        f_dot_u = 0.0
        f_sq = 0.0
    else:
        f_dot_u = float(grid.volume * np.vdot(fhat, coeffs).real)
        f_sq = float(grid.volume * _kernels.weighted_spectral_sum(fhat, grid.ksq, 0.0))
    return l2_sq, h1_sq, h2_sq, f_dot_u, f_sq


def _check_invariants(grid, coeffs, t):
    peak = float(np.abs(coeffs).max())
    if peak == 0.0:
        return
    if float(np.abs(coeffs[:, 0, 0, 0]).max()) > 1e-12 * peak:
        raise RuntimeError(f"zero-mean invariant violated at t={t:g}")
    div = (
        grid.kx[:, None, None] * coeffs[0]
        + grid.kx[None, :, None] * coeffs[1]
        + grid.kx[None, None, :] * coeffs[2]
    )
    kmax = grid.scale * grid.n / 2.0 * np.sqrt(3.0)
    if float(np.abs(div).max()) > 1e-10 * peak * kmax:
        raise RuntimeError(f"divergence-free invariant violated at t={t:g}")


def simulate(u0, forcing, config):
    """Integrate to ``config.t_end`` (or numerical blowup), tracing norms.

    Blowup is a reported outcome: the result carries the trace up to the
    last finite state and ``termination == "blowup"``.
    """
    u0.validate()
    start = _time.perf_counter()
    grid = u0.grid
    stepper = _Stepper(grid, forcing, config)
    builder = _TraceBuilder(config.nu)

    coeffs = np.array(u0.coefficients, copy=True)
    t = 0.0
    builder.append(t, *_sample(grid, coeffs, stepper.force_spectrum(t)))

    termination = "completed"
    blowup_time = None
    blowup_reason = None
    t_end = config.t_end
    while t < t_end * (1.0 - 1e-12):
        dt = min(stepper.cfl_dt(coeffs), t_end - t)
        with np.errstate(over="ignore", invalid="ignore"):
            new = stepper.step(coeffs, t, dt)
        t_new = t + dt
        if not np.all(np.isfinite(new)):
            termination = "blowup"
            blowup_time = t
            blowup_reason = "non-finite coefficients"
            break
        _check_invariants(grid, new, t_new)
        fhat = stepper.force_spectrum(t_new)
        l2_sq, h1_sq, h2_sq, f_dot_u, f_sq = _sample(grid, new, fhat)
        if h1_sq > config.blowup_h1_sq_ceiling:
            termination = "blowup"
            blowup_time = t
            blowup_reason = "h1_sq ceiling exceeded"
            break
        coeffs = new
        t = t_new
        builder.append(t, l2_sq, h1_sq, h2_sq, f_dot_u, f_sq)

    state = SpectralVelocity(grid, np.ascontiguousarray(coeffs))
    return SimulationResult(
        trace=builder.build(),
        final_state=state,
        termination=termination,
        blowup_time=blowup_time,
        blowup_reason=blowup_reason,
        wall_time_s=_time.perf_counter() - start,
    )


def energy_balance_residual(trace):
    """Residual of the energy identity along a trace.

    r(t_i) = 0.5 * d/dt l2_sq + nu * h1_sq - (f, u), with centered
    differences on interior samples and one-sided at the ends.  A solver
    that integrates correctly keeps r at the discretization-error level.
    """
    if len(trace) < 2:
        raise GridMismatchError("residual needs at least two trace samples")
    edge = 2 if len(trace) > 2 else 1
    dzdt = np.gradient(trace.l2_sq, trace.t, edge_order=edge)
    return 0.5 * dzdt + trace.nu * trace.h1_sq - trace.f_dot_u
