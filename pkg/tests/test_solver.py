"""Tests for the integrating-factor time stepper and trace machinery."""

import math

import numpy as np
import pytest

from nsreg import (
    ConfigurationError,
    ForcingSpec,
    NormTrace,
    SolverConfig,
    SpectralVelocity,
    energy_balance_residual,
    inner_product,
    kolmogorov_forcing,
    leray_project,
    make_wavegrid,
    random_divfree_field,
    shear_field,
    simulate,
    sobolev_norm,
    step,
)
from nsreg.errors import GridMismatchError


def zero_field(grid):
    n = grid.n
    return SpectralVelocity(grid, np.zeros((3, n, n, n), dtype=np.complex128))


def forced_shear(grid, nu=1.0):
    """Time-dependent forcing whose exact solution is sin(t) * (sin y, 0, 0)."""

    def gen(t):
        return shear_field(grid, math.cos(t) + nu * math.sin(t))

    return ForcingSpec.time_dependent(gen)


# ------------------------------------------------------------------ config

def test_config_validation():
    with pytest.raises(ConfigurationError):
        SolverConfig(nu=0.0, dt=1e-3, t_end=1.0)
    with pytest.raises(ConfigurationError):
        SolverConfig(nu=1.0, dt=-1e-3, t_end=1.0)
    with pytest.raises(ConfigurationError):
        SolverConfig(nu=1.0, dt=1e-3, t_end=0.0)
    with pytest.raises(ConfigurationError):
        SolverConfig(nu=1.0, dt=1e-3, t_end=1.0, integrator="euler")
    with pytest.raises(ConfigurationError):
        SolverConfig(nu=1.0, dt=1e-3, t_end=1.0, dealias=False)


def test_steady_forcing_must_be_solenoidal(grid8):
    n = grid8.n
    raw = np.zeros((3, n, n, n), dtype=np.complex128)
    raw[0, 1, 0, 0] = 1.0  # pure gradient mode
    raw[0, n - 1, 0, 0] = 1.0
    with pytest.raises(ValueError):
        ForcingSpec.steady(SpectralVelocity(grid8, raw))


# ------------------------------------------------------------------- step

def test_single_step_shear_decay(grid16):
    cfg = SolverConfig(nu=1.0, dt=1e-2, t_end=1.0)
    u = shear_field(grid16, 1.0)
    out = step(u, ForcingSpec.zero(), 0.0, cfg.dt, cfg)
    expected = math.exp(-cfg.dt)
    ratio = sobolev_norm(out, 0) / sobolev_norm(u, 0)
    assert ratio == pytest.approx(expected, rel=1e-12)


def test_step_from_rest_linearizes_forcing(grid16):
    dt = 1e-3
    cfg = SolverConfig(nu=1.0, dt=dt, t_end=1.0)
    f = kolmogorov_forcing(grid16, 2.0)
    out = step(zero_field(grid16), f, 0.0, dt, cfg)
    lead = dt * f.steady_field.coefficients
    err = np.abs(out.coefficients - lead).max()
    assert err <= 10.0 * dt**2 * np.abs(f.steady_field.coefficients).max()


def test_step_rejects_nonpositive_dt(grid8):
    cfg = SolverConfig(nu=1.0, dt=1e-3, t_end=1.0)
    with pytest.raises(ConfigurationError):
        step(shear_field(grid8), ForcingSpec.zero(), 0.0, 0.0, cfg)


# ---------------------------------------------------------------- simulate

def test_shear_exact_decay(grid16):
    cfg = SolverConfig(nu=1.0, dt=1e-3, t_end=1.0)
    res = simulate(shear_field(grid16, 1.0), ForcingSpec.zero(), cfg)
    assert res.termination == "completed"
    ratio = res.trace.l2_sq[-1] / res.trace.l2_sq[0]
    assert ratio == pytest.approx(math.exp(-2.0), rel=1e-6)


def test_zero_initial_zero_forcing(grid8):
    cfg = SolverConfig(nu=1.0, dt=1e-2, t_end=0.1)
    res = simulate(zero_field(grid8), ForcingSpec.zero(), cfg)
    assert res.trace.l2_sq.max() == 0.0
    assert res.trace.h1_sq.max() == 0.0
    assert res.trace.f_dot_u.max() == 0.0


def test_kolmogorov_steady_state(grid16):
    nu = 1.0
    f = kolmogorov_forcing(grid16, 1.0)
    u0 = shear_field(grid16, 1.0 / nu)
    cfg = SolverConfig(nu=nu, dt=1e-3, t_end=0.2)
    res = simulate(u0, f, cfg)
    drift = abs(res.trace.l2_sq[-1] - res.trace.l2_sq[0]) / res.trace.l2_sq[0]
    assert drift <= 1e-10


def test_energy_nonincreasing_without_forcing(grid16):
    u0 = random_divfree_field(grid16, 4, -2.0, 1.0)
    cfg = SolverConfig(nu=0.5, dt=2e-3, t_end=0.3)
    res = simulate(u0, ForcingSpec.zero(), cfg)
    l2 = res.trace.l2_sq
    assert np.all(np.diff(l2) <= 1e-12 * l2[0])


def test_invariants_preserved_along_run(grid16):
    u0 = random_divfree_field(grid16, 8, -2.0, 2.0)
    cfg = SolverConfig(nu=0.2, dt=2e-3, t_end=0.1)
    res = simulate(u0, ForcingSpec.zero(), cfg)
    res.final_state.validate()


@pytest.mark.parametrize("integrator,factor", [("if_rk4", 12.0), ("if_rk2", 3.9)])
def test_temporal_convergence_order(grid8, integrator, factor):
    # pure shear decay is integrated exactly by the viscous factor, so the
    # order study drives the Runge-Kutta slot with a forced shear flow whose
    # exact solution is sin(t) * (sin y, 0, 0)
    nu = 1.0
    exact = shear_field(grid8, math.sin(0.5))
    errs = []
    for dt in (0.02, 0.01):
        cfg = SolverConfig(nu=nu, dt=dt, t_end=0.5, integrator=integrator)
        res = simulate(zero_field(grid8), forced_shear(grid8, nu), cfg)
        errs.append(np.abs(res.final_state.coefficients - exact.coefficients).max())
    assert errs[0] / errs[1] >= factor


def test_blowup_reported_not_raised(grid8):
    u0 = random_divfree_field(grid8, 2, -2.0, 100.0)
    cfg = SolverConfig(nu=1e-6, dt=0.1, t_end=10.0, blowup_h1_sq_ceiling=1e8)
    res = simulate(u0, ForcingSpec.zero(), cfg)
    assert res.termination in ("completed", "blowup")
    if res.termination == "blowup":
        assert res.blowup_time is not None
        assert res.blowup_time >= 0.0
    assert np.all(np.isfinite(res.trace.l2_sq))  # trace holds the valid prefix


def test_cfl_controller_caps_step(grid16):
    u0 = random_divfree_field(grid16, 4, -2.0, 5.0)
    cfg = SolverConfig(nu=1.0, dt=0.5, t_end=0.5, cfl=0.5)
    res = simulate(u0, ForcingSpec.zero(), cfg)
    dts = np.diff(res.trace.t)
    dx = grid16.length / grid16.n
    assert dts.max() < 0.5  # nominal dt was cut down
    assert dts.min() > 0.0


def test_final_time_hit_exactly(grid8):
    cfg = SolverConfig(nu=1.0, dt=3e-3, t_end=0.01)  # not a multiple of dt
    res = simulate(shear_field(grid8, 1.0), ForcingSpec.zero(), cfg)
    assert res.trace.t[-1] == pytest.approx(0.01, abs=1e-15)


# ------------------------------------------------------------ energy balance

def test_energy_residual_shear(grid16):
    cfg = SolverConfig(nu=1.0, dt=1e-3, t_end=1.0)
    res = simulate(shear_field(grid16, 1.0), ForcingSpec.zero(), cfg)
    r = energy_balance_residual(res.trace)
    scale = (res.trace.nu * res.trace.h1_sq).max()
    assert np.abs(r).max() / scale <= 1e-4


def test_energy_residual_zero_trace(grid8):
    cfg = SolverConfig(nu=1.0, dt=1e-2, t_end=0.05)
    res = simulate(zero_field(grid8), ForcingSpec.zero(), cfg)
    assert np.abs(energy_balance_residual(res.trace)).max() == 0.0


def test_energy_residual_stationary_balance(grid16):
    f = kolmogorov_forcing(grid16, 1.0)
    cfg = SolverConfig(nu=1.0, dt=1e-3, t_end=0.2)
    res = simulate(shear_field(grid16, 1.0), f, cfg)
    trace = res.trace
    # d/dt term vanishes and nu * h1_sq balances (f, u)
    dzdt = np.gradient(trace.l2_sq, trace.t, edge_order=2)
    assert np.abs(dzdt).max() <= 1e-8 * trace.l2_sq[0]
    assert np.allclose(trace.nu * trace.h1_sq, trace.f_dot_u, rtol=1e-10)


def test_energy_residual_needs_samples(grid8):
    trace = NormTrace(
        t=np.array([0.0]), l2_sq=np.array([1.0]), h1_sq=np.array([1.0]),
        h2_sq=np.array([1.0]), f_dot_u=np.array([0.0]), f_sq=np.array([0.0]),
        int_h1_sq=np.array([0.0]), int_f_sq=np.array([0.0]), nu=1.0,
    )
    with pytest.raises(GridMismatchError):
        energy_balance_residual(trace)


def test_cumulative_energy_inequality_along_random_run(grid16):
    from nsreg import derive_constants

    u0 = random_divfree_field(grid16, 77, -2.0, 1.0)
    cfg = SolverConfig(nu=1.0, dt=1e-3, t_end=0.3)
    res = simulate(u0, kolmogorov_forcing(grid16, 0.3), cfg)
    tr = res.trace
    ledger = derive_constants(1.0)
    lhs = tr.l2_sq + 0.5 * tr.nu * tr.int_h1_sq
    rhs = 2.0 * ledger.energy_young * tr.int_f_sq + tr.l2_sq[0]
    assert np.all(lhs <= rhs + 1e-9 * max(1.0, rhs.max()))


# -------------------------------------------------------------- trace io

def test_trace_csv_round_trip(tmp_path, grid16):
    cfg = SolverConfig(nu=1.0, dt=5e-3, t_end=0.05)
    res = simulate(shear_field(grid16, 1.0), kolmogorov_forcing(grid16, 0.5), cfg)
    path = tmp_path / "trace.csv"
    text = res.trace.to_csv(path)
    assert text.splitlines()[0] == "t,l2_sq,h1_sq,h2_sq,f_dot_u,int_h1_sq,int_f_sq,residual"
    loaded = NormTrace.from_csv(path, nu=1.0)
    assert np.allclose(loaded.t, res.trace.t, rtol=0, atol=0)
    assert np.allclose(loaded.l2_sq, res.trace.l2_sq, rtol=0, atol=0)
    assert np.allclose(loaded.int_f_sq, res.trace.int_f_sq, rtol=0, atol=0)
    # reconstructed force norms approximate the recorded ones
    assert np.allclose(loaded.f_sq[1:-1], res.trace.f_sq[1:-1], rtol=1e-10)


def test_trace_rejects_decreasing_times():
    with pytest.raises(ConfigurationError):
        NormTrace(
            t=np.array([0.0, 0.0]), l2_sq=np.zeros(2), h1_sq=np.zeros(2),
            h2_sq=np.zeros(2), f_dot_u=np.zeros(2), f_sq=np.zeros(2),
            int_h1_sq=np.zeros(2), int_f_sq=np.zeros(2), nu=1.0,
        )


def test_trace_integrals_monotone(grid16):
    cfg = SolverConfig(nu=1.0, dt=2e-3, t_end=0.1)
    res = simulate(random_divfree_field(grid16, 5), kolmogorov_forcing(grid16, 1.0), cfg)
    assert np.all(np.diff(res.trace.int_h1_sq) >= 0.0)
    assert np.all(np.diff(res.trace.int_f_sq) >= 0.0)


def test_forcing_accumulator_matches_steady_value(grid16):
    amp = 0.7
    f = kolmogorov_forcing(grid16, amp)
    cfg = SolverConfig(nu=1.0, dt=1e-3, t_end=0.1)
    res = simulate(zero_field(grid16), f, cfg)
    f_sq = sobolev_norm(f.steady_field, 0) ** 2
    assert res.trace.int_f_sq[-1] == pytest.approx(0.1 * f_sq, rel=1e-12)
