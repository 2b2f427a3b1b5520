"""Numerical verification of the inequality chain along simulation traces.

Three checks run against a :class:`~nsreg.solver.NormTrace`:

- the solver diagnostic: the energy-balance residual must stay at the
  discretization-error level (a failure indicts the integrator);
- the differential gradient-norm inequality
  d/dt h1_sq <= c3 |f|^2 + c6 h1_sq^3 (a positive excursion beyond the
  dt-study tolerance indicts the ledger constants);
- the cumulative energy inequality
  l2_sq(t) + (nu/2) int h1_sq <= 2 c7 int |f|^2 + l2_sq(0);
- dominance of a certified bound curve over the observed h1_sq.

Default tolerances scale with the measured stiffness of the trace
(lam_eff = max h2_sq / h1_sq) and the sampling step, so refining dt
provably shrinks them; they can be overridden per call.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import GridMismatchError
from .solver import energy_balance_residual


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    max_violation: float
    first_violation_t: Optional[float]
    tolerance: float


@dataclass(frozen=True)
class MonitorReport:
    """Aggregated verdicts; ``violations`` is empty exactly when ``passed``."""

    checks: tuple
    h1_residuals: Optional[np.ndarray]
    passed: bool
    solver_diagnostic_failed: bool

    @property
    def violations(self):
        return tuple(c for c in self.checks if not c.passed)

    def to_json_dict(self):
        return {
            "checks": [
                {
                    "name": c.name,
                    "max_violation": c.max_violation,
                    "first_violation_t": c.first_violation_t,
                }
                for c in self.checks
            ],
            "passed": self.passed,
        }


def _first_violation(t, mask):
    idx = np.flatnonzero(mask)
    return float(t[idx[0]]) if idx.size else None


def _effective_stiffness(trace):
    """Largest Rayleigh quotient h2_sq / h1_sq seen along the trace."""
    pos = trace.h1_sq > 0
    if not np.any(pos):
        return 0.0
    return float((trace.h2_sq[pos] / trace.h1_sq[pos]).max())


def _max_dt(trace):
    return float(np.diff(trace.t).max()) if len(trace) > 1 else 0.0


def solver_energy_diagnostic(trace, rel_tol=None, safety=4.0):
    """Check that the energy-balance residual is discretization-sized.

    The default tolerance models the centered-difference error of
    d/dt l2_sq for content decaying like exp(-2 nu lam_eff t).
    """
    residual = energy_balance_residual(trace)
    scale = float(max(trace.nu * trace.h1_sq.max(), abs(trace.f_dot_u).max(), 1e-300))
    if rel_tol is None:
        x = 2.0 * trace.nu * _effective_stiffness(trace) * _max_dt(trace)
        rel_tol = min(0.05, max(1e-10, safety * x * x / 6.0))
    bad = np.abs(residual) > rel_tol * scale
    return CheckResult(
        name="solver_energy_balance",
        passed=not bad.any(),
        max_violation=float(np.abs(residual).max() / scale) if scale > 0 else 0.0,
        first_violation_t=_first_violation(trace.t, bad),
        tolerance=rel_tol,
    )


def check_h1_inequality(trace, ledger, tol=None, safety=4.0):
    """Residuals d/dt h1_sq - c3 |f|^2 - c6 h1_sq^3 per sample.

    The inequality predicts residuals <= 0 up to differencing error;
    returns the residual series and a :class:`CheckResult` flagging
    positive excursions beyond ``tol``.
    """
    if len(trace) < 2:
        raise GridMismatchError("h1 inequality check needs at least two samples")
    dydt = np.gradient(trace.h1_sq, trace.t, edge_order=2 if len(trace) > 2 else 1)
    rhs = ledger.force_young * trace.f_sq + ledger.cubic_coeff * trace.h1_sq**3
    residual = dydt - rhs
    if tol is None:
        lam_eff = _effective_stiffness(trace)
        diff_err = (2.0 * trace.nu * lam_eff * _max_dt(trace)) ** 2 / 6.0
        tol = max(
            1e-3 * float(rhs.max(initial=0.0)),
            safety * diff_err * 2.0 * trace.nu * float(trace.h2_sq.max(initial=0.0)),
        )
    bad = residual > tol
    return residual, CheckResult(
        name="h1_differential_inequality",
        passed=not bad.any(),
        max_violation=float(residual.max()),
        first_violation_t=_first_violation(trace.t, bad),
        tolerance=tol,
    )


def check_energy_inequality(trace, ledger, tol=None):
    """Cumulative check l2_sq + (nu/2) int h1_sq <= 2 c7 int |f|^2 + l2_sq(0)."""
    lhs = trace.l2_sq + 0.5 * trace.nu * trace.int_h1_sq
    rhs = 2.0 * ledger.energy_young * trace.int_f_sq + trace.l2_sq[0]
    excess = lhs - rhs
    if tol is None:
        scale = float(max(trace.l2_sq.max(), rhs.max(), 1e-300))
        tol = 1e-9 * scale + 1e-12
    bad = excess > tol
    return CheckResult(
        name="cumulative_energy_inequality",
        passed=not bad.any(),
        max_violation=float(excess.max()),
        first_violation_t=_first_violation(trace.t, bad),
        tolerance=tol,
    )


def check_bound_dominance(trace, report, rel_tol=1e-6):
    """Verify h1_sq(t_i) <= bound(t_i) * (1 + rel_tol) along the trace.

    ``report`` must be a satisfied criterion report; sample times are
    clamped to the bound's horizon to absorb end-of-run roundoff.
    """
    if report.bound is None or not report.satisfied:
        raise ValueError("bound dominance requires a satisfied criterion report")
    curve = report.bound
    ts = np.minimum(trace.t, curve.horizon)
    values = np.asarray(curve.evaluate(ts), dtype=float)
    excess = trace.h1_sq - values * (1.0 + rel_tol)
    bad = excess > 0.0
    return CheckResult(
        name=f"bound_dominance[{curve.kind}]",
        passed=not bad.any(),
        max_violation=float(excess.max()),
        first_violation_t=_first_violation(trace.t, bad),
        tolerance=rel_tol,
    )


def run_monitor(trace, ledger, report=None, h1_tol=None, energy_tol=None,
                solver_rel_tol=None, dominance_rel_tol=1e-6):
    """Run the solver diagnostic plus all applicable inequality checks.

    The solver diagnostic comes first so a failing report distinguishes
    "integrator is wrong" from "constants are wrong".
    """
    diag = solver_energy_diagnostic(trace, rel_tol=solver_rel_tol)
    residuals, h1_check = check_h1_inequality(trace, ledger, tol=h1_tol)
    energy_check = check_energy_inequality(trace, ledger, tol=energy_tol)
    checks = [diag, h1_check, energy_check]
    if report is not None and report.satisfied:
        checks.append(check_bound_dominance(trace, report, rel_tol=dominance_rel_tol))
    return MonitorReport(
        checks=tuple(checks),
        h1_residuals=residuals,
        passed=all(c.passed for c in checks),
        solver_diagnostic_failed=not diag.passed,
    )
