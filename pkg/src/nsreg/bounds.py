"""Closed-form a-priori bounds, blow-up horizons, and regularity criteria.

Everything is driven by a :class:`ConstantLedger` derived from two physical
constants: the L6 embedding constant ``c_sobolev`` (|u|_L6 <= C_S |grad u|)
and the interpolation constant ``c_interp``
(|grad u|_L3 <= C_I |grad u|^(1/2) |Lap u|^(1/2)).  The default calibration
pins (C_S * C_I)^4 = 2048/27 so that the cubic growth coefficient equals
64/nu^3 and the force-free blow-up horizon is exactly nu^3/(128 |u0|_1^4).

The scalar criteria compare an accumulated quantity against pi/2: once

    lhs = <force term> + <initial-energy term> + arctan(|u0|_1^2) < pi/2,

the gradient norm obeys |u(t)|_1^2 <= tan(lhs) on the covered window, which
rules out blow-up there.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.integrate import quad, solve_ivp

from .errors import (
    ConfigurationError,
    HorizonExceededError,
    PoincareConsistencyError,
)

DEFAULT_C_SOBOLEV = (2048.0 / 27.0) ** 0.125
DEFAULT_C_INTERP = (2048.0 / 27.0) ** 0.125

THRESHOLD = math.pi / 2.0

#: map from the conventional constant symbols used in the regularity
#: literature to the ledger's descriptive field names.
SYMBOL_MAP = {
    "c1": "forced_rate_offset",
    "c3": "force_young",
    "c5": "convection_holder",
    "c6": "cubic_coeff",
    "c7": "energy_young",
    "c8": "steady_force_coeff",
    "c9": "steady_init_coeff",
    "c10": "timedep_force_coeff",
    "c11": "free_init_coeff",
    "c12": "classical_free_coeff",
}


@dataclass(frozen=True)
class ConstantLedger:
    """Every constant of the inequality chain, derived from (nu, lam1, C_S, C_I).

    Identities maintained by :func:`derive_constants`:

    - force_young        = 1 / (2 nu)
    - convection_holder  = C_S * C_I
    - cubic_coeff        = 27 * convection_holder^4 / (32 nu^3)
    - energy_young       = 1 / (2 nu lam1)
    - steady_init_coeff  = free_init_coeff = cubic_coeff / nu
    - steady_force_coeff = timedep_force_coeff
                         = force_young + 2 cubic_coeff energy_young / nu
    - classical_free_coeff = cubic_coeff
    - forced_rate_offset = cubic_coeff * nu^3
    """

    nu: float
    lam1: float
    c_sobolev: float
    c_interp: float
    force_young: float
    convection_holder: float
    cubic_coeff: float
    energy_young: float
    steady_force_coeff: float
    steady_init_coeff: float
    timedep_force_coeff: float
    free_init_coeff: float
    classical_free_coeff: float
    forced_rate_offset: float

    def forced_growth_rate(self, f_l2):
        """Growth rate K(|f|) = 2 |f|^2 / nu + forced_rate_offset / nu^3."""
        return 2.0 * f_l2**2 / self.nu + self.forced_rate_offset / self.nu**3

    def to_json_dict(self):
        base = {
            "nu": self.nu,
            "lam1": self.lam1,
            "c_sobolev": self.c_sobolev,
            "c_interp": self.c_interp,
        }
        derived = {name: getattr(self, name) for name in set(SYMBOL_MAP.values())}
        aliases = {sym: getattr(self, name) for sym, name in SYMBOL_MAP.items()}
        return {**base, "derived": dict(sorted(derived.items())),
                "aliases": aliases, "symbol_map": SYMBOL_MAP}


def derive_constants(nu, lam1=1.0, c_sobolev=DEFAULT_C_SOBOLEV,
                     c_interp=DEFAULT_C_INTERP):
    """Build the ledger from viscosity, Poincare constant, and embeddings."""
    for name, val in (("nu", nu), ("lam1", lam1),
                      ("c_sobolev", c_sobolev), ("c_interp", c_interp)):
        if not (val > 0 and math.isfinite(val)):
            raise ConfigurationError(f"{name} must be positive and finite, got {val}")
    c3 = 1.0 / (2.0 * nu)
    c5 = c_sobolev * c_interp
    c6 = 27.0 * c5**4 / (32.0 * nu**3)
    c7 = 1.0 / (2.0 * nu * lam1)
    c8 = c3 + 2.0 * c6 * c7 / nu
    c9 = c6 / nu
    return ConstantLedger(
        nu=nu, lam1=lam1, c_sobolev=c_sobolev, c_interp=c_interp,
        force_young=c3, convection_holder=c5, cubic_coeff=c6, energy_young=c7,
        steady_force_coeff=c8, steady_init_coeff=c9, timedep_force_coeff=c8,
        free_init_coeff=c9, classical_free_coeff=c6, forced_rate_offset=c6 * nu**3,
    )


@dataclass(frozen=True)
class CriterionInput:
    """Scalar inputs of the criteria: initial norms, window, and force data."""

    l2: float
    h1_sq: float
    t_end: float = math.inf
    f_l2: Optional[float] = None
    int_f_sq: Optional[float] = None

    def __post_init__(self):
        if not (0 <= self.l2 < math.inf and 0 <= self.h1_sq < math.inf):
            raise ConfigurationError("initial norms must be finite and non-negative")
        if self.t_end < 0:
            raise ConfigurationError("time window must be non-negative")
        for name in ("f_l2", "int_f_sq"):
            val = getattr(self, name)
            if val is not None and not (0 <= val < math.inf):
                raise ConfigurationError(f"{name} must be finite and non-negative")

    def check_poincare(self, lam1):
        if self.h1_sq < lam1 * self.l2**2 * (1.0 - 1e-12):
            raise PoincareConsistencyError(
                f"h1_sq = {self.h1_sq:g} is below lam1 * l2^2 = "
                f"{lam1 * self.l2**2:g}; no field has these norms"
            )


@dataclass(frozen=True)
class BoundCurve:
    """Evaluable upper bound on |u(t)|_1^2 with a validity horizon.

    ``horizon`` is the time beyond which the bound is invalid or infinite
    (math.inf when the bound holds for all time).  For the arctan kinds the
    curve is the constant tan(lhs) and the horizon itself is included; the
    classical kinds diverge at the horizon, which is excluded.
    """

    kind: str
    horizon: float
    params: dict

    def evaluate(self, t):
        ts = np.asarray(t, dtype=float)
        if np.any(ts < 0):
            raise HorizonExceededError("bound evaluated at negative time", self.horizon)
        inclusive = self.kind.startswith("arctan")
        beyond = ts > self.horizon if inclusive else ts >= self.horizon
        if np.any(beyond):
            raise HorizonExceededError(
                f"bound of kind {self.kind!r} is only valid "
                f"{'through' if inclusive else 'before'} t = {self.horizon:g}",
                self.horizon,
            )
        p = self.params
        if self.kind == "classical_forced":
            h1 = math.sqrt(p["h1_sq"])
            vals = (1.0 + p["h1_sq"]) / np.sqrt(1.0 - p["rate"] * ts * (1.0 + h1) ** 2)
        elif self.kind == "classical_free":
            z0 = p["h1_sq"] ** 2
            vals = np.sqrt(z0 / (1.0 - 2.0 * p["coeff"] * ts * z0))
        else:
            vals = np.full_like(ts, math.tan(p["lhs"]))
        return float(vals) if np.isscalar(t) else vals

    def to_json_dict(self, samples=11):
        t_hi = self.horizon
        if not math.isfinite(t_hi):
            t_hi = self.params.get("t_end", 1.0)
            if not math.isfinite(t_hi):
                t_hi = 1.0
        if self.kind.startswith("classical"):
            t_hi = 0.99 * t_hi
        ts = np.linspace(0.0, t_hi, samples)
        return [{"t": float(t), "value": float(self.evaluate(float(t)))} for t in ts]


@dataclass(frozen=True)
class CriterionReport:
    """Outcome of one criterion: accumulated lhs vs the pi/2 threshold."""

    kind: str
    lhs: float
    satisfied: bool
    margin: float
    bound: Optional[BoundCurve]
    threshold: float = THRESHOLD

    def to_json_dict(self, samples=11):
        if self.bound is None:
            bound_at = []
            horizon = None
        else:
            bound_at = self.bound.to_json_dict(samples)
            horizon = self.bound.horizon if math.isfinite(self.bound.horizon) else None
        return {
            "kind": self.kind,
            "lhs": self.lhs,
            "threshold": self.threshold,
            "satisfied": self.satisfied,
            "margin": self.margin,
            "bound_at": bound_at,
            "horizon": horizon,
        }


def _report(kind, lhs, horizon, t_end=math.inf):
    satisfied = lhs < THRESHOLD
    bound = None
    if satisfied:
        bound = BoundCurve(kind=kind, horizon=horizon,
                           params={"lhs": lhs, "t_end": t_end})
    return CriterionReport(kind=kind, lhs=lhs, satisfied=satisfied,
                           margin=THRESHOLD - lhs, bound=bound)


def classical_bound_forced(t, h1_sq, f_l2, ledger):
    """Riccati-type forced bound (1 + h1_sq) / sqrt(1 - K t (1 + h1)^2)."""
    return classical_forced_curve(h1_sq, f_l2, ledger).evaluate(t)


def classical_forced_curve(h1_sq, f_l2, ledger):
    rate = ledger.forced_growth_rate(f_l2)
    h1 = math.sqrt(h1_sq)
    horizon = math.inf if rate == 0.0 else 1.0 / (rate * (1.0 + h1) ** 2)
    return BoundCurve(kind="classical_forced", horizon=horizon,
                      params={"h1_sq": h1_sq, "rate": rate})


def classical_horizon_forced(h1_sq, f_l2, ledger):
    """Guaranteed-existence window 1 / (K(|f|) (1 + h1_sq))."""
    rate = ledger.forced_growth_rate(f_l2)
    if not all(map(math.isfinite, (h1_sq, f_l2))):
        raise ConfigurationError("horizon inputs must be finite")
    return 1.0 / (rate * (1.0 + h1_sq))


def classical_bound_free(t, h1_sq, ledger):
    """Force-free Riccati bound on |u(t)|_1^2, from the quartic-norm form."""
    return classical_free_curve(h1_sq, ledger).evaluate(t)


def classical_free_curve(h1_sq, ledger):
    c = ledger.classical_free_coeff
    horizon = math.inf if h1_sq == 0.0 else 1.0 / (2.0 * c * h1_sq**2)
    return BoundCurve(kind="classical_free", horizon=horizon,
                      params={"h1_sq": h1_sq, "coeff": c})


def classical_horizon_free(h1_sq, nu):
    """Force-free guaranteed window nu^3 / (128 |u0|_1^4), exactly."""
    if h1_sq == 0.0:
        return math.inf
    return nu**3 / (128.0 * h1_sq**2)


def arctan_bound_steady(t_end, inputs, ledger):
    """Criterion for a steady force on a finite window [0, t_end].

    lhs = c8 * T * |f|^2 + c9 * |u0|^2 + arctan(|u0|_1^2); when lhs < pi/2
    the report certifies |u(t)|_1^2 <= tan(lhs) for t in [0, T].
    """
    if inputs.f_l2 is None:
        raise ConfigurationError("steady criterion needs the force L2 norm f_l2")
    if not math.isfinite(t_end) or t_end < 0:
        raise ConfigurationError("steady criterion needs a finite window t_end >= 0")
    inputs.check_poincare(ledger.lam1)
    lhs = (
        ledger.steady_force_coeff * t_end * inputs.f_l2**2
        + ledger.steady_init_coeff * inputs.l2**2
        + math.atan(inputs.h1_sq)
    )
    return _report("arctan_steady", lhs, horizon=t_end, t_end=t_end)


def arctan_bound_timedep(t_end, inputs, ledger):
    """Criterion for f in L2 in time; t_end may be infinite.

    lhs = c10 * int |f|^2 + c11 * |u0|^2 + arctan(|u0|_1^2).
    """
    if inputs.int_f_sq is None or inputs.int_f_sq < 0:
        raise ConfigurationError("time-dependent criterion needs int_f_sq >= 0")
    inputs.check_poincare(ledger.lam1)
    lhs = (
        ledger.timedep_force_coeff * inputs.int_f_sq
        + ledger.free_init_coeff * inputs.l2**2
        + math.atan(inputs.h1_sq)
    )
    return _report("arctan_timedep", lhs, horizon=t_end, t_end=t_end)


def arctan_bound_free(inputs, ledger):
    """Force-free global criterion: lhs = c11 * |u0|^2 + arctan(|u0|_1^2).

    A satisfied report certifies the time-independent bound tan(lhs) for
    all t > 0.
    """
    inputs.check_poincare(ledger.lam1)
    lhs = ledger.free_init_coeff * inputs.l2**2 + math.atan(inputs.h1_sq)
    return _report("arctan_free", lhs, horizon=math.inf)


@dataclass(frozen=True)
class OdeOracle:
    """Trajectory and blow-up time of a scalar comparison ODE."""

    t: np.ndarray
    y: np.ndarray
    blowup_time: Optional[float]


def _ode_rhs(variant, alpha, beta):
    if variant == "cubic":
        return lambda y: alpha + beta * y**3
    if variant == "arctan_form":
        return lambda y: alpha + beta * y * (1.0 + y**2)
    if variant == "square":
        return lambda y: alpha + beta * y**2
    raise ConfigurationError(f"unknown ODE variant {variant!r}")


def ode_comparison_oracle(alpha, beta, y0, t_end, variant="cubic",
                          rtol=1e-11, n_samples=2000):
    """Independent high-accuracy integration of y' = alpha + beta y^3.

    Variants: ``cubic`` (alpha + beta y^3), ``arctan_form``
    (alpha + beta y (1 + y^2)), ``square`` (alpha + beta y^2).  The blow-up
    time is located by integrating to a large switch level and adding the
    remaining time as the convergent integral of dt/dy = 1/rhs, which keeps
    the relative error well below 1e-6.
    """
    if alpha < 0 or y0 < 0:
        raise ConfigurationError("alpha and y0 must be non-negative")
    if not beta > 0:
        raise ConfigurationError("beta must be positive")
    rhs = _ode_rhs(variant, alpha, beta)

    if alpha == 0.0 and y0 == 0.0:
        ts = np.linspace(0.0, t_end, n_samples)
        return OdeOracle(t=ts, y=np.zeros_like(ts), blowup_time=None)

    y_switch = max(1e8, 1e4 * (1.0 + y0), (alpha / beta) ** (1.0 / 3.0) * 10.0)
    # upper bound for the blow-up time, used to cap the ODE time span
    t_star_est = quad(lambda y: 1.0 / rhs(y), y0, np.inf, limit=200)[0]

    def f(_t, y):
        return [rhs(y[0])]

    def hit_switch(_t, y):
        return y[0] - y_switch

    hit_switch.terminal = True
    hit_switch.direction = 1.0

    span_end = min(t_end, t_star_est) if math.isfinite(t_end) else t_star_est
    span_end = max(span_end, 1e-30)
    sol = solve_ivp(f, (0.0, span_end), [y0], method="RK45", rtol=rtol,
                    atol=1e-14, dense_output=True, events=hit_switch,
                    max_step=span_end)
    if sol.t_events[0].size:
        t_reach = float(sol.t_events[0][0])
        tail = quad(lambda y: 1.0 / rhs(y), y_switch, np.inf, limit=200)[0]
        blowup_time = t_reach + tail
        t_hi = min(t_end, t_reach)
    else:
        blowup_time = t_star_est
        t_hi = min(t_end, float(sol.t[-1]))
    ts = np.linspace(0.0, t_hi, n_samples)
    ys = sol.sol(ts)[0]
    return OdeOracle(t=ts, y=ys, blowup_time=float(blowup_time))


@dataclass(frozen=True)
class ComparisonRow:
    l2: float
    h1_sq: float
    classical_horizon: float
    criterion_lhs: float
    criterion_satisfied: bool
    margin: float
    printed_lhs: float
    printed_satisfied: bool
    extends_classical: bool


@dataclass(frozen=True)
class ComparisonTable:
    """Classical finite horizon vs the global force-free criterion."""

    rows: tuple
    threshold_l2: float
    h1_sq: float
    t_star: float

    def to_json_dict(self):
        return {
            "h1_sq": self.h1_sq,
            "t_star": self.t_star if math.isfinite(self.t_star) else None,
            "threshold_l2": self.threshold_l2,
            "rows": [
                {
                    "l2": r.l2,
                    "h1_sq": r.h1_sq,
                    "classical_horizon": (
                        r.classical_horizon if math.isfinite(r.classical_horizon) else None
                    ),
                    "criterion_lhs": r.criterion_lhs,
                    "criterion_satisfied": r.criterion_satisfied,
                    "margin": r.margin,
                    "printed_lhs": r.printed_lhs,
                    "printed_satisfied": r.printed_satisfied,
                    "extends_classical": r.extends_classical,
                }
                for r in self.rows
            ],
        }


def interval_comparison(h1_sq, l2_values, ledger, t_star=None):
    """Sweep |u0| at fixed |u0|_1^2: horizon vs global-regularity verdict.

    Each row reports the classical force-free horizon and the arctan
    criterion verdict; ``extends_classical`` flags the regime where the
    criterion certifies all t > 0 while the horizon is finite.  The
    ``printed_*`` columns use the literature's square-root form of the
    criterion with window ``t_star`` (default: the classical horizon, where
    the two forms coincide).

    ``threshold_l2`` is the largest |u0| the criterion admits at this
    h1_sq: sqrt((pi/2 - arctan(h1_sq)) / c11).
    """
    if h1_sq < 0:
        raise ConfigurationError("h1_sq must be non-negative")
    horizon = classical_horizon_free(h1_sq, ledger.nu)
    used_t_star = horizon if t_star is None else float(t_star)
    if used_t_star <= 0:
        raise ConfigurationError("t_star must be positive")
    rows = []
    for l2 in l2_values:
        inputs = CriterionInput(l2=float(l2), h1_sq=h1_sq)
        inputs.check_poincare(ledger.lam1)
        rep = arctan_bound_free(inputs, ledger)
        if math.isfinite(used_t_star):
            printed_arg = math.sqrt(ledger.nu**3 / (128.0 * used_t_star))
        else:
            printed_arg = 0.0
        printed_lhs = ledger.free_init_coeff * float(l2) ** 2 + math.atan(printed_arg)
        rows.append(
            ComparisonRow(
                l2=float(l2),
                h1_sq=h1_sq,
                classical_horizon=horizon,
                criterion_lhs=rep.lhs,
                criterion_satisfied=rep.satisfied,
                margin=rep.margin,
                printed_lhs=printed_lhs,
                printed_satisfied=printed_lhs < THRESHOLD,
                extends_classical=rep.satisfied and math.isfinite(horizon),
            )
        )
    threshold_l2 = math.sqrt((THRESHOLD - math.atan(h1_sq)) / ledger.free_init_coeff)
    return ComparisonTable(rows=tuple(rows), threshold_l2=threshold_l2,
                           h1_sq=h1_sq, t_star=used_t_star)
