"""Empirical lower bounds for the embedding and interpolation constants.

For a velocity field u the two ratios

    |u|_L6 / |grad u|                 (admissible C_S is at least this)
    |grad u|_L3 / (|grad u|^(1/2) |Lap u|^(1/2))   (same for C_I)

are evaluated by oversampled collocation quadrature and maximized over a
random solenoidal ensemble.  The maxima are lower bounds on any admissible
constants; exceeding the configured defaults signals a mis-calibration.

The L6 integrand of a band-limited field is a trigonometric polynomial, so
any oversampling factor >= 2 integrates it exactly; the L3 integrand has a
fractional power and converges spectrally with the factor (about 1e-6
relative at 4x, 1e-8 at 16x for single-mode fields).
"""

from dataclasses import dataclass

import numpy as np
from scipy.fft import ifftn

from .bounds import DEFAULT_C_INTERP, DEFAULT_C_SOBOLEV
from .errors import ConfigurationError
from .spectral import random_divfree_field, sobolev_norm

_AXES = (-3, -2, -1)


def _padded_component(comp_hat, n, m):
    """Physical samples of one spectral component on an m^3 grid."""
    if m == n:
        return np.real(ifftn(comp_hat, axes=_AXES) * n**3)
    padded = np.zeros((m, m, m), dtype=np.complex128)
    lo = (m - n) // 2
    shifted = np.fft.fftshift(comp_hat, axes=_AXES)
    padded[lo : lo + n, lo : lo + n, lo : lo + n] = shifted
    padded = np.fft.ifftshift(padded, axes=_AXES)
    return np.real(ifftn(padded, axes=_AXES) * m**3)


@dataclass(frozen=True)
class EmbeddingRatios:
    l6_over_grad: float
    l3_over_interp: float


def embedding_ratios(u, oversample=4):
    """Both constant ratios for one field, via oversampled quadrature."""
    if oversample < 2 or int(oversample) != oversample:
        raise ConfigurationError("oversample must be an integer >= 2")
    grid = u.grid
    n, m = grid.n, int(oversample) * grid.n
    cell = (grid.length / m) ** 3

    # |u|^2 and |grad u|^2 on the fine grid, one component at a time
    speed_sq = np.zeros((m, m, m))
    gradmag_sq = np.zeros((m, m, m))
    axes_k = (
        grid.kx[:, None, None],
        grid.kx[None, :, None],
        grid.kx[None, None, :],
    )
    for j in range(3):
        comp = _padded_component(u.coefficients[j], n, m)
        speed_sq += comp * comp
        for i in range(3):
            d = _padded_component(1j * axes_k[i] * u.coefficients[j], n, m)
            gradmag_sq += d * d

    l6 = (float((speed_sq**3).sum()) * cell) ** (1.0 / 6.0)
    l3 = (float((gradmag_sq**1.5).sum()) * cell) ** (1.0 / 3.0)
    grad_l2 = sobolev_norm(u, 1)
    lap_l2 = sobolev_norm(u, 2)
    if grad_l2 == 0.0 or lap_l2 == 0.0:
        raise ConfigurationError("embedding ratios are undefined for the zero field")
    return EmbeddingRatios(
        l6_over_grad=l6 / grad_l2,
        l3_over_interp=l3 / np.sqrt(grad_l2 * lap_l2),
    )


@dataclass(frozen=True)
class CalibrationResult:
    n_ensemble: int
    max_l6_ratio: float
    argmax_l6_seed: int
    max_l3_ratio: float
    argmax_l3_seed: int
    default_c_sobolev: float
    default_c_interp: float
    warnings: tuple

    def to_json_dict(self):
        return {
            "n_ensemble": self.n_ensemble,
            "empirical_lower_bounds": {
                "c_sobolev": self.max_l6_ratio,
                "c_interp": self.max_l3_ratio,
            },
            "argmax_seeds": {
                "c_sobolev": self.argmax_l6_seed,
                "c_interp": self.argmax_l3_seed,
            },
            "defaults": {
                "c_sobolev": self.default_c_sobolev,
                "c_interp": self.default_c_interp,
            },
            "warnings": list(self.warnings),
        }


def calibrate_constants(grid, n_ensemble, seed=0, energy_spectrum_slope=-2.0,
                        oversample=4, c_sobolev=DEFAULT_C_SOBOLEV,
                        c_interp=DEFAULT_C_INTERP):
    """Maximize both ratios over ``n_ensemble`` seeded random fields."""
    if n_ensemble < 1:
        raise ConfigurationError("ensemble size must be >= 1")
    best_l6 = best_l3 = -np.inf
    seed_l6 = seed_l3 = seed
    for k in range(n_ensemble):
        member_seed = seed + k
        u = random_divfree_field(grid, member_seed, energy_spectrum_slope, 1.0)
        ratios = embedding_ratios(u, oversample=oversample)
        if ratios.l6_over_grad > best_l6:
            best_l6, seed_l6 = ratios.l6_over_grad, member_seed
        if ratios.l3_over_interp > best_l3:
            best_l3, seed_l3 = ratios.l3_over_interp, member_seed
    warnings = []
    if best_l6 > c_sobolev:
        warnings.append(
            f"empirical L6 ratio {best_l6:.6g} exceeds the configured "
            f"embedding constant {c_sobolev:.6g}"
        )
    if best_l3 > c_interp:
        warnings.append(
            f"empirical L3 ratio {best_l3:.6g} exceeds the configured "
            f"interpolation constant {c_interp:.6g}"
        )
    return CalibrationResult(
        n_ensemble=n_ensemble,
        max_l6_ratio=float(best_l6),
        argmax_l6_seed=seed_l6,
        max_l3_ratio=float(best_l3),
        argmax_l3_seed=seed_l3,
        default_c_sobolev=c_sobolev,
        default_c_interp=c_interp,
        warnings=tuple(warnings),
    )
