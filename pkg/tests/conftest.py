"""Shared fixtures and independent oracles for the test suite.

The oracles here deliberately avoid the package's own transform helpers:
fine-grid evaluation is done with plain numpy FFT padding so it stays an
independent check of the dealiased collocation path.
"""

import numpy as np
import pytest

from nsreg import make_wavegrid, random_divfree_field


@pytest.fixture(scope="session")
def grid8():
    return make_wavegrid(8)


@pytest.fixture(scope="session")
def grid16():
    return make_wavegrid(16)


@pytest.fixture(scope="session")
def rand_field(grid16):
    def factory(seed, amplitude=1.0, slope=-2.0, grid=grid16):
        return random_divfree_field(grid, seed, slope, amplitude)

    return factory


def pad_component(comp_hat, n, m):
    """Evaluate one spectral component on an m^3 grid (numpy only)."""
    padded = np.zeros((m, m, m), dtype=np.complex128)
    lo = (m - n) // 2
    shifted = np.fft.fftshift(comp_hat)
    padded[lo : lo + n, lo : lo + n, lo : lo + n] = shifted
    padded = np.fft.ifftshift(padded)
    return np.real(np.fft.ifftn(padded) * m**3)


def fine_quadrature_b(u, v, w, factor=4):
    """Trilinear form by direct quadrature on a factor-times-finer grid.

    Exact for band-limited fields because the finer grid resolves every
    mode of the triple-product integrand.
    """
    grid = u.grid
    n, m = grid.n, factor * grid.n
    axes_k = (
        grid.kx[:, None, None],
        grid.kx[None, :, None],
        grid.kx[None, None, :],
    )
    total = 0.0
    for j in range(3):
        wj = pad_component(w.coefficients[j], n, m)
        for i in range(3):
            ui = pad_component(u.coefficients[i], n, m)
            dv = pad_component(1j * axes_k[i] * v.coefficients[j], n, m)
            total += float((ui * dv * wj).sum())
    return total * (grid.length / m) ** 3


def physical_l2_sq(u, factor=2):
    """Quadrature of integral |u|^2 dx on a finer grid (Parseval oracle)."""
    grid = u.grid
    n, m = grid.n, factor * grid.n
    acc = 0.0
    for j in range(3):
        comp = pad_component(u.coefficients[j], n, m)
        acc += float((comp * comp).sum())
    return acc * (grid.length / m) ** 3
