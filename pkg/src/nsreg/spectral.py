"""Divergence-free periodic vector fields in Fourier space.

Fields live on the torus [0, L]^3 sampled on N^3 collocation points.  The
stored coefficients follow the convention

    u(x) = sum_k uhat(k) * exp(i * (2*pi/L) * k . x),

i.e. ``uhat = fftn(u_phys) / N**3`` in numpy's FFT layout, so the integer
wavenumbers per axis run over [-N/2, N/2).  With this normalization
Parseval reads  integral |u|^2 dx = L^3 * sum_k |uhat(k)|^2.

Quadratic products are dealiased with the 2/3 rule: only modes with
|k_int| < N/3 on every axis are retained, which makes products of retained
modes alias-free on the N^3 grid and makes the collocation quadrature of
triple products exact.
"""

import json
import struct
from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np
from scipy.fft import fftn, ifftn

from . import _kernels
from .errors import ConfigurationError, GridMismatchError

TWO_PI = 2.0 * np.pi

SNAPSHOT_MAGIC = b"NSRC1"
_SNAPSHOT_HEADER = struct.Struct("<5sIdI")


class WaveGrid:
    """Fourier lattice of an N^3 periodic grid with period ``length``.

    Integer wavenumbers per axis are a bijection with [-N/2, N/2); physical
    wavevectors are scaled by 2*pi/length.
    """

    def __init__(self, n, length=TWO_PI):
        if not isinstance(n, (int, np.integer)):
            raise ConfigurationError(f"grid resolution must be an integer, got {n!r}")
        if n < 4 or n % 2 != 0:
            raise ConfigurationError(f"grid resolution must be even and >= 4, got {n}")
        if not (length > 0.0 and np.isfinite(length)):
            raise ConfigurationError(f"domain period must be positive, got {length}")
        self.n = int(n)
        self.length = float(length)
        self.scale = TWO_PI / self.length

        k_int = np.fft.fftfreq(self.n, 1.0 / self.n)  # 0, 1, ..., -N/2, ..., -1
        self.k_int = k_int
        self.kx = self.scale * k_int
        self.ky = self.kx
        self.kz = self.kx

        gx = k_int[:, None, None]
        gy = k_int[None, :, None]
        gz = k_int[None, None, :]
        self.ksq_int = gx * gx + gy * gy + gz * gz
        self.ksq = self.scale**2 * self.ksq_int

        cutoff = self.n / 3.0
        keep = np.abs(k_int) < cutoff
        self.dealias_mask = (
            keep[:, None, None] & keep[None, :, None] & keep[None, None, :]
        )

        for arr in (self.k_int, self.kx, self.ksq_int, self.ksq, self.dealias_mask):
            arr.setflags(write=False)

    @property
    def lam1(self):
        """Smallest positive eigenvalue of -Laplace on zero-mean fields."""
        return self.scale**2

    @property
    def volume(self):
        return self.length**3

    @property
    def cell_volume(self):
        return (self.length / self.n) ** 3

    @property
    def n_modes(self):
        return self.n**3

    def __eq__(self, other):
        return (
            isinstance(other, WaveGrid)
            and self.n == other.n
            and self.length == other.length
        )

    def __hash__(self):
        return hash((self.n, self.length))

    def __repr__(self):
        return f"WaveGrid(n={self.n}, length={self.length!r})"


def make_wavegrid(n, length=TWO_PI):
    """Build a :class:`WaveGrid`; rejects odd or too-small resolutions."""
    return WaveGrid(n, length)


@dataclass(frozen=True)
class SpectralVelocity:
    """Divergence-free, zero-mean velocity field given by Fourier coefficients.

    ``coefficients`` has shape (3, N, N, N), complex128, in numpy FFT layout.
    Instances are treated as immutable; the array is marked read-only.
    """

    grid: WaveGrid
    coefficients: np.ndarray

    def __post_init__(self):
        c = self.coefficients
        n = self.grid.n
        if c.shape != (3, n, n, n):
            raise GridMismatchError(
                f"coefficients shape {c.shape} does not match grid n={n}"
            )
        if c.dtype != np.complex128:
            raise GridMismatchError(f"coefficients must be complex128, got {c.dtype}")
        c.setflags(write=False)

    def validate(self, div_tol=None, hermitian_tol=1e-12):
        """Raise ``ValueError`` unless all field invariants hold.

        Checks Hermitian symmetry, zero mean, and modewise incompressibility
        |k . uhat(k)| <= div_tol * |uhat(k)| with the default tolerance
        1e-12 * max |uhat|.
        """
        c = self.coefficients
        peak = float(np.abs(c).max())
        if peak == 0.0:
            return self
        herm = hermitian_adjoint(c)
        if float(np.abs(c - herm).max()) > hermitian_tol * peak:
            raise ValueError("field is not Hermitian-symmetric (complex physical part)")
        if float(np.abs(c[:, 0, 0, 0]).max()) > 1e-13 * peak:
            raise ValueError("field has a nonzero mean mode")
        if div_tol is None:
            div_tol = 1e-12 * peak
        g = self.grid
        div = (
            g.kx[:, None, None] * c[0]
            + g.kx[None, :, None] * c[1]
            + g.kx[None, None, :] * c[2]
        )
        kmag = np.sqrt(g.ksq)
        worst = float(np.abs(div).max())
        if worst > div_tol * float(kmag.max()):
            raise ValueError(f"field is not divergence-free: max |k.uhat| = {worst:g}")
        return self

    def copy_with(self, coefficients):
        return SpectralVelocity(self.grid, np.ascontiguousarray(coefficients))


@dataclass(frozen=True)
class RealVelocity:
    """Collocation samples of a velocity field, shape (3, N, N, N) float64."""

    grid: WaveGrid
    samples: np.ndarray

    def __post_init__(self):
        n = self.grid.n
        if self.samples.shape != (3, n, n, n):
            raise GridMismatchError(
                f"samples shape {self.samples.shape} does not match grid n={n}"
            )


def hermitian_adjoint(arr):
    """conj(arr) evaluated at -k, in the same FFT layout."""
    rev = np.conj(arr[..., ::-1, ::-1, ::-1])
    return np.roll(rev, 1, axis=(-3, -2, -1))


def to_physical(u):
    """Inverse transform to collocation samples (imaginary part discarded)."""
    n3 = u.grid.n_modes
    samples = np.real(ifftn(u.coefficients, axes=(-3, -2, -1)) * n3)
    return RealVelocity(u.grid, np.ascontiguousarray(samples))


def from_physical(grid, samples):
    """Raw (unprojected) spectral coefficients of real collocation samples."""
    if samples.shape != (3, grid.n, grid.n, grid.n):
        raise GridMismatchError("sample array does not match the grid")
    return np.ascontiguousarray(fftn(samples, axes=(-3, -2, -1)) / grid.n_modes)


def leray_project(coefficients, grid=None):
    """Project a raw Hermitian coefficient field onto divergence-free modes.

    Accepts either a ``SpectralVelocity`` (re-projection) or a raw
    (3, N, N, N) coefficient array together with ``grid``.  Modewise:
    uhat <- uhat - k (k . uhat) / |k|^2, and uhat(0) <- 0.  Idempotent.
    """
    if isinstance(coefficients, SpectralVelocity):
        grid = coefficients.grid
        raw = coefficients.coefficients
    else:
        if grid is None:
            raise GridMismatchError("a grid is required when projecting a raw array")
        raw = coefficients
    out = np.array(raw, dtype=np.complex128, copy=True)
    _kernels.leray_project_modes(out, grid.kx, grid.kx, grid.kx)
    return SpectralVelocity(grid, out)


def stokes_apply(u, power):
    """Apply the power of the (minus-Laplace) operator: uhat *= |k|^(2*power).

    ``power`` must be >= 0; inverse powers are rejected because the operator
    is only positive on zero-mean fields.
    """
    if power < 0:
        raise ValueError(f"operator power must be >= 0, got {power}")
    if power == 0:
        return u
    weights = u.grid.ksq**power  # 0**p = 0 for p > 0
    return SpectralVelocity(u.grid, np.ascontiguousarray(u.coefficients * weights))


@dataclass(frozen=True)
class EigenvalueTable:
    """Distinct operator eigenvalues with lattice multiplicities."""

    entries: tuple  # ((lam, multiplicity), ...) ascending, lam > 0
    truncated: bool


def stokes_eigenvalues(grid, count):
    """First ``count`` distinct eigenvalues |k|^2 * (2*pi/L)^2 with multiplicities.

    If the grid resolves fewer than ``count`` distinct values the table is
    returned in full with ``truncated=True``.
    """
    if count < 1:
        raise ConfigurationError(f"eigenvalue count must be >= 1, got {count}")
    values, counts = np.unique(grid.ksq_int.ravel(), return_counts=True)
    nz = values > 0
    values, counts = values[nz], counts[nz]
    truncated = count > len(values)
    take = min(count, len(values))
    entries = tuple(
        (float(v * grid.scale**2), int(c))
        for v, c in zip(values[:take], counts[:take])
    )
    return EigenvalueTable(entries, truncated)


def sobolev_norm(u, m):
    """Homogeneous Sobolev (semi)norm (L^3 * sum_k |k|^(2m) |uhat|^2)^(1/2).

    m=0 is the L2 norm, m=1 the gradient norm, m=2 the Laplacian norm; any
    m >= 0 is accepted.  Matches physical-space integrals by Parseval.
    """
    if m < 0:
        raise ValueError(f"norm order must be >= 0, got {m}")
    total = _kernels.weighted_spectral_sum(u.coefficients, u.grid.ksq, float(m))
    return float(np.sqrt(u.grid.volume * total))


def inner_product(u, w):
    """L2 inner product  integral u . w dx  of two fields on one grid."""
    if u.grid != w.grid:
        raise GridMismatchError("fields live on different grids")
    s = np.vdot(w.coefficients, u.coefficients)  # sum conj(w) * u
    return float(u.grid.volume * s.real)


def _masked(coefficients, grid):
    return coefficients * grid.dealias_mask


def _gradient_physical(coefficients, grid):
    """d v_j / d x_i on the collocation grid, shape (3, 3, N, N, N)."""
    n3 = grid.n_modes
    out = np.empty((3, 3, grid.n, grid.n, grid.n))
    axes_k = (
        grid.kx[:, None, None],
        grid.kx[None, :, None],
        grid.kx[None, None, :],
    )
    for i in range(3):
        d_hat = 1j * axes_k[i] * coefficients
        out[i] = np.real(ifftn(d_hat, axes=(-3, -2, -1)) * n3)
    return out


def trilinear_b(u, v, w):
    """Inertial trilinear form  sum_ij integral u_i (d v_j/d x_i) w_j dx.

    Inputs are truncated to the dealias band, so the collocation quadrature
    of the triple product is exact and the form is skew-symmetric in its
    last two arguments for divergence-free u.
    """
    if not (u.grid == v.grid == w.grid):
        raise GridMismatchError("trilinear form requires fields on one grid")
    grid = u.grid
    n3 = grid.n_modes
    u_phys = np.real(ifftn(_masked(u.coefficients, grid), axes=(-3, -2, -1)) * n3)
    w_phys = np.real(ifftn(_masked(w.coefficients, grid), axes=(-3, -2, -1)) * n3)
    grad_v = _gradient_physical(_masked(v.coefficients, grid), grid)
    conv = _kernels.convective_product(np.ascontiguousarray(u_phys), grad_v)
    return float((conv * w_phys).sum() * grid.cell_volume)


def _convection_spectrum(coefficients, grid):
    """Dealiased spectrum of (u . grad) u for in-band coefficients."""
    n3 = grid.n_modes
    masked = _masked(coefficients, grid)
    u_phys = np.real(ifftn(masked, axes=(-3, -2, -1)) * n3)
    grad_u = _gradient_physical(masked, grid)
    conv = _kernels.convective_product(np.ascontiguousarray(u_phys), grad_u)
    return _masked(fftn(conv, axes=(-3, -2, -1)) / n3, grid)


def nonlinear_term(u):
    """Projected, dealiased convection term: P[(u . grad) u].

    Satisfies <nonlinear_term(u), w> = trilinear_b(u, u, w) for every
    divergence-free in-band w.
    """
    ghat = _convection_spectrum(u.coefficients, u.grid)
    return leray_project(ghat, u.grid)


def random_divfree_field(grid, seed, energy_spectrum_slope=-2.0, amplitude=1.0):
    """Deterministic random solenoidal field with |uhat(k)| ~ |k|^(slope/2).

    Modes outside the dealias band are zero; the result is normalized so its
    L2 norm equals ``amplitude`` exactly (zero field for amplitude 0).
    """
    if amplitude < 0:
        raise ConfigurationError(f"amplitude must be >= 0, got {amplitude}")
    n = grid.n
    if amplitude == 0.0:
        return SpectralVelocity(grid, np.zeros((3, n, n, n), dtype=np.complex128))
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal((3, n, n, n))
    raw = from_physical(grid, noise)
    sol = leray_project(raw, grid).coefficients.copy()

    band = grid.dealias_mask & (grid.ksq_int > 0)
    target = np.zeros_like(grid.ksq)
    target[band] = grid.ksq[band] ** (energy_spectrum_slope / 4.0)

    mode_mag = np.sqrt((sol.real**2 + sol.imag**2).sum(axis=0))
    safe = np.where(mode_mag > 0.0, mode_mag, 1.0)
    shaped = sol * (target / safe)
    field = SpectralVelocity(grid, np.ascontiguousarray(shaped))
    norm = sobolev_norm(field, 0)
    if norm == 0.0:
        raise ConfigurationError("random field degenerated to zero; change the seed")
    return SpectralVelocity(
        grid, np.ascontiguousarray(shaped * (amplitude / norm))
    )


def shear_field(grid, amplitude=1.0):
    """Single-mode shear flow  amplitude * (sin y, 0, 0), spectrally exact."""
    n = grid.n
    c = np.zeros((3, n, n, n), dtype=np.complex128)
    c[0, 0, 1, 0] = -0.5j * amplitude
    c[0, 0, n - 1, 0] = 0.5j * amplitude
    return SpectralVelocity(grid, c)


def field_with_norms(grid, seed, l2, h1_sq):
    """Random field with prescribed L2 norm and squared gradient norm.

    Combines two random solenoidal fields supported on the lowest and the
    highest resolved spherical shells.  Requires
    lam1 * l2^2 <= h1_sq <= lam_max * l2^2 on this grid.
    """
    if l2 < 0 or h1_sq < 0:
        raise ConfigurationError("norms must be non-negative")
    n = grid.n
    if l2 == 0.0:
        if h1_sq > 0.0:
            raise ConfigurationError("h1_sq must vanish when l2 = 0")
        return SpectralVelocity(grid, np.zeros((3, n, n, n), dtype=np.complex128))
    band_sq = np.unique(grid.ksq_int[grid.dealias_mask & (grid.ksq_int > 0)])
    lam_lo = float(band_sq.min()) * grid.scale**2
    lam_hi = float(band_sq.max()) * grid.scale**2
    if not (lam_lo * l2**2 <= h1_sq * (1 + 1e-12) and h1_sq <= lam_hi * l2**2 * (1 + 1e-12)):
        raise ConfigurationError(
            f"norm pair (l2={l2:g}, h1_sq={h1_sq:g}) is not realizable on this "
            f"grid: need h1_sq/l2^2 in [{lam_lo:g}, {lam_hi:g}]"
        )
    beta_sq = max((h1_sq - lam_lo * l2**2) / (lam_hi - lam_lo), 0.0)
    alpha_sq = max(l2**2 - beta_sq, 0.0)

    def shell_unit(sub_seed, ksq_target):
        raw = random_divfree_field(grid, sub_seed, 0.0, 1.0).coefficients.copy()
        raw[:, grid.ksq_int != ksq_target] = 0.0
        f = SpectralVelocity(grid, np.ascontiguousarray(raw))
        nrm = sobolev_norm(f, 0)
        if nrm == 0.0:
            raise ConfigurationError("shell projection vanished; change the seed")
        return raw / nrm

    combo = np.sqrt(alpha_sq) * shell_unit(2 * seed + 1, band_sq.min())
    combo = combo + np.sqrt(beta_sq) * shell_unit(2 * seed + 2, band_sq.max())
    return SpectralVelocity(grid, np.ascontiguousarray(combo))


def save_field(u, path, seed=None, provenance=None):
    """Write a field snapshot plus a JSON sidecar with provenance.

    Binary layout: header (magic ``NSRC1``, N as little-endian uint32, L as
    float64, component count 3) followed by the three coefficient blocks in
    lexicographic integer-wavevector order, little-endian complex128.
    """
    grid = u.grid
    header = _SNAPSHOT_HEADER.pack(SNAPSHOT_MAGIC, grid.n, grid.length, 3)
    ordered = np.fft.fftshift(u.coefficients, axes=(-3, -2, -1)).astype("<c16")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(ordered.tobytes())
    sidecar = {
        "format": "NSRC1",
        "n": grid.n,
        "length": grid.length,
        "seed": seed,
        "l2_norm": sobolev_norm(u, 0),
        "created": datetime.now(timezone.utc).isoformat(),
    }
    if provenance:
        sidecar.update(provenance)
    with open(str(path) + ".json", "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_field(path):
    """Read a field snapshot written by :func:`save_field`."""
    with open(path, "rb") as fh:
        head = fh.read(_SNAPSHOT_HEADER.size)
        if len(head) < _SNAPSHOT_HEADER.size:
            raise ConfigurationError(f"{path}: truncated snapshot header")
        magic, n, length, ncomp = _SNAPSHOT_HEADER.unpack(head)
        if magic != SNAPSHOT_MAGIC:
            raise ConfigurationError(f"{path}: not a field snapshot (bad magic)")
        if ncomp != 3:
            raise ConfigurationError(f"{path}: expected 3 components, got {ncomp}")
        payload = fh.read()
    expected = 3 * n**3 * 16
    if len(payload) != expected:
        raise ConfigurationError(
            f"{path}: payload has {len(payload)} bytes, expected {expected}"
        )
    ordered = np.frombuffer(payload, dtype="<c16").reshape(3, n, n, n)
    coeffs = np.fft.ifftshift(ordered.astype(np.complex128), axes=(-3, -2, -1))
    grid = WaveGrid(int(n), float(length))
    return SpectralVelocity(grid, np.ascontiguousarray(coeffs))


