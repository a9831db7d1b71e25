"""Periodic 2-D grids, Fourier pseudo-spectral differentiation, and discrete inner products.

All solver modules share this machinery.  Fields live on a uniform periodic
grid; derivatives act as diagonal multipliers on the (half-) spectrum:
odd-order derivatives use i*k with the Nyquist mode zeroed, even-order
derivatives use the real multiplier k^2 including the Nyquist mode.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.fft as _fft

from .errors import GridMismatchError, NonFiniteFieldError


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on [ax, bx) x [ay, by)."""

    nx: int
    ny: int
    ax: float = 0.0
    bx: float = 2.0 * np.pi
    ay: float = 0.0
    by: float = 2.0 * np.pi

    def __post_init__(self):
        for n, name in ((self.nx, "nx"), (self.ny, "ny")):
            if n < 4 or n % 2 != 0:
                raise ValueError(f"{name} must be even and >= 4, got {n}")
        if self.bx <= self.ax or self.by <= self.ay:
            raise ValueError("domain bounds must satisfy ax < bx and ay < by")

    @property
    def lx(self) -> float:
        return self.bx - self.ax

    @property
    def ly(self) -> float:
        return self.by - self.ay

    @property
    def hx(self) -> float:
        return self.lx / self.nx

    @property
    def hy(self) -> float:
        return self.ly / self.ny

    @property
    def cell_area(self) -> float:
        return self.hx * self.hy

    @property
    def measure(self) -> float:
        """Discrete domain measure hx*hy*nx*ny."""
        return self.cell_area * self.nx * self.ny

    def meshgrid(self):
        """Node coordinates (X, Y), each of shape (nx, ny)."""
        x = self.ax + self.hx * np.arange(self.nx)
        y = self.ay + self.hy * np.arange(self.ny)
        return np.meshgrid(x, y, indexing="ij")


def _check_finite(values):
    if not np.all(np.isfinite(values)):
        raise NonFiniteFieldError("field contains NaN or Inf entries")


@dataclass
class GridField:
    """Real scalar field sampled on a Grid, stored row-major as (nx, ny)."""

    values: np.ndarray
    grid: Grid

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)
        if self.values.shape != (self.grid.nx, self.grid.ny):
            raise GridMismatchError(
                f"values shape {self.values.shape} does not match grid "
                f"({self.grid.nx}, {self.grid.ny})"
            )
        _check_finite(self.values)

    def copy(self) -> "GridField":
        return GridField(self.values.copy(), self.grid)


def _same_grid(*fields):
    g = fields[0].grid
    for f in fields[1:]:
        if f.grid != g:
            raise GridMismatchError("fields are defined on different grids")
    return g


class SpectralWorkspace:
    """Wavenumber tables and transform helpers for one grid.

    Holds precomputed multiplier arrays for the half spectrum produced by
    rfft2 (real fields).  Instances carry no per-call state besides numpy
    temporaries, but by convention a workspace serves one simulation thread
    at a time; independent simulations should build their own.
    """

    def __init__(self, grid: Grid):
        self.grid = grid
        nx, ny = grid.nx, grid.ny
        kx = 2.0 * np.pi / grid.lx * np.fft.fftfreq(nx, d=1.0 / nx)
        ky = 2.0 * np.pi / grid.ly * np.arange(ny // 2 + 1)
        self.kx = kx
        self.ky = ky
        KX = kx[:, None]
        KY = ky[None, :]
        # Odd-derivative multipliers zero the Nyquist mode of their direction.
        ikx = 1j * KX * np.ones_like(KY)
        ikx[nx // 2, :] = 0.0
        iky = 1j * KY * np.ones_like(KX)
        iky[:, ny // 2] = 0.0
        self.ikx = ikx
        self.iky = iky
        self.k2 = KX**2 + KY**2  # full multiplier, Nyquist included
        self.minus_lap = self.k2
        self.kmin2 = min((2.0 * np.pi / grid.lx) ** 2,
                         (2.0 * np.pi / grid.ly) ** 2)
        # Parseval weights for the half spectrum: interior ky columns count twice.
        w = np.full(ny // 2 + 1, 2.0)
        w[0] = 1.0
        w[ny // 2] = 1.0
        self.parseval_w = w[None, :] * np.ones((nx, 1))
        self._norm_scale = grid.cell_area / (nx * ny)

    # -- array-level transforms (hot path) --------------------------------

    def fft(self, a: np.ndarray) -> np.ndarray:
        return _fft.rfft2(a)

    def ifft(self, ahat: np.ndarray) -> np.ndarray:
        return _fft.irfft2(ahat, s=(self.grid.nx, self.grid.ny))

    def dx_arr(self, a):
        return self.ifft(self.ikx * self.fft(a))

    def dy_arr(self, a):
        return self.ifft(self.iky * self.fft(a))

    def lap_arr(self, a):
        return self.ifft(-self.k2 * self.fft(a))

    def bilap_arr(self, a):
        return self.ifft(self.k2**2 * self.fft(a))

    def trilap_arr(self, a):
        return self.ifft(-(self.k2**3) * self.fft(a))

    def spectral_norm_h(self, ahat: np.ndarray) -> float:
        """norm_h of the real field whose half spectrum is ahat (Parseval)."""
        s = np.sum(self.parseval_w * (ahat.real**2 + ahat.imag**2))
        return float(np.sqrt(self._norm_scale * s))

    def mean_mode_zeroed(self, ahat: np.ndarray) -> np.ndarray:
        out = ahat.copy()
        out[0, 0] = 0.0
        return out


@lru_cache(maxsize=32)
def get_workspace(grid: Grid) -> SpectralWorkspace:
    """Shared per-grid workspace (grids are immutable and hashable)."""
    return SpectralWorkspace(grid)


def _apply(ws_method, f: GridField) -> GridField:
    _check_finite(f.values)
    out = ws_method(f.values)
    _check_finite(out)
    return GridField(out, f.grid)


def dx(f: GridField) -> GridField:
    """Spectral x-derivative; exact for resolved modes, Nyquist zeroed."""
    return _apply(get_workspace(f.grid).dx_arr, f)


def dy(f: GridField) -> GridField:
    """Spectral y-derivative; exact for resolved modes, Nyquist zeroed."""
    return _apply(get_workspace(f.grid).dy_arr, f)


def laplacian(f: GridField) -> GridField:
    """Spectral Laplacian: multiplies the spectrum by -(kx^2 + ky^2)."""
    return _apply(get_workspace(f.grid).lap_arr, f)


def bilaplacian(f: GridField) -> GridField:
    return _apply(get_workspace(f.grid).bilap_arr, f)


def trilaplacian(f: GridField) -> GridField:
    return _apply(get_workspace(f.grid).trilap_arr, f)


def inner_h(a: GridField, b: GridField) -> float:
    """Discrete L2 inner product hx*hy*sum(a*b), deterministic summation order."""
    g = _same_grid(a, b)
    return float(g.cell_area * np.sum(a.values * b.values))


def norm_h(a: GridField) -> float:
    g = a.grid
    return float(np.sqrt(g.cell_area * np.sum(a.values * a.values)))


def mean(f: GridField) -> float:
    """Field average inner_h(f, 1) / |domain| with the discrete measure."""
    _check_finite(f.values)
    return float(f.grid.cell_area * np.sum(f.values) / f.grid.measure)


def inner_h_arr(a: np.ndarray, b: np.ndarray, grid: Grid) -> float:
    return float(grid.cell_area * np.sum(a * b))


def norm_h_arr(a: np.ndarray, grid: Grid) -> float:
    return float(np.sqrt(grid.cell_area * np.sum(a * a)))
