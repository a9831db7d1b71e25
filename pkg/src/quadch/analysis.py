"""Linear-stability, coarsening, and orientation diagnostics.

Continuous and discrete dispersion relations about a homogeneous state,
spinodal classification, unstable wavenumber bands, surface-stiffness
criticality, power-law fits for coarsening and temporal order, and the
interface-orientation histogram used to detect missing orientations.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .ch_aniso import GammaSpec
from .ch_iso import ModelParams
from .errors import PoleError
from .grid import GridField, get_workspace


# ---------------------------------------------------------------------------
# potentials
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PotentialSpec:
    """Bulk potential with value, slope, and curvature callables."""

    name: str
    f: callable
    df: callable
    d2f: callable
    domain: tuple = (-np.inf, np.inf)

    def check_domain(self, u):
        lo, hi = self.domain
        if not (lo < u < hi):
            raise ValueError(f"{self.name} potential is defined on ({lo}, {hi})")

    @staticmethod
    def double_well() -> "PotentialSpec":
        return PotentialSpec(
            "double_well",
            f=lambda u: 0.25 * (u * u - 1.0) ** 2,
            df=lambda u: u**3 - u,
            d2f=lambda u: 3.0 * u * u - 1.0,
        )

    @staticmethod
    def flory_huggins(theta: float) -> "PotentialSpec":
        return PotentialSpec(
            "flory_huggins",
            f=lambda u: (1 + u) * math.log1p(u) + (1 - u) * math.log1p(-u)
            + theta * u * u,
            df=lambda u: math.log1p(u) - math.log1p(-u) + 2.0 * theta * u,
            d2f=lambda u: 1.0 / (1.0 + u) + 1.0 / (1.0 - u) + 2.0 * theta,
            domain=(-1.0, 1.0),
        )

    @staticmethod
    def sixth_order(a: float, b: float, c: float) -> "PotentialSpec":
        return PotentialSpec(
            "sixth_order",
            f=lambda u: a / 2 * u**2 + b / 4 * u**4 + c / 6 * u**6,
            df=lambda u: a * u + b * u**3 + c * u**5,
            d2f=lambda u: a + 3.0 * b * u**2 + 5.0 * c * u**4,
        )


@dataclass
class DispersionSpec:
    """Linearization data: model parameters, background state, optional
    orientation factor, and the potential curvature."""

    params: ModelParams
    u0: float = 0.0
    gamma: GammaSpec | None = None
    potential: PotentialSpec = field(default_factory=PotentialSpec.double_well)

    @property
    def d2f_u0(self) -> float:
        return float(self.potential.d2f(self.u0))


# ---------------------------------------------------------------------------
# dispersion relations and amplification factors
# ---------------------------------------------------------------------------


def lambda_iso(spec: DispersionSpec, k: float) -> float:
    """Growth rate -M k^2 (k^2 + eps^-2 F''(u0) + beta k^4)."""
    if k < 0.0:
        raise ValueError("wavenumber magnitude must be non-negative")
    p = spec.params
    k2 = k * k
    return float(-p.mobility * k2 * (k2 + spec.d2f_u0 / p.eps**2 + p.beta * k2 * k2))


def _gamma_factor(gs: GammaSpec | None, kx: float, ky: float) -> float:
    if gs is None or gs.alpha == 0.0:
        return 1.0
    k2 = kx * kx + ky * ky
    if gs.fold == "fourfold":
        cos4 = (kx**4 - 6.0 * kx**2 * ky**2 + ky**4) / k2**2
        return 1.0 + gs.alpha * cos4
    cos2 = (kx * kx - ky * ky) / k2
    return 1.0 + gs.alpha * cos2


def lambda_aniso(spec: DispersionSpec, kx: float, ky: float) -> float:
    """Anisotropic growth rate; defined as 0 at the zero wavevector by the
    continuity of k^2 Gamma(theta_k)."""
    if kx == 0.0 and ky == 0.0:
        return 0.0
    p = spec.params
    k2 = kx * kx + ky * ky
    gam = _gamma_factor(spec.gamma, kx, ky)
    return float(-p.mobility * k2 * gam
                 * (k2 + spec.d2f_u0 / p.eps**2 + p.beta * k2 * k2))


def unstable_band(spec: DispersionSpec):
    """Interval (0, k_max) of unstable wavenumber magnitudes or None.

    For beta > 0 the upper edge is sqrt(s+) with s+ the positive root of
    beta s^2 + s + eps^-2 F''(u0); for beta = 0 it is eps^-1 sqrt(-F'').
    """
    p = spec.params
    a0 = spec.d2f_u0 / p.eps**2
    if a0 >= 0.0:
        return None
    if p.beta == 0.0:
        return (0.0, math.sqrt(-a0))
    s_plus = (-1.0 + math.sqrt(1.0 - 4.0 * p.beta * a0)) / (2.0 * p.beta)
    return (0.0, math.sqrt(s_plus))


_METHODS = ("EE", "IE", "IM", "exact")


def amplification(method: str, spec: DispersionSpec, kx: float, ky: float,
                  dt: float) -> float:
    """Per-step mode multiplier of the named time discretization."""
    if method not in _METHODS:
        raise ValueError(f"method must be one of {_METHODS}")
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    lam = lambda_aniso(spec, kx, ky)
    z = dt * lam
    if method == "exact":
        return float(math.exp(z))
    if method == "EE":
        return float(1.0 + z)
    if method == "IE":
        if 1.0 - z == 0.0:
            raise PoleError("implicit Euler amplification pole at dt*lambda = 1")
        return float(1.0 / (1.0 - z))
    if 1.0 - 0.5 * z == 0.0:
        raise PoleError("implicit midpoint amplification pole at dt*lambda = 2")
    return float((1.0 + 0.5 * z) / (1.0 - 0.5 * z))


def spinodal_classify(potential: PotentialSpec, u0: float) -> str:
    """"unstable" iff F''(u0) < 0, else "stable"."""
    potential.check_domain(u0)
    return "unstable" if potential.d2f(u0) < 0.0 else "stable"


# ---------------------------------------------------------------------------
# surface stiffness
# ---------------------------------------------------------------------------


def stiffness(gs: GammaSpec, theta) -> float:
    """Surface stiffness Gamma + Gamma''; negative over an angular interval
    produces missing orientations."""
    theta = np.asarray(theta, dtype=float)
    if gs.fold == "twofold":
        out = 1.0 - 3.0 * gs.alpha * np.cos(2.0 * theta)
    else:
        out = 1.0 - 15.0 * gs.alpha * np.cos(4.0 * theta)
    return float(out) if out.ndim == 0 else out


def critical_alpha(gs: GammaSpec) -> float:
    """Largest anisotropy strength with non-negative stiffness for all
    angles: 1/3 (twofold), 1/15 (fourfold)."""
    return 1.0 / 3.0 if gs.fold == "twofold" else 1.0 / 15.0


# ---------------------------------------------------------------------------
# power-law fits
# ---------------------------------------------------------------------------


def coarsening_slope(times, energies, window):
    """Least-squares slope of log(E) vs log(t) over the window [t0, t1].

    Returns (slope, diagnostics) with the fit intercept, point count, and
    r^2 in the diagnostics dict.
    """
    t = np.asarray(times, dtype=float)
    e = np.asarray(energies, dtype=float)
    if t.shape != e.shape:
        raise ValueError("times and energies must have equal length")
    t0, t1 = window
    mask = (t >= t0) & (t <= t1) & (t > 0.0)
    if int(mask.sum()) < 10:
        raise ValueError(f"need >= 10 samples in window, got {int(mask.sum())}")
    if np.any(e[mask] <= 0.0):
        raise ValueError("energies must be positive for a log-log fit")
    lt = np.log(t[mask])
    le = np.log(e[mask])
    slope, intercept = np.polyfit(lt, le, 1)
    pred = slope * lt + intercept
    ss_res = float(np.sum((le - pred) ** 2))
    ss_tot = float(np.sum((le - le.mean()) ** 2))
    diag = {
        "n": int(mask.sum()),
        "intercept": float(intercept),
        "r2": 1.0 - ss_res / ss_tot if ss_tot > 0.0 else 1.0,
        "window": (float(t0), float(t1)),
    }
    return float(slope), diag


def temporal_order(dts, errors) -> float:
    """Least-squares slope of log(error) vs log(dt)."""
    d = np.asarray(dts, dtype=float)
    e = np.asarray(errors, dtype=float)
    if d.size < 2 or d.size != e.size:
        raise ValueError("need at least two (dt, error) pairs")
    if np.any(np.diff(d) >= 0.0):
        raise ValueError("dt values must be strictly decreasing")
    if np.any(e <= 0.0):
        raise ValueError("errors must be positive")
    slope, _ = np.polyfit(np.log(d), np.log(e), 1)
    return float(slope)


# ---------------------------------------------------------------------------
# interface orientations
# ---------------------------------------------------------------------------


@dataclass
class OrientationHistogram:
    """Interface-normal angle density and the detected gap intervals."""

    bin_edges: np.ndarray
    counts: np.ndarray
    density: np.ndarray
    gaps: list

    @property
    def has_gaps(self) -> bool:
        return len(self.gaps) > 0


def orientation_histogram(u: GridField, band_threshold: float = 0.9,
                          n_bins: int = 72,
                          gap_fraction: float = 0.05) -> OrientationHistogram:
    """Bin interface-normal angles atan2(Uy, Ux) over the interface band.

    Cells with |U| < band_threshold and |grad U| > 1e-6 contribute; gaps are
    maximal circular runs of bins whose density falls below gap_fraction of
    the maximum bin.
    """
    if not (0.0 < band_threshold < 1.0):
        raise ValueError("band_threshold must lie in (0, 1)")
    ws = get_workspace(u.grid)
    uhat = ws.fft(u.values)
    ux = ws.ifft(ws.ikx * uhat)
    uy = ws.ifft(ws.iky * uhat)
    grad = np.hypot(ux, uy)
    mask = (np.abs(u.values) < band_threshold) & (grad > 1e-6)
    if not np.any(mask):
        raise ValueError("interface band is empty")
    theta = np.arctan2(uy[mask], ux[mask])
    edges = np.linspace(-np.pi, np.pi, n_bins + 1)
    counts, _ = np.histogram(theta, bins=edges)
    density = counts / counts.sum()
    weak = density < gap_fraction * density.max()
    gaps = []
    for start, length in _circular_runs(weak):
        a0 = edges[start]
        a1 = edges[(start + length) % n_bins]
        gaps.append((float(a0), float(a1)))
    return OrientationHistogram(edges, counts, density, gaps)


def _circular_runs(flags: np.ndarray):
    """Maximal runs of True in a circular boolean array as (start, length)."""
    n = flags.size
    if flags.all():
        return [(0, n)]
    runs = []
    i = 0
    # rotate so position 0 is False; runs then never wrap ambiguously
    offset = int(np.argmin(flags))
    rolled = np.roll(flags, -offset)
    while i < n:
        if rolled[i]:
            j = i
            while j < n and rolled[j]:
                j += 1
            runs.append(((i + offset) % n, j - i))
            i = j
        else:
            i += 1
    return runs
