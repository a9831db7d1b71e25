"""Fully discrete midpoint scheme for the fourfold-anisotropic Cahn-Hilliard
equation.

The orientation factor Gamma(theta) = 1 + alpha cos(4 theta) is carried in
quadratized form Gamma = 1 - 3 alpha + 4 alpha Y6 through the auxiliary
cascade

    Y1 = Ux^2, Y2 = Uy^2, Y3 = (Y1+Y2)^2, Y4 = 1/Y3,
    Y5 = Y1^2 + Y2^2,     Y6 = Y4 Y5,
    Z1 = (U^2-1)/2,       Z2 = Z1^2,      Phi1 = (lap U)^2.

Every update is solved in closed form from its midpoint product rule, so
squares stay exact squares and Y4*Y3 = 1 is preserved identically; the
discrete energy difference then reduces to dt (mu_mid, U_t)_h and the step
dissipates the energy up to the solver residual.
"""

from dataclasses import dataclass, field

import numpy as np

from . import _kernels as kernels
from .errors import (GridMismatchError, NonFiniteFieldError,
                     SingularUpdateError, StepFailureError)
from .fixedpoint import (FixedPointConfig, SolveReport, build_symbol_aniso,
                         mann_solve_scheme)
from .ch_iso import ModelParams, energy_safe_residual
from .grid import GridField, SpectralWorkspace, get_workspace, inner_h_arr

AUX_NAMES = ("y1", "y2", "y3", "y4", "y5", "y6", "z1", "z2", "phi1")


@dataclass
class AnisoParams(ModelParams):
    """Model parameters plus anisotropy strength and fold symmetry.

    Stepping requires 0 <= alpha < 1/3 so the quadratized factor satisfies
    Gamma >= 1 - 3 alpha > 0.
    """

    alpha: float = 0.1
    fold: str = "fourfold"

    def __post_init__(self):
        super().__post_init__()
        if not (0.0 <= self.alpha < 1.0 / 3.0):
            raise ValueError("stepping requires 0 <= alpha < 1/3")
        if self.fold not in ("twofold", "fourfold"):
            raise ValueError("fold must be 'twofold' or 'fourfold'")


@dataclass(frozen=True)
class GammaSpec:
    """Orientation-energy specification used by the analysis routines."""

    fold: str = "fourfold"
    alpha: float = 0.0

    def __post_init__(self):
        if self.fold not in ("twofold", "fourfold"):
            raise ValueError("fold must be 'twofold' or 'fourfold'")
        if self.alpha < 0.0:
            raise ValueError("alpha must be non-negative")


@dataclass
class AnisoState:
    """Phase field plus the nine auxiliary fields at one time level."""

    u: GridField
    y1: GridField
    y2: GridField
    y3: GridField
    y4: GridField
    y5: GridField
    y6: GridField
    z1: GridField
    z2: GridField
    phi1: GridField
    solve_report: SolveReport | None = field(default=None, repr=False)
    _dux: np.ndarray | None = field(default=None, repr=False)
    _duy: np.ndarray | None = field(default=None, repr=False)
    _dw: np.ndarray | None = field(default=None, repr=False)

    @property
    def grid(self):
        return self.u.grid

    def aux_fields(self):
        return {name: getattr(self, name) for name in AUX_NAMES}

    def derivs(self, ws: SpectralWorkspace):
        """Gradient components and Laplacian of U (cached by the stepper)."""
        if self._dux is None:
            uhat = ws.fft(self.u.values)
            self._dux = ws.ifft(ws.ikx * uhat)
            self._duy = ws.ifft(ws.iky * uhat)
            self._dw = ws.ifft(-ws.k2 * uhat)
        return self._dux, self._duy, self._dw


def init_aniso(u0: GridField, p: AnisoParams, delta_reg: float = 1e-4) -> AnisoState:
    """Build the auxiliary cascade from U0.

    delta_reg is added to Y3 at initialization, so Y4 = 1/Y3 is finite where
    the gradient vanishes and Y4*Y3 = 1 holds exactly from the start.  The
    shift cancels out of every square-difference update, and the closed-form
    reciprocal update preserves Y4*Y3 = 1 identically, so the regularization
    never re-enters.  It caps Y4 at 1/delta_reg, which also bounds the
    stiffness the step solver sees at gradient-critical points.
    """
    if delta_reg < 0.0:
        raise ValueError("delta_reg must be non-negative")
    g = u0.grid
    ws = get_workspace(g)
    u = u0.values
    uhat = ws.fft(u)
    ux = ws.ifft(ws.ikx * uhat)
    uy = ws.ifft(ws.iky * uhat)
    w = ws.ifft(-ws.k2 * uhat)
    y1 = ux * ux
    y2 = uy * uy
    s = y1 + y2
    y3 = s * s + delta_reg
    y4 = 1.0 / y3
    y5 = y1 * y1 + y2 * y2
    y6 = y4 * y5
    z1 = 0.5 * (u * u - 1.0)
    z2 = z1 * z1
    phi1 = w * w
    fields = [y1, y2, y3, y4, y5, y6, z1, z2, phi1]
    for a in fields:
        if not np.all(np.isfinite(a)):
            raise NonFiniteFieldError("non-finite auxiliary at initialization")
    state = AnisoState(u0.copy(), *[GridField(a, g) for a in fields])
    state._dux, state._duy, state._dw = ux, uy, w
    return state


def gamma_from_y6(y6: GridField, alpha: float) -> GridField:
    """Pointwise orientation factor 1 - 3 alpha + 4 alpha Y6."""
    return GridField(1.0 - 3.0 * alpha + 4.0 * alpha * y6.values, y6.grid)


def _cascade(un, uxn, uyn, wn, aux, u1, ux1, uy1, w1):
    """Closed-form auxiliary update; raises where the reciprocal update
    denominator is not positive."""
    out = kernels.aniso_aux_next(ux1, uy1, w1, u1, uxn, uyn, wn, un, *aux)
    den = out[9]
    dmin = den.min()
    if dmin <= 0.0:
        locs = np.argwhere(den <= 0.0)
        raise SingularUpdateError(
            f"reciprocal update denominator <= 0 at {len(locs)} points "
            f"(min {dmin:.3e}, first at {tuple(locs[0])})", locations=locs)
    return out[:9]


def aux_update(prev: AnisoState, u_next: GridField) -> AnisoState:
    """Evaluate the cascade at the given next phase field.

    Returns the full next state (U_next plus updated auxiliaries); the
    phase field itself is taken as supplied.
    """
    if u_next.grid != prev.grid:
        raise GridMismatchError("U_next grid differs from the state grid")
    g = prev.grid
    ws = get_workspace(g)
    uxn, uyn, wn = prev.derivs(ws)
    aux = [getattr(prev, n).values for n in AUX_NAMES]
    nexthat = ws.fft(u_next.values)
    ux1 = ws.ifft(ws.ikx * nexthat)
    uy1 = ws.ifft(ws.iky * nexthat)
    w1 = ws.ifft(-ws.k2 * nexthat)
    nxt = _cascade(prev.u.values, uxn, uyn, wn, aux,
                   u_next.values, ux1, uy1, w1)
    state = AnisoState(u_next.copy(), *[GridField(a, g) for a in nxt])
    state._dux, state._duy, state._dw = ux1, uy1, w1
    return state


def _mu_hat(ws, p: AnisoParams, un, uxn, uyn, wn, aux, u1, ux1, uy1, w1, nxt):
    """Half-spectrum of mu = A - Dx Bx - By Dy^T + lap C."""
    y1, y2, _, y4, y5, y6 = aux[0], aux[1], aux[2], aux[3], aux[4], aux[5]
    ny1, ny2, ny4, ny5, ny6 = nxt[0], nxt[1], nxt[3], nxt[4], nxt[5]
    a_t, bx, by, c_t = kernels.aniso_mu_terms(
        u1, ux1, uy1, w1, un, uxn, uyn, wn,
        y1, y2, y4, y5, y6, ny1, ny2, ny4, ny5, ny6,
        p.alpha, 1.0 / p.eps**2, p.beta)
    mu_hat = ws.fft(a_t) - ws.ikx * ws.fft(bx) - ws.iky * ws.fft(by)
    if p.beta != 0.0:
        mu_hat -= ws.k2 * ws.fft(c_t)
    return mu_hat


def mu_aniso(prev: AnisoState, nxt: AnisoState, p: AnisoParams) -> GridField:
    """Chemical potential of the step from ``prev`` to ``nxt``."""
    if prev.grid != nxt.grid:
        raise GridMismatchError("states live on different grids")
    ws = get_workspace(prev.grid)
    uxn, uyn, wn = prev.derivs(ws)
    ux1, uy1, w1 = nxt.derivs(ws)
    aux = [getattr(prev, n).values for n in AUX_NAMES]
    nxt_aux = [getattr(nxt, n).values for n in AUX_NAMES]
    mu_hat = _mu_hat(ws, p, prev.u.values, uxn, uyn, wn, aux,
                     nxt.u.values, ux1, uy1, w1, nxt_aux)
    return GridField(ws.ifft(mu_hat), prev.grid)


def energy_aniso(s: AnisoState, p: AnisoParams) -> float:
    """Discrete anisotropic energy with Gamma taken from the stored Y6:
    1/2 |U|_{1,Gamma}^2 + eps^-2 (Gamma F(U), 1)_h + beta/2 |lap U|_{Gamma}^2."""
    ws = get_workspace(s.grid)
    ux, uy, w = s.derivs(ws)
    gam = 1.0 - 3.0 * p.alpha + 4.0 * p.alpha * s.y6.values
    fu = kernels.double_well(s.u.values)
    g = s.grid
    e = 0.5 * inner_h_arr(gam, ux * ux + uy * uy, g) \
        + inner_h_arr(gam, fu, g) / p.eps**2
    if p.beta != 0.0:
        e += 0.5 * p.beta * inner_h_arr(gam, w * w, g)
    return float(e)


def aniso_step(prev: AnisoState, dt: float, p: AnisoParams,
               fp: FixedPointConfig, ws: SpectralWorkspace | None = None) -> AnisoState:
    """Advance one anisotropic step.

    The fixed-point map regenerates the full auxiliary cascade from each
    candidate field, so the accepted state satisfies every cascade line
    exactly by construction.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    if p.fold != "fourfold":
        raise ValueError("stepping supports the fourfold anisotropy only")
    g = prev.grid
    if ws is None:
        ws = get_workspace(g)
    un = prev.u.values
    uxn, uyn, wn = prev.derivs(ws)
    aux = [getattr(prev, n).values for n in AUX_NAMES]
    uhat_n = ws.fft(un)
    sym = build_symbol_aniso(p, ws)
    mk2 = -p.mobility * ws.k2

    def assemble(xhat):
        """Right-hand side and cascade output for a candidate next spectrum."""
        u1 = ws.ifft(xhat)
        ux1 = ws.ifft(ws.ikx * xhat)
        uy1 = ws.ifft(ws.iky * xhat)
        w1 = ws.ifft(-ws.k2 * xhat)
        nxt = _cascade(un, uxn, uyn, wn, aux, u1, ux1, uy1, w1)
        mu_hat = _mu_hat(ws, p, un, uxn, uyn, wn, aux, u1, ux1, uy1, w1, nxt)
        return mk2 * mu_hat, (u1, nxt, (ux1, uy1, w1))

    try:
        xhat, payload, report = mann_solve_scheme(
            assemble, uhat_n, uhat_n, sym, dt, fp,
            energy_safe_residual(ws, fp, dt), ws.spectral_norm_h)
    except Exception as exc:
        if hasattr(exc, "report"):
            raise StepFailureError(f"anisotropic step failed: {exc}",
                                   report=exc.report) from exc
        raise

    x, nxt, derivs1 = payload
    if not np.all(np.isfinite(x)):
        raise NonFiniteFieldError("step produced non-finite field")
    out = AnisoState(GridField(x, g), *[GridField(a, g) for a in nxt])
    out._dux, out._duy, out._dw = derivs1
    out.solve_report = report
    return out
