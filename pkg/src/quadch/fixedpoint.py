"""Relaxed (Mann) fixed-point solver for the per-step midpoint systems.

The implicit step is recast as a fixed point of the semi-implicit map

    T(X) = inv[ (1 - dt/2 Lhat) ] ( (1 + dt/2 Lhat) Xhat_n + dt * Nhat(mid) )

applied in transform space, where ``Lhat`` is a frozen, negative
semidefinite diagonal symbol and ``Nhat`` evaluates the remaining terms at
the midpoint (X + X_n)/2.  Mann relaxation X <- (1-w) X + w T(X) converges
linearly whenever dt times the Lipschitz constant of the nonlinear part is
below 2.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import NonConvergenceError


@dataclass
class FixedPointConfig:
    """Relaxation weight, tolerance, and iteration limits.

    fp_tol is relative: iteration stops when the successive-iterate distance
    drops below fp_tol * (1 + |X|).
    """

    omega: float = 0.9
    fp_tol: float = 1e-11
    max_iter: int = 200
    divergence_factor: float = 1e3

    def __post_init__(self):
        if not (0.0 < self.omega <= 1.0):
            raise ValueError("omega must lie in (0, 1]")
        if self.fp_tol <= 0.0:
            raise ValueError("fp_tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


def _identity(a):
    return a


@dataclass
class LinearSymbol:
    """Diagonal multiplier of the frozen linear operator in transform space.

    ``forward``/``inverse`` map between state space and transform space;
    they default to the identity (plain ODE systems).  All multiplier
    entries must be <= 0 so that 1 - (dt/2) multiplier >= 1 for any dt > 0.
    """

    multiplier: np.ndarray
    forward: callable = _identity
    inverse: callable = _identity

    def __post_init__(self):
        self.multiplier = np.asarray(self.multiplier)
        if np.any(self.multiplier > 0.0):
            raise ValueError("linear symbol must be negative semidefinite")


@dataclass
class SolveReport:
    """Iteration diagnostics of one fixed-point solve."""

    iterations: int
    final_residual: float
    contraction: float | None
    converged: bool
    history: list = field(default_factory=list)


def build_symbol_iso(p, ws) -> LinearSymbol:
    """Frozen linear symbol -M (k^4 + beta k^6) of the isotropic step."""
    k2 = ws.k2
    mult = -p.mobility * (k2**2 + p.beta * k2**3)
    return LinearSymbol(mult, forward=ws.fft, inverse=ws.ifft)


def build_symbol_aniso(p, ws) -> LinearSymbol:
    """Anisotropic frozen symbol -M (1-3 alpha)(k^4 + beta k^6).

    Freezing the orientation factor at its lower bound 1 - 3 alpha keeps the
    symbol negative semidefinite and the leftover nonlinear part contractive.
    """
    if p.alpha >= 1.0 / 3.0:
        raise ValueError("anisotropy strength must satisfy alpha < 1/3")
    k2 = ws.k2
    mult = -p.mobility * (1.0 - 3.0 * p.alpha) * (k2**2 + p.beta * k2**3)
    return LinearSymbol(mult, forward=ws.fft, inverse=ws.ifft)


def make_midpoint_map(sym: LinearSymbol, nonlinear, x_n, dt: float):
    """Build T with the transform of x_n precomputed.

    ``nonlinear`` receives the midpoint state and must return the
    transform-space image of the nonlinear term (for identity transforms
    that is the term itself).
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    xhat_n = sym.forward(x_n)
    half = 0.5 * dt * sym.multiplier
    gain = (1.0 + half) * xhat_n
    denom = 1.0 - half

    def t_map(x):
        nhat = nonlinear(0.5 * (x + x_n))
        return sym.inverse((gain + dt * nhat) / denom)

    return t_map


def apply_T(sym: LinearSymbol, nonlinear, x_n, x, dt: float):
    """One application of the midpoint map T to the iterate x."""
    return make_midpoint_map(sym, nonlinear, x_n, dt)(x)


def _default_norm(a):
    return float(np.linalg.norm(np.ravel(a)))


def mann_solve(t_map, x0, cfg: FixedPointConfig, norm=_default_norm):
    """Iterate X <- (1-w) X + w T(X) until successive iterates settle.

    Convergence is declared when either the Mann iterates or the raw T
    outputs are closer than fp_tol * (1 + |X|); the returned solution is the
    last T output, so a constant map converges after two applications at any
    relaxation weight.  Residual growth beyond divergence_factor times the
    best residual seen aborts with a NonConvergenceError.
    """
    x = np.asarray(x0, dtype=float).copy()
    history = []
    tx_prev = None
    best = np.inf
    for m in range(1, cfg.max_iter + 1):
        tx = t_map(x)
        x_new = x + cfg.omega * (tx - x)
        diff = norm(x_new - x)
        history.append(diff)
        scale = 1.0 + norm(x_new)
        t_diff = norm(tx - tx_prev) if tx_prev is not None else np.inf
        if diff <= cfg.fp_tol * scale or t_diff <= cfg.fp_tol * scale:
            report = SolveReport(m, diff / scale, _contraction(history), True,
                                 history)
            return tx, report
        best = min(best, diff)
        if diff > cfg.divergence_factor * best:
            report = SolveReport(m, diff / scale, _contraction(history), False,
                                 history)
            raise NonConvergenceError(
                f"fixed-point residual grew {cfg.divergence_factor:g}-fold "
                f"after {m} iterations", report)
        tx_prev = tx
        x = x_new
    report = SolveReport(cfg.max_iter, history[-1] / scale,
                         _contraction(history), False, history)
    raise NonConvergenceError(
        f"no convergence within {cfg.max_iter} iterations", report)


def _contraction(history):
    """Geometric mean of successive residual ratios."""
    ratios = [b / a for a, b in zip(history, history[1:]) if a > 0.0 and b > 0.0]
    if not ratios:
        return None
    return float(np.exp(np.mean(np.log(ratios))))


def mann_solve_scheme(assemble, xhat0, uhat_n, sym: LinearSymbol, dt: float,
                      cfg: FixedPointConfig, r_accept: float, norm):
    """Mann iteration in transform space driven by the scheme residual.

    ``assemble(xhat)`` evaluates the full right-hand side at the candidate
    next state and returns (rhs_hat, payload); the residual is
    |(xhat - uhat_n)/dt - rhs_hat|.  The iterate with the smallest residual
    is retained, so a locally non-contractive nonlinearity (anisotropy terms
    near gradient-critical points) cannot discard an already acceptable
    candidate.  Acceptance: residual below the relative fp_tol target, or,
    once the iteration stops improving, below ``r_accept`` (the level at
    which the energy-dissipation budget of the step is still guaranteed).
    """
    half = 0.5 * dt * sym.multiplier
    denom = 1.0 - half
    xhat = xhat0.copy()
    best_r = np.inf
    best = None
    history = []
    stall = 0
    for m in range(1, cfg.max_iter + 1):
        rhs_hat, payload = assemble(xhat)
        r_hat = (xhat - uhat_n) / dt - rhs_hat
        r_norm = norm(r_hat)
        history.append(r_norm)
        r_tol = cfg.fp_tol * (1.0 + norm(rhs_hat))
        if r_norm <= r_tol:
            report = SolveReport(m, r_norm / (1.0 + norm(rhs_hat)),
                                 _contraction(history), True, history)
            return xhat, payload, report
        if r_norm < best_r:
            best_r = r_norm
            best = (xhat, payload, r_norm, norm(rhs_hat))
            stall = 0
        else:
            stall += 1
        giving_up = (stall >= 6
                     or r_norm > cfg.divergence_factor * best_r
                     or m == cfg.max_iter)
        if giving_up:
            if best_r <= r_accept:
                xhat, payload, r_norm, rhs_norm = best
                report = SolveReport(m, r_norm / (1.0 + rhs_norm),
                                     _contraction(history), True, history)
                return xhat, payload, report
            report = SolveReport(m, r_norm, _contraction(history), False,
                                 history)
            raise NonConvergenceError(
                f"scheme residual stalled at {best_r:.3e} above the "
                f"acceptance bound {r_accept:.3e} after {m} iterations",
                report)
        t_hat = (uhat_n + dt * rhs_hat - half * xhat) / denom
        xhat = xhat + cfg.omega * (t_hat - xhat)
    raise AssertionError("unreachable")
