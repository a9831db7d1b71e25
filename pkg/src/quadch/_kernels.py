"""Pointwise hot kernels with numba and pure-numpy implementations.

Every solver iteration evaluates a handful of elementwise expressions over
the whole grid (double-well terms, the auxiliary-variable cascade, the
chemical-potential assembly).  The numba path fuses each of these into a
single pass; the numpy path is the reference implementation.

Backend selection: environment variable ``QUADCH_NUMBA`` set to ``0``,
``false``, ``no`` or ``off`` forces the numpy path.  Anything else (or the
variable unset) uses numba when it is importable.  ``select()`` rebinds the
backend at runtime (used by the benchmark and by backend-equivalence tests);
solver modules always call through this module's namespace so rebinding
takes effect immediately.
"""

import os

import numpy as np

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _HAVE_NUMBA = False


# ---------------------------------------------------------------------------
# numpy reference implementations
# ---------------------------------------------------------------------------


def _double_well_np(u):
    """F(u) = (u^2 - 1)^2 / 4."""
    v = u * u - 1.0
    return 0.25 * v * v


def _double_well_slope_np(a, b):
    """Difference quotient f with F(a) - F(b) = f * (a - b), division-free."""
    return 0.25 * (a * a + b * b - 2.0) * (a + b)


def _iso_nonlinear_np(um, un, qn, inv_eps2):
    """2/eps^2 * U_mid (.) Q_mid with Q_mid regenerated from the exact update.

    um is the midpoint field (U_n + U_next)/2.
    """
    qm = qn + um * (um - un)
    return (2.0 * inv_eps2) * um * qm


def _aniso_aux_next_np(ux1, uy1, w1, u1, ux0, uy0, w0, u0,
                       y1, y2, y3, y4, y5, y6, z1, z2, p1):
    """One cascade update; returns the nine next-level fields plus the
    reciprocal-update denominator for the caller to validate."""
    ny1 = y1 + (ux1 - ux0) * (ux1 + ux0)
    ny2 = y2 + (uy1 - uy0) * (uy1 + uy0)
    s0 = y1 + y2
    s1 = ny1 + ny2
    dy3 = (s1 - s0) * (s1 + s0)
    ny3 = y3 + dy3
    den = 1.0 + y4 * dy3
    ny4 = y4 / den
    ny5 = y5 + (ny1 - y1) * (ny1 + y1) + (ny2 - y2) * (ny2 + y2)
    ny6 = y6 + (ny4 * ny5 - y4 * y5)
    nz1 = z1 + 0.5 * (u1 - u0) * (u1 + u0)
    nz2 = z2 + (nz1 - z1) * (nz1 + z1)
    np1 = p1 + (w1 - w0) * (w1 + w0)
    return ny1, ny2, ny3, ny4, ny5, ny6, nz1, nz2, np1, den


def _aniso_mu_terms_np(u1, ux1, uy1, w1, u0, ux0, uy0, w0,
                       y1, y2, y4, y5, y6, ny1, ny2, ny4, ny5, ny6,
                       alpha, inv_eps2, beta):
    """Pointwise pieces (A, Bx, By, C) of the anisotropic chemical potential."""
    g0 = 1.0 - 3.0 * alpha + 4.0 * alpha * y6
    g1 = 1.0 - 3.0 * alpha + 4.0 * alpha * ny6
    gm = 0.5 * (g0 + g1)
    f = 0.25 * (u1 * u1 + u0 * u0 - 2.0) * (u1 + u0)
    a_term = inv_eps2 * gm * f
    # Level-averaged quadratic densities; these make the discrete energy
    # difference identity exact.
    psi = (0.25 * (ux1 * ux1 + ux0 * ux0 + uy1 * uy1 + uy0 * uy0)
           + inv_eps2 * 0.5 * (_double_well_np(u1) + _double_well_np(u0))
           + 0.25 * beta * (w1 * w1 + w0 * w0))
    y1m = 0.5 * (y1 + ny1)
    y2m = 0.5 * (y2 + ny2)
    y4m = 0.5 * (y4 + ny4)
    y5m = 0.5 * (y5 + ny5)
    kk = y5m * ny4 * y4 * (y1m + y2m)
    uxm = 0.5 * (ux1 + ux0)
    uym = 0.5 * (uy1 + uy0)
    wm = 0.5 * (w1 + w0)
    coef = 16.0 * alpha * psi
    bx = gm * uxm + coef * uxm * (y4m * y1m - kk)
    by = gm * uym + coef * uym * (y4m * y2m - kk)
    c_term = beta * gm * wm
    return a_term, bx, by, c_term


_NUMPY_IMPLS = {
    "double_well": _double_well_np,
    "double_well_slope": _double_well_slope_np,
    "iso_nonlinear": _iso_nonlinear_np,
    "aniso_aux_next": _aniso_aux_next_np,
    "aniso_mu_terms": _aniso_mu_terms_np,
}


# ---------------------------------------------------------------------------
# numba twins (single fused pass per kernel)
# ---------------------------------------------------------------------------

if _HAVE_NUMBA:

    @njit(cache=True)
    def _double_well_nb(u):
        out = np.empty_like(u)
        for i in range(u.shape[0]):
            for j in range(u.shape[1]):
                v = u[i, j] * u[i, j] - 1.0
                out[i, j] = 0.25 * v * v
        return out

    @njit(cache=True)
    def _double_well_slope_nb(a, b):
        out = np.empty_like(a)
        for i in range(a.shape[0]):
            for j in range(a.shape[1]):
                out[i, j] = 0.25 * (a[i, j] * a[i, j] + b[i, j] * b[i, j] - 2.0) \
                    * (a[i, j] + b[i, j])
        return out

    @njit(cache=True)
    def _iso_nonlinear_nb(um, un, qn, inv_eps2):
        out = np.empty_like(um)
        c = 2.0 * inv_eps2
        for i in range(um.shape[0]):
            for j in range(um.shape[1]):
                m = um[i, j]
                qm = qn[i, j] + m * (m - un[i, j])
                out[i, j] = c * m * qm
        return out

    @njit(cache=True)
    def _aniso_aux_next_nb(ux1, uy1, w1, u1, ux0, uy0, w0, u0,
                           y1, y2, y3, y4, y5, y6, z1, z2, p1):
        shape = ux1.shape
        ny1 = np.empty(shape)
        ny2 = np.empty(shape)
        ny3 = np.empty(shape)
        ny4 = np.empty(shape)
        ny5 = np.empty(shape)
        ny6 = np.empty(shape)
        nz1 = np.empty(shape)
        nz2 = np.empty(shape)
        np1 = np.empty(shape)
        den = np.empty(shape)
        for i in range(shape[0]):
            for j in range(shape[1]):
                a1 = y1[i, j] + (ux1[i, j] - ux0[i, j]) * (ux1[i, j] + ux0[i, j])
                a2 = y2[i, j] + (uy1[i, j] - uy0[i, j]) * (uy1[i, j] + uy0[i, j])
                s0 = y1[i, j] + y2[i, j]
                s1 = a1 + a2
                d3 = (s1 - s0) * (s1 + s0)
                dd = 1.0 + y4[i, j] * d3
                a4 = y4[i, j] / dd
                a5 = y5[i, j] + (a1 - y1[i, j]) * (a1 + y1[i, j]) \
                    + (a2 - y2[i, j]) * (a2 + y2[i, j])
                ny1[i, j] = a1
                ny2[i, j] = a2
                ny3[i, j] = y3[i, j] + d3
                ny4[i, j] = a4
                ny5[i, j] = a5
                ny6[i, j] = y6[i, j] + (a4 * a5 - y4[i, j] * y5[i, j])
                b1 = z1[i, j] + 0.5 * (u1[i, j] - u0[i, j]) * (u1[i, j] + u0[i, j])
                nz1[i, j] = b1
                nz2[i, j] = z2[i, j] + (b1 - z1[i, j]) * (b1 + z1[i, j])
                np1[i, j] = p1[i, j] + (w1[i, j] - w0[i, j]) * (w1[i, j] + w0[i, j])
                den[i, j] = dd
        return ny1, ny2, ny3, ny4, ny5, ny6, nz1, nz2, np1, den

    @njit(cache=True)
    def _aniso_mu_terms_nb(u1, ux1, uy1, w1, u0, ux0, uy0, w0,
                           y1, y2, y4, y5, y6, ny1, ny2, ny4, ny5, ny6,
                           alpha, inv_eps2, beta):
        shape = u1.shape
        a_term = np.empty(shape)
        bx = np.empty(shape)
        by = np.empty(shape)
        c_term = np.empty(shape)
        base = 1.0 - 3.0 * alpha
        for i in range(shape[0]):
            for j in range(shape[1]):
                g0 = base + 4.0 * alpha * y6[i, j]
                g1 = base + 4.0 * alpha * ny6[i, j]
                gm = 0.5 * (g0 + g1)
                f = 0.25 * (u1[i, j] * u1[i, j] + u0[i, j] * u0[i, j] - 2.0) \
                    * (u1[i, j] + u0[i, j])
                a_term[i, j] = inv_eps2 * gm * f
                v1 = u1[i, j] * u1[i, j] - 1.0
                v0 = u0[i, j] * u0[i, j] - 1.0
                fw = 0.125 * (v1 * v1 + v0 * v0)
                psi = (0.25 * (ux1[i, j] * ux1[i, j] + ux0[i, j] * ux0[i, j]
                               + uy1[i, j] * uy1[i, j] + uy0[i, j] * uy0[i, j])
                       + inv_eps2 * fw
                       + 0.25 * beta * (w1[i, j] * w1[i, j] + w0[i, j] * w0[i, j]))
                y1m = 0.5 * (y1[i, j] + ny1[i, j])
                y2m = 0.5 * (y2[i, j] + ny2[i, j])
                y4m = 0.5 * (y4[i, j] + ny4[i, j])
                y5m = 0.5 * (y5[i, j] + ny5[i, j])
                kk = y5m * ny4[i, j] * y4[i, j] * (y1m + y2m)
                uxm = 0.5 * (ux1[i, j] + ux0[i, j])
                uym = 0.5 * (uy1[i, j] + uy0[i, j])
                wm = 0.5 * (w1[i, j] + w0[i, j])
                coef = 16.0 * alpha * psi
                bx[i, j] = gm * uxm + coef * uxm * (y4m * y1m - kk)
                by[i, j] = gm * uym + coef * uym * (y4m * y2m - kk)
                c_term[i, j] = beta * gm * wm
        return a_term, bx, by, c_term

    _NUMBA_IMPLS = {
        "double_well": _double_well_nb,
        "double_well_slope": _double_well_slope_nb,
        "iso_nonlinear": _iso_nonlinear_nb,
        "aniso_aux_next": _aniso_aux_next_nb,
        "aniso_mu_terms": _aniso_mu_terms_nb,
    }
else:  # pragma: no cover
    _NUMBA_IMPLS = {}


IMPLS = {"numpy": _NUMPY_IMPLS}
if _NUMBA_IMPLS:
    IMPLS["numba"] = _NUMBA_IMPLS

_backend = "numpy"


def backend() -> str:
    """Name of the currently selected backend."""
    return _backend


def select(name: str) -> None:
    """Bind the named backend ("numpy" or "numba") module-wide."""
    global _backend, double_well, double_well_slope, iso_nonlinear
    global aniso_aux_next, aniso_mu_terms
    impls = IMPLS[name]
    double_well = impls["double_well"]
    double_well_slope = impls["double_well_slope"]
    iso_nonlinear = impls["iso_nonlinear"]
    aniso_aux_next = impls["aniso_aux_next"]
    aniso_mu_terms = impls["aniso_mu_terms"]
    _backend = name


def _default_backend() -> str:
    flag = os.environ.get("QUADCH_NUMBA", "").strip().lower()
    if flag in ("0", "false", "no", "off"):
        return "numpy"
    return "numba" if "numba" in IMPLS else "numpy"


select(_default_backend())
