"""Quadratization of rational-like scalar functions.

A rational-like function (built from variables by sums, products, integer
powers, reciprocals, and real q-th roots) is rewritten as a quadratic
function on an extended space: every nonlinearity introduces an auxiliary
variable whose defining constraint is at most quadratic in the joint
variables.  The constraints are invariants of the lifted dynamics, so an
implicit-midpoint step of the lifted system keeps the solution on the
constraint manifold and thereby preserves the original energy structure.

The construction cases:

* products and integer powers pair factors left-to-right, halving the
  degree each round until at most two symbols remain (degree-2 results are
  left unlifted);
* a reciprocal introduces y with the constraint x*y - 1 = 0;
* a q-th root introduces the square-and-multiply chain u_{i+1} = u_i^2,
  v_{i+1} = v_i * u_i^{b_i} over the binary digits b_i of q, closed by the
  terminal constraint x = v_s * u_s.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import SingularConstraintError, SingularLiftError, StepFailureError
from .fixedpoint import LinearSymbol, make_midpoint_map, mann_solve

_LIFT_RCOND = 1e-10


# ---------------------------------------------------------------------------
# expression trees
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RationalExpr:
    """Node of a rational-like expression over variables x1..xn.

    kind is one of const, var, sum, prod, power, recip, root.  ``payload``
    holds the constant value, variable index, integer power, or root order;
    ``children`` the sub-expressions.
    """

    kind: str
    children: tuple = ()
    payload: object = None

    def eval(self, x) -> float:
        x = np.asarray(x, dtype=float)
        if self.kind == "const":
            return float(self.payload)
        if self.kind == "var":
            return float(x[self.payload])
        if self.kind == "sum":
            return float(sum(c.eval(x) for c in self.children))
        if self.kind == "prod":
            return float(math.prod(c.eval(x) for c in self.children))
        if self.kind == "power":
            return float(self.children[0].eval(x) ** self.payload)
        if self.kind == "recip":
            v = self.children[0].eval(x)
            if v == 0.0:
                raise SingularConstraintError("reciprocal of zero")
            return 1.0 / v
        if self.kind == "root":
            return _real_root(self.children[0].eval(x), self.payload)
        raise ValueError(f"unknown node kind {self.kind!r}")


def const(value) -> RationalExpr:
    return RationalExpr("const", payload=float(value))


def var(index: int) -> RationalExpr:
    if index < 0:
        raise ValueError("variable index must be non-negative")
    return RationalExpr("var", payload=int(index))


def vsum(*children) -> RationalExpr:
    return RationalExpr("sum", children=tuple(children))


def prod(*children) -> RationalExpr:
    return RationalExpr("prod", children=tuple(children))


def power(child, p: int) -> RationalExpr:
    if p < 0:
        raise ValueError("power must be a non-negative integer (compose with recip)")
    return RationalExpr("power", children=(child,), payload=int(p))


def recip(child) -> RationalExpr:
    return RationalExpr("recip", children=(child,))


def root(child, q: int) -> RationalExpr:
    if q < 2:
        raise ValueError("root order must be an integer >= 2")
    return RationalExpr("root", children=(child,), payload=int(q))


def _real_root(v: float, q: int) -> float:
    if v >= 0.0:
        return v ** (1.0 / q)
    if q % 2 == 1:
        return -((-v) ** (1.0 / q))
    raise SingularConstraintError(
        f"no real {q}-th root of negative value {v!r}")


# ---------------------------------------------------------------------------
# quadratic forms over the joint variables
# ---------------------------------------------------------------------------


class QuadraticForm:
    """Polynomial of degree <= 2 stored as monomial coefficients.

    quad maps ordered index pairs (i, j), i <= j, to the coefficient of
    z_i z_j; lin maps indices to linear coefficients.
    """

    def __init__(self, c=0.0, lin=None, quad=None):
        self.c = float(c)
        self.lin = dict(lin or {})
        self.quad = dict(quad or {})

    def copy(self):
        return QuadraticForm(self.c, self.lin, self.quad)

    def add_inplace(self, other, scale=1.0):
        self.c += scale * other.c
        for i, v in other.lin.items():
            self.lin[i] = self.lin.get(i, 0.0) + scale * v
        for ij, v in other.quad.items():
            self.quad[ij] = self.quad.get(ij, 0.0) + scale * v
        return self

    def value(self, z) -> float:
        total = self.c
        for i, v in self.lin.items():
            total += v * z[i]
        for (i, j), v in self.quad.items():
            total += v * z[i] * z[j]
        return float(total)

    def pure_variable(self):
        """Index i when the form is exactly z_i, else None."""
        if self.c == 0.0 and not self.quad and len(self.lin) == 1:
            (i, v), = self.lin.items()
            if v == 1.0:
                return i
        return None

    def to_dense(self, dim):
        """Return (Q, b, c) with value(z) = 1/2 z.Q.z + b.z + c, Q symmetric."""
        q_mat = np.zeros((dim, dim))
        b = np.zeros(dim)
        for i, v in self.lin.items():
            b[i] = v
        for (i, j), v in self.quad.items():
            if i == j:
                q_mat[i, i] += 2.0 * v
            else:
                q_mat[i, j] += v
                q_mat[j, i] += v
        return q_mat, b, self.c

    def render(self, names) -> str:
        terms = []
        if self.c != 0.0:
            terms.append(_fmt_coef(self.c, ""))
        for i in sorted(self.lin):
            terms.append(_fmt_coef(self.lin[i], names[i]))
        for i, j in sorted(self.quad):
            mono = f"{names[i]}^2" if i == j else f"{names[i]}*{names[j]}"
            terms.append(_fmt_coef(self.quad[(i, j)], mono))
        if not terms:
            return "0"
        out = terms[0]
        for t in terms[1:]:
            out += f" - {t[1:]}" if t.startswith("-") else f" + {t}"
        return out


def _fmt_coef(v, mono) -> str:
    if mono == "":
        return f"{v:g}"
    if v == 1.0:
        return mono
    if v == -1.0:
        return f"-{mono}"
    return f"{v:g}*{mono}"


# ---------------------------------------------------------------------------
# system construction
# ---------------------------------------------------------------------------


@dataclass
class AuxVar:
    """One auxiliary variable: name, closed-form evaluation rule (reads the
    joint vector filled up to its own slot), and quadratic constraint."""

    name: str
    rule: callable
    constraint: QuadraticForm


class _Builder:
    def __init__(self, n_vars: int):
        self.n = n_vars
        self.aux: list[AuxVar] = []
        self.names = [f"x{i + 1}" for i in range(n_vars)]
        self._extra_constraints: list[QuadraticForm] = []

    def new_aux(self, prefix: str, rule) -> int:
        idx = self.n + len(self.aux)
        name = f"{prefix}{len(self.aux) + 1}"
        self.aux.append(AuxVar(name, rule, None))
        self.names.append(name)
        return idx

    def set_constraint(self, idx: int, form: QuadraticForm):
        self.aux[idx - self.n].constraint = form

    def add_terminal_constraint(self, form: QuadraticForm):
        # A constraint with no auxiliary of its own (root-chain closure);
        # paired against the chain seed so the Jacobian aux-block stays square.
        self._extra_constraints.append(form)

    def as_symbol(self, form: QuadraticForm) -> int:
        i = form.pure_variable()
        if i is not None:
            return i
        idx = self.new_aux("t", lambda z, f=form: f.value(z))
        g = QuadraticForm(lin={idx: 1.0})
        g.add_inplace(form, scale=-1.0)
        self.set_constraint(idx, g)
        return idx

    def pair_product(self, symbols: list[int]) -> QuadraticForm:
        """Reduce a factor list to a (at most bilinear) form by repeated
        left-to-right pairing; odd rounds carry the last bare factor."""
        syms = list(symbols)
        while len(syms) > 2:
            nxt = []
            for a, b in zip(syms[0::2], syms[1::2]):
                idx = self.new_aux(
                    "y", lambda z, i=a, j=b: z[i] * z[j])
                g = QuadraticForm(lin={idx: 1.0},
                                  quad={(min(a, b), max(a, b)): -1.0})
                self.set_constraint(idx, g)
                nxt.append(idx)
            if len(syms) % 2 == 1:
                nxt.append(syms[-1])
            syms = nxt
        if len(syms) == 1:
            return QuadraticForm(lin={syms[0]: 1.0})
        a, b = syms
        if a == b:
            return QuadraticForm(quad={(a, a): 1.0})
        return QuadraticForm(quad={(min(a, b), max(a, b)): 1.0})

    def reciprocal_of(self, sym: int) -> int:
        def rule(z, i=sym):
            if z[i] == 0.0:
                raise SingularConstraintError(
                    "reciprocal constraint unsolvable at zero")
            return 1.0 / z[i]

        idx = self.new_aux("r", rule)
        g = QuadraticForm(c=-1.0, quad={(min(sym, idx), max(sym, idx)): 1.0})
        self.set_constraint(idx, g)
        return idx

    def root_chain(self, sym: int, q: int) -> int:
        """Square-and-multiply auxiliary chain for z_sym^(1/q); returns the
        index of the root variable u0."""
        bits = []
        qq = q
        while qq:
            bits.append(qq & 1)
            qq >>= 1
        s = len(bits) - 1  # leading bit b_s is always 1

        u0 = self.new_aux("u", lambda z, i=sym, qv=q: _real_root(z[i], qv))
        v_prev = self.new_aux("v", lambda z: 1.0)
        self.set_constraint(v_prev, QuadraticForm(c=-1.0, lin={v_prev: 1.0}))
        u_prev = u0
        for i in range(s):
            u_next = self.new_aux("u", lambda z, k=u_prev: z[k] * z[k])
            self.set_constraint(
                u_next,
                QuadraticForm(lin={u_next: 1.0}, quad={(u_prev, u_prev): -1.0}))
            if bits[i]:
                v_next = self.new_aux("v", lambda z, a=v_prev, b=u_prev: z[a] * z[b])
                g = QuadraticForm(
                    lin={v_next: 1.0},
                    quad={(min(v_prev, u_prev), max(v_prev, u_prev)): -1.0})
            else:
                v_next = self.new_aux("v", lambda z, a=v_prev: z[a])
                g = QuadraticForm(lin={v_next: 1.0, v_prev: -1.0})
            self.set_constraint(v_next, g)
            u_prev, v_prev = u_next, v_next
        # terminal identity x = v_s * u_s (b_s = 1)
        g = QuadraticForm(lin={sym: 1.0},
                          quad={(min(v_prev, u_prev), max(v_prev, u_prev)): -1.0})
        self.add_terminal_constraint(g)
        return u0


def _walk(expr: RationalExpr, b: _Builder) -> QuadraticForm:
    if expr.kind == "const":
        return QuadraticForm(c=expr.payload)
    if expr.kind == "var":
        if expr.payload >= b.n:
            raise ValueError("variable index exceeds declared dimension")
        return QuadraticForm(lin={expr.payload: 1.0})
    if expr.kind == "sum":
        total = QuadraticForm()
        for c in expr.children:
            total.add_inplace(_walk(c, b))
        return total
    if expr.kind == "prod":
        syms = [b.as_symbol(_walk(c, b)) for c in expr.children]
        return b.pair_product(syms)
    if expr.kind == "power":
        if expr.payload == 0:
            return QuadraticForm(c=1.0)
        child = _walk(expr.children[0], b)
        if expr.payload == 1:
            return child
        sym = b.as_symbol(child)
        return b.pair_product([sym] * expr.payload)
    if expr.kind == "recip":
        sym = b.as_symbol(_walk(expr.children[0], b))
        return QuadraticForm(lin={b.reciprocal_of(sym): 1.0})
    if expr.kind == "root":
        sym = b.as_symbol(_walk(expr.children[0], b))
        return QuadraticForm(lin={b.root_chain(sym, expr.payload): 1.0})
    raise ValueError(f"unknown node kind {expr.kind!r}")


class QuadratizedSystem:
    """Auxiliary variables, quadratic constraints, and the lifted energy.

    Evaluation respects the auxiliary order; ``embed`` places a primal point
    onto the constraint manifold, and the dense matrices expose constraints
    as G_i(z) = 1/2 z.Q_i.z + b_i.z + c_i.
    """

    def __init__(self, expr, n_vars, aux, terminal_constraints, energy, names):
        self.expr = expr
        self.n = n_vars
        self.aux = aux
        self.names = names
        self.energy_form = energy
        self.dim = n_vars + len(aux)
        constraints = [a.constraint for a in aux if a.constraint is not None]
        constraints.extend(terminal_constraints)
        self._terminal_forms = list(terminal_constraints)
        self.n_constraints = len(constraints)
        self._constraint_forms = constraints
        self.Qs = np.zeros((self.n_constraints, self.dim, self.dim))
        self.bs = np.zeros((self.n_constraints, self.dim))
        self.cs = np.zeros(self.n_constraints)
        for k, form in enumerate(constraints):
            self.Qs[k], self.bs[k], self.cs[k] = form.to_dense(self.dim)
        self.A, self.bH, self.cH = energy.to_dense(self.dim)

    # -- evaluation -------------------------------------------------------

    def original(self, x) -> float:
        return self.expr.eval(x)

    def embed(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n,):
            raise ValueError(f"expected point of dimension {self.n}")
        z = np.zeros(self.dim)
        z[: self.n] = x
        for k, a in enumerate(self.aux):
            z[self.n + k] = a.rule(z)
        return z

    def energy_value(self, z) -> float:
        z = np.asarray(z, dtype=float)
        return float(0.5 * z @ self.A @ z + self.bH @ z + self.cH)

    def constraint_values(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        if self.n_constraints == 0:
            return np.zeros(0)
        return 0.5 * np.einsum("i,kij,j->k", z, self.Qs, z) + self.bs @ z + self.cs

    def constraint_jacobian(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        return np.einsum("kij,j->ki", self.Qs, z) + self.bs

    # -- debug dump -------------------------------------------------------

    def describe(self) -> str:
        lines = ["vars: " + " ".join(self.names[: self.n])]
        for a in self.aux:
            g = a.constraint.render(self.names) if a.constraint else "(free)"
            lines.append(f"aux {a.name} ; constraint: {g}")
        for form in self._terminal_forms:
            lines.append(f"constraint: {form.render(self.names)}")
        lines.append(f"energy: {self.energy_form.render(self.names)}")
        return "\n".join(lines)


def quadratize(expr: RationalExpr, n_vars: int) -> QuadratizedSystem:
    """Lift a rational-like expression to a quadratic energy on an extended
    space with quadratic constraints."""
    b = _Builder(n_vars)
    energy = _walk(expr, b)
    return QuadratizedSystem(expr, n_vars, b.aux, b._extra_constraints,
                             energy, b.names)


def quadratize_monomial(exponents) -> QuadratizedSystem:
    """Quadratize x1^e1 * ... * xn^en by recursive factor pairing."""
    exponents = list(exponents)
    if not exponents:
        raise ValueError("exponent list must not be empty")
    if any(e < 0 for e in exponents):
        raise ValueError("exponents must be non-negative")
    if sum(exponents) < 1:
        raise ValueError("total degree must be at least 1")
    factors = [power(var(i), e) for i, e in enumerate(exponents) if e > 0]
    expr = factors[0] if len(factors) == 1 else prod(*factors)
    return quadratize(expr, len(exponents))


def quadratize_root(q: int) -> QuadratizedSystem:
    """Quadratize x^(1/q) via the binary square-and-multiply chain."""
    return quadratize(root(var(0), q), 1)


def quadratize_reciprocal() -> QuadratizedSystem:
    """Quadratize 1/x with the single constraint x*y - 1 = 0."""
    return quadratize(recip(var(0)), 1)


def casimir_residual(sys: QuadratizedSystem, z) -> np.ndarray:
    """Constraint values (G_1(z), ..., G_d(z)); zero on the manifold."""
    return sys.constraint_values(z)


# ---------------------------------------------------------------------------
# lifted dynamics
# ---------------------------------------------------------------------------


class ExtendedOde:
    """Vector field of the lifted system.

    The x-component is the supplied field evaluated at (x, y); the auxiliary
    component -pinv(M) N f keeps the constraints invariant, with (N | M) the
    primal/auxiliary blocks of the constraint Jacobian.
    """

    def __init__(self, sys: QuadratizedSystem, f_tilde):
        self.sys = sys
        self.f_tilde = f_tilde

    def rhs(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        n = self.sys.n
        fx = np.asarray(self.f_tilde(z[:n], z[n:]), dtype=float)
        if fx.shape != (n,):
            raise ValueError("vector field must return an n-vector")
        d = self.sys.n_constraints
        if d == 0:
            return fx
        jac = self.sys.constraint_jacobian(z)
        n_blk = jac[:, :n]
        m_blk = jac[:, n:]
        target = n_blk @ fx
        xi, _, rank, sv = np.linalg.lstsq(m_blk, target, rcond=_LIFT_RCOND)
        if rank < min(m_blk.shape):
            cond = float(sv[0] / max(sv[-1], np.finfo(float).tiny))
            raise SingularLiftError(
                f"constraint Jacobian aux-block rank {rank} < {d}", cond=cond)
        return np.concatenate([fx, -xi])


def lift(f_tilde, sys: QuadratizedSystem) -> ExtendedOde:
    """Lift a vector field to the extended space.

    ``f_tilde(x, y)`` may ignore y; expressing the nonlinearity through the
    auxiliaries makes the lifted energy an invariant of the extended field
    everywhere, not just on the manifold.
    """
    return ExtendedOde(sys, f_tilde)


def midpoint_step(ode: ExtendedOde, z_n, dt: float, cfg) -> np.ndarray:
    """One implicit-midpoint step of the lifted system.

    Solves z' = z_n + dt F((z + z')/2) by Mann iteration and verifies that
    the constraint residual did not grow beyond max(incoming, 10 fp_tol).
    """
    z_n = np.asarray(z_n, dtype=float)
    sym = LinearSymbol(np.zeros_like(z_n))
    t_map = make_midpoint_map(sym, ode.rhs, z_n, dt)
    try:
        z_next, report = mann_solve(t_map, z_n, cfg)
    except Exception as exc:
        if hasattr(exc, "report"):
            raise StepFailureError(
                f"midpoint solve failed: {exc}", report=exc.report) from exc
        raise
    g_in = np.max(np.abs(casimir_residual(ode.sys, z_n)), initial=0.0)
    g_out = np.max(np.abs(casimir_residual(ode.sys, z_next)), initial=0.0)
    if g_out > max(g_in, 10.0 * cfg.fp_tol):
        raise StepFailureError(
            f"constraint drift {g_out:.3e} exceeds tolerance", report=report)
    return z_next
