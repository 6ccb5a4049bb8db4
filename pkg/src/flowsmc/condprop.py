"""Backward observation propagation over straight-line programs.

The pass folds every soft-conditioning step into a symbolic continuation
predicate and moves that predicate toward the start of the program:
deterministic assignments substitute into it, and a probabilistic assignment
whose variable occurs in it forces the predicate to be emitted there, after
which only a consequence not mentioning the drawn variable travels further up.
Where the predicate pins the drawn variable to intervals with known constant
bounds, the draw itself is restricted to those intervals and compensated by a
constant weight equal to the admitted mass; the pinned conjuncts then
disappear from the emitted observation.

A predicate is a product of three kinds of factors:

  * a nonnegative constant coefficient,
  * sharp atoms, each a linear form compared against zero (a conjunction of
    indicator factors), and
  * opaque fuzzy factors kept as expressions and evaluated at run time.

Anything outside the linear fragment degrades soundly into an opaque factor.
Constant propagation runs alongside the pass: a forward sweep records which
variables hold statically-known values before each step, so counters driven
by deterministic updates fold away and decide feasibility symbolically.
A flow whose propagated program contains a zero weight (or a zero-mass
restriction) is logically blacklisted: every run of the original program has
total weight zero.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from . import dists
from .dists import DistInstance, Interval, IntervalUnion
from .pcfg import (
    AssignLabel, DrawLabel, Restriction, StraightLineProgram, WeightLabel,
)
from .syntax import (
    BinaryOp, Const, Expr, Indicator, UnaryOp, Var, fold_expr, free_vars,
    substitute_expr,
)

INF = float("inf")


# --------------------------------------------------------------------------
# linear forms


@dataclass(frozen=True)
class LinTerm:
    """Sum of coeff * var plus a constant; coeffs sorted, nonzero."""

    coeffs: tuple  # ((name, coeff), ...)
    const: float

    @staticmethod
    def make(coeffs: dict, const: float) -> "LinTerm":
        kept = tuple(sorted((v, c) for v, c in coeffs.items() if c != 0.0))
        return LinTerm(kept, float(const))

    @staticmethod
    def constant(c: float) -> "LinTerm":
        return LinTerm((), float(c))

    @property
    def is_const(self) -> bool:
        return not self.coeffs

    @property
    def vars(self) -> frozenset:
        return frozenset(v for v, _ in self.coeffs)

    def coeff(self, var: str) -> float:
        for v, c in self.coeffs:
            if v == var:
                return c
        return 0.0

    def add(self, other: "LinTerm") -> "LinTerm":
        d = dict(self.coeffs)
        for v, c in other.coeffs:
            d[v] = d.get(v, 0.0) + c
        return LinTerm.make(d, self.const + other.const)

    def scale(self, k: float) -> "LinTerm":
        return LinTerm.make({v: c * k for v, c in self.coeffs}, self.const * k)

    def sub(self, other: "LinTerm") -> "LinTerm":
        return self.add(other.scale(-1.0))

    def drop(self, var: str) -> "LinTerm":
        return LinTerm.make({v: c for v, c in self.coeffs if v != var}, self.const)

    def subst(self, var: str, repl: "LinTerm") -> "LinTerm":
        a = self.coeff(var)
        if a == 0.0:
            return self
        return self.drop(var).add(repl.scale(a))

    def fold(self, env) -> "LinTerm":
        d = {}
        const = self.const
        for v, c in self.coeffs:
            if v in env:
                const += c * float(env[v])
            else:
                d[v] = c
        return LinTerm.make(d, const)

    def to_expr(self) -> Expr:
        e: Optional[Expr] = None
        for v, c in self.coeffs:
            term: Expr = Var(v) if c == 1.0 else BinaryOp("*", Const(c), Var(v))
            e = term if e is None else BinaryOp("+", e, term)
        if e is None:
            return Const(self.const)
        if self.const != 0.0:
            e = BinaryOp("+", e, Const(self.const))
        return e


def linterm_of_expr(e: Expr, env=None) -> Optional[LinTerm]:
    """Linear normal form of `e`, or None outside the linear fragment.
    Variables with known constant values in `env` fold into the constant."""
    env = env or {}
    if isinstance(e, Var):
        if e.name in env:
            return LinTerm.constant(float(env[e.name]))
        return LinTerm.make({e.name: 1.0}, 0.0)
    if isinstance(e, Const):
        return LinTerm.constant(e.value)
    if isinstance(e, UnaryOp) and e.op == "-":
        sub = linterm_of_expr(e.operand, env)
        return None if sub is None else sub.scale(-1.0)
    if isinstance(e, BinaryOp):
        if e.op in ("+", "-"):
            lhs = linterm_of_expr(e.left, env)
            rhs = linterm_of_expr(e.right, env)
            if lhs is None or rhs is None:
                return None
            return lhs.add(rhs) if e.op == "+" else lhs.sub(rhs)
        if e.op == "*":
            lhs = linterm_of_expr(e.left, env)
            rhs = linterm_of_expr(e.right, env)
            if lhs is None or rhs is None:
                return None
            if lhs.is_const:
                return rhs.scale(lhs.const)
            if rhs.is_const:
                return lhs.scale(rhs.const)
            return None
        if e.op == "/":
            lhs = linterm_of_expr(e.left, env)
            rhs = linterm_of_expr(e.right, env)
            if lhs is None or rhs is None or not rhs.is_const or rhs.const == 0.0:
                return None
            return lhs.scale(1.0 / rhs.const)
    return None


# --------------------------------------------------------------------------
# atoms: lin OP 0 with OP in {">", ">=", "==", "!="}

_FLIP = {"<": ">", "<=": ">=", ">": "<", ">=": "<=", "=": "=", "!=": "!="}
_NEGATE = {"<": ">=", "<=": ">", ">": "<=", ">=": "<", "=": "!=", "!=": "="}


@dataclass(frozen=True)
class Atom:
    lin: LinTerm
    op: str  # ">" | ">=" | "==" | "!="

    @property
    def vars(self) -> frozenset:
        return self.lin.vars

    def decide(self) -> Optional[bool]:
        if not self.lin.is_const:
            return None
        c = self.lin.const
        if self.op == ">":
            return c > 0.0
        if self.op == ">=":
            return c >= 0.0
        if self.op == "==":
            return c == 0.0
        return c != 0.0

    def subst(self, var: str, repl: LinTerm) -> "Atom":
        return Atom(self.lin.subst(var, repl), self.op)

    def fold(self, env) -> "Atom":
        return Atom(self.lin.fold(env), self.op)

    def to_expr(self) -> Expr:
        # split positive and negative parts so a - b >= 0 renders as a >= b
        pos = {v: c for v, c in self.lin.coeffs if c > 0.0}
        neg = {v: -c for v, c in self.lin.coeffs if c < 0.0}
        lhs = LinTerm.make(pos, self.lin.const if self.lin.const > 0.0 else 0.0)
        rhs = LinTerm.make(neg, -self.lin.const if self.lin.const < 0.0 else 0.0)
        op = "=" if self.op == "==" else self.op
        if lhs.is_const and not rhs.is_const:
            return BinaryOp(_FLIP[op], rhs.to_expr(), lhs.to_expr())
        return BinaryOp(op, lhs.to_expr(), rhs.to_expr())


def _comparison_atom(op: str, lhs: LinTerm, rhs: LinTerm) -> Atom:
    diff = lhs.sub(rhs)
    if op == "<":
        return Atom(rhs.sub(lhs), ">")
    if op == "<=":
        return Atom(rhs.sub(lhs), ">=")
    if op == ">":
        return Atom(diff, ">")
    if op == ">=":
        return Atom(diff, ">=")
    if op == "=":
        return Atom(diff, "==")
    if op == "!=":
        return Atom(diff, "!=")
    raise ValueError(op)


def formula_to_atoms(phi: Expr, env=None, negate=False) -> Optional[list]:
    """Conjunction of atoms equivalent to `phi`, or None outside the sharp
    linear fragment (disjunctions, nonlinear comparisons, ...)."""
    env = env or {}
    if isinstance(phi, UnaryOp) and phi.op == "!":
        return formula_to_atoms(phi.operand, env, not negate)
    if isinstance(phi, Const):
        truth = (phi.value != 0.0) ^ negate
        return [] if truth else [Atom(LinTerm.constant(-1.0), ">")]
    if isinstance(phi, Var):
        # boolean variable embedded in the reals: v holds iff v != 0
        lin = linterm_of_expr(phi, env)
        return [Atom(lin, "==" if negate else "!=")]
    if isinstance(phi, BinaryOp):
        if phi.op == "&&" and not negate:
            lhs = formula_to_atoms(phi.left, env, False)
            rhs = formula_to_atoms(phi.right, env, False)
            if lhs is None or rhs is None:
                return None
            return lhs + rhs
        if phi.op == "||" and negate:
            lhs = formula_to_atoms(phi.left, env, True)
            rhs = formula_to_atoms(phi.right, env, True)
            if lhs is None or rhs is None:
                return None
            return lhs + rhs
        if phi.op in ("<", "<=", "=", "!=", ">=", ">"):
            lhs = linterm_of_expr(phi.left, env)
            rhs = linterm_of_expr(phi.right, env)
            if lhs is None or rhs is None:
                return None
            op = _NEGATE[phi.op] if negate else phi.op
            return [_comparison_atom(op, lhs, rhs)]
    return None


# --------------------------------------------------------------------------
# symbolic predicates


@dataclass(frozen=True)
class SymbolicPredicate:
    """Product of a nonnegative constant, sharp atoms, and opaque factors."""

    const: float = 1.0
    atoms: tuple = ()
    fuzzy: tuple = ()

    @property
    def is_false(self) -> bool:
        return self.const == 0.0

    @property
    def is_one(self) -> bool:
        return self.const == 1.0 and not self.atoms and not self.fuzzy

    @property
    def vars(self) -> frozenset:
        out = frozenset()
        for a in self.atoms:
            out |= a.vars
        for f in self.fuzzy:
            out |= free_vars(f)
        return out

    def to_expr(self) -> Expr:
        if self.is_false:
            return Const(0.0)
        factors = []
        if self.atoms:
            conj = None
            for a in self.atoms:
                e = a.to_expr()
                conj = e if conj is None else BinaryOp("&&", conj, e)
            factors.append(Indicator(conj))
        factors.extend(self.fuzzy)
        if self.const != 1.0 or not factors:
            factors.insert(0, Const(self.const))
        out = factors[0]
        for f in factors[1:]:
            out = BinaryOp("*", out, f)
        return out

    def describe(self) -> str:
        from .frontend import pretty_expr

        return pretty_expr(self.to_expr())


ONE = SymbolicPredicate()
ZERO = SymbolicPredicate(const=0.0)


def _normalize(const: float, atoms, fuzzy) -> SymbolicPredicate:
    if const == 0.0:
        return ZERO
    kept = []
    seen = set()
    for a in atoms:
        truth = a.decide()
        if truth is False:
            return ZERO
        if truth is True or a in seen:
            continue
        seen.add(a)
        kept.append(a)
    return SymbolicPredicate(const, tuple(kept), tuple(fuzzy))


def predicate_of_expr(pred: Expr, env=None) -> SymbolicPredicate:
    """Interpret a fuzzy-predicate expression as a symbolic predicate."""
    env = env or {}
    folded = fold_expr(pred, env)
    if isinstance(folded, Const):
        if folded.value == 0.0:
            return ZERO
        if folded.value < 0.0:
            # negative weights are runtime errors; keep them runtime
            return SymbolicPredicate(1.0, (), (folded,))
        return SymbolicPredicate(folded.value, (), ())
    if isinstance(folded, Indicator):
        atoms = formula_to_atoms(folded.formula, env)
        if atoms is not None:
            return _normalize(1.0, atoms, ())
        return SymbolicPredicate(1.0, (), (folded,))
    if isinstance(folded, BinaryOp) and folded.op == "*":
        lhs = predicate_of_expr(folded.left, env)
        rhs = predicate_of_expr(folded.right, env)
        return multiply(lhs, rhs)
    return SymbolicPredicate(1.0, (), (folded,))


def multiply(p: SymbolicPredicate, q: SymbolicPredicate) -> SymbolicPredicate:
    if p.is_false or q.is_false:
        return ZERO
    return _normalize(p.const * q.const, p.atoms + q.atoms, p.fuzzy + q.fuzzy)


def conjoin(pred: Expr, cont: SymbolicPredicate, env=None) -> SymbolicPredicate:
    """Fold a weight-transition predicate into the continuation: product
    semantics, with sharp factors joining the atom conjunction."""
    return multiply(predicate_of_expr(pred, env), cont)


def substitute(p: SymbolicPredicate, var: str, e: Expr, env=None) -> SymbolicPredicate:
    """Replace every free occurrence of `var` with `e` and simplify."""
    if p.is_false:
        return p
    env = env or {}
    repl_lin = linterm_of_expr(e, env)
    atoms = []
    fuzzy = list()
    for a in p.atoms:
        if a.lin.coeff(var) == 0.0:
            atoms.append(a.fold(env))
            continue
        if repl_lin is not None:
            atoms.append(a.subst(var, repl_lin).fold(env))
        else:
            # nonlinear replacement: degrade the atom to an opaque factor
            sub = substitute_expr(Indicator(a.to_expr()), var, e)
            fuzzy.append(fold_expr(sub, env))
    for f in p.fuzzy:
        fuzzy.append(fold_expr(substitute_expr(f, var, e), env))
    return _refold(p.const, atoms, fuzzy)


def fold_predicate(p: SymbolicPredicate, env) -> SymbolicPredicate:
    if p.is_false or not env:
        return p
    return _refold(p.const, [a.fold(env) for a in p.atoms],
                   [fold_expr(f, env) for f in p.fuzzy])


def _refold(const: float, atoms, fuzzy) -> SymbolicPredicate:
    out_fuzzy = []
    for f in fuzzy:
        if isinstance(f, Const):
            if f.value == 0.0:
                return ZERO
            if f.value > 0.0:
                const *= f.value
                continue
        if isinstance(f, Indicator):
            sub = formula_to_atoms(f.formula)
            if sub is not None:
                atoms = list(atoms) + sub
                continue
        out_fuzzy.append(f)
    return _normalize(const, atoms, out_fuzzy)


def remove_atoms(p: SymbolicPredicate, captured) -> SymbolicPredicate:
    caught = set(captured)
    return SymbolicPredicate(p.const,
                             tuple(a for a in p.atoms if a not in caught),
                             p.fuzzy)


# --------------------------------------------------------------------------
# support reasoning at probabilistic assignments


def _bounds_for(p: SymbolicPredicate, x: str):
    """Split atoms into lower/upper bounds on x and the rest.

    A bound is (LinTerm not mentioning x, strict).  Equalities contribute to
    both sides; disequations are dropped, which only weakens consequences.
    """
    lowers, uppers, others = [], [], []
    for a in p.atoms:
        c = a.lin.coeff(x)
        if c == 0.0:
            others.append(a)
            continue
        rest = a.lin.drop(x).scale(-1.0 / c)  # x OP rest after normalization
        if a.op == "!=":
            continue
        if a.op == "==":
            lowers.append((rest, False))
            uppers.append((rest, False))
            continue
        strict = a.op == ">"
        if c > 0.0:
            lowers.append((rest, strict))
        else:
            uppers.append((rest, strict))
    return lowers, uppers, others


def derive_psi(p: SymbolicPredicate, x: str,
               dist: Optional[DistInstance]) -> SymbolicPredicate:
    """A sharp consequence of "some value of x in the support makes p positive",
    not mentioning x.

    One-variable elimination over the linear atoms: every lower bound on x
    (including the support's lower end) must sit below every upper bound
    (including the support's upper end).  Atoms not mentioning x survive
    unchanged; opaque factors and disequations are dropped, which only
    weakens the consequence.
    """
    if p.is_false:
        return ZERO
    lowers, uppers, others = _bounds_for(p, x)
    if dist is not None:
        sup = dists.support(dist)
        if sup.lo != -INF:
            lowers.append((LinTerm.constant(sup.lo), sup.lo_open))
        if sup.hi != INF:
            uppers.append((LinTerm.constant(sup.hi), sup.hi_open))
    derived = []
    for lo, lo_strict in lowers:
        for hi, hi_strict in uppers:
            gap = Atom(hi.sub(lo), ">" if (lo_strict or hi_strict) else ">=")
            truth = gap.decide()
            if truth is False:
                return ZERO
            if truth is None:
                derived.append(gap)
    return _normalize(1.0, others + derived, ())


def derive_xi(p: SymbolicPredicate, x: str,
              dist: DistInstance) -> Optional[tuple]:
    """Interval bounds on x implied by p with constant, x-free sides.

    Returns (admitted IntervalUnion, captured atoms) or None when no atom
    pins x against a constant.  Equality and disequality atoms participate
    only for discrete families; a measure-zero equality over a continuous
    variable stays a runtime observation.
    """
    discrete = dist.discrete
    admitted = IntervalUnion.full()
    captured = []
    for a in p.atoms:
        c = a.lin.coeff(x)
        if c == 0.0:
            continue
        rest = a.lin.drop(x)
        if rest.vars:
            continue  # bound involves another variable
        bound = -rest.const / c + 0.0  # normalize -0.0
        if a.op in ("==", "!="):
            if not discrete:
                continue
            point = IntervalUnion((Interval(bound, bound),))
            admitted = admitted.intersect(point if a.op == "==" else point.complement())
            captured.append(a)
            continue
        strict = a.op == ">"
        is_lower = c > 0.0
        if is_lower:
            iv = Interval(bound, INF, lo_open=strict, hi_open=True)
        else:
            iv = Interval(-INF, bound, lo_open=True, hi_open=strict)
        admitted = admitted.intersect(iv)
        captured.append(a)
    if not captured:
        return None
    return admitted, captured


# --------------------------------------------------------------------------
# the propagation pass


@dataclass
class BlockedPoint:
    """Trace record for one predicate emission at a probabilistic assignment."""

    index: int
    var: str
    dist: Optional[DistInstance]
    predicate: SymbolicPredicate
    psi: SymbolicPredicate
    restricted: bool


def _forward_const_envs(s: StraightLineProgram) -> list:
    """envs[i] = variables with statically-known values before step i,
    plus one trailing env for the return position."""
    env = dict(s.sigma_init)
    envs = [dict(env)]
    for lab in s.steps:
        if isinstance(lab, AssignLabel):
            folded = fold_expr(lab.expr, env)
            if isinstance(folded, Const):
                env[lab.var] = folded.value
            else:
                env.pop(lab.var, None)
        elif isinstance(lab, DrawLabel):
            env.pop(lab.var, None)
        envs.append(dict(env))
    return envs


def _const_dist(lab: DrawLabel, env) -> Optional[DistInstance]:
    vals = []
    for p in lab.params:
        folded = fold_expr(p, env)
        if not isinstance(folded, Const):
            return None
        vals.append(folded.value)
    try:
        return DistInstance(lab.family, tuple(vals))
    except dists.ParamError:
        return None


def cdpg(s: StraightLineProgram,
         trace: Optional[list] = None,
         diagnostics: Optional[dict] = None) -> StraightLineProgram:
    """Propagate conditioning backward through a straight-line program.

    The output is semantically equivalent: weighted runs of the input and the
    output induce the same distribution over (total weight, return value).
    """
    envs = _forward_const_envs(s)
    f = ONE
    rev: list = []

    def emit_weight(pred: SymbolicPredicate):
        if pred.is_false:
            rev.append(WeightLabel(Const(0.0)))
        elif not pred.is_one:
            rev.append(WeightLabel(pred.to_expr()))

    for i in range(len(s.steps) - 1, -1, -1):
        lab = s.steps[i]
        env = envs[i]
        if isinstance(lab, WeightLabel):
            f = conjoin(lab.pred, f, env)
            continue
        if isinstance(lab, AssignLabel):
            rev.append(lab)
            f = substitute(f, lab.var, lab.expr, env)
            continue
        # probabilistic assignment
        if lab.var not in f.vars:
            rev.append(lab)
            f = fold_predicate(f, env)
            continue
        dist = _const_dist(lab, env)
        handled = False
        restricted = False
        if dist is not None and not f.is_false:
            pinned = derive_xi(f, lab.var, dist)
            if pinned is not None:
                admitted, captured = pinned
                rd = dists.restrict(dist, admitted)
                if rd.mass < 1.0:
                    residual = remove_atoms(f, captured)
                    emit_weight(residual)
                    rev.append(WeightLabel(Const(rd.mass)))
                    const_params = tuple(Const(v) for v in dist.params)
                    rev.append(DrawLabel(lab.var, lab.family, const_params,
                                         Restriction(rd.admitted, rd.mass)))
                    handled = True
                    restricted = True
                    if diagnostics is not None and rd.mass == 0.0:
                        diagnostics.setdefault("zero_mass_restrictions", 0)
                        diagnostics["zero_mass_restrictions"] += 1
        if not handled:
            emit_weight(f)
            rev.append(lab)
        if diagnostics is not None and not dists.lookup_family(lab.family).discrete:
            for a in f.atoms:
                if a.op == "==" and a.lin.coeff(lab.var) != 0.0:
                    diagnostics.setdefault("continuous_equality_atoms", 0)
                    diagnostics["continuous_equality_atoms"] += 1
        psi = derive_psi(f, lab.var, dist)
        if trace is not None:
            trace.append(BlockedPoint(i, lab.var, dist, f, psi, restricted))
        f = fold_predicate(psi, env)

    f = fold_predicate(f, envs[0])
    emit_weight(f)
    return StraightLineProgram(
        variables=s.variables,
        sigma_init=dict(s.sigma_init),
        steps=tuple(reversed(rev)),
        e_final=s.e_final,
        flow_id=s.flow_id,
    )


def is_blacklisted(s: StraightLineProgram) -> bool:
    """A propagated program is statically dead if it carries a constant-zero
    weight or a zero-mass restriction."""
    for lab in s.steps:
        if isinstance(lab, WeightLabel):
            pred = lab.pred
            if isinstance(pred, Const) and pred.value == 0.0:
                return True
            if isinstance(pred, Indicator) and isinstance(pred.formula, Const) \
                    and pred.formula.value == 0.0:
                return True
        elif isinstance(lab, DrawLabel) and lab.restriction is not None:
            if lab.restriction.mass == 0.0:
                return True
    return False
