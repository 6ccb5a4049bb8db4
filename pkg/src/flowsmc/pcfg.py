"""Control-flow graphs for desugared programs, complete-flow enumeration, and
straight-line program extraction.

Locations are integers numbered breadth-first from the initial location, so
flow identifiers are stable across runs.  Each location has a kind:

    det     two outgoing edges guarded by a formula and its negation
            (the guard edge is ordered before the negated edge)
    draw    one outgoing probabilistic-assignment edge
    assign  one outgoing deterministic-assignment edge
    weight  one outgoing soft-conditioning edge
    final   no outgoing edges

A complete control flow is a path from the initial location ending at the
final location.  Its straight-line program replaces each traversed guard edge
with the observation of the branch taken.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Callable, Optional, Union

from .dists import IntervalUnion, lookup_family
from .frontend import is_sugar_free, pretty_expr
from .syntax import (
    Assign, Command, Draw, Expr, If, Indicator, ProbError, Program, Seq, Skip,
    UnaryOp, Weight, While, command_list,
)

DET, DRAW, ASSIGN, WEIGHT, FINAL = "det", "draw", "assign", "weight", "final"


@dataclass(frozen=True)
class GuardLabel:
    formula: Expr
    polarity: bool

    @property
    def effective(self) -> Expr:
        return self.formula if self.polarity else UnaryOp("!", self.formula)

    def __str__(self):
        return pretty_expr(self.effective)


@dataclass(frozen=True)
class AssignLabel:
    var: str
    expr: Expr

    def __str__(self):
        return f"{self.var} := {pretty_expr(self.expr)}"


@dataclass(frozen=True)
class Restriction:
    admitted: IntervalUnion
    mass: float

    def __str__(self):
        return f"{self.admitted} mass {self.mass!r}"


@dataclass(frozen=True)
class DrawLabel:
    var: str
    family: str
    params: tuple
    restriction: Optional[Restriction] = None

    def __str__(self):
        args = ", ".join(pretty_expr(p) for p in self.params)
        s = f"{self.var} ~ {self.family}({args})"
        if self.restriction is not None:
            s += f" | {self.restriction}"
        return s


@dataclass(frozen=True)
class WeightLabel:
    pred: Expr

    @property
    def is_observation(self) -> bool:
        return isinstance(self.pred, Indicator)

    def __str__(self):
        if isinstance(self.pred, Indicator):
            return f"observe({pretty_expr(self.pred.formula)})"
        return f"weight({pretty_expr(self.pred)})"


Label = Union[GuardLabel, AssignLabel, DrawLabel, WeightLabel]
SlpLabel = Union[AssignLabel, DrawLabel, WeightLabel]


@dataclass(frozen=True)
class Transition:
    src: int
    dst: int
    label: Label


@dataclass
class Pcfg:
    kinds: tuple
    variables: tuple
    l_init: int
    l_final: int
    sigma_init: dict
    e_final: Expr
    out: tuple  # out[loc] = tuple of Transitions, guard edge first

    @property
    def n_locations(self) -> int:
        return len(self.kinds)

    def describe(self) -> str:
        lines = [f"init l{self.l_init}, final l{self.l_final}"]
        for loc, edges in enumerate(self.out):
            for t in edges:
                lines.append(f"  l{t.src} -> l{t.dst}: {t.label}")
        return "\n".join(lines)


class PcfgError(ProbError):
    pass


# --------------------------------------------------------------------------
# construction


def build_pcfg(program: Program) -> Pcfg:
    """Translate a desugared program into its control-flow graph."""
    if not is_sugar_free(program):
        raise PcfgError("program must be desugared before CFG construction")

    kinds: list = []
    edges: list = []  # parallel to kinds; list of (dst, label)

    def new_loc(kind: str) -> int:
        kinds.append(kind)
        edges.append([])
        return len(kinds) - 1

    l_final = new_loc(FINAL)

    def translate(c: Command, nxt: int) -> int:
        if isinstance(c, Skip):
            return nxt
        if isinstance(c, Seq):
            entry = nxt
            for sub in reversed(command_list(c)):
                entry = translate(sub, entry)
            return entry
        if isinstance(c, Assign):
            loc = new_loc(ASSIGN)
            edges[loc].append((nxt, AssignLabel(c.var, c.expr)))
            return loc
        if isinstance(c, Draw):
            fam = lookup_family(c.family)
            if len(c.params) != fam.n_params:
                raise PcfgError(
                    f"{fam.name} takes {fam.n_params} parameters, "
                    f"got {len(c.params)} in draw of '{c.var}'")
            loc = new_loc(DRAW)
            edges[loc].append((nxt, DrawLabel(c.var, fam.name, c.params)))
            return loc
        if isinstance(c, Weight):
            loc = new_loc(WEIGHT)
            edges[loc].append((nxt, WeightLabel(c.pred)))
            return loc
        if isinstance(c, If):
            loc = new_loc(DET)
            then_entry = translate(c.then_branch, nxt)
            else_entry = translate(c.else_branch, nxt)
            edges[loc].append((then_entry, GuardLabel(c.guard, True)))
            edges[loc].append((else_entry, GuardLabel(c.guard, False)))
            return loc
        if isinstance(c, While):
            loc = new_loc(DET)
            body_entry = translate(c.body, loc)
            edges[loc].append((body_entry, GuardLabel(c.guard, True)))
            edges[loc].append((nxt, GuardLabel(c.guard, False)))
            return loc
        raise PcfgError(f"cannot translate {c!r}")

    l_init = translate(program.body, l_final)

    # renumber breadth-first from l_init for readable, reproducible ids
    order = []
    seen = {l_init}
    queue = deque([l_init])
    while queue:
        loc = queue.popleft()
        order.append(loc)
        for dst, _ in edges[loc]:
            if dst not in seen:
                seen.add(dst)
                queue.append(dst)
    renum = {old: new for new, old in enumerate(order)}

    kinds2 = tuple(kinds[old] for old in order)
    out2 = tuple(
        tuple(Transition(renum[old], renum[dst], label) for dst, label in edges[old])
        for old in order
    )
    return Pcfg(
        kinds=kinds2,
        variables=tuple(d.name for d in program.decls),
        l_init=renum[l_init],
        l_final=renum[l_final],
        sigma_init=program.initial_state,
        e_final=program.result,
        out=out2,
    )


# --------------------------------------------------------------------------
# validation


def validate(g: Pcfg) -> list:
    """Structural conditions on locations and labels; violations are data."""
    violations = []
    for loc, kind in enumerate(g.kinds):
        edges = g.out[loc]
        if kind == DET:
            if len(edges) != 2:
                violations.append(f"l{loc}: det location with {len(edges)} edges")
            else:
                a, b = edges
                if not (isinstance(a.label, GuardLabel) and isinstance(b.label, GuardLabel)):
                    violations.append(f"l{loc}: det edges must carry guards")
                elif a.label.formula != b.label.formula or a.label.polarity == b.label.polarity:
                    violations.append(f"l{loc}: det edges must be a guard and its negation")
                elif not a.label.polarity:
                    violations.append(f"l{loc}: guard edge must precede the negated edge")
        elif kind == FINAL:
            if edges:
                violations.append(f"l{loc}: final location has outgoing edges")
        else:
            expected = {DRAW: DrawLabel, ASSIGN: AssignLabel, WEIGHT: WeightLabel}[kind]
            if len(edges) != 1:
                violations.append(f"l{loc}: {kind} location with {len(edges)} edges")
            elif not isinstance(edges[0].label, expected):
                violations.append(f"l{loc}: {kind} location with a {type(edges[0].label).__name__}")
    reachable = {g.l_init}
    queue = deque([g.l_init])
    while queue:
        loc = queue.popleft()
        for t in g.out[loc]:
            if t.dst not in reachable:
                reachable.add(t.dst)
                queue.append(t.dst)
    for loc in range(g.n_locations):
        if loc not in reachable:
            violations.append(f"l{loc}: unreachable from the initial location")
    return violations


# --------------------------------------------------------------------------
# control flows


@dataclass(frozen=True)
class ControlFlow:
    start: int
    steps: tuple  # Transitions

    @property
    def locations(self) -> tuple:
        return (self.start,) + tuple(t.dst for t in self.steps)

    def is_complete(self, g: Pcfg) -> bool:
        return self.locations[-1] == g.l_final

    @property
    def flow_id(self) -> str:
        return "-".join(str(loc) for loc in self.locations)

    def __len__(self):
        return len(self.locations)


class FlowEnumerator:
    """Breadth-first cursor over the complete control flows of a pCFG.

    Flows come out in order of increasing length, with the guard edge
    explored before the negated edge.  `max_len` bounds the number of
    locations in a path; pruned paths mark the enumerator as truncated.
    """

    def __init__(self, g: Pcfg, max_len: Optional[int] = None):
        self.g = g
        self.max_len = max_len
        self._queue = deque([ControlFlow(g.l_init, ())])
        self.hit_length_cap = False
        self.emitted = 0

    @property
    def exhausted(self) -> bool:
        return not self._queue

    def next_complete(self) -> Optional[ControlFlow]:
        while self._queue:
            path = self._queue.popleft()
            last = path.locations[-1]
            if last == self.g.l_final:
                self.emitted += 1
                return path
            if self.max_len is not None and len(path) >= self.max_len:
                self.hit_length_cap = True
                continue
            for t in self.g.out[last]:
                self._queue.append(ControlFlow(path.start, path.steps + (t,)))
        return None

    def next_flow(self, admit: Optional[Callable] = None,
                  max_rejects: Optional[int] = None) -> Optional[ControlFlow]:
        """Next admissible complete flow; rejected flows consume work.

        Returns None when exhausted or when `max_rejects` flows in a row were
        rejected (check `exhausted` to tell the cases apart).
        """
        rejects = 0
        while True:
            flow = self.next_complete()
            if flow is None:
                return None
            if admit is None or admit(flow):
                return flow
            rejects += 1
            if max_rejects is not None and rejects >= max_rejects:
                return None


def enumerate_flows(g: Pcfg, count: int, max_len: Optional[int] = None) -> list:
    """First `count` complete flows in enumeration order (fewer if exhausted)."""
    cursor = FlowEnumerator(g, max_len=max_len)
    flows = []
    while len(flows) < count:
        flow = cursor.next_complete()
        if flow is None:
            break
        flows.append(flow)
    return flows


def find_flow(g: Pcfg, flow_id: str, max_len: Optional[int] = None) -> Optional[ControlFlow]:
    want = flow_id.strip()
    limit = max_len if max_len is not None else len(want.split("-")) + 1
    cursor = FlowEnumerator(g, max_len=limit)
    while True:
        flow = cursor.next_complete()
        if flow is None:
            return None
        if flow.flow_id == want:
            return flow


# --------------------------------------------------------------------------
# straight-line programs


@dataclass(frozen=True, eq=False)
class StraightLineProgram:
    variables: tuple
    sigma_init: dict
    steps: tuple  # SlpLabels
    e_final: Expr
    flow_id: str = ""

    def describe(self) -> str:
        lines = [f"// flow {self.flow_id}" if self.flow_id else "// straight-line"]
        init = ", ".join(f"{v} = {self.sigma_init[v]!r}" for v in self.variables)
        lines.append(f"// init: {init}")
        for s in self.steps:
            lines.append(f"{s};")
        lines.append(f"return {pretty_expr(self.e_final)};")
        return "\n".join(lines)

    def observation_count(self) -> int:
        return sum(1 for s in self.steps
                   if isinstance(s, WeightLabel) and s.is_observation)


def straight_line(g: Pcfg, flow: ControlFlow) -> StraightLineProgram:
    """Turn a complete flow into a branch-free program: every traversed guard
    becomes the observation of the branch that was taken."""
    if not flow.is_complete(g):
        raise PcfgError("straight_line needs a complete control flow")
    steps = []
    for t in flow.steps:
        if isinstance(t.label, GuardLabel):
            steps.append(WeightLabel(Indicator(t.label.effective)))
        else:
            steps.append(t.label)
    return StraightLineProgram(
        variables=g.variables,
        sigma_init=dict(g.sigma_init),
        steps=tuple(steps),
        e_final=g.e_final,
        flow_id=flow.flow_id,
    )


def validate_slp(s: StraightLineProgram) -> list:
    violations = []
    for i, lab in enumerate(s.steps):
        if not isinstance(lab, (AssignLabel, DrawLabel, WeightLabel)):
            violations.append(f"step {i}: illegal label {lab!r}")
    return violations
