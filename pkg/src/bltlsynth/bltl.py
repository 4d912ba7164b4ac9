"""Bounded-LTL formulas over timed traces: parsing, checking, and horizons.

A timed trace is a finite sequence of (label, duration) pairs where the label
is a proposition name or None (no region), durations are in seconds, and
consecutive labels differ.  Two checkers are provided:

* ``check_sequential`` evaluates the sequential mission fragment
  (reach-and-dwell phases chained by unsafe-avoiding untils) directly from its
  phase decomposition, with an exhaustive search over hit positions.
* ``check_generic`` evaluates an arbitrary formula by recursive bounded
  semantics over trace suffixes; it serves as an independent cross-check of
  ``check_sequential`` on the fragment.

Concrete syntax: identifiers are atoms; ``!``, ``&``, ``|`` are Boolean;
``U[<=t]``, ``F[<=t]``, ``G[<=t]`` are the bounded temporal operators;
parentheses group.  Binding strength, tightest first: unary (``!``, ``G``,
``F``), then ``U`` (right-associative), then ``&``, then ``|``.  ``U`` binding
tighter than ``&`` is what makes ``a & !u U[<=5] b`` read as the mission chain
``a & (!u U[<=5] b)``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Optional, Sequence, Union

TraceStep = tuple[Optional[str], float]


# ---------------------------------------------------------------------------
# AST

@dataclass(frozen=True)
class Atom:
    name: str


@dataclass(frozen=True)
class Not:
    child: "Formula"


@dataclass(frozen=True)
class And:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Or:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Until:
    left: "Formula"
    right: "Formula"
    bound: float


@dataclass(frozen=True)
class Eventually:
    child: "Formula"
    bound: float


@dataclass(frozen=True)
class Always:
    child: "Formula"
    bound: float


Formula = Union[Atom, Not, And, Or, Until, Eventually, Always]


def atoms_of(phi: Formula) -> frozenset[str]:
    """All proposition names appearing in the formula."""
    if isinstance(phi, Atom):
        return frozenset({phi.name})
    if isinstance(phi, (Not, Eventually, Always)):
        return atoms_of(phi.child)
    return atoms_of(phi.left) | atoms_of(phi.right)


# ---------------------------------------------------------------------------
# Parser

class ParseError(ValueError):
    """Lexical or syntax error, with the offending source position."""

    def __init__(self, message: str, pos: int):
        super().__init__(f"{message} (at position {pos})")
        self.pos = pos


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<temporal>[UGF]\[<=\s*(?P<bound>-?\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)\s*\])
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<punct>[!&|()])
    """,
    re.VERBOSE,
)


def _tokenize(text: str) -> list[tuple[str, object, int]]:
    tokens: list[tuple[str, object, int]] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", pos)
        if m.lastgroup != "ws":
            kind = m.lastgroup
            if kind == "temporal":
                op = text[pos]
                bound = float(m.group("bound"))
                if bound < 0:
                    raise ParseError("negative bound", pos)
                tokens.append((op, bound, pos))
            elif kind == "ident":
                tokens.append(("atom", m.group("ident"), pos))
            else:
                tokens.append((m.group("punct"), None, pos))
        pos = m.end()
    tokens.append(("eof", None, len(text)))
    return tokens


class _Parser:
    def __init__(self, tokens: list[tuple[str, object, int]]):
        self.tokens = tokens
        self.i = 0

    def peek(self) -> tuple[str, object, int]:
        return self.tokens[self.i]

    def advance(self) -> tuple[str, object, int]:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def parse(self) -> Formula:
        phi = self.parse_or()
        kind, _, pos = self.peek()
        if kind != "eof":
            raise ParseError(f"unexpected token {kind!r}", pos)
        return phi

    def parse_or(self) -> Formula:
        phi = self.parse_and()
        while self.peek()[0] == "|":
            self.advance()
            phi = Or(phi, self.parse_and())
        return phi

    def parse_and(self) -> Formula:
        phi = self.parse_until()
        while self.peek()[0] == "&":
            self.advance()
            phi = And(phi, self.parse_until())
        return phi

    def parse_until(self) -> Formula:
        phi = self.parse_unary()
        if self.peek()[0] == "U":
            _, bound, _ = self.advance()
            return Until(phi, self.parse_until(), float(bound))
        return phi

    def parse_unary(self) -> Formula:
        kind, value, pos = self.peek()
        if kind == "!":
            self.advance()
            return Not(self.parse_unary())
        if kind == "G":
            self.advance()
            return Always(self.parse_unary(), float(value))
        if kind == "F":
            self.advance()
            return Eventually(self.parse_unary(), float(value))
        if kind == "atom":
            self.advance()
            return Atom(str(value))
        if kind == "(":
            self.advance()
            phi = self.parse_or()
            k, _, p = self.advance()
            if k != ")":
                raise ParseError("expected ')'", p)
            return phi
        raise ParseError(f"unexpected token {kind!r}", pos)


def parse_formula(text: str) -> Formula:
    """Parse formula text into an AST; raises ParseError with position."""
    return _Parser(_tokenize(text)).parse()


def _fmt_bound(t: float) -> str:
    return repr(float(t))


# precedence levels for printing: higher binds tighter
_LEVEL_OR, _LEVEL_AND, _LEVEL_UNTIL, _LEVEL_UNARY = 0, 1, 2, 3


def format_formula(phi: Formula) -> str:
    """Render to the concrete syntax; reparsing yields an identical AST."""

    def go(node: Formula, parent_level: int) -> str:
        if isinstance(node, Atom):
            return node.name
        if isinstance(node, Not):
            return "!" + go(node.child, _LEVEL_UNARY)
        if isinstance(node, Always):
            return f"G[<={_fmt_bound(node.bound)}] " + go(node.child, _LEVEL_UNARY)
        if isinstance(node, Eventually):
            return f"F[<={_fmt_bound(node.bound)}] " + go(node.child, _LEVEL_UNARY)
        if isinstance(node, Until):
            # right-associative: right child may carry equal level unparenthesized
            s = (go(node.left, _LEVEL_UNTIL + 1)
                 + f" U[<={_fmt_bound(node.bound)}] "
                 + go(node.right, _LEVEL_UNTIL))
            return f"({s})" if parent_level > _LEVEL_UNTIL else s
        if isinstance(node, And):
            s = go(node.left, _LEVEL_AND) + " & " + go(node.right, _LEVEL_AND + 1)
            return f"({s})" if parent_level > _LEVEL_AND else s
        if isinstance(node, Or):
            s = go(node.left, _LEVEL_OR) + " | " + go(node.right, _LEVEL_OR + 1)
            return f"({s})" if parent_level > _LEVEL_OR else s
        raise TypeError(f"not a formula node: {node!r}")

    return go(phi, _LEVEL_OR)


# ---------------------------------------------------------------------------
# Sequential mission fragment

class FragmentError(ValueError):
    """Formula does not have the sequential mission shape."""


@dataclass(frozen=True)
class Disjunct:
    """One reach-and-dwell alternative: stay at least ``dwell`` seconds in a
    region labeled by one of ``props``."""

    dwell: float
    props: tuple[str, ...]

    def __post_init__(self):
        if self.dwell < 0:
            raise ValueError("dwell must be non-negative")
        if not self.props:
            raise ValueError("disjunct needs at least one proposition")


@dataclass(frozen=True)
class Phase:
    """Reach one of the disjuncts within ``time_bound`` while avoiding unsafe."""

    time_bound: float
    disjuncts: tuple[Disjunct, ...]

    def __post_init__(self):
        if self.time_bound < 0:
            raise ValueError("phase time bound must be non-negative")
        if not self.disjuncts:
            raise ValueError("phase needs at least one disjunct")


@dataclass(frozen=True)
class SequentialSpec:
    """Phase decomposition of the sequential mission fragment."""

    unsafe: str
    phases: tuple[Phase, ...]

    def __post_init__(self):
        if not self.phases:
            raise ValueError("spec needs at least one phase")
        for ph in self.phases:
            for dis in ph.disjuncts:
                if self.unsafe in dis.props:
                    raise ValueError("goal propositions must exclude the unsafe one")


def _flatten_or(phi: Formula) -> list[Formula]:
    if isinstance(phi, Or):
        return _flatten_or(phi.left) + _flatten_or(phi.right)
    return [phi]


def _guard_disjunct(phi: Formula) -> Disjunct:
    """A guard is a bare atom or G[<=tau] over a disjunction of atoms."""
    if isinstance(phi, Atom):
        return Disjunct(0.0, (phi.name,))
    if isinstance(phi, Always):
        parts = _flatten_or(phi.child)
        names = []
        for p in parts:
            if not isinstance(p, Atom):
                raise FragmentError(
                    f"guard body must be a disjunction of atoms: {format_formula(p)}")
            names.append(p.name)
        return Disjunct(phi.bound, tuple(dict.fromkeys(names)))
    raise FragmentError(f"not a reach-and-dwell guard: {format_formula(phi)}")


def _guard_phase_formula(phi: Formula) -> tuple[Disjunct, ...]:
    return tuple(_guard_disjunct(p) for p in _flatten_or(phi))


def to_sequential(phi: Formula, unsafe: str) -> SequentialSpec:
    """Decompose a formula into mission phases; FragmentError if misshapen."""

    def expect_not_unsafe(node: Formula) -> None:
        if not (isinstance(node, Not) and isinstance(node.child, Atom)
                and node.child.name == unsafe):
            raise FragmentError(
                f"until left-hand side must be !{unsafe}: {format_formula(node)}")

    phases: list[Phase] = []

    def walk_until(node: Formula) -> None:
        if not isinstance(node, Until):
            raise FragmentError(f"expected an until chain: {format_formula(node)}")
        expect_not_unsafe(node.left)
        body = node.right
        if isinstance(body, And) and isinstance(body.right, Until):
            phases.append(Phase(node.bound, _guard_phase_formula(body.left)))
            walk_until(body.right)
        else:
            phases.append(Phase(node.bound, _guard_phase_formula(body)))

    walk_until(phi)
    try:
        return SequentialSpec(unsafe=unsafe, phases=tuple(phases))
    except ValueError as exc:
        raise FragmentError(str(exc)) from exc


def spec_to_formula(spec: SequentialSpec) -> Formula:
    """Rebuild the mission formula from its phase decomposition."""

    def guard(dis: Disjunct) -> Formula:
        body: Formula = Atom(dis.props[0])
        for name in dis.props[1:]:
            body = Or(body, Atom(name))
        return Always(body, dis.dwell)

    def phase_formula(ph: Phase) -> Formula:
        phi: Formula = guard(ph.disjuncts[0])
        for dis in ph.disjuncts[1:]:
            phi = Or(phi, guard(dis))
        return phi

    not_u: Formula = Not(Atom(spec.unsafe))
    body = phase_formula(spec.phases[-1])
    for j in range(len(spec.phases) - 2, -1, -1):
        body = And(phase_formula(spec.phases[j]),
                   Until(not_u, body, spec.phases[j + 1].time_bound))
    return Until(not_u, body, spec.phases[0].time_bound)


# ---------------------------------------------------------------------------
# Sequential checker

def sequential_witness(trace: Sequence[TraceStep],
                       spec: SequentialSpec) -> Optional[list[tuple[int, int, int]]]:
    """Satisfaction witness chain [(i_j, k_j, n_j)], 1-based, or None.

    Position i_j is where phase j starts, the hit is at i_j + k_j, and n_j is
    the disjunct picked.  The search is exhaustive over hit offsets and
    disjuncts (memoized over (phase, start)); a greedy earliest hit can fail
    the dwell requirement that a later hit meets.
    """
    steps = [(o, float(t)) for o, t in trace]
    if not steps:
        raise ValueError("trace must be non-empty")
    labels = [o for o, _ in steps]
    durs = [t for _, t in steps]
    length = len(steps)
    phases = spec.phases
    memo: dict[tuple[int, int], Optional[list[tuple[int, int, int]]]] = {}

    def solve(j: int, i: int) -> Optional[list[tuple[int, int, int]]]:
        if j == len(phases):
            return []
        key = (j, i)
        if key in memo:
            return memo[key]
        ph = phases[j]
        result: Optional[list[tuple[int, int, int]]] = None
        elapsed = 0.0
        for k in range(0, length - i):
            if k >= 1:
                before = i + k - 1
                if labels[before] == spec.unsafe:
                    break
                elapsed += durs[before]
            if elapsed > ph.time_bound:
                break
            hit = i + k
            for n, dis in enumerate(ph.disjuncts):
                if labels[hit] not in dis.props:
                    continue
                if durs[hit] < dis.dwell:
                    continue
                rest = solve(j + 1, hit)
                if rest is not None:
                    result = [(i + 1, k, n + 1)] + rest
                    break
            if result is not None:
                break
        memo[key] = result
        return result

    return solve(0, 0)


def check_sequential(trace: Sequence[TraceStep], spec: SequentialSpec) -> bool:
    """True iff the trace satisfies the sequential mission spec."""
    return sequential_witness(trace, spec) is not None


# ---------------------------------------------------------------------------
# Generic bounded-semantics checker (oracle)

def _atomic_disjunction(phi: Formula) -> Optional[frozenset[str]]:
    """The atom set if phi is an atom or a pure disjunction of atoms."""
    parts = _flatten_or(phi)
    if all(isinstance(p, Atom) for p in parts):
        return frozenset(p.name for p in parts)
    return None


def check_generic(trace: Sequence[TraceStep], phi: Formula) -> bool:
    """Evaluate an arbitrary bounded formula over the timed trace.

    Suffix semantics: an until holds at position i if its right side holds at
    some position k with the time accumulated over [i, k) at most the bound
    and the left side holding on [i, k).  A bounded-always over a disjunction
    of atoms is evaluated within the current state (label in the set, dwell at
    least the bound), matching how a single region visit carries a dwell; over
    general subformulas it requires the subformula at every position starting
    within the window and the remaining trace to cover the window.  A window
    reaching past the end of the trace counts as unsatisfied.
    """
    steps = [(o, float(t)) for o, t in trace]
    if not steps:
        raise ValueError("trace must be non-empty")
    labels = [o for o, _ in steps]
    durs = [t for _, t in steps]
    length = len(steps)
    remaining = [0.0] * (length + 1)
    for i in range(length - 1, -1, -1):
        remaining[i] = durs[i] + remaining[i + 1]
    memo: dict[tuple[int, int], bool] = {}

    def ev(node: Formula, i: int) -> bool:
        key = (id(node), i)
        if key in memo:
            return memo[key]
        memo[key] = result = _ev(node, i)
        return result

    def _ev(node: Formula, i: int) -> bool:
        if isinstance(node, Atom):
            return labels[i] == node.name
        if isinstance(node, Not):
            return not ev(node.child, i)
        if isinstance(node, And):
            return ev(node.left, i) and ev(node.right, i)
        if isinstance(node, Or):
            return ev(node.left, i) or ev(node.right, i)
        if isinstance(node, (Until, Eventually)):
            if isinstance(node, Until):
                left, right, bound = node.left, node.right, node.bound
            else:
                left, right, bound = None, node.child, node.bound
            spent = 0.0
            for k in range(i, length):
                if spent > bound:
                    break
                if ev(right, k):
                    return True
                if left is not None and not ev(left, k):
                    break
                spent += durs[k]
            return False
        if isinstance(node, Always):
            atom_set = _atomic_disjunction(node.child)
            if atom_set is not None:
                return labels[i] in atom_set and durs[i] >= node.bound
            if remaining[i] < node.bound:
                return False
            spent = 0.0
            for k in range(i, length):
                if k > i and spent >= node.bound:
                    break
                if not ev(node.child, k):
                    return False
                spent += durs[k]
            return True
        raise TypeError(f"not a formula node: {node!r}")

    return ev(phi, 0)


# ---------------------------------------------------------------------------
# Horizon

def nested_bound_sum(phi: Formula) -> float:
    """Maximum nested sum of time bounds along any path of the AST."""
    if isinstance(phi, Atom):
        return 0.0
    if isinstance(phi, Not):
        return nested_bound_sum(phi.child)
    if isinstance(phi, (And, Or)):
        return max(nested_bound_sum(phi.left), nested_bound_sum(phi.right))
    if isinstance(phi, Until):
        return phi.bound + max(nested_bound_sum(phi.left), nested_bound_sum(phi.right))
    if isinstance(phi, (Eventually, Always)):
        return phi.bound + nested_bound_sum(phi.child)
    raise TypeError(f"not a formula node: {phi!r}")


def horizon_stages(phi: Formula, dt: float) -> int:
    """Smallest stage count whose total duration covers the nested bound sum."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    return max(1, math.ceil(nested_bound_sum(phi) / dt))
