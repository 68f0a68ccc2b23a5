"""First-order formulas over nested pushdown trees.

Atoms: x = y, edge(x,y) for any transition, edge[i](x,y) for transition i,
jump(x,y), root(x).  Connectives: !, &, |, exists, forall.  Precedence is
! > & > |; quantifier scope extends maximally to the right.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional, Tuple

from .errors import FormulaSyntaxError


@dataclass(frozen=True)
class Eq:
    left: str
    right: str


@dataclass(frozen=True)
class EdgeAtom:
    left: str
    right: str
    index: Optional[int] = None


@dataclass(frozen=True)
class JumpAtom:
    left: str
    right: str


@dataclass(frozen=True)
class RootAtom:
    var: str


@dataclass(frozen=True)
class Not:
    body: object


@dataclass(frozen=True)
class And:
    left: object
    right: object


@dataclass(frozen=True)
class Or:
    left: object
    right: object


@dataclass(frozen=True)
class Exists:
    var: str
    body: object


@dataclass(frozen=True)
class Forall:
    var: str
    body: object


ATOMS = (Eq, EdgeAtom, JumpAtom, RootAtom)
KEYWORDS = {"exists", "forall", "edge", "jump", "root"}

_TOKEN = re.compile(r"\s*(?:(\w+)|([().,&|!=\[\]]))")


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self.tokens = []
        pos = 0
        while pos < len(text):
            m = _TOKEN.match(text, pos)
            if m is None or m.end() == pos:
                if text[pos:].strip():
                    raise FormulaSyntaxError("unexpected character", pos)
                break
            if m.group(1) is not None:
                self.tokens.append((m.group(1), m.start(1)))
            else:
                self.tokens.append((m.group(2), m.start(2)))
            pos = m.end()
        self.i = 0

    def peek(self):
        return self.tokens[self.i][0] if self.i < len(self.tokens) else None

    def where(self):
        return self.tokens[self.i][1] if self.i < len(self.tokens) else len(self.text)

    def take(self, expected=None):
        if self.i >= len(self.tokens):
            raise FormulaSyntaxError(
                f"expected {expected!r}, found end of input", len(self.text)
            )
        tok, at = self.tokens[self.i]
        if expected is not None and tok != expected:
            raise FormulaSyntaxError(f"expected {expected!r}, found {tok!r}", at)
        self.i += 1
        return tok

    def variable(self):
        tok = self.peek()
        if tok is None or not tok.isidentifier() or tok in KEYWORDS:
            raise FormulaSyntaxError("expected a variable name", self.where())
        return self.take()

    def formula(self):
        if self.peek() in ("exists", "forall"):
            kw = self.take()
            var = self.variable()
            self.take(".")
            body = self.formula()
            return Exists(var, body) if kw == "exists" else Forall(var, body)
        return self.disj()

    def disj(self):
        out = self.conj()
        while self.peek() == "|":
            self.take()
            out = Or(out, self.conj())
        return out

    def conj(self):
        out = self.neg()
        while self.peek() == "&":
            self.take()
            out = And(out, self.neg())
        return out

    def neg(self):
        tok = self.peek()
        if tok == "!":
            self.take()
            return Not(self.neg())
        if tok == "(":
            self.take()
            out = self.formula()
            self.take(")")
            return out
        return self.atom()

    def atom(self):
        tok = self.peek()
        at = self.where()
        if tok == "edge":
            self.take()
            index = None
            if self.peek() == "[":
                self.take()
                num = self.take()
                if not num.isdigit():
                    raise FormulaSyntaxError("edge index must be a natural", at)
                index = int(num)
                self.take("]")
            self.take("(")
            x = self.variable()
            self.take(",")
            y = self.variable()
            self.take(")")
            return EdgeAtom(x, y, index)
        if tok == "jump":
            self.take()
            self.take("(")
            x = self.variable()
            self.take(",")
            y = self.variable()
            self.take(")")
            return JumpAtom(x, y)
        if tok == "root":
            self.take()
            self.take("(")
            x = self.variable()
            self.take(")")
            return RootAtom(x)
        x = self.variable()
        self.take("=")
        y = self.variable()
        return Eq(x, y)


def parse_formula(text: str):
    p = _Parser(text)
    out = p.formula()
    if p.i != len(p.tokens):
        raise FormulaSyntaxError("trailing input", p.where())
    return out


def format_formula(phi) -> str:
    return _fmt(phi, 0)


# precedence levels: 0 formula/quantifier, 1 disjunction, 2 conjunction, 3 negation
def _fmt(phi, level: int) -> str:
    if isinstance(phi, Exists):
        s = f"exists {phi.var}. {_fmt(phi.body, 0)}"
        return f"({s})" if level > 0 else s
    if isinstance(phi, Forall):
        s = f"forall {phi.var}. {_fmt(phi.body, 0)}"
        return f"({s})" if level > 0 else s
    if isinstance(phi, Or):
        s = f"{_fmt(phi.left, 1)} | {_fmt(phi.right, 2)}"
        return f"({s})" if level > 1 else s
    if isinstance(phi, And):
        s = f"{_fmt(phi.left, 2)} & {_fmt(phi.right, 3)}"
        return f"({s})" if level > 2 else s
    if isinstance(phi, Not):
        return f"!{_fmt(phi.body, 3)}"
    if isinstance(phi, Eq):
        return f"{phi.left} = {phi.right}"
    if isinstance(phi, EdgeAtom):
        idx = f"[{phi.index}]" if phi.index is not None else ""
        return f"edge{idx}({phi.left}, {phi.right})"
    if isinstance(phi, JumpAtom):
        return f"jump({phi.left}, {phi.right})"
    if isinstance(phi, RootAtom):
        return f"root({phi.var})"
    raise TypeError(phi)


def free_vars(phi) -> frozenset:
    if isinstance(phi, Eq):
        return frozenset((phi.left, phi.right))
    if isinstance(phi, EdgeAtom):
        return frozenset((phi.left, phi.right))
    if isinstance(phi, JumpAtom):
        return frozenset((phi.left, phi.right))
    if isinstance(phi, RootAtom):
        return frozenset((phi.var,))
    if isinstance(phi, Not):
        return free_vars(phi.body)
    if isinstance(phi, (And, Or)):
        return free_vars(phi.left) | free_vars(phi.right)
    if isinstance(phi, (Exists, Forall)):
        return free_vars(phi.body) - {phi.var}
    raise TypeError(phi)


def quantifier_rank(phi) -> int:
    if isinstance(phi, ATOMS):
        return 0
    if isinstance(phi, Not):
        return quantifier_rank(phi.body)
    if isinstance(phi, (And, Or)):
        return max(quantifier_rank(phi.left), quantifier_rank(phi.right))
    if isinstance(phi, (Exists, Forall)):
        return 1 + quantifier_rank(phi.body)
    raise TypeError(phi)


def nnf(phi):
    """Push negations down to atoms."""
    if isinstance(phi, ATOMS):
        return phi
    if isinstance(phi, And):
        return And(nnf(phi.left), nnf(phi.right))
    if isinstance(phi, Or):
        return Or(nnf(phi.left), nnf(phi.right))
    if isinstance(phi, Exists):
        return Exists(phi.var, nnf(phi.body))
    if isinstance(phi, Forall):
        return Forall(phi.var, nnf(phi.body))
    if isinstance(phi, Not):
        b = phi.body
        if isinstance(b, ATOMS):
            return phi
        if isinstance(b, Not):
            return nnf(b.body)
        if isinstance(b, And):
            return Or(nnf(Not(b.left)), nnf(Not(b.right)))
        if isinstance(b, Or):
            return And(nnf(Not(b.left)), nnf(Not(b.right)))
        if isinstance(b, Exists):
            return Forall(b.var, nnf(Not(b.body)))
        if isinstance(b, Forall):
            return Exists(b.var, nnf(Not(b.body)))
    raise TypeError(phi)


def is_nnf(phi) -> bool:
    if isinstance(phi, ATOMS):
        return True
    if isinstance(phi, Not):
        return isinstance(phi.body, ATOMS)
    if isinstance(phi, (And, Or)):
        return is_nnf(phi.left) and is_nnf(phi.right)
    if isinstance(phi, (Exists, Forall)):
        return is_nnf(phi.body)
    return False


def normalize(phi) -> Tuple[object, int]:
    """Negation normal form plus the quantifier rank."""
    out = nnf(phi)
    return out, quantifier_rank(out)
