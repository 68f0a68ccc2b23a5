"""Context-free grammars over transition indices.

Loops of a level-1 system over a fixed top symbol form a context-free
language of transition sequences; so do the runs from the initial
configuration to a fixed configuration.  Shortest words are enumerated by a
k-best fixpoint over productions.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

from .errors import LevelUnsupported
from .stacks import Pop, Push, Symbol, Word
from .system import PushdownSystem


@dataclass(frozen=True)
class Grammar:
    """Productions map nonterminal names to right-hand sides; terminals are
    arbitrary hashable objects (transition indices in the loop grammars)."""

    start: str
    productions: Tuple[Tuple[str, Tuple[object, ...]], ...]

    @property
    def nonterminals(self) -> Tuple[str, ...]:
        seen = []
        for lhs, _ in self.productions:
            if lhs not in seen:
                seen.append(lhs)
        return tuple(seen)

    def rhs_of(self, nt: str):
        return [rhs for lhs, rhs in self.productions if lhs == nt]


def _is_nonterminal(g: Grammar, sym) -> bool:
    return isinstance(sym, str) and any(lhs == sym for lhs, _ in g.productions)


def reduce_grammar(g: Grammar) -> Grammar:
    """Drop unproductive and unreachable nonterminals."""
    nts = set(g.nonterminals)
    productive = set()
    changed = True
    while changed:
        changed = False
        for lhs, rhs in g.productions:
            if lhs in productive:
                continue
            if all(s not in nts or s in productive for s in rhs):
                productive.add(lhs)
                changed = True
    reachable = set()
    if g.start in productive:
        frontier = [g.start]
        reachable.add(g.start)
        while frontier:
            nt = frontier.pop()
            for lhs, rhs in g.productions:
                if lhs != nt:
                    continue
                if any(s in nts and s not in productive for s in rhs):
                    continue
                for s in rhs:
                    if s in productive and s not in reachable:
                        reachable.add(s)
                        frontier.append(s)
    prods = tuple(
        (lhs, rhs)
        for lhs, rhs in g.productions
        if lhs in reachable
        and all(s not in nts or s in reachable for s in rhs)
    )
    return Grammar(g.start, prods)


def _loop_nt(p: str, q: str, sym: Symbol) -> str:
    return f"L<{p},{q},{sym.name}>"


def _loop_productions(sys: PushdownSystem) -> List[Tuple[str, Tuple[object, ...]]]:
    """Loops over a top symbol never inspect the word below, so they are
    generated by: empty, or push t, loop over t, pop t, loop over the
    original symbol."""
    prods: List[Tuple[str, Tuple[object, ...]]] = []
    states = sys.states
    symbols = sys.alphabet.symbols
    for sym in symbols:
        for p in states:
            prods.append((_loop_nt(p, p, sym), ()))
    pops: Dict[Symbol, List[Tuple[int, str, str]]] = {}
    for i, t in enumerate(sys.delta):
        if isinstance(t.op, Pop) and t.op.k == 1:
            pops.setdefault(t.symbol, []).append((i, t.source, t.target))
    for i, t in enumerate(sys.delta):
        if not isinstance(t.op, Push):
            continue
        tau = t.op.symbol
        for j, q3, q2 in pops.get(tau, ()):
            for q_end in states:
                for sym in symbols:
                    # t.source --push tau--> t.target, loop over tau to q3,
                    # pop back, loop over sym to q_end
                    prods.append(
                        (
                            _loop_nt(t.source, q_end, sym),
                            (i, _loop_nt(t.target, q3, tau), j, _loop_nt(q2, q_end, sym)),
                        )
                    )
    return prods


def loops_to_cfl(
    sys: PushdownSystem,
    q: str,
    q2: str,
    symbol: Symbol,
    mode: str = "loop",
    target: Optional[Tuple[str, Word]] = None,
) -> Grammar:
    """Grammar over transition indices for the loops from (q, w·symbol) to
    (q2, w·symbol) that never visit w, or (mode 'initial_runs') for the runs
    from the initial configuration to the exact configuration `target`.

    Loop languages do not depend on the word below the top symbol.
    """
    if sys.level != 1:
        raise LevelUnsupported("context-free loop languages need a level-1 system")
    prods = _loop_productions(sys)
    if mode == "loop":
        return reduce_grammar(Grammar(_loop_nt(q, q2, symbol), prods))
    if mode != "initial_runs":
        raise ValueError(f"unknown mode {mode!r}")
    if target is None:
        raise ValueError("mode 'initial_runs' needs a target (state, word)")
    tq, word = target
    if not word or not word[0].is_bottom:
        raise ValueError("target word must start at the bottom symbol")
    # a run to the target word passes every prefix; cutting at the last
    # visits gives: loop over prefix 1, push letter 2, loop over prefix 2, ...
    # R<d, s> generates the tail starting at the last visit of prefix d+1 in
    # state s.
    prods2 = list(prods)
    k_len = len(word)
    for d in range(k_len):
        for s in sys.states:
            lhs = f"R<{d},{s}>"
            if d == k_len - 1:
                prods2.append((lhs, (_loop_nt(s, tq, word[d]),)))
            else:
                for i, t in enumerate(sys.delta):
                    if (
                        isinstance(t.op, Push)
                        and t.op.symbol == word[d + 1]
                        and t.symbol == word[d]
                    ):
                        prods2.append(
                            (
                                lhs,
                                (_loop_nt(s, t.source, word[d]), i, f"R<{d + 1},{t.target}>"),
                            )
                        )
    start = f"R<0,{sys.initial}>"
    return reduce_grammar(Grammar(start, tuple(_dedupe(prods2))))


def _dedupe(prods):
    seen = set()
    for p in prods:
        if p not in seen:
            seen.add(p)
            yield p


def _word_key(w: Tuple[object, ...]):
    # terminals within one grammar are homogeneous (transition indices or
    # single-type labels), so plain tuple comparison is the lex order
    return (len(w), w)


def cfl_shortest_words(g: Grammar, k: int) -> List[Tuple[object, ...]]:
    """The k length-lexicographically smallest words of L(g).

    Agenda-free k-best fixpoint: every nonterminal keeps its current k best
    derivable words; productions are relaxed until nothing improves.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    g = reduce_grammar(g)
    nts = set(g.nonterminals)
    if g.start not in nts:
        return []
    best: Dict[str, List[Tuple[object, ...]]] = {nt: [] for nt in nts}

    def combine(rhs) -> List[Tuple[object, ...]]:
        words: List[Tuple[object, ...]] = [()]
        for sym in rhs:
            if sym in nts:
                options = best[sym]
            else:
                options = [(sym,)]
            if not options:
                return []
            words = sorted(
                {w + o for w in words for o in options}, key=_word_key
            )[: k]
        return words

    changed = True
    while changed:
        changed = False
        for lhs, rhs in g.productions:
            for w in combine(rhs):
                bucket = best[lhs]
                if w in bucket:
                    continue
                bucket.append(w)
                bucket.sort(key=_word_key)
                del bucket[k:]
                if w in bucket:
                    changed = True
    return best[g.start][:k]


def language_upto(g: Grammar, max_len: int) -> List[Tuple[object, ...]]:
    """All words of L(g) of length <= max_len (finite, for oracle use)."""
    g = reduce_grammar(g)
    nts = set(g.nonterminals)
    if g.start not in nts:
        return []
    words: Dict[str, set] = {nt: set() for nt in nts}
    changed = True
    while changed:
        changed = False
        for lhs, rhs in g.productions:
            partial = {()}
            dead = False
            for sym in rhs:
                opts = words[sym] if sym in nts else {(sym,)}
                if not opts:
                    dead = True
                    break
                partial = {
                    w + o for w in partial for o in opts if len(w) + len(o) <= max_len
                }
                if not partial:
                    dead = True
                    break
            if dead:
                continue
            for w in partial:
                if w not in words[lhs]:
                    words[lhs].add(w)
                    changed = True
    return sorted(words[g.start], key=_word_key)
