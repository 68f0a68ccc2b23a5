"""Pushdown systems of level <= 2, runs, and bounded run enumeration.

A run is identified by its start configuration plus the sequence of
transition indices it applies; the intermediate configurations are memoized
but do not take part in equality or hashing.  Enumeration is always in
length-lexicographic order: shorter runs first, ties broken by the index
sequence.
"""

from __future__ import annotations

from typing import Callable, Iterable, Iterator, NamedTuple, Optional, Sequence, Tuple

from .errors import (
    EndpointMismatch,
    Inapplicable,
    LimitExceeded,
    MAX_LENGTH,
    MAX_MEMBERS,
    SystemParseError,
    UndefinedOperation,
)
from .stacks import (
    Alphabet,
    Clone,
    Pop,
    Push,
    Stack,
    Symbol,
    alphabet_from_names,
    apply_op,
    initial_stack,
    top_symbol,
)


class Configuration(NamedTuple):
    state: str
    stack: Stack


class Transition(NamedTuple):
    source: str
    symbol: Symbol
    target: str
    op: object

    def __repr__(self):
        return f"{self.source} {self.symbol.name} -> {self.target} {self.op!r}"


class PushdownSystem:
    """A level-l pushdown system with an ordered transition list.

    The order of `delta` is significant: it fixes the length-lexicographic
    order on runs.
    """

    __slots__ = ("level", "alphabet", "states", "initial", "delta", "_by_key", "_hash")

    def __init__(self, level, alphabet, states, initial, delta):
        if len(states) > MAX_MEMBERS or len(alphabet.symbols) > MAX_MEMBERS:
            raise LimitExceeded("state/symbol sets are capped at 2**16 members")
        if initial not in states:
            raise ValueError(f"initial state {initial!r} not declared")
        for t in delta:
            if t.source not in states or t.target not in states:
                raise ValueError(f"transition {t!r} uses an undeclared state")
            if t.symbol not in alphabet:
                raise ValueError(f"transition {t!r} uses an undeclared symbol")
        object.__setattr__(self, "level", level)
        object.__setattr__(self, "alphabet", alphabet)
        object.__setattr__(self, "states", tuple(states))
        object.__setattr__(self, "initial", initial)
        object.__setattr__(self, "delta", tuple(delta))
        by_key = {}
        for i, t in enumerate(self.delta):
            by_key.setdefault((t.source, t.symbol), []).append((i, t))
        object.__setattr__(
            self, "_by_key", {k: tuple(v) for k, v in by_key.items()}
        )
        object.__setattr__(
            self,
            "_hash",
            hash((level, self.alphabet, self.states, initial, self.delta)),
        )

    def __setattr__(self, *a):  # pragma: no cover - immutability guard
        raise AttributeError("PushdownSystem is immutable")

    def __eq__(self, other):
        return (
            isinstance(other, PushdownSystem)
            and self.level == other.level
            and self.alphabet == other.alphabet
            and self.states == other.states
            and self.initial == other.initial
            and self.delta == other.delta
        )

    def __hash__(self):
        return self._hash

    def initial_config(self) -> Configuration:
        return Configuration(self.initial, initial_stack(self.alphabet, self.level))

    def candidates(self, state: str, symbol: Symbol):
        """Transitions applicable by state and top symbol, in index order."""
        return self._by_key.get((state, symbol), ())

    def moves(self, config: Configuration):
        """All (index, successor configuration) pairs from `config`."""
        out = []
        sym = top_symbol(config.stack)
        for i, t in self.candidates(config.state, sym):
            try:
                out.append((i, Configuration(t.target, apply_op(config.stack, t.op))))
            except UndefinedOperation:
                continue
        return out

    def __repr__(self):
        return (
            f"PushdownSystem(level={self.level}, states={len(self.states)}, "
            f"delta={len(self.delta)})"
        )


def step(sys: PushdownSystem, config: Configuration, index: int) -> Configuration:
    """Apply transition `index`; raises Inapplicable on any mismatch."""
    t = sys.delta[index]
    if t.source != config.state:
        raise Inapplicable(f"transition {index} expects state {t.source}")
    if top_symbol(config.stack) != t.symbol:
        raise Inapplicable(f"transition {index} expects top symbol {t.symbol.name}")
    try:
        return Configuration(t.target, apply_op(config.stack, t.op))
    except UndefinedOperation as e:
        raise Inapplicable(str(e)) from e


def try_step(sys: PushdownSystem, config: Configuration, index: int):
    t = sys.delta[index]
    if t.source != config.state or top_symbol(config.stack) != t.symbol:
        return None
    try:
        return Configuration(t.target, apply_op(config.stack, t.op))
    except UndefinedOperation:
        return None


class Run:
    """A run: start configuration plus applied transition indices.

    Equality and hashing use only (start, steps); the nested pushdown tree is
    an unfolding, so runs with equal final configurations but different step
    sequences are distinct nodes.
    """

    __slots__ = ("system", "start", "steps", "configs", "_hash")

    def __init__(self, system, start, steps, configs):
        object.__setattr__(self, "system", system)
        object.__setattr__(self, "start", start)
        object.__setattr__(self, "steps", steps)
        object.__setattr__(self, "configs", configs)
        object.__setattr__(self, "_hash", hash((start, steps)))

    def __setattr__(self, *a):  # pragma: no cover - immutability guard
        raise AttributeError("Run is immutable")

    @classmethod
    def empty(cls, system: PushdownSystem, start: Optional[Configuration] = None):
        c = system.initial_config() if start is None else start
        return cls(system, c, (), (c,))

    @classmethod
    def from_steps(cls, system, start, steps) -> "Run":
        if len(steps) > MAX_LENGTH:
            raise LimitExceeded("run length capped at 2**32")
        configs = [start]
        for i in steps:
            configs.append(step(system, configs[-1], i))
        return cls(system, start, tuple(steps), tuple(configs))

    @property
    def length(self) -> int:
        return len(self.steps)

    def config(self, i: int) -> Configuration:
        return self.configs[i]

    @property
    def final(self) -> Configuration:
        return self.configs[-1]

    @property
    def final_stack(self) -> Stack:
        return self.configs[-1].stack

    @property
    def final_state(self) -> str:
        return self.configs[-1].state

    @property
    def width(self) -> int:
        """Width of the final stack (not the run length)."""
        return self.final_stack.width

    def extend(self, index: int) -> "Run":
        nxt = step(self.system, self.final, index)
        return Run(self.system, self.start, self.steps + (index,), self.configs + (nxt,))

    def prefix(self, n: int) -> "Run":
        if n > self.length:
            raise ValueError("prefix longer than run")
        return Run(self.system, self.start, self.steps[:n], self.configs[: n + 1])

    def is_prefix_of(self, other: "Run") -> bool:
        return (
            self.start == other.start
            and self.length <= other.length
            and other.steps[: self.length] == self.steps
        )

    def compose(self, other: "Run") -> "Run":
        if self.final != other.start:
            raise EndpointMismatch("second run must start at the first run's end")
        if self.length + other.length > MAX_LENGTH:
            raise LimitExceeded("run length capped at 2**32")
        return Run(
            self.system,
            self.start,
            self.steps + other.steps,
            self.configs + other.configs[1:],
        )

    def segment(self, lo: int, hi: int) -> "Run":
        """The sub-run over positions lo..hi."""
        if not 0 <= lo <= hi <= self.length:
            raise ValueError("bad segment bounds")
        return Run(
            self.system,
            self.configs[lo],
            self.steps[lo:hi],
            self.configs[lo : hi + 1],
        )

    def replay_ok(self) -> bool:
        """Re-validate the memoized configurations under `step`."""
        c = self.start
        for i, idx in enumerate(self.steps):
            try:
                c = step(self.system, c, idx)
            except Inapplicable:
                return False
            if c != self.configs[i + 1]:
                return False
        return True

    def key(self):
        return (self.length, self.steps)

    def __eq__(self, other):
        return (
            isinstance(other, Run)
            and self._hash == other._hash
            and self.start == other.start
            and self.steps == other.steps
        )

    def __hash__(self):
        return self._hash

    def __repr__(self):
        body = ",".join(map(str, self.steps)) if self.steps else "e"
        return f"Run[{body}]"


def compose(pi: Run, rho: Run) -> Run:
    return pi.compose(rho)


# ---------------------------------------------------------------------------
# enumeration


def enumerate_runs(
    sys: PushdownSystem,
    start: Optional[Configuration] = None,
    max_len: int = 0,
    *,
    forbid: Optional[Callable[[Configuration], bool]] = None,
    terminal: Optional[Callable[[Configuration], bool]] = None,
    end_pred: Optional[Callable[[Run], bool]] = None,
) -> Iterator[Run]:
    """Yield runs from `start` of length <= max_len in length-lex order.

    `forbid`: runs visiting a forbidden configuration are dropped entirely
    (they are never yielded and never extended).
    `terminal`: configurations that may end a run but must not be extended;
    this is how "visits X only finally" searches are expressed.
    `end_pred`: yield filter, applied to otherwise admissible runs.
    """
    root = Run.empty(sys, start)
    if forbid is not None and forbid(root.start):
        return
    if end_pred is None or end_pred(root):
        yield root
    if terminal is not None and terminal(root.start):
        return
    frontier = [root]
    for _ in range(max_len):
        nxt = []
        for run in frontier:
            for idx, conf in sys.moves(run.final):
                if forbid is not None and forbid(conf):
                    continue
                child = Run(
                    sys, run.start, run.steps + (idx,), run.configs + (conf,)
                )
                if end_pred is None or end_pred(child):
                    yield child
                if terminal is None or not terminal(conf):
                    nxt.append(child)
        if not nxt:
            return
        frontier = nxt


class SearchResult(NamedTuple):
    runs: Tuple[Run, ...]
    exhausted: bool  # True when the stream was cut by the budget


def shortest_runs(
    sys: PushdownSystem,
    start: Optional[Configuration],
    to_pred: Callable[[Run], bool],
    k: int,
    budget: int,
    *,
    forbid=None,
    terminal=None,
) -> SearchResult:
    """Up to `k` length-lexicographically smallest runs satisfying `to_pred`
    within length `budget`.

    `exhausted` is set when the enumeration was cut by the budget while fewer
    than `k` runs were found, i.e. when absence is not certain.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    found = []
    stream_done = False
    gen = enumerate_runs(
        sys, start, budget, forbid=forbid, terminal=terminal, end_pred=to_pred
    )
    probe = object()
    it = iter(gen)
    while len(found) < k:
        nxt = next(it, probe)
        if nxt is probe:
            stream_done = True
            break
        found.append(nxt)
    if len(found) >= k:
        return SearchResult(tuple(found), False)
    if stream_done:
        # stream_done only tells us the generator stopped; it stops either
        # because the frontier emptied (complete) or the budget was hit.
        # Re-derive completeness: the frontier emptied iff no admissible run
        # of length exactly `budget` exists that could still be extended.
        complete = _frontier_emptied(sys, start, budget, forbid, terminal)
        return SearchResult(tuple(found), not complete)
    return SearchResult(tuple(found), True)


def _frontier_emptied(sys, start, budget, forbid, terminal) -> bool:
    """True iff the enumeration tree dies out within `budget` levels.

    Works over configuration sets: emptiness does not depend on run
    multiplicity.
    """
    root = Run.empty(sys, start)
    if forbid is not None and forbid(root.start):
        return True
    if terminal is not None and terminal(root.start):
        return True
    frontier = {root.final}
    for _ in range(budget):
        nxt = set()
        for conf in frontier:
            for _idx, c2 in sys.moves(conf):
                if forbid is not None and forbid(c2):
                    continue
                if terminal is not None and terminal(c2):
                    continue
                nxt.add(c2)
        if not nxt:
            return True
        frontier = nxt
    return False


# ---------------------------------------------------------------------------
# file format


_OP_WORDS = {"push", "pop1", "pop2", "clone2"}


def _parse_op(words: Sequence[str], level: int, alphabet: Alphabet, line_no: int):
    kind = words[0]
    if kind == "push":
        if len(words) != 2:
            raise SystemParseError("push takes one symbol", line_no)
        try:
            sym = alphabet.by_name(words[1])
        except KeyError:
            raise SystemParseError(f"undeclared symbol {words[1]!r}", line_no)
        if sym.is_bottom:
            raise SystemParseError("cannot push the bottom symbol", line_no)
        return Push(sym)
    if len(words) != 1:
        raise SystemParseError(f"malformed operation {' '.join(words)!r}", line_no)
    if kind.startswith("pop"):
        try:
            k = int(kind[3:])
        except ValueError:
            raise SystemParseError(f"malformed operation {kind!r}", line_no)
        if not 1 <= k <= level:
            raise SystemParseError(f"pop{k} out of range for level {level}", line_no)
        return Pop(k)
    if kind.startswith("clone"):
        try:
            j = int(kind[5:])
        except ValueError:
            raise SystemParseError(f"malformed operation {kind!r}", line_no)
        if not 2 <= j <= level:
            raise SystemParseError(f"clone{j} out of range for level {level}", line_no)
        return Clone(j)
    raise SystemParseError(f"unknown operation {kind!r}", line_no)


def parse_system(text: str) -> PushdownSystem:
    """Parse the line-oriented system format ('#' starts a comment)."""
    header = {}
    delta_lines = []
    in_delta = False
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        if in_delta:
            delta_lines.append((no, line.strip()))
            continue
        if ":" not in line:
            raise SystemParseError("expected 'key: value'", no)
        key, _, value = line.partition(":")
        key = key.strip()
        value = value.strip()
        if key == "delta":
            if value:
                raise SystemParseError("transitions go on their own lines", no)
            in_delta = True
            continue
        if key in header:
            raise SystemParseError(f"duplicate key {key!r}", no)
        header[key] = (no, value)

    for req in ("level", "bottom", "alphabet", "states", "initial"):
        if req not in header:
            raise SystemParseError(f"missing '{req}:' line")
    no, value = header["level"]
    try:
        level = int(value)
    except ValueError:
        raise SystemParseError("level must be an integer", no)
    if level not in (1, 2):
        raise SystemParseError("supported system levels are 1 and 2", no)
    bottom_name = header["bottom"][1]
    names = header["alphabet"][1].split()
    if bottom_name not in names:
        raise SystemParseError(
            "bottom symbol missing from alphabet", header["alphabet"][0]
        )
    if len(names) != len(set(names)):
        raise SystemParseError("duplicate alphabet symbol", header["alphabet"][0])
    alphabet = alphabet_from_names(names, bottom_name)
    states = tuple(header["states"][1].split())
    if len(states) != len(set(states)):
        raise SystemParseError("duplicate state", header["states"][0])
    initial = header["initial"][1]
    if initial not in states:
        raise SystemParseError("undeclared initial state", header["initial"][0])

    delta = []
    for no, line in delta_lines:
        if "->" not in line:
            raise SystemParseError("expected 'q sym -> q2 op'", no)
        lhs, _, rhs = line.partition("->")
        lp = lhs.split()
        rp = rhs.split()
        if len(lp) != 2 or len(rp) < 2:
            raise SystemParseError("expected 'q sym -> q2 op'", no)
        src, sym_name = lp
        tgt = rp[0]
        if src not in states:
            raise SystemParseError(f"undeclared state {src!r}", no)
        if tgt not in states:
            raise SystemParseError(f"undeclared state {tgt!r}", no)
        try:
            sym = alphabet.by_name(sym_name)
        except KeyError:
            raise SystemParseError(f"undeclared symbol {sym_name!r}", no)
        op = _parse_op(rp[1:], level, alphabet, no)
        delta.append(Transition(src, sym, tgt, op))

    return PushdownSystem(level, alphabet, states, initial, tuple(delta))


def load_system(path) -> PushdownSystem:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_system(fh.read())


def _format_op(op) -> str:
    if isinstance(op, Push):
        return f"push {op.symbol.name}"
    if isinstance(op, Pop):
        return f"pop{op.k}"
    if isinstance(op, Clone):
        return f"clone{op.j}"
    raise TypeError(op)


def serialize_system(sys: PushdownSystem) -> str:
    lines = [
        f"level: {sys.level}",
        f"bottom: {sys.alphabet.bottom.name}",
        "alphabet: " + " ".join(s.name for s in sys.alphabet.symbols),
        "states: " + " ".join(sys.states),
        f"initial: {sys.initial}",
        "delta:",
    ]
    for t in sys.delta:
        lines.append(f"  {t.source} {t.symbol.name} -> {t.target} {_format_op(t.op)}")
    return "\n".join(lines) + "\n"


def parse_run(sys: PushdownSystem, text: str) -> Run:
    """Parse the CLI run notation: comma-separated transition indices, or an
    empty string / 'e' for the empty run."""
    text = text.strip()
    if text in ("", "e"):
        return Run.empty(sys)
    try:
        steps = tuple(int(p) for p in text.split(","))
    except ValueError:
        raise ValueError(f"malformed run {text!r}")
    for i in steps:
        if not 0 <= i < len(sys.delta):
            raise ValueError(f"transition index {i} out of range")
    return Run.from_steps(sys, sys.initial_config(), steps)
