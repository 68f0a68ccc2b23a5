"""Structural run analysis for level-2 systems.

Covers generalised milestones and minimal operation sequences, saturating
loop/return/high-loop counting, gap and milestone decompositions of runs,
prefix replacement on runs, empirical length-bound tables, and run shrinking.

Counting is done by a saturating dynamic program over configurations, never
by materialising runs; saturating addition is exact for threshold counts.
Exactness of a count is certified heuristically: the totals must be stable
across two successive budget doublings (or the search space must be
exhausted).  The flag travels with every result.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from .errors import (
    BudgetExhausted,
    LevelUnsupported,
    PreconditionViolated,
    SignatureMismatch,
    Unreachable,
)
from .stacks import (
    Clone,
    Pop,
    Push,
    Stack,
    Word,
    common_prefix,
    is_prefix,
    is_proper_substack,
    is_word_prefix,
    replace_prefix,
    stack_of_words,
    top_word,
    word_stack,
)
from .system import Configuration, PushdownSystem, Run, enumerate_runs, shortest_runs

DEFAULT_COUNT_BUDGET = 32


# ---------------------------------------------------------------------------
# milestones


@dataclass(frozen=True)
class MilestoneSet:
    """Generalised milestones of a stack, ordered along the minimal
    operation sequence; `flags[i]` marks the proper milestones (substacks)."""

    stacks: Tuple[Stack, ...]
    flags: Tuple[bool, ...]

    def __len__(self):
        return len(self.stacks)

    def milestones(self) -> Tuple[Stack, ...]:
        return tuple(s for s, f in zip(self.stacks, self.flags) if f)


def _check_level2(s: Stack):
    if s.level != 2:
        raise LevelUnsupported("analysis requires level-2 stacks")


def generalized_milestones(s: Stack) -> MilestoneSet:
    """All stacks every run from the initial configuration to `s` must pass.

    A stack w1:..:wi:v is listed when wi ⊓ w(i+1) <= v and v <= wi or
    v <= w(i+1); for the first word only v <= w1 applies.  The order matches
    the minimal operation sequence: build w1 upward, then per word clone,
    pop down to the common prefix, push up.
    """
    _check_level2(s)
    words = s.words
    out: List[Stack] = []
    flags: List[bool] = []
    # first word: ascending prefixes of w1
    w1 = words[0]
    for j in range(1, len(w1) + 1):
        out.append(stack_of_words((w1[:j],)))
        flags.append(True)
    for i in range(1, len(words)):
        below = words[:i]
        wi, wnext = words[i - 1], words[i]
        com = common_prefix(wi, wnext)
        # clone phase then pop phase: prefixes of wi down to the common prefix
        for j in range(len(wi), len(com) - 1, -1):
            v = wi[:j]
            out.append(stack_of_words(below + (v,)))
            flags.append(is_word_prefix(v, wnext))
        # push phase: strict extensions of the common prefix toward w(i+1)
        for j in range(len(com) + 1, len(wnext) + 1):
            out.append(stack_of_words(below + (wnext[:j],)))
            flags.append(True)
    return MilestoneSet(tuple(out), tuple(flags))


def _check_reachable_words(s: Stack):
    bottom_ok = all(
        w[0].is_bottom and not any(sym.is_bottom for sym in w[1:]) for w in s.words
    )
    if not bottom_ok:
        raise Unreachable(
            "reachable stacks carry the bottom symbol exactly at word position 0"
        )


def minimal_op_sequence(s: Stack) -> Tuple[object, ...]:
    """The minimal {push, pop1, clone2} sequence generating `s` from the
    initial stack; its prefixes visit exactly the generalised milestones."""
    _check_level2(s)
    _check_reachable_words(s)
    words = s.words
    ops: List[object] = []
    w1 = words[0]
    for sym in w1[1:]:
        ops.append(Push(sym))
    for i in range(1, len(words)):
        wi, wnext = words[i - 1], words[i]
        com = common_prefix(wi, wnext)
        ops.append(Clone(2))
        ops.extend(Pop(1) for _ in range(len(wi) - len(com)))
        ops.extend(Push(sym) for sym in wnext[len(com):])
    return tuple(ops)


# ---------------------------------------------------------------------------
# counting


@dataclass(frozen=True)
class CountFunction:
    """Saturating count per state pair; an entry of `z` means 'z or more'."""

    z: int
    states: Tuple[str, ...]
    entries: Tuple[Tuple[Tuple[str, str], int], ...]  # sorted, nonzero only

    @classmethod
    def from_dict(cls, z: int, states, table: Dict[Tuple[str, str], int]):
        items = tuple(sorted((k, min(v, z)) for k, v in table.items() if v > 0))
        return cls(z, tuple(states), items)

    def get(self, q: str, q2: str) -> int:
        for k, v in self.entries:
            if k == (q, q2):
                return v
        return 0

    def as_dict(self) -> Dict[Tuple[str, str], int]:
        return dict(self.entries)

    def matrix_lines(self) -> List[str]:
        head = "      " + " ".join(f"{q:>4}" for q in self.states)
        lines = [head]
        for q in self.states:
            row = " ".join(f"{self.get(q, q2):>4}" for q2 in self.states)
            lines.append(f"{q:>5} {row}")
        return lines


@dataclass(frozen=True)
class CountResult:
    counts: CountFunction
    exact: bool
    budget: int


KINDS = ("loop", "highloop", "return", "to_prefix")


def _default_context(sys: PushdownSystem) -> Stack:
    return stack_of_words(((sys.alphabet.bottom,),))


def _sat_add(a: int, b: int, z: int) -> int:
    c = a + b
    return z if c > z else c


def _count_dp(
    sys: PushdownSystem,
    start_stack: Stack,
    context: Stack,
    targets: Dict[Stack, object],
    z: int,
    budget: int,
    *,
    return_target: Optional[Stack] = None,
    extra_forbidden: Tuple[Stack, ...] = (),
):
    """Count runs from (q, start_stack), per start state q, that never visit
    the context stack and end at a target stack (or pop to `return_target`,
    visited only finally).  Returns ({(q, q2, key): count}, exact)."""
    totals: Dict[Tuple[str, str, object], int] = {}
    frontiers = {}
    for q in sys.states:
        frontiers[q] = {Configuration(q, start_stack): 1}
        key = targets.get(start_stack)
        if key is not None:
            totals[(q, q, key)] = 1  # the empty run
    snapshots = []
    exact = False
    forbidden = set(extra_forbidden)
    forbidden.add(context)
    for _level in range(1, budget + 1):
        alive = False
        for q in sys.states:
            nxt: Dict[Configuration, int] = {}
            for conf, cnt in frontiers[q].items():
                for _idx, c2 in sys.moves(conf):
                    if c2.stack == return_target:
                        k = (q, c2.state, "return")
                        totals[k] = _sat_add(totals.get(k, 0), cnt, z)
                        continue
                    if c2.stack in forbidden:
                        continue
                    key = targets.get(c2.stack)
                    if key is not None:
                        k = (q, c2.state, key)
                        totals[k] = _sat_add(totals.get(k, 0), cnt, z)
                    prev = nxt.get(c2, 0)
                    nxt[c2] = z if prev >= z else _sat_add(prev, cnt, z)
            frontiers[q] = nxt
            if nxt:
                alive = True
        snapshots.append(dict(totals))
        if not alive:
            exact = True
            break
    if not exact and budget >= 4:
        a = snapshots[budget // 4 - 1]
        b = snapshots[budget // 2 - 1]
        c = snapshots[-1]
        exact = a == b == c
    return totals, exact


def count_runs(
    sys: PushdownSystem,
    word: Word,
    kind: str,
    z: int,
    *,
    budget: int = DEFAULT_COUNT_BUDGET,
    context: Optional[Stack] = None,
    prefix_index: int = 0,
) -> CountResult:
    """Count loops, high loops, returns, or prefix-reaching runs of the stack
    context:word, saturating at `z`.

    Loop and return counts do not depend on the context; the default context
    is the width-1 initial stack.  `to_prefix` counts runs ending with the
    top word popped down `prefix_index` letters that never descend to the
    context, which makes them context-free as well.
    """
    if sys.level != 2:
        raise LevelUnsupported("counting requires a level-2 system")
    if kind not in KINDS:
        raise ValueError(f"unknown kind {kind!r}")
    if z < 1:
        raise ValueError("threshold must be >= 1")
    ctx = context if context is not None else _default_context(sys)
    start = Stack(2, ctx.entries + (word_stack(word),))
    if kind == "return":
        totals, exact = _count_dp(
            sys, start, ctx, {}, z, budget, return_target=ctx
        )
        key = "return"
    elif kind == "to_prefix":
        if not 0 <= prefix_index < len(word):
            raise ValueError("prefix index out of range")
        tgt = Stack(2, ctx.entries + (word_stack(word[: len(word) - prefix_index]),))
        totals, exact = _count_dp(sys, start, ctx, {tgt: prefix_index}, z, budget)
        key = prefix_index
    else:
        # high loops additionally avoid the stack with the top word popped
        # once; for a one-letter top word that stack does not exist and the
        # constraint is vacuous
        extra = ()
        if kind == "highloop" and len(word) > 1:
            extra = (Stack(2, ctx.entries + (word_stack(word[:-1]),)),)
        totals, exact = _count_dp(
            sys, start, ctx, {start: "loop"}, z, budget, extra_forbidden=extra
        )
        key = "loop"
    table = {
        (q, q2): v for (q, q2, k), v in totals.items() if k == key
    }
    return CountResult(CountFunction.from_dict(z, sys.states, table), exact, budget)


def prefix_run_counts(
    sys: PushdownSystem,
    word: Word,
    z: int,
    *,
    budget: int = DEFAULT_COUNT_BUDGET,
    context: Optional[Stack] = None,
) -> Tuple[List[CountFunction], bool]:
    """Counts of runs from the full word to each of its prefixes, batched:
    one table per pop depth i in 0..len(word)-1."""
    if sys.level != 2:
        raise LevelUnsupported("counting requires a level-2 system")
    ctx = context if context is not None else _default_context(sys)
    start = Stack(2, ctx.entries + (word_stack(word),))
    targets = {
        Stack(2, ctx.entries + (word_stack(word[: len(word) - i]),)): i
        for i in range(len(word))
    }
    totals, exact = _count_dp(sys, start, ctx, targets, z, budget)
    tables: List[CountFunction] = []
    for i in range(len(word)):
        table = {(q, q2): v for (q, q2, k), v in totals.items() if k == i}
        tables.append(CountFunction.from_dict(z, sys.states, table))
    return tables, exact


class _SystemCache:
    def __init__(self):
        self.lock = threading.Lock()
        self.counts: Dict[tuple, CountResult] = {}
        self.prefix_counts: Dict[tuple, Tuple[List[CountFunction], bool]] = {}


_CACHES: Dict[PushdownSystem, _SystemCache] = {}
_CACHES_LOCK = threading.Lock()


def _cache(sys: PushdownSystem) -> _SystemCache:
    with _CACHES_LOCK:
        c = _CACHES.get(sys)
        if c is None:
            c = _CACHES[sys] = _SystemCache()
        return c


def cached_count(sys, word, kind, z, *, budget=DEFAULT_COUNT_BUDGET) -> CountResult:
    """Memoized context-default `count_runs`."""
    c = _cache(sys)
    key = (kind, word, z, budget)
    with c.lock:
        hit = c.counts.get(key)
    if hit is not None:
        return hit
    res = count_runs(sys, word, kind, z, budget=budget)
    with c.lock:
        c.counts[key] = res
    return res


def cached_prefix_counts(sys, word, z, *, budget=DEFAULT_COUNT_BUDGET):
    c = _cache(sys)
    key = (word, z, budget)
    with c.lock:
        hit = c.prefix_counts.get(key)
    if hit is not None:
        return hit
    res = prefix_run_counts(sys, word, z, budget=budget)
    with c.lock:
        c.prefix_counts[key] = res
    return res


# ---------------------------------------------------------------------------
# decomposition


@dataclass(frozen=True)
class Segment:
    lo: int
    hi: int
    kind: str  # 'prefixed' | 'loop' | 'return' | 'loop_then_push'


@dataclass(frozen=True)
class GapDecomposition:
    run: Run
    prefix: Stack
    segments: Tuple[Segment, ...]

    def gaps(self) -> Tuple[Segment, ...]:
        return tuple(s for s in self.segments if s.kind != "prefixed")


def _loop_check(run: Run):
    w0 = run.config(0).stack.width
    for i in range(run.length + 1):
        if run.config(i).stack.width < w0:
            raise PreconditionViolated("loop descends below its stack", i)
    if run.final_stack != run.config(0).stack:
        raise PreconditionViolated("loop must end in its starting stack", run.length)


def _return_check(run: Run):
    start = run.config(0).stack
    if start.width < 2:
        raise PreconditionViolated("return needs width >= 2", 0)
    target = Stack(2, start.entries[:-1])
    if run.final_stack != target:
        raise PreconditionViolated("return must end one width below", run.length)
    for i in range(run.length):
        if run.config(i).stack == target:
            raise PreconditionViolated("return visits its target early", i)
        if run.config(i).stack.width < start.width:
            raise PreconditionViolated("return descends below its stack", i)
    return target


def gap_decompose(run: Run, s: Optional[Stack], mode: str) -> GapDecomposition:
    """Split a run into maximal s-prefixed intervals and the gaps between
    them, classifying each gap.

    mode 'prefixed': `s` is given; requires s to prefix both endpoints and
    widths never to drop below width(s).  Gaps are loops or returns.
    mode 'loop' / 'return': the reference prefix is the starting stack; the
    run itself must be a loop resp. return.  Equal-endpoint gaps open with a
    pop1 and close with the push restoring the word ('loop_then_push').
    """
    if mode not in ("prefixed", "loop", "return"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "prefixed":
        if s is None:
            raise ValueError("mode 'prefixed' needs the prefix stack")
        if not is_prefix(s, run.config(0).stack):
            raise PreconditionViolated("prefix does not cover the start", 0)
        if not is_prefix(s, run.final_stack):
            raise PreconditionViolated("prefix does not cover the end", run.length)
        for i in range(run.length + 1):
            if run.config(i).stack.width < s.width:
                raise PreconditionViolated("width drops below the prefix", i)
        ref = s
    elif mode == "loop":
        _loop_check(run)
        ref = run.config(0).stack
    else:
        _return_check(run)
        ref = run.config(0).stack

    n = run.length
    prefixed = [is_prefix(ref, run.config(i).stack) for i in range(n + 1)]
    if not prefixed[0]:
        raise PreconditionViolated("start not prefixed", 0)
    segments: List[Segment] = []
    i = 0
    while i <= n:
        if not prefixed[i]:
            raise PreconditionViolated("gap does not reconnect", i)
        j = i
        while j < n and prefixed[j + 1]:
            j += 1
        segments.append(Segment(i, j, "prefixed"))
        if j == n:
            break
        k = j + 1
        while k <= n and not prefixed[k]:
            k += 1
        if k > n:
            if mode != "return":
                raise PreconditionViolated("run ends inside a gap", n)
            segments.append(Segment(j, n, _classify_gap(run, j, n, mode)))
            return GapDecomposition(run, ref, tuple(segments))
        segments.append(Segment(j, k, _classify_gap(run, j, k, mode)))
        i = k
    if mode == "return":
        # the final pop leaves the prefixed zone, so the loop above must have
        # ended inside a gap
        raise PreconditionViolated("return ended while still prefixed", n)
    return GapDecomposition(run, ref, tuple(segments))


def _classify_gap(run: Run, lo: int, hi: int, mode: str) -> str:
    a = run.config(lo).stack
    b = run.config(hi).stack
    if b.width == a.width - 1 and b == Stack(2, a.entries[:-1]):
        return "return"
    if a == b:
        return "loop" if mode == "prefixed" else "loop_then_push"
    raise PreconditionViolated("gap is neither a loop nor a return", hi)


@dataclass(frozen=True)
class CarayolDecomposition:
    """A run from the initial configuration cut at the last visits of each
    generalised milestone of its final stack: loops[i] sits at milestone i,
    op_steps[i] is the transition index performing the i-th minimal op."""

    run: Run
    milestones: MilestoneSet
    loops: Tuple[Run, ...]
    op_steps: Tuple[int, ...]

    def reassemble(self) -> Run:
        out = self.loops[0]
        for step_idx, lp in zip(self.op_steps, self.loops[1:]):
            out = out.extend(step_idx).compose(lp)
        return out


def carayol_decompose(run: Run) -> CarayolDecomposition:
    sys = run.system
    if run.start != sys.initial_config():
        raise PreconditionViolated("run must start at the initial configuration", 0)
    ms = generalized_milestones(run.final_stack)
    gm = ms.stacks
    last_visit = {}
    for i in range(run.length + 1):
        last_visit[run.config(i).stack] = i
    positions = []
    prev = -1
    for g in gm:
        p = last_visit.get(g)
        if p is None or p <= prev:
            raise PreconditionViolated(
                "run misses a generalised milestone of its final stack", prev + 1
            )
        positions.append(p)
        prev = p
    if positions[-1] != run.length:
        raise PreconditionViolated("final milestone is not the final stack", run.length)
    loops = []
    op_steps = []
    cursor = 0
    for idx, p in enumerate(positions):
        loops.append(run.segment(cursor, p))
        if idx < len(positions) - 1:
            op_steps.append(run.steps[p])
            if run.config(p + 1).stack != gm[idx + 1]:
                raise PreconditionViolated(
                    "step after a milestone's last visit misses the next milestone",
                    p + 1,
                )
            cursor = p + 1
    return CarayolDecomposition(run, ms, tuple(loops), tuple(op_steps))


# ---------------------------------------------------------------------------
# prefix replacement on runs


def _map_config(c: Configuration, s: Stack, u: Stack) -> Configuration:
    return Configuration(c.state, replace_prefix(c.stack, s, u))


def _signature(sys: PushdownSystem, stack: Stack, budget: int):
    w = top_word(stack)
    lo = cached_count(sys, w, "loop", 1, budget=budget)
    re = cached_count(sys, w, "return", 1, budget=budget)
    return lo, re


def replace_prefix_run(
    run: Run,
    s: Stack,
    u: Stack,
    *,
    budget: int = DEFAULT_COUNT_BUDGET,
    gap_budget: int = 24,
) -> Run:
    """Rewrite a run by replacing the stack prefix `s` with `u`.

    When `s` prefixes every configuration the rewrite is pointwise and the
    original transitions replay verbatim.  Otherwise the run may contain
    gaps (loops or returns of the word below the top); those are refilled
    with the length-lexicographically shortest runs between the rewritten
    gap endpoints, which exist whenever `s` and `u` agree on their threshold-1
    loop and return signatures.
    """
    sys = run.system
    if top_word(u)[-1] != top_word(s)[-1]:
        raise PreconditionViolated("replacement must preserve the top symbol", 0)
    if all(is_prefix(s, run.config(i).stack) for i in range(run.length + 1)):
        mapped = Run.from_steps(sys, _map_config(run.config(0), s, u), run.steps)
        return mapped
    dec = gap_decompose(run, s, "prefixed")
    sig_s = _signature(sys, s, budget)
    sig_u = _signature(sys, u, budget)
    if (sig_s[0].counts, sig_s[1].counts) != (sig_u[0].counts, sig_u[1].counts):
        raise SignatureMismatch(
            "threshold-1 loop/return signatures of the prefixes differ"
        )
    if not (sig_s[0].exact and sig_s[1].exact and sig_u[0].exact and sig_u[1].exact):
        raise BudgetExhausted("could not certify the replacement signatures")
    out: Optional[Run] = None
    for seg in dec.segments:
        if seg.kind == "prefixed":
            piece = Run.from_steps(
                sys,
                _map_config(run.config(seg.lo), s, u),
                run.steps[seg.lo : seg.hi],
            )
        else:
            src = _map_config(run.config(seg.lo), s, u)
            dst = _map_config(run.config(seg.hi), s, u)
            found = shortest_runs(
                sys,
                src,
                lambda r, dst=dst: r.final == dst,
                1,
                gap_budget,
            )
            if not found.runs:
                raise BudgetExhausted(
                    f"no replacement run of length <= {gap_budget} for a gap"
                )
            piece = found.runs[0]
        out = piece if out is None else out.compose(piece)
    return out


# ---------------------------------------------------------------------------
# length-bound tables

_EXTRAPOLATION_BIT_CAP = 10 ** 6


@dataclass
class LengthBoundTable:
    """Empirical bounds on the z shortest loop/return/high-loop lengths per
    top-word height, with the measured recurrence constants used to
    extrapolate beyond the sampled heights."""

    z: int
    loop: Dict[int, int] = field(default_factory=dict)
    ret: Dict[int, int] = field(default_factory=dict)
    highloop: Dict[int, int] = field(default_factory=dict)
    m_max: int = 0
    n_max: int = 0
    max_height: int = 0
    complete: bool = True
    sound: str = "empirical"

    def _table(self, kind: str) -> Dict[int, int]:
        return {"loop": self.loop, "return": self.ret, "highloop": self.highloop}[kind]

    def bound(self, kind: str, h: int) -> int:
        """Bound for height `h`; beyond the sampled range the recurrence
        f(h+1) = m_max + n_max * f(h) extrapolates from the last row."""
        table = self._table(kind)
        if h <= 0:
            return 0
        if h in table:
            return table[h]
        if not table:
            return 0
        base_h = self.max_height
        base = table.get(base_h, 0)
        d = h - base_h
        if self.n_max == 0:
            return max(base, self.m_max)
        if self.n_max == 1:
            return base + self.m_max * d
        try:
            bits = d * self.n_max.bit_length()
        except (OverflowError, AttributeError):  # d may itself be huge
            raise BudgetExhausted("length-bound extrapolation out of reach")
        if bits > _EXTRAPOLATION_BIT_CAP:
            raise BudgetExhausted(
                "length-bound extrapolation exceeds the big-integer cap"
            )
        n = self.n_max
        return base * n ** d + self.m_max * (n ** d - 1) // (n - 1)


def _bottom_words(sys: PushdownSystem, max_len: int):
    bottom = sys.alphabet.bottom
    letters = [sym for sym in sys.alphabet.symbols if not sym.is_bottom]
    words = [(bottom,)]
    frontier = [(bottom,)]
    for _ in range(max_len - 1):
        nxt = []
        for w in frontier:
            for sym in letters:
                nxt.append(w + (sym,))
        words.extend(nxt)
        frontier = nxt
    return words


def _collect_shortest(sys, word, kind, z, budget):
    """The z length-lex shortest loops/returns/high loops of `word` per state
    pair, by bounded enumeration in the default context."""
    ctx = _default_context(sys)
    start_stack = Stack(2, ctx.entries + (word_stack(word),))
    runs_by_pair: Dict[Tuple[str, str], List[Run]] = {}
    for q in sys.states:
        start = Configuration(q, start_stack)
        if kind == "return":
            terminal = lambda c: c.stack == ctx
            end_pred = lambda r: r.final_stack == ctx and r.length > 0
            forbid = None
        else:
            forbid_stacks = {ctx}
            if kind == "highloop" and len(word) > 1:
                forbid_stacks.add(Stack(2, ctx.entries + (word_stack(word[:-1]),)))
            forbid = lambda c, fs=forbid_stacks: c.stack in fs
            terminal = None
            end_pred = lambda r: r.final_stack == start_stack
        for r in enumerate_runs(
            sys, start, budget, forbid=forbid, terminal=terminal, end_pred=end_pred
        ):
            pair = (q, r.final_state)
            bucket = runs_by_pair.setdefault(pair, [])
            if len(bucket) < z:
                bucket.append(r)
        # enumeration is length-lex, so each bucket holds the z shortest
    return runs_by_pair


def loop_length_table(
    sys: PushdownSystem,
    z: int,
    budget: int = 24,
    *,
    max_height: int = 3,
) -> LengthBoundTable:
    """Sample the shortest loops, returns, and high loops of every bottom
    word up to `max_height` letters and record per-height length bounds.

    The recurrence constants are measured from the decompositions of the
    sampled shortest runs: m_max bounds the prefixed positions, n_max the
    number of gaps.
    """
    if sys.level != 2:
        raise LevelUnsupported("length tables require a level-2 system")
    table = LengthBoundTable(z=z)
    m_max = 0
    n_max = 0
    for word in _bottom_words(sys, max_height):
        h = len(word)
        for kind in ("loop", "return", "highloop"):
            cr = cached_count(sys, word, kind, z, budget=budget)
            if not cr.exact:
                table.complete = False
            by_pair = _collect_shortest(sys, word, kind, z, budget)
            longest = 0
            for pair, runs in by_pair.items():
                if cr.counts.get(*pair) > len(runs):
                    table.complete = False
                have = runs  # already the z length-lex shortest for this pair
                longest = max(longest, max(r.length for r in have))
                for r in have:
                    if r.length == 0:
                        continue
                    try:
                        dec = gap_decompose(
                            r, None, "loop" if kind != "return" else "return"
                        )
                    except PreconditionViolated:
                        continue
                    pref = sum(
                        s.hi - s.lo + 1 for s in dec.segments if s.kind == "prefixed"
                    )
                    m_max = max(m_max, pref)
                    n_max = max(n_max, len(dec.gaps()))
            dst = table._table(kind)
            dst[h] = max(dst.get(h, 0), longest)
    # monotone in h by construction
    for kind in ("loop", "return", "highloop"):
        dst = table._table(kind)
        best = 0
        for h in range(1, max_height + 1):
            best = max(best, dst.get(h, 0))
            dst[h] = best
    table.m_max = m_max
    table.n_max = n_max
    table.max_height = max_height
    return table


# ---------------------------------------------------------------------------
# shrinking


def shrink_bound(bounds: LengthBoundTable, stack: Stack, mode: str) -> int:
    h = stack.height
    lam = bounds.bound("loop", h)
    if mode == "from_initial":
        return 2 * stack.width * h * (1 + lam)
    return 2 * h * (1 + lam)


def _shortest_loops_at(sys, stack, q_in, q_out, k, budget, *, forbid_extra=None):
    forbid_stacks = set()
    if stack.width > 1:
        forbid_stacks.add(Stack(2, stack.entries[:-1]))

    def forbid(c):
        if c.stack in forbid_stacks:
            return True
        if forbid_extra is not None and forbid_extra(c):
            return True
        return False

    res = shortest_runs(
        sys,
        Configuration(q_in, stack),
        lambda r: r.final == Configuration(q_out, stack),
        k,
        budget,
        forbid=forbid,
    )
    return res.runs


def _reassemble(loops: Sequence[Run], op_steps: Sequence[int]) -> Run:
    out = loops[0]
    for idx, lp in zip(op_steps, loops[1:]):
        out = out.extend(idx).compose(lp)
    return out


def shrink_run(
    run: Run,
    avoid,
    z: int,
    bounds: LengthBoundTable,
    mode: str = "from_initial",
    *,
    search_slack: int = 2,
) -> Run:
    """Produce a run with the endpoints of `run`, not in `avoid`, whose
    length obeys the milestone-count times loop-bound budget.

    Oversized loops in the milestone decomposition are swapped for the
    shortest loops with the same endpoints; when the result collides with
    `avoid`, alternative short loops are tried position by position.  Needs
    len(avoid) < z so that enough alternatives exist.
    """
    avoid = set(avoid)
    if len(avoid) >= z:
        raise PreconditionViolated("need len(avoid) < z")
    sys = run.system
    if mode not in ("from_initial", "extension"):
        raise ValueError(f"unknown mode {mode!r}")
    bound = shrink_bound(bounds, run.final_stack, mode)
    if run.length <= bound and run not in avoid:
        return run

    if mode == "from_initial":
        dec = carayol_decompose(run)
        anchors = dec.milestones.stacks
        loops = list(dec.loops)
        op_steps = list(dec.op_steps)
        no_descend_floor = None
    else:
        base = run.config(0).stack
        for i in range(run.length + 1):
            if is_proper_substack(run.config(i).stack, base):
                raise PreconditionViolated("extension descends below its start", i)
        if run.final_stack != Stack(2, base.entries + (run.final_stack.entries[-1],)):
            raise PreconditionViolated("extension must add exactly one word")
        anchors, loops, op_steps = _extension_decompose(run, base)
        no_descend_floor = base

    lam = bounds.bound("loop", run.final_stack.height)
    search_budget = lam + search_slack

    def floor_guard(idx_anchor):
        if no_descend_floor is None:
            return None
        if idx_anchor == 0:
            # the loop at the extension's base must not dip into the base
            return lambda c, b=no_descend_floor: is_proper_substack(c.stack, b)
        return None

    alternatives: List[Tuple[Run, ...]] = []
    for i, lp in enumerate(loops):
        if lp.length > lam:
            cands = _shortest_loops_at(
                sys,
                anchors[i],
                lp.config(0).state,
                lp.final_state,
                1,
                search_budget,
                forbid_extra=floor_guard(i),
            )
            if not cands:
                raise BudgetExhausted(
                    "bound table promised a short loop that the search cannot find"
                )
            loops[i] = cands[0]
    candidate = _reassemble(loops, op_steps)
    if candidate not in avoid:
        if candidate.length > bound:
            raise BudgetExhausted("shrunken run still exceeds its bound")
        return candidate
    for i in range(len(loops)):
        cands = _shortest_loops_at(
            sys,
            anchors[i],
            loops[i].config(0).state,
            loops[i].final_state,
            z,
            search_budget,
            forbid_extra=floor_guard(i),
        )
        for alt in cands:
            if alt == loops[i]:
                continue
            trial = _reassemble(loops[:i] + [alt] + loops[i + 1 :], op_steps)
            if trial not in avoid and trial.length <= bound:
                return trial
    raise BudgetExhausted("no collision-free short run within the bound table")


def _extension_decompose(run: Run, base: Stack):
    """Milestone decomposition of a one-word extension: the anchors are the
    base stack followed by the clone/pop/push chain toward the new word."""
    new_word = run.final_stack.words[-1]
    top = base.words[-1]
    com = common_prefix(top, new_word)
    anchors: List[Stack] = [base]
    chain: List[Stack] = []
    for j in range(len(top), len(com) - 1, -1):
        chain.append(stack_of_words(base.words + (top[:j],)))
    for j in range(len(com) + 1, len(new_word) + 1):
        chain.append(stack_of_words(base.words + (new_word[:j],)))
    anchors.extend(chain)
    last_visit = {}
    for i in range(run.length + 1):
        last_visit[run.config(i).stack] = i
    positions = []
    prev = -1
    for g in anchors:
        p = last_visit.get(g)
        if p is None or p <= prev:
            raise PreconditionViolated("extension misses a relative milestone")
        positions.append(p)
        prev = p
    if positions[-1] != run.length:
        raise PreconditionViolated("extension does not end at its final milestone")
    loops = []
    op_steps = []
    cursor = 0
    for idx, p in enumerate(positions):
        loops.append(run.segment(cursor, p))
        if idx < len(positions) - 1:
            op_steps.append(run.steps[p])
            if run.config(p + 1).stack != anchors[idx + 1]:
                raise PreconditionViolated(
                    "step after a relative milestone misses the next one", p + 1
                )
            cursor = p + 1
    return anchors, loops, op_steps
