"""Word and stack equivalences through games on enriched word models.

The model of a word is its reversed successor structure: position i stands
for the word with i letters popped, position 0 for the full word.  Positions
are colored with the top symbol, with saturating counts of runs from the full
word down to that prefix, with the loop/return/high-loop count tables of the
prefix, and (at level n >= 1) with the level-(n-1) type of the prefix.  Two
words are equivalent at level n and threshold z when Duplicator wins the
z-round game on their level-n models.

Types are interned per system: equal TypeIds mean game-equivalence among all
models classified so far.  Every verdict that depends on counting carries the
counting exactness with it; an uncertified comparison is reported as
indeterminate, never as a silent no.

The second half of the module turns the equivalences into constructions on
runs: transferring one-word extensions to equivalent contexts, rebuilding
relevant-ancestor chains from equivalent seeds, and the bounded strategy
search answering an element pick with a small equivalent response.
"""

from __future__ import annotations

import enum
import threading
from dataclasses import dataclass
from typing import Dict, FrozenSet, List, Mapping, Optional, Sequence, Tuple

from .errors import BudgetExhausted, LevelUnsupported, PreconditionViolated
from .stacks import Clone, Stack, Word, top_symbol, top_word
from .system import PushdownSystem, Run
from . import analysis
from .analysis import cached_count, cached_prefix_counts, shrink_run
from .npt import (
    delta_predecessor,
    jump_source,
    plus_source,
    relevant_ancestors,
)


class Verdict(enum.Enum):
    YES = "equivalent"
    NO = "distinct"
    UNKNOWN = "indeterminate"

    def __bool__(self):
        raise TypeError("three-valued verdict; test against Verdict members")


def _all_yes(verdicts) -> Verdict:
    out = Verdict.YES
    for v in verdicts:
        if v is Verdict.NO:
            return Verdict.NO
        if v is Verdict.UNKNOWN:
            out = Verdict.UNKNOWN
    return out


# ---------------------------------------------------------------------------
# finite relational structures and the game


@dataclass(frozen=True)
class FiniteStructure:
    """Universe 0..n-1 with complete unary colors and named binary relations."""

    colors: Tuple[object, ...]
    relations: Mapping[str, FrozenSet[Tuple[int, int]]]

    @property
    def size(self) -> int:
        return len(self.colors)

    def key(self):
        return (
            self.colors,
            tuple(sorted((n, tuple(sorted(r))) for n, r in self.relations.items())),
        )


def chain_structure(colors: Sequence[object]) -> FiniteStructure:
    succ = frozenset((i, i + 1) for i in range(len(colors) - 1))
    return FiniteStructure(tuple(colors), {"succ": succ})


def _pair_ok(A, B, at, bt, x, y) -> bool:
    """Can x -> y extend the partial map at -> bt (assumed consistent)?"""
    if A.colors[x] != B.colors[y]:
        return False
    for i, (a, b) in enumerate(zip(at, bt)):
        if (a == x) != (b == y):
            return False
    for name, ra in A.relations.items():
        rb = B.relations[name]
        for a, b in zip(at, bt):
            if ((a, x) in ra) != ((b, y) in rb):
                return False
            if ((x, a) in ra) != ((y, b) in rb):
                return False
        if ((x, x) in ra) != ((y, y) in rb):
            return False
    return True


def fo_equiv(
    A: FiniteStructure,
    a_tuple: Sequence[int],
    B: FiniteStructure,
    b_tuple: Sequence[int],
    k: int,
) -> bool:
    """Duplicator wins the k-round game from position a_tuple -> b_tuple.

    Alternating search with memoization on (position, rounds left).
    """
    if set(A.relations) != set(B.relations):
        raise ValueError("structures must share a relational signature")
    at = tuple(a_tuple)
    bt = tuple(b_tuple)
    if len(at) != len(bt):
        raise ValueError("parameter tuples must have equal arity")
    # the initial position must itself be a partial isomorphism
    base: Tuple[int, ...] = ()
    base_b: Tuple[int, ...] = ()
    for x, y in zip(at, bt):
        if not _pair_ok(A, B, base, base_b, x, y):
            return False
        base += (x,)
        base_b += (y,)
    memo: Dict[Tuple[Tuple[int, ...], Tuple[int, ...], int], bool] = {}

    def win(pa: Tuple[int, ...], pb: Tuple[int, ...], r: int) -> bool:
        if r == 0:
            return True
        key = (pa, pb, r)
        hit = memo.get(key)
        if hit is not None:
            return hit
        ok = True
        for x in range(A.size):
            if not any(
                _pair_ok(A, B, pa, pb, x, y) and win(pa + (x,), pb + (y,), r - 1)
                for y in range(B.size)
            ):
                ok = False
                break
        if ok:
            for y in range(B.size):
                if not any(
                    _pair_ok(A, B, pa, pb, x, y) and win(pa + (x,), pb + (y,), r - 1)
                    for x in range(A.size)
                ):
                    ok = False
                    break
        memo[key] = ok
        return ok

    return win(at, bt, k)


# ---------------------------------------------------------------------------
# enriched word models and interned types


@dataclass(frozen=True)
class TypeId:
    n: int
    k: int
    z: int
    index: int

    def __repr__(self):
        return f"T[{self.n},{self.k},{self.z}]#{self.index}"


@dataclass(frozen=True)
class EnrichedWordModel:
    word: Word
    n: int
    k: int
    z: int
    structure: FiniteStructure
    exact: bool


class _TypeBucket:
    def __init__(self):
        self.reps: List[Tuple[FiniteStructure, TypeId]] = []
        self.by_key: Dict[object, TypeId] = {}
        self.max_word_len = 0


class TypeContext:
    """Per-system registry of word types and model caches.

    Classification is synchronized; equal TypeIds mean rank-k game
    equivalence among everything classified in this context.
    """

    def __init__(self, system: PushdownSystem):
        self.system = system
        self.lock = threading.RLock()
        self.buckets: Dict[Tuple[int, int, int], _TypeBucket] = {}
        self.models: Dict[tuple, EnrichedWordModel] = {}
        self.types: Dict[tuple, Tuple[TypeId, bool]] = {}

    def bucket(self, n, k, z) -> _TypeBucket:
        with self.lock:
            b = self.buckets.get((n, k, z))
            if b is None:
                b = self.buckets[(n, k, z)] = _TypeBucket()
            return b

    def classify(self, model: EnrichedWordModel) -> TypeId:
        b = self.bucket(model.n, model.k, model.z)
        key = model.structure.key()
        with self.lock:
            b.max_word_len = max(b.max_word_len, len(model.word))
            hit = b.by_key.get(key)
            if hit is not None:
                return hit
            for rep, tid in b.reps:
                if fo_equiv(model.structure, (), rep, (), model.k):
                    b.by_key[key] = tid
                    return tid
            tid = TypeId(model.n, model.k, model.z, len(b.reps))
            b.reps.append((model.structure, tid))
            b.by_key[key] = tid
            return tid

    def num_classes(self, n, k, z) -> int:
        with self.lock:
            b = self.buckets.get((n, k, z))
            return len(b.reps) if b else 0

    def observed_word_cap(self, n, k, z) -> int:
        with self.lock:
            b = self.buckets.get((n, k, z))
            return b.max_word_len if b else 0


_CONTEXTS: Dict[PushdownSystem, TypeContext] = {}
_CONTEXTS_LOCK = threading.Lock()


def type_context(sys: PushdownSystem) -> TypeContext:
    with _CONTEXTS_LOCK:
        ctx = _CONTEXTS.get(sys)
        if ctx is None:
            ctx = _CONTEXTS[sys] = TypeContext(sys)
        return ctx


def build_lin(
    sys: PushdownSystem,
    w: Word,
    n: int,
    k: int,
    z: int,
    *,
    budget: int = analysis.DEFAULT_COUNT_BUDGET,
) -> EnrichedWordModel:
    """The enriched reversed word model of `w` at level n, rank k,
    threshold z."""
    if sys.level != 2:
        raise LevelUnsupported("enriched word models require a level-2 system")
    ctx = type_context(sys)
    key = (w, n, k, z, budget)
    with ctx.lock:
        hit = ctx.models.get(key)
    if hit is not None:
        return hit
    exact = True
    s_tables, s_exact = cached_prefix_counts(sys, w, z, budget=budget)
    exact &= s_exact
    colors = []
    for i in range(len(w)):
        prefix = w[: len(w) - i]
        ret = cached_count(sys, prefix, "return", z, budget=budget)
        loop = cached_count(sys, prefix, "loop", z, budget=budget)
        high = cached_count(sys, prefix, "highloop", z, budget=budget)
        exact &= ret.exact and loop.exact and high.exact
        type_ids: List[int] = []
        for lvl in range(n):
            tid, t_exact = type_of(sys, prefix, lvl, k, z, budget=budget)
            exact &= t_exact
            type_ids.append(tid.index)
        colors.append(
            (
                prefix[-1].ident,
                s_tables[i].entries,
                ret.counts.entries,
                loop.counts.entries,
                high.counts.entries,
                tuple(type_ids),
            )
        )
    model = EnrichedWordModel(w, n, k, z, chain_structure(colors), exact)
    with ctx.lock:
        ctx.models[key] = model
    return model


def type_of(
    sys: PushdownSystem,
    w: Word,
    n: int,
    k: int,
    z: int,
    *,
    budget: int = analysis.DEFAULT_COUNT_BUDGET,
) -> Tuple[TypeId, bool]:
    ctx = type_context(sys)
    key = (w, n, k, z, budget)
    with ctx.lock:
        hit = ctx.types.get(key)
    if hit is not None:
        return hit
    model = build_lin(sys, w, n, k, z, budget=budget)
    tid = ctx.classify(model)
    out = (tid, model.exact)
    with ctx.lock:
        ctx.types[key] = out
    return out


def word_equiv(
    sys: PushdownSystem,
    w1: Word,
    w2: Word,
    n: int,
    z: int,
    *,
    budget: int = analysis.DEFAULT_COUNT_BUDGET,
) -> Verdict:
    """Rank-z game equivalence of the level-n enriched models (k and z are
    identified).  Uncertified counts yield an indeterminate verdict."""
    t1, e1 = type_of(sys, w1, n, z, z, budget=budget)
    t2, e2 = type_of(sys, w2, n, z, z, budget=budget)
    if t1 == t2 and e1 and e2:
        return Verdict.YES
    if not (e1 and e2):
        return Verdict.UNKNOWN
    return Verdict.NO


def stack_equiv(
    sys: PushdownSystem,
    s1: Stack,
    s2: Stack,
    n: int,
    z: int,
    m: int,
    *,
    budget: int = analysis.DEFAULT_COUNT_BUDGET,
) -> Verdict:
    """Word-wise comparison from the top: both wider than `m` with the top
    m+1 words pairwise equivalent, or equal widths <= m with all words
    pairwise equivalent."""
    if s1.level != 2 or s2.level != 2:
        raise LevelUnsupported("stack equivalence is defined on level-2 stacks")
    w1, w2 = s1.words, s2.words
    if len(w1) > m and len(w2) > m:
        depth = m + 1
    elif len(w1) == len(w2) and len(w1) <= m:
        depth = len(w1)
    else:
        return Verdict.NO
    return _all_yes(
        word_equiv(sys, w1[-1 - i], w2[-1 - i], n, z, budget=budget)
        for i in range(depth)
    )


def observe_word_classes(
    sys: PushdownSystem,
    n: int,
    z: int,
    max_len: int,
    *,
    budget: int = analysis.DEFAULT_COUNT_BUDGET,
) -> int:
    """Classify every bottom word of up to `max_len` letters and return the
    number of distinct types observed (a lower bound on the true index)."""
    for w in analysis._bottom_words(sys, max_len):
        type_of(sys, w, n, z, z, budget=budget)
    return type_context(sys).num_classes(n, z, z)


# ---------------------------------------------------------------------------
# ancestor structures


@dataclass(frozen=True)
class AncestorStructure:
    """The induced substructure on the relevant l-ancestors of a run tuple,
    expanded with per-run membership levels, final states, and final stacks
    (compared lazily through stack equivalence)."""

    system: PushdownSystem
    runs: Tuple[Run, ...]
    l: int
    n1: int
    n2: int
    z: int
    nodes: Tuple[Run, ...]
    delta: FrozenSet[Tuple[int, int, int]]
    jump: FrozenSet[Tuple[int, int]]
    plus: FrozenSet[Tuple[int, int]]
    membership: Tuple[Tuple[FrozenSet[int], ...], ...]  # [run j][level k]
    states: Tuple[str, ...]
    stacks: Tuple[Stack, ...]


def ancestor_structure(
    runs: Sequence[Run], l: int, n1: int, n2: int, z: int
) -> AncestorStructure:
    runs = tuple(runs)
    if not runs:
        raise ValueError("need at least one run")
    sys = runs[0].system
    per_run = [dict(relevant_ancestors(r, l)) for r in runs]
    node_set = set()
    for d in per_run:
        node_set.update(d)
    nodes = tuple(sorted(node_set, key=lambda r: r.key()))
    index = {r: i for i, r in enumerate(nodes)}
    delta = set()
    jump = set()
    plus = set()
    for r in nodes:
        j = index[r]
        dp = delta_predecessor(r)
        if dp is not None and dp in index:
            delta.add((index[dp], j, r.steps[-1]))
        js = jump_source(r)
        if js is not None and js in index:
            jump.add((index[js], j))
        ps = plus_source(r)
        if ps is not None and ps in index:
            plus.add((index[ps], j))
    membership = tuple(
        tuple(
            frozenset(index[r] for r, lev in per_run[j].items() if lev <= k)
            for k in range(l + 1)
        )
        for j in range(len(runs))
    )
    return AncestorStructure(
        sys,
        runs,
        l,
        n1,
        n2,
        z,
        nodes,
        frozenset(delta),
        frozenset(jump),
        frozenset(plus),
        membership,
        tuple(r.final_state for r in nodes),
        tuple(r.final_stack for r in nodes),
    )


def _candidate_map(A: AncestorStructure, B: AncestorStructure):
    """The unique candidate isomorphism, forced by the per-run anchors and
    the chain order; None when no bijection is possible."""
    if len(A.runs) != len(B.runs) or len(A.nodes) != len(B.nodes):
        return None
    mapping: Dict[int, int] = {}
    for j in range(len(A.runs)):
        chain_a = sorted(A.membership[j][A.l], key=lambda i: A.nodes[i].length)
        chain_b = sorted(B.membership[j][B.l], key=lambda i: B.nodes[i].length)
        if len(chain_a) != len(chain_b):
            return None
        for x, y in zip(chain_a, chain_b):
            if mapping.setdefault(x, y) != y:
                return None
    if len(mapping) != len(A.nodes) or len(set(mapping.values())) != len(B.nodes):
        return None
    return mapping


def iso_check(
    A: AncestorStructure,
    B: AncestorStructure,
    *,
    budget: int = analysis.DEFAULT_COUNT_BUDGET,
) -> Verdict:
    """Test the forced candidate map for being an isomorphism that preserves
    every relation, the membership predicates, final states, and the stack
    equivalence labels."""
    if (A.l, A.n1, A.n2, A.z) != (B.l, B.n1, B.n2, B.z):
        raise ValueError("ancestor structures compare at equal parameters")
    mapping = _candidate_map(A, B)
    if mapping is None:
        return Verdict.NO
    for x, y in mapping.items():
        if A.states[x] != B.states[y]:
            return Verdict.NO
    if {(mapping[a], mapping[b], i) for a, b, i in A.delta} != set(B.delta):
        return Verdict.NO
    if {(mapping[a], mapping[b]) for a, b in A.jump} != set(B.jump):
        return Verdict.NO
    if {(mapping[a], mapping[b]) for a, b in A.plus} != set(B.plus):
        return Verdict.NO
    for j in range(len(A.runs)):
        for k in range(A.l + 1):
            if {mapping[x] for x in A.membership[j][k]} != set(B.membership[j][k]):
                return Verdict.NO
    return _all_yes(
        stack_equiv(A.system, A.stacks[x], B.stacks[y], A.n2, A.z, A.n1, budget=budget)
        for x, y in sorted(mapping.items())
    )


def ancestor_iso_map(A: AncestorStructure, B: AncestorStructure):
    """Run-level view of the candidate map (None when impossible)."""
    mapping = _candidate_map(A, B)
    if mapping is None:
        return None
    return {A.nodes[x]: B.nodes[y] for x, y in mapping.items()}


# ---------------------------------------------------------------------------
# transfer machinery


def bh1_bound(sys: PushdownSystem, a: int, b: int, c: int, d: int) -> int:
    """1 + b + a * (|Q| * #classes) with the class count taken from the types
    observed so far at level c, threshold d."""
    classes = max(1, type_context(sys).num_classes(c, d, d))
    return 1 + b + a * (len(sys.states) * classes)


def _extension_shape_ok(sys: PushdownSystem, ext: Run) -> bool:
    if ext.length < 1:
        return False
    first = sys.delta[ext.steps[0]].op
    if not (isinstance(first, Clone) and first.j == 2):
        return False
    base_width = ext.config(0).stack.width
    if ext.final_stack.width != base_width + 1:
        return False
    return all(ext.config(i).stack.width > base_width for i in range(1, ext.length + 1))


def transfer_extension(
    sys: PushdownSystem,
    context: Run,
    target: Run,
    extension: Run,
    existing: Sequence[Run],
    n: int,
    z: int,
    *,
    budget: int = 5000,
    count_budget: int = analysis.DEFAULT_COUNT_BUDGET,
) -> Run:
    """Carry a one-word extension over to an equivalent context.

    `extension` adds one word w_m on top of `context`'s final stack without
    revisiting the base width.  The result is an extension of `target`'s
    final stack creating a word equivalent to w_m at level n-1, distinct from
    every run in `existing`.  The literal step sequence is tried first; after
    that, candidates are searched in length-lexicographic order.  `budget`
    caps the number of search expansions.
    """
    if sys.level != 2:
        raise LevelUnsupported("transfer requires a level-2 system")
    if n < 1:
        raise PreconditionViolated("transfer needs equivalence level n >= 1")
    if extension.start != context.final:
        raise PreconditionViolated("extension must start at the context's end")
    if target.final_state != context.final_state:
        raise PreconditionViolated("context and target must end in the same state")
    if not _extension_shape_ok(sys, extension):
        raise PreconditionViolated(
            "extension must clone first, stay above its base width, and add one word"
        )
    ctx_word = top_word(context.final_stack)
    tgt_word = top_word(target.final_stack)
    v = word_equiv(sys, ctx_word, tgt_word, n, z, budget=count_budget)
    if v is Verdict.NO:
        raise PreconditionViolated("context and target words are not equivalent")
    if v is Verdict.UNKNOWN:
        raise BudgetExhausted("could not certify the context equivalence")

    created = top_word(extension.final_stack)
    want_state = extension.final_state
    existing_steps = {e.steps for e in existing}
    # classify the created word so the observed class count is positive, then
    # cap candidate words at the one-step construction bound
    type_of(sys, created, n - 1, z, z, budget=count_budget)
    word_cap = bh1_bound(
        sys, len(existing) + 1, len(tgt_word), n - 1, z
    )
    word_cap = max(word_cap, len(created))

    def admissible(cand: Run) -> bool:
        if cand.final_state != want_state:
            return False
        if cand.steps in existing_steps:
            return False
        got = top_word(cand.final_stack)
        if len(got) > word_cap:
            return False
        return (
            word_equiv(sys, got, created, n - 1, z, budget=count_budget)
            is Verdict.YES
        )

    base = target.final
    base_width = base.stack.width
    # literal replay first: when it fits, the extension itself is the answer
    try:
        literal = Run.from_steps(sys, base, extension.steps)
    except Exception:
        literal = None
    if literal is not None and _extension_shape_ok(sys, literal) and admissible(literal):
        return literal

    frontier: List[Run] = []
    for i, t in sys.candidates(base.state, top_symbol(base.stack)):
        if isinstance(t.op, Clone) and t.op.j == 2:
            cand = Run.empty(sys, base).extend(i)
            if cand.final_stack.width == base_width + 1 and admissible(cand):
                return cand
            frontier.append(cand)
    spent = len(frontier)
    while frontier:
        nxt: List[Run] = []
        for run in frontier:
            for i, conf in sys.moves(run.final):
                if conf.stack.width <= base_width:
                    continue
                spent += 1
                if spent > budget:
                    raise BudgetExhausted(
                        "transfer search exhausted its expansion budget"
                    )
                cand = run.extend(i)
                if conf.stack.width == base_width + 1 and admissible(cand):
                    return cand
                nxt.append(cand)
        frontier = nxt
    raise BudgetExhausted("no equivalent extension exists within reach")


def _connecting_edge(sys: PushdownSystem, a: Run, b: Run):
    """('delta', idx) or ('plus', segment run) linking consecutive chain
    elements, or None."""
    if not a.is_prefix_of(b):
        return None
    if b.length == a.length + 1:
        return ("delta", b.steps[a.length])
    if plus_source(b) == a:
        return ("plus", b.segment(a.length, b.length))
    return None


def construct_ancestor_chain(
    chain: Sequence[Run],
    seed: Run,
    n2: int,
    z: int,
    *,
    n1: Optional[int] = None,
    budget: int = 5000,
    count_budget: int = analysis.DEFAULT_COUNT_BUDGET,
) -> List[Run]:
    """Rebuild a relevant-ancestor chain on top of an equivalent seed.

    Single-step edges are copied verbatim; plus edges are realized through
    `transfer_extension` at a level that drops by one per chain step, so the
    i-th element's top word stays equivalent at level n2 - i.
    """
    chain = list(chain)
    if not chain:
        raise ValueError("empty chain")
    sys = chain[0].system
    if seed.final_state != chain[0].final_state:
        raise PreconditionViolated("seed must end in the chain's starting state")
    m = n1 if n1 is not None else len(chain)
    v = stack_equiv(
        sys, seed.final_stack, chain[0].final_stack, n2, z, m, budget=count_budget
    )
    if v is Verdict.NO:
        raise PreconditionViolated("seed stack is not equivalent to the chain start")
    if v is Verdict.UNKNOWN:
        raise BudgetExhausted("could not certify the seed equivalence")
    out = [seed]
    for i in range(len(chain) - 1):
        edge = _connecting_edge(sys, chain[i], chain[i + 1])
        if edge is None:
            raise PreconditionViolated(
                f"chain elements {i} and {i + 1} are not connected by a step or plus edge"
            )
        if edge[0] == "delta":
            try:
                out.append(out[-1].extend(edge[1]))
            except Exception as e:
                raise BudgetExhausted(
                    f"copied transition no longer applies: {e}"
                ) from e
        else:
            level = n2 - i
            if level < 1:
                raise BudgetExhausted("equivalence depth exhausted along the chain")
            found = transfer_extension(
                sys,
                chain[i],
                out[-1],
                edge[1],
                [],
                level,
                z,
                budget=budget,
                count_budget=count_budget,
            )
            out.append(out[-1].compose(found))
    return out


# ---------------------------------------------------------------------------
# strategy search


@dataclass(frozen=True)
class StrategyParams:
    """Primed game parameters plus optional size caps on the response's
    relevant ancestors."""

    z: int
    l_prime: int
    n1_prime: int = 1
    n2_prime: int = 1
    max_len: Optional[int] = None
    max_height: Optional[int] = None
    max_width: Optional[int] = None

    @property
    def lifted(self) -> Tuple[int, int, int]:
        l = 4 * self.l_prime + 5
        n1 = self.n1_prime + 2 * (self.l_prime + 1) + 1
        n2 = self.n2_prime + 4 ** (self.l_prime + 1) + 1
        return l, n1, n2


def _within_caps(run: Run, params: StrategyParams) -> bool:
    for pi, _k in relevant_ancestors(run, params.l_prime):
        if params.max_len is not None and pi.length > params.max_len:
            return False
        if params.max_height is not None and pi.final_stack.height > params.max_height:
            return False
        if params.max_width is not None and pi.final_stack.width > params.max_width:
            return False
    return True


def duplicator_response(
    rho_bar: Sequence[Run],
    rho_bar_prime: Sequence[Run],
    rho: Run,
    params: StrategyParams,
    *,
    budget: int = 10_000,
    count_budget: int = analysis.DEFAULT_COUNT_BUDGET,
) -> Run:
    """Answer an element pick with a response whose joint ancestor structure
    is isomorphic at the primed parameters.

    Best-effort bounded search: the isomorphism image, the pick itself, a
    shrunken variant, and finally plain length-lexicographic enumeration are
    tried in that order; every candidate is verified with `iso_check` before
    it is returned.  `budget` caps enumeration expansions.
    """
    rho_bar = tuple(rho_bar)
    rho_bar_prime = tuple(rho_bar_prime)
    if len(rho_bar) != len(rho_bar_prime):
        raise ValueError("parameter tuples must have equal arity")
    sys = rho.system
    z, lp = params.z, params.l_prime
    n1p, n2p = params.n1_prime, params.n2_prime

    want = ancestor_structure(rho_bar + (rho,), lp, n1p, n2p, z)

    def verified(cand: Run) -> bool:
        if not _within_caps(cand, params):
            return False
        got = ancestor_structure(rho_bar_prime + (cand,), lp, n1p, n2p, z)
        return iso_check(want, got, budget=count_budget) is Verdict.YES

    candidates: List[Run] = []
    if rho_bar:
        l, n1, n2 = params.lifted
        A = ancestor_structure(rho_bar, l, n1, n2, z)
        B = ancestor_structure(rho_bar_prime, l, n1, n2, z)
        phi = ancestor_iso_map(A, B)
        if phi is not None and rho in phi:
            candidates.append(phi[rho])
    candidates.append(rho)
    try:
        bounds = analysis.loop_length_table(sys, max(2, min(z, 3)), budget=16)
        candidates.append(shrink_run(rho, (), 2, bounds, "from_initial"))
    except Exception:
        pass
    seen = set()
    for cand in candidates:
        if cand in seen:
            continue
        seen.add(cand)
        if verified(cand):
            return cand

    spent = 0
    frontier = [Run.empty(sys)]
    cand = frontier[0]
    if cand not in seen and verified(cand):
        return cand
    while frontier:
        nxt: List[Run] = []
        for run in frontier:
            for i, _conf in sys.moves(run.final):
                spent += 1
                if spent > budget:
                    raise BudgetExhausted("strategy search exhausted its budget")
                child = run.extend(i)
                if params.max_len is not None and child.length > params.max_len:
                    continue
                nxt.append(child)
                if child in seen:
                    continue
                if child.final_state == rho.final_state and verified(child):
                    return child
        frontier = nxt
    raise BudgetExhausted("no verified response within the enumerated region")
