"""The nested pushdown tree, explored lazily through runs.

Nodes are runs from the initial configuration.  Three edge kinds exist:
transition edges (one step), jump edges (a top-level push closed by the
matching top-level pop over the same stack), and plus edges (the target sits
one width higher and the width never dips back in between).  Jump targets of
a node are infinite in general; forward listings are depth-bounded and carry
a completeness flag.  Backward maps (the unique jump source and plus source
of a node) are exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

from .errors import SizeLimit
from .stacks import Clone, Pop, Push, format_word, top_symbol, top_word
from .system import PushdownSystem, Run, enumerate_runs


def _is_top_push(sys: PushdownSystem, op) -> bool:
    if sys.level == 1:
        return isinstance(op, Push)
    return isinstance(op, Clone) and op.j == sys.level


def _is_top_pop(sys: PushdownSystem, op) -> bool:
    return isinstance(op, Pop) and op.k == sys.level


@dataclass(frozen=True)
class Edge:
    source: Run
    target: Run
    kind: str  # 'delta' | 'jump' | 'plus'
    index: Optional[int] = None  # transition index for 'delta'


@dataclass(frozen=True)
class NodeSuccessors:
    delta: Tuple[Edge, ...]
    jumps: Tuple[Edge, ...]
    jumps_complete: bool


def node_successors(node: Run, jump_search_depth: int) -> NodeSuccessors:
    """Transition successors plus the jump targets reachable by extending the
    node by at most `jump_search_depth` steps.

    The jump out-degree may be infinite; `jumps_complete` reports whether the
    bounded search already saw the whole frontier die out.
    """
    sys = node.system
    delta = tuple(
        Edge(node, node.extend(i), "delta", i) for i, _ in sys.moves(node.final)
    )
    s = node.final_stack
    jumps: List[Edge] = []
    frontier: List[Run] = []
    for i, t in sys.candidates(node.final_state, top_symbol(s)):
        if _is_top_push(sys, t.op):
            frontier.append(node.extend(i))
    depth = 1
    while frontier and depth < jump_search_depth:
        nxt: List[Run] = []
        for run in frontier:
            for i, conf in sys.moves(run.final):
                if conf.stack == s:
                    if _is_top_pop(sys, sys.delta[i].op):
                        jumps.append(Edge(node, run.extend(i), "jump"))
                    # a non-pop arrival at s disqualifies the whole branch
                    continue
                nxt.append(run.extend(i))
        frontier = nxt
        depth += 1
    return NodeSuccessors(delta, tuple(jumps), not frontier)


@dataclass(frozen=True)
class SpecialPredecessors:
    jump_source: Optional[Run]
    plus_source: Optional[Run]


def jump_source(node: Run) -> Optional[Run]:
    """The unique run `pi` with pi jump-edge node, when the node's run closes
    a top-level push with the matching top-level pop."""
    sys = node.system
    n = node.length
    if n < 2:
        return None
    if not _is_top_pop(sys, sys.delta[node.steps[-1]].op):
        return None
    s = node.final_stack
    i = None
    for j in range(n - 1, -1, -1):
        if node.config(j).stack == s:
            i = j
            break
    if i is None or i > n - 2:
        return None
    if not _is_top_push(sys, sys.delta[node.steps[i]].op):
        return None
    return node.prefix(i)


def plus_source(node: Run) -> Optional[Run]:
    """The maximal proper prefix one width below whose width is never
    re-visited strictly in between."""
    n = node.length
    w = node.final_stack.width
    for j in range(n - 1, -1, -1):
        width_j = node.config(j).stack.width
        if width_j == w - 1:
            return node.prefix(j)
        if width_j < w - 1:  # pragma: no cover - widths move by one
            return None
    return None


def special_predecessors(node: Run) -> SpecialPredecessors:
    return SpecialPredecessors(jump_source(node), plus_source(node))


def delta_predecessor(node: Run) -> Optional[Run]:
    return node.prefix(node.length - 1) if node.length > 0 else None


def relevant_ancestors(node: Run, l: int) -> List[Tuple[Run, int]]:
    """The l-fold closure of the node under transition, jump, and plus
    predecessors, as a prefix-ordered list of (run, least level) pairs."""
    least: Dict[Run, int] = {node: 0}
    frontier = [node]
    for k in range(1, l + 1):
        nxt = []
        for run in frontier:
            for pred in (delta_predecessor(run), jump_source(run), plus_source(run)):
                if pred is not None and pred not in least:
                    least[pred] = k
                    nxt.append(pred)
        if not nxt:
            break
        frontier = nxt
    return sorted(least.items(), key=lambda kv: kv[0].length)


def relevant_ancestor_set(node: Run, l: int):
    return [run for run, _k in relevant_ancestors(node, l)]


# ---------------------------------------------------------------------------
# finite truncations


@dataclass(frozen=True)
class Truncation:
    system: PushdownSystem
    depth: int
    nodes: Tuple[Run, ...]
    delta_edges: Tuple[Edge, ...]
    jump_edges: Tuple[Edge, ...]
    plus_edges: Tuple[Edge, ...]

    def node_set(self):
        return frozenset(self.nodes)


def truncate(sys: PushdownSystem, depth: int, *, node_cap: int = 200_000) -> Truncation:
    """All runs of length <= depth together with every edge whose endpoints
    both lie inside.  Backward edge detection is exact because sources are
    prefixes of their targets."""
    nodes: List[Run] = []
    for run in enumerate_runs(sys, None, depth):
        nodes.append(run)
        if len(nodes) > node_cap:
            raise SizeLimit(f"truncation exceeds {node_cap} nodes")
    delta = []
    jumps = []
    plus = []
    for run in nodes:
        if run.length > 0:
            delta.append(
                Edge(run.prefix(run.length - 1), run, "delta", run.steps[-1])
            )
        js = jump_source(run)
        if js is not None:
            jumps.append(Edge(js, run, "jump"))
        ps = plus_source(run)
        if ps is not None:
            plus.append(Edge(ps, run, "plus"))
    return Truncation(sys, depth, tuple(nodes), tuple(delta), tuple(jumps), tuple(plus))


def node_name(run: Run) -> str:
    if not run.steps:
        return "n0"
    return f"n{run.length}_" + "_".join(map(str, run.steps))


def _node_label(run: Run) -> str:
    conf = run.final
    return f"{conf.state}|{conf.stack.width}|{format_word(top_word(conf.stack))}"


def to_dot(trunc: Truncation) -> str:
    """Deterministic DOT text: transition edges solid and labelled by index,
    jump edges dashed."""
    lines = ["digraph npt {"]
    for run in sorted(trunc.nodes, key=lambda r: r.key()):
        lines.append(f'  {node_name(run)} [label="{_node_label(run)}"];')
    for e in sorted(trunc.delta_edges, key=lambda e: (e.source.key(), e.index)):
        lines.append(
            f'  {node_name(e.source)} -> {node_name(e.target)} [label="{e.index}"];'
        )
    for e in sorted(trunc.jump_edges, key=lambda e: (e.source.key(), e.target.key())):
        lines.append(
            f"  {node_name(e.source)} -> {node_name(e.target)} [style=dashed];"
        )
    lines.append("}")
    return "\n".join(lines) + "\n"
