"""Exact evaluation of the strategy bound recurrences.

Three mutually dependent families bound the height, width, and length of the
runs a small-witness strategy ever needs.  All recurse on the number of
remaining rounds; the base case is zero everywhere.  Between rounds the game
parameters lift as l = 4l' + 5, n1 = n1' + 2(l'+1) + 1, n2 = n2' + 4^(l'+1) + 1.

Two representational points keep the evaluation exact at every scale:

* The auxiliary height chains are affine (each step adds a constant), so
  they are evaluated in closed form rather than iterated; their lengths
  reach 4^26 already at three rounds.
* Width and length values contain powers whose exponents themselves have
  seventeen digits; such numbers cannot be materialized, so values past a
  bit-size cap are kept as exact power/product/sum trees (`Big`).  All
  arithmetic on them is exact; only the decimal expansion is withheld.

The word-class counts entering the auxiliary quantities are not computed
exactly anywhere; callers supply a constant estimate (typically the observed
class count of a type registry) and the provenance records it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Tuple, Union

from .errors import BudgetExhausted
from .analysis import LengthBoundTable
from .system import PushdownSystem

_MATERIALIZE_BITS = 1 << 21  # exact ints below ~2M bits, trees above


class Big:
    """Exact nonnegative integer, materialized when small enough.

    Oversized values are sums of products of powers with integer leaves.
    Structural equality; order comparisons go through certified log2
    bounds and fall back to materialization when both sides are small.
    """

    __slots__ = ("kind", "val", "parts", "_log2")

    def __init__(self, kind, val=None, parts=None, log2=None):
        self.kind = kind  # 'int' | 'add' | 'mul' | 'pow'
        self.val = val
        self.parts = parts
        self._log2 = log2

    # -- construction -----------------------------------------------------

    @staticmethod
    def of(x) -> "Big":
        if isinstance(x, Big):
            return x
        if x < 0:
            raise ValueError("bounds are nonnegative")
        return Big("int", val=x)

    @staticmethod
    def _node(kind, parts, log2):
        return Big(kind, parts=tuple(parts), log2=log2)

    # -- log2 interval ----------------------------------------------------

    def log2_hi(self) -> float:
        if self.kind == "int":
            return math.log2(self.val) if self.val > 1 else 0.0
        return self._log2[1]

    def log2_lo(self) -> float:
        if self.kind == "int":
            return math.log2(self.val) if self.val > 1 else 0.0
        return self._log2[0]

    def is_int(self) -> bool:
        return self.kind == "int"

    def int_value(self) -> int:
        if self.kind != "int":
            raise BudgetExhausted("value too large to materialize")
        return self.val

    # -- arithmetic --------------------------------------------------------

    def __add__(self, other):
        other = Big.of(other)
        if self.kind == "int" and other.kind == "int":
            return Big.of(self.val + other.val)
        if self.kind == "int" and self.val == 0:
            return other
        if other.kind == "int" and other.val == 0:
            return self
        hi = max(self.log2_hi(), other.log2_hi()) + 1.0
        lo = max(self.log2_lo(), other.log2_lo())
        return Big._node("add", (self, other), (lo, hi))

    __radd__ = __add__

    def __mul__(self, other):
        other = Big.of(other)
        if self.kind == "int" and other.kind == "int":
            v = self.val * other.val
            if v.bit_length() <= _MATERIALIZE_BITS:
                return Big.of(v)
        if self.kind == "int" and self.val == 1:
            return other
        if other.kind == "int" and other.val == 1:
            return self
        if (self.kind == "int" and self.val == 0) or (
            other.kind == "int" and other.val == 0
        ):
            return Big.of(0)
        hi = self.log2_hi() + other.log2_hi() + 1e-9
        lo = self.log2_lo() + other.log2_lo() - 1e-9
        return Big._node("mul", (self, other), (lo, hi))

    __rmul__ = __mul__

    @staticmethod
    def power(base: int, exp: "Big") -> "Big":
        exp = Big.of(exp)
        if base == 0:
            return Big.of(0)
        if base == 1 or (exp.kind == "int" and exp.val == 0):
            return Big.of(1)
        if exp.kind == "int":
            bits = exp.val * math.log2(base)
            if bits <= _MATERIALIZE_BITS:
                return Big.of(base ** exp.val)
            return Big._node("pow", (Big.of(base), exp), (bits * (1 - 1e-12), bits))
        lb = math.log2(base)
        lo = lb * math.pow(2.0, exp.log2_lo())
        hi = lb * math.pow(2.0, exp.log2_hi())
        return Big._node("pow", (Big.of(base), exp), (lo, hi))

    # -- comparisons -------------------------------------------------------

    def __eq__(self, other):
        other = Big.of(other)
        if self.kind == "int" and other.kind == "int":
            return self.val == other.val
        if self.kind != other.kind:
            return False
        return self.parts == other.parts

    def __hash__(self):
        return hash((self.kind, self.val, self.parts))

    def __le__(self, other):
        other = Big.of(other)
        if self.kind == "int" and other.kind == "int":
            return self.val <= other.val
        if self == other:
            return True
        if self.log2_hi() < other.log2_lo():
            return True
        if self.log2_lo() > other.log2_hi():
            return False
        raise BudgetExhausted("cannot certify an order between two huge values")

    def __lt__(self, other):
        other = Big.of(other)
        if self.kind == "int" and other.kind == "int":
            return self.val < other.val
        return not other.__le__(self)

    def __repr__(self):
        if self.kind == "int":
            return str(self.val)
        if self.kind == "pow":
            return f"{self.parts[0]!r}^({self.parts[1]!r})"
        op = " + " if self.kind == "add" else " * "
        return "(" + op.join(repr(p) for p in self.parts) + ")"


def cmp_big(value: int, bound: Union[int, Big]) -> bool:
    """value <= bound, for small concrete measurements against table values."""
    if isinstance(bound, Big):
        if bound.kind == "int":
            return value <= bound.val
        return True  # non-materialized values exceed every measurable run
    return value <= bound


ClassCount = int


def lift_params(l_prime: int, n1_prime: int, n2_prime: int) -> Tuple[int, int, int]:
    return (
        4 * l_prime + 5,
        n1_prime + 2 * (l_prime + 1) + 1,
        n2_prime + 4 ** (l_prime + 1) + 1,
    )


def func_bound_top_word(states: int, classes: int, n: int, z: int) -> int:
    return states * classes + 1


def const_bound_height_word(states: int, classes: int) -> int:
    return classes * states * states


def func_bound_width_word(states: int, symbols: int, n: Union[int, Big]) -> Big:
    """Pairs of a state and a word of length up to n, overcounted."""
    return Big.of(states) * Big.power(symbols + 1, Big.of(n))


def bh1(states: int, classes: int, a: Union[int, Big], b: Union[int, Big], c: int, d: int):
    """Height of the word created by one simultaneous transfer step:
    1 + b + a * (|Q| * #classes at level c, threshold d)."""
    return Big.of(1) + Big.of(b) + Big.of(a) * Big.of(states * classes)


def lam_bound(lam: LengthBoundTable, h: Union[int, Big]) -> Big:
    """Loop-length bound at height h in exact arithmetic.

    Beyond the sampled heights the measured recurrence constants
    extrapolate: constant for n_max = 0, affine for n_max = 1, and the
    geometric envelope (base + m_max) * n_max^h at heights too large to
    materialize a distance from the table edge.
    """
    base = lam._table("loop").get(lam.max_height, 0)
    if isinstance(h, Big) and not h.is_int():
        if lam.n_max == 0:
            return Big.of(max(base, lam.m_max))
        if lam.n_max == 1:
            return Big.of(base) + Big.of(lam.m_max) * h
        return (Big.of(base) + Big.of(lam.m_max)) * Big.power(lam.n_max, h)
    hv = h.int_value() if isinstance(h, Big) else h
    if hv <= lam.max_height:
        return Big.of(lam.bound("loop", hv))
    d = hv - lam.max_height
    if lam.n_max == 0:
        return Big.of(max(base, lam.m_max))
    if lam.n_max == 1:
        return Big.of(base + lam.m_max * d)
    n = lam.n_max
    pw = Big.power(n, Big.of(d))
    if pw.is_int():
        return Big.of(base * pw.int_value() + lam.m_max * (pw.int_value() - 1) // (n - 1))
    return (Big.of(base) + Big.of(lam.m_max)) * pw


@dataclass
class BoundTables:
    """Bound values for first arguments 0..n at a fixed base triple, plus the
    components needed to re-derive every entry."""

    system_states: int
    system_symbols: int
    n: int
    z: int
    l: int
    n1: int
    n2: int
    classes: int
    height: Dict[Tuple[int, int, int, int, int], Big] = field(default_factory=dict)
    width: Dict[Tuple[int, int, int, int, int], Big] = field(default_factory=dict)
    length: Dict[Tuple[int, int, int, int, int], Big] = field(default_factory=dict)
    chain_info: Dict[Tuple[int, int, int, int, int], Dict[str, object]] = field(
        default_factory=dict
    )
    provenance: Dict[str, object] = field(default_factory=dict)

    def key(self, i: int):
        return (i, self.z, self.l, self.n1, self.n2)

    def b_height(self, i: int) -> Big:
        return self.height[self.key(i)]

    def b_width(self, i: int) -> Big:
        return self.width[self.key(i)]

    def b_length(self, i: int) -> Big:
        return self.length[self.key(i)]


def _affine_chain_end(start: Big, step: int, count: int) -> Big:
    """x_0 = start, x_{j+1} = 1 + x_j + step: closed form for x_{count}."""
    return start + Big.of(count) * Big.of(1 + step)


def bound_tables(
    sys: PushdownSystem,
    n: int,
    z: int,
    l_prime: int,
    n1_prime: int,
    n2_prime: int,
    lam: LengthBoundTable,
    classes: int,
) -> BoundTables:
    """Evaluate the bound recurrences exactly for first arguments 0..n at
    base parameters (z, l', n1', n2') and a constant class-count estimate."""
    states = len(sys.states)
    symbols = len(sys.alphabet.symbols)
    out = BoundTables(
        system_states=states,
        system_symbols=symbols,
        n=n,
        z=z,
        l=l_prime,
        n1=n1_prime,
        n2=n2_prime,
        classes=classes,
    )
    out.provenance["lambda_sound"] = lam.sound
    out.provenance["lambda_complete"] = lam.complete
    out.provenance["lambda_constants"] = (lam.m_max, lam.n_max, lam.max_height)
    out.provenance["classes"] = classes

    def eval_triple(i: int, lp: int, n1p: int, n2p: int):
        key = (i, z, lp, n1p, n2p)
        if key in out.height:
            return out.height[key], out.width[key], out.length[key]
        if i == 0:
            zero = Big.of(0)
            out.height[key] = out.width[key] = out.length[key] = zero
            return zero, zero, zero
        l, n1, n2 = lift_params(lp, n1p, n2p)
        bh_prev, bw_prev, bl_prev = eval_triple(i - 1, l, n1, n2)
        qc = states * classes
        h_loc_first = bh1(
            states, classes, (i - 1) * 4 ** (4 * lp + 3), bh_prev, n2 - 1, z
        )
        h_loc_last = _affine_chain_end(h_loc_first, qc, 4 ** (lp + 1) - 1)
        h_glob_first = (
            bh_prev
            + Big.of(const_bound_height_word(states, classes))
            + Big.of(
                func_bound_top_word(states, classes, n2p + n1p + 4 ** (lp + 1) - 1, z)
            )
        )
        h_glob_last = _affine_chain_end(h_glob_first, qc, n1p + 4 ** lp - 1)
        b_height = h_loc_last if h_glob_last <= h_loc_last else h_glob_last
        b_width = (
            bw_prev
            + func_bound_width_word(states, symbols, h_glob_first)
            + Big.of(n1p + 2 * (lp + 1))
        )
        b_length = bl_prev + Big.of(4 ** (lp + 1) + 1) * b_height * b_width * (
            Big.of(1) + lam_bound(lam, b_height)
        )
        out.height[key] = b_height
        out.width[key] = b_width
        out.length[key] = b_length
        out.chain_info[key] = {
            "h_loc_first": h_loc_first,
            "h_loc_last": h_loc_last,
            "h_loc_len": 4 ** (lp + 1),
            "h_glob_first": h_glob_first,
            "h_glob_last": h_glob_last,
            "h_glob_len": n1p + 4 ** lp,
            "lifted": (l, n1, n2),
        }
        return b_height, b_width, b_length

    for i in range(n + 1):
        eval_triple(i, l_prime, n1_prime, n2_prime)
    return out
