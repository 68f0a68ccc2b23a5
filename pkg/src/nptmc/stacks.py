"""Nested stacks of arbitrary level and their operations.

A level-1 stack is a nonempty word over the alphabet; a level-l stack is a
nonempty sequence of level-(l-1) stacks.  All values are immutable and share
structure, so they are safe to use as dict keys and across threads.

Level-2 stacks are written word-wise: ``_ : _.a`` is the stack whose bottom
word is ``_`` and whose top word is ``_ a``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Tuple

from .errors import LevelUnsupported, NotAPrefix, UndefinedOperation


@dataclass(frozen=True, order=True)
class Symbol:
    """One stack symbol; `ident` is its index in the system alphabet."""

    ident: int
    name: str
    is_bottom: bool = False

    def __repr__(self):
        return f"Symbol({self.name!r})"


Word = Tuple[Symbol, ...]


@dataclass(frozen=True)
class Alphabet:
    symbols: Tuple[Symbol, ...]
    bottom: Symbol

    def __post_init__(self):
        if sum(1 for s in self.symbols if s.is_bottom) != 1:
            raise ValueError("exactly one symbol must be flagged as bottom")
        if not self.bottom.is_bottom:
            raise ValueError("bottom symbol not flagged as bottom")

    def by_name(self, name: str) -> Symbol:
        for s in self.symbols:
            if s.name == name:
                return s
        raise KeyError(name)

    def __contains__(self, sym: Symbol) -> bool:
        return sym in self.symbols


def alphabet_from_names(names, bottom_name) -> Alphabet:
    syms = tuple(
        Symbol(i, n, is_bottom=(n == bottom_name)) for i, n in enumerate(names)
    )
    bottoms = [s for s in syms if s.is_bottom]
    if len(bottoms) != 1:
        raise ValueError(f"bottom symbol {bottom_name!r} must occur once in alphabet")
    return Alphabet(syms, bottoms[0])


class Stack:
    """Immutable nested stack.

    `entries` holds Symbols at level 1 and Stacks of level-1 otherwise.  The
    hash is precomputed; equality is structural.
    """

    __slots__ = ("level", "entries", "_hash")

    def __init__(self, level: int, entries: tuple):
        if level < 1:
            raise ValueError("stack level must be >= 1")
        if not entries:
            raise ValueError("stacks are nonempty at every nesting level")
        if level > 1:
            for e in entries:
                if not isinstance(e, Stack) or e.level != level - 1:
                    raise ValueError("entries must be stacks of the next lower level")
        object.__setattr__(self, "level", level)
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "_hash", hash((level, entries)))

    def __setattr__(self, *a):  # pragma: no cover - immutability guard
        raise AttributeError("Stack is immutable")

    def __eq__(self, other):
        return (
            isinstance(other, Stack)
            and self._hash == other._hash
            and self.level == other.level
            and self.entries == other.entries
        )

    def __hash__(self):
        return self._hash

    @property
    def width(self) -> int:
        return len(self.entries)

    @property
    def height(self) -> int:
        """Width of the widest next-level entry (length of the longest word
        for level 2)."""
        if self.level == 1:
            return len(self.entries)
        return max(e.width for e in self.entries)

    @property
    def word(self) -> Word:
        if self.level != 1:
            raise LevelUnsupported("word view requires a level-1 stack")
        return self.entries

    @property
    def words(self) -> Tuple[Word, ...]:
        if self.level != 2:
            raise LevelUnsupported("word-wise view requires a level-2 stack")
        return tuple(e.entries for e in self.entries)

    @property
    def top(self):
        return self.entries[-1]

    def __repr__(self):
        return f"Stack<{format_stack(self)}>"


def word_stack(word: Word) -> Stack:
    return Stack(1, tuple(word))


def stack_of_words(words) -> Stack:
    return Stack(2, tuple(word_stack(w) for w in words))


def initial_stack(alphabet: Alphabet, level: int) -> Stack:
    s = Stack(1, (alphabet.bottom,))
    for _ in range(level - 1):
        s = Stack(s.level + 1, (s,))
    return s


# ---------------------------------------------------------------------------
# operations


@dataclass(frozen=True)
class Push:
    symbol: Symbol

    def __repr__(self):
        return f"push {self.symbol.name}"


@dataclass(frozen=True)
class Pop:
    k: int

    def __repr__(self):
        return f"pop{self.k}"


@dataclass(frozen=True)
class Clone:
    j: int

    def __repr__(self):
        return f"clone{self.j}"


StackOp = object  # Push | Pop | Clone


def apply_op(s: Stack, op) -> Stack:
    """Apply one stack operation, returning a new stack.

    Raises UndefinedOperation when a pop would empty a sequence at its own
    level, or when an operation parameter is out of range for the level.
    """
    if isinstance(op, Push):
        if op.symbol.is_bottom:
            raise UndefinedOperation("cannot push the bottom symbol")
        if s.level == 1:
            return Stack(1, s.entries + (op.symbol,))
        return Stack(s.level, s.entries[:-1] + (apply_op(s.entries[-1], op),))
    if isinstance(op, Clone):
        if op.j < 2 or op.j > s.level:
            raise UndefinedOperation(f"clone{op.j} undefined on a level-{s.level} stack")
        if op.j == s.level:
            return Stack(s.level, s.entries + (s.entries[-1],))
        return Stack(s.level, s.entries[:-1] + (apply_op(s.entries[-1], op),))
    if isinstance(op, Pop):
        if op.k < 1 or op.k > s.level:
            raise UndefinedOperation(f"pop{op.k} undefined on a level-{s.level} stack")
        if op.k == s.level:
            if len(s.entries) == 1:
                raise UndefinedOperation(f"pop{op.k} on a width-1 level-{s.level} stack")
            return Stack(s.level, s.entries[:-1])
        return Stack(s.level, s.entries[:-1] + (apply_op(s.entries[-1], op),))
    raise TypeError(f"unknown stack operation {op!r}")


def top_k(s: Stack, k: int):
    """Topmost level-(k-1) entry; `top_k(s, 1)` is the topmost symbol."""
    if k < 1 or k > s.level:
        raise ValueError(f"top_{k} out of range for level {s.level}")
    if k == s.level:
        return s.entries[-1]
    return top_k(s.entries[-1], k)


def top_symbol(s: Stack) -> Symbol:
    while isinstance(s, Stack):
        s = s.entries[-1]
    return s


def top_word(s: Stack) -> Word:
    """Topmost word of a stack of level >= 1."""
    if s.level == 1:
        return s.entries
    return top_word(s.entries[-1])


# ---------------------------------------------------------------------------
# relations


def is_word_prefix(w: Word, v: Word) -> bool:
    return len(w) <= len(v) and v[: len(w)] == w


def common_prefix(w: Word, v: Word) -> Word:
    """Maximal common prefix of two words (nonempty whenever both share the
    bottom symbol)."""
    n = 0
    for a, b in zip(w, v):
        if a != b:
            break
        n += 1
    return w[:n]


def is_substack(s: Stack, t: Stack) -> bool:
    """True iff `s` is obtainable from `t` by a sequence of pop operations.

    Closed form: the first width(s)-1 entries coincide and the last entry of
    `s` is recursively a substack of entry number width(s) of `t`; at level 1
    this is the word-prefix relation.
    """
    if s.level != t.level:
        raise ValueError("substack comparison requires equal levels")
    if s.level == 1:
        return is_word_prefix(s.entries, t.entries)
    if s.width > t.width:
        return False
    if s.entries[: s.width - 1] != t.entries[: s.width - 1]:
        return False
    return is_substack(s.entries[-1], t.entries[s.width - 1])


def is_proper_substack(s: Stack, t: Stack) -> bool:
    return s != t and is_substack(s, t)


def is_prefix(s: Stack, t: Stack) -> bool:
    """The level-2 prefix order: `s` and `t` agree on the first width(s)-1
    words and the last word of `s` is a word-prefix of every remaining word
    of `t`."""
    if s.level != 2 or t.level != 2:
        raise LevelUnsupported("prefix order is defined on level-2 stacks")
    if s.width > t.width:
        return False
    sw, tw = s.words, t.words
    if sw[: s.width - 1] != tw[: s.width - 1]:
        return False
    last = sw[-1]
    return all(is_word_prefix(last, tw[j]) for j in range(s.width - 1, t.width))


def replace_prefix(t: Stack, s: Stack, u: Stack) -> Stack:
    """Replace the prefix `s` of `t` by `u`: the word suffixes of `t` beyond
    the last word of `s` are grafted onto the last word of `u`."""
    if not is_prefix(s, t):
        raise NotAPrefix(f"{format_stack(s)} is not a prefix of {format_stack(t)}")
    if u.level != 2:
        raise LevelUnsupported("replacement stack must have level 2")
    n = s.width
    wn = s.words[-1]
    xs = u.words
    grafted = tuple(xs[-1] + t.words[j][len(wn):] for j in range(n - 1, t.width))
    return stack_of_words(xs[:-1] + grafted)


# ---------------------------------------------------------------------------
# canonical order and text notation


def word_key(w: Word):
    """Length-then-lexicographic key (by symbol ident)."""
    return (len(w), tuple(s.ident for s in w))


def stack_key(s: Stack):
    if s.level == 1:
        return word_key(s.entries)
    return (s.width, tuple(stack_key(e) for e in s.entries))


def format_word(w: Word) -> str:
    return ".".join(sym.name for sym in w)


def format_stack(s: Stack) -> str:
    if s.level == 1:
        return format_word(s.entries)
    return ":".join(format_stack(e) for e in s.entries)


def parse_word(text: str, alphabet: Alphabet) -> Word:
    text = text.strip()
    if not text:
        raise ValueError("empty word")
    if "." in text:
        names = text.split(".")
    else:
        # single-character symbol names may be concatenated
        names = list(text)
    return tuple(alphabet.by_name(n) for n in names)


def parse_stack(text: str, alphabet: Alphabet, level: int = 2) -> Stack:
    """Parse the textual notation; `:` separates level-2 words."""
    if level == 1:
        return word_stack(parse_word(text, alphabet))
    if level == 2:
        parts = text.split(":")
        return stack_of_words(parse_word(p, alphabet) for p in parts)
    raise LevelUnsupported("textual notation covers levels 1 and 2")


def pop_closure(t: Stack) -> Iterator[Stack]:
    """All stacks reachable from `t` by pop sequences, `t` included.

    Brute-force oracle for the substack relation; exponential in principle,
    fine at desk scale.
    """
    seen = {t}
    stack = [t]
    while stack:
        cur = stack.pop()
        yield cur
        for k in range(1, cur.level + 1):
            try:
                nxt = apply_op(cur, Pop(k))
            except UndefinedOperation:
                continue
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
