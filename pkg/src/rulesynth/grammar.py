"""Interpretation grammars: ordered rewrite rules over word sequences.

A grammar is an ordered list of rules ``LHS -> RHS``.  To interpret an input
sequence the first rule whose LHS matches the *whole* input fires; every
bracketed variable on its RHS is interpreted recursively with the same
procedure and the pieces are concatenated.

Three kinds of pattern variable exist:

* ``u1, u2, ...`` bind exactly one word,
* ``x1, x2, ...`` bind a nonempty run of words,
* ``y1, y2, ...`` bind a possibly empty run of words (last LHS position only).

When a pattern admits several bindings, earlier variables take the shortest
feasible binding, which is the same as anchoring literals at their leftmost
feasible positions.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable, Optional, Sequence, Union

from .errors import (
    BudgetExceeded,
    DuplicateVariable,
    GrammarSyntaxError,
    NoMatch,
    UnboundVariable,
)

ARROW = "->"
EMPTY_STRING = "EMPTY_STRING"
DEFAULT_BUDGET = 1000
MAX_DEPTH = 64

_VAR_RE = re.compile(r"^[xuy]\d+$")
_RHS_TOKEN_RE = re.compile(r"\[([^\[\]\s]*)\]|[^\s\[\]]+|\S")

Words = tuple[str, ...]
Bindings = dict[str, Words]


def is_variable(token: str) -> bool:
    return _VAR_RE.match(token) is not None


@dataclass(frozen=True)
class Lit:
    """A literal word (input word on the LHS, output word on the RHS)."""

    word: str

    def __str__(self):
        return self.word


@dataclass(frozen=True)
class Var:
    """A pattern variable on the LHS, or a reference to one on the RHS."""

    name: str

    @property
    def kind(self) -> str:
        # 'u' primitive, 'x' string, 'y' possibly-empty string
        return self.name[0]

    @property
    def min_len(self) -> int:
        return 0 if self.name[0] == "y" else 1

    def __str__(self):
        return self.name


Elem = Union[Lit, Var]


@dataclass(frozen=True)
class Rule:
    lhs: tuple[Elem, ...]
    rhs: tuple[Elem, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "lhs", tuple(self.lhs))
        object.__setattr__(self, "rhs", tuple(self.rhs))

    @property
    def variables(self) -> list[str]:
        return [e.name for e in self.lhs if isinstance(e, Var)]

    @property
    def is_primitive(self) -> bool:
        """True for variable-free rules such as ``dax -> RED``."""
        return all(isinstance(e, Lit) for e in self.lhs)

    @property
    def is_degenerate(self) -> bool:
        """True when some variable can bind the entire matched input.

        Such rules (``x1 -> [x1]`` being the canonical case) can rewrite an
        input to itself and loop.
        """
        if any(isinstance(e, Lit) or e.kind == "u" for e in self.lhs):
            return False
        return sum(1 for e in self.lhs if e.kind == "x") <= 1

    @cached_property
    def matcher(self) -> Callable[[Words], Optional[Bindings]]:
        return compile_pattern(self.lhs)

    def match(self, words: Words) -> Optional[Bindings]:
        return self.matcher(words)

    def __str__(self):
        return format_rule(self)


@dataclass(frozen=True)
class Grammar:
    rules: tuple[Rule, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "rules", tuple(self.rules))

    def __len__(self):
        return len(self.rules)

    def __iter__(self):
        return iter(self.rules)

    def __str__(self):
        return print_grammar(self)

    def __call__(self, words, budget: int = DEFAULT_BUDGET):
        return evaluate(self, words, budget)


@dataclass(frozen=True)
class Violation:
    kind: str
    rule: int
    detail: str = ""


# ----------------------------------------------------------------------------
# matching


def compile_pattern(lhs: Sequence[Elem]) -> Callable[[Words], Optional[Bindings]]:
    """Build a matcher for ``lhs`` implementing the shortest-early-binding rule."""
    lhs = tuple(lhs)
    n_el = len(lhs)

    if all(isinstance(e, Lit) for e in lhs):
        target = tuple(e.word for e in lhs)

        def match_literal(words):
            return {} if tuple(words) == target else None

        return match_literal

    if all(isinstance(e, Lit) or e.kind == "u" for e in lhs):
        # fixed length: no search needed
        def match_fixed(words):
            if len(words) != n_el:
                return None
            out = {}
            for e, w in zip(lhs, words):
                if isinstance(e, Lit):
                    if e.word != w:
                        return None
                else:
                    out[e.name] = (w,)
            return out

        return match_fixed

    # min_suffix[i]: minimum number of words elements i.. consume
    # open_suffix[i]: whether elements i.. can absorb arbitrarily many words
    min_suffix = [0] * (n_el + 1)
    open_suffix = [False] * (n_el + 1)
    for i in range(n_el - 1, -1, -1):
        e = lhs[i]
        if isinstance(e, Lit):
            min_suffix[i] = min_suffix[i + 1] + 1
            open_suffix[i] = open_suffix[i + 1]
        else:
            min_suffix[i] = min_suffix[i + 1] + e.min_len
            open_suffix[i] = open_suffix[i + 1] or e.kind != "u"
    literals = {e.word for e in lhs if isinstance(e, Lit)}

    def match_general(words):
        words = tuple(words)
        n = len(words)
        if n < min_suffix[0] or not open_suffix[0] and n != min_suffix[0]:
            return None
        if literals and not literals.issubset(words):
            return None
        out: Bindings = {}

        def rec(i, pos):
            if i == n_el:
                return pos == n
            e = lhs[i]
            if isinstance(e, Lit):
                return pos < n and words[pos] == e.word and rec(i + 1, pos + 1)
            if e.kind == "u":
                if pos >= n:
                    return False
                out[e.name] = words[pos:pos + 1]
                return rec(i + 1, pos + 1)
            hi = n - pos - min_suffix[i + 1]
            if not open_suffix[i + 1]:
                lo = hi  # the rest has fixed width
                if lo < e.min_len:
                    return False
            else:
                lo = e.min_len
            for length in range(lo, hi + 1):
                out[e.name] = words[pos:pos + length]
                if rec(i + 1, pos + length):
                    return True
            return False

        return dict(out) if rec(0, 0) else None

    return match_general


def match_lhs(lhs, words) -> Optional[Bindings]:
    """Match a pattern against an entire input sequence.

    ``lhs`` may be a :class:`Rule`, a sequence of pattern elements, or pattern
    text such as ``"x1 and x2"``.  Returns a name -> words mapping, or None.
    """
    words = _as_words(words)
    if isinstance(lhs, Rule):
        return lhs.match(words)
    if isinstance(lhs, str):
        lhs = _parse_lhs(lhs.split(), None)
    return compile_pattern(lhs)(words)


def substitute(lhs: Sequence[Elem], bindings: Bindings) -> Words:
    """Reassemble the input a binding was matched from."""
    out: list[str] = []
    for e in lhs:
        if isinstance(e, Lit):
            out.append(e.word)
        else:
            out.extend(bindings[e.name])
    return tuple(out)


# ----------------------------------------------------------------------------
# evaluation


def _as_words(words) -> Words:
    if isinstance(words, str):
        return tuple(words.split())
    return tuple(words)


def evaluate(g: Grammar, words, budget: int = DEFAULT_BUDGET,
             max_depth: int = MAX_DEPTH) -> Words:
    """Interpret ``words`` with grammar ``g`` and return the output words.

    Raises NoMatch when some (sub)sequence is not covered by any rule and
    BudgetExceeded when more than ``budget`` rules fire or recursion gets
    deeper than ``max_depth``.
    """
    words = _as_words(words)
    if not words:
        raise ValueError("input must be nonempty")
    if budget < 1:
        raise ValueError("budget must be >= 1")
    rules = g.rules
    remaining = [budget]
    memo: dict[Words, Words] = {}

    def ev(seq: Words, depth: int) -> Words:
        if not seq:
            return ()
        hit = memo.get(seq)
        if hit is not None:
            return hit
        if depth > max_depth:
            raise BudgetExceeded(f"recursion deeper than {max_depth}")
        for rule in rules:
            b = rule.matcher(seq)
            if b is None:
                continue
            remaining[0] -= 1
            if remaining[0] < 0:
                raise BudgetExceeded(f"more than {budget} rule applications")
            out: list[str] = []
            for e in rule.rhs:
                if isinstance(e, Lit):
                    out.append(e.word)
                else:
                    out.extend(ev(b[e.name], depth + 1))
            res = tuple(out)
            memo[seq] = res
            return res
        raise NoMatch(seq)

    return ev(words, 0)


# ----------------------------------------------------------------------------
# text format


def _parse_lhs(tokens: Sequence[str], line: Optional[int]) -> tuple[Elem, ...]:
    if not tokens:
        raise GrammarSyntaxError("empty left hand side", line)
    lhs: list[Elem] = []
    seen = set()
    for tok in tokens:
        if "[" in tok or "]" in tok or tok == ARROW:
            raise GrammarSyntaxError(f"unexpected {tok!r} on left hand side", line)
        if is_variable(tok):
            if tok in seen:
                raise DuplicateVariable(tok, line)
            seen.add(tok)
            lhs.append(Var(tok))
        else:
            lhs.append(Lit(tok))
    for e in lhs[:-1]:
        if isinstance(e, Var) and e.kind == "y":
            raise GrammarSyntaxError(f"{e.name} must be the last element of the left hand side", line)
    return tuple(lhs)


def split_arrow(text: str, line: Optional[int]) -> tuple[str, str]:
    parts = text.split(ARROW)
    if len(parts) != 2:
        what = "missing" if len(parts) == 1 else "more than one"
        raise GrammarSyntaxError(f"{what} '{ARROW}'", line)
    return parts[0], parts[1]


def _parse_rhs(text: str, bound: set[str], line: Optional[int]) -> tuple[Elem, ...]:
    text = text.strip()
    if text == EMPTY_STRING:
        return ()
    if not text:
        raise GrammarSyntaxError(f"empty right hand side (write {EMPTY_STRING})", line)
    rhs: list[Elem] = []
    for m in _RHS_TOKEN_RE.finditer(text):
        tok = m.group(0)
        if m.group(1) is not None:
            name = m.group(1)
            if not is_variable(name):
                raise GrammarSyntaxError(f"malformed bracket {tok!r}", line)
            if name not in bound:
                raise UnboundVariable(name, line)
            rhs.append(Var(name))
        elif tok in ("[", "]"):
            raise GrammarSyntaxError("malformed bracket", line)
        elif tok == EMPTY_STRING:
            raise GrammarSyntaxError(f"{EMPTY_STRING} must stand alone", line)
        else:
            rhs.append(Lit(tok))
    return tuple(rhs)


def parse_rule(text: str, line: Optional[int] = None) -> Rule:
    left, right = split_arrow(text, line)
    lhs = _parse_lhs(left.split(), line)
    bound = {e.name for e in lhs if isinstance(e, Var)}
    return Rule(lhs, _parse_rhs(right, bound, line))


def grammar_lines(text: str):
    """Yield ``(line_number, line)`` for every non-blank, non-comment line."""
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line and not line.startswith("#"):
            yield i, line


def parse_grammar(text: str) -> Grammar:
    """Parse grammar source, one ``LHS -> RHS`` rule per line."""
    rules = [parse_rule(line, i) for i, line in grammar_lines(text)]
    if not rules:
        raise GrammarSyntaxError("grammar has no rules")
    return Grammar(tuple(rules))


def format_rule(rule: Rule) -> str:
    lhs = " ".join(str(e) for e in rule.lhs)
    if not rule.rhs:
        return f"{lhs} {ARROW} {EMPTY_STRING}"
    rhs = " ".join(e.word if isinstance(e, Lit) else f"[{e.name}]" for e in rule.rhs)
    return f"{lhs} {ARROW} {rhs}"


def print_grammar(g: Grammar) -> str:
    return "\n".join(format_rule(r) for r in g.rules)


def validate(g: Grammar) -> list[Violation]:
    """Return every well-formedness problem in ``g`` (empty when clean)."""
    problems = []
    for i, rule in enumerate(g.rules):
        if not rule.lhs:
            problems.append(Violation("EmptyLhs", i))
            continue
        names = rule.variables
        for name in sorted({n for n in names if names.count(n) > 1}):
            problems.append(Violation("DuplicateVariable", i, name))
        refs = [e.name for e in rule.rhs if isinstance(e, Var)]
        for name in sorted(set(refs) - set(names)):
            problems.append(Violation("UnboundVariable", i, name))
        if rule.is_degenerate:
            problems.append(Violation("DegenerateRule", i, format_rule(rule)))
    return problems


def vocabulary(g: Grammar) -> tuple[set[str], set[str]]:
    """Input and output words mentioned by ``g``."""
    ins, outs = set(), set()
    for rule in g.rules:
        ins.update(e.word for e in rule.lhs if isinstance(e, Lit))
        outs.update(e.word for e in rule.rhs if isinstance(e, Lit))
    return ins, outs


def load_grammar(path) -> Grammar:
    with open(path, encoding="utf-8") as fh:
        return parse_grammar(fh.read())


def as_grammar(rules: Iterable[str]) -> Grammar:
    """Convenience: build a grammar from rule strings."""
    return parse_grammar("\n".join(rules))
