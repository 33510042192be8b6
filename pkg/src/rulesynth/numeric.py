"""Number grammars: rewrite rules whose right hand sides are arithmetic.

``x1 token13 y1 -> [x1]*100 + [y1]`` reads "some words, the hundred word,
then possibly nothing": the value is the interpretation of ``x1`` times 100
plus the interpretation of ``y1``.  An empty ``y`` binding is worth 0.

Right hand sides are sums of products of nonnegative integer literals and
bracketed variables; ``*`` binds tighter than ``+`` and there are no
parentheses.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Union

from .errors import (
    BudgetExceeded,
    FormatError,
    GrammarSyntaxError,
    NegativeLiteral,
    NoMatch,
    NotRepresentable,
    UnboundVariable,
)
from .grammar import (
    ARROW,
    DEFAULT_BUDGET,
    MAX_DEPTH,
    Lit,
    Var,
    compile_pattern,
    grammar_lines,
    is_variable,
    split_arrow,
    _as_words,
    _parse_lhs,
)

DEFAULT_BOUND = 99_999_999
MAX_VALUE = 10**9

Factor = Union[int, Var]

_ARITH_TOKEN_RE = re.compile(r"\[([^\[\]\s]*)\]|-?\d+|[*+]|\S+")


@dataclass(frozen=True)
class ArithRhs:
    """Sum over ``terms`` of the product over each term's factors."""

    terms: tuple[tuple[Factor, ...], ...]

    @property
    def refs(self) -> list[str]:
        return [f.name for t in self.terms for f in t if isinstance(f, Var)]

    @property
    def is_constant(self) -> bool:
        return not self.refs

    def value(self, env: Optional[dict[str, int]] = None) -> int:
        total = 0
        for term in self.terms:
            prod = 1
            for f in term:
                prod *= env[f.name] if isinstance(f, Var) else f
            total += prod
        return total

    def __str__(self):
        return " + ".join(
            "*".join(f"[{f.name}]" if isinstance(f, Var) else str(f) for f in term)
            for term in self.terms)


@dataclass(frozen=True)
class NumRule:
    lhs: tuple
    rhs: ArithRhs

    @property
    def variables(self) -> list[str]:
        return [e.name for e in self.lhs if isinstance(e, Var)]

    @property
    def is_primitive(self) -> bool:
        return all(isinstance(e, Lit) for e in self.lhs) and self.rhs.is_constant

    @property
    def is_degenerate(self) -> bool:
        if any(isinstance(e, Lit) or e.kind == "u" for e in self.lhs):
            return False
        return sum(1 for e in self.lhs if e.kind == "x") <= 1

    @cached_property
    def matcher(self):
        return compile_pattern(self.lhs)

    def __str__(self):
        return f"{' '.join(str(e) for e in self.lhs)} {ARROW} {self.rhs}"


@dataclass(frozen=True)
class NumGrammar:
    rules: tuple[NumRule, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "rules", tuple(self.rules))

    def __len__(self):
        return len(self.rules)

    def __iter__(self):
        return iter(self.rules)

    def __str__(self):
        return print_num_grammar(self)

    def __call__(self, words, budget: int = DEFAULT_BUDGET):
        return evaluate_number(self, words, budget)


# ----------------------------------------------------------------------------
# text format


def _parse_arith(text: str, bound: set[str], line) -> ArithRhs:
    tokens = []
    for m in _ARITH_TOKEN_RE.finditer(text):
        tok = m.group(0)
        if m.group(1) is not None:
            name = m.group(1)
            if not is_variable(name):
                raise GrammarSyntaxError(f"malformed bracket {tok!r}", line)
            if name not in bound:
                raise UnboundVariable(name, line)
            tokens.append(Var(name))
        elif tok in "+*" and len(tok) == 1:
            tokens.append(tok)
        elif re.fullmatch(r"-\d+", tok):
            raise NegativeLiteral(f"negative literal {tok}", line)
        elif tok.isdigit():
            tokens.append(int(tok))
        else:
            raise GrammarSyntaxError(f"unexpected {tok!r} in arithmetic expression", line)
    if not tokens:
        raise GrammarSyntaxError("empty right hand side", line)

    terms: list[tuple[Factor, ...]] = []
    factors: list[Factor] = []
    expect_operand = True
    for tok in tokens:
        if expect_operand:
            if tok in ("+", "*"):
                raise GrammarSyntaxError(f"operator {tok!r} where a number or variable was expected", line)
            factors.append(tok)
        elif tok == "*":
            pass
        elif tok == "+":
            terms.append(tuple(factors))
            factors = []
        else:
            raise GrammarSyntaxError("missing operator between operands", line)
        expect_operand = not expect_operand
    if expect_operand:
        raise GrammarSyntaxError("dangling operator", line)
    terms.append(tuple(factors))
    return ArithRhs(tuple(terms))


def parse_num_rule(text: str, line=None) -> NumRule:
    left, right = split_arrow(text, line)
    lhs = _parse_lhs(left.split(), line)
    bound = {e.name for e in lhs if isinstance(e, Var)}
    return NumRule(lhs, _parse_arith(right, bound, line))


def parse_num_grammar(text: str) -> NumGrammar:
    rules = [parse_num_rule(line, i) for i, line in grammar_lines(text)]
    if not rules:
        raise GrammarSyntaxError("grammar has no rules")
    return NumGrammar(tuple(rules))


def print_num_grammar(g: NumGrammar) -> str:
    return "\n".join(str(r) for r in g.rules)


def load_num_grammar(path) -> NumGrammar:
    with open(path, encoding="utf-8") as fh:
        return parse_num_grammar(fh.read())


# ----------------------------------------------------------------------------
# evaluation


def evaluate_number(g: NumGrammar, words, budget: int = DEFAULT_BUDGET,
                    max_depth: int = MAX_DEPTH) -> int:
    """Interpret a word sequence as an integer under ``g``."""
    words = _as_words(words)
    if not words:
        raise ValueError("input must be nonempty")
    if budget < 1:
        raise ValueError("budget must be >= 1")
    rules = g.rules
    remaining = [budget]
    memo: dict[tuple, int] = {}

    def ev(seq, depth):
        if not seq:
            return 0
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
            env = {name: ev(sub, depth + 1) for name, sub in b.items()
                   if name in rule.rhs.refs}
            val = rule.rhs.value(env)
            memo[seq] = val
            return val
        raise NoMatch(seq)

    return ev(words, 0)


# ----------------------------------------------------------------------------
# inversion


def _classify(rule: NumRule):
    """Recognise the rule shapes inversion knows how to run backwards."""
    lhs, terms = rule.lhs, rule.rhs.terms
    if rule.is_primitive:
        return ("exact", rule.rhs.value())
    kinds = "".join("w" if isinstance(e, Lit) else e.kind for e in lhs)
    # x W y -> [x]*M + [y]
    if kinds == "xwy" and len(terms) == 2:
        x, y = lhs[0].name, lhs[2].name
        head, tail = terms
        ints = [f for f in head if isinstance(f, int)]
        vars_ = [f for f in head if isinstance(f, Var)]
        if (len(vars_) == 1 and vars_[0].name == x and tail == (Var(y),)
                and math.prod(ints) > 0):
            return ("power", math.prod(ints))
    # W... y -> C + [y]
    if kinds.endswith("y") and set(kinds[:-1]) == {"w"} and len(terms) == 2:
        head, tail = terms
        y = lhs[-1].name
        if tail == (Var(y),) and all(isinstance(f, int) for f in head):
            const = math.prod(head)
            if const > 0:
                return ("offset", const)
    # u [W] x -> [u] + [x]
    if kinds in ("ux", "uwx") and len(terms) == 2:
        u, x = lhs[0].name, lhs[-1].name
        if {terms[0], terms[1]} == {(Var(u),), (Var(x),)}:
            return ("sum", None)
    return (None, None)


def invert(g: NumGrammar, n: int, bound: int = DEFAULT_BOUND,
           budget: int = DEFAULT_BUDGET) -> tuple[str, ...]:
    """Render ``n`` as words ``w`` with ``evaluate_number(g, w) == n``.

    Rules are tried in priority order: an exact-value rule when one exists,
    then multiplier rules (``x W y``) which split ``n`` by division, offset
    rules (``W y``, ``W V y``) which subtract their constant, and sum rules
    (``u x`` / ``u W x``) which peel off the largest single-word value.
    Every candidate is checked by evaluating it and the first survivor in
    priority order is returned; a failed check moves on to the next rule.
    """
    if not isinstance(n, int) or n < 0:
        raise NotRepresentable(f"{n!r} is not a nonnegative integer")
    if n > bound or n > MAX_VALUE:
        raise NotRepresentable(f"{n} exceeds bound {min(bound, MAX_VALUE)}")

    shapes = [(rule, *_classify(rule)) for rule in g.rules]
    exact: dict[int, tuple[str, ...]] = {}
    single: dict[int, str] = {}
    for rule, kind, val in shapes:
        if kind == "exact":
            words = tuple(e.word for e in rule.lhs)
            exact.setdefault(val, words)
            if len(words) == 1:
                single.setdefault(val, words[0])
    singles_desc = sorted(single, reverse=True)
    memo: dict[int, Optional[tuple[str, ...]]] = {}

    def check(words, target):
        try:
            return evaluate_number(g, words, budget) == target
        except (NoMatch, BudgetExceeded):
            return False

    def render(m: int) -> Optional[tuple[str, ...]]:
        if m in memo:
            return memo[m]
        memo[m] = None  # guards against cycles
        if m in exact and check(exact[m], m):
            memo[m] = exact[m]
            return exact[m]
        for rule, kind, val in shapes:
            cand = None
            if kind == "power" and m >= val:
                q, r = divmod(m, val)
                qw = render(q)
                rw = render(r) if r else ()
                if qw is not None and rw is not None:
                    cand = qw + (rule.lhs[1].word,) + rw
            elif kind == "offset":
                unit = 10 ** int(math.log10(val))
                if val <= m < val + unit:
                    rw = render(m - val) if m > val else ()
                    if rw is not None:
                        cand = tuple(e.word for e in rule.lhs[:-1]) + rw
            elif kind == "sum":
                middle = (rule.lhs[1].word,) if len(rule.lhs) == 3 else ()
                # the head word must dominate the rest, as in "forty five"
                heads = [v for v in singles_desc if 0 < v < m and m - v < v][:2]
                for v in heads:
                    rw = render(m - v)
                    if rw is None:
                        continue
                    c = (single[v],) + middle + rw
                    if check(c, m):
                        cand = c
                        break
            if cand is not None and (kind == "sum" or check(cand, m)):
                memo[m] = cand
                return cand
        return None

    out = render(n)
    if out is None:
        raise NotRepresentable(f"{n} has no rendering under this grammar")
    return out


# ----------------------------------------------------------------------------
# lexicons


def load_lexicon(path) -> dict[str, str]:
    """Read ``surface-word<TAB>tokenNN`` lines into a surface -> token map."""
    mapping: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for i, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2 or not parts[0].strip() or not parts[1].strip():
                raise FormatError("expected 'surface-word<TAB>token'", i)
            surface, token = parts[0].strip(), parts[1].strip()
            if surface in mapping and mapping[surface] != token:
                raise FormatError(f"{surface!r} assigned twice", i)
            mapping[surface] = token
    return mapping
