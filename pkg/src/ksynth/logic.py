"""Single-agent CTL*-K formulas: syntax tree, parser, renderer, closure, atoms.

The concrete grammar (tightest binding first)::

    unary  : ! X F G E A K
    binary : U (right assoc), & , | , -> (right assoc)

Identifiers may carry a trailing balanced parenthesised suffix so that
generated names such as ``said_1(K_on)`` or ``did_1(T)`` lex as one token.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import cached_property
from itertools import product
from typing import Iterable, Mapping


class FormulaSyntaxError(ValueError):
    def __init__(self, message: str, text: str, pos: int):
        line = text.count("\n", 0, pos) + 1
        col = pos - (text.rfind("\n", 0, pos) + 1) + 1
        super().__init__(f"{message} at line {line}, column {col}")
        self.line = line
        self.column = col


UNARY = {"!": "not", "X": "next", "F": "eventually", "G": "globally",
         "E": "exists", "A": "forall", "K": "knows"}
BINARY = {"U": "until", "&": "and", "|": "or", "->": "implies"}
UNARY_SYMBOL = {v: k for k, v in UNARY.items()}
BINARY_SYMBOL = {v: k for k, v in BINARY.items()}
KEYWORDS = {"true", "false", "X", "F", "G", "E", "A", "K", "U"}

# precedence: larger binds tighter
_PREC = {"implies": 1, "or": 2, "and": 3, "until": 4}
_RIGHT_ASSOC = {"implies", "until"}
_UNARY_PREC = 5
_ATOM_PREC = 6

CORE_OPS = {"true", "prop", "not", "and", "or", "next", "until", "exists", "knows"}
MODAL_OPS = {"exists", "knows"}


@dataclass(frozen=True)
class Formula:
    op: str
    args: tuple["Formula", ...] = ()
    name: str | None = None

    def __str__(self) -> str:
        return render(self)

    def __repr__(self) -> str:
        return f"Formula({render(self)!r})"

    @cached_property
    def size(self) -> int:
        return 1 + sum(a.size for a in self.args)

    def subformulas(self) -> Iterable["Formula"]:
        yield self
        for a in self.args:
            yield from a.subformulas()

    @property
    def is_modal(self) -> bool:
        return self.op in MODAL_OPS

    @property
    def child(self) -> "Formula":
        return self.args[0]


TRUE = Formula("true")
FALSE = Formula("false")


def prop(name: str) -> Formula:
    return Formula("prop", (), name)


def Not(f): return Formula("not", (f,))
def And(a, b): return Formula("and", (a, b))
def Or(a, b): return Formula("or", (a, b))
def Implies(a, b): return Formula("implies", (a, b))
def Next(f): return Formula("next", (f,))
def Until(a, b): return Formula("until", (a, b))
def Eventually(f): return Formula("eventually", (f,))
def Globally(f): return Formula("globally", (f,))
def Exists(f): return Formula("exists", (f,))
def Forall(f): return Formula("forall", (f,))
def Knows(f): return Formula("knows", (f,))


def Iff(a: Formula, b: Formula) -> Formula:
    return And(Implies(a, b), Implies(b, a))


def conjunction(fs: Iterable[Formula]) -> Formula:
    fs = list(fs)
    if not fs:
        return TRUE
    out = fs[0]
    for f in fs[1:]:
        out = And(out, f)
    return out


def disjunction(fs: Iterable[Formula]) -> Formula:
    fs = list(fs)
    if not fs:
        return FALSE
    out = fs[0]
    for f in fs[1:]:
        out = Or(out, f)
    return out


# ---------------------------------------------------------------- parsing

_TOKEN = re.compile(r"\s*(?:(->)|([!&|()])|([A-Za-z_][A-Za-z0-9_]*))")
_IDENT_TAIL = re.compile(r"[A-Za-z0-9_]*")


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    n = len(text)
    while True:
        while pos < n and text[pos].isspace():
            pos += 1
        if pos >= n:
            break
        m = _TOKEN.match(text, pos)
        if not m:
            raise FormulaSyntaxError(f"unknown operator {text[pos]!r}", text, pos)
        start = m.start(m.lastindex)
        if m.group(1) or m.group(2):
            tokens.append(("sym", m.group(m.lastindex), start))
            pos = m.end()
            continue
        word = m.group(3)
        end = m.end()
        if word not in KEYWORDS:
            # absorb a directly attached balanced parenthesised suffix
            while end < n and text[end] == "(":
                depth, j = 0, end
                while j < n:
                    if text[j] == "(":
                        depth += 1
                    elif text[j] == ")":
                        depth -= 1
                        if depth == 0:
                            break
                    j += 1
                if j >= n:
                    raise FormulaSyntaxError("unbalanced parenthesis in identifier", text, end)
                end = _IDENT_TAIL.match(text, j + 1).end()
                word = text[start:end]
            tokens.append(("ident", word, start))
        else:
            tokens.append(("kw", word, start))
        pos = end
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def error(self, msg):
        tok = self.peek()
        pos = tok[2] if tok else len(self.text)
        raise FormulaSyntaxError(msg, self.text, pos)

    def take(self):
        tok = self.peek()
        if tok is None:
            self.error("unexpected end of input (missing operand)")
        self.i += 1
        return tok

    def parse(self) -> Formula:
        if not self.tokens:
            self.error("empty formula")
        f = self.implies()
        if self.peek() is not None:
            self.error(f"unexpected token {self.peek()[1]!r}")
        return f

    def implies(self):
        left = self.disj()
        tok = self.peek()
        if tok and tok[1] == "->" and tok[0] == "sym":
            self.take()
            return Implies(left, self.implies())
        return left

    def disj(self):
        left = self.conj()
        while (tok := self.peek()) and tok == ("sym", "|", tok[2]):
            self.take()
            left = Or(left, self.conj())
        return left

    def conj(self):
        left = self.until()
        while (tok := self.peek()) and tok == ("sym", "&", tok[2]):
            self.take()
            left = And(left, self.until())
        return left

    def until(self):
        left = self.unary()
        tok = self.peek()
        if tok and tok[0] == "kw" and tok[1] == "U":
            self.take()
            return Until(left, self.until())
        return left

    def unary(self):
        tok = self.take()
        kind, val, _ = tok
        if (kind == "sym" and val == "!") or (kind == "kw" and val in UNARY):
            return Formula(UNARY[val], (self.unary(),))
        if kind == "kw" and val == "true":
            return TRUE
        if kind == "kw" and val == "false":
            return FALSE
        if kind == "ident":
            return prop(val)
        if kind == "sym" and val == "(":
            f = self.implies()
            close = self.peek()
            if not close or close[1] != ")":
                self.error("expected ')'")
            self.take()
            return f
        self.i -= 1
        self.error(f"unexpected token {val!r} (missing operand)")


def parse_formula(text: str) -> Formula:
    """Parse a formula in the concrete ASCII grammar."""
    return _Parser(text).parse()


# ---------------------------------------------------------------- rendering

def _prec(f: Formula) -> int:
    if f.op in _PREC:
        return _PREC[f.op]
    if f.op in UNARY_SYMBOL:
        return _UNARY_PREC
    return _ATOM_PREC


def render(f: Formula) -> str:
    op = f.op
    if op == "prop":
        return f.name
    if op in ("true", "false"):
        return op
    if op in UNARY_SYMBOL:
        sub = render(f.args[0])
        if _prec(f.args[0]) < _UNARY_PREC:
            sub = f"({sub})"
        sym = UNARY_SYMBOL[op]
        return f"!{sub}" if sym == "!" else f"{sym} {sub}"
    p = _PREC[op]
    left, right = f.args
    ls, rs = render(left), render(right)
    right_assoc = op in _RIGHT_ASSOC
    if _prec(left) < p or (_prec(left) == p and right_assoc):
        ls = f"({ls})"
    if _prec(right) < p or (_prec(right) == p and not right_assoc):
        rs = f"({rs})"
    return f"{ls} {BINARY_SYMBOL[op]} {rs}"


_WORDS = {"not": "not", "and": "and", "or": "or", "implies": "implies",
          "next": "X", "until": "U", "eventually": "F", "globally": "G",
          "exists": "E", "forall": "A", "knows": "K"}


def ident_of(f: Formula) -> str:
    """Prefix rendering made only of identifier characters, e.g. ``K_not_on``."""
    if f.op == "prop":
        return f.name
    if f.op in ("true", "false"):
        return f.op
    return "_".join([_WORDS[f.op]] + [ident_of(a) for a in f.args])


def modal_name(f: Formula) -> str:
    """Name of the fresh proposition standing for a K/E subformula."""
    return f"[{render(f)}]"


# ---------------------------------------------------------------- normalization

def normalize(f: Formula) -> Formula:
    """Rewrite into the core connectives {true, prop, not, and, or, X, U, E, K}."""
    op = f.op
    if op in ("true", "prop"):
        return f
    if op == "false":
        return Not(TRUE)
    args = tuple(normalize(a) for a in f.args)
    if op == "implies":
        return Or(Not(args[0]), args[1])
    if op == "eventually":
        return Until(TRUE, args[0])
    if op == "globally":
        return Not(Until(TRUE, Not(args[0])))
    if op == "forall":
        return Not(Exists(Not(args[0])))
    return Formula(op, args, f.name)


def is_core(f: Formula) -> bool:
    return all(g.op in CORE_OPS for g in f.subformulas())


def propositions(f: Formula) -> frozenset[str]:
    return frozenset(g.name for g in f.subformulas() if g.op == "prop")


def knowledge_depth(f: Formula) -> int:
    if f.op == "knows":
        return 1 + knowledge_depth(f.args[0])
    return max((knowledge_depth(a) for a in f.args), default=0)


def substitute_modal(f: Formula) -> Formula:
    """Replace each outermost K/E subformula by its fresh proposition."""
    if f.op in MODAL_OPS:
        return prop(modal_name(f))
    if not f.args:
        return f
    return Formula(f.op, tuple(substitute_modal(a) for a in f.args), f.name)


# ---------------------------------------------------------------- closure

@dataclass(frozen=True)
class Closure:
    """Distinct subformulas ordered by (size, rendering); the root comes last."""
    formulas: tuple[Formula, ...]
    index: Mapping[Formula, int] = field(compare=False, repr=False)

    def __len__(self) -> int:
        return len(self.formulas)

    def __iter__(self):
        return iter(self.formulas)

    def __getitem__(self, i: int) -> Formula:
        return self.formulas[i]

    @property
    def root(self) -> Formula:
        return self.formulas[-1]

    def children(self, i: int) -> tuple[int, ...]:
        return tuple(self.index[a] for a in self.formulas[i].args)

    @cached_property
    def free_positions(self) -> tuple[int, ...]:
        """Positions whose bit is not fixed by Boolean structure."""
        return tuple(i for i, f in enumerate(self.formulas)
                     if f.op in ("prop", "next", "until", "exists", "knows"))

    @cached_property
    def extended_positions(self) -> tuple[int, ...]:
        """Propositions plus K/E subformulas viewed as fresh propositions."""
        return tuple(i for i, f in enumerate(self.formulas)
                     if f.op in ("prop", "exists", "knows"))

    def bit(self, atom: int, f: Formula) -> int:
        return (atom >> self.index[f]) & 1


def closure_of(f: Formula) -> Closure:
    if not is_core(f):
        f = normalize(f)
    subs = set(f.subformulas())
    ordered = tuple(sorted(subs, key=lambda g: (g.size, render(g))))
    return Closure(ordered, {g: i for i, g in enumerate(ordered)})


# ---------------------------------------------------------------- atoms

def _derive(c: Closure, bits: int) -> int:
    """Fill in the Boolean positions of `bits` bottom-up."""
    for i, g in enumerate(c.formulas):
        op = g.op
        if op == "true":
            bits |= 1 << i
        elif op in ("not", "and", "or"):
            ch = [(bits >> c.index[a]) & 1 for a in g.args]
            if op == "not":
                v = 1 - ch[0]
            elif op == "and":
                v = ch[0] & ch[1]
            else:
                v = ch[0] | ch[1]
            bits = (bits & ~(1 << i)) | (v << i)
    return bits


def is_boolean_consistent(c: Closure, atom: int) -> bool:
    return _derive(c, atom) == atom


def enumerate_atoms(c: Closure, constraint: Mapping[str, bool] | None = None) -> list[int]:
    """All Boolean-consistent atoms (bitmasks over `c`), optionally fixing propositions.

    Atom bit ``i`` is the truth value assigned to ``c[i]``.
    """
    free = c.free_positions
    fixed = {}
    if constraint is not None:
        for i in free:
            g = c[i]
            if g.op == "prop":
                fixed[i] = 1 if constraint.get(g.name, False) else 0
    choose = [i for i in free if i not in fixed]
    base = sum(v << i for i, v in fixed.items())
    out = []
    for vals in product((0, 1), repeat=len(choose)):
        bits = base
        for i, v in zip(choose, vals):
            bits |= v << i
        out.append(_derive(c, bits))
    return sorted(out)


def atom_dict(c: Closure, atom: int) -> dict[str, int]:
    return {render(g): (atom >> i) & 1 for i, g in enumerate(c.formulas)}


# ---------------------------------------------------------------- lasso semantics

def evaluate_lasso(f: Formula, prefix, cycle, position: int = 0) -> bool:
    """Truth of a knowledge-free formula on the word prefix . cycle^omega.

    Letters are collections of the propositions that hold.  Evaluated
    directly on every operator (no normalization) so it can serve as an
    independent reference for the automata.
    """
    if not cycle:
        raise ValueError("empty cycle")
    word = [frozenset(x) for x in prefix] + [frozenset(x) for x in cycle]
    n = len(word)
    loop = len(prefix)
    nxt = [i + 1 if i + 1 < n else loop for i in range(n)]
    memo: dict[Formula, list[bool]] = {}

    def ev(g: Formula) -> list[bool]:
        if g in memo:
            return memo[g]
        op = g.op
        if op == "true":
            r = [True] * n
        elif op == "false":
            r = [False] * n
        elif op == "prop":
            r = [g.name in w for w in word]
        elif op == "not":
            r = [not x for x in ev(g.args[0])]
        elif op == "and":
            a, b = ev(g.args[0]), ev(g.args[1])
            r = [x and y for x, y in zip(a, b)]
        elif op == "or":
            a, b = ev(g.args[0]), ev(g.args[1])
            r = [x or y for x, y in zip(a, b)]
        elif op == "implies":
            a, b = ev(g.args[0]), ev(g.args[1])
            r = [(not x) or y for x, y in zip(a, b)]
        elif op == "next":
            a = ev(g.args[0])
            r = [a[nxt[i]] for i in range(n)]
        elif op in ("until", "eventually"):
            a, b = (ev(g.args[0]), ev(g.args[1])) if op == "until" else ([True] * n, ev(g.args[0]))
            r = list(b)
            changed = True
            while changed:
                changed = False
                for i in range(n):
                    if not r[i] and a[i] and r[nxt[i]]:
                        r[i] = True
                        changed = True
        elif op == "globally":
            a = ev(g.args[0])
            r = list(a)
            changed = True
            while changed:
                changed = False
                for i in range(n):
                    if r[i] and not r[nxt[i]]:
                        r[i] = False
                        changed = True
        else:
            raise ValueError(f"operator {op!r} has no lasso semantics")
        memo[g] = r
        return r

    return ev(f)[position]
