"""Concrete syntax for formulas.

Grammar (loosest binding first)::

    formula  := iff
    iff      := implies ( ("iff" | "<->") iff )?          right-assoc
    implies  := or ( ("implies" | "->") implies )?        right-assoc
    or       := and ( ("or" | "∨") and )*                 left-assoc
    and      := unary ( ("and" | "∧") unary )*            left-assoc
    unary    := ("not" | "¬") unary
              | ("forall" | "∀" | "exists" | "∃") IDENT [":"] formula
              | "(" formula ")"
              | IDENT "(" term ("," term)* ")"
    term     := IDENT | IDENT "(" term ("," term)* ")"

A quantifier's body extends as far right as possible, so
``forall x: exists y: P(x,y) and Q(y)`` quantifies the whole conjunction.
"""

from dataclasses import dataclass
from typing import List, Optional

from .errors import ArityError, KindError, LexError, ParseError, UnknownSymbol
from .logic import free_vars_of
from .syntax import And, Atom, Const, Exists, Forall, Func, Iff, Implies, Not, Or, Signature, Var

KEYWORDS = {
    "forall": "kw_forall",
    "exists": "kw_exists",
    "and": "kw_and",
    "or": "kw_or",
    "not": "kw_not",
    "implies": "kw_implies",
    "iff": "kw_iff",
}

SYMBOLS = [
    ("<->", "kw_iff"),
    ("->", "kw_implies"),
    ("↔", "kw_iff"),
    ("→", "kw_implies"),
    ("∀", "kw_forall"),
    ("∃", "kw_exists"),
    ("∧", "kw_and"),
    ("∨", "kw_or"),
    ("¬", "kw_not"),
    ("(", "lparen"),
    (")", "rparen"),
    (",", "comma"),
    (":", "colon"),
]


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    offset: int

    def __repr__(self):
        return f"{self.kind} {self.text}" if self.kind == "ident" else self.kind


def tokenize(text: str) -> List[Token]:
    """Split ``text`` into tokens. Offsets are character indices into ``text``."""
    tokens = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch.isascii() and ch.isalpha():
            j = i + 1
            while j < n and text[j].isascii() and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            tokens.append(Token(KEYWORDS.get(word, "ident"), word, i))
            i = j
            continue
        for sym, kind in SYMBOLS:
            if text.startswith(sym, i):
                tokens.append(Token(kind, sym, i))
                i += len(sym)
                break
        else:
            raise LexError(f"unexpected character {ch!r}", i, text)
    return tokens



class _Parser:
    def __init__(self, tokens: List[Token], sig: Optional[Signature], text: Optional[str]):
        self.tokens = tokens
        self.sig = sig
        self.text = text
        self.pos = 0
        self.end = len(text) if text is not None else (tokens[-1].offset + len(tokens[-1].text) if tokens else 0)

    def peek(self) -> Optional[Token]:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def offset(self) -> int:
        tok = self.peek()
        return tok.offset if tok else self.end

    def describe(self) -> str:
        tok = self.peek()
        return "end of input" if tok is None else repr(tok.text)

    def accept(self, kind: str) -> Optional[Token]:
        tok = self.peek()
        if tok is not None and tok.kind == kind:
            self.pos += 1
            return tok
        return None

    def expect(self, kind: str, what: str) -> Token:
        tok = self.accept(kind)
        if tok is None:
            raise ParseError(f"expected {what} but found {self.describe()}", self.offset(), self.text)
        return tok

    # formulas

    def formula(self):
        return self.iff()

    def iff(self):
        left = self.implies()
        if self.accept("kw_iff"):
            return Iff(left, self.iff())
        return left

    def implies(self):
        left = self.disjunction()
        if self.accept("kw_implies"):
            return Implies(left, self.implies())
        return left

    def disjunction(self):
        left = self.conjunction()
        while self.accept("kw_or"):
            left = Or(left, self.conjunction())
        return left

    def conjunction(self):
        left = self.unary()
        while self.accept("kw_and"):
            left = And(left, self.unary())
        return left

    def unary(self):
        if self.accept("kw_not"):
            return Not(self.unary())
        tok = self.peek()
        if tok is not None and tok.kind in ("kw_forall", "kw_exists"):
            self.pos += 1
            var = self.expect("ident", "a variable after the quantifier")
            self._check_quantified(var)
            self.accept("colon")
            body = self.formula()
            return Forall(var.text, body) if tok.kind == "kw_forall" else Exists(var.text, body)
        if self.accept("lparen"):
            inner = self.formula()
            self.expect("rparen", "')'")
            return inner
        if tok is None or tok.kind != "ident":
            raise ParseError(f"expected a formula but found {self.describe()}", self.offset(), self.text)
        return self.atom()

    def _check_quantified(self, tok: Token):
        if self.sig is None:
            return
        kind = self.sig.kind_of(tok.text)
        if kind is None:
            raise UnknownSymbol(f"unknown symbol {tok.text!r}", tok.offset, self.text)
        if kind != "variable":
            raise KindError(f"cannot quantify over {kind} {tok.text!r}", tok.offset, self.text)

    def atom(self):
        tok = self.expect("ident", "a predicate")
        if self.sig is not None:
            kind = self.sig.kind_of(tok.text)
            if kind is None:
                raise UnknownSymbol(f"unknown symbol {tok.text!r}", tok.offset, self.text)
            if kind != "predicate":
                raise KindError(f"{kind} {tok.text!r} used where a predicate is expected", tok.offset, self.text)
        self.expect("lparen", f"'(' after predicate {tok.text!r}")
        args = self.arguments()
        if self.sig is not None and len(args) != self.sig.predicates[tok.text]:
            raise ArityError(
                f"predicate {tok.text!r} takes {self.sig.predicates[tok.text]} argument(s), got {len(args)}",
                tok.offset,
                self.text,
            )
        return Atom(tok.text, args)

    def arguments(self):
        args = [self.term()]
        while self.accept("comma"):
            args.append(self.term())
        self.expect("rparen", "',' or ')'")
        return tuple(args)

    # terms

    def term(self):
        tok = self.expect("ident", "a term")
        applied = self.accept("lparen") is not None
        kind = self.sig.kind_of(tok.text) if self.sig is not None else None
        if self.sig is not None and kind is None:
            raise UnknownSymbol(f"unknown symbol {tok.text!r}", tok.offset, self.text)
        if applied:
            if self.sig is not None and kind != "function":
                raise KindError(f"{kind} {tok.text!r} used as a function", tok.offset, self.text)
            args = self.arguments()
            if self.sig is not None and len(args) != self.sig.functions[tok.text]:
                raise ArityError(
                    f"function {tok.text!r} takes {self.sig.functions[tok.text]} argument(s), got {len(args)}",
                    tok.offset,
                    self.text,
                )
            return Func(tok.text, args)
        if kind == "constant":
            return Const(tok.text)
        if kind in ("function", "predicate"):
            raise KindError(f"{kind} {tok.text!r} used without arguments", tok.offset, self.text)
        return Var(tok.text)


def parse_formula(tokens: List[Token], sig: Optional[Signature] = None, text: Optional[str] = None):
    """Parse a token list into a formula AST, validating against ``sig`` if given.

    Without a signature, bare identifiers in term position become variables.
    """
    p = _Parser(tokens, sig, text)
    ast = p.formula()
    if p.peek() is not None:
        raise ParseError(f"unexpected {p.describe()} after complete formula", p.offset(), text)
    return ast


def parse(text: str, sig: Optional[Signature] = None):
    return parse_formula(tokenize(text), sig, text)


# pretty printing

_PREC = {Iff: 1, Implies: 2, Or: 3, And: 4, Not: 5, Atom: 6, Forall: 0, Exists: 0}
_OPS = {Iff: "iff", Implies: "implies", Or: "or", And: "and"}
_RIGHT_ASSOC = (Iff, Implies)


def _term(t) -> str:
    if isinstance(t, (Var, Const)):
        return t.label
    return f"{t.name}({', '.join(_term(a) for a in t.args)})"


def _fmt(f, tail: bool) -> str:
    cls = type(f)
    if cls is Atom:
        return f"{f.pred}({', '.join(_term(a) for a in f.args)})"
    if cls in (Forall, Exists):
        kw = "forall" if cls is Forall else "exists"
        return f"{kw} {f.var}: {_fmt(f.f, True)}"
    if cls is Not:
        return "not " + _child(f.f, 5, tail, bare_equal=True)
    prec = _PREC[cls]
    right_assoc = cls in _RIGHT_ASSOC
    left = _child(f.f, prec, False, bare_equal=not right_assoc)
    right = _child(f.g, prec, tail, bare_equal=right_assoc)
    return f"{left} {_OPS[cls]} {right}"


def _child(f, prec: int, tail: bool, bare_equal: bool) -> str:
    cp = _PREC[type(f)]
    if cp == 0:
        needs = not tail
    else:
        needs = cp < prec or (cp == prec and not bare_equal)
    return f"({_fmt(f, True)})" if needs else _fmt(f, tail)


def pretty_print(ast) -> str:
    """Render with the fewest parentheses that still parse back to ``ast``."""
    if isinstance(ast, (Var, Const, Func)):
        return _term(ast)
    return _fmt(ast, True)


def validate_closed(ast, sig: Optional[Signature] = None) -> List[str]:
    """Free variables of ``ast`` in first-appearance order; empty iff closed."""
    return free_vars_of(ast)
