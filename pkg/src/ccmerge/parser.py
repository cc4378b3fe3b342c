"""Parser for the ccc / invariant text format.

One ccc or invariant per line; `#` starts a comment.  Chained equalities in
invariant conditions (`Op = Op' = "<="`) are sugar for pairwise conjunction.
"""

from __future__ import annotations

import datetime
import re
from dataclasses import dataclass, field

from .lang import (
    CCC,
    EQ,
    FALSE,
    SUBSETEQ,
    TRUE,
    Atomic,
    CodeCall,
    Comparison,
    Constant,
    IC,
    IE,
    IEAtom,
    IEIntersect,
    IEUnion,
    IcAnd,
    IcAtom,
    IcOr,
    Invariant,
    PathVar,
    RootVar,
    Term,
    _ISO_DATE,
    ic_roots,
)


class ParseError(Exception):
    def __init__(self, message: str, line: int = 1, column: int = 1):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<arrow>==>)
  | (?P<op><=|>=|=|<|>)
  | (?P<number>-?\d+\.\d+|-?\d+)
  | (?P<string>"[^"]*")
  | (?P<ident>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<punct>[(),.&|])
    """,
    re.VERBOSE,
)


@dataclass
class Token:
    kind: str
    text: str
    line: int
    column: int


def tokenize(text: str, line_no: int = 1) -> list[Token]:
    tokens: list[Token] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line_no, pos + 1)
        kind = m.lastgroup or ""
        if kind != "ws":
            tokens.append(Token(kind, m.group(), line_no, pos + 1))
        pos = m.end()
    tokens.append(Token("eof", "", line_no, pos + 1))
    return tokens


@dataclass
class ArityRegistry:
    """Tracks the arity of each (domain, function) seen in a run."""

    seen: dict[tuple[str, str], int] = field(default_factory=dict)

    def check(self, domain: str, function: str, arity: int, tok: Token) -> None:
        key = (domain, function)
        known = self.seen.setdefault(key, arity)
        if known != arity:
            raise ParseError(
                f"{domain}.{function} used with {arity} argument(s), previously {known}",
                tok.line,
                tok.column,
            )


def _constant_from_tokens(tok: Token) -> Constant:
    if tok.kind == "number":
        text = tok.text
        return Constant(float(text) if "." in text else int(text))
    if tok.kind == "string":
        inner = tok.text[1:-1]
        if _ISO_DATE.match(inner):
            return Constant(datetime.date.fromisoformat(inner))
        return Constant(inner, quoted=True)
    raise AssertionError(tok)


def _is_variable_name(name: str) -> bool:
    return name[0].isupper()


class _Parser:
    def __init__(self, tokens: list[Token], registry: ArityRegistry | None):
        self.tokens = tokens
        self.idx = 0
        self.registry = registry

    # -- token helpers

    def peek(self, ahead: int = 0) -> Token:
        return self.tokens[min(self.idx + ahead, len(self.tokens) - 1)]

    def next(self) -> Token:
        tok = self.tokens[self.idx]
        if tok.kind != "eof":
            self.idx += 1
        return tok

    def expect(self, text: str) -> Token:
        tok = self.next()
        if tok.text != text:
            got = tok.text or "end of input"
            raise ParseError(f"expected {text!r}, found {got!r}", tok.line, tok.column)
        return tok

    def fail(self, message: str) -> ParseError:
        tok = self.peek()
        return ParseError(message, tok.line, tok.column)

    # -- terms

    def parse_term(self) -> Term:
        tok = self.next()
        if tok.kind in ("number", "string"):
            return _constant_from_tokens(tok)
        if tok.kind == "ident":
            segments = [tok.text]
            while self.peek().text == "." and self.peek(1).kind == "ident" and self.peek(2).text != "(":
                self.next()
                segments.append(self.next().text)
            head = segments[0]
            if len(segments) == 1:
                if _is_variable_name(head):
                    return RootVar(head)
                return Constant(head)
            if not _is_variable_name(head):
                raise ParseError(
                    f"field path on constant {head!r}", tok.line, tok.column
                )
            return PathVar(head, tuple(segments[1:]))
        got = tok.text or "end of input"
        raise ParseError(f"expected a term, found {got!r}", tok.line, tok.column)

    # -- conjuncts / cccs

    def parse_conjunct(self):
        tok = self.peek()
        if tok.text == "in" and self.peek(1).text == "(":
            self.next()
            self.expect("(")
            out = self.parse_term()
            if isinstance(out, Constant):
                raise ParseError("membership output must be a variable", tok.line, tok.column)
            self.expect(",")
            dom_tok = self.next()
            if dom_tok.kind != "ident":
                raise ParseError("expected a data source name", dom_tok.line, dom_tok.column)
            self.expect(".")
            fun_tok = self.next()
            if fun_tok.kind != "ident":
                raise ParseError("expected a function name", fun_tok.line, fun_tok.column)
            self.expect("(")
            args: list[Term] = []
            if self.peek().text != ")":
                args.append(self.parse_term())
                while self.peek().text == ",":
                    self.next()
                    args.append(self.parse_term())
            self.expect(")")
            self.expect(")")
            if self.registry is not None:
                self.registry.check(dom_tok.text, fun_tok.text, len(args), fun_tok)
            return Atomic(out, CodeCall(dom_tok.text, fun_tok.text, tuple(args)))
        lhs = self.parse_term()
        op_tok = self.next()
        if op_tok.kind != "op":
            got = op_tok.text or "end of input"
            raise ParseError(f"expected a comparison operator, found {got!r}", op_tok.line, op_tok.column)
        rhs = self.parse_term()
        self._check_kinds(lhs, op_tok, rhs)
        return Comparison(lhs, op_tok.text, rhs)

    @staticmethod
    def _check_kinds(lhs: Term, op_tok: Token, rhs: Term) -> None:
        if isinstance(lhs, Constant) and isinstance(rhs, Constant) and lhs.kind != rhs.kind:
            raise ParseError(
                f"cannot compare {lhs.kind} with {rhs.kind}", op_tok.line, op_tok.column
            )

    def parse_ccc(self) -> CCC:
        conjuncts = [self.parse_conjunct()]
        while self.peek().text == "&":
            self.next()
            conjuncts.append(self.parse_conjunct())
        return CCC(tuple(conjuncts))

    # -- invariant expressions

    def parse_ie(self) -> IE:
        # A ccc can never start with "(", so a paren always opens a compound.
        if self.peek().text == "(":
            self.next()
            left = self.parse_ie()
            tok = self.next()
            if tok.text not in ("UNION", "INTERSECT"):
                got = tok.text or "end of input"
                raise ParseError(f"expected UNION or INTERSECT, found {got!r}", tok.line, tok.column)
            right = self.parse_ie()
            self.expect(")")
            return IEUnion(left, right) if tok.text == "UNION" else IEIntersect(left, right)
        return IEAtom(self.parse_ccc())

    # -- invariant conditions

    def parse_cond_atom(self) -> IC:
        lhs = self.parse_term()
        op_tok = self.next()
        if op_tok.kind != "op":
            got = op_tok.text or "end of input"
            raise ParseError(f"expected a condition operator, found {got!r}", op_tok.line, op_tok.column)
        rhs = self.parse_term()
        self._check_kinds(lhs, op_tok, rhs)
        atom: IC = IcAtom(lhs, op_tok.text, rhs)
        # Chained equality sugar: a = b = c.
        while op_tok.text == "=" and self.peek().text == "=":
            eq_tok = self.next()
            nxt = self.parse_term()
            self._check_kinds(rhs, eq_tok, nxt)
            atom = IcAnd(atom, IcAtom(rhs, "=", nxt))
            rhs = nxt
        return atom

    def parse_cond(self) -> IC:
        left = self.parse_cond_unit()
        while self.peek().text in ("&", "|"):
            op = self.next().text
            right = self.parse_cond_unit()
            left = IcAnd(left, right) if op == "&" else IcOr(left, right)
        return left

    def parse_cond_unit(self) -> IC:
        if self.peek().text == "(":
            self.next()
            inner = self.parse_cond()
            self.expect(")")
            return inner
        if self.peek().text == "true":
            self.next()
            return TRUE
        if self.peek().text == "false":
            self.next()
            return FALSE
        return self.parse_cond_atom()

    def parse_invariant(self) -> Invariant:
        cond = self.parse_cond()
        self.expect("==>")
        lhs = self.parse_ie()
        rel_tok = self.next()
        if rel_tok.text not in (EQ, SUBSETEQ):
            got = rel_tok.text or "end of input"
            raise ParseError(f"expected EQ or SUBSETEQ, found {got!r}", rel_tok.line, rel_tok.column)
        rhs = self.parse_ie()
        inv = Invariant(cond, lhs, rel_tok.text, rhs)
        extra = ic_roots(cond) - inv.base_roots()
        if extra:
            names = ", ".join(sorted(extra))
            raise ParseError(
                f"condition variable(s) {names} do not occur as base variables of either side",
                rel_tok.line,
                rel_tok.column,
            )
        return inv

    def check_done(self) -> None:
        tok = self.peek()
        if tok.kind != "eof":
            raise ParseError(f"unexpected trailing input {tok.text!r}", tok.line, tok.column)


def parse_ccc(text: str, registry: ArityRegistry | None = None, line_no: int = 1) -> CCC:
    p = _Parser(tokenize(text, line_no), registry)
    ccc = p.parse_ccc()
    p.check_done()
    return ccc


def parse_invariant(text: str, registry: ArityRegistry | None = None, line_no: int = 1) -> Invariant:
    p = _Parser(tokenize(text, line_no), registry)
    inv = p.parse_invariant()
    p.check_done()
    return inv


def parse_ie(text: str, registry: ArityRegistry | None = None, line_no: int = 1) -> IE:
    p = _Parser(tokenize(text, line_no), registry)
    ie = p.parse_ie()
    p.check_done()
    return ie


def _content_lines(text: str):
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield i, line


def parse_ccc_file(text: str, registry: ArityRegistry | None = None) -> list[CCC]:
    registry = registry if registry is not None else ArityRegistry()
    return [parse_ccc(line, registry, i) for i, line in _content_lines(text)]


def parse_invariant_file(text: str, registry: ArityRegistry | None = None) -> list[Invariant]:
    registry = registry if registry is not None else ArityRegistry()
    return [parse_invariant(line, registry, i) for i, line in _content_lines(text)]
