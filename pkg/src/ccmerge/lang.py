"""Core term language: code calls, code call conditions, invariant expressions.

Everything here is an immutable value; operations are pure functions.
"""

from __future__ import annotations

import datetime
import re
from dataclasses import dataclass, field
from typing import Iterator, Union

NUM = "num"
STR = "str"
DATE = "date"

_BARE_SYMBOL = re.compile(r"[a-z_][A-Za-z0-9_']*\Z")
_ISO_DATE = re.compile(r"\d{4}-\d{2}-\d{2}\Z")

COMPARE_OPS = ("=", "<", ">", "<=", ">=")


class LangError(Exception):
    """Base error for language-level problems."""


class SubstitutionError(LangError):
    """Raised when a substitution cannot be applied (e.g. field access on a constant)."""


class KindError(LangError):
    """Raised when values of incompatible kinds are compared."""


def value_kind(value) -> str:
    if isinstance(value, bool):
        raise KindError("booleans are not constant values")
    if isinstance(value, (int, float)):
        return NUM
    if isinstance(value, str):
        return STR
    if isinstance(value, datetime.date):
        return DATE
    raise KindError(f"unsupported constant value {value!r}")


@dataclass(frozen=True)
class Constant:
    value: Union[int, float, str, datetime.date]
    quoted: bool = False

    @property
    def kind(self) -> str:
        return value_kind(self.value)

    def __str__(self) -> str:
        v = self.value
        if isinstance(v, datetime.date):
            return f'"{v.isoformat()}"'
        if isinstance(v, str):
            if not self.quoted and _BARE_SYMBOL.match(v):
                return v
            return f'"{v}"'
        return repr(v)


@dataclass(frozen=True)
class RootVar:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class PathVar:
    root: str
    path: tuple[str, ...]

    def __post_init__(self):
        if not self.path:
            raise LangError("path variable needs at least one field segment")

    def __str__(self) -> str:
        return ".".join((self.root,) + self.path)


Term = Union[Constant, RootVar, PathVar]


def is_var(t: Term) -> bool:
    return isinstance(t, (RootVar, PathVar))


def term_root(t: Term) -> str | None:
    """Root variable name of a term, or None for constants."""
    if isinstance(t, RootVar):
        return t.name
    if isinstance(t, PathVar):
        return t.root
    return None


@dataclass(frozen=True)
class CodeCall:
    domain: str
    function: str
    args: tuple[Term, ...]

    def __str__(self) -> str:
        inner = ", ".join(str(a) for a in self.args)
        return f"{self.domain}.{self.function}({inner})"

    def arg_roots(self) -> frozenset[str]:
        return frozenset(r for a in self.args if (r := term_root(a)) is not None)


@dataclass(frozen=True)
class Atomic:
    """Membership conjunct: in(out, domain.function(args))."""

    out: Term
    call: CodeCall

    def __str__(self) -> str:
        return f"in({self.out}, {self.call})"


@dataclass(frozen=True)
class Comparison:
    lhs: Term
    op: str
    rhs: Term

    def __post_init__(self):
        if self.op not in COMPARE_OPS:
            raise LangError(f"unknown comparison operator {self.op!r}")

    def __str__(self) -> str:
        return f"{self.lhs} {self.op} {self.rhs}"


Conjunct = Union[Atomic, Comparison]


@dataclass(frozen=True)
class CCC:
    """A code call condition: an ordered, non-empty conjunction."""

    conjuncts: tuple[Conjunct, ...]

    def __post_init__(self):
        if not self.conjuncts:
            raise LangError("a code call condition needs at least one conjunct")

    def __len__(self) -> int:
        return len(self.conjuncts)

    def __getitem__(self, i: int) -> Conjunct:
        return self.conjuncts[i]

    def __str__(self) -> str:
        return " & ".join(str(c) for c in self.conjuncts)


def conjunct_roots(c: Conjunct) -> frozenset[str]:
    """Roots of every variable occurring anywhere in the conjunct."""
    if isinstance(c, Atomic):
        roots = set(c.call.arg_roots())
        r = term_root(c.out)
        if r is not None:
            roots.add(r)
        return frozenset(roots)
    return frozenset(r for t in (c.lhs, c.rhs) if (r := term_root(t)) is not None)


def conjunct_terms(c: Conjunct) -> tuple[Term, ...]:
    if isinstance(c, Atomic):
        return (c.out,) + c.call.args
    return (c.lhs, c.rhs)


def ccc_roots(c: CCC) -> frozenset[str]:
    out: set[str] = set()
    for cj in c.conjuncts:
        out |= conjunct_roots(cj)
    return frozenset(out)


def produced_roots(c: CCC) -> frozenset[str]:
    """Roots bound by an atomic conjunct's output variable."""
    return frozenset(
        cj.out.name for cj in c.conjuncts if isinstance(cj, Atomic) and isinstance(cj.out, RootVar)
    )


def base_roots(c: CCC) -> frozenset[str]:
    """Roots no conjunct produces; they must be supplied by an assignment."""
    produced = produced_roots(c)
    # Root variables that occur only as comparison sides also count as
    # introducible, not base: a comparison with a constant side can bind them.
    introducible = set(produced)
    for cj in c.conjuncts:
        if isinstance(cj, Comparison):
            for t in (cj.lhs, cj.rhs):
                if isinstance(t, RootVar):
                    introducible.add(t.name)
    return frozenset(ccc_roots(c) - introducible)


# --- Invariant expressions ------------------------------------------------


@dataclass(frozen=True)
class IEAtom:
    ccc: CCC

    def __str__(self) -> str:
        return str(self.ccc)


@dataclass(frozen=True)
class IEUnion:
    left: "IE"
    right: "IE"

    def __str__(self) -> str:
        return f"({self.left} UNION {self.right})"


@dataclass(frozen=True)
class IEIntersect:
    left: "IE"
    right: "IE"

    def __str__(self) -> str:
        return f"({self.left} INTERSECT {self.right})"


IE = Union[IEAtom, IEUnion, IEIntersect]


def ie_atoms(ie: IE) -> Iterator[IEAtom]:
    if isinstance(ie, IEAtom):
        yield ie
    else:
        yield from ie_atoms(ie.left)
        yield from ie_atoms(ie.right)


def ie_atom_count(ie: IE) -> int:
    return sum(1 for _ in ie_atoms(ie))


def ie_roots(ie: IE) -> frozenset[str]:
    out: set[str] = set()
    for a in ie_atoms(ie):
        out |= ccc_roots(a.ccc)
    return frozenset(out)


def ie_base_roots(ie: IE) -> frozenset[str]:
    out: set[str] = set()
    for a in ie_atoms(ie):
        out |= base_roots(a.ccc)
    return frozenset(out)


# --- Invariant conditions ---------------------------------------------------


@dataclass(frozen=True)
class IcAtom:
    lhs: Term
    op: str
    rhs: Term

    def __post_init__(self):
        if self.op not in COMPARE_OPS:
            raise LangError(f"unknown condition operator {self.op!r}")

    def __str__(self) -> str:
        return f"{self.lhs} {self.op} {self.rhs}"


@dataclass(frozen=True)
class IcAnd:
    left: "IC"
    right: "IC"

    def __str__(self) -> str:
        return f"({self.left} & {self.right})"


@dataclass(frozen=True)
class IcOr:
    left: "IC"
    right: "IC"

    def __str__(self) -> str:
        return f"({self.left} | {self.right})"


@dataclass(frozen=True)
class IcTrue:
    def __str__(self) -> str:
        return "true"


@dataclass(frozen=True)
class IcFalse:
    def __str__(self) -> str:
        return "false"


IC = Union[IcAtom, IcAnd, IcOr, IcTrue, IcFalse]

TRUE = IcTrue()
FALSE = IcFalse()


def ic_atoms(ic: IC) -> Iterator[IcAtom]:
    if isinstance(ic, IcAtom):
        yield ic
    elif isinstance(ic, (IcAnd, IcOr)):
        yield from ic_atoms(ic.left)
        yield from ic_atoms(ic.right)


def ic_roots(ic: IC) -> frozenset[str]:
    out: set[str] = set()
    for a in ic_atoms(ic):
        for t in (a.lhs, a.rhs):
            r = term_root(t)
            if r is not None:
                out.add(r)
    return frozenset(out)


EQ = "EQ"
SUBSETEQ = "SUBSETEQ"


@dataclass(frozen=True)
class Invariant:
    """Conditional set relation between two invariant expressions."""

    cond: IC
    lhs: IE
    rel: str
    rhs: IE

    def __post_init__(self):
        if self.rel not in (EQ, SUBSETEQ):
            raise LangError(f"unknown invariant relation {self.rel!r}")

    def __str__(self) -> str:
        return f"{self.cond} ==> {self.lhs} {self.rel} {self.rhs}"

    @property
    def simple(self) -> bool:
        return isinstance(self.lhs, IEAtom) and isinstance(self.rhs, IEAtom)

    @property
    def ordinary(self) -> bool:
        def conj_only(ic: IC) -> bool:
            if isinstance(ic, (IcAtom, IcTrue)):
                return True
            if isinstance(ic, IcAnd):
                return conj_only(ic.left) and conj_only(ic.right)
            return False

        return conj_only(self.cond)

    def base_roots(self) -> frozenset[str]:
        return ie_base_roots(self.lhs) | ie_base_roots(self.rhs)

    def variables(self) -> frozenset[str]:
        return ie_roots(self.lhs) | ie_roots(self.rhs) | ic_roots(self.cond)


# --- Substitutions ----------------------------------------------------------

Substitution = dict[str, Term]


def subst_term(t: Term, sub: Substitution) -> Term:
    if isinstance(t, Constant):
        return t
    if isinstance(t, RootVar):
        return sub.get(t.name, t)
    target = sub.get(t.root)
    if target is None:
        return t
    if isinstance(target, RootVar):
        return PathVar(target.name, t.path)
    if isinstance(target, PathVar):
        return PathVar(target.root, target.path + t.path)
    raise SubstitutionError(f"cannot take field {'.'.join(t.path)} of constant {target}")


def subst_conjunct(c: Conjunct, sub: Substitution) -> Conjunct:
    if isinstance(c, Atomic):
        return Atomic(
            subst_term(c.out, sub),
            CodeCall(c.call.domain, c.call.function, tuple(subst_term(a, sub) for a in c.call.args)),
        )
    return Comparison(subst_term(c.lhs, sub), c.op, subst_term(c.rhs, sub))


def subst_ccc(c: CCC, sub: Substitution) -> CCC:
    return CCC(tuple(subst_conjunct(cj, sub) for cj in c.conjuncts))


def subst_ie(ie: IE, sub: Substitution) -> IE:
    if isinstance(ie, IEAtom):
        return IEAtom(subst_ccc(ie.ccc, sub))
    cls = IEUnion if isinstance(ie, IEUnion) else IEIntersect
    return cls(subst_ie(ie.left, sub), subst_ie(ie.right, sub))


def subst_ic(ic: IC, sub: Substitution) -> IC:
    if isinstance(ic, IcAtom):
        return IcAtom(subst_term(ic.lhs, sub), ic.op, subst_term(ic.rhs, sub))
    if isinstance(ic, IcAnd):
        return IcAnd(subst_ic(ic.left, sub), subst_ic(ic.right, sub))
    if isinstance(ic, IcOr):
        return IcOr(subst_ic(ic.left, sub), subst_ic(ic.right, sub))
    return ic


def subst_invariant(inv: Invariant, sub: Substitution) -> Invariant:
    return Invariant(subst_ic(inv.cond, sub), subst_ie(inv.lhs, sub), inv.rel, subst_ie(inv.rhs, sub))


def apply_subst(x, sub: Substitution):
    """Apply a substitution to any term-bearing value."""
    if isinstance(x, (Constant, RootVar, PathVar)):
        return subst_term(x, sub)
    if isinstance(x, (Atomic, Comparison)):
        return subst_conjunct(x, sub)
    if isinstance(x, CCC):
        return subst_ccc(x, sub)
    if isinstance(x, (IEAtom, IEUnion, IEIntersect)):
        return subst_ie(x, sub)
    if isinstance(x, (IcAtom, IcAnd, IcOr, IcTrue, IcFalse)):
        return subst_ic(x, sub)
    if isinstance(x, Invariant):
        return subst_invariant(x, sub)
    raise LangError(f"cannot substitute into {type(x).__name__}")


def compose(sub: Substitution, binding: Substitution) -> Substitution:
    """Compose so that applying the result equals applying sub then binding."""
    out = {v: subst_term(t, binding) for v, t in sub.items()}
    for v, t in binding.items():
        if v not in out:
            out[v] = t
    return {v: t for v, t in out.items() if not (isinstance(t, RootVar) and t.name == v)}


# --- Unification ------------------------------------------------------------

_Eq = tuple  # pairs to unify


def _occurs(name: str, t: Term) -> bool:
    return term_root(t) == name


def _unify_terms(eqs: list[_Eq], sub: Substitution) -> Substitution | None:
    while eqs:
        a, b = eqs.pop()
        a = subst_term(a, sub)
        b = subst_term(b, sub)
        if a == b:
            continue
        if isinstance(a, RootVar):
            if _occurs(a.name, b):
                return None
            binding = {a.name: b}
        elif isinstance(b, RootVar):
            if _occurs(b.name, a):
                return None
            binding = {b.name: a}
        elif isinstance(a, PathVar) and isinstance(b, PathVar) and a.path == b.path:
            eqs.append((RootVar(a.root), RootVar(b.root)))
            continue
        else:
            return None
        for k, v in sub.items():
            sub[k] = subst_term(v, binding)
        sub.update(binding)
    return sub


def _call_eqs(a: CodeCall, b: CodeCall) -> list[_Eq] | None:
    if a.domain != b.domain or a.function != b.function or len(a.args) != len(b.args):
        return None
    return list(zip(a.args, b.args))


def _conjunct_eqs(a: Conjunct, b: Conjunct) -> list[_Eq] | None:
    if isinstance(a, Atomic) and isinstance(b, Atomic):
        eqs = _call_eqs(a.call, b.call)
        if eqs is None:
            return None
        return eqs + [(a.out, b.out)]
    if isinstance(a, Comparison) and isinstance(b, Comparison) and a.op == b.op:
        return [(a.lhs, b.lhs), (a.rhs, b.rhs)]
    return None


def _collect_eqs(a, b) -> list[_Eq] | None:
    if isinstance(a, (Constant, RootVar, PathVar)) and isinstance(b, (Constant, RootVar, PathVar)):
        return [(a, b)]
    if isinstance(a, CCC) and isinstance(b, CCC):
        if len(a) != len(b):
            return None
        eqs: list[_Eq] = []
        for x, y in zip(a.conjuncts, b.conjuncts):
            sub_eqs = _conjunct_eqs(x, y)
            if sub_eqs is None:
                return None
            eqs.extend(sub_eqs)
        return eqs
    if isinstance(a, IEAtom) and isinstance(b, IEAtom):
        return _collect_eqs(a.ccc, b.ccc)
    if (isinstance(a, IEUnion) and isinstance(b, IEUnion)) or (
        isinstance(a, IEIntersect) and isinstance(b, IEIntersect)
    ):
        left = _collect_eqs(a.left, b.left)
        right = _collect_eqs(a.right, b.right)
        if left is None or right is None:
            return None
        return left + right
    return None


def unify(a, b, *extra_pairs) -> Substitution | None:
    """Most general unifier of two terms, cccs or invariant expressions.

    Extra pairs may be given to solve a joint unification problem; returns
    None when no unifier exists.
    """
    eqs = _collect_eqs(a, b)
    if eqs is None:
        return None
    for x, y in extra_pairs:
        more = _collect_eqs(x, y)
        if more is None:
            return None
        eqs.extend(more)
    return _unify_terms(eqs, {})


# --- Sub code call conditions -----------------------------------------------


def sub_cccs(c: CCC, max_len: int | None = None) -> Iterator[tuple[int, CCC]]:
    """Yield (bitmask, sub-ccc) for every non-empty index subset, mask ascending."""
    n = len(c)
    for mask in range(1, 1 << n):
        if max_len is not None and mask.bit_count() > max_len:
            continue
        picked = tuple(c.conjuncts[i] for i in range(n) if mask >> i & 1)
        yield mask, CCC(picked)


def mask_indices(mask: int) -> tuple[int, ...]:
    out = []
    i = 0
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return tuple(out)


def ccc_from_mask(c: CCC, mask: int) -> CCC:
    return CCC(tuple(c.conjuncts[i] for i in mask_indices(mask)))


def rename_apart(
    value,
    avoid: frozenset[str] | set[str],
    suffix: str = "_r",
):
    """Rename the value's variables so they avoid a set of names."""
    if isinstance(value, Invariant):
        names = value.variables()
    elif isinstance(value, CCC):
        names = ccc_roots(value)
    else:
        names = ie_roots(value)
    sub: Substitution = {}
    taken = set(avoid) | set(names)
    for name in sorted(names):
        if name in avoid:
            k = 1
            new = f"{name}{suffix}{k}"
            while new in taken:
                k += 1
                new = f"{name}{suffix}{k}"
            taken.add(new)
            sub[name] = RootVar(new)
    return apply_subst(value, sub) if sub else value
