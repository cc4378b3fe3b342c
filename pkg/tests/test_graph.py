import itertools
import random

import pytest

from ccmerge.graph import (
    CCEG,
    CyclicGraphError,
    NotEvaluable,
    create_cceg,
    dependencies,
    is_safety_witness,
    topological_sorts,
)
from ccmerge.lang import CCC, Atomic, CodeCall, Comparison, Constant, PathVar, RootVar
from ccmerge.parser import parse_ccc

EX21 = (
    'in(FinanceRec, rel.select(financeRel, date, "=", "11/15/99")) & '
    "FinanceRec.sales >= 10000 & "
    "in(C, excel.chart(excelFile, FinanceRec, day)) & "
    'in(Slide, ppt.include(C, "presentation.ppt"))'
)


def test_dependency_sales_filter():
    c = parse_ccc(EX21)
    deps = dependencies(c)
    assert (0, 1) in deps  # the sales filter needs FinanceRec
    assert (0, 2) in deps  # the chart call needs FinanceRec
    assert (1, 2) not in deps  # a filter binds nothing


def test_dependency_no_shared_vars():
    c = parse_ccc("in(X, d.f(1)) & in(Y, d.g(2))")
    assert dependencies(c) == frozenset()


def test_figure1_graph_exact():
    g = create_cceg(parse_ccc(EX21))
    assert isinstance(g, CCEG)
    assert g.edges == {(0, 1), (0, 2), (2, 3)}


def test_equality_conjunct_binds():
    c = parse_ccc('in(F, rel.select(FinRel, date, "=", d)) & FinRel = financeRel')
    g = create_cceg(c)
    assert isinstance(g, CCEG)
    assert (1, 0) in g.edges


def test_unbound_variable_not_evaluable():
    c = parse_ccc(
        'in(F, rel.select(financeRel, date, "=", d)) & in(C, excel.chart(ExcelFile, F, day))'
    )
    res = create_cceg(c)
    assert isinstance(res, NotEvaluable)
    assert res.stuck == (1,)


def test_single_ground_atomic():
    g = create_cceg(parse_ccc("in(X, d.f(1))"))
    assert isinstance(g, CCEG)
    assert g.edges == frozenset()


def test_witness_identity_and_reverse():
    c = parse_ccc(EX21)
    assert is_safety_witness(c, (0, 1, 2, 3))
    assert not is_safety_witness(c, (3, 2, 1, 0))


def test_witness_single_ground():
    c = parse_ccc("in(X, d.f(1))")
    assert is_safety_witness(c, (0,))


def test_topological_sorts_fig1():
    g = create_cceg(parse_ccc(EX21))
    sorts = set(topological_sorts(g))
    assert sorts == {(0, 1, 2, 3), (0, 2, 1, 3), (0, 2, 3, 1)}


def test_topological_sorts_edgeless_and_chain():
    g = create_cceg(parse_ccc("in(X, d.f(1)) & in(Y, d.g(2))"))
    assert set(topological_sorts(g)) == {(0, 1), (1, 0)}
    chain = create_cceg(parse_ccc("in(X, d.f(1)) & in(Y, d.g(X)) & in(Z, d.h(Y))"))
    assert list(topological_sorts(chain)) == [(0, 1, 2)]


def test_topological_sorts_cycle_error():
    g = CCEG(parse_ccc("in(X, d.f(1)) & in(Y, d.g(2))"), frozenset({(0, 1), (1, 0)}), frozenset())
    with pytest.raises(CyclicGraphError):
        list(topological_sorts(g))


def test_relaxed_mode_for_invariant_atoms():
    c = parse_ccc("in(X, rel.select(R, A, Op, V))")
    assert isinstance(create_cceg(c), NotEvaluable)
    assert isinstance(create_cceg(c, frozenset({"R", "A", "Op", "V"})), CCEG)


# --- randomized witness-theorem checks -------------------------------------


def random_evaluable_ccc(rng: random.Random, n: int) -> CCC:
    """Evaluable ccc where every root has a single producer."""
    conjs = []
    bound: list[str] = []
    fresh = iter(f"V{i}" for i in range(100))
    for _ in range(n):
        kind = rng.random()
        if kind < 0.62 or not bound:
            nargs = rng.randint(0, 2)
            args = []
            for _ in range(nargs):
                if bound and rng.random() < 0.6:
                    root = rng.choice(bound)
                    args.append(RootVar(root) if rng.random() < 0.7 else PathVar(root, ("a",)))
                else:
                    args.append(Constant(rng.randint(0, 5)))
            out = next(fresh)
            conjs.append(Atomic(RootVar(out), CodeCall("d", f"f{rng.randint(0, 3)}", tuple(args))))
            bound.append(out)
        elif kind < 0.85:
            # filter comparison over bound material
            root = rng.choice(bound)
            lhs = PathVar(root, ("a",)) if rng.random() < 0.5 else RootVar(root)
            rhs = Constant(rng.randint(0, 5)) if rng.random() < 0.7 else RootVar(rng.choice(bound))
            conjs.append(Comparison(lhs, rng.choice(["=", "<", ">", "<=", ">="]), rhs))
        else:
            # comparison that introduces a fresh root variable
            out = next(fresh)
            other = Constant(rng.randint(0, 5)) if rng.random() < 0.6 or not bound else RootVar(rng.choice(bound))
            conjs.append(Comparison(RootVar(out), rng.choice(["=", "<", "<="]), other))
            bound.append(out)
    order = list(range(n))
    rng.shuffle(order)
    return CCC(tuple(conjs[i] for i in order))


@pytest.mark.parametrize("seed", range(40))
def test_witness_theorem_small(seed):
    rng = random.Random(seed)
    c = random_evaluable_ccc(rng, rng.randint(1, 6))
    g = create_cceg(c)
    assert isinstance(g, CCEG), getattr(g, "describe", lambda: "")()
    sorts = set(topological_sorts(g))
    witnesses = {
        p for p in itertools.permutations(range(len(c))) if is_safety_witness(c, p)
    }
    assert sorts == witnesses


@pytest.mark.parametrize("seed", range(40))
def test_failure_iff_no_witness(seed):
    # Single-producer cccs whose references may point at later or never-bound
    # variables, so some are evaluable and some are not.
    rng = random.Random(1000 + seed)
    n = rng.randint(1, 5)
    pool = [f"V{i}" for i in range(n + 2)]  # the last two never get a producer
    ref_pool = pool
    conjs = []
    for i in range(n):
        mine = pool[i]  # this slot's unique producible variable
        roll = rng.random()
        if roll < 0.65:
            args = tuple(
                RootVar(rng.choice(ref_pool)) if rng.random() < 0.5 else Constant(rng.randint(0, 3))
                for _ in range(rng.randint(0, 2))
            )
            conjs.append(Atomic(RootVar(mine), CodeCall("d", "f", args)))
        elif roll < 0.85:
            conjs.append(Comparison(RootVar(mine), "=", Constant(rng.randint(0, 3))))
        else:
            # pure filter between a reference and a constant, binds nothing new
            conjs.append(Comparison(PathVar(rng.choice(ref_pool), ("a",)), "=", Constant(1)))
    c = CCC(tuple(conjs))
    has_witness = any(
        is_safety_witness(c, p) for p in itertools.permutations(range(len(c)))
    )
    built = create_cceg(c)
    if isinstance(built, NotEvaluable):
        assert not has_witness
    else:
        assert has_witness
