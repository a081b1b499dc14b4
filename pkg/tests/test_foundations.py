import itertools
import random

import pytest

from tgfd.errors import ArityMismatch
from tgfd.foundations import (
    all_embeddings,
    axiom_check,
    check_implication,
    check_satisfiability,
    closure_for_implication,
    find_embedding,
    intervals_contain,
    runs_to_intervals,
)
from tgfd.model import (
    ConstantLiteral,
    Delta,
    GraphPattern,
    Tgfd,
    VariableLiteral,
)

from util import random_pattern


def pat(nodes, edges):
    return GraphPattern(nodes, edges)


BASE = pat(
    [("x", "patient"), ("y", "medication"), ("w", "dosage")],
    [("x", "prescribed", "y"), ("y", "dose", "w")],
)
BIGGER = pat(
    [("x", "patient"), ("y", "medication"), ("w", "dosage"), ("r", "symptom")],
    [("x", "prescribed", "y"), ("y", "dose", "w"), ("x", "shows", "r")],
)


# ---------------------------------------------------------------------------
# intervals
# ---------------------------------------------------------------------------


def test_runs_to_intervals():
    assert runs_to_intervals([0, 1, 2, 4]) == ((0, 2), (4, 4))
    assert runs_to_intervals([]) == ()
    assert intervals_contain(((0, 4),), Delta(1, 3)) == (0, 4)
    assert intervals_contain(((0, 2), (4, 6)), Delta(1, 5)) is None


# ---------------------------------------------------------------------------
# embedding
# ---------------------------------------------------------------------------


def test_embedding_identity():
    f = find_embedding(BASE, BASE)
    assert f is not None
    assert f.mapping == {"x": "x", "y": "y", "w": "w"}


def test_embedding_into_augmented_pattern():
    assert find_embedding(BASE, BIGGER) is not None
    assert find_embedding(BIGGER, BASE) is None


def test_embedding_wildcard_rule():
    small = pat([("a", "_")], [])
    big = pat([("b", "anything")], [])
    assert find_embedding(small, big) is not None
    # a labeled node never maps onto a wildcard
    small2 = pat([("a", "thing")], [])
    big2 = pat([("b", "_")], [])
    assert find_embedding(small2, big2) is None


def brute_embeddings(q_small, q_big):
    small = sorted(q_small.vars)
    out = []
    for combo in itertools.permutations(sorted(q_big.vars), len(small)):
        m = dict(zip(small, combo))
        ok = all(
            q_small.label_of(v) == "_" or q_small.label_of(v) == q_big.label_of(m[v])
            for v in small
        )
        if ok and all(
            (m[s], l, m[d]) in set(q_big.edges) for (s, l, d) in q_small.edges
        ):
            out.append(tuple(sorted(m.items())))
    return set(out)


def test_embedding_agrees_with_brute_force():
    for seed in range(25):
        rng = random.Random(seed)
        a = random_pattern(rng, 3)
        b = random_pattern(rng, 4)
        got = {e.items for e in all_embeddings(a, b)}
        assert got == brute_embeddings(a, b), f"seed={seed}"


# ---------------------------------------------------------------------------
# satisfiability
# ---------------------------------------------------------------------------


def test_conflicting_value_constraints_unsatisfiable(conflict_rules):
    verdict = check_satisfiability(conflict_rules)
    assert not verdict.satisfiable
    values = {verdict.conflict.literal_a.value, verdict.conflict.literal_b.value}
    assert values == {"100mg", "20mL"}
    lo, hi = verdict.conflict.interval
    assert 30 <= lo <= hi <= 120


def test_disjoint_intervals_satisfiable(conflict_rules_disjoint):
    assert check_satisfiability(conflict_rules_disjoint).satisfiable


def test_single_rule_satisfiable(medication_rules):
    assert check_satisfiability(medication_rules).satisfiable


def test_satisfiability_permutation_invariant(conflict_rules):
    for perm in itertools.permutations(conflict_rules):
        assert not check_satisfiability(list(perm)).satisfiable


def test_contradictory_antecedent_is_unsatisfiable():
    sigma = Tgfd(
        "s",
        BASE,
        Delta(0, 2),
        [ConstantLiteral("y", "name", "A"), ConstantLiteral("y", "name", "B")],
        [ConstantLiteral("w", "val", "1")],
    )
    assert not check_satisfiability([sigma]).satisfiable


# ---------------------------------------------------------------------------
# implication closure
# ---------------------------------------------------------------------------


def ident(p):
    return find_embedding(p, p)


def test_closure_empty_ruleset_keeps_x():
    x = [ConstantLiteral("y", "name", "Veklury")]
    entries = closure_for_implication(x, [], Delta(1, 3))
    assert len(entries) == 1
    assert entries[0].literal == x[0]
    assert entries[0].validity == ((1, 3),)


def test_closure_merges_validity_intervals():
    y = ConstantLiteral("w", "val", "100mg")
    s1 = Tgfd("s1", BASE, Delta(0, 2), [], [y])
    s2 = Tgfd("s2", BASE, Delta(1, 4), [], [y])
    entries = closure_for_implication(
        [], [(s1, ident(BASE)), (s2, ident(BASE))], Delta(0, 4)
    )
    got = {e.literal: e.validity for e in entries}
    assert got[y] == ((0, 4),)


def test_closure_transitive_chain():
    x = ConstantLiteral("x", "name", "Jack")
    w = ConstantLiteral("y", "name", "Veklury")
    y = ConstantLiteral("w", "val", "100mg")
    first = Tgfd("first", BASE, Delta(0, 3), [x], [w])
    second = Tgfd("second", BASE, Delta(0, 3), [w], [y])
    entries = closure_for_implication(
        [x], [(first, ident(BASE)), (second, ident(BASE))], Delta(0, 3)
    )
    got = {e.literal: e.validity for e in entries}
    assert got[y] == ((0, 3),)


def test_closure_equality_transitivity():
    # x.A = u and y.B = u make x.A = y.B derivable
    shared = pat([("a", "t1"), ("b", "t2")], [("a", "l", "b")])
    r1 = Tgfd("r1", shared, Delta(0, 2), [], [ConstantLiteral("a", "A", "u")])
    r2 = Tgfd("r2", shared, Delta(0, 2), [], [ConstantLiteral("b", "B", "u")])
    query = Tgfd(
        "q", shared, Delta(0, 2), [], [VariableLiteral("a", "A", "b", "B")]
    )
    assert check_implication([r1, r2], query).implied


def test_closure_monotone_under_new_rules():
    x = [ConstantLiteral("x", "name", "Jack")]
    w = ConstantLiteral("y", "name", "V")
    extra = Tgfd("e", BASE, Delta(0, 2), x, [w])
    before = {
        e.literal: e.validity
        for e in closure_for_implication(x, [], Delta(0, 4))
    }
    after = {
        e.literal: e.validity
        for e in closure_for_implication(x, [(extra, ident(BASE))], Delta(0, 4))
    }
    for lit, validity in before.items():
        assert lit in after
        before_points = {g for lo, hi in validity for g in range(lo, hi + 1)}
        after_points = {g for lo, hi in after[lit] for g in range(lo, hi + 1)}
        assert before_points <= after_points


# ---------------------------------------------------------------------------
# implication verdicts
# ---------------------------------------------------------------------------


def make_rule(name, pattern, delta, x, y):
    return Tgfd(name, pattern, delta, x, y)


X1 = [VariableLiteral("x", "name", "x", "name")]
Y1 = [ConstantLiteral("w", "val", "100mg")]


def test_implication_reflexive():
    sigma = make_rule("s", BASE, Delta(1, 3), X1, Y1)
    assert check_implication([sigma], sigma).implied


def test_implication_interval_containment():
    premise = make_rule("p", BASE, Delta(0, 5), X1, Y1)
    query = make_rule("q", BASE, Delta(1, 3), X1, Y1)
    res = check_implication([premise], query)
    assert res.implied
    assert intervals_contain(res.entry.validity, Delta(1, 3))


def test_implication_interval_intersection():
    p1 = make_rule("p1", BASE, Delta(0, 2), X1, Y1)
    p2 = make_rule("p2", BASE, Delta(1, 4), X1, Y1)
    query = make_rule("q", BASE, Delta(1, 2), X1, Y1)
    assert check_implication([p1, p2], query).implied


def test_implication_negative():
    premise = make_rule("p", BASE, Delta(0, 2), X1, Y1)
    query = make_rule("q", BASE, Delta(0, 5), X1, Y1)  # wider than the premise
    assert not check_implication([premise], query).implied
    other = make_rule(
        "o", BASE, Delta(0, 2), X1, [ConstantLiteral("w", "val", "20mL")]
    )
    assert not check_implication([premise], other).implied


# ---------------------------------------------------------------------------
# axioms
# ---------------------------------------------------------------------------


def axiom_instances():
    """One concrete instance per axiom: (name, premises, conclusion)."""
    l1 = ConstantLiteral("y", "name", "Veklury")
    l2 = VariableLiteral("x", "name", "x", "name")
    y = ConstantLiteral("w", "val", "100mg")
    w = ConstantLiteral("y", "name", "Veklury")
    d = Delta(1, 3)

    reflexive = make_rule("c", BASE, d, [l1, l2], [l1])

    aug_premise = make_rule("p", BASE, d, [l2], [y])
    aug_conclusion = make_rule("c", BASE, d, [l1, l2], [y])

    pat_premise = make_rule("p", BASE, d, [l2], [y])
    pat_conclusion = make_rule("c", BIGGER, d, [l2], [y])

    trans_first = make_rule("p1", BASE, d, [l2], [w])
    trans_second = make_rule("p2", BIGGER, d, [w], [y])
    trans_conclusion = make_rule("c", BIGGER, d, [l2], [y])

    deco_premise = make_rule("p", BASE, d, [l2], [y, l1])
    deco_conclusion = make_rule("c", BASE, d, [l2], [y])

    inter_p1 = make_rule("p1", BASE, Delta(0, 2), [l2], [y])
    inter_p2 = make_rule("p2", BASE, Delta(1, 4), [l2], [y])
    inter_conclusion = make_rule("c", BASE, Delta(1, 2), [l2], [y])

    contain_premise = make_rule("p", BASE, Delta(0, 5), [l2], [y])
    contain_conclusion = make_rule("c", BASE, Delta(1, 3), [l2], [y])

    return [
        ("literal-reflexivity", [], reflexive),
        ("literal-augmentation", [aug_premise], aug_conclusion),
        ("pattern-augmentation", [pat_premise], pat_conclusion),
        ("transitivity", [trans_first, trans_second], trans_conclusion),
        ("decomposition", [deco_premise], deco_conclusion),
        ("interval-intersection", [inter_p1, inter_p2], inter_conclusion),
        ("interval-containment", [contain_premise], contain_conclusion),
    ]


def test_axiom_schemas_accept_their_instances():
    for name, premises, conclusion in axiom_instances():
        assert axiom_check(name, premises, conclusion), name


def test_axiom_soundness_bridge():
    # whatever a schema accepts, the closure-based checker also accepts
    for name, premises, conclusion in axiom_instances():
        res = check_implication(premises, conclusion)
        assert res.implied, name


def test_axiom_schema_rejections():
    l2 = VariableLiteral("x", "name", "x", "name")
    y = ConstantLiteral("w", "val", "100mg")
    p1 = make_rule("p1", BASE, Delta(0, 2), [l2], [y])
    p2 = make_rule("p2", BASE, Delta(1, 4), [l2], [y])
    wrong = make_rule("c", BASE, Delta(0, 4), [l2], [y])  # not the intersection
    assert not axiom_check("interval-intersection", [p1, p2], wrong)
    not_subset = make_rule("c", BASE, Delta(0, 3), [l2], [y])
    assert not axiom_check("interval-containment", [p1], not_subset)
    assert not axiom_check("literal-reflexivity", [], p1)  # Y not in X


def test_axiom_arity_mismatch():
    _, premises, conclusion = axiom_instances()[1]
    with pytest.raises(ArityMismatch):
        axiom_check("interval-intersection", premises, conclusion)
    with pytest.raises(ValueError):
        axiom_check("no-such-axiom", premises, conclusion)
