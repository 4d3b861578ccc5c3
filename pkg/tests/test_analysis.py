import pytest

from ttdef.analysis import (all_isds, compute_isd, is_circular, kappa,
                            single_path, variation, visiting_pair_sets)
from ttdef.errors import NotApplicable, UnknownAttribute
from ttdef.model import occ_node, occ_node_info, occ_pattern_info, parse_spec
from ttdef.semantics import NoOutput, Output, evaluate, nf
from ttdef.trees import RankedAlphabet, Tree, parse_tree, trees_up_to_height

import fixtures

FE = RankedAlphabet({"f": 2, "e": 0})
FED = RankedAlphabet({"f": 2, "e": 0, "d": 0})

PSI_A1 = frozenset({("b", "a")})
PSI_E = frozenset({("b_e", "a")})
PSI_D = frozenset({("b_d", "a")})


def T(text):
    return parse_tree(text)


# ---------------------------------------------------------------------------
# brute-force oracles, driven purely by the derivation semantics

def brute_isd(att, s):
    """Pairs (b, a): from a(eps) on bare s some derivation branch reaches a
    form containing b(eps)."""
    pairs = set()
    for a in att.syn:
        stack = [(a, ())]
        seen = set()
        while stack:
            attr, v = stack.pop()
            if (attr, v) in seen:
                continue
            seen.add((attr, v))
            if att.is_inh(attr) and v == ():
                pairs.add((attr, a))
                continue
            if att.is_syn(attr):
                sym, pos = s.subtree_at(v).label, 0
            else:
                sym, pos = s.subtree_at(v[:-1]).label, v[-1]
            base = v if att.is_syn(attr) else v[:-1]
            for rule in att.rules_for(sym, attr, pos):
                for _, sub in rule.rhs.addresses():
                    tip = occ_pattern_info(sub.label)
                    if tip is None:
                        continue
                    attr2, p = tip
                    stack.append((attr2, base if p == 0 else base + (p,)))
    return frozenset(pairs)


def observed_psi(att, s):
    """Visiting pair set per node of s, read off a full traced run."""
    outcome, trace = evaluate(att, s, want_trace=True)
    assert isinstance(outcome, Output)
    processed = {}
    for entry in trace.entries:
        for _, sub in entry.form.addresses():
            info = occ_node_info(sub.label)
            if info is not None:
                attr, addr = info
                if att.is_syn(attr) and addr and addr[0] == 1:
                    processed.setdefault(addr[1:], set()).add(attr)
    result = {}
    for v, _ in s.addresses():
        isd = compute_isd(att, s.subtree_at(v))
        attrs = processed.get(v, set())
        result[v] = frozenset((b, a) for b, a in isd if a in attrs)
    return result


# ---------------------------------------------------------------------------
# is-dependencies

def test_isd_examples():
    a1 = fixtures.a1()
    assert compute_isd(a1, T("e")) == PSI_A1
    assert compute_isd(a1, T("f(e,e)")) == PSI_A1


def test_isd_no_rules():
    a = parse_spec("att Empty\ninput e:0\noutput x:0\nsyn a\ninit a\n")
    assert compute_isd(a, T("e")) == frozenset()
    assert all_isds(a) == {frozenset()}


def test_isd_matches_brute_force():
    for make in (fixtures.a1, fixtures.n1):
        att = make()
        for s in trees_up_to_height(FE, 3):
            assert compute_isd(att, s) == brute_isd(att, s)
    a2 = fixtures.a2()
    for s in trees_up_to_height(FED, 3):
        assert compute_isd(a2, s) == brute_isd(a2, s)


def test_all_isds_closure():
    a1 = fixtures.a1()
    assert all_isds(a1) == {PSI_A1}
    a2 = fixtures.a2()
    family = all_isds(a2)
    assert family == {compute_isd(a2, s) for s in trees_up_to_height(FED, 4)}
    assert any(isd >= PSI_E for isd in family)
    assert any(isd >= PSI_D for isd in family)


# ---------------------------------------------------------------------------
# circularity

def test_noncircular_examples():
    for make in (fixtures.a1, fixtures.a2, fixtures.rev):
        circ, witness = is_circular(make())
        assert not circ and witness is None


def test_circular_at_root_rules():
    circ, witness = is_circular(fixtures.c0())
    assert circ
    assert witness.symbol == "#"
    assert set(witness.cycle) == {("a", 1), ("b", 1)}
    circ, witness = is_circular(fixtures.p0())
    assert circ and witness.symbol == "#"


def test_circular_inside_tree():
    d0 = parse_spec("""\
att D0
input f:2 e:0
output e:0
syn a
inh b
init a
rule f: a(pi) -> a(pi 1)
rule f: b(pi 1) -> a(pi 1)
rule e: a(pi) -> b(pi)
rule #: b(pi 1) -> e
""")
    circ, witness = is_circular(d0)
    assert circ and witness.symbol == "f"


# ---------------------------------------------------------------------------
# visiting pair sets

def test_visiting_family_a1():
    assert visiting_pair_sets(fixtures.a1()) == {PSI_A1}


def test_visiting_family_a2():
    family = visiting_pair_sets(fixtures.a2())
    assert PSI_E in family
    assert PSI_D in family
    assert frozenset() in family
    assert any(("lit<e>", "a_e") in psi for psi in family)


def test_visiting_family_matches_simulation():
    a1 = fixtures.a1()
    family = visiting_pair_sets(a1)
    for s in trees_up_to_height(FE, 3):
        for v, psi in observed_psi(a1, s).items():
            assert psi in family
    a2 = fixtures.a2()
    family = visiting_pair_sets(a2)
    for s in trees_up_to_height(FED, 3):
        for v, psi in observed_psi(a2, s).items():
            assert psi in family


def test_analyses_reject_unsuitable_input():
    with pytest.raises(NotApplicable, match="nondeterministic"):
        visiting_pair_sets(fixtures.n1())
    with pytest.raises(NotApplicable, match="circular"):
        visiting_pair_sets(fixtures.c0())
    with pytest.raises(NotApplicable, match="circular"):
        kappa(fixtures.p0())
    with pytest.raises(UnknownAttribute):
        variation(fixtures.a1(), {("nope", "a")})


# ---------------------------------------------------------------------------
# variation

def test_variation_a1_unbounded_with_replayable_pump():
    a1 = fixtures.a1()
    verdict = variation(a1, PSI_A1)
    assert not verdict.bounded
    w = verdict.witness
    sizes = []
    for n in range(3):
        t = w.tree(n)
        assert compute_isd(a1, t) >= PSI_A1
        form = nf(a1, t, Tree(occ_node(w.attr, ())))
        assert isinstance(form, Tree)
        sizes.append(form.size)
    assert sizes[0] < sizes[1] < sizes[2]
    assert tuple(sizes) == w.lengths


def test_variation_a2_bounded():
    a2 = fixtures.a2()
    for psi in (PSI_E, PSI_D):
        verdict = variation(a2, psi)
        assert verdict.bounded and verdict.kappa_psi == 1


def test_variation_a2_bounded_cross_check():
    a2 = fixtures.a2()
    for psi in (PSI_E, PSI_D):
        cap = variation(a2, psi).kappa_psi
        entries = {a for _, a in psi}
        for s in trees_up_to_height(FED, 4):
            if compute_isd(a2, s) >= psi:
                for a in entries:
                    form = nf(a2, s, Tree(occ_node(a, ())))
                    assert isinstance(form, Tree)
                    assert form.height <= cap


def test_variation_a2_spine_set_unbounded():
    a2 = fixtures.a2()
    psi = frozenset({("b_e", "a"), ("lit<e>", "a_e")})
    verdict = variation(a2, psi)
    assert not verdict.bounded
    w = verdict.witness
    sizes = [nf(a2, w.tree(n), Tree(occ_node(w.attr, ()))).size
             for n in range(3)]
    assert sizes[0] < sizes[1] < sizes[2]


def test_variation_empty_set():
    verdict = variation(fixtures.a2(), frozenset())
    assert verdict.bounded and verdict.kappa_psi == 0


# ---------------------------------------------------------------------------
# kappa

def test_kappa_values():
    assert kappa(fixtures.a2()) == 1
    assert kappa(fixtures.a1()) == 0


def test_kappa_immediate_ground():
    a = parse_spec("""\
att G0
input f:2 e:0
output x:0
syn a
init a
rule f: a(pi) -> x
rule e: a(pi) -> x
""")
    assert kappa(a) == 0
    assert visiting_pair_sets(a) == {frozenset()}


# ---------------------------------------------------------------------------
# single path property

def test_single_path_a1_fails_with_witness():
    a1 = fixtures.a1()
    verdict = single_path(a1)
    assert not verdict.yes
    s, v1, v2 = verdict.witness
    assert evaluate(a1, s) != NoOutput()
    assert not _prefix(v1, v2) and not _prefix(v2, v1)
    observed = observed_psi(a1, s)
    for v in (v1, v2):
        assert not variation(a1, observed[v]).bounded


def test_single_path_a2_holds():
    assert single_path(fixtures.a2()).yes


def test_single_path_trivial_when_all_bounded():
    a = parse_spec("""\
att G0
input f:2 e:0
output x:0
syn a
init a
rule f: a(pi) -> x
rule e: a(pi) -> x
""")
    assert single_path(a).yes


def _prefix(u, v):
    return len(u) <= len(v) and v[:len(u)] == u
