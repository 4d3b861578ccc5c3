"""Machine-to-machine constructions.

Every function here rewrites one machine into another with the same
translation, checked in the tests by bounded enumeration: rooting ground
right-hand sides, splitting an att into a precomputing relabeling plus a
reduced att, rewriting a look-around pair so the att stage on its own
rejects trees the look-around could not have produced, retargeting a
transducer to an annotated copy of its input alphabet, composing two
top-down transducers with look-ahead, and extracting a deterministic
transducer from a functional nondeterministic one.
"""

import itertools
from dataclasses import dataclass

from .analysis import _require_walkable, is_circular, kappa
from .errors import AlphabetMismatch, NotApplicable, NotTrimmable, SpecSyntaxError
from .model import (ROOT, AttRule, AttSpec, PairedSpec, RelabelingRule,
                    RelabelingSpec, TdttRule, TdttSpec, call_info, call_label,
                    is_occurrence, mangle_literal, mangle_parts, occ_node,
                    occ_node_info, occ_pattern, occ_pattern_info,
                    split_mangled_parts)
from .semantics import Reject, evaluate, nf, run_relabeling
from .trees import RankedAlphabet, Tree, trees_up_to_height


def _fresh(base, taken):
    name = base
    n = 1
    while name in taken:
        n += 1
        name = "%s%d" % (base, n)
    taken.add(name)
    return name


# ---------------------------------------------------------------------------
# rooting ground right-hand sides

def _is_ground(t):
    return all(not is_occurrence(node.label) for _, node in t.addresses())


def normalize_ground_rhs(a):
    """Confine ground right-hand sides to root-marker rules.

    Each distinct ground tree xi appearing as the right-hand side of a
    non-root rule becomes an inherited attribute: the root marker assigns
    it the value xi, every input symbol passes it down unchanged, and the
    offending rules emit the attribute instead of the tree. The result
    computes the same translation. Returns the input unchanged when there
    is nothing to rewrite, so applying the pass twice is a no-op.
    """
    grounds = []
    for sym, rules in a.rules.items():
        if sym == ROOT:
            continue
        for r in rules:
            if _is_ground(r.rhs) and r.rhs not in grounds:
                grounds.append(r.rhs)
    if not grounds:
        return a
    taken = set(a.attributes) | set(a.output) | set(a.input)
    names = {xi: _fresh(mangle_literal(xi), taken) for xi in grounds}
    rules = {}
    for sym, old in a.rules.items():
        bucket = []
        for r in old:
            if sym != ROOT and _is_ground(r.rhs):
                bucket.append(AttRule(r.attr, r.pos,
                                      Tree(occ_pattern(names[r.rhs], 0))))
            else:
                bucket.append(r)
        rules[sym] = bucket
    root = rules.setdefault(ROOT, [])
    for xi in grounds:
        root.append(AttRule(names[xi], 1, xi))
    for sym, k in a.input.items():
        bucket = rules.setdefault(sym, [])
        for j in range(1, k + 1):
            for xi in grounds:
                bucket.append(AttRule(names[xi], j,
                                      Tree(occ_pattern(names[xi], 0))))
    out = {}
    for sym, bucket in rules.items():
        seen = set()
        kept = []
        for r in bucket:
            if r not in seen:
                seen.add(r)
                kept.append(r)
        out[sym] = tuple(kept)
    return AttSpec(name=a.name + "_rooted", input=a.input, output=a.output,
                   syn=a.syn, inh=a.inh + tuple(names[xi] for xi in grounds),
                   init=a.init, rules=out)


# ---------------------------------------------------------------------------
# precomputing relabeling + reduced att

@dataclass(frozen=True)
class PrecomputeState:
    """One look-ahead state: the walks an att finishes early on a subtree.

    pairs holds (synthesized attribute, form) for every attribute whose
    walk of the subtree settles, within the height cap, into a form whose
    only unresolved leaves are inherited attributes at the subtree root.
    Attributes missing from pairs either get stuck inside the subtree or
    produce output above the cap and are left to the reduced att."""
    pairs: frozenset


@dataclass
class AssociatedAttR:
    """A precomputing relabeling feeding a reduced att; together they
    behave exactly like the att they were built from."""
    name: str
    relabeling: RelabelingSpec
    att: AttSpec
    states: dict            # state name -> PrecomputeState
    representatives: dict   # state name -> smallest input tree in the state
    kappa: int

    @property
    def pair(self):
        return PairedSpec("attR", self.name, self.relabeling, self.att)


def _finished_pairs(a, t, cap):
    pairs = set()
    for attr in a.syn:
        form = nf(a, t, Tree(occ_node(attr, ())))
        if not isinstance(form, Tree) or form.height > cap:
            continue
        ok = True
        for _, node in form.addresses():
            if not is_occurrence(node.label):
                continue
            info = occ_node_info(node.label)
            if info is None or info[1] != () or not a.is_inh(info[0]):
                ok = False
                break
        if ok:
            pairs.add((attr, form))
    return frozenset(pairs)


def _as_child_occurrences(form, pos):
    """Rebase a finished form: inherited tips at the subtree root become
    rule-side occurrences at child position pos."""
    info = occ_node_info(form.label) if is_occurrence(form.label) else None
    if info is not None and not form.children:
        return Tree(occ_pattern(info[0], pos))
    return Tree(form.label, [_as_child_occurrences(c, pos) for c in form.children])


class _StuckReduction(Exception):
    pass


def _chase(a, sym, tables, t, path):
    info = occ_pattern_info(t.label) if not t.children else None
    if info is None:
        return Tree(t.label, [_chase(a, sym, tables, c, path) for c in t.children])
    attr, pos = info
    key = (attr, pos)
    if pos >= 1 and a.is_syn(attr):
        form = tables[pos - 1].get(attr)
        if form is None:
            return t    # not precomputed; the reduced att walks the child
        assert key not in path, "reduction revisits %s" % (key,)
        return _chase(a, sym, tables, _as_child_occurrences(form, pos),
                      path | {key})
    if pos >= 1 and a.is_inh(attr):
        rules = a.rules_for(sym, attr, pos)
        if not rules:
            raise _StuckReduction
        assert key not in path, "reduction revisits %s" % (key,)
        return _chase(a, sym, tables, rules[0].rhs, path | {key})
    return t    # inherited at self: resolved by the context above the node


def _reduce(a, sym, tables, rhs):
    """The rule right-hand side with every precomputed child walk inlined,
    or None when the walk strands at a child position with no applicable
    rule (then the translation is undefined whenever the rule fires, and
    dropping it reproduces exactly that)."""
    try:
        return _chase(a, sym, tables, rhs, frozenset())
    except _StuckReduction:
        return None


def associate(a):
    """Split an att into a precomputing bottom-up relabeling plus an att
    over the annotated alphabet, jointly equivalent to the input.

    The relabeling's states are the reachable PrecomputeStates with the
    height cap kappa(a); each symbol of positive rank is annotated with
    its children's states, and the att's rules are reduced against those
    states so that precomputed output is emitted in place instead of
    being fetched by walking the child. States are computed on minimal
    representative trees (ties broken by rendered text); the outcome does
    not depend on the choice.
    """
    _require_walkable(a)
    cap = kappa(a)
    names = {}      # frozenset of pairs -> state name
    order = []      # state names in discovery order
    reps = {}       # state name -> representative tree
    tables = {}     # state name -> dict attribute -> finished form
    out_rule = {}   # (symbol, child state names) -> (state name, out symbol)
    changed = True
    while changed:
        changed = False
        pool = list(order)
        for sym, k in a.input.items():
            for combo in itertools.product(pool, repeat=k):
                if (sym, combo) in out_rule:
                    continue
                rep = Tree(sym, [reps[c] for c in combo])
                pairs = _finished_pairs(a, rep, cap)
                if pairs not in names:
                    name = "r%d" % len(names)
                    names[pairs] = name
                    order.append(name)
                    reps[name] = rep
                    tables[name] = dict(pairs)
                    changed = True
                res = names[pairs]
                out = sym if k == 0 else mangle_parts(sym, combo)
                out_rule[(sym, combo)] = (res, out)
    settling = True
    while settling:
        settling = False
        for (sym, combo), (res, _) in out_rule.items():
            cand = Tree(sym, [reps[c] for c in combo])
            old = reps[res]
            if (cand.size, cand.render()) < (old.size, old.render()):
                reps[res] = cand
                settling = True

    alpha2 = [(sym, 0) for sym, k in a.input.items() if k == 0]
    rules2 = {sym: tuple(a.rules_at(sym)) for sym, _ in alpha2}
    rules2[ROOT] = tuple(a.rules_at(ROOT))
    brules = []
    for (sym, combo), (res, out) in out_rule.items():
        brules.append(RelabelingRule(sym, combo, res, out))
        if a.input.rank(sym) == 0:
            continue
        alpha2.append((out, a.input.rank(sym)))
        child_tables = [tables[c] for c in combo]
        bucket = []
        for r in a.rules_at(sym):
            eta = _reduce(a, sym, child_tables, r.rhs)
            if eta is not None:
                bucket.append(AttRule(r.attr, r.pos, eta))
        rules2[out] = tuple(bucket)
    annotated = RankedAlphabet(alpha2)
    relab = RelabelingSpec(name=a.name + "_pre", input=a.input,
                           output=annotated, final=tuple(order),
                           rules=tuple(brules))
    reduced = AttSpec(name=a.name + "_main", input=annotated, output=a.output,
                      syn=a.syn, inh=a.inh, init=a.init, rules=rules2)
    return AssociatedAttR(name=a.name + "_assoc", relabeling=relab, att=reduced,
                          states={name: PrecomputeState(fs)
                                  for fs, name in names.items()},
                          representatives=reps, kappa=cap)


# ---------------------------------------------------------------------------
# string-likeness of a relabeling + att pair

def _off_path(nodes):
    seq = sorted(nodes, key=lambda v: (len(v), v))
    for i, u in enumerate(seq):
        for v in seq[i + 1:]:
            if v[:len(u)] != u:
                return u, v
    return None


def string_like_check(h, depth):
    """Whether the reduced att only processes nodes of one root-to-leaf
    path, simulated on every input of height at most depth.

    Returns (ok, violations); a violation is (input tree, address,
    address) with two processed addresses that are prefix-incomparable.
    """
    violations = []
    for s in trees_up_to_height(h.relabeling.input, depth):
        got = run_relabeling(h.relabeling, s)
        if isinstance(got, Reject) or got[0] not in h.relabeling.final:
            continue
        _, trace = evaluate(h.att, got[1], want_trace=True)
        nodes = set()
        for entry in trace.entries:
            for _, node in entry.form.addresses():
                if node.children or not is_occurrence(node.label):
                    continue
                info = occ_node_info(node.label)
                if info is not None and info[1][:1] == (1,):
                    nodes.add(info[1][1:])
        bad = _off_path(nodes)
        if bad is not None:
            violations.append((s, bad[0], bad[1]))
    return not violations, violations


# ---------------------------------------------------------------------------
# pushing a look-around's range into the att stage's own domain

def _relabel_out(rule):
    """(produced symbol, child state tuple) of a top-down relabeling rule."""
    return rule.rhs.label, tuple(call_info(c.label)[0]
                                 for c in rule.rhs.children)


def _range_automaton(u):
    """Deterministic bottom-up automaton accepting exactly the trees the
    look-around can emit.

    States are reachable sets of (bottom state, top state) pairs: a pair
    (p, q) is in the set for an output subtree t when some source subtree
    reaches p bottom-up while its relabeling from top state q is t."""
    rel, top = u.first, u.second
    by_out = {}
    for r in top.rules:
        out, qs = _relabel_out(r)
        by_out.setdefault(out, []).append((r.state, r.symbol, qs))
    alpha = top.output
    names = {}      # frozenset of pairs -> name
    order = []
    sets = {}       # name -> frozenset
    trans = {}      # (symbol, child names) -> name or None
    changed = True
    while changed:
        changed = False
        pool = list(order)
        for sym, k in alpha.items():
            for combo in itertools.product(pool, repeat=k):
                if (sym, combo) in trans:
                    continue
                pairs = set()
                for q, mid, qs in by_out.get(sym, ()):
                    for br in rel.rules:
                        if br.out_symbol != mid or len(br.child_states) != k:
                            continue
                        if all((br.child_states[i], qs[i]) in sets[combo[i]]
                               for i in range(k)):
                            pairs.add((br.state, q))
                if not pairs:
                    trans[(sym, combo)] = None
                    continue
                fs = frozenset(pairs)
                if fs not in names:
                    name = "p%d" % len(names)
                    names[fs] = name
                    order.append(name)
                    sets[name] = fs
                    changed = True
                trans[(sym, combo)] = names[fs]
    final = tuple(name for name in order
                  if any(p in rel.final and q == top.init
                         for p, q in sets[name]))
    rules = tuple(RelabelingRule(sym, combo, res, sym)
                  for (sym, combo), res in trans.items() if res is not None)
    return RelabelingSpec(name=u.name + "_range", input=alpha, output=alpha,
                          final=final, rules=rules)


def _relabel_by_out(top):
    table = {}
    for r in top.rules:
        key = (r.state, r.symbol)
        if key not in table:
            table[key] = _relabel_out(r)
    return table


def _fuse_lookaround(u, annot):
    """One look-around equivalent to running u and then the bottom-up
    relabeling annot on u's output.

    The fused look-ahead tracks, besides u's bottom state, a table sending
    each top state q to the state annot reaches on the subtree u would
    emit from q (None when u or annot is undefined there); the fused top
    stage then has everything it needs to emit annot's symbols directly.
    """
    rel, top = u.first, u.second
    qtop = list(top.states)
    qindex = {q: i for i, q in enumerate(qtop)}
    tops = _relabel_by_out(top)
    states = {}     # (bottom state, phi table) -> name
    order = []
    anns = {}       # (source symbol, mid symbol, child phi tables) -> name
    rrules = []
    seen = set()
    changed = True
    while changed:
        changed = False
        pool = list(order)
        for sym, k in rel.input.items():
            for combo in itertools.product(pool, repeat=k):
                if (sym, combo) in seen:
                    continue
                seen.add((sym, combo))
                rr = rel.rule_for(sym, tuple(p for p, _ in combo))
                if rr is None:
                    continue
                mid = rr.out_symbol
                phis = tuple(phi for _, phi in combo)
                phi = []
                for q in qtop:
                    got = tops.get((q, mid))
                    if got is None:
                        phi.append(None)
                        continue
                    out, qs = got
                    bs = []
                    for i, qc in enumerate(qs):
                        bs.append(phis[i][qindex[qc]])
                    if any(b is None for b in bs):
                        phi.append(None)
                        continue
                    ar = annot.rule_for(out, tuple(bs))
                    phi.append(None if ar is None else ar.state)
                key = (rr.state, tuple(phi))
                if key not in states:
                    states[key] = "l%d" % len(states)
                    order.append(key)
                    changed = True
                akey = (sym, mid, phis)
                if akey not in anns:
                    anns[akey] = mangle_parts(sym, ("w%d" % len(anns),))
                rrules.append(RelabelingRule(
                    sym, tuple(states[c] for c in combo), states[key],
                    anns[akey]))
    ann_alpha = RankedAlphabet([(name, rel.input.rank(sym))
                                for (sym, _, _), name in anns.items()])
    trules = []
    for (sym, mid, phis), ann in anns.items():
        for q in qtop:
            got = tops.get((q, mid))
            if got is None:
                continue
            out, qs = got
            bs = []
            for i, qc in enumerate(qs):
                bs.append(phis[i][qindex[qc]])
            if any(b is None for b in bs):
                continue
            ar = annot.rule_for(out, tuple(bs))
            if ar is None:
                continue
            trules.append(TdttRule(q, ann, Tree(ar.out_symbol, [
                Tree(call_label(qs[i], i + 1))
                for i in range(len(qs))])))
    name = u.name + "_ranged"
    fused_rel = RelabelingSpec(name=name + "_la", input=rel.input,
                               output=ann_alpha,
                               final=tuple(states[key] for key in order
                                           if key[0] in rel.final),
                               rules=tuple(rrules))
    fused_top = TdttSpec(name=name + "_td", input=ann_alpha,
                         output=annot.output, init=top.init,
                         rules=tuple(trules))
    return PairedSpec("lookaround", name, fused_rel, fused_top)


def normalize_domain_into_range(u, a):
    """Rewrite a look-around/att pair so the att stage by itself rejects
    any tree the look-around could not have produced.

    The look-around is fused with the automaton for its range, so each
    emitted symbol carries the automaton rule applied at that node. The
    att gains fresh traversal attributes that, before any output is
    produced, walk the annotated input in pre-order and check that the
    annotations form an accepting run; then the original rules take over.
    The pair as a whole keeps its translation.
    """
    if not isinstance(u, PairedSpec) or u.kind != "lookaround":
        raise SpecSyntaxError(
            "normalize_domain_into_range needs a lookaround pair, got %r"
            % getattr(u, "kind", type(u).__name__))
    if a.input != u.second.output:
        raise AlphabetMismatch(
            "att %r does not read the look-around's output alphabet" % a.name)
    circ, _ = is_circular(a)
    if circ:
        raise NotApplicable("circular")
    aut = _range_automaton(u)
    final_set = set(aut.final)
    sym2 = [mangle_parts(r.symbol, r.child_states + (r.state,))
            for r in aut.rules]
    alpha2 = RankedAlphabet([(sym2[i], len(r.child_states))
                             for i, r in enumerate(aut.rules)])
    taken = set(a.attributes) | set(a.output)
    t0 = _fresh("walk0", taken)
    tv = _fresh("walk", taken)
    tb = _fresh("back", taken)
    tc = _fresh("check", taken)
    chk = {}
    for idx, r in enumerate(aut.rules):
        for j in range(1, len(r.child_states) + 1):
            chk[(idx, j)] = _fresh("chk<%d,%d>" % (idx, j), taken)
    rules2 = {ROOT: tuple(a.rules_at(ROOT))
              + (AttRule(tb, 1, Tree(occ_pattern(a.init, 1))),)}
    for idx, r in enumerate(aut.rules):
        k = len(r.child_states)
        bucket = list(a.rules_at(r.symbol))
        if k > 0:
            descend = Tree(occ_pattern(chk[(idx, 1)], 1))
            bucket.append(AttRule(tv, 0, descend))
            if r.state in final_set:
                bucket.append(AttRule(t0, 0, descend))
            for i in range(1, k):
                bucket.append(AttRule(tc, i,
                                      Tree(occ_pattern(chk[(idx, i + 1)], i + 1))))
            bucket.append(AttRule(tc, k, Tree(occ_pattern(tv, 1))))
            for i in range(1, k):
                bucket.append(AttRule(tb, i, Tree(occ_pattern(tv, i + 1))))
            bucket.append(AttRule(tb, k, Tree(occ_pattern(tb, 0))))
        else:
            bucket.append(AttRule(tv, 0, Tree(occ_pattern(tb, 0))))
            if r.state in final_set:
                bucket.append(AttRule(t0, 0, Tree(occ_pattern(tb, 0))))
        for idx2, r2 in enumerate(aut.rules):
            for j in range(1, len(r2.child_states) + 1):
                if r2.child_states[j - 1] == r.state:
                    bucket.append(AttRule(chk[(idx2, j)], 0,
                                          Tree(occ_pattern(tc, 0))))
        rules2[sym2[idx]] = tuple(bucket)
    checked = AttSpec(name=a.name + "_checked", input=alpha2, output=a.output,
                      syn=a.syn + (t0, tv) + tuple(chk.values()),
                      inh=a.inh + (tb, tc), init=t0, rules=rules2)
    annot = RelabelingSpec(name=u.name + "_annot", input=aut.input,
                           output=alpha2, final=tuple(aut.final),
                           rules=tuple(RelabelingRule(r.symbol, r.child_states,
                                                      r.state, sym2[i])
                                       for i, r in enumerate(aut.rules)))
    fused = _fuse_lookaround(u, annot)
    return PairedSpec("attU", a.name + "_ranged", fused, checked)


# ---------------------------------------------------------------------------
# retargeting a transducer to an annotated input alphabet

def restrict_dtR_to_relabeled(t, u):
    """The transducer t reading u's annotated output symbols as if they
    were their base symbols (the name up to the last annotation group).

    Only the look-ahead stage is rebuilt; the top stage is untouched.
    When u's output alphabet is annotation-free and equal to t's input,
    t is returned as is."""
    alpha = u.second.output
    rel = t.first
    plain = True
    bases = {}
    for name, k in alpha.items():
        parts = split_mangled_parts(name)
        base = name if parts is None else parts[0]
        if base != name:
            plain = False
        if base not in rel.input or rel.input.rank(base) != k:
            raise AlphabetMismatch(
                "annotated symbol %r has no base symbol of rank %d" % (name, k))
        bases[name] = base
    if plain and alpha == rel.input:
        return t
    rules = tuple(RelabelingRule(name, r.child_states, r.state, r.out_symbol)
                  for name, base in bases.items()
                  for r in rel.rules if r.symbol == base)
    lifted = RelabelingSpec(name=rel.name + "_h", input=alpha,
                            output=rel.output, final=rel.final, rules=rules)
    return PairedSpec(t.kind, t.name + "_h", lifted, t.second)


# ---------------------------------------------------------------------------
# composition of two transducers with look-ahead

class _Dead(Exception):
    pass


def _rhs_state(t, child_lams, qindex, rel):
    """State rel reaches on the tree a top-down right-hand side produces,
    with call leaves resolved through the children's tables; None when
    anything along the way is undefined."""
    info = call_info(t.label)
    if info is not None and not t.children:
        q, i = info
        return child_lams[i - 1][qindex[q]]
    sts = []
    for c in t.children:
        v = _rhs_state(c, child_lams, qindex, rel)
        if v is None:
            return None
        sts.append(v)
    rr = rel.rule_for(t.label, tuple(sts))
    return None if rr is None else rr.state


def _pair_state(q1, q2):
    return mangle_parts("c", (q1, q2))


def compose_dtR(t1, t2):
    """One transducer with look-ahead computing t2 after t1, undefined
    exactly where either stage is.

    The fused look-ahead pairs t1's look-ahead state with a table sending
    each state of t1's top stage to the state t2's look-ahead reaches on
    the output produced from there. The fused top stage runs pairs of
    states, symbolically pushing t2's rules through t1's right-hand
    sides; a combination with no complete continuation yields no rule.
    """
    for t in (t1, t2):
        if not isinstance(t, PairedSpec) or t.kind not in ("dtR", "lookaround"):
            raise SpecSyntaxError(
                "compose_dtR needs relabeling + top-down pairs, got %r"
                % getattr(t, "kind", type(t).__name__))
    if t1.second.output != t2.first.input:
        raise AlphabetMismatch(
            "output alphabet of %r differs from input alphabet of %r"
            % (t1.name, t2.name))
    r1, d1 = t1.first, t1.second
    r2, d2 = t2.first, t2.second
    qt1 = list(d1.states)
    q1index = {q: i for i, q in enumerate(qt1)}
    states = {}     # (r1 state, lambda table) -> name
    order = []
    anns = {}       # (source symbol, mid symbol, child tables) -> name
    ann_info = []   # (name, source symbol, mid symbol, child tables)
    rrules = []
    seen = set()
    changed = True
    while changed:
        changed = False
        pool = list(order)
        for sym, k in r1.input.items():
            for combo in itertools.product(pool, repeat=k):
                if (sym, combo) in seen:
                    continue
                seen.add((sym, combo))
                rr = r1.rule_for(sym, tuple(p for p, _ in combo))
                if rr is None:
                    continue
                mid = rr.out_symbol
                lams = tuple(lam for _, lam in combo)
                lam = []
                for q in qt1:
                    rules = d1.rules_for(q, mid)
                    lam.append(None if not rules else
                               _rhs_state(rules[0].rhs, lams, q1index, r2))
                key = (rr.state, tuple(lam))
                if key not in states:
                    states[key] = "m%d" % len(states)
                    order.append(key)
                    changed = True
                akey = (sym, mid, lams)
                if akey not in anns:
                    anns[akey] = mangle_parts(sym, ("k%d" % len(anns),))
                    ann_info.append((anns[akey], sym, mid, lams))
                rrules.append(RelabelingRule(
                    sym, tuple(states[c] for c in combo), states[key],
                    anns[akey]))
    ann_alpha = RankedAlphabet([(name, r1.input.rank(sym))
                                for name, sym, _, _ in ann_info])

    def build(t, q2, lams, needed):
        info = call_info(t.label)
        if info is not None and not t.children:
            q1b, i = info
            needed.append((q1b, q2))
            return Tree(call_label(_pair_state(q1b, q2), i))
        sts = []
        for c in t.children:
            v = _rhs_state(c, lams, q1index, r2)
            if v is None:
                raise _Dead
            sts.append(v)
        rr2 = r2.rule_for(t.label, tuple(sts))
        if rr2 is None:
            raise _Dead
        rules2 = d2.rules_for(q2, rr2.out_symbol)
        if not rules2:
            raise _Dead
        return subst(rules2[0].rhs, t, lams, needed)

    def subst(rhs2, t, lams, needed):
        info = call_info(rhs2.label)
        if info is not None and not rhs2.children:
            q2b, j = info
            return build(t.children[j - 1], q2b, lams, needed)
        return Tree(rhs2.label, [subst(c, t, lams, needed)
                                 for c in rhs2.children])

    trules = []
    pending = [(d1.init, d2.init)]
    done = {pending[0]}
    while pending:
        q1, q2 = pending.pop(0)
        for ann, _, mid, lams in ann_info:
            rules1 = d1.rules_for(q1, mid)
            if not rules1:
                continue
            needed = []
            try:
                rhs = build(rules1[0].rhs, q2, lams, needed)
            except _Dead:
                continue
            trules.append(TdttRule(_pair_state(q1, q2), ann, rhs))
            for pair in needed:
                if pair not in done:
                    done.add(pair)
                    pending.append(pair)
    init_i = q1index[d1.init]
    final = tuple(states[key] for key in order
                  if key[0] in r1.final and key[1][init_i] is not None
                  and key[1][init_i] in r2.final)
    name = t1.name + "_" + t2.name
    fused_rel = RelabelingSpec(name=name + "_la", input=r1.input,
                               output=ann_alpha, final=final,
                               rules=tuple(rrules))
    fused_top = TdttSpec(name=name + "_td", input=ann_alpha, output=d2.output,
                         init=_pair_state(d1.init, d2.init),
                         rules=tuple(trules))
    return PairedSpec("dtR", name, fused_rel, fused_top)


# ---------------------------------------------------------------------------
# deterministic extraction from a functional transducer

def _calls(rhs):
    return [call_info(leaf.label) for _, leaf in rhs.leaves()
            if call_info(leaf.label) is not None]


def uniformize(n):
    """A deterministic transducer with the same translation as a
    functional nondeterministic one with look-ahead.

    The look-ahead is refined to track, per top-stage state, whether a
    complete output exists from that state on the subtree. At each node
    only rules all of whose calls stay completable survive, and the first
    survivor in right-hand-side text order is kept. Functionality is the
    caller's promise; under it any consistent choice of survivors
    computes the one translation, and the choice made here is fixed so
    the artifact is reproducible.
    """
    if not isinstance(n, PairedSpec) or n.kind not in ("dtR", "lookaround"):
        raise SpecSyntaxError(
            "uniformize needs a relabeling + top-down pair, got %r"
            % getattr(n, "kind", type(n).__name__))
    rel, td = n.first, n.second
    by_symbol = {}
    for r in td.rules:
        by_symbol.setdefault(r.symbol, []).append(r)

    def derive(mid, ds):
        out = set()
        for r in by_symbol.get(mid, ()):
            if all(st in ds[i - 1] for st, i in _calls(r.rhs)):
                out.add(r.state)
        return frozenset(out)

    states = {}     # (rel state, done set) -> name
    order = []
    anns = {}       # (mid symbol, child done sets) -> name
    ann_info = []
    rrules = []
    seen = set()
    changed = True
    while changed:
        changed = False
        pool = list(order)
        for sym, k in rel.input.items():
            for combo in itertools.product(pool, repeat=k):
                if (sym, combo) in seen:
                    continue
                seen.add((sym, combo))
                rr = rel.rule_for(sym, tuple(p for p, _ in combo))
                if rr is None:
                    continue
                mid = rr.out_symbol
                ds = tuple(d for _, d in combo)
                key = (rr.state, derive(mid, ds))
                if key not in states:
                    states[key] = "n%d" % len(states)
                    order.append(key)
                    changed = True
                akey = (mid, ds)
                if akey not in anns:
                    anns[akey] = mangle_parts(mid, ("u%d" % len(anns),))
                    ann_info.append((anns[akey], mid, ds))
                rrules.append(RelabelingRule(
                    sym, tuple(states[c] for c in combo), states[key],
                    anns[akey]))
    ann_alpha = RankedAlphabet([(name, td.input.rank(mid))
                                for name, mid, _ in ann_info])
    trules = []
    for ann, mid, ds in ann_info:
        derived = derive(mid, ds)
        for q in td.states:
            survivors = [r for r in by_symbol.get(mid, ()) if r.state == q
                         and all(st in ds[i - 1] for st, i in _calls(r.rhs))]
            if not survivors:
                if q in derived:
                    raise NotTrimmable(
                        "state %r at %r is completable but no rule survives"
                        % (q, ann))
                continue
            chosen = min(survivors, key=lambda r: r.rhs.render())
            trules.append(TdttRule(q, ann, chosen.rhs))
    name = n.name + "_det"
    det_rel = RelabelingSpec(name=name + "_la", input=rel.input,
                             output=ann_alpha,
                             final=tuple(states[key] for key in order
                                         if key[0] in rel.final),
                             rules=tuple(rrules))
    det_top = TdttSpec(name=name + "_td", input=ann_alpha, output=td.output,
                       init=td.init, rules=tuple(trules))
    return PairedSpec("dtR", name, det_rel, det_top)
