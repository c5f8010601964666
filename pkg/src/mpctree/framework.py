"""Dynamic programming over tree components with symbolic partial results.

A plugin describes a bottom-up DP through a single ``update`` rule mapping a
vertex's children vectors to its own vector.  Values are ``None``
(infeasible), plain ints, or :class:`Sym` tables — a symbolic value whose
unknowns are the DP vectors of components hanging below a compressed
component.  ``compress_component`` runs the update rule over one component
and returns its root vector with at most two unknowns; ``merge_partial``
substitutes a child component's table into its parent's.  Substituting in
any order yields the same canonical table, which is what makes distributed
merging safe.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .values import best_of, sat_add, seed_int


class FrameworkError(Exception):
    pass


class SizeBoundViolated(FrameworkError):
    """A compressed table grew past its certified size."""


class Sym:
    """Symbolic DP value: best over terms of (coeff + sum of unknown entries).

    ``terms`` maps a mask — a sorted tuple of ``(leaf_id, state_index)``
    pairs, one state per leaf — to an integer coefficient.  A mask asserts
    which entry of each unknown leaf's vector the term consumes.
    """

    __slots__ = ("terms",)

    def __init__(self, terms):
        self.terms = dict(terms)

    @property
    def unknowns(self):
        return {leaf for mask in self.terms for leaf, _ in mask}

    def __eq__(self, other):
        return isinstance(other, Sym) and self.terms == other.terms

    def __repr__(self):
        body = ", ".join(f"{dict(m)}:{c}" for m, c in sorted(self.terms.items()))
        return f"Sym({body})"

    def __words__(self):
        return 1 + sum(2 * len(m) + 1 for m in self.terms)


def _collapse(terms):
    """Dict of terms -> canonical value: None / int / Sym."""
    if not terms:
        return None
    if len(terms) == 1 and () in terms:
        return terms[()]
    return Sym(terms)


def _as_terms(val):
    if isinstance(val, Sym):
        return val.terms
    return {(): val}


def unit_sym(leaf: int, state: int) -> Sym:
    """The symbolic value 'entry ``state`` of unknown ``leaf``'."""
    return Sym({((int(leaf), int(state)),): 0})


def unit_vector(leaf: int, n_states: int) -> tuple:
    return tuple(unit_sym(leaf, s) for s in range(n_states))


class Algebra:
    """Add/best/evaluate over int | None | Sym for a fixed optimization sense."""

    def __init__(self, sense: str):
        if sense not in ("min", "max"):
            raise FrameworkError(f"bad sense {sense!r}")
        self.sense = sense

    def add(self, *vals):
        total = 0
        syms = []
        for v in vals:
            if v is None:
                return None
            if isinstance(v, Sym):
                syms.append(v)
            else:
                total += v
        if not syms:
            return total
        terms = {(): total}
        for s in syms:
            terms = _cross(terms, s.terms)
        return _collapse(terms)

    def best(self, *vals):
        ints = []
        syms = []
        for v in vals:
            if v is None:
                continue
            if isinstance(v, Sym):
                syms.append(v)
            else:
                ints.append(v)
        if not syms:
            return best_of(ints, self.sense)
        terms = {}
        for chunk in [{(): c} for c in ints] + [s.terms for s in syms]:
            for m, c in chunk.items():
                old = terms.get(m)
                terms[m] = c if old is None else better_int(old, c, self.sense)
        return _collapse(terms)

    def evaluate(self, val, assign: dict):
        """Resolve every unknown with concrete vectors from ``assign``."""
        if not isinstance(val, Sym):
            return val
        outs = []
        for mask, coeff in val.terms.items():
            outs.append(sat_add(coeff, *[assign[leaf][state]
                                         for leaf, state in mask]))
        return best_of([o for o in outs if o is not None], self.sense)

    def substitute(self, val, leaf: int, vector):
        """Replace unknown ``leaf`` with ``vector`` (entries int|None|Sym)."""
        if not isinstance(val, Sym):
            return val
        pieces = []
        for mask, coeff in val.terms.items():
            hit = [(l, s) for l, s in mask if l == leaf]
            if not hit:
                pieces.append(_collapse({mask: coeff}))
                continue
            (_, state), = hit
            rest = tuple((l, s) for l, s in mask if l != leaf)
            pieces.append(self.add(_collapse({rest: coeff}), vector[state]))
        return self.best(*pieces)


def better_int(a: int, b: int, sense: str) -> int:
    return min(a, b) if sense == "min" else max(a, b)


def _cross(ta, tb):
    out = {}
    for ma, ca in ta.items():
        leaves_a = {l for l, _ in ma}
        for mb, cb in tb.items():
            if any(l in leaves_a for l, _ in mb):
                raise FrameworkError("adding tables that share an unknown")
            key = tuple(sorted(ma + mb))
            out[key] = ca + cb
    return out


class Plugin:
    """Tree DP description; subclasses set the class attributes and rules.

    ``update(aux, children)`` maps a vertex (aux flag) and its children —
    ``(child_aux, child_vector, edge_weight)`` triples — to the vertex's own
    vector; leaves are the no-children case.  All arithmetic must go through
    ``self.alg`` so vectors may hold symbolic entries.
    """

    name = ""
    kind = "polylog"
    states: tuple = ()
    sense = "min"

    def __init__(self):
        self.alg = Algebra(self.sense)

    def update(self, aux: bool, children: list) -> tuple:
        raise NotImplementedError

    def finalize(self, root_vector: tuple):
        raise NotImplementedError


@dataclass
class ComponentData:
    """One component's local view: member rows and outer child stubs."""
    comp_id: int
    members: list = field(default_factory=list)       # (v, parent, w, aux)
    outer_children: list = field(default_factory=list)  # (child, attach, w, aux)

    def __words__(self):
        return 2 + 4 * (len(self.members) + len(self.outer_children))


@dataclass
class Table:
    """Compressed component: root DP vector over at most two unknowns."""
    comp_id: int
    vector: tuple
    unknowns: tuple

    def __words__(self):
        from .runtime import measure_words
        return 2 + len(self.unknowns) + measure_words(self.vector)

    def __eq__(self, other):
        return (isinstance(other, Table) and self.comp_id == other.comp_id
                and self.vector == other.vector
                and sorted(self.unknowns) == sorted(other.unknowns))


def _table_width_cap(n_states: int) -> int:
    # two unknowns, n_states states each, plus the unknown-free mask
    return (n_states + 1) ** 2


def compress_component(plugin: Plugin, comp: ComponentData) -> Table:
    if len(comp.outer_children) > 2:
        raise SizeBoundViolated(
            f"component {comp.comp_id} has {len(comp.outer_children)} outer children")
    n_states = len(plugin.states)
    kids: dict = {}
    rows = {}
    for v, p, w, aux in comp.members:
        rows[v] = (p, w, bool(aux))
        kids.setdefault(v, [])
    for v, p, w, aux in comp.members:
        if p in rows:
            kids[p].append((v, w, bool(aux), False))
    for c, attach, w, aux in comp.outer_children:
        if attach not in rows:
            raise FrameworkError(f"outer child {c} attaches outside component")
        kids[attach].append((c, w, bool(aux), True))

    vec = {}
    stack = [(comp.comp_id, False)]
    while stack:
        v, expanded = stack.pop()
        children = sorted(kids[v]) if v in kids else []
        if not expanded:
            stack.append((v, True))
            for c, _, _, outer in children:
                if not outer:
                    stack.append((c, False))
            continue
        arg = []
        for c, w, caux, outer in children:
            cv = unit_vector(c, n_states) if outer else vec[c]
            arg.append((caux, cv, w))
        vec[v] = plugin.update(rows[v][2], arg)

    vector = vec[comp.comp_id]
    cap = _table_width_cap(n_states)
    for entry in vector:
        if isinstance(entry, Sym) and len(entry.terms) > cap:
            raise SizeBoundViolated(
                f"table entry of component {comp.comp_id} has "
                f"{len(entry.terms)} terms (cap {cap})")
    unknowns = tuple(sorted(c for c, _, _, _ in comp.outer_children))
    return Table(comp_id=comp.comp_id, vector=vector, unknowns=unknowns)


def merge_partial(plugin: Plugin, parent: Table, child: Table) -> Table:
    """Substitute ``child``'s vector for its unknown inside ``parent``."""
    if child.comp_id not in parent.unknowns:
        raise FrameworkError(
            f"component {child.comp_id} is not an unknown of {parent.comp_id}")
    alg = plugin.alg
    vector = tuple(alg.substitute(e, child.comp_id, child.vector)
                   for e in parent.vector)
    unknowns = tuple(sorted(set(parent.unknowns) - {child.comp_id}
                            | set(child.unknowns)))
    if len(unknowns) > 2:
        raise SizeBoundViolated(
            f"merge of {parent.comp_id} and {child.comp_id} leaves "
            f"{len(unknowns)} unknowns")
    return Table(comp_id=parent.comp_id, vector=vector, unknowns=unknowns)


def evaluate_table(plugin: Plugin, table: Table, assign: dict) -> tuple:
    alg = plugin.alg
    return tuple(alg.evaluate(e, assign) for e in table.vector)


def run_plugin_local(plugin: Plugin, btree) -> object:
    """Plain sequential evaluation over a whole tree; the reference path."""
    w = btree.int_weights()
    children = btree.children_lists()
    vec = [None] * (btree.n + 1)
    for v in btree.post_order():
        arg = [(btree.is_aux(c), vec[c], int(w[c])) for c in sorted(children[v])]
        vec[v] = plugin.update(btree.is_aux(v), arg)
    return plugin.finalize(vec[btree.root])


def split_chunks(items: list, k: int, seed, tag: str) -> list:
    """Deterministic k-way split; item order inside a chunk is preserved."""
    buckets = [[] for _ in range(k)]
    for idx, it in enumerate(items):
        buckets[seed_int(seed, tag, idx) % k].append(it)
    return buckets


def chunked_merge(a_items: list, b_items: list, k: int, sub_unify, unify,
                  seed=0):
    """Reduce over all chunk pairs; equals sub_unify(a, b) when ``unify`` is
    commutative, associative, and distributes over the chunk split."""
    chunks_a = split_chunks(a_items, k, seed, "chunk-a")
    chunks_b = split_chunks(b_items, k, seed, "chunk-b")
    acc = None
    for i in range(k):
        for j in range(k):
            cand = sub_unify(chunks_a[i], chunks_b[j])
            acc = cand if acc is None else unify(acc, cand)
    return acc
