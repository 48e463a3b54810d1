"""Stable graphs with spin weightings and the decorated strata algebra.

A boundary stratum is indexed by a stable graph together with a mod-r
weighting of its half-edges, balanced across each edge (opposite values
sum to 0 mod r) and satisfying the local selection rule at every vertex.
Decorated terms carry kappa monomials at vertices and psi powers at legs
and edge branches.  A term (Gamma, w, alpha) stands for the class
xi_{Gamma *}(alpha) / |Aut Gamma| supported on the weighted stratum; the
integration rule lives in :mod:`spinhodge.integrate`.

Products follow the excess-intersection calculus.  A placement of the
second factor's edge onto an existing edge contributes the excess factor
-(psi' + psi'')/r (the node-smoothing line acquires an r-th root on the
spin moduli); a placement splitting a vertex or dropping a genus
contributes the refined graph.  Each placement class is weighted by
|Aut Pi| / (|Aut X| |Aut Y|) before canonical merging; the enumeration
below lists every class exactly once.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence

from .conventions import CONVENTIONS


def opposite_weight(k: int, r: int) -> int:
    """Weight on the opposite half-edge (balanced-node convention)."""
    return (CONVENTIONS.balance_offset - k) % r


@dataclass(frozen=True)
class Ambient:
    """Discrete data shared by every term of a strata expression."""

    g: int
    n: int
    r: int
    leg_twists: tuple[int, ...]
    grading_power: int = 1

    def __post_init__(self):
        if len(self.leg_twists) != self.n:
            raise ValueError("one leg twist per marking required")
        if self.r < 1:
            raise ValueError("r must be >= 1")

    @property
    def dim(self) -> int:
        return 3 * self.g - 3 + self.n

    def selection_rule_holds(self) -> bool:
        lhs = sum(self.leg_twists) % self.r
        rhs = self.grading_power * (2 * self.g - 2 + self.n) % self.r
        return lhs == rhs


@dataclass(frozen=True)
class StableGraph:
    """Connected stable graph; legs labeled 1..n, edges as vertex pairs.

    Edge i has two half-edges (i, 0) at edges[i][0] and (i, 1) at
    edges[i][1]; a loop attaches both at the same vertex.
    """

    genera: tuple[int, ...]
    legs: tuple[tuple[int, ...], ...]
    edges: tuple[tuple[int, int], ...]

    @property
    def n_vertices(self) -> int:
        return len(self.genera)

    @property
    def h1(self) -> int:
        return len(self.edges) - len(self.genera) + 1

    def total_genus(self) -> int:
        return sum(self.genera) + self.h1

    def valence(self, v: int) -> int:
        return len(self.legs[v]) + sum((u == v) + (w == v) for u, w in self.edges)

    def validate(self) -> None:
        n_markings = sum(len(ls) for ls in self.legs)
        seen = sorted(m for ls in self.legs for m in ls)
        if seen != list(range(1, n_markings + 1)):
            raise ValueError("legs must be a bijection with 1..n")
        for v, g in enumerate(self.genera):
            if g < 0 or 2 * g - 2 + self.valence(v) <= 0:
                raise ValueError(f"vertex {v} unstable")
        if not self._connected():
            raise ValueError("graph must be connected")

    def _connected(self) -> bool:
        if self.n_vertices == 0:
            return False
        seen = {0}
        frontier = [0]
        while frontier:
            v = frontier.pop()
            for u, w in self.edges:
                for a, b in ((u, w), (w, u)):
                    if a == v and b not in seen:
                        seen.add(b)
                        frontier.append(b)
        return len(seen) == self.n_vertices

    def aut_order(self) -> int:
        return _aut_order(self)

    def sides_at(self, v: int) -> list[tuple[int, int]]:
        out = []
        for e, (u, w) in enumerate(self.edges):
            if u == v:
                out.append((e, 0))
            if w == v:
                out.append((e, 1))
        return out


_aut_cache: dict[StableGraph, int] = {}
_perm_cache: dict[StableGraph, list[tuple[int, ...]]] = {}


def _vertex_perm_candidates(graph: StableGraph) -> list[tuple[int, ...]]:
    """All vertex bijections preserving genus and the (labeled) leg sets."""
    perms = _perm_cache.get(graph)
    if perms is not None:
        return perms
    classes: dict[tuple, list[int]] = {}
    for v in range(graph.n_vertices):
        classes.setdefault((graph.genera[v], graph.legs[v]), []).append(v)
    groups = list(classes.values())
    perms = []
    for images in itertools.product(*(itertools.permutations(grp) for grp in groups)):
        perm = [0] * graph.n_vertices
        for grp, img in zip(groups, images):
            for src, dst in zip(grp, img):
                perm[src] = dst
        perms.append(tuple(perm))
    _perm_cache[graph] = perms
    return perms


def _edge_multiset(graph: StableGraph, perm: Sequence[int]) -> tuple:
    return tuple(
        sorted((min(perm[u], perm[w]), max(perm[u], perm[w])) for u, w in graph.edges)
    )


def _aut_order(graph: StableGraph) -> int:
    order = _aut_cache.get(graph)
    if order is not None:
        return order
    base = _edge_multiset(graph, range(graph.n_vertices))
    counts: dict[tuple[int, int], int] = {}
    for pair in base:
        counts[pair] = counts.get(pair, 0) + 1
    edge_sym = 1
    for (u, w), m in counts.items():
        edge_sym *= _factorial(m)
        if u == w:
            edge_sym *= 2**m
    order = sum(
        edge_sym
        for perm in _vertex_perm_candidates(graph)
        if _edge_multiset(graph, perm) == base
    )
    _aut_cache[graph] = order
    return order


def _factorial(m: int) -> int:
    out = 1
    for i in range(2, m + 1):
        out *= i
    return out


def automorphism_order(
    graph: StableGraph, weighting: Sequence[int] | None = None, r: int = 1
) -> int:
    """Order of Aut(Gamma) fixing legs; with a weighting, of its stabilizer."""
    if weighting is None:
        return _aut_order(graph)
    edges = graph.edges
    targets: dict[tuple[int, int], list[int]] = {}
    for e, (u, w) in enumerate(edges):
        targets.setdefault((min(u, w), max(u, w)), []).append(e)
    count = 0
    for perm in _vertex_perm_candidates(graph):
        sources: dict[tuple[int, int], list[int]] = {}
        for e, (u, w) in enumerate(edges):
            key = (min(perm[u], perm[w]), max(perm[u], perm[w]))
            sources.setdefault(key, []).append(e)
        if sorted(sources) != sorted(targets) or any(
            len(sources[k]) != len(targets[k]) for k in sources
        ):
            continue
        keys = sorted(sources)
        pools = [list(itertools.permutations(targets[k])) for k in keys]
        for assignment in itertools.product(*pools):
            matching = {}
            for k, img in zip(keys, assignment):
                for src, dst in zip(sources[k], img):
                    matching[src] = dst
            total = 1
            ok = True
            for e, (u, w) in enumerate(edges):
                d = matching[e]
                du, dw = edges[d]
                k_e = weighting[e] % r
                k_d = weighting[d] % r
                opts = 0
                if (perm[u], perm[w]) == (du, dw) and k_e == k_d:
                    opts += 1
                if (perm[u], perm[w]) == (dw, du) and opposite_weight(k_e, r) == k_d:
                    opts += 1
                if not opts:
                    ok = False
                    break
                total *= opts
            if ok:
                count += total
    return count


# ---------------------------------------------------------------------------
# canonical forms
# ---------------------------------------------------------------------------

_graph_key_cache: dict[StableGraph, tuple] = {}


_position_cache: dict[StableGraph, list[tuple[int, ...]]] = {}


def _vertex_position_candidates(graph: StableGraph) -> list[tuple[int, ...]]:
    """Vertex relabelings onto positions sorted by (genus, legs) class.

    Isomorphic graphs admit identical candidate images, so minimizing a
    serialization over this set yields a canonical form even when the
    graphs list their vertices in different orders.
    """
    perms = _position_cache.get(graph)
    if perms is not None:
        return perms
    classes: dict[tuple, list[int]] = {}
    for v in range(graph.n_vertices):
        classes.setdefault((graph.genera[v], graph.legs[v]), []).append(v)
    offset = 0
    groups = []
    for inv in sorted(classes):
        members = classes[inv]
        groups.append((members, list(range(offset, offset + len(members)))))
        offset += len(members)
    perms = []
    for images in itertools.product(
        *(itertools.permutations(positions) for _, positions in groups)
    ):
        perm = [0] * graph.n_vertices
        for (members, _), img in zip(groups, images):
            for src, dst in zip(members, img):
                perm[src] = dst
        perms.append(tuple(perm))
    _position_cache[graph] = perms
    return perms


def _canonical_serialization(
    graph: StableGraph,
    weighting: Sequence[int],
    r: int,
    kappa: Sequence[tuple[int, ...]],
    leg_psi_items: tuple,
    edge_psi: Sequence[tuple[int, int]],
) -> tuple:
    best = None
    for perm in _vertex_position_candidates(graph):
        genera = [0] * graph.n_vertices
        legs: list = [None] * graph.n_vertices
        kap: list = [None] * graph.n_vertices
        for src in range(graph.n_vertices):
            dst = perm[src]
            genera[dst] = graph.genera[src]
            legs[dst] = graph.legs[src]
            kap[dst] = kappa[src]
        recs = []
        for e, (u, w) in enumerate(graph.edges):
            nu, nw = perm[u], perm[w]
            k = weighting[e] % r
            kk = opposite_weight(k, r)
            p0, p1 = edge_psi[e]
            if nu < nw:
                recs.append((nu, nw, k, p0, p1))
            elif nu > nw:
                recs.append((nw, nu, kk, p1, p0))
            else:
                recs.append((nu, nu) + min((k, p0, p1), (kk, p1, p0)))
        cand = (
            tuple(genera),
            tuple(legs),
            tuple(kap),
            leg_psi_items,
            tuple(sorted(recs)),
        )
        if best is None or cand < best:
            best = cand
    return best


def canonical_graph_key(graph: StableGraph) -> tuple:
    key = _graph_key_cache.get(graph)
    if key is None:
        key = _canonical_serialization(
            graph,
            (0,) * len(graph.edges),
            1,
            tuple(() for _ in graph.genera),
            (),
            tuple((0, 0) for _ in graph.edges),
        )
        _graph_key_cache[graph] = key
    return key


# ---------------------------------------------------------------------------
# enumeration of stable graphs
# ---------------------------------------------------------------------------

_enum_cache: dict[tuple[int, int, int], list[StableGraph]] = {}


def enumerate_stable_graphs(g: int, n: int, max_edges: int) -> list[StableGraph]:
    """One representative per isomorphism class with at most max_edges edges."""
    if 3 * g - 3 + n < 0:
        raise ValueError("no stable curves for this (g, n)")
    max_edges = min(max_edges, 3 * g - 3 + n)
    cached = _enum_cache.get((g, n, max_edges))
    if cached is not None:
        return cached
    smooth = StableGraph((g,), (tuple(range(1, n + 1)),), ())
    smooth.validate()
    seen = {canonical_graph_key(smooth): smooth}
    frontier = [smooth]
    for _ in range(max_edges):
        nxt = []
        for graph in frontier:
            for child in _one_edge_degenerations(graph):
                key = canonical_graph_key(child)
                if key not in seen:
                    seen[key] = child
                    nxt.append(child)
        frontier = nxt
    out = [seen[k] for k in sorted(seen)]
    _enum_cache[(g, n, max_edges)] = out
    return out


def _one_edge_degenerations(graph: StableGraph) -> Iterable[StableGraph]:
    for v in range(graph.n_vertices):
        gv = graph.genera[v]
        if gv >= 1:
            genera = list(graph.genera)
            genera[v] = gv - 1
            yield StableGraph(tuple(genera), graph.legs, graph.edges + ((v, v),))
        slots = [("leg", m) for m in graph.legs[v]] + [
            ("side", s) for s in graph.sides_at(v)
        ]
        for g1 in range(gv + 1):
            g2 = gv - g1
            for bits in itertools.product((0, 1), repeat=len(slots)):
                s1 = [slots[i] for i in range(len(slots)) if bits[i] == 0]
                s2 = [slots[i] for i in range(len(slots)) if bits[i] == 1]
                if 2 * g1 - 2 + len(s1) + 1 <= 0 or 2 * g2 - 2 + len(s2) + 1 <= 0:
                    continue
                yield _split_vertex(graph, v, g1, g2, s1)


def _split_vertex(
    graph: StableGraph, v: int, g1: int, g2: int, slots1: Iterable
) -> StableGraph:
    """Split vertex v into (v: g1, slots1) and (appended vertex: g2, rest).

    Edge indices are preserved; the connecting edge is appended last with
    side 0 at v.
    """
    v2 = graph.n_vertices
    genera = list(graph.genera) + [g2]
    genera[v] = g1
    set1_legs = {m for kind, m in slots1 if kind == "leg"}
    set1_sides = {s for kind, s in slots1 if kind == "side"}
    legs = [list(ls) for ls in graph.legs] + [[]]
    keep = sorted(m for m in graph.legs[v] if m in set1_legs)
    move = sorted(m for m in graph.legs[v] if m not in set1_legs)
    legs[v] = keep
    legs[v2] = move
    edges = []
    for e, (u, w) in enumerate(graph.edges):
        nu, nw = u, w
        if u == v and (e, 0) not in set1_sides:
            nu = v2
        if w == v and (e, 1) not in set1_sides:
            nw = v2
        edges.append((nu, nw))
    edges.append((v, v2))
    return StableGraph(
        tuple(genera), tuple(tuple(ls) for ls in legs), tuple(edges)
    )


# ---------------------------------------------------------------------------
# weightings
# ---------------------------------------------------------------------------

_weighting_cache: dict[tuple, list[tuple[int, ...]]] = {}


def admissible_weightings(graph: StableGraph, ambient: Ambient) -> list[tuple[int, ...]]:
    """All balanced mod-r weightings passing the local selection rules.

    Solved along a spanning tree, so the work is r**h1 per graph; the count
    is r**h1(Gamma) whenever the global selection rule holds and 0 otherwise.
    """
    key = (graph, ambient)
    cached = _weighting_cache.get(key)
    if cached is not None:
        return cached
    r = ambient.r
    # BFS spanning tree from vertex 0
    parent: dict[int, int] = {}
    seen = {0}
    order = [0]
    tree_edges: set[int] = set()
    frontier = [0]
    while frontier:
        nxt = []
        for v in frontier:
            for e, (a, b) in enumerate(graph.edges):
                if e in tree_edges:
                    continue
                for x, y in ((a, b), (b, a)):
                    if x == v and y not in seen:
                        seen.add(y)
                        order.append(y)
                        parent[y] = e
                        tree_edges.add(e)
                        nxt.append(y)
                        break
        frontier = nxt
    free_edges = [e for e in range(len(graph.edges)) if e not in tree_edges]
    rhs = []
    for v in range(graph.n_vertices):
        val = ambient.grading_power * (2 * graph.genera[v] - 2 + graph.valence(v))
        val -= sum(ambient.leg_twists[m - 1] for m in graph.legs[v])
        rhs.append(val % r)
    out = []
    for free_vals in itertools.product(range(r), repeat=len(free_edges)):
        w = [0] * len(graph.edges)
        for e, val in zip(free_edges, free_vals):
            w[e] = val
        ok = True
        for v in reversed(order):
            acc = 0
            pend_side = None
            pe = parent.get(v)
            for e, side in graph.sides_at(v):
                if e == pe:
                    pend_side = side
                else:
                    acc += w[e] if side == 0 else opposite_weight(w[e], r)
            if pe is None:
                if (acc - rhs[v]) % r:
                    ok = False
                    break
            else:
                val = (rhs[v] - acc) % r
                w[pe] = val if pend_side == 0 else opposite_weight(val, r)
        if ok:
            out.append(tuple(w))
    _weighting_cache[key] = out
    return out


def enumerate_weightings(
    graph: StableGraph,
    r: int,
    leg_monodromies: Sequence[int],
    grading_power: int = 1,
) -> list[tuple[int, ...]]:
    """Spec-facing wrapper around :func:`admissible_weightings`."""
    g = graph.total_genus()
    n = sum(len(ls) for ls in graph.legs)
    amb = Ambient(g, n, r, tuple(x % r for x in leg_monodromies), grading_power)
    return admissible_weightings(graph, amb)


def _weighting_ok(graph: StableGraph, ambient: Ambient, w: Sequence[int]) -> bool:
    r = ambient.r
    for v in range(graph.n_vertices):
        total = sum(ambient.leg_twists[m - 1] for m in graph.legs[v])
        for e, side in graph.sides_at(v):
            total += w[e] if side == 0 else opposite_weight(w[e], r)
        rhs = ambient.grading_power * (2 * graph.genera[v] - 2 + graph.valence(v))
        if (total - rhs) % r:
            return False
    return True


# ---------------------------------------------------------------------------
# decorated terms and expressions
# ---------------------------------------------------------------------------


_term_key_cache: dict[tuple, tuple] = {}


class StrataTerm:
    """A decorated, weighted stable graph (construct once, treat as frozen)."""

    __slots__ = ("graph", "weighting", "kappa", "leg_psi", "edge_psi", "_key", "_deg")

    def __init__(
        self,
        graph: StableGraph,
        weighting: Sequence[int],
        kappa: Sequence[Sequence[int]] | None = None,
        leg_psi: Mapping[int, int] | None = None,
        edge_psi: Sequence[tuple[int, int]] | None = None,
    ):
        self.graph = graph
        self.weighting = tuple(weighting)
        self.kappa = (
            tuple(tuple(sorted(k)) for k in kappa)
            if kappa is not None
            else tuple(() for _ in graph.genera)
        )
        self.leg_psi = {m: p for m, p in (leg_psi or {}).items() if p}
        self.edge_psi = (
            tuple(edge_psi)
            if edge_psi is not None
            else tuple((0, 0) for _ in graph.edges)
        )
        self._key: dict[int, tuple] = {}
        self._deg: int | None = None

    @classmethod
    def _make(cls, graph, weighting, kappa, leg_psi, edge_psi) -> "StrataTerm":
        """Trusted fast path: kappa tuples sorted, leg_psi already clean."""
        out = cls.__new__(cls)
        out.graph = graph
        out.weighting = weighting
        out.kappa = kappa
        out.leg_psi = leg_psi
        out.edge_psi = edge_psi
        out._key = {}
        out._deg = None
        return out

    def degree(self) -> int:
        d = self._deg
        if d is None:
            d = (
                len(self.graph.edges)
                + sum(a for k in self.kappa for a in k)
                + sum(self.leg_psi.values())
                + sum(p0 + p1 for p0, p1 in self.edge_psi)
            )
            self._deg = d
        return d

    def key(self, r: int) -> tuple:
        key = self._key.get(r)
        if key is None:
            raw = (
                self.graph,
                self.weighting,
                self.kappa,
                tuple(sorted(self.leg_psi.items())),
                self.edge_psi,
                r,
            )
            key = _term_key_cache.get(raw)
            if key is None:
                key = _canonical_serialization(
                    self.graph, self.weighting, r, self.kappa, raw[3], self.edge_psi
                )
                _term_key_cache[raw] = key
            self._key[r] = key
        return key


def canonicalize(term: StrataTerm, r: int) -> tuple:
    """Canonical key: equal exactly for isomorphic decorated weighted terms."""
    return term.key(r)


class StrataExpression:
    """Linear combination of canonical strata terms over a coefficient ring.

    Coefficients may be Fractions, RationalFunctions, or LaurentSeries;
    anything supporting +, *, scaling by Fraction and truthiness works.
    """

    __slots__ = ("ambient", "_terms")

    def __init__(self, ambient: Ambient):
        self.ambient = ambient
        self._terms: dict[tuple, list] = {}

    @staticmethod
    def one(ambient: Ambient, coeff=Fraction(1)) -> StrataExpression:
        out = StrataExpression(ambient)
        smooth = StableGraph((ambient.g,), (tuple(range(1, ambient.n + 1)),), ())
        out.add(StrataTerm(smooth, ()), coeff)
        return out

    @staticmethod
    def zero(ambient: Ambient) -> StrataExpression:
        return StrataExpression(ambient)

    def ring_zero(self):
        return Fraction(0)

    def add(self, term: StrataTerm, coeff) -> None:
        if not coeff:
            return
        key = term.key(self.ambient.r)
        slot = self._terms.get(key)
        if slot is None:
            self._terms[key] = [term, coeff]
        else:
            slot[1] = slot[1] + coeff
            if not slot[1]:
                del self._terms[key]

    def terms(self):
        for key in sorted(self._terms):
            term, coeff = self._terms[key]
            yield term, coeff

    def n_terms(self) -> int:
        return len(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def scale(self, c) -> StrataExpression:
        out = StrataExpression(self.ambient)
        if not c:
            return out
        for key, (term, coeff) in self._terms.items():
            newc = coeff * c
            if newc:
                out._terms[key] = [term, newc]
        return out

    def map_coefficients(self, fn: Callable) -> StrataExpression:
        out = StrataExpression(self.ambient)
        for key, (term, coeff) in self._terms.items():
            newc = fn(coeff)
            if newc:
                out._terms[key] = [term, newc]
        return out

    def __add__(self, other: StrataExpression) -> StrataExpression:
        if self.ambient != other.ambient:
            raise ValueError("ambient mismatch")
        out = StrataExpression(self.ambient)
        out._terms = {k: [t, c] for k, (t, c) in self._terms.items()}
        for key, (term, coeff) in other._terms.items():
            slot = out._terms.get(key)
            if slot is None:
                out._terms[key] = [term, coeff]
            else:
                slot[1] = slot[1] + coeff
                if not slot[1]:
                    del out._terms[key]
        return out

    def __neg__(self) -> StrataExpression:
        return self.scale(Fraction(-1))

    def __sub__(self, other: StrataExpression) -> StrataExpression:
        return self + (-other)

    def degree_part(self, d: int) -> StrataExpression:
        out = StrataExpression(self.ambient)
        for key, (term, coeff) in self._terms.items():
            if term.degree() == d:
                out._terms[key] = [term, coeff]
        return out

    def max_degree(self) -> int:
        return max((t.degree() for t, _ in self.terms()), default=-1)


# ---------------------------------------------------------------------------
# products
# ---------------------------------------------------------------------------


def strata_mul(
    X: StrataExpression, Y: StrataExpression, dim_cap: int | None = None
) -> StrataExpression:
    """Excess-intersection product of strata expressions.

    At least one factor must consist of terms with at most one edge (every
    use in the engine multiplies by Chern-character pieces, which have that
    shape); the general case reduces to it by commutativity.
    """
    if X.ambient != Y.ambient:
        raise ValueError("ambient mismatch between factors")
    if dim_cap is None:
        dim_cap = X.ambient.dim
    y_simple = all(len(t.graph.edges) <= 1 for t, _ in Y.terms())
    if not y_simple:
        if all(len(t.graph.edges) <= 1 for t, _ in X.terms()):
            return strata_mul(Y, X, dim_cap)
        raise ValueError("one factor must have terms with at most one edge")
    out = StrataExpression(X.ambient)
    y_terms = [(ty, cy, ty.degree()) for ty, cy in Y.terms()]
    for tx, cx in X.terms():
        dx = tx.degree()
        for ty, cy, dy in y_terms:
            if dx + dy > dim_cap:
                continue
            c = cx * cy
            if not c:
                continue
            scaled: dict[Fraction, object] = {}
            for term, extra in _mul_term(tx, ty, X.ambient):
                cc = scaled.get(extra)
                if cc is None:
                    cc = c * extra
                    scaled[extra] = cc
                out.add(term, cc)
    return out


def _mul_term(tx: StrataTerm, ty: StrataTerm, ambient: Ambient):
    if len(ty.graph.edges) == 0:
        yield from _mul_smooth(tx, ty)
    elif len(ty.graph.edges) == 1:
        yield from _mul_one_edge(tx, ty, ambient)
    else:  # pragma: no cover - guarded by strata_mul
        raise ValueError("second factor must have at most one edge")


def _mul_smooth(tx: StrataTerm, ty: StrataTerm):
    graph = tx.graph
    kap_y = ty.kappa[0]
    new_leg_psi = dict(tx.leg_psi)
    for m, p in ty.leg_psi.items():
        new_leg_psi[m] = new_leg_psi.get(m, 0) + p
    # kappa classes restrict to a stratum as the sum over its vertices
    for assign in itertools.product(range(graph.n_vertices), repeat=len(kap_y)):
        kappa = [list(k) for k in tx.kappa]
        for a, v in zip(kap_y, assign):
            kappa[v].append(a)
        yield (
            StrataTerm._make(
                graph,
                tx.weighting,
                tuple(tuple(sorted(k)) for k in kappa),
                new_leg_psi,
                tx.edge_psi,
            ),
            Fraction(1),
        )


def _components_without(graph: StableGraph, skip_edge: int) -> list[int]:
    comp = list(range(graph.n_vertices))

    def find(x):
        while comp[x] != x:
            comp[x] = comp[comp[x]]
            x = comp[x]
        return x

    for i, (a, b) in enumerate(graph.edges):
        if i == skip_edge:
            continue
        ra, rb = find(a), find(b)
        if ra != rb:
            comp[ra] = rb
    return [find(v) for v in range(graph.n_vertices)]


def _side_data(graph: StableGraph, e: int):
    """(genus, legs) aggregates of the two sides of edge e, or None if non-sep."""
    u, w = graph.edges[e]
    comp = _components_without(graph, e)
    if comp[u] == comp[w]:
        return None
    sides = []
    for root in (u, w):
        cid = comp[root]
        verts = [v for v in range(graph.n_vertices) if comp[v] == cid]
        edges_in = sum(
            1 for i, (a, b) in enumerate(graph.edges) if i != e and comp[a] == cid
        )
        genus = sum(graph.genera[v] for v in verts) + edges_in - len(verts) + 1
        legs = frozenset(m for v in verts for m in graph.legs[v])
        sides.append((genus, legs))
    return tuple(sides)


def _distribute_kappa(base_kappa: Sequence[Sequence[int]], jobs):
    """Expand kappa factors restricted to vertex subsets (sum over choices).

    jobs is a list of (kappa_index, allowed_vertices); each factor lands on
    one allowed vertex, every combination taken once.
    """
    if not jobs:
        yield tuple(base_kappa)
        return
    pools = [allowed for _, allowed in jobs]
    for assign in itertools.product(*pools):
        kappa = [list(k) for k in base_kappa]
        for (a, _), v in zip(jobs, assign):
            kappa[v].append(a)
        yield tuple(tuple(sorted(k)) for k in kappa)


_side_cache: dict[tuple, object] = {}
_placement_cache: dict[tuple, list] = {}


def _side_data_cached(graph: StableGraph, e: int):
    key = (graph, e)
    if key not in _side_cache:
        _side_cache[key] = _side_data(graph, e)
    return _side_cache[key]


def _placements(graph: StableGraph, weighting: tuple, k_lam: int, lam_sides, ambient: Ambient):
    """Placement descriptors of a one-edge class onto a weighted graph.

    Descriptors carry only combinatorial data; decorations are transported
    by the caller.  Cached: the enumeration is independent of decorations.

      ("exc", e, rho, verts0, verts1)
      ("drop", v, new_graph, new_weighting, aut_ratio)
      ("split", v, v2, new_graph, new_weighting, aut_ratio, verts0, verts1)

    aut_ratio is |Aut Pi| / |Aut Gamma|; the caller divides by |Aut Lambda|.
    """
    cache_key = (graph, weighting, k_lam, lam_sides, ambient)
    hit = _placement_cache.get(cache_key)
    if hit is not None:
        return hit
    r = ambient.r
    aut_x = graph.aut_order()
    out = []
    all_verts = tuple(range(graph.n_vertices))
    # excess placements
    for e in range(len(graph.edges)):
        tx_sides = _side_data_cached(graph, e)
        comp = _components_without(graph, e)
        eu, ew = graph.edges[e]
        for rho in (0, 1):
            k_here = weighting[e] % r if rho == 0 else opposite_weight(weighting[e], r)
            if k_here != k_lam:
                continue
            if lam_sides is None:
                if tx_sides is not None:
                    continue
                verts0, verts1 = all_verts, all_verts
            else:
                if tx_sides is None:
                    continue
                ordered = tx_sides if rho == 0 else (tx_sides[1], tx_sides[0])
                if ordered != lam_sides:
                    continue
                anchor0 = eu if rho == 0 else ew
                anchor1 = ew if rho == 0 else eu
                verts0 = tuple(v for v in all_verts if comp[v] == comp[anchor0])
                verts1 = tuple(v for v in all_verts if comp[v] == comp[anchor1])
            out.append(("exc", e, rho, verts0, verts1))
    # refinement placements
    for v in range(graph.n_vertices):
        gv = graph.genera[v]
        if lam_sides is None and gv >= 1:
            genera = list(graph.genera)
            genera[v] = gv - 1
            new_graph = StableGraph(tuple(genera), graph.legs, graph.edges + ((v, v),))
            new_w = weighting + (k_lam,)
            if _weighting_ok(new_graph, ambient, new_w):
                ratio = Fraction(new_graph.aut_order(), aut_x)
                out.append(("drop", v, new_graph, new_w, ratio))
        slots = [("leg", m) for m in graph.legs[v]] + [
            ("side", s) for s in graph.sides_at(v)
        ]
        for g1 in range(gv + 1):
            g2 = gv - g1
            for bits in itertools.product((0, 1), repeat=len(slots)):
                s1 = [slots[i] for i in range(len(slots)) if bits[i] == 0]
                n1 = len(s1)
                n2 = len(slots) - n1
                if 2 * g1 - 2 + n1 + 1 <= 0 or 2 * g2 - 2 + n2 + 1 <= 0:
                    continue
                new_graph = _split_vertex(graph, v, g1, g2, s1)
                e_new = len(new_graph.edges) - 1
                sides = _side_data_cached(new_graph, e_new)
                if lam_sides is None:
                    if sides is not None:
                        continue
                else:
                    if sides is None or sides != lam_sides:
                        continue
                new_w = weighting + (k_lam,)
                if not _weighting_ok(new_graph, ambient, new_w):
                    continue
                ratio = Fraction(new_graph.aut_order(), aut_x)
                v2 = new_graph.n_vertices - 1
                if lam_sides is None:
                    verts0 = tuple(range(new_graph.n_vertices))
                    verts1 = verts0
                else:
                    comp2 = _components_without(new_graph, e_new)
                    verts0 = tuple(
                        x for x in range(new_graph.n_vertices) if comp2[x] == comp2[v]
                    )
                    verts1 = tuple(
                        x for x in range(new_graph.n_vertices) if comp2[x] == comp2[v2]
                    )
                out.append(("split", v, v2, new_graph, new_w, ratio, verts0, verts1))
    _placement_cache[cache_key] = out
    return out


def _mul_one_edge(tx: StrataTerm, ty: StrataTerm, ambient: Ambient):
    r = ambient.r
    lam = ty.graph
    aut_y = lam.aut_order()
    inv_aut_y = Fraction(1, aut_y)
    k_lam = ty.weighting[0] % r
    q0, q1 = ty.edge_psi[0]
    if _side_data_cached(lam, 0) is not None:
        u0, w0 = lam.edges[0]
        lam_sides = (
            (lam.genera[u0], frozenset(lam.legs[u0])),
            (lam.genera[w0], frozenset(lam.legs[w0])),
        )
        kap_y = (ty.kappa[u0], ty.kappa[w0])
    else:
        lam_sides = None
        kap_y = (ty.kappa[lam.edges[0][0]], ())

    if ty.leg_psi:
        leg_psi = dict(tx.leg_psi)
        for m, p in ty.leg_psi.items():
            leg_psi[m] = leg_psi.get(m, 0) + p
    else:
        leg_psi = tx.leg_psi

    excess_coeff = Fraction(-1, r if CONVENTIONS.excess_over_r else 1) * inv_aut_y
    for placement in _placements(tx.graph, tx.weighting, k_lam, lam_sides, ambient):
        kind = placement[0]
        if kind == "exc":
            _, e, rho, verts0, verts1 = placement
            p0, p1 = tx.edge_psi[e]
            if rho == 0:
                p0, p1 = p0 + q0, p1 + q1
            else:
                p0, p1 = p0 + q1, p1 + q0
            jobs = [(a, verts0) for a in kap_y[0]] + [(a, verts1) for a in kap_y[1]]
            for kappa in _distribute_kappa(tx.kappa, jobs):
                for bump in (0, 1):
                    ep = list(tx.edge_psi)
                    ep[e] = (p0 + 1 - bump, p1 + bump)
                    yield (
                        StrataTerm._make(
                            tx.graph, tx.weighting, kappa, leg_psi, tuple(ep)
                        ),
                        excess_coeff,
                    )
        elif kind == "drop":
            _, v, new_graph, new_w, ratio = placement
            factor = ratio * inv_aut_y
            jobs = [(a, range(new_graph.n_vertices)) for a in kap_y[0]]
            for kappa in _distribute_kappa(tx.kappa, jobs):
                yield (
                    StrataTerm._make(
                        new_graph,
                        new_w,
                        kappa + ((),),
                        leg_psi,
                        tx.edge_psi + ((q0, q1),),
                    ),
                    factor,
                )
        else:
            _, v, v2, new_graph, new_w, ratio, verts0, verts1 = placement
            factor = ratio * inv_aut_y
            base_kappa = list(tx.kappa) + [()]
            kv = base_kappa[v]
            base_kappa[v] = ()
            jobs = (
                [(a, (v, v2)) for a in kv]
                + [(a, verts0) for a in kap_y[0]]
                + [(a, verts1) for a in kap_y[1]]
            )
            for kappa in _distribute_kappa(base_kappa, jobs):
                yield (
                    StrataTerm._make(
                        new_graph,
                        new_w,
                        kappa,
                        leg_psi,
                        tx.edge_psi + ((q0, q1),),
                    ),
                    factor,
                )


def _exp_series(M: StrataExpression, dim_cap: int) -> StrataExpression:
    out = StrataExpression.one(M.ambient)
    power = StrataExpression.one(M.ambient)
    fact = 1
    for k in range(1, dim_cap + 1):
        power = strata_mul(power, M, dim_cap)
        if power.is_zero():
            break
        fact *= k
        out = out + power.scale(Fraction(1, fact))
    return out


def strata_exp(M: StrataExpression, dim_cap: int | None = None) -> StrataExpression:
    """exp(M) computed degree by degree; M must have no degree-0 part.

    Split as exp(boundary part) * exp(smooth part): the smooth factor stays
    on the smooth graph, so the mixed products happen once at the end.
    """
    if dim_cap is None:
        dim_cap = M.ambient.dim
    if any(t.degree() == 0 for t, _ in M.terms()):
        raise ValueError("exponent must have no degree-0 part")
    smooth = StrataExpression(M.ambient)
    boundary = StrataExpression(M.ambient)
    for key, (term, coeff) in M._terms.items():
        target = smooth if not term.graph.edges else boundary
        target._terms[key] = [term, coeff]
    if smooth.is_zero():
        return _exp_series(boundary, dim_cap)
    if boundary.is_zero():
        return _exp_series(smooth, dim_cap)
    return strata_mul(
        _exp_series(boundary, dim_cap), _exp_series(smooth, dim_cap), dim_cap
    )
