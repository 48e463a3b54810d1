"""Reduction of decorated strata to numbers.

The backend is the Witten--Kontsevich correlator engine: psi-class
intersection numbers <tau_{d_1} ... tau_{d_n}>_g on Mbar_{g,n} computed by
the DVV (Virasoro) recursion with string/dilaton shortcuts, a kappa-to-psi
conversion by marked-point splitting, and the pairing of a strata
expression against a psi monomial.
"""

from __future__ import annotations

import os
from fractions import Fraction
from itertools import combinations
from math import comb
from typing import Iterable, Sequence

from .graphs import StrataExpression

CorrelatorKey = tuple[int, tuple[int, ...]]

_ZERO = Fraction(0)


def _dfact(m: int) -> int:
    """Odd double factorial m!! with (-1)!! = 1."""
    out = 1
    while m > 1:
        out *= m
        m -= 2
    return out


class CacheError(RuntimeError):
    """Raised on any malformed or inconsistent persistent cache content."""


class CorrelatorCache:
    """Memo table for psi correlators with optional TSV persistence.

    File format (``correlators.v1.tsv``): one entry per line,
    ``g<TAB>d1,d2,...<TAB>p/q``.  Any line not of that shape is a hard
    error; silent skipping would hide corruption.
    """

    FILENAME = "correlators.v1.tsv"

    def __init__(self, directory: str | None = None):
        self.table: dict[CorrelatorKey, Fraction] = {}
        self.directory = directory
        self.hits = 0
        self.misses = 0
        self.loaded = 0
        if directory is not None:
            self.load()

    @property
    def path(self) -> str | None:
        if self.directory is None:
            return None
        return os.path.join(self.directory, self.FILENAME)

    def load(self) -> None:
        path = self.path
        if path is None or not os.path.exists(path):
            return
        with open(path, "r", encoding="ascii") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.rstrip("\n")
                if not line:
                    continue
                parts = line.split("\t")
                if len(parts) != 3:
                    raise CacheError(f"{path}:{lineno}: expected 3 tab fields")
                try:
                    g = int(parts[0])
                    ds = tuple(int(x) for x in parts[1].split(","))
                    val = Fraction(parts[2])
                except (ValueError, ZeroDivisionError) as exc:
                    raise CacheError(f"{path}:{lineno}: {exc}") from exc
                if g < 0 or any(d < 0 for d in ds) or ds != tuple(sorted(ds)):
                    raise CacheError(f"{path}:{lineno}: malformed key")
                key = (g, ds)
                if key in self.table and self.table[key] != val:
                    raise CacheError(f"{path}:{lineno}: conflicting duplicate entry")
                self.table[key] = val
        self.loaded = len(self.table)

    def save(self) -> None:
        path = self.path
        if path is None:
            return
        os.makedirs(self.directory, exist_ok=True)
        with open(path, "w", encoding="ascii") as fh:
            for (g, ds), val in sorted(self.table.items()):
                fh.write(f"{g}\t{','.join(str(d) for d in ds)}\t{val}\n")

    def clear(self) -> None:
        self.table.clear()
        path = self.path
        if path is not None and os.path.exists(path):
            os.remove(path)

    def verify(self) -> int:
        """Recompute every persisted entry from scratch; return the count.

        Raises :class:`CacheError` naming the first mismatching key.
        """
        fresh = CorrelatorCache()
        for (g, ds), val in sorted(self.table.items()):
            recomputed = psi_correlator(g, ds, cache=fresh)
            if recomputed != val:
                raise CacheError(
                    f"cache entry {(g, ds)} = {val} but recomputation gives {recomputed}"
                )
        return len(self.table)

    def stats(self) -> dict:
        return {
            "entries": len(self.table),
            "hits": self.hits,
            "misses": self.misses,
            "loaded": self.loaded,
        }


#: process-wide default cache (in memory only until a directory is attached)
DEFAULT_CACHE = CorrelatorCache()


def psi_correlator(
    g: int, degrees: Iterable[int], cache: CorrelatorCache | None = None
) -> Fraction:
    """Intersection number <tau_{d_1} ... tau_{d_n}>_g, exactly.

    Returns 0 whenever the degree condition sum d_i = 3g-3+n fails or the
    pair (g, n) is unstable.  Everything is generated from <tau_0^3>_0 = 1
    and <tau_1>_1 = 1/24 by the DVV recursion.
    """
    if cache is None:
        cache = DEFAULT_CACHE
    ds = tuple(sorted(degrees))
    n = len(ds)
    if g < 0 or any(d < 0 for d in ds):
        return _ZERO
    if 3 * g - 3 + n < 0:
        return _ZERO
    if sum(ds) != 3 * g - 3 + n:
        return _ZERO
    key = (g, ds)
    hit = cache.table.get(key)
    if hit is not None:
        cache.hits += 1
        return hit
    cache.misses += 1
    val = _psi_correlator_uncached(g, ds, cache)
    cache.table[key] = val
    return val


def _psi_correlator_uncached(g: int, ds: tuple[int, ...], cache) -> Fraction:
    n = len(ds)
    if (g, ds) == (0, (0, 0, 0)):
        return Fraction(1)
    if (g, ds) == (1, (1,)):
        return Fraction(1, 24)
    # string equation
    if ds[0] == 0:
        rest = ds[1:]
        return sum(
            (
                psi_correlator(g, rest[:j] + (rest[j] - 1,) + rest[j + 1 :], cache)
                for j in range(len(rest))
                if rest[j] >= 1
            ),
            _ZERO,
        )
    # dilaton equation
    if ds[0] == 1:
        rest = ds[1:]
        return (2 * g - 2 + n - 1) * psi_correlator(g, rest, cache)
    # DVV on the largest insertion
    k = ds[-1] - 1
    rest = ds[:-1]
    total = _ZERO
    for j in range(len(rest)):
        others = rest[:j] + rest[j + 1 :]
        total += Fraction(_dfact(2 * (k + rest[j]) + 1), _dfact(2 * rest[j] - 1)) * psi_correlator(
            g, others + (k + rest[j],), cache
        )
    quad = _ZERO
    for a in range(0, k):
        b = k - 1 - a
        w = Fraction(_dfact(2 * a + 1) * _dfact(2 * b + 1))
        quad += w * psi_correlator(g - 1, rest + (a, b), cache)
        for g1 in range(0, g + 1):
            g2 = g - g1
            for size in range(len(rest) + 1):
                for I in combinations(range(len(rest)), size):
                    setI = set(I)
                    dI = tuple(rest[i] for i in I)
                    dJ = tuple(rest[i] for i in range(len(rest)) if i not in setI)
                    left = psi_correlator(g1, dI + (a,), cache)
                    if left:
                        quad += w * left * psi_correlator(g2, dJ + (b,), cache)
    total += quad / 2
    return total / _dfact(2 * k + 3)


# ---------------------------------------------------------------------------
# kappa reduction
# ---------------------------------------------------------------------------


def _set_partitions(items: Sequence[int]):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in _set_partitions(rest):
        for i in range(len(part)):
            yield part[:i] + [part[i] + [first]] + part[i + 1 :]
        yield [[first]] + part


def kappa_reduce(
    kappas: Sequence[int], psis: Sequence[int], g: int
) -> list[tuple[CorrelatorKey, Fraction]]:
    """Expand an integral of kappa_{a_1}...kappa_{a_k} psi^{b} into pure psi terms.

    Uses the kappa_a = pi_*(psi^{a+1}) convention: each kappa factor becomes
    a new marking; merging a subset B of kappa factors into one marking
    carries the sign (-1)**(|B|-1) and the index sum(B) + 1.  The returned
    pairs (key, coefficient) satisfy

        int kappa-monomial * psi-monomial = sum coeff * <key>.
    """
    kappas = tuple(kappas)
    base = tuple(psis)
    if not kappas:
        return [((g, tuple(sorted(base))), Fraction(1))]
    out: list[tuple[CorrelatorKey, Fraction]] = []
    for part in _set_partitions(list(range(len(kappas)))):
        coeff = Fraction(1)
        extra = []
        for block in part:
            if len(block) % 2 == 0:
                coeff = -coeff
            extra.append(sum(kappas[i] for i in block) + 1)
        key = (g, tuple(sorted(base + tuple(extra))))
        out.append((key, coeff))
    return out


_vertex_cache: dict[tuple, Fraction] = {}


def vertex_integral(
    g: int,
    psis: Sequence[int],
    kappas: Sequence[int] = (),
    cache: CorrelatorCache | None = None,
) -> Fraction:
    """Integral over Mbar_{g,n} of a psi monomial times a kappa monomial."""
    key = (g, tuple(sorted(psis)), tuple(sorted(kappas)))
    hit = _vertex_cache.get(key)
    if hit is not None:
        return hit
    total = _ZERO
    for (gg, ds), coeff in kappa_reduce(key[2], key[1], g):
        total += coeff * psi_correlator(gg, ds, cache=cache)
    _vertex_cache[key] = total
    return total


# ---------------------------------------------------------------------------
# the pairing
# ---------------------------------------------------------------------------


def pair(
    X: StrataExpression,
    psi_powers: Sequence[int],
    cache: CorrelatorCache | None = None,
):
    """Pair a strata expression against prod_i psi_i^{b_i}.

    Returns a value in the expression's coefficient ring: for each term the
    product of per-vertex integrals, weighted by r**(2g-1-h1(Gamma)) and
    1/|Aut Gamma|.  The psi powers attach to the legs; the weighting and
    decorations ride along from the term data.
    """
    amb = X.ambient
    b = tuple(psi_powers)
    if len(b) != amb.n:
        raise ValueError(f"expected {amb.n} psi powers, got {len(b)}")
    total = None
    r = amb.r
    for term, coeff in X.terms():
        graph = term.graph
        num = Fraction(1)
        h1 = len(graph.edges) - len(graph.genera) + 1
        exp = 2 * amb.g - 1 - h1
        scale = Fraction(r**exp) if exp >= 0 else Fraction(1, r**-exp)
        scale /= graph.aut_order()
        ok = True
        for v in range(len(graph.genera)):
            psis = [term.leg_psi.get(i, 0) + b[i - 1] for i in graph.legs[v]]
            psis += [
                term.edge_psi[e][side]
                for e, (u, w) in enumerate(graph.edges)
                for side in (0, 1)
                if (u if side == 0 else w) == v
            ]
            val = vertex_integral(graph.genera[v], psis, term.kappa[v], cache=cache)
            if not val:
                ok = False
                break
            num *= val
        contrib = coeff * (num * scale) if ok else None
        if contrib is not None:
            total = contrib if total is None else total + contrib
    if total is None:
        total = X.ring_zero()
    return total
