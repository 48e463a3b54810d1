"""The t -> 1 limit: Hodge integrals, the genus-0 oracle, and relations.

Every paired value of the pre-limit class is a rational function of t,
expanded here as a Laurent series in eps = t**-1 - 1.  Existence of the
limit (no pole at t = 1) is the content of the main identity, so pole
detection is treated as a computation-integrity failure rather than a
result.  The negative-eps coefficients paired against a spanning family
of psi monomials are the tautological-relation certificates.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import factorial
from typing import Sequence

from .arith import LaurentSeries
from .classes import (
    AssemblyData,
    SeriesContext,
    bundle_ch,
    cohft_normalize,
    total_class,
)
from .graphs import (
    StrataExpression,
    admissible_weightings,
    enumerate_stable_graphs,
    strata_mul,
)
from .integrate import CorrelatorCache, pair
from .model import Sector


class PoleAtOneError(RuntimeError):
    """A paired value has a pole at t = 1: the limit formula is violated."""

    def __init__(self, message: str, series: LaurentSeries):
        super().__init__(message)
        self.series = series


@dataclass
class HodgeIntegralResult:
    sector: Sector
    variant: str
    psi_powers: tuple[int, ...]
    laurent: LaurentSeries
    value: Fraction
    pole_order_found: int
    degvir: int
    p: int


@dataclass
class RelationCertificate:
    """Vanishing verdict for one negative-eps coefficient C_m."""

    m: int
    entries: list[tuple[tuple[int, ...], Fraction]] = field(default_factory=list)

    @property
    def verdict(self) -> str:
        return "PASS" if all(v == 0 for _, v in self.entries) else "FAIL"

    def failures(self) -> list[tuple[tuple[int, ...], Fraction]]:
        return [(b, v) for b, v in self.entries if v != 0]


def _series_order_for(sector: Sector, variant: str) -> int:
    data = sector.assembly(variant)
    pole_budget = sum(max(0, int(b.ch0)) for b in data.bundles)
    return sector.ambient().dim + pole_budget + 3


class SectorEngine:
    """Computes and caches the pre-limit class of one sector and variant."""

    def __init__(self, sector: Sector, variant: str = "twisted",
                 cache: CorrelatorCache | None = None):
        self.sector = sector
        self.variant = variant
        self.cache = cache
        self.data = sector.assembly(variant)
        self.order = _series_order_for(sector, variant)
        self._klass: StrataExpression | None = None

    def klass(self) -> StrataExpression:
        if self._klass is None:
            self._klass = total_class(self.data, SeriesContext(self.order))
        return self._klass

    def paired(self, psi_powers: Sequence[int]) -> LaurentSeries:
        val = pair(self.klass(), tuple(psi_powers), cache=self.cache)
        if isinstance(val, Fraction):
            val = LaurentSeries.from_rat(val)
        return val


def hodge_integral(
    sector: Sector,
    psi_powers: Sequence[int] | None = None,
    variant: str = "twisted",
    cache: CorrelatorCache | None = None,
    engine: SectorEngine | None = None,
) -> HodgeIntegralResult:
    """The exact value of the lambda_g^dual-capped virtual-class integral.

    Pairs the pre-limit class with the psi monomial, asserts regularity at
    t = 1, and normalizes the eps^0 coefficient by the CohFT pushforward
    factor (-1)**degvir card(G)**g / deg(o).
    """
    b = tuple(psi_powers) if psi_powers is not None else (0,) * sector.n
    if engine is None:
        engine = SectorEngine(sector, variant, cache)
    series = engine.paired(b)
    lead = series.leading_exponent
    pole = -lead if lead is not None and lead < 0 else 0
    if pole > 0:
        raise PoleAtOneError(
            f"pairing {b} of sector {sector.monodromies} has a pole of order "
            f"{pole} at t = 1",
            series,
        )
    value = cohft_normalize(
        series.coefficient(0),
        sector.degvir(),
        sector.orb.group_order,
        sector.genus,
    )
    return HodgeIntegralResult(
        sector=sector,
        variant=variant,
        psi_powers=b,
        laurent=series,
        value=value,
        pole_order_found=-lead if lead is not None else 0,
        degvir=sector.degvir(),
        p=sector.p_value(),
    )


def _psi_tuples(n: int, total: int):
    """All b in Z_{>=0}**n with sum(b) == total."""
    if n == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _psi_tuples(n - 1, total - first):
            yield (first,) + rest


def relation_certificates(
    sector: Sector,
    variant: str = "twisted",
    cache: CorrelatorCache | None = None,
    engine: SectorEngine | None = None,
) -> list[RelationCertificate]:
    """Certificates that all negative-eps coefficients pair to zero.

    For every psi monomial b of codegree k := dim - |b| the pairing's
    eps^m coefficient must vanish for all m < degvir + g - k (the grading
    bound) and in particular for all m < 0 (the relations).  Each negative
    m gets one certificate collecting every complementary monomial.
    """
    if engine is None:
        engine = SectorEngine(sector, variant, cache)
    amb = sector.ambient()
    dim = amb.dim
    degvir = sector.degvir()
    p = sector.p_value()
    certs = {m: RelationCertificate(m) for m in range(-p, 0)}
    for total in range(dim + 1):
        k = dim - total
        bound = degvir + sector.genus - k
        for b in _psi_tuples(sector.n, total):
            series = engine.paired(b)
            lead = series.leading_exponent
            if lead is not None and lead < -p:
                raise PoleAtOneError(
                    f"pairing {b}: Laurent exponent {lead} below -p = {-p}",
                    series,
                )
            for m in range(-p, min(0, bound)):
                coeff = series.coefficient(m)
                certs[m].entries.append((b, coeff))
    return [certs[m] for m in sorted(certs)]


# ---------------------------------------------------------------------------
# genus-0 concavity oracle
# ---------------------------------------------------------------------------


class OracleUnavailable(RuntimeError):
    """Concavity fails: the Euler-class route does not apply."""


def _concavity_certificate(sector: Sector) -> None:
    """Check h^0 = 0 fiberwise on every stratum (all vertex degrees < 0)."""
    if sector.genus != 0:
        raise OracleUnavailable("oracle is genus-0 only")
    amb = sector.ambient()
    orb = sector.orb
    R, d = orb.group_order, orb.degree
    twists = {j: sector.twists(j, "twisted") for j in range(orb.nvars)}
    for graph in enumerate_stable_graphs(0, sector.n, amb.dim):
        for w in admissible_weightings(graph, amb):
            for v in range(graph.n_vertices):
                val = graph.valence(v)
                for j in range(orb.nvars):
                    s_j = R * orb.weights[j] // d
                    acc = s_j * (2 * graph.genera[v] - 2 + val)
                    for m in graph.legs[v]:
                        acc -= twists[j][m - 1]
                    for e, side in graph.sides_at(v):
                        kv = w[e] if side == 0 else (R - w[e]) % R
                        acc -= (orb.generator[j] * kv) % R
                    if acc % R:
                        raise OracleUnavailable(
                            "non-integral local degree; sector not concave-checkable"
                        )
                    if acc // R >= 0:
                        raise OracleUnavailable(
                            f"variable {j} not concave on a stratum vertex "
                            f"(degree {acc // R})"
                        )


def genus0_oracle(
    sector: Sector,
    psi_powers: Sequence[int] | None = None,
    cache: CorrelatorCache | None = None,
) -> Fraction:
    """Euler-class route: pair c_top of the dual obstruction bundle directly.

    Valid when every R^0 pi_* L_j^R vanishes fiberwise; the value then
    matches hodge_integral by the genus-0 specialization of the limit
    identity, with the overall sign pinned against the (-1)**degvir
    pushforward normalization.
    """
    _concavity_certificate(sector)
    b = tuple(psi_powers) if psi_powers is not None else (0,) * sector.n
    data = sector.assembly("twisted")
    amb = data.ambient
    degvir = sector.degvir()
    # Chern character of V = sum_j (R^1 pi_* L_j^R)^dual
    chs: dict[int, StrataExpression] = {}
    for l in range(1, degvir + 1):
        total = None
        for j in range(len(data.bundles)):
            expr = bundle_ch(l, data, j)
            if total is None:
                total = expr
            else:
                total = total + expr
        if total is not None:
            chs[l] = total.scale(Fraction((-1) ** (l + 1)))
    # Newton's identities: e_m = (1/m) sum (-1)^(i-1) e_{m-i} p_i
    e: list[StrataExpression] = [StrataExpression.one(amb)]
    for m in range(1, degvir + 1):
        acc = None
        for i in range(1, m + 1):
            if i not in chs:
                continue
            p_i = chs[i].scale(Fraction(factorial(i)))
            piece = strata_mul(e[m - i], p_i, degvir)
            piece = piece.scale(Fraction((-1) ** (i - 1), m))
            acc = piece if acc is None else acc + piece
        e.append(acc if acc is not None else StrataExpression.zero(amb))
    top = e[degvir]
    val = pair(top, b, cache=cache)
    R = sector.orb.group_order
    return val * R  # d**(1-g) at g = 0


def limit_matches_oracle(
    sector: Sector, cache: CorrelatorCache | None = None
) -> list[tuple[tuple[int, ...], Fraction, Fraction]]:
    """Compare hodge_integral and genus0_oracle on all complementary monomials."""
    degvir = sector.degvir()
    total = sector.ambient().dim - degvir
    if total < 0:
        return []
    engine = SectorEngine(sector, "twisted", cache)
    out = []
    for b in _psi_tuples(sector.n, total):
        lhs = hodge_integral(sector, b, engine=engine, cache=cache).value
        rhs = genus0_oracle(sector, b, cache=cache)
        out.append((b, lhs, rhs))
    return out
