"""Landau--Ginzburg orbifolds (W, G), their sectors, and integer invariants.

Shapes are single atomic polynomials: fermat x^a, chain
x_1^{a_1} x_2 + ... + x_{N-1}^{a_{N-1}} x_N + x_N^{a_N} (the last monomial
normalized as a pure power, so w_N a_N = d), and loop
x_1^{a_1} x_2 + ... + x_N^{a_N} x_1.  The admissible symmetry groups
supported here are cyclic, generated by a diagonal matrix given through
residues mod its order, with the grading element contained in the group;
the default group is generated by the grading element itself.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd
from typing import Sequence

from .classes import AssemblyData, BundleData
from .graphs import Ambient


class ModelError(ValueError):
    """Invalid shape, group, or sector data."""


class EmptySector(ModelError):
    """Selection rule fails: the component is empty and all values are 0."""


class UnbalancedBroadSector(ModelError):
    """A broad marking has no balanced decoration: the state does not exist."""


def weights_from_shape(shape: str, exponents: Sequence[int]) -> tuple[tuple[int, ...], int]:
    """Coprime positive weights and degree for a fermat/chain/loop shape."""
    exps = list(exponents)
    if shape == "fermat":
        if len(exps) != 1:
            raise ModelError("fermat takes a single exponent")
        if exps[0] < 2:
            raise ModelError("fermat exponent must be >= 2")
        return (1,), exps[0]
    if len(exps) < 2:
        raise ModelError(f"{shape} needs at least two exponents")
    if any(a < 2 for a in exps):
        raise ModelError("exponents must be >= 2")
    n = len(exps)
    qs: list[Fraction]
    if shape == "chain":
        qs = [Fraction(0)] * n
        qs[n - 1] = Fraction(1, exps[n - 1])
        for j in range(n - 2, -1, -1):
            qs[j] = (1 - qs[j + 1]) / exps[j]
    elif shape == "loop":
        # q_{j+1} = 1 - a_j q_j around the cycle gives an affine fixed point
        coef = Fraction(1)
        off = Fraction(0)
        for a in exps:
            coef, off = -a * coef, 1 - a * off
        if coef == 1:
            raise ModelError("degenerate loop weight system")
        q1 = off / (1 - coef)
        qs = [q1]
        for j in range(n - 1):
            qs.append(1 - exps[j] * qs[j])
    else:
        raise ModelError(f"unknown shape {shape!r}")
    if any(q <= 0 or q >= 1 for q in qs):
        raise ModelError(f"no valid weights: charges {qs}")
    d = 1
    for q in qs:
        d = d * q.denominator // gcd(d, q.denominator)
    ws = [int(q * d) for q in qs]
    g = gcd(d, gcd(*ws) if len(ws) > 1 else ws[0])
    ws = [w // g for w in ws]
    d //= g
    # each monomial must have weighted degree d
    for j in range(n):
        if shape == "chain":
            lhs = ws[j] * exps[j] + (ws[j + 1] if j < n - 1 else 0)
        else:
            lhs = ws[j] * exps[j] + ws[(j + 1) % n]
        if shape == "fermat":
            lhs = ws[0] * exps[0]
        if lhs != d:
            raise ModelError(f"monomial {j} has degree {lhs} != {d}")
    return tuple(ws), d


@dataclass(frozen=True)
class LGOrbifold:
    """An atomic singularity with a cyclic admissible symmetry group."""

    shape: str
    exponents: tuple[int, ...]
    weights: tuple[int, ...]
    degree: int
    group_order: int
    generator: tuple[int, ...]

    @staticmethod
    def make(
        shape: str,
        exponents: Sequence[int],
        group_order: int | None = None,
        generator: Sequence[int] | None = None,
    ) -> LGOrbifold:
        ws, d = weights_from_shape(shape, exponents)
        R = d if group_order is None else group_order
        gen = tuple(w % R for w in ws) if generator is None else tuple(
            c % R for c in generator
        )
        orb = LGOrbifold(shape, tuple(exponents), ws, d, R, gen)
        orb.validate()
        return orb

    @property
    def nvars(self) -> int:
        return len(self.weights)

    def validate(self) -> None:
        R, d = self.group_order, self.degree
        if R < 1:
            raise ModelError("group order must be positive")
        c = self.generator
        if len(c) != self.nvars:
            raise ModelError("generator length mismatch")
        if gcd(R, gcd(*c) if len(c) > 1 else c[0]) not in (1,) and any(c):
            # non-primitive generators would make r < group_order
            raise ModelError("generator must have order equal to group_order")
        if not any(c) and R != 1:
            raise ModelError("trivial generator with nontrivial group")
        # the generator must fix every monomial of W
        for j, a in enumerate(self.exponents):
            if self.shape == "fermat":
                s = a * c[0]
            elif self.shape == "chain":
                s = a * c[j] + (c[j + 1] if j < self.nvars - 1 else 0)
            else:
                s = a * c[j] + c[(j + 1) % self.nvars]
            if s % R:
                raise ModelError(f"generator does not fix monomial {j}")
        self.grading_power()  # admissibility: j-bar must lie in the group
        for j in range(self.nvars):
            if (R * self.weights[j]) % d:
                raise ModelError(
                    "group exponent incompatible with weights: "
                    f"r w_{j+1}/d is not an integer"
                )

    def grading_power(self) -> int:
        """Power p with generator**p equal to the grading element."""
        R, d = self.group_order, self.degree
        target = tuple((R * w // d) % R for w in self.weights)
        for p in range(R):
            if tuple((p * cj) % R for cj in self.generator) == target:
                return p
        raise ModelError("grading element not contained in the group")

    def grading_element(self) -> tuple[Fraction, ...]:
        return tuple(Fraction(w % self.degree, self.degree) for w in self.weights)

    def t_exponents(self) -> tuple[int, ...]:
        """(e_1, ..., e_{N+1}) with t_j = t**e_j; e_{N+1} drives the Hodge factor."""
        n = self.nvars
        es = [1]
        for j in range(n - 1):
            es.append(-self.exponents[j] * es[j])
        wn = self.weights[n - 1]
        if self.degree % wn:
            raise ModelError("w_N does not divide d; theorem exponents undefined")
        es.append(-(self.degree // wn) * es[n - 1])
        return tuple(es)

    def rotated(self, shift: int) -> LGOrbifold:
        """Cyclic index rotation (loops only): variable j -> j - shift."""
        if self.shape != "loop":
            raise ModelError("rotation only applies to loop shapes")
        n = self.nvars
        rot = lambda t: tuple(t[(j + shift) % n] for j in range(n))
        return LGOrbifold(
            self.shape,
            rot(self.exponents),
            rot(self.weights),
            self.degree,
            self.group_order,
            rot(self.generator),
        )


def selection_rule(orb: LGOrbifold, g: int, monodromies: Sequence[int]) -> bool:
    """gamma(1)...gamma(n) = jbar**(2g-2+n), in generator powers mod R."""
    p = orb.grading_power()
    R = orb.group_order
    return (sum(monodromies) - p * (2 * g - 2 + len(monodromies))) % R == 0


@dataclass
class Sector:
    """A genus-g type (monodromy assignment) of the orbifold, with bookkeeping.

    Monodromies are powers of the group generator.  Broad markings (those
    with some trivial monodromy entry) acquire the unique balanced chain
    decoration; sectors with an unbalanced broad marking do not support an
    invariant state and are rejected.
    """

    orb: LGOrbifold
    genus: int
    monodromies: tuple[int, ...]
    decoration: frozenset[tuple[int, int]] = field(init=False)

    def __post_init__(self):
        g, n = self.genus, len(self.monodromies)
        if n < 1 or 3 * g - 3 + n < 0:
            raise ModelError("unstable (g, n)")
        R = self.orb.group_order
        self.monodromies = tuple(k % R for k in self.monodromies)
        if not selection_rule(self.orb, g, self.monodromies):
            raise EmptySector(
                f"selection rule fails for {self.monodromies} at genus {g}"
            )
        if self.orb.shape == "loop":
            self._rotate_for_hypothesis()
        self.decoration = frozenset(self._decorate())

    # -- multiplicities ------------------------------------------------------

    @property
    def n(self) -> int:
        return len(self.monodromies)

    def multiplicity(self, i: int, j: int) -> int:
        """m_j(i) in {0..r-1}: the monodromy of L_j at marking i."""
        return (self.orb.generator[j] * self.monodromies[i - 1]) % self.orb.group_order

    def multiplicity_table(self) -> list[tuple[int, ...]]:
        return [
            tuple(self.multiplicity(i, j) for j in range(self.orb.nvars))
            for i in range(1, self.n + 1)
        ]

    def broad_set(self) -> set[tuple[int, int]]:
        return {
            (i, j)
            for i in range(1, self.n + 1)
            for j in range(self.orb.nvars)
            if self.multiplicity(i, j) == 0
        }

    def is_narrow(self) -> bool:
        return not self.broad_set()

    # -- decorations ---------------------------------------------------------

    def _decorate(self):
        """The unique admissible balanced decoration, marking by marking."""
        N = self.orb.nvars
        for i in range(1, self.n + 1):
            broad = [j for j in range(N) if self.multiplicity(i, j) == 0]
            if not broad:
                continue
            if self.orb.shape == "loop":
                # broad loop markings are outside the supported hypothesis
                raise UnbalancedBroadSector(
                    f"marking {i} is broad; loop broad states are unsupported"
                )
            b = N - len(broad)
            if broad != list(range(b, N)):
                raise ModelError(
                    f"broad variables at marking {i} are not a chain suffix: {broad}"
                )
            if (N - b) % 2:
                raise UnbalancedBroadSector(
                    f"marking {i}: {N - b} broad variables, no balanced decoration"
                )
            for j in range(N - 1, b - 1, -2):
                yield (i, j)

    def chain_decoration(self) -> tuple[frozenset[tuple[int, int]], bool]:
        """Decoration set and the balanced flag (always true for built sectors)."""
        return self.decoration, True

    # -- hypothesis and rotation (loops) --------------------------------------

    def _rotate_for_hypothesis(self) -> None:
        orb = self.orb
        N = orb.nvars
        for j0 in range(N):
            if self._hypothesis_holds_at(j0):
                shift = (j0 + 1) % N  # rotate so j0 becomes the last variable
                if shift:
                    self.orb = orb.rotated(shift)
                return
        raise ModelError(
            "no variable satisfies the loop hypothesis for this sector"
        )

    def _hypothesis_holds_at(self, j0: int) -> bool:
        orb = self.orb
        d, R = orb.degree, orb.group_order
        w = orb.weights[j0]
        if d % w:
            return False
        # gamma_{j0}(i) must lie in the subgroup generated by e^{2 pi i w/d}
        sub = gcd(R * w // d, R)
        for i in range(1, self.n + 1):
            m = (orb.generator[j0] * self.monodromies[i - 1]) % R
            if m % sub:
                return False
            if m == 0:
                # broad at j0: the twisted bundle condition needs a decoration
                return False
        return True

    def loop_hypothesis(self) -> bool:
        return True  # construction already rotated or raised

    # -- twists, degrees, assembly -------------------------------------------

    def twists(self, j: int, variant: str = "twisted") -> tuple[int, ...]:
        """a_j(i) in {0..r}: multiplicities, with +r on decorated markings."""
        R = self.orb.group_order
        out = []
        for i in range(1, self.n + 1):
            a = self.multiplicity(i, j)
            if variant == "twisted" and (i, j) in self.decoration:
                a += R
            out.append(a)
        return tuple(out)

    def bundle_degree(self, j: int, variant: str = "twisted") -> Fraction:
        g, n = self.genus, self.n
        R = self.orb.group_order
        s_j = R * self.orb.weights[j] // self.orb.degree
        num = s_j * (2 * g - 2 + n) - sum(self.twists(j, variant))
        if num % R:
            raise ModelError(f"non-integral degree for variable {j}")
        return Fraction(num, R)

    def ch0(self, j: int, variant: str = "twisted") -> Fraction:
        return self.bundle_degree(j, variant) + 1 - self.genus

    def degvir(self) -> int:
        total = -sum(self.ch0(j, "twisted") for j in range(self.orb.nvars))
        if total.denominator != 1:
            raise ModelError("non-integral degvir")
        return int(total)

    def p_value(self) -> int:
        return 2 * self.genus - 3 + self.n - self.degvir()

    def broad_count(self, j: int) -> int:
        return sum(1 for i in range(1, self.n + 1) if self.multiplicity(i, j) == 0)

    def ambient(self) -> Ambient:
        return Ambient(
            self.genus,
            self.n,
            self.orb.group_order,
            self.monodromies,
            grading_power=self.orb.grading_power(),
        )

    def assembly(self, variant: str = "twisted") -> AssemblyData:
        """Everything the pre-limit pipeline needs, for either variant.

        The broad-corrected variant uses untwisted multiplicities and
        multiplies the prefactor by prod_j (1 - t_j)**r_j.
        """
        if variant not in ("twisted", "broad-corrected"):
            raise ModelError(f"unknown variant {variant!r}")
        orb = self.orb
        es = orb.t_exponents()
        R, d = orb.group_order, orb.degree
        bundles = []
        extra = []
        for j in range(orb.nvars):
            bundles.append(
                BundleData(
                    residue=orb.generator[j],
                    kappa_arg=Fraction(orb.weights[j], d),
                    twists=self.twists(j, variant),
                    ch0=self.ch0(j, variant),
                    t_exponent=es[j],
                )
            )
            if variant == "broad-corrected":
                rj = self.broad_count(j)
                if rj:
                    extra.append((es[j], rj))
        return AssemblyData(
            ambient=self.ambient(),
            bundles=tuple(bundles),
            hodge_exponent=es[orb.nvars],
            extra_onemt_powers=tuple(extra),
        )
