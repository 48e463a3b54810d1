"""Exact scalar kernel: rationals, rational functions of t, Laurent series in eps.

Every quantity in the engine is an exact rational number, a univariate
rational function of the formal variable ``t`` over Q, or a truncated
Laurent series in ``eps := t**-1 - 1``.  No floating point anywhere.

Conventions fixed here once and used everywhere:

* ``B_1(0) = -1/2`` (first Bernoulli convention).
* ``eps = t**-1 - 1``, i.e. expansions at ``t = 1`` substitute
  ``t = 1/(1 + eps)``.
* Truncation orders are explicit; there is no global precision state.
"""

from __future__ import annotations

from fractions import Fraction
from math import comb, gcd
from typing import Iterable, Sequence

Rat = Fraction

#: sentinel truncation order for series that are exact to all orders
ORDER_INF = 10**9

_ZERO = Fraction(0)
_ONE = Fraction(1)


# ---------------------------------------------------------------------------
# Bernoulli numbers / polynomials and the Stirling coefficients gamma(l, k)
# ---------------------------------------------------------------------------

_bernoulli_cache: list[Fraction] = [Fraction(1)]


def bernoulli_number(l: int) -> Fraction:
    """l-th Bernoulli number with the convention B_1 = -1/2.

    Computed by the defining recurrence sum_{k<=m} C(m+1, k) B_k = 0.
    """
    if l < 0:
        raise ValueError("Bernoulli index must be >= 0")
    while len(_bernoulli_cache) <= l:
        m = len(_bernoulli_cache)
        s = sum(Fraction(comb(m + 1, k)) * _bernoulli_cache[k] for k in range(m))
        _bernoulli_cache.append(-s / (m + 1))
    return _bernoulli_cache[l]


def bernoulli_poly(l: int, x: Fraction) -> Fraction:
    """Value of the Bernoulli polynomial B_l(x), with B_l(0) = bernoulli_number(l)."""
    if l < 0:
        raise ValueError("Bernoulli index must be >= 0")
    x = Fraction(x)
    return sum(
        Fraction(comb(l, k)) * bernoulli_number(k) * x ** (l - k) for k in range(l + 1)
    )


_stirling_cache: dict[tuple[int, int], int] = {(0, 0): 1}


def gamma_lk(l: int, k: int) -> Fraction:
    """Coefficient gamma(l, k) of the generating function (e^z - 1)^k / k!.

    These are the Stirling numbers of the second kind S(l, k).
    """
    if l < 0 or k < 0:
        raise ValueError("gamma(l, k) needs l, k >= 0")
    if k > l:
        return Fraction(0)
    if (l, k) not in _stirling_cache:
        if k == 0 or l == 0:
            _stirling_cache[(l, k)] = 0
        else:
            _stirling_cache[(l, k)] = int(k * gamma_lk(l - 1, k)) + int(
                gamma_lk(l - 1, k - 1)
            )
    return Fraction(_stirling_cache[(l, k)])


# ---------------------------------------------------------------------------
# Dense polynomials over Q (internal helpers; zero polynomial is ())
# ---------------------------------------------------------------------------


def _ptrim(c: list[Fraction]) -> tuple[Fraction, ...]:
    while c and c[-1] == 0:
        c.pop()
    return tuple(c)


def _padd(a: Sequence[Fraction], b: Sequence[Fraction]) -> tuple[Fraction, ...]:
    n = max(len(a), len(b))
    out = [_ZERO] * n
    for i, x in enumerate(a):
        out[i] = x
    for i, x in enumerate(b):
        out[i] += x
    return _ptrim(out)


def _pneg(a: Sequence[Fraction]) -> tuple[Fraction, ...]:
    return tuple(-x for x in a)


def _pmul(a: Sequence[Fraction], b: Sequence[Fraction]) -> tuple[Fraction, ...]:
    if not a or not b:
        return ()
    out = [_ZERO] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                if y:
                    out[i + j] += x * y
    return _ptrim(out)


def _pscale(a: Sequence[Fraction], c: Fraction) -> tuple[Fraction, ...]:
    if not c:
        return ()
    return tuple(x * c for x in a)


def _pdivmod(
    a: Sequence[Fraction], b: Sequence[Fraction]
) -> tuple[tuple[Fraction, ...], tuple[Fraction, ...]]:
    if not b:
        raise ZeroDivisionError("polynomial division by zero")
    r = list(a)
    q = [_ZERO] * max(0, len(a) - len(b) + 1)
    inv = 1 / b[-1]
    for i in range(len(a) - len(b), -1, -1):
        c = r[i + len(b) - 1] * inv
        if c:
            q[i] = c
            for j, y in enumerate(b):
                r[i + j] -= c * y
    return _ptrim(q), _ptrim(r)


def _pgcd(a: Sequence[Fraction], b: Sequence[Fraction]) -> tuple[Fraction, ...]:
    a, b = tuple(a), tuple(b)
    while b:
        a, b = b, _pdivmod(a, b)[1]
        # keep coefficients small: make the leading coefficient 1
        if b:
            b = _pscale(b, 1 / b[-1])
    if a:
        a = _pscale(a, 1 / a[-1])
    return a


def _peval(a: Sequence[Fraction], x: Fraction) -> Fraction:
    acc = _ZERO
    for c in reversed(a):
        acc = acc * x + c
    return acc


class RationalFunction:
    """Reduced fraction of dense Q-polynomials in t, with monic denominator."""

    __slots__ = ("num", "den")

    def __init__(self, num: Iterable[Fraction], den: Iterable[Fraction] = (_ONE,)):
        n = _ptrim([Fraction(c) for c in num])
        d = _ptrim([Fraction(c) for c in den])
        if not d:
            raise ZeroDivisionError("rational function with zero denominator")
        if n:
            g = _pgcd(n, d)
            if len(g) > 1:
                n = _pdivmod(n, g)[0]
                d = _pdivmod(d, g)[0]
            lc = d[-1]
            if lc != 1:
                n = _pscale(n, 1 / lc)
                d = _pscale(d, 1 / lc)
        else:
            d = (_ONE,)
        self.num = n
        self.den = d

    # -- constructors -------------------------------------------------------

    @staticmethod
    def const(c: Fraction | int) -> RationalFunction:
        return RationalFunction((Fraction(c),))

    @staticmethod
    def t_power(e: int) -> RationalFunction:
        """The monomial t**e, for any integer e (negative allowed)."""
        if e >= 0:
            return RationalFunction((_ZERO,) * e + (_ONE,))
        return RationalFunction((_ONE,), (_ZERO,) * (-e) + (_ONE,))

    # -- ring operations ----------------------------------------------------

    def __add__(self, other: RationalFunction) -> RationalFunction:
        other = _coerce_rf(other)
        return RationalFunction(
            _padd(_pmul(self.num, other.den), _pmul(other.num, self.den)),
            _pmul(self.den, other.den),
        )

    __radd__ = __add__

    def __neg__(self) -> RationalFunction:
        out = RationalFunction.__new__(RationalFunction)
        out.num = _pneg(self.num)
        out.den = self.den
        return out

    def __sub__(self, other: RationalFunction) -> RationalFunction:
        return self + (-_coerce_rf(other))

    def __rsub__(self, other) -> RationalFunction:
        return _coerce_rf(other) - self

    def __mul__(self, other) -> RationalFunction:
        other = _coerce_rf(other)
        return RationalFunction(
            _pmul(self.num, other.num), _pmul(self.den, other.den)
        )

    __rmul__ = __mul__

    def __truediv__(self, other) -> RationalFunction:
        other = _coerce_rf(other)
        if not other.num:
            raise ZeroDivisionError("division by zero rational function")
        return RationalFunction(
            _pmul(self.num, other.den), _pmul(self.den, other.num)
        )

    def __rtruediv__(self, other) -> RationalFunction:
        return _coerce_rf(other) / self

    def __pow__(self, e: int) -> RationalFunction:
        if e < 0:
            return (RationalFunction.const(1) / self) ** (-e)
        out = RationalFunction.const(1)
        base = self
        while e:
            if e & 1:
                out = out * base
            base = base * base if e > 1 else base
            e >>= 1
        return out

    def __eq__(self, other) -> bool:
        if not isinstance(other, (RationalFunction, int, Fraction)):
            return NotImplemented
        other = _coerce_rf(other)
        return self.num == other.num and self.den == other.den

    def __hash__(self):
        return hash((self.num, self.den))

    def __bool__(self) -> bool:
        return bool(self.num)

    def __repr__(self) -> str:
        return f"RationalFunction({list(self.num)!r}, {list(self.den)!r})"

    # -- extras -------------------------------------------------------------

    def substitute_power(self, e: int) -> RationalFunction:
        """Exact composition t |-> t**e (e nonzero integer, negative allowed)."""
        if e == 0:
            raise ValueError("substitution exponent must be nonzero")
        if e > 0:
            return RationalFunction(_stride(self.num, e), _stride(self.den, e))
        m = -e
        # p(t**-m) * t**(m deg p) reverses the coefficient list with stride m
        dn, dd = len(self.num) - 1, len(self.den) - 1
        num = _stride(tuple(reversed(self.num)), m)
        den = _stride(tuple(reversed(self.den)), m)
        # rebalance the t powers: multiply by t**(m(dd-dn)) on the light side
        if dd > dn:
            num = (_ZERO,) * (m * (dd - dn)) + num
        elif dn > dd:
            den = (_ZERO,) * (m * (dn - dd)) + den
        return RationalFunction(num, den)

    def evaluate(self, x: Fraction) -> Fraction:
        d = _peval(self.den, x)
        if d == 0:
            raise ZeroDivisionError(f"pole at t = {x}")
        return _peval(self.num, x) / d

    def is_regular_at_one(self) -> bool:
        return _peval(self.den, _ONE) != 0


def _coerce_rf(x) -> RationalFunction:
    if isinstance(x, RationalFunction):
        return x
    if isinstance(x, (int, Fraction)):
        return RationalFunction.const(x)
    raise TypeError(f"cannot coerce {type(x)!r} to RationalFunction")


def _stride(a: Sequence[Fraction], m: int) -> tuple[Fraction, ...]:
    if not a:
        return ()
    out = [_ZERO] * ((len(a) - 1) * m + 1)
    for i, c in enumerate(a):
        out[i * m] = c
    return _ptrim(out)


# ---------------------------------------------------------------------------
# Truncated Laurent series in eps = t**-1 - 1
# ---------------------------------------------------------------------------


class LaurentSeries:
    """Laurent series sum_{m>=lead} c_m eps**m known exactly through eps**order.

    Coefficients are stored as integer numerators over one positive integer
    denominator, which keeps the hot convolution loops in integer
    arithmetic.  ``order == ORDER_INF`` marks a series exact to all orders
    (all omitted coefficients are genuinely zero), which is how plain
    rationals embed.  The zero series has an empty numerator tuple; its
    ``order`` still records how far the vanishing is certified.
    """

    __slots__ = ("lead", "nums", "den", "order")

    def __init__(self, lead: int, coeffs: Sequence[Fraction], order: int):
        cs = [Fraction(c) for c in coeffs]
        den = 1
        for c in cs:
            den = den * c.denominator // gcd(den, c.denominator)
        self.lead = lead
        self.nums = tuple(int(c * den) for c in cs)
        self.den = den
        self.order = min(order, ORDER_INF)
        self._normalize()

    @classmethod
    def _raw(cls, lead: int, nums: Sequence[int], den: int, order: int) -> LaurentSeries:
        out = cls.__new__(cls)
        out.lead = lead
        out.nums = tuple(nums)
        out.den = den
        out.order = min(order, ORDER_INF)
        out._normalize()
        return out

    def _normalize(self) -> None:
        nums = list(self.nums)
        lead = self.lead
        if self.order != ORDER_INF:
            del nums[max(0, self.order - lead + 1) :]
        while nums and nums[0] == 0:
            nums.pop(0)
            lead += 1
        while nums and nums[-1] == 0:
            nums.pop()
        if not nums:
            self.lead, self.nums, self.den = 0, (), 1
            return
        den = self.den
        if den < 0:
            den = -den
            nums = [-x for x in nums]
        g = den
        for x in nums:
            g = gcd(g, x)
            if g == 1:
                break
        if g > 1:
            nums = [x // g for x in nums]
            den //= g
        self.lead, self.nums, self.den = lead, tuple(nums), den

    @property
    def coeffs(self) -> tuple[Fraction, ...]:
        return tuple(Fraction(x, self.den) for x in self.nums)

    @staticmethod
    def from_rat(c: Fraction | int) -> LaurentSeries:
        c = Fraction(c)
        return LaurentSeries._raw(0, (c.numerator,), c.denominator, ORDER_INF)

    @staticmethod
    def zero(order: int = ORDER_INF) -> LaurentSeries:
        return LaurentSeries._raw(0, (), 1, order)

    def is_zero(self) -> bool:
        return not self.nums

    def __bool__(self) -> bool:
        return bool(self.nums)

    def coefficient(self, m: int) -> Fraction:
        if m > self.order:
            raise ValueError(f"coefficient of eps**{m} beyond truncation {self.order}")
        if not self.nums or m < self.lead or m > self.lead + len(self.nums) - 1:
            return _ZERO
        return Fraction(self.nums[m - self.lead], self.den)

    @property
    def leading_exponent(self) -> int | None:
        return self.lead if self.nums else None

    def __add__(self, other) -> LaurentSeries:
        other = _coerce_ls(other)
        order = min(self.order, other.order)
        if not self.nums:
            return LaurentSeries._raw(other.lead, other.nums, other.den, order)
        if not other.nums:
            return LaurentSeries._raw(self.lead, self.nums, self.den, order)
        lead = min(self.lead, other.lead)
        top = max(
            self.lead + len(self.nums) - 1, other.lead + len(other.nums) - 1
        )
        if order != ORDER_INF:
            top = min(top, order)
        g = gcd(self.den, other.den)
        ma = other.den // g
        mb = self.den // g
        den = self.den * ma
        out = [0] * (top - lead + 1)
        for i, x in enumerate(self.nums):
            m = self.lead + i
            if m <= top:
                out[m - lead] += x * ma
        for i, x in enumerate(other.nums):
            m = other.lead + i
            if m <= top:
                out[m - lead] += x * mb
        return LaurentSeries._raw(lead, out, den, order)

    __radd__ = __add__

    def __neg__(self) -> LaurentSeries:
        return LaurentSeries._raw(
            self.lead, tuple(-x for x in self.nums), self.den, self.order
        )

    def __sub__(self, other) -> LaurentSeries:
        return self + (-_coerce_ls(other))

    def __rsub__(self, other) -> LaurentSeries:
        return _coerce_ls(other) - self

    def __mul__(self, other) -> LaurentSeries:
        if isinstance(other, int):
            other = Fraction(other)
        if isinstance(other, Fraction):
            if not other:
                return LaurentSeries.zero()
            return LaurentSeries._raw(
                self.lead,
                tuple(x * other.numerator for x in self.nums),
                self.den * other.denominator,
                self.order,
            )
        other = _coerce_ls(other)
        if not self.nums and not other.nums:
            return LaurentSeries.zero(min(self.order + other.order + 1, ORDER_INF))
        if not self.nums:
            return LaurentSeries.zero(min(self.order + other.lead, ORDER_INF))
        if not other.nums:
            return LaurentSeries.zero(min(other.order + self.lead, ORDER_INF))
        order = min(self.order + other.lead, other.order + self.lead, ORDER_INF)
        lead = self.lead + other.lead
        width = len(self.nums) + len(other.nums) - 1
        if order != ORDER_INF:
            width = min(width, order - lead + 1)
        out = [0] * width
        bn = other.nums
        for i, a in enumerate(self.nums):
            if a:
                jmax = min(len(bn), width - i)
                for j in range(jmax):
                    b = bn[j]
                    if b:
                        out[i + j] += a * b
        return LaurentSeries._raw(lead, out, self.den * other.den, order)

    __rmul__ = __mul__

    def __pow__(self, e: int) -> LaurentSeries:
        if e < 0:
            raise ValueError("negative powers of truncated series not supported")
        out = LaurentSeries.from_rat(1)
        for _ in range(e):
            out = out * self
        return out

    def __eq__(self, other) -> bool:
        if not isinstance(other, (LaurentSeries, int, Fraction)):
            return NotImplemented
        other = _coerce_ls(other)
        return (
            self.nums == other.nums
            and self.den == other.den
            and (self.lead == other.lead or not self.nums)
            and self.order == other.order
        )

    def __hash__(self):
        return hash((self.lead, self.nums, self.den, self.order))

    def __repr__(self) -> str:
        if not self.nums:
            return f"LaurentSeries(0; O(eps**{self.order + 1}))"
        body = " + ".join(
            f"({Fraction(x, self.den)})eps**{self.lead + i}"
            for i, x in enumerate(self.nums)
            if x
        )
        tail = "" if self.order == ORDER_INF else f" + O(eps**{self.order + 1})"
        return f"LaurentSeries({body}{tail})"


def _coerce_ls(x) -> LaurentSeries:
    if isinstance(x, LaurentSeries):
        return x
    if isinstance(x, (int, Fraction)):
        return LaurentSeries.from_rat(x)
    raise TypeError(f"cannot coerce {type(x)!r} to LaurentSeries")


def _series_inverse(c: Sequence[Fraction], nterms: int) -> list[Fraction]:
    """Invert a power series with c[0] != 0 through nterms coefficients."""
    inv0 = 1 / c[0]
    out = [inv0] + [_ZERO] * (nterms - 1)
    for m in range(1, nterms):
        s = _ZERO
        for k in range(1, min(m, len(c) - 1) + 1):
            s += c[k] * out[m - k]
        out[m] = -s * inv0
    return out


def _binomial_series(e: int, nterms: int) -> list[Fraction]:
    """(1 + eps)**e as a series, exact for e >= 0, truncated for e < 0."""
    out = []
    c = _ONE
    for k in range(nterms):
        out.append(c)
        c = c * Fraction(e - k, k + 1)
    if e >= 0:
        out = out[: e + 1] + [_ZERO] * max(0, nterms - e - 1)
    return out


def laurent_at_one(f: RationalFunction, order: int) -> LaurentSeries:
    """Expand f(t) at t = 1 in eps = t**-1 - 1, exactly through eps**order.

    The leading exponent of the result is minus the pole order of f at
    t = 1 (or the vanishing order, as a nonnegative lead).
    """
    if not f.num:
        return LaurentSeries.zero(ORDER_INF)
    dn, dd = len(f.num) - 1, len(f.den) - 1
    # f(1/(1+eps)) = (1+eps)**(dd-dn) * A(eps)/B(eps) with
    # A = sum a_i (1+eps)**(dn-i),  B = sum b_j (1+eps)**(dd-j)
    a_poly: list[Fraction] = [_ZERO] * (dn + 1)
    for i, c in enumerate(f.num):
        if c:
            for k in range(dn - i + 1):
                a_poly[k] += c * comb(dn - i, k)
    b_poly: list[Fraction] = [_ZERO] * (dd + 1)
    for j, c in enumerate(f.den):
        if c:
            for k in range(dd - j + 1):
                b_poly[k] += c * comb(dd - j, k)
    a = _ptrim(a_poly)
    b = _ptrim(b_poly)
    # valuations in eps
    va = next(i for i, c in enumerate(a) if c)
    vb = next(i for i, c in enumerate(b) if c)
    lead = va - vb
    if lead > order:
        return LaurentSeries.zero(order)
    nterms = order - lead + 1
    unit = _series_inverse(b[vb:], nterms)
    prod = [_ZERO] * nterms
    for i, c in enumerate(a[va : va + nterms]):
        if c:
            for j in range(nterms - i):
                if unit[j]:
                    prod[i + j] += c * unit[j]
    pw = _binomial_series(dd - dn, nterms)
    out = [_ZERO] * nterms
    for i, c in enumerate(prod):
        if c:
            for j in range(nterms - i):
                if pw[j]:
                    out[i + j] += c * pw[j]
    return LaurentSeries(lead, out, order)


# ---------------------------------------------------------------------------
# The coefficient functions s_l
# ---------------------------------------------------------------------------

_s_cache: dict[tuple[int, int], RationalFunction] = {}


def s_function(l: int, e: int) -> RationalFunction:
    """The rational function s_l(t**e).

    s_l(t) = B_l(0)/l + (-1)**l sum_{k=1..l} (k-1)! (t/(1-t))**k gamma(l, k)
    for l >= 1; the l = 0 branch -log(1-t) is not a rational function and
    is handled upstream through the (1-t)**(-ch_0) prefactor.
    """
    if l < 1:
        raise ValueError("s_function requires l >= 1; l = 0 is the prefactor path")
    if e == 0:
        raise ValueError("substitution exponent must be nonzero")
    key = (l, e)
    if key not in _s_cache:
        if e > 0:
            u = RationalFunction((_ZERO,) * e + (_ONE,), _padd((_ONE,), _pneg((_ZERO,) * e + (_ONE,))))
        else:
            # t**e/(1 - t**e) = 1/(t**|e| - 1)
            m = -e
            u = RationalFunction((_ONE,), _padd((_ZERO,) * m + (_ONE,), (-_ONE,)))
        acc = RationalFunction.const(bernoulli_number(l) / l)
        upow = RationalFunction.const(1)
        fact = 1
        sign = 1 if l % 2 == 0 else -1
        for k in range(1, l + 1):
            upow = upow * u
            if k > 1:
                fact *= k - 1
            gam = gamma_lk(l, k)
            if gam:
                acc = acc + upow * (Fraction(sign * fact) * gam)
        _s_cache[key] = acc
    return _s_cache[key]
