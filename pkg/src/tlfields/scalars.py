"""Exact base-field arithmetic: rationals, prime fields, and small extensions.

A BaseField is either the rationals (characteristic 0, values are
``fractions.Fraction``) or a prime field F_p (values are ints in [0, p)).
An ExtField is a finite extension k[x]/(m(x)) of degree <= 6, with elements
stored as coordinate vectors in the power basis 1, x, ..., x^(d-1).
Degree-1 extensions behave identically to the base field, so every consumer
of scalars works uniformly through ExtScalar.
"""

from fractions import Fraction

from .errors import (
    DivisionByZero,
    IrreducibilityCheckInfeasible,
    LocalFieldError,
    ReduciblePolynomial,
)

MAX_PRIME = 97
MAX_EXT_DEGREE = 6

# Budget for the Kronecker factor search over the rationals.
_KRONECKER_BUDGET = 200_000


def _is_prime(p):
    if p < 2:
        return False
    d = 2
    while d * d <= p:
        if p % d == 0:
            return False
        d += 1
    return True


class BaseField:
    """The rationals (char 0) or a prime field F_p (p prime, p <= 97)."""

    __slots__ = ("char",)

    def __init__(self, char):
        if char != 0:
            if not _is_prime(char):
                raise LocalFieldError(f"characteristic {char} is not prime")
            if char > MAX_PRIME:
                raise LocalFieldError(f"prime {char} exceeds supported bound {MAX_PRIME}")
        self.char = char

    def __eq__(self, other):
        return isinstance(other, BaseField) and self.char == other.char

    def __hash__(self):
        return hash(("BaseField", self.char))

    def __repr__(self):
        return "QQ" if self.char == 0 else f"GF({self.char})"

    # raw values are Fraction (char 0) or int in [0, p)

    def from_int(self, n):
        if self.char == 0:
            return Fraction(n)
        return n % self.char

    def from_fraction(self, q):
        if self.char == 0:
            return Fraction(q)
        q = Fraction(q)
        den = q.denominator % self.char
        if den == 0:
            raise DivisionByZero(f"denominator {q.denominator} vanishes mod {self.char}")
        return (q.numerator * pow(den, -1, self.char)) % self.char

    @property
    def zero(self):
        return self.from_int(0)

    @property
    def one(self):
        return self.from_int(1)

    def add(self, a, b):
        return (a + b) % self.char if self.char else a + b

    def sub(self, a, b):
        return (a - b) % self.char if self.char else a - b

    def mul(self, a, b):
        return (a * b) % self.char if self.char else a * b

    def neg(self, a):
        return (-a) % self.char if self.char else -a

    def inv(self, a):
        if a == 0:
            raise DivisionByZero("inverse of zero")
        if self.char:
            return pow(a, -1, self.char)
        return 1 / Fraction(a)

    def div(self, a, b):
        return self.mul(a, self.inv(b))

    def random(self, rng, span=6):
        if self.char:
            return rng.randrange(self.char)
        return Fraction(rng.randint(-span, span), rng.randint(1, 4))


# ---------------------------------------------------------------------------
# dense polynomial helpers over a BaseField (coefficient lists, low to high)
# ---------------------------------------------------------------------------


def _poly_trim(f):
    while f and f[-1] == 0:
        f.pop()
    return f


def _poly_add(k, f, g):
    n = max(len(f), len(g))
    out = []
    for i in range(n):
        a = f[i] if i < len(f) else k.zero
        b = g[i] if i < len(g) else k.zero
        out.append(k.add(a, b))
    return _poly_trim(out)


def _poly_mul(k, f, g):
    if not f or not g:
        return []
    out = [k.zero] * (len(f) + len(g) - 1)
    for i, a in enumerate(f):
        if a == 0:
            continue
        for j, b in enumerate(g):
            out[i + j] = k.add(out[i + j], k.mul(a, b))
    return _poly_trim(out)


def _poly_divmod(k, f, g):
    if not g:
        raise DivisionByZero("polynomial division by zero")
    f = list(f)
    q = [k.zero] * max(0, len(f) - len(g) + 1)
    inv_lead = k.inv(g[-1])
    while len(f) >= len(g) and f:
        shift = len(f) - len(g)
        factor = k.mul(f[-1], inv_lead)
        q[shift] = factor
        for i, b in enumerate(g):
            f[shift + i] = k.sub(f[shift + i], k.mul(factor, b))
        _poly_trim(f)
    return _poly_trim(q), f


def _poly_mod(k, f, g):
    return _poly_divmod(k, f, g)[1]


def _poly_eval(k, f, x):
    acc = k.zero
    for c in reversed(f):
        acc = k.add(k.mul(acc, x), c)
    return acc


def _poly_ext_gcd(k, f, g):
    """Return (d, u, v) with u*f + v*g = d, d monic."""
    r0, r1 = list(f), list(g)
    s0, s1 = [k.one], []
    t0, t1 = [], [k.one]
    while r1:
        q, r = _poly_divmod(k, r0, r1)
        r0, r1 = r1, r
        s0, s1 = s1, _poly_add(k, s0, [k.neg(c) for c in _poly_mul(k, q, s1)])
        t0, t1 = t1, _poly_add(k, t0, [k.neg(c) for c in _poly_mul(k, q, t1)])
    if r0:
        lead_inv = k.inv(r0[-1])
        r0 = [k.mul(c, lead_inv) for c in r0]
        s0 = [k.mul(c, lead_inv) for c in s0]
        t0 = [k.mul(c, lead_inv) for c in t0]
    return r0, s0, t0


# ---------------------------------------------------------------------------
# irreducibility by brute-force factor search
# ---------------------------------------------------------------------------


def _monic_polys(p, degree):
    """Yield all monic degree-`degree` coefficient lists over F_p."""
    total = p ** degree
    for code in range(total):
        coeffs = []
        c = code
        for _ in range(degree):
            coeffs.append(c % p)
            c //= p
        coeffs.append(1)
        yield coeffs


def _check_irreducible_fp(k, poly):
    d = len(poly) - 1
    for deg in range(1, d // 2 + 1):
        for g in _monic_polys(k.char, deg):
            if not _poly_mod(k, poly, g):
                raise ReduciblePolynomial(f"factor of degree {deg} found over GF({k.char})")


def _divisors_signed(n):
    n = abs(n)
    small, large = [], []
    d = 1
    while d * d <= n:
        if n % d == 0:
            small.append(d)
            if d != n // d:
                large.append(n // d)
        d += 1
    out = []
    for v in small + large[::-1]:
        out.append(v)
        out.append(-v)
    return out


def _check_irreducible_q(k, poly):
    d = len(poly) - 1
    # clear denominators: primitive integer polynomial, same factorization over Q
    denom = 1
    for c in poly:
        denom = denom * c.denominator // _gcd_int(denom, c.denominator)
    zpoly = [int(c * denom) for c in poly]

    # linear factors via the rational root theorem
    a0, an = zpoly[0], zpoly[-1]
    if a0 == 0:
        raise ReduciblePolynomial("root at 0")
    for r_num in _divisors_signed(a0):
        for r_den in _divisors_signed(an):
            if r_den < 0:
                continue
            if _poly_eval(k, poly, Fraction(r_num, r_den)) == 0:
                raise ReduciblePolynomial(f"rational root {Fraction(r_num, r_den)}")

    # higher-degree factors via Kronecker interpolation
    for deg in range(2, d // 2 + 1):
        _kronecker_search(k, poly, zpoly, deg)


def _gcd_int(a, b):
    while b:
        a, b = b, a % b
    return a


def _kronecker_search(k, poly, zpoly, deg):
    points = []
    x = 0
    while len(points) < deg + 1:
        v = _poly_eval(k, [Fraction(c) for c in zpoly], Fraction(x))
        if v != 0:
            points.append((x, int(v)))
        x = -x if x > 0 else -x + 1
    divisor_lists = [_divisors_signed(v) for _, v in points]
    total = 1
    for lst in divisor_lists:
        total *= len(lst)
    if total > _KRONECKER_BUDGET:
        raise IrreducibilityCheckInfeasible(
            f"Kronecker search needs {total} candidates (budget {_KRONECKER_BUDGET})"
        )
    xs = [Fraction(x) for x, _ in points]
    idx = [0] * len(points)
    while True:
        ys = [Fraction(divisor_lists[i][idx[i]]) for i in range(len(points))]
        g = _lagrange_interp(xs, ys)
        if len(g) - 1 >= 1:
            _, rem = _poly_divmod(k, poly, g)
            if not rem and len(g) - 1 < len(poly) - 1:
                raise ReduciblePolynomial(f"factor of degree {len(g) - 1} found over QQ")
        i = 0
        while i < len(points):
            idx[i] += 1
            if idx[i] < len(divisor_lists[i]):
                break
            idx[i] = 0
            i += 1
        else:
            return


def _lagrange_interp(xs, ys):
    n = len(xs)
    poly = []
    for i in range(n):
        num = [Fraction(1)]
        den = Fraction(1)
        for j in range(n):
            if j == i:
                continue
            num = _poly_mul(BaseField(0), num, [-xs[j], Fraction(1)])
            den *= xs[i] - xs[j]
        term = [c * ys[i] / den for c in num]
        poly = _poly_add(BaseField(0), poly, term)
    return poly


# ---------------------------------------------------------------------------
# extension fields
# ---------------------------------------------------------------------------


class ExtField:
    """A finite extension k[x]/(m(x)) of the base field, degree 1..6.

    Irreducibility of m is verified at construction by exhaustive factor
    search (trial division over F_p, root search plus Kronecker interpolation
    over Q).
    """

    __slots__ = ("base", "min_poly", "degree", "_zero", "_one")

    def __init__(self, base, min_poly):
        min_poly = [base.from_fraction(c) if base.char == 0 else base.from_int(c)
                    for c in min_poly]
        if not min_poly or min_poly[-1] != base.one:
            raise LocalFieldError("minimal polynomial must be monic")
        d = len(min_poly) - 1
        if not 1 <= d <= MAX_EXT_DEGREE:
            raise LocalFieldError(f"extension degree {d} outside 1..{MAX_EXT_DEGREE}")
        if d > 1:
            if base.char:
                _check_irreducible_fp(base, min_poly)
            else:
                _check_irreducible_q(base, min_poly)
        self.base = base
        self.min_poly = tuple(min_poly)
        self.degree = d
        self._zero = ExtScalar(self, (base.zero,) * d)
        self._one = ExtScalar(self, (base.one,) + (base.zero,) * (d - 1))

    @property
    def char(self):
        return self.base.char

    def __eq__(self, other):
        return (
            isinstance(other, ExtField)
            and self.base == other.base
            and self.min_poly == other.min_poly
        )

    def __hash__(self):
        return hash(("ExtField", self.base, self.min_poly))

    def __repr__(self):
        if self.degree == 1:
            return repr(self.base)
        return f"{self.base!r}[x]/({self._poly_str()})"

    def _poly_str(self):
        parts = []
        for i, c in enumerate(self.min_poly):
            if c == 0:
                continue
            if i == 0:
                parts.append(str(c))
            elif i == 1:
                parts.append(f"{c}*x" if c != 1 else "x")
            else:
                parts.append(f"{c}*x^{i}" if c != 1 else f"x^{i}")
        return " + ".join(parts)

    @property
    def zero(self):
        return self._zero

    @property
    def one(self):
        return self._one

    @property
    def gen(self):
        if self.degree == 1:
            # x is congruent to -c0 in a degree-1 quotient
            return ExtScalar(self, (self.base.neg(self.min_poly[0]),))
        coeffs = [self.base.zero] * self.degree
        coeffs[1] = self.base.one
        return ExtScalar(self, tuple(coeffs))

    def element(self, coeffs):
        coeffs = list(coeffs)
        if len(coeffs) > self.degree:
            coeffs = _poly_mod(self.base, _poly_trim(list(coeffs)), list(self.min_poly))
        coeffs = [self.base.from_fraction(c) if self.base.char == 0 else self.base.from_int(c)
                  for c in coeffs]
        coeffs += [self.base.zero] * (self.degree - len(coeffs))
        return ExtScalar(self, tuple(coeffs))

    def from_base(self, raw):
        return self.element([raw])

    def from_int(self, n):
        return self.from_base(self.base.from_int(n))

    def from_fraction(self, q):
        return self.from_base(self.base.from_fraction(q))

    def basis(self):
        """Power basis 1, x, ..., x^(d-1)."""
        out = []
        for i in range(self.degree):
            coeffs = [self.base.zero] * self.degree
            coeffs[i] = self.base.one
            out.append(ExtScalar(self, tuple(coeffs)))
        return out

    def random_element(self, rng, span=6):
        return ExtScalar(
            self, tuple(self.base.random(rng, span) for _ in range(self.degree))
        )

    def random_nonzero(self, rng, span=6):
        while True:
            a = self.random_element(rng, span)
            if not a.is_zero():
                return a

    def to_json(self):
        if self.base.char == 0:
            poly = [str(c) for c in self.min_poly]
        else:
            poly = [int(c) for c in self.min_poly]
        return {"char": self.base.char, "ext_poly": poly}

    @classmethod
    def from_json(cls, data):
        base = BaseField(data["char"])
        if base.char == 0:
            poly = [Fraction(c) for c in data["ext_poly"]]
        else:
            poly = list(data["ext_poly"])
        return cls(base, poly)


class ExtScalar:
    """An element of an ExtField in power-basis coordinates. Immutable."""

    __slots__ = ("field", "coeffs")

    def __init__(self, field, coeffs):
        self.field = field
        self.coeffs = coeffs

    def is_zero(self):
        return all(c == 0 for c in self.coeffs)

    def _coerce(self, other):
        if isinstance(other, ExtScalar):
            if other.field != self.field:
                raise LocalFieldError("scalars from different fields")
            return other
        if isinstance(other, int):
            return self.field.from_int(other)
        if isinstance(other, Fraction):
            return self.field.from_fraction(other)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        k = self.field.base
        return ExtScalar(
            self.field, tuple(k.add(a, b) for a, b in zip(self.coeffs, other.coeffs))
        )

    __radd__ = __add__

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        k = self.field.base
        return ExtScalar(
            self.field, tuple(k.sub(a, b) for a, b in zip(self.coeffs, other.coeffs))
        )

    def __rsub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return other - self

    def __neg__(self):
        k = self.field.base
        return ExtScalar(self.field, tuple(k.neg(a) for a in self.coeffs))

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        k = self.field.base
        prod = _poly_mul(k, list(self.coeffs), list(other.coeffs))
        prod = _poly_mod(k, prod, list(self.field.min_poly))
        prod += [k.zero] * (self.field.degree - len(prod))
        return ExtScalar(self.field, tuple(prod))

    __rmul__ = __mul__

    def inv(self):
        if self.is_zero():
            raise DivisionByZero("inverse of zero scalar")
        k = self.field.base
        d, u, _ = _poly_ext_gcd(k, _poly_trim(list(self.coeffs)), list(self.field.min_poly))
        if len(d) != 1:
            raise LocalFieldError("element not invertible; minimal polynomial reducible?")
        u = _poly_mod(k, [k.div(c, d[0]) for c in u], list(self.field.min_poly))
        u += [k.zero] * (self.field.degree - len(u))
        return ExtScalar(self.field, tuple(u))

    def __truediv__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self * other.inv()

    def __rtruediv__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return other * self.inv()

    def __pow__(self, n):
        if n < 0:
            return self.inv() ** (-n)
        acc = self.field.one
        base = self
        while n:
            if n & 1:
                acc = acc * base
            base = base * base
            n >>= 1
        return acc

    def __eq__(self, other):
        if isinstance(other, int):
            return self == self.field.from_int(other)
        if isinstance(other, Fraction):
            return self == self.field.from_fraction(other)
        return (
            isinstance(other, ExtScalar)
            and self.field == other.field
            and self.coeffs == other.coeffs
        )

    def __hash__(self):
        return hash((self.field, self.coeffs))

    def __repr__(self):
        if self.field.degree == 1:
            return str(self.coeffs[0])
        parts = []
        for i, c in enumerate(self.coeffs):
            if c == 0:
                continue
            if i == 0:
                parts.append(str(c))
            else:
                var = "x" if i == 1 else f"x^{i}"
                parts.append(var if c == 1 else f"{c}*{var}")
        return " + ".join(parts) if parts else "0"

    def mult_matrix(self):
        """Matrix of multiplication by self in the power basis (rows over the base)."""
        k = self.field.base
        d = self.field.degree
        cols = []
        for b in self.field.basis():
            col = (self * b).coeffs
            cols.append(col)
        return [[cols[j][i] for j in range(d)] for i in range(d)]

    def trace(self):
        """Trace of the multiplication matrix; the base-field trace tr_{k'/k}."""
        m = self.mult_matrix()
        k = self.field.base
        acc = k.zero
        for i in range(self.field.degree):
            acc = k.add(acc, m[i][i])
        return acc

    def norm(self):
        """Determinant of the multiplication matrix; the base-field norm n_{k'/k}."""
        return _det(self.field.base, self.mult_matrix())


def _det(k, m):
    """Exact determinant by fraction-free-enough Gaussian elimination over a field."""
    n = len(m)
    m = [row[:] for row in m]
    det = k.one
    for col in range(n):
        pivot = None
        for row in range(col, n):
            if m[row][col] != 0:
                pivot = row
                break
        if pivot is None:
            return k.zero
        if pivot != col:
            m[col], m[pivot] = m[pivot], m[col]
            det = k.neg(det)
        det = k.mul(det, m[col][col])
        inv_p = k.inv(m[col][col])
        for row in range(col + 1, n):
            if m[row][col] == 0:
                continue
            factor = k.mul(m[row][col], inv_p)
            for j in range(col, n):
                m[row][j] = k.sub(m[row][j], k.mul(factor, m[col][j]))
    return det


def make_extension(base, min_poly):
    """Build the extension field k[x]/(m(x)); raises ReduciblePolynomial on failure."""
    if isinstance(base, int):
        base = BaseField(base)
    return ExtField(base, min_poly)


def ext_trace(a):
    """Trace of an extension scalar down to the base field."""
    return a.trace()


def ext_norm(a):
    """Norm of an extension scalar down to the base field."""
    return a.norm()


def base_field(char):
    return BaseField(char)


def prime_field_ext(p, min_poly):
    return make_extension(BaseField(p), min_poly)


def rational_ext(min_poly):
    return make_extension(BaseField(0), min_poly)


QQ = BaseField(0)
