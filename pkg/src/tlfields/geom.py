"""Residues of rational 1-forms on the projective line.

A form p(t)/q(t) dt over Q or F_p is expanded at each closed point of its
polar locus into the 1-dimensional local field there (residue field a finite
extension when the point is irreducible of higher degree, uniformizer the
minimal polynomial itself, via a Newton solve of m(T) = u), plus the point at
infinity with uniformizer 1/t.  Summing the local residues over all points
gives exactly zero.
"""

from .errors import FactorizationOutOfScope, LocalFieldError
from .scalars import (
    ExtField,
    _divisors_signed,
    _lagrange_interp,
    _monic_polys,
    _poly_divmod,
    _poly_eval,
    _poly_trim,
)
from .series import Series
from .forms import SeparatedForm
from .residue import res_tlf
from .tlf import TlfDescriptor

MAX_POINT_DEGREE = 6


class ClosedPoint:
    """A closed point of P^1: a monic irreducible polynomial, or infinity."""

    def __init__(self, base, min_poly=None):
        self.base = base
        if min_poly is None:
            self.min_poly = None
            self.degree = 1
            return
        min_poly = [base.from_int(c) if base.char else base.from_fraction(c)
                    for c in min_poly]
        if not min_poly or min_poly[-1] != base.one:
            raise LocalFieldError("point polynomial must be monic")
        self.min_poly = tuple(min_poly)
        self.degree = len(min_poly) - 1

    @classmethod
    def infinity(cls, base):
        return cls(base)

    @property
    def is_infinity(self):
        return self.min_poly is None

    def __eq__(self, other):
        return (
            isinstance(other, ClosedPoint)
            and self.base == other.base
            and self.min_poly == other.min_poly
        )

    def __hash__(self):
        return hash((self.base, self.min_poly))

    def __repr__(self):
        if self.is_infinity:
            return "infinity"
        return _poly_str(self.min_poly)


def _poly_str(poly):
    parts = []
    for i, c in enumerate(poly):
        if c == 0:
            continue
        if i == 0:
            parts.append(str(c))
        else:
            var = "t" if i == 1 else f"t^{i}"
            parts.append(var if c == 1 else f"{c}*{var}")
    return " + ".join(parts) if parts else "0"


class RationalForm:
    """p(t)/q(t) dt with gcd-reduced polynomials over the base field."""

    def __init__(self, base, num, den):
        num = _coerce_poly(base, num)
        den = _coerce_poly(base, den)
        if not den:
            raise LocalFieldError("denominator is zero")
        g = _poly_gcd(base, num, den)
        if len(g) > 1:
            num, _ = _poly_divmod(base, num, g)
            den, _ = _poly_divmod(base, den, g)
        # normalize the denominator monic
        lead_inv = base.inv(den[-1])
        den = [base.mul(c, lead_inv) for c in den]
        num = [base.mul(c, lead_inv) for c in num]
        self.base = base
        self.num = tuple(num)
        self.den = tuple(den)

    def __repr__(self):
        return f"({_poly_str(self.num)})/({_poly_str(self.den)}) dt"


def _coerce_poly(base, poly):
    return _poly_trim(
        [base.from_int(c) if base.char else base.from_fraction(c) for c in poly]
    )


def _poly_gcd(base, f, g):
    f, g = list(f), list(g)
    while g:
        _, r = _poly_divmod(base, f, g)
        f, g = g, r
    if f:
        inv = base.inv(f[-1])
        f = [base.mul(c, inv) for c in f]
    return f


def _poly_derivative(base, f):
    return _poly_trim([base.mul(base.from_int(i), c) for i, c in enumerate(f)][1:])


# ---------------------------------------------------------------------------
# factorization of denominators (brute force, desk scale)
# ---------------------------------------------------------------------------


def factor_denominator(base, den):
    """Monic irreducible factors with multiplicities; bounded brute force."""
    den = list(den)
    lead_inv = base.inv(den[-1])
    den = [base.mul(c, lead_inv) for c in den]
    factors = {}
    if base.char:
        for deg in range(1, MAX_POINT_DEGREE + 1):
            if len(den) - 1 < deg:
                break
            for cand in _monic_polys(base.char, deg):
                while True:
                    q, r = _poly_divmod(base, den, cand)
                    if r:
                        break
                    key = tuple(cand)
                    factors[key] = factors.get(key, 0) + 1
                    den = q
                if len(den) - 1 < deg:
                    break
        if len(den) - 1 > 0:
            raise FactorizationOutOfScope(
                f"denominator has an irreducible factor of degree > {MAX_POINT_DEGREE}"
            )
        return factors
    # rationals: linear factors by root search, the rest must split into quadratics
    den = _extract_rational_roots(base, den, factors)
    den = _extract_quadratics(base, den, factors)
    if len(den) - 1 > 0:
        raise FactorizationOutOfScope(
            "denominator does not split into linear and quadratic factors over Q"
        )
    return factors


def _extract_rational_roots(base, den, factors):
    from fractions import Fraction

    changed = True
    while changed and len(den) - 1 >= 1:
        changed = False
        denom_lcm = 1
        for c in den:
            denom_lcm = denom_lcm * c.denominator // _gcd(denom_lcm, c.denominator)
        zpoly = [int(c * denom_lcm) for c in den]
        if zpoly[0] == 0:
            lin = [base.zero, base.one]
            den, _ = _poly_divmod(base, den, lin)
            factors[tuple(lin)] = factors.get(tuple(lin), 0) + 1
            changed = True
            continue
        a0, an = zpoly[0], zpoly[-1]
        for rn in _divisors_signed(a0):
            done = False
            for rd in _divisors_signed(an):
                if rd <= 0:
                    continue
                root = Fraction(rn, rd)
                if _poly_eval(base, den, root) == 0:
                    lin = [-root, Fraction(1)]
                    den, _ = _poly_divmod(base, den, lin)
                    key = tuple(lin)
                    factors[key] = factors.get(key, 0) + 1
                    changed = done = True
                    break
            if done:
                break
    return den


def _extract_quadratics(base, den, factors):
    while len(den) - 1 >= 2:
        if len(den) - 1 == 2:
            lead_inv = base.inv(den[-1])
            quad = tuple(base.mul(c, lead_inv) for c in den)
            factors[quad] = factors.get(quad, 0) + 1
            return [base.one]
        quad = _find_quadratic_factor(base, den)
        if quad is None:
            return den
        den, _ = _poly_divmod(base, den, list(quad))
        factors[quad] = factors.get(quad, 0) + 1
    return den


def _find_quadratic_factor(base, den):
    from fractions import Fraction

    denom_lcm = 1
    for c in den:
        denom_lcm = denom_lcm * c.denominator // _gcd(denom_lcm, c.denominator)
    zpoly = [int(c * denom_lcm) for c in den]
    points = []
    x = 0
    while len(points) < 3:
        v = _poly_eval(base, [Fraction(c) for c in zpoly], Fraction(x))
        if v != 0:
            points.append((x, int(v)))
        x = -x if x > 0 else -x + 1
    xs = [Fraction(p) for p, _ in points]
    lists = [_divisors_signed(v) for _, v in points]
    total = 1
    for lst in lists:
        total *= len(lst)
    if total > 200000:
        raise FactorizationOutOfScope("quadratic factor search too large")
    idx = [0, 0, 0]
    while True:
        ys = [Fraction(lists[i][idx[i]]) for i in range(3)]
        g = _lagrange_interp(xs, ys)
        if len(g) - 1 == 2:
            _, rem = _poly_divmod(base, den, g)
            if not rem:
                lead_inv = base.inv(g[-1])
                return tuple(base.mul(c, lead_inv) for c in g)
        i = 0
        while i < 3:
            idx[i] += 1
            if idx[i] < len(lists[i]):
                break
            idx[i] = 0
            i += 1
        else:
            return None


def _gcd(a, b):
    while b:
        a, b = b, a % b
    return a


def enumerate_closed_points(base, den, include_infinity=True):
    """The polar locus of a denominator, optionally with the point at infinity."""
    factors = factor_denominator(base, list(den))
    points = [ClosedPoint(base, list(poly)) for poly in sorted(factors)]
    if include_infinity:
        points.append(ClosedPoint.infinity(base))
    return points


# ---------------------------------------------------------------------------
# local expansions
# ---------------------------------------------------------------------------


def local_field_at(point):
    """The 1-dimensional local field at a closed point."""
    base = point.base
    if point.is_infinity or point.degree == 1:
        ext = ExtField(base, [base.zero, base.one])
    else:
        ext = ExtField(base, list(point.min_poly))
    return TlfDescriptor(1, ext)


def _eval_poly_at_series(poly, T, field):
    """Evaluate a base-coefficient polynomial at a series over an extension."""
    acc = Series.zero(field, 1)
    for c in reversed(poly):
        acc = acc * T + Series.constant(field, 1, field.from_base(c))
    return acc


def _uniformizer_expansion(point, window):
    """T(u) in k(x)[[u]] with m(T) = u and T(0) the residue of t; via Newton."""
    base = point.base
    K = local_field_at(point)
    field = K.field
    if point.degree == 1:
        # m = t - c: T = c + u exactly
        c = base.neg(point.min_poly[0])
        theta = field.from_base(c)
        return K, Series.from_terms(field, 1, {(0,): theta, (1,): field.one})
    theta = field.gen
    m = list(point.min_poly)
    u = Series.generator(field, 1, 1)
    T = Series.constant(field, 1, theta) + u  # first-order seed
    mp = _poly_derivative(base, m)
    steps = 1
    while (1 << steps) < window + 2:
        steps += 1
    from .series import truncate_level1

    for _ in range(steps + 1):
        mT = _eval_poly_at_series(m, T, field)
        mpT = _eval_poly_at_series(mp, T, field)
        T = T - (mT - u) * mpT.inv(window + 2)
        T = truncate_level1(T, window + 2)
    return K, T


def local_expansion(form, point, window=None):
    """The form expanded in the local uniformizer at a closed point."""
    base = form.base
    if point.is_infinity:
        K = local_field_at(point)
        field = K.field
        dp = len(form.num) - 1
        dq = len(form.den) - 1
        w = (window or 0) or max(0, dp + 2 - dq) + 3
        # t = 1/u: p(1/u)/q(1/u) = u^(dq-dp) rev(p)/rev(q); dt = -u^-2 du
        revp = list(reversed(form.num))
        revq = list(reversed(form.den))
        num_series = _eval_poly_at_series(revp, Series.generator(field, 1, 1), field)
        den_series = _eval_poly_at_series(revq, Series.generator(field, 1, 1), field)
        g = num_series * den_series.inv(w + dq + 2)
        shift = Series.monomial(field, 1, (dq - dp - 2,), field.from_int(-1))
        coeff = shift * g
        return SeparatedForm(K, 1, {(1,): coeff})
    mult = _multiplicity(base, form.den, point.min_poly)
    w = (window or 0) or mult + 3
    K, T = _uniformizer_expansion(point, w + mult)
    field = K.field
    pT = _eval_poly_at_series(form.num, T, field)
    qT = _eval_poly_at_series(form.den, T, field)
    mp = _poly_derivative(base, list(point.min_poly))
    mpT = _eval_poly_at_series(mp, T, field)
    # dT/du = 1/m'(T) since m(T(u)) = u
    coeff = pT * qT.inv(w + mult) * mpT.inv(w + mult)
    return SeparatedForm(K, 1, {(1,): coeff})


def _multiplicity(base, den, min_poly):
    count = 0
    den = list(den)
    while True:
        q, r = _poly_divmod(base, den, list(min_poly))
        if r:
            return count
        den = q
        count += 1


def local_residue(form, point, window=None):
    """The residue at one closed point (traced down to the base field)."""
    return res_tlf(local_expansion(form, point, window))


def global_residues(form, include_infinity=True, window=None):
    """Per-point residues over the polar locus plus infinity, and their sum."""
    points = enumerate_closed_points(form.base, form.den, include_infinity)
    out = {}
    total = form.base.zero
    for pt in points:
        r = local_residue(form, pt, window)
        out[pt] = r
        total = form.base.add(total, r)
    return out, total


def global_residue_sum(form, window=None):
    """Sum of all local residues; zero for every rational form."""
    _, total = global_residues(form, include_infinity=True, window=window)
    return total
