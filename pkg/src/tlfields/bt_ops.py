"""The operator algebra on K and its membership certificates.

Operators form a closed class of k-linear endomorphisms built from
multiplications, continuous differential operators (characteristic 0 beyond
order 0), level projections relative to a lifting system, coefficientwise
lifts, and explicit finite-rank maps, combined by composition, addition and
scalar multiple.

Membership in the ring of local operators and its per-level ideals is
*certified*, never decided: every certificate carries band bounds and witness
data that imply the quantified lattice conditions for this structured class,
and can be replayed against a probe set.  Level >= 2 targets are certified
recursively through induced quotient maps on a canonical refinement ladder.
"""

from .errors import (
    CharacteristicObstruction,
    InsufficientPrecision,
    LocalFieldError,
    NotCertifiable,
    NotReduced,
)
from .scalars import ext_trace
from .series import Series
from .tlf import LiftingSystem, sigma_expand


class OperatorExpr:
    """Base class for nodes of the operator tree; immutable."""

    def __init__(self, descriptor):
        self.descriptor = descriptor

    def apply(self, x, window=None):
        raise NotImplementedError

    def band1(self):
        """d with v_1(phi x) >= v_1(x) - d, or None when no bound is certified."""
        raise NotImplementedError

    def shift_interval(self):
        """(lo, hi): t_1-exponent shifts the operator can apply; hi may be None."""
        raise NotImplementedError

    def compose(self, other):
        return Compose([self, other])

    def __add__(self, other):
        return AddOp([self, other])

    def __sub__(self, other):
        return AddOp([self, ScalarMul(self.descriptor.field.from_int(-1), other)])

    def __call__(self, x, window=None):
        return self.apply(x, window)


class MulBy(OperatorExpr):
    """Multiplication by a fixed element of K."""

    def __init__(self, descriptor, f):
        super().__init__(descriptor)
        if f.depth != descriptor.n or f.field != descriptor.field:
            raise LocalFieldError("multiplier has the wrong ambient field")
        self.f = f

    def apply(self, x, window=None):
        return self.f * x

    def band1(self):
        if self.f.is_exact_zero():
            return 0
        from .lattices import level1_valuation

        return -level1_valuation(self.f)

    def shift_interval(self):
        if self.f.is_exact_zero():
            return (0, 0)
        lo = self.f.order
        hi = self.f.end if self.f.end is not None else self.f.order + len(self.f.coeffs)
        return (lo, hi)

    def __repr__(self):
        return f"mul({self.f!r})"


class DiffOp(OperatorExpr):
    """A finite sum of terms a_I * d^I; orders beyond 0 need characteristic 0."""

    def __init__(self, descriptor, terms):
        super().__init__(descriptor)
        self.terms = tuple((c, tuple(I)) for c, I in terms)
        for c, I in self.terms:
            if len(I) != descriptor.n or any(i < 0 for i in I):
                raise LocalFieldError("derivative orders must be a nonnegative multi-index")
            if any(I) and descriptor.char != 0:
                raise CharacteristicObstruction(
                    "differential operators beyond order 0 are supported in characteristic 0 only"
                )

    @classmethod
    def partial(cls, descriptor, axis):
        I = tuple(1 if i == axis - 1 else 0 for i in range(descriptor.n))
        return cls(descriptor, [(descriptor.one(), I)])

    def apply(self, x, window=None):
        out = Series.zero(x.field, x.depth)
        for c, I in self.terms:
            y = x
            for axis, k in enumerate(I, start=1):
                for _ in range(k):
                    y = y.derivative(axis)
            out = out + c * y
        return out

    def band1(self):
        from .lattices import level1_valuation

        worst = 0
        for c, I in self.terms:
            if c.is_exact_zero():
                continue
            worst = max(worst, I[0] - level1_valuation(c))
        return worst

    def shift_interval(self):
        lo, hi = None, None
        for c, I in self.terms:
            if c.is_exact_zero():
                continue
            clo = c.order - I[0]
            chi = (c.end if c.end is not None else c.order + len(c.coeffs)) - I[0]
            lo = clo if lo is None else min(lo, clo)
            hi = chi if hi is None else max(hi, chi)
        return (lo or 0, hi if hi is not None else 0)

    def order1(self):
        return max((I[0] for c, I in self.terms if not c.is_exact_zero()), default=0)

    def __repr__(self):
        return "diff(" + ", ".join(f"{c!r}*d^{list(I)}" for c, I in self.terms) + ")"


class LevelProjection(OperatorExpr):
    """Projection onto sigma-expansion exponents >= m or < m at one level."""

    def __init__(self, descriptor, level, cmp, cutoff, sigma):
        super().__init__(descriptor)
        if not 1 <= level <= descriptor.n:
            raise LocalFieldError(f"level {level} outside 1..{descriptor.n}")
        if cmp not in (">=", "<"):
            raise LocalFieldError("projection predicate must be '>=' or '<'")
        if not isinstance(sigma, LiftingSystem):
            raise LocalFieldError("projection needs a LiftingSystem")
        self.level = level
        self.cmp = cmp
        self.cutoff = cutoff
        self.sigma = sigma

    def _keep(self, q):
        return q >= self.cutoff if self.cmp == ">=" else q < self.cutoff

    def apply(self, x, window=None):
        return _project(x, self.level, self._keep, self.sigma, window or self.descriptor.window)

    def band1(self):
        return 0

    def shift_interval(self):
        return (0, 0)

    def __repr__(self):
        return f"proj{self.level}({self.cmp}{self.cutoff})"


def _project(x, level, keep, sigma, window):
    if x.is_exact_zero():
        return x
    if level == 1:
        if sigma.sigma1.is_standard():
            zero = Series.zero(x.field, x.depth - 1)
            coeffs = [
                c if keep(x.order + k) else zero for k, c in enumerate(x.coeffs)
            ]
            return Series(x.field, x.depth, order=x.order, coeffs=coeffs, exact=x.exact)
        pairs = sigma_expand(x, sigma.sigma1, window=window)
        acc = Series.zero(x.field, x.depth)
        t1 = Series.generator(x.field, x.depth, 1)
        for bq, q in pairs:
            if keep(q):
                acc = acc + sigma.sigma1.apply(bq) * t1.__pow__(q)
        # the expansion covered a finite window; cap the claim accordingly
        from .series import truncate_level1

        stop = x.end if x.end is not None else x.order + window
        return truncate_level1(acc, stop)
    # level >= 2: act coefficientwise through the level-1 expansion
    sub = sigma.d1()
    if sigma.sigma1.is_standard():
        coeffs = [
            _project(c, level - 1, keep, sub, window) for c in x.coeffs
        ]
        return Series(x.field, x.depth, order=x.order, coeffs=coeffs, exact=x.exact)
    pairs = sigma_expand(x, sigma.sigma1, window=window)
    acc = Series.zero(x.field, x.depth)
    t1 = Series.generator(x.field, x.depth, 1)
    for bq, q in pairs:
        proj = _project(bq, level - 1, keep, sub, window)
        acc = acc + sigma.sigma1.apply(proj) * t1.__pow__(q)
    from .series import truncate_level1

    stop = x.end if x.end is not None else x.order + window
    return truncate_level1(acc, stop)


class CoeffLift(OperatorExpr):
    """Apply a depth-(n-1) operator to every sigma_1-expansion coefficient."""

    def __init__(self, descriptor, inner, sigma):
        super().__init__(descriptor)
        self.inner = inner
        self.sigma = sigma
        if inner.descriptor.n != descriptor.n - 1:
            raise LocalFieldError("inner operator must live one level down")

    def apply(self, x, window=None):
        if x.is_exact_zero():
            return x
        w = window or self.descriptor.window
        if self.sigma.sigma1.is_standard():
            coeffs = [self.inner.apply(c, w) for c in x.coeffs]
            return Series(x.field, x.depth, order=x.order, coeffs=coeffs, exact=x.exact)
        pairs = sigma_expand(x, self.sigma.sigma1, window=w)
        acc = Series.zero(x.field, x.depth)
        t1 = Series.generator(x.field, x.depth, 1)
        for bq, q in pairs:
            acc = acc + self.sigma.sigma1.apply(self.inner.apply(bq, w)) * t1.__pow__(q)
        from .series import truncate_level1

        stop = x.end if x.end is not None else x.order + w
        return truncate_level1(acc, stop)

    def band1(self):
        return 0

    def shift_interval(self):
        return (0, 0)

    def __repr__(self):
        return f"lift({self.inner!r})"


class FiniteRank(OperatorExpr):
    """x -> sum over matrix entries M[out,in] * coeff_in(x) * t^out."""

    def __init__(self, descriptor, matrix):
        super().__init__(descriptor)
        self.matrix = {
            (tuple(o), tuple(i)): v for (o, i), v in matrix.items() if not v.is_zero()
        }
        for (o, i) in self.matrix:
            if len(o) != descriptor.n or len(i) != descriptor.n:
                raise LocalFieldError("matrix indices must match the ambient depth")

    def apply(self, x, window=None):
        desc = self.descriptor
        out = desc.zero()
        for (o, i), v in sorted(self.matrix.items()):
            c = x.coefficient_at(i)
            if c.is_zero():
                continue
            out = out + desc.monomial(o, c * v)
        return out

    def band1(self):
        if not self.matrix:
            return 0
        return max(0, max(i[0] - o[0] for (o, i) in self.matrix))

    def shift_interval(self):
        return None  # absolute output range

    def out_range1(self):
        if not self.matrix:
            return (0, 0)
        lows = [o[0] for (o, i) in self.matrix]
        return (min(lows), max(lows) + 1)

    def in_range1(self):
        if not self.matrix:
            return (0, 0)
        ins = [i[0] for (o, i) in self.matrix]
        return (min(ins), max(ins) + 1)

    def __repr__(self):
        return f"finrank({len(self.matrix)} entries)"


class Compose(OperatorExpr):
    def __init__(self, parts):
        parts = list(parts)
        super().__init__(parts[0].descriptor)
        flat = []
        for p in parts:
            if isinstance(p, Compose):
                flat.extend(p.parts)
            else:
                flat.append(p)
        self.parts = tuple(flat)

    def apply(self, x, window=None):
        for p in reversed(self.parts):
            x = p.apply(x, window)
        return x

    def band1(self):
        total = 0
        for p in self.parts:
            b = p.band1()
            if b is None:
                return None
            total += b
        return total

    def shift_interval(self):
        cur = (0, 1)
        for p in reversed(self.parts):
            s = p.shift_interval()
            if s is None:
                cur = p.out_range1()
            else:
                cur = (cur[0] + s[0], cur[1] + s[1] - 1)
        return cur

    def __repr__(self):
        return " . ".join(repr(p) for p in self.parts)


class AddOp(OperatorExpr):
    def __init__(self, parts):
        parts = list(parts)
        super().__init__(parts[0].descriptor)
        flat = []
        for p in parts:
            if isinstance(p, AddOp):
                flat.extend(p.parts)
            else:
                flat.append(p)
        self.parts = tuple(flat)

    def apply(self, x, window=None):
        out = Series.zero(x.field, x.depth)
        for p in self.parts:
            out = out + p.apply(x, window)
        return out

    def band1(self):
        worst = 0
        for p in self.parts:
            b = p.band1()
            if b is None:
                return None
            worst = max(worst, b)
        return worst

    def shift_interval(self):
        lo, hi = None, None
        for p in self.parts:
            s = p.shift_interval()
            if s is None:
                s = p.out_range1()  # treated as absolute below; conservative
            lo = s[0] if lo is None else min(lo, s[0])
            hi = s[1] if hi is None else max(hi, s[1])
        return (lo, hi)

    def __repr__(self):
        return " + ".join(repr(p) for p in self.parts)


class ScalarMul(OperatorExpr):
    def __init__(self, scalar, part):
        super().__init__(part.descriptor)
        if isinstance(scalar, int):
            scalar = part.descriptor.field.from_int(scalar)
        self.scalar = scalar
        self.part = part

    def apply(self, x, window=None):
        return self.part.apply(x, window).scalar_mul(self.scalar)

    def band1(self):
        return 0 if self.scalar.is_zero() else self.part.band1()

    def shift_interval(self):
        return self.part.shift_interval()

    def __repr__(self):
        return f"{self.scalar!r}·({self.part!r})"


def identity_op(descriptor):
    return MulBy(descriptor, descriptor.one())


def apply_operator(phi, x, window=None):
    return phi.apply(x, window)


# ---------------------------------------------------------------------------
# certification
# ---------------------------------------------------------------------------


class Certificate:
    """Machine-checkable evidence for membership of an operator.

    For the ring: the per-node band bounds.  For the first-level ideals: the
    witness lattice shift (bounded image) or the killed lattice shift.  For
    deeper levels: the induced quotient matrix on the canonical ladder rung
    together with recursive certificates for every entry.
    """

    def __init__(self, phi, target, band=None, witness_shift=None, killed_shift=None,
                 entry_data=None):
        self.phi = phi
        self.target = target
        self.band = band
        self.witness_shift = witness_shift
        self.killed_shift = killed_shift
        self.entry_data = entry_data or []

    def level_bounds(self):
        """Per-level (image shift, killed shift) pairs harvested recursively."""
        if self.target == "E":
            return []
        i, j = self.target
        if i == 1:
            return [(self.witness_shift, self.killed_shift)]
        inner = None
        for rung in self.entry_data:
            for cert in rung["entries"].values():
                b = cert.level_bounds()[-1]
                if inner is None:
                    inner = b
                else:
                    lo = None
                    if b[0] is not None and inner[0] is not None:
                        lo = min(inner[0], b[0])
                    hi = None
                    if b[1] is not None and inner[1] is not None:
                        hi = max(inner[1], b[1])
                    inner = (lo, hi)
        return [(None, None)] * (i - 1) + [inner or (None, None)]

    def replay(self, probes, window=None):
        """Re-validate the evidence on fresh probe inputs."""
        phi = self.phi
        w = window or phi.descriptor.window
        if self.target == "E":
            for p in probes:
                img = phi.apply(p, w)
                try:
                    vp = p.valuation()
                    vi = img.valuation() if not img.is_exact_zero() else None
                except InsufficientPrecision:
                    continue
                if vi is not None and vi[0] < vp[0] - self.band:
                    return False
            return True
        i, j = self.target
        if i == 1 and j == 1:
            for p in probes:
                img = phi.apply(p, w)
                if img.is_exact_zero():
                    continue
                from .lattices import level1_valuation

                try:
                    v = level1_valuation(img)
                except InsufficientPrecision:
                    continue
                if v is not None and v < self.witness_shift:
                    return False
            return True
        if i == 1 and j == 2:
            desc = phi.descriptor
            shift = self.killed_shift
            for p in probes:
                x = p * desc.monomial((shift + max(0, -p.order),) + (0,) * (desc.n - 1))
                img = phi.apply(x, w)
                if not (img.is_exact_zero() or img.is_zero_within_window()):
                    return False
            return True
        # deeper targets: replay every entry certificate one level down
        sub_probes = _default_probes(phi.descriptor.residue_descriptor(), count=4)
        for rung in self.entry_data:
            for cert in rung["entries"].values():
                if not cert.replay(sub_probes, window):
                    return False
        return True


def _default_probes(descriptor, count=6, seed=7):
    import random

    rng = random.Random(seed + descriptor.n)
    probes = []
    if descriptor.n == 0:
        probes.append(Series.one(descriptor.field, 0))
        probes.append(Series.constant(descriptor.field, 0, descriptor.field.random_element(rng)))
        return probes
    for exps in [(0,), (1,), (-1,), (2,), (-2,)]:
        probes.append(descriptor.monomial(exps + (0,) * (descriptor.n - 1)))
    for _ in range(count):
        probes.append(
            descriptor.random_element(rng, max_terms=3, exp_span=2)
        )
    return [p for p in probes if not p.is_exact_zero()]


def certify_membership(phi, target, ladder_depth=3, window=None):
    """Certify membership structurally; NotCertifiable is not a disproof."""
    if target == "E":
        band = phi.band1()
        if band is None:
            raise NotCertifiable("no band bound for level 1")
        _check_class(phi)
        return Certificate(phi, "E", band=band)
    i, j = target
    n = phi.descriptor.n
    if not (1 <= i <= n) or j not in (1, 2):
        raise NotCertifiable(f"target {target} out of range for dimension {n}")
    base = certify_membership(phi, "E", ladder_depth, window)
    if i == 1:
        if j == 1:
            lb = _image_lower_bound(phi, None)
            if lb is None:
                raise NotCertifiable("image admits no level-1 lattice bound")
            return Certificate(phi, (1, 1), band=base.band, witness_shift=lb)
        shift = _killed_shift(phi)
        return Certificate(phi, (1, 2), band=base.band, killed_shift=shift)
    # i >= 2: induce on the canonical ladder and certify entries recursively
    entry_data = []
    for rung in range(ladder_depth):
        gap = rung + 1
        matrix = _push_to_quotient(phi, 0, gap, window)
        entries = {}
        for key, op in matrix.items():
            entries[key] = certify_membership(op, (i - 1, j), ladder_depth, window)
        entry_data.append({"gap": gap, "entries": entries})
    return Certificate(phi, (i, j), band=base.band, entry_data=entry_data)


def _check_class(phi):
    """The operator must be built from the closed class of primitives."""
    if isinstance(phi, (MulBy, LevelProjection, CoeffLift, FiniteRank)):
        if isinstance(phi, CoeffLift):
            _check_class(phi.inner)
        return
    if isinstance(phi, DiffOp):
        if phi.descriptor.char != 0 and any(any(I) for _, I in phi.terms):
            raise NotCertifiable("positive-order differential operator in characteristic p")
        return
    if isinstance(phi, (Compose, AddOp)):
        for p in phi.parts:
            _check_class(p)
        return
    if isinstance(phi, ScalarMul):
        _check_class(phi.part)
        return
    raise NotCertifiable(f"operator node {type(phi).__name__} outside the closed class")


def _image_lower_bound(phi, in_lb):
    """Lower bound for v_1 of the image over inputs with v_1 >= in_lb (None = all of K)."""
    from .lattices import level1_valuation

    if isinstance(phi, MulBy):
        if phi.f.is_exact_zero():
            return 10 ** 9
        v = level1_valuation(phi.f)
        return None if in_lb is None else in_lb + v
    if isinstance(phi, DiffOp):
        b = phi.band1()
        return None if in_lb is None else in_lb - b
    if isinstance(phi, LevelProjection):
        if phi.level == 1 and phi.cmp == ">=":
            return phi.cutoff if in_lb is None else max(phi.cutoff, in_lb)
        return in_lb
    if isinstance(phi, CoeffLift):
        return in_lb
    if isinstance(phi, FiniteRank):
        if not phi.matrix:
            return 10 ** 9
        return phi.out_range1()[0]
    if isinstance(phi, Compose):
        cur = in_lb
        for p in reversed(phi.parts):
            cur = _image_lower_bound(p, cur)
        return cur
    if isinstance(phi, AddOp):
        lows = [_image_lower_bound(p, in_lb) for p in phi.parts]
        if any(v is None for v in lows):
            return None
        return min(lows)
    if isinstance(phi, ScalarMul):
        if phi.scalar.is_zero():
            return 10 ** 9
        return _image_lower_bound(phi.part, in_lb)
    return None


# -- killed-lattice analysis (restrict to a^m O_1 and simplify) --------------


def _killed_shift(phi):
    """Find m with phi(a^m O_1) = 0 by symbolic restriction, or raise."""
    constraints = []
    _collect_kill_constraints(phi, 0, constraints)
    m = max([0] + constraints)
    chains, _ = _simplify_on_lattice(phi, m)
    desc = phi.descriptor
    groups = {}
    for chain in chains:
        chain = _normalize_chain(chain)
        if chain is None:  # a zero multiplier killed it
            continue
        if chain and chain[0][0] == "mul":
            lead, tail = chain[0][1], chain[1:]
        else:
            lead, tail = desc.one(), chain
        groups.setdefault(tail, desc.zero())
        groups[tail] = groups[tail] + lead
    for tail, total in groups.items():
        if not total.is_exact_zero():
            raise NotCertifiable(
                "operator does not provably annihilate any standard lattice"
            )
    return m


def _normalize_chain(chain):
    """Merge adjacent multipliers; None when a factor is exactly zero."""
    out = []
    for item in chain:
        if item[0] == "mul":
            if item[1].is_exact_zero():
                return None
            if out and out[-1][0] == "mul":
                out[-1] = ("mul", out[-1][1] * item[1])
                continue
            out.append(("mul", item[1]))
        else:
            out.append(item)
    return tuple(out)


def _collect_kill_constraints(phi, s, out):
    """Record cutoffs m >= k - s needed to decide every projection/finite-rank node."""
    if isinstance(phi, MulBy):
        return s + (phi.f.order if not phi.f.is_exact_zero() else 0)
    if isinstance(phi, DiffOp):
        si = phi.shift_interval()
        return s + si[0]
    if isinstance(phi, LevelProjection):
        if phi.level == 1:
            out.append(phi.cutoff - s)
        return s
    if isinstance(phi, CoeffLift):
        return s
    if isinstance(phi, FiniteRank):
        out.append(phi.in_range1()[1] - s)
        return s
    if isinstance(phi, Compose):
        cur = s
        for p in reversed(phi.parts):
            cur = _collect_kill_constraints(p, cur, out)
        return cur
    if isinstance(phi, AddOp):
        results = [_collect_kill_constraints(p, s, out) for p in phi.parts]
        return min(results)
    if isinstance(phi, ScalarMul):
        return _collect_kill_constraints(phi.part, s, out)
    raise NotCertifiable(f"node {type(phi).__name__} blocks lattice analysis")


def _simplify_on_lattice(phi, m):
    """Chains equivalent to phi on inputs with v_1 >= m.

    A chain is a tuple of items in outermost-first application order; items
    are ('mul', series) or opaque atoms.  Returns (chains, v_1 shift).
    """
    desc = phi.descriptor
    if isinstance(phi, MulBy):
        shift = phi.f.order if not phi.f.is_exact_zero() else 0
        return [(("mul", phi.f),)], m + shift
    if isinstance(phi, LevelProjection):
        if phi.level == 1:
            if phi.cmp == ">=" and m >= phi.cutoff:
                return [()], m
            if phi.cmp == "<" and m >= phi.cutoff:
                return [], m
        atom = ("proj", phi.level, phi.cmp, phi.cutoff)
        return [(atom,)], m
    if isinstance(phi, CoeffLift):
        return [(("lift", id(phi.inner)),)], m
    if isinstance(phi, DiffOp):
        return [(("diff", id(phi)),)], m + phi.shift_interval()[0]
    if isinstance(phi, FiniteRank):
        if m >= phi.in_range1()[1]:
            return [], m
        return [(("finrank", id(phi)),)], m
    if isinstance(phi, ScalarMul):
        chains, s = _simplify_on_lattice(phi.part, m)
        const = desc.constant(phi.scalar)
        return [(("mul", const),) + c for c in chains], s
    if isinstance(phi, AddOp):
        out = []
        s_min = None
        for p in phi.parts:
            chains, s = _simplify_on_lattice(p, m)
            out.extend(chains)
            s_min = s if s_min is None else min(s_min, s)
        return out, (s_min if s_min is not None else m)
    if isinstance(phi, Compose):
        # first pass, innermost-first, to learn the incoming shift of each part
        shifts = []
        cur = m
        for p in reversed(phi.parts):
            shifts.append(cur)
            cur = _collect_kill_constraints(p, cur, [])
        shifts.reverse()  # now aligned with self.parts (outermost first)
        chains = [()]
        for p, s_in in zip(phi.parts, shifts):
            pch, _ = _simplify_on_lattice(p, s_in)
            chains = [c + pc for c in chains for pc in pch]
        return chains, cur
    raise NotCertifiable(f"node {type(phi).__name__} blocks lattice analysis")


# -- induced quotient matrices (pushdown) ------------------------------------


def _push_to_quotient(phi, lo, hi, window=None):
    """Matrix of the induced map on the basis {a^q : lo <= q < hi} of
    a^lo O_1 / a^hi O_1, entries as depth-(n-1) OperatorExprs.

    Sound for standard level-1 liftings; twisted level-1 liftings are
    refused (certification under them is out of the structured class).
    """
    desc = phi.descriptor
    sub_desc = desc.residue_descriptor()
    rng = range(lo, hi)
    if isinstance(phi, MulBy):
        out = {}
        f = phi.f
        for q_in in rng:
            for q_out in rng:
                u = q_out - q_in
                try:
                    fu = f.coefficient_level1(u)
                except InsufficientPrecision:
                    raise NotCertifiable(
                        "multiplier window too small for the quotient pushdown"
                    )
                if fu.is_exact_zero():
                    continue
                out[(q_out, q_in)] = MulBy(sub_desc, fu)
        return out
    if isinstance(phi, LevelProjection):
        out = {}
        if phi.level == 1:
            for q in rng:
                if phi._keep(q):
                    out[(q, q)] = identity_op(sub_desc)
            return out
        if not phi.sigma.sigma1.is_standard():
            raise NotCertifiable("pushdown under a twisted level-1 lifting")
        inner = LevelProjection(
            sub_desc, phi.level - 1, phi.cmp, phi.cutoff, phi.sigma.d1()
        )
        for q in rng:
            out[(q, q)] = inner
        return out
    if isinstance(phi, CoeffLift):
        if not phi.sigma.sigma1.is_standard():
            raise NotCertifiable("pushdown under a twisted level-1 lifting")
        return {(q, q): phi.inner for q in rng}
    if isinstance(phi, DiffOp):
        out = {}
        for c, I in phi.terms:
            if c.is_exact_zero():
                continue
            i1 = I[0]
            inner_I = I[1:]
            for q_in in rng:
                # d_1^{i1} on a^q gives the falling factorial in q
                factor = 1
                for s in range(i1):
                    factor *= (q_in - s)
                if factor == 0:
                    continue
                mid = q_in - i1
                for q_out in rng:
                    u = q_out - mid
                    try:
                        cu = c.coefficient_level1(u)
                    except InsufficientPrecision:
                        raise NotCertifiable("coefficient window too small for pushdown")
                    if cu.is_exact_zero():
                        continue
                    entry = MulBy(sub_desc, cu)
                    if any(inner_I):
                        entry = Compose([entry, DiffOp(sub_desc, [(sub_desc.one(), inner_I)])])
                    entry = ScalarMul(sub_desc.field.from_int(factor), entry)
                    key = (q_out, q_in)
                    out[key] = AddOp([out[key], entry]) if key in out else entry
        return out
    if isinstance(phi, FiniteRank):
        out = {}
        for (o, i), v in phi.matrix.items():
            if not (lo <= o[0] < hi and lo <= i[0] < hi):
                if lo <= i[0] < hi and o[0] >= hi:
                    continue  # lands in the killed part of the quotient
                if lo <= i[0] < hi and o[0] < lo:
                    raise NotCertifiable("finite-rank image escapes the quotient window")
                continue
            key = (o[0], i[0])
            entry = FiniteRank(sub_desc, {(o[1:], i[1:]): v})
            out[key] = AddOp([out[key], entry]) if key in out else entry
        return out
    if isinstance(phi, ScalarMul):
        inner = _push_to_quotient(phi.part, lo, hi, window)
        return {k: ScalarMul(phi.scalar, op) for k, op in inner.items()}
    if isinstance(phi, AddOp):
        out = {}
        for p in phi.parts:
            for k, op in _push_to_quotient(p, lo, hi, window).items():
                out[k] = AddOp([out[k], op]) if k in out else op
        return out
    if isinstance(phi, Compose):
        # extend the working range so intermediate images are not clipped;
        # finite-rank parts contribute their absolute index ranges
        margin = 0
        for p in phi.parts:
            b = p.band1()
            si = p.shift_interval()
            if si is None:
                orr, irr = p.out_range1(), p.in_range1()
                up = max(abs(orr[0]), abs(orr[1]), abs(irr[0]), abs(irr[1]))
            else:
                up = max(abs(si[0]), abs(si[1]))
            margin += max(b if b is not None else 0, up) + 1
        wide_lo, wide_hi = lo - margin, hi + margin
        mats = [
            _push_to_quotient(p, wide_lo, wide_hi, window) for p in phi.parts
        ]
        acc = None
        for mat in reversed(mats):
            if acc is None:
                acc = mat
                continue
            new = {}
            for (q_mid, q_in), op_in in acc.items():
                for (q_out, q_mid2), op_out in mat.items():
                    if q_mid2 != q_mid:
                        continue
                    term = Compose([op_out, op_in])
                    key = (q_out, q_in)
                    new[key] = AddOp([new[key], term]) if key in new else term
            acc = new
        return {
            (o, i): op
            for (o, i), op in acc.items()
            if lo <= i < hi and lo <= o < hi
        }
    raise NotCertifiable(f"node {type(phi).__name__} has no quotient pushdown")


# ---------------------------------------------------------------------------
# identity decomposition and cubical projectors
# ---------------------------------------------------------------------------


def decompose_identity(descriptor, level, sigma, certify=True, ladder_depth=3):
    """The two level projections with phi_1 + phi_2 = 1 and their certificates."""
    phi1 = LevelProjection(descriptor, level, ">=", 0, sigma)
    phi2 = LevelProjection(descriptor, level, "<", 0, sigma)
    certs = {}
    if certify:
        certs[(level, 1)] = certify_membership(phi1, (level, 1), ladder_depth)
        certs[(level, 2)] = certify_membership(phi2, (level, 2), ladder_depth)
    return phi1, phi2, certs


def cubical_projectors(descriptor, sigma):
    """P_eps = product over levels of the chosen projections, level 1 outermost."""
    from itertools import product

    out = {}
    for eps in product((1, 2), repeat=descriptor.n):
        parts = []
        for level, choice in enumerate(eps, start=1):
            cmp = ">=" if choice == 1 else "<"
            parts.append(LevelProjection(descriptor, level, cmp, 0, sigma))
        out[eps] = Compose(parts) if len(parts) > 1 else parts[0]
    return out


# ---------------------------------------------------------------------------
# finite potency and the trace
# ---------------------------------------------------------------------------


def _rref_rank(field, rows):
    rows = [r[:] for r in rows]
    rank = 0
    cols = len(rows[0]) if rows else 0
    for col in range(cols):
        pivot = None
        for r in range(rank, len(rows)):
            if not rows[r][col].is_zero():
                pivot = r
                break
        if pivot is None:
            continue
        rows[rank], rows[pivot] = rows[pivot], rows[rank]
        inv = rows[rank][col].inv()
        rows[rank] = [e * inv for e in rows[rank]]
        for r in range(len(rows)):
            if r != rank and not rows[r][col].is_zero():
                f = rows[r][col]
                rows[r] = [a - f * b for a, b in zip(rows[r], rows[rank])]
        rank += 1
    return rank


def _mat_mul_scalar(field, A, B):
    n = len(A)
    return [
        [
            sum((A[i][k] * B[k][j] for k in range(n)), field.zero)
            for j in range(n)
        ]
        for i in range(n)
    ]


def finite_potent_trace(phi, certificates=None, max_power=None, window=None):
    """Trace of a finite-potent operator carrying the full certificate set.

    Witness lattices from the certificates give a finite monomial box; the
    matrix of the induced endomorphism on that box is computed over the last
    residue field, checked for rank stabilization, and traced on the
    invariant subspace containing the eventual image (cross-checked against
    the full matrix trace, which agrees because the complement acts
    nilpotently).
    """
    desc = phi.descriptor
    n = desc.n
    if certificates is None:
        certificates = {}
        for i in range(1, n + 1):
            for j in (1, 2):
                certificates[(i, j)] = certify_membership(phi, (i, j))
    bounds = []
    for i in range(1, n + 1):
        lo = certificates[(i, 1)].level_bounds()[i - 1][0]
        hi = certificates[(i, 2)].level_bounds()[i - 1][1]
        if lo is None or hi is None:
            raise NotReduced(f"no finite box at level {i}")
        bounds.append((lo, max(hi, lo)))
    field = desc.field
    # every primitive in the class is k'-linear, so the matrix lives over k'
    box = [()]
    for (lo, hi) in bounds:
        box = [idx + (q,) for idx in box for q in range(lo, hi)]
    dim = len(box)
    if dim == 0:
        return field.base.zero
    cols = []
    for idx in box:
        img = phi.apply(desc.monomial(idx), window)
        cols.append([img.coefficient_at(odx) for odx in box])
        # image must stay above the witness bound at every level
        for odx, s in img.known_terms():
            if any(o < lo for o, (lo, hi) in zip(odx, bounds)):
                raise NotReduced("image escapes the witness lattice box")
    matrix = [[cols[j][i] for j in range(dim)] for i in range(dim)]
    # rank stabilization
    limit = max_power or dim + 1
    power = matrix
    prev_rank = _rref_rank(field, power)
    q = 1
    while q <= limit:
        nxt = _mat_mul_scalar(field, power, matrix)
        rank = _rref_rank(field, nxt)
        if rank == prev_rank:
            break
        power, prev_rank, q = nxt, rank, q + 1
    else:
        raise NotReduced("rank did not stabilize within the expected power")
    full_trace = sum((matrix[i][i] for i in range(dim)), field.zero)
    inv_trace = _trace_on_invariant_subspace(field, matrix, power, dim)
    if inv_trace is not None and inv_trace != full_trace:
        raise LocalFieldError("invariant-subspace trace disagrees with the matrix trace")
    return ext_trace(full_trace)


def _trace_on_invariant_subspace(field, matrix, stable_power, dim):
    """Trace of the action on im(phi^q): solve M B = B T on a column basis."""
    basis_cols = []
    seen = []
    for j in range(dim):
        col = [stable_power[i][j] for i in range(dim)]
        trial = seen + [col]
        if _rref_rank(field, trial) > len(seen):
            seen.append(col)
            basis_cols.append(col)
    r = len(basis_cols)
    if r == 0:
        return field.zero
    images = []
    for col in basis_cols:
        img = [
            sum((matrix[i][k] * col[k] for k in range(dim)), field.zero)
            for i in range(dim)
        ]
        images.append(img)
    # solve B T = images for T (columns): Gaussian on the r pivot rows of B
    aug = [[basis_cols[j][i] for j in range(r)] + [im[i] for im in images]
           for i in range(dim)]
    rank = 0
    for col in range(r):
        pivot = None
        for rr in range(rank, dim):
            if not aug[rr][col].is_zero():
                pivot = rr
                break
        if pivot is None:
            return None
        aug[rank], aug[pivot] = aug[pivot], aug[rank]
        inv = aug[rank][col].inv()
        aug[rank] = [e * inv for e in aug[rank]]
        for rr in range(dim):
            if rr != rank and not aug[rr][col].is_zero():
                f = aug[rr][col]
                aug[rr] = [a - f * b for a, b in zip(aug[rr], aug[rank])]
        rank += 1
    trace = field.zero
    for jj in range(r):
        trace = trace + aug[jj][r + jj]
    return trace


# ---------------------------------------------------------------------------
# lifting independence
# ---------------------------------------------------------------------------


def verify_lifting_independence(phi, sigma, sigma_prime, targets, ladder_depth=2,
                                probe_count=6):
    """Re-run certification under a second lifting system and compare.

    Disagreement is reported, not raised: it would falsify the implementation
    rather than the underlying lifting-independence theorem.
    """
    desc = phi.descriptor
    report = {"targets": {}, "agreements": {}}
    probes = _default_probes(desc, count=probe_count)
    for target in targets:
        res = {}
        for name, system in (("sigma", sigma), ("sigma_prime", sigma_prime)):
            try:
                cert = certify_membership(
                    _rebind_projections(phi, system), target, ladder_depth
                )
                res[name] = cert.replay(probes)
            except NotCertifiable as exc:
                res[name] = f"not-certifiable: {exc.reason}"
        report["targets"][target] = res
        report["agreements"][target] = (
            res.get("sigma") is True
            and res.get("sigma_prime") is True
            or res.get("sigma") == res.get("sigma_prime")
        )
    report["induced_maps_agree"] = _compare_induced_maps(
        phi, sigma, sigma_prime, probe_count
    )
    return report


def _induced_closure_entry(phi, q_out, q_in, system, window):
    """Entry of the induced quotient map through sigma-expansions (any lifting)."""
    desc = phi.descriptor
    t1 = Series.generator(desc.field, desc.n, 1)

    def act(c):
        x = system.sigma1.apply(c) * t1.__pow__(q_in)
        y = phi.apply(x, window)
        pairs = sigma_expand(y, system.sigma1, window=window)
        out = Series.zero(desc.field, desc.n - 1)
        for bq, q in pairs:
            if q == q_out:
                out = out + bq
        return out

    return act


def _compare_induced_maps(phi, sigma, sigma_prime, probe_count, gap=2):
    """Check C o M_sigma = M_sigma' o C on probes, C the change-of-lifting matrix.

    The operator is fixed; only the coordinates change, so the two induced
    matrices on L_0 / a^gap L_0 must be conjugate.  Needs a level-1 band of 0
    so the quotient endomorphism is defined; returns None when inapplicable.
    """
    from .tlf import ArtinianQuotient, change_of_lifting_matrix

    desc = phi.descriptor
    if desc.n < 2:
        return None
    band = phi.band1()
    if band is None or band > 0:
        return None
    w = desc.window
    A = ArtinianQuotient(desc, gap - 1)
    C = change_of_lifting_matrix(A, sigma.sigma1, sigma_prime.sigma1)
    M_s = [
        [_induced_closure_entry(phi, qo, qi, sigma, w) for qi in range(gap)]
        for qo in range(gap)
    ]
    M_sp = [
        [_induced_closure_entry(phi, qo, qi, sigma_prime, w) for qi in range(gap)]
        for qo in range(gap)
    ]

    def matvec(M, v):
        out = []
        for qo in range(gap):
            acc = Series.zero(desc.field, desc.n - 1)
            for qi in range(gap):
                acc = acc + M[qo][qi](v[qi])
            out.append(acc)
        return out

    sub = _default_probes(desc.residue_descriptor(), count=probe_count)
    zero = Series.zero(desc.field, desc.n - 1)
    vectors = [[p if i == slot else zero for i in range(gap)] for p in sub for slot in range(gap)]
    for v in vectors:
        lhs = C.apply_to_coordinates(matvec(M_s, v))
        rhs = matvec(M_sp, C.apply_to_coordinates(v))
        for a, b in zip(lhs, rhs):
            if not (a - b).is_zero_within_window():
                return False
    return True


def _rebind_projections(phi, system):
    """Copy of the operator tree with every projection bound to the given system."""
    if isinstance(phi, LevelProjection):
        return LevelProjection(phi.descriptor, phi.level, phi.cmp, phi.cutoff, system)
    if isinstance(phi, CoeffLift):
        return CoeffLift(phi.descriptor, phi.inner, system)
    if isinstance(phi, Compose):
        return Compose([_rebind_projections(p, system) for p in phi.parts])
    if isinstance(phi, AddOp):
        return AddOp([_rebind_projections(p, system) for p in phi.parts])
    if isinstance(phi, ScalarMul):
        return ScalarMul(phi.scalar, _rebind_projections(phi.part, system))
    return phi


# ---------------------------------------------------------------------------
# JSON serialization of operator trees
# ---------------------------------------------------------------------------


def operator_to_json(phi):
    if isinstance(phi, MulBy):
        return {"op": "mulby", "f": phi.f.to_json()}
    if isinstance(phi, DiffOp):
        return {
            "op": "diff",
            "terms": [{"c": c.to_json(), "orders": list(I)} for c, I in phi.terms],
        }
    if isinstance(phi, LevelProjection):
        return {
            "op": "proj",
            "level": phi.level,
            "cmp": phi.cmp,
            "cutoff": phi.cutoff,
        }
    if isinstance(phi, CoeffLift):
        return {"op": "coefflift", "inner": operator_to_json(phi.inner)}
    if isinstance(phi, FiniteRank):
        return {
            "op": "finrank",
            "entries": [
                {"out": list(o), "in": list(i), "value": [str(c) for c in v.coeffs]}
                for (o, i), v in sorted(phi.matrix.items())
            ],
        }
    if isinstance(phi, Compose):
        return {"op": "compose", "parts": [operator_to_json(p) for p in phi.parts]}
    if isinstance(phi, AddOp):
        return {"op": "add", "parts": [operator_to_json(p) for p in phi.parts]}
    if isinstance(phi, ScalarMul):
        return {
            "op": "scalarmul",
            "scalar": [str(c) for c in phi.scalar.coeffs],
            "part": operator_to_json(phi.part),
        }
    raise LocalFieldError(f"cannot serialize {type(phi).__name__}")


def operator_from_json(descriptor, data, sigma=None):
    from fractions import Fraction

    sigma = sigma or LiftingSystem.standard(descriptor)
    kind = data["op"]
    field = descriptor.field

    def scal(parts):
        raw = [Fraction(c) if field.char == 0 else int(c) for c in parts]
        return field.element(raw)

    if kind == "mulby":
        return MulBy(descriptor, Series.from_json(field, descriptor.n, data["f"]))
    if kind == "diff":
        terms = [
            (Series.from_json(field, descriptor.n, t["c"]), tuple(t["orders"]))
            for t in data["terms"]
        ]
        return DiffOp(descriptor, terms)
    if kind == "proj":
        return LevelProjection(descriptor, data["level"], data["cmp"], data["cutoff"], sigma)
    if kind == "coefflift":
        inner = operator_from_json(descriptor.residue_descriptor(), data["inner"])
        return CoeffLift(descriptor, inner, sigma)
    if kind == "finrank":
        matrix = {
            (tuple(e["out"]), tuple(e["in"])): scal(e["value"])
            for e in data["entries"]
        }
        return FiniteRank(descriptor, matrix)
    if kind == "compose":
        return Compose([operator_from_json(descriptor, p, sigma) for p in data["parts"]])
    if kind == "add":
        return AddOp([operator_from_json(descriptor, p, sigma) for p in data["parts"]])
    if kind == "scalarmul":
        return ScalarMul(
            scal(data["scalar"]), operator_from_json(descriptor, data["part"], sigma)
        )
    raise LocalFieldError(f"unknown operator kind {kind!r}")
