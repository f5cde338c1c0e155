import random

import pytest

from tlfields.errors import CharacteristicObstruction, NotUniformizers
from tlfields.scalars import make_extension
from tlfields.series import Series, agree_within_window, random_series, truncate_level1
from tlfields.tlf import (
    ArtinianQuotient,
    LiftingSpec,
    LiftingSystem,
    TlfDescriptor,
    UniformizerSystem,
    change_of_lifting_matrix,
    differential_order_bounded,
    parametrize,
    sigma_expand,
    sigma_reassemble,
    validate_uniformizers,
)


@pytest.fixture
def Q():
    return make_extension(0, [0, 1])


@pytest.fixture
def F5():
    return make_extension(5, [0, 1])


@pytest.fixture
def K2(Q):
    return TlfDescriptor(2, Q)


@pytest.fixture
def K2_F5(F5):
    return TlfDescriptor(2, F5)


class TestValidateUniformizers:
    def test_standard_valid(self, K2):
        sys_ = validate_uniformizers(K2, K2.gens())
        assert sys_.valuations == ((1, 0), (0, 1))

    def test_square_rejected(self, K2):
        t1, t2 = K2.gens()
        with pytest.raises(NotUniformizers) as ei:
            validate_uniformizers(K2, [t1 * t1, t2])
        assert ei.value.level == 1

    def test_sum_rejected(self, K2):
        t1, t2 = K2.gens()
        with pytest.raises(NotUniformizers) as ei:
            validate_uniformizers(K2, [t1 + t2, t2])
        assert ei.value.level == 1

    def test_perturbed_valid(self, K2):
        t1, t2 = K2.gens()
        one = K2.one()
        validate_uniformizers(K2, [t1 * (one + t2), t2 + t1])


class TestParametrize:
    def test_identity(self, K2):
        iso = parametrize(K2, UniformizerSystem.standard(K2))
        x = K2.from_terms({(1, -2): K2.field.from_int(3)})
        assert iso.forward(x) == x
        assert iso.inverse(x) == x

    def test_forward_definition(self, K2):
        t1, t2 = K2.gens()
        a1 = t1 * (K2.one() + t2)
        iso = parametrize(K2, [a1, t2])
        assert iso.forward(t1) == a1

    @pytest.mark.parametrize("char", [0, 5])
    def test_roundtrip_random(self, char):
        field = make_extension(char, [0, 1])
        K = TlfDescriptor(2, field, window=7)
        rng = random.Random(17)
        t1, t2 = K.gens()
        one = K.one()
        a1 = t1 * (one + t2) + t1 ** 2 * t2
        a2 = t2 + t1 * t2
        iso = parametrize(K, [a1, a2])
        for _ in range(50):
            x = random_series(field, 2, rng, max_terms=3, exp_span=2)
            y = iso.inverse(iso.forward(x))
            assert agree_within_window(y - x, K.zero())

    def test_valuation_preserved(self, K2):
        t1, t2 = K2.gens()
        iso = parametrize(K2, [t1 * (K2.one() + t2), t2 + t1 * t1])
        for exps in [(0, 1), (2, -1), (-1, 3), (1, 0)]:
            assert iso.forward(K2.monomial(exps)).valuation() == exps


class TestLiftings:
    def test_standard_apply(self, K2):
        t2_inner = Series.generator(K2.field, 1, 1)
        sigma = LiftingSpec(1)
        lifted = sigma.apply(t2_inner)
        assert lifted == K2.gen(2)

    def test_twisted_on_t2(self, K2):
        # sigma(t2) = t2 + t1 for the depth-1 twist by d/dt2 with c = 1
        sigma = LiftingSpec(1, "twisted", axis=2, depth=1)
        t2_inner = Series.generator(K2.field, 1, 1)
        lifted = sigma.apply(t2_inner)
        t1, t2 = K2.gens()
        assert lifted == t2 + t1

    def test_twisted_on_t2_squared(self, K2):
        # multiplicativity: sigma(t2^2) = t2^2 + 2 t1 t2 + t1^2
        sigma = LiftingSpec(1, "twisted", axis=2, depth=2)
        t2_inner = Series.generator(K2.field, 1, 1)
        lifted = sigma.apply(t2_inner * t2_inner)
        t1, t2 = K2.gens()
        expected = t2 * t2 + t1 * t2 * 2 + t1 * t1
        assert lifted == expected
        # depth-1 truncation agrees modulo t1^2
        sigma1 = LiftingSpec(1, "twisted", axis=2, depth=1)
        lift1 = sigma1.apply(t2_inner * t2_inner)
        assert truncate_level1(lift1 - expected, 2).is_zero_within_window()

    def test_hom_property_random(self, K2):
        rng = random.Random(3)
        c = Series.from_terms(K2.field, 1, {(1,): K2.field.one})
        sigma = LiftingSpec(1, "twisted", axis=2, c=c, depth=3)
        assert sigma.verify_homomorphism(K2, rng, trials=10)

    def test_char_p_depth_limit(self, K2_F5):
        with pytest.raises(CharacteristicObstruction):
            LiftingSystem.twisted_at(K2_F5, 1, 2, depth=5)
        LiftingSystem.twisted_at(K2_F5, 1, 2, depth=4)

    def test_d1(self, Q):
        K3 = TlfDescriptor(3, Q)
        sys_ = LiftingSystem.twisted_at(K3, 2, 3, depth=1)
        reduced = sys_.d1()
        assert reduced.descriptor.n == 2
        assert reduced.specs[0].kind == "twisted"
        assert reduced.specs[0].axis == 2

    def test_json_roundtrip(self, K2):
        c = Series.from_terms(K2.field, 1, {(0,): K2.field.one})
        spec = LiftingSpec(1, "twisted", axis=2, c=c, depth=2)
        data = spec.to_json()
        back = LiftingSpec.from_json(K2, data)
        assert back.kind == "twisted" and back.axis == 2 and back.depth == 2
        assert back.c == c


class TestSigmaExpand:
    def test_standard_split(self, K2):
        t1, t2 = K2.gens()
        x = t1 + t2
        sigma = LiftingSpec(1)
        pairs = sigma_expand(x, sigma)
        by_q = {q: b for b, q in pairs}
        t2_inner = Series.generator(K2.field, 1, 1)
        assert by_q[0] == t2_inner
        assert by_q[1] == Series.one(K2.field, 1)

    def test_roundtrip_standard(self, K2):
        rng = random.Random(9)
        sigma = LiftingSpec(1)
        a1 = K2.gen(1)
        for _ in range(30):
            x = random_series(K2.field, 2, rng)
            pairs = sigma_expand(x, sigma)
            back = sigma_reassemble(pairs, sigma, a1, 2, K2.field)
            assert back == x

    def test_twisted_example(self, K2):
        # x = t2 under the twist by d/dt2, c=1: b_0 = t2, b_1 = -1, rest 0
        sigma = LiftingSpec(1, "twisted", axis=2, depth=3)
        x = K2.gen(2)
        pairs = sigma_expand(x, sigma)
        by_q = {q: b for b, q in pairs}
        t2_inner = Series.generator(K2.field, 1, 1)
        assert by_q[0] == t2_inner
        assert by_q[1] == -Series.one(K2.field, 1)
        assert set(by_q) == {0, 1}

    def test_roundtrip_twisted(self, K2):
        # the full expansion is infinite; agreement holds on the window covered
        rng = random.Random(29)
        sigma = LiftingSpec(1, "twisted", axis=2, depth=4)
        a1 = K2.gen(1)
        for _ in range(20):
            x = random_series(K2.field, 2, rng, max_terms=3, exp_span=2)
            pairs = sigma_expand(x, sigma, window=8)
            back = sigma_reassemble(pairs, sigma, a1, 2, K2.field)
            stop = x.order + 8
            diff = truncate_level1(back - x, stop)
            assert diff.is_zero_within_window()

    def test_nonstandard_uniformizer(self, K2):
        rng = random.Random(31)
        sigma = LiftingSpec(1)
        t1, t2 = K2.gens()
        a1 = t1 * (K2.one() + t2)
        for _ in range(15):
            x = random_series(K2.field, 2, rng, max_terms=3, exp_span=2)
            pairs = sigma_expand(x, sigma, a1, window=8)
            back = sigma_reassemble(pairs, sigma, a1, 2, K2.field)
            stop = x.order + 8
            diff = truncate_level1(back - x, stop)
            assert diff.is_zero_within_window()


class TestChangeOfLifting:
    @pytest.mark.parametrize("char", [5, 0])
    def test_unit_upper_triangular(self, char):
        field = make_extension(char, [0, 1])
        K = TlfDescriptor(2, field)
        A = ArtinianQuotient(K, 2)  # O_1/m_1^3
        std = LiftingSpec(1)
        twist = LiftingSpec(1, "twisted", axis=2, depth=2)
        mat = change_of_lifting_matrix(A, std, twist)
        t2 = Series.generator(field, 1, 1)
        probes = [Series.one(field, 1), t2, t2 * t2, t2.inv(), t2 + t2 * t2]
        assert mat.is_unit_upper_triangular(probes)

    def test_first_order_entry(self, Q):
        # entry (0,1) should be -d/dt2: double commutator with mult-by-t2 vanishes
        K = TlfDescriptor(2, Q)
        A = ArtinianQuotient(K, 2)
        std = LiftingSpec(1)
        twist = LiftingSpec(1, "twisted", axis=2, depth=2)
        mat = change_of_lifting_matrix(A, std, twist)
        t2 = Series.generator(Q, 1, 1)
        probes = [Series.one(Q, 1), t2, t2 * t2, t2.inv()]
        mults = [t2, t2 * t2, Series.one(Q, 1) + t2]
        entry = mat.entries[0][1]
        # acts as -(d/dt2): on t2^2 gives -2 t2
        img = entry(t2 * t2)
        assert img == t2.scalar_mul(Q.from_int(-2))
        assert differential_order_bounded(entry, 1, probes, mults)
        assert not differential_order_bounded(entry, 0, probes, mults)

    def test_same_lifting_identity(self, Q):
        K = TlfDescriptor(2, Q)
        A = ArtinianQuotient(K, 2)
        std = LiftingSpec(1)
        mat = change_of_lifting_matrix(A, std, std)
        t2 = Series.generator(Q, 1, 1)
        probes = [Series.one(Q, 1), t2, t2.inv()]
        for i in range(3):
            for j in range(3):
                for p in probes:
                    img = mat.entries[i][j](p)
                    if i == j:
                        assert img == p
                    else:
                        assert img.is_zero_within_window()

    def test_neumann_inverse(self, Q):
        K = TlfDescriptor(2, Q)
        A = ArtinianQuotient(K, 2)
        std = LiftingSpec(1)
        twist = LiftingSpec(1, "twisted", axis=2, depth=2)
        mat = change_of_lifting_matrix(A, std, twist)
        inv = mat.neumann_inverse()
        t2 = Series.generator(Q, 1, 1)
        coords = [t2, Series.one(Q, 1), t2 * t2]
        forward = mat.apply_to_coordinates(coords)
        back = inv.apply_to_coordinates(forward)
        for orig, got in zip(coords, back):
            assert agree_within_window(orig - got, Series.zero(Q, 1))

    def test_reassembly_consistency(self, Q):
        # sum sigma(a_i) m_i = sum sigma'(gamma coords) m_i as elements of A
        K = TlfDescriptor(2, Q)
        A = ArtinianQuotient(K, 2)
        std = LiftingSpec(1)
        twist = LiftingSpec(1, "twisted", axis=2, depth=2)
        mat = change_of_lifting_matrix(A, std, twist)
        basis = A.standard_basis()
        rng = random.Random(8)
        for _ in range(10):
            coords = [random_series(Q, 1, rng, max_terms=2, exp_span=2) for _ in range(3)]
            lhs = K.zero()
            for c, m in zip(coords, basis):
                lhs = lhs + std.apply(c) * m
            new_coords = mat.apply_to_coordinates(coords)
            rhs = K.zero()
            for c, m in zip(new_coords, basis):
                rhs = rhs + twist.apply(c) * m
            assert agree_within_window(A.reduce(lhs) - A.reduce(rhs), K.zero())
