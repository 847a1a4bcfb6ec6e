import random

import pytest

from weilrad.algebra import ExtensionSpec, TruncatedAlgebra
from weilrad.errors import HypothesisNotSatisfied, NoWitness, UsageError
from weilrad.field import CoefficientField
from weilrad.invariants import (
    FibreKind,
    FibreSpec,
    borel_exponent_conjecture,
    certify_class,
    class_upper_bound,
    exponent_bound_from_nilpotency,
    exponent_bound_from_rank,
    fibre_class,
    gl2_class_witness,
    imprimitive_borel_witness,
    is_unusual,
    predict_class,
    sl2_class_witness,
    sl2_odd_class_witness,
    squares_maximizer,
    superdiagonal_order_witness,
    top_monomial_multiset,
)
from weilrad.matgroup import AlgebraMatrix, GroupTag, UnipotentElement, commutator


def A(text, d=1):
    spec = ExtensionSpec.parse(text)
    return TruncatedAlgebra(spec, CoefficientField(spec.p, d))


def F(text, phi=False):
    return FibreSpec.parse(text, phi_injective=phi)


# ---------------------------------------------------------------------------
# classification and per-fibre class numbers
# ---------------------------------------------------------------------------


def test_is_unusual():
    assert is_unusual(F("SL2@p=2;e=1"))
    assert is_unusual(F("SL2^2*T1@p=2;e=1"))
    assert not is_unusual(F("SL2@p=3;e=1"))
    assert not is_unusual(F("GL2@p=2;e=1"))
    assert not is_unusual(F("PGL2@p=2;e=1"))
    assert not is_unusual(F("T1@p=2;e=1"))


def test_fibre_kind_parse_roundtrip():
    for text in ["T1", "T3", "SL2", "SL2^2*T1", "GL2", "GL4", "PGL2"]:
        assert str(FibreKind.parse(text)) == text
    with pytest.raises(UsageError):
        FibreKind.parse("E8")
    assert str(FibreSpec.parse("SL2^2*T1@p=2;e=1,1")) == "SL2^2*T1@p=2;e=1,1"


def test_fibre_class_values():
    assert fibre_class(F("T1@p=2;e=3,2")) == 1
    assert fibre_class(F("GL2@p=2;e=2")) == 3
    assert fibre_class(F("SL2@p=2;e=3", phi=True)) == 4
    assert fibre_class(F("SL2@p=3;e=1")) == 2
    assert fibre_class(F("PGL2@p=2;e=2")) == 3
    assert fibre_class(F("SL2^3*T2@p=2;e=1,1", phi=True)) == 2


def test_unusual_fibre_without_flag_is_refused():
    with pytest.raises(HypothesisNotSatisfied):
        fibre_class(F("SL2@p=2;e=1,1"))
    with pytest.raises(HypothesisNotSatisfied):
        predict_class([F("SL2@p=2;e=1,1")])
    # flag not needed when the fibre is not unusual
    assert fibre_class(F("SL2@p=3;e=1")) == 2


def test_predict_class_examples():
    assert predict_class([F("SL2@p=2;e=1", phi=True)]).n_value == 1
    assert predict_class([F("SL2@p=2;e=1,1", phi=True)]).n_value == 2
    got = predict_class([F("GL2@p=2;e=2"), F("T1@p=2;e=5")])
    assert got.n_value == 3


def test_predict_class_refuses_all_commutative():
    with pytest.raises(HypothesisNotSatisfied):
        predict_class([F("T1@p=2;e=1"), F("T2@p=2;e=2")])
    with pytest.raises(UsageError):
        predict_class([])


def test_predict_class_is_monotone_under_adding_fibres():
    rng = random.Random(5)
    pool = [
        F("GL2@p=2;e=2"), F("SL2@p=2;e=1,1", phi=True), F("PGL2@p=2;e=1"),
        F("SL2@p=2;e=3", phi=True), F("GL3@p=2;e=1"), F("T1@p=2;e=4"),
    ]
    base = [F("GL2@p=2;e=1")]
    for _ in range(10):
        fibres = list(base)
        n_prev = predict_class(fibres).n_value
        extra = pool[rng.randrange(len(pool))]
        n_new = predict_class(fibres + [extra]).n_value
        if extra.kind.is_commutative:
            assert n_new == max(n_prev, 1)
        else:
            assert n_new == max(n_prev, fibre_class(extra))


def test_class_upper_bound_examples():
    assert class_upper_bound(F("GL2@p=3;e=1")) == 2
    assert class_upper_bound(F("SL2@p=2;e=1,1")) == 2
    assert class_upper_bound(F("PGL2@p=2;e=1")) == 1
    assert class_upper_bound(F("T1@p=2;e=4")) == 1


# ---------------------------------------------------------------------------
# witnesses
# ---------------------------------------------------------------------------


def test_top_monomial_multiset_realizes_top_monomial():
    for text in ["p=2;e=2", "p=2;e=2,1", "p=3;e=1,1"]:
        B = A(text)
        gens = [B.gen(i) for i in top_monomial_multiset(B)]
        assert len(gens) == B.nilpotency_index() - 1
        prod = B.one()
        for g in gens:
            prod = prod * g
        assert not prod.is_zero()
        assert prod.support() == [tuple(q - 1 for q in B.qs)]


def test_gl2_witness_examples():
    B = A("p=2;e=1")
    w = gl2_class_witness(B)
    assert w.chain_length == 1
    assert w.result.matrix[0, 1] == B.gen(0)
    C = A("p=2;e=2")
    w = gl2_class_witness(C)
    assert w.chain_length == 3
    assert w.result.matrix[0, 1] == C.gen(0) ** 3
    D = A("p=3;e=1")
    w = gl2_class_witness(D)
    assert w.chain_length == 2
    assert w.result.matrix[0, 1] == D.gen(0) ** 2


def test_gl2_witness_closed_form_matches_nested_commutator():
    # the function computes through group operations; compare against the
    # closed form (1, m*m_1*...*m_{n-2}; 0, 1) independently
    for text in ["p=2;e=2", "p=2;e=2,1", "p=3;e=1,1", "p=2;e=1,1,1"]:
        B = A(text)
        w = gl2_class_witness(B)
        top = B.one()
        for i in top_monomial_multiset(B):
            top = top * B.gen(i)
        expected = AlgebraMatrix(B, [[B.one(), top], [B.zero(), B.one()]])
        assert w.result.matrix == expected
        assert not w.result.is_identity()
        # recompute the nested commutator a second time through matgroup
        acc = w.chain[-1]
        for g in reversed(w.chain[:-1]):
            acc = commutator(g, acc)
        assert acc == w.result


def test_gl2_witness_on_pgl2_representatives():
    B = A("p=2;e=2")
    w = gl2_class_witness(B, tag=GroupTag.pgl2())
    assert w.chain_length == 3
    assert not w.result.is_identity()


def test_sl2_odd_witness():
    B = A("p=3;e=1")
    w = sl2_odd_class_witness(B)
    assert w.chain_length == 2
    assert not w.result.is_identity()
    # entry is a unit multiple of the top monomial
    entry = w.result.matrix[0, 1]
    assert entry.support() and all(sum(m) >= 2 for m in entry.support())
    with pytest.raises(UsageError):
        sl2_odd_class_witness(A("p=2;e=2"))


def test_sl2_char2_witness_examples():
    B = A("p=2;e=1,1")
    w = sl2_class_witness(B)
    x1x2 = B.gen(0) * B.gen(1)
    assert w.extras["pi"] == x1x2
    assert w.chain_length == 2
    assert w.result.matrix[0, 0] == B.one() + x1x2
    assert w.result.matrix[1, 1] == B.one() + x1x2
    assert w.result.matrix[0, 1].is_zero() and w.result.matrix[1, 0].is_zero()

    C = A("p=2;e=2")
    w = sl2_class_witness(C)
    assert w.extras["pi"] == C.gen(0) ** 2
    assert w.chain_length == 2

    D = A("p=2;e=3")
    w = sl2_class_witness(D)
    assert w.extras["pi"] == D.gen(0) ** 6
    assert w.chain_length == 4


def test_sl2_char2_witness_structure():
    # diagonal entries are exactly 1 + pi; corners lie in I_{n-1}; pi in m^2
    for text in ["p=2;e=1,1", "p=2;e=2", "p=2;e=3", "p=2;e=2,1", "p=2;e=2,2"]:
        B = A(text)
        n = B.unusual_class_invariant()
        if n < 2:
            continue
        w = sl2_class_witness(B)
        pi = w.extras["pi"]
        one = B.one()
        assert not pi.is_zero()
        assert pi.in_ideal(B.ideal_power(2))
        assert w.result.matrix[0, 0] == one + pi
        assert w.result.matrix[1, 1] == one + pi
        i_prev, _ = B.sl2_filtration_ideals(n - 1)
        assert w.result.matrix[0, 1].in_ideal(i_prev)
        assert w.result.matrix[1, 0].in_ideal(i_prev)
        assert not w.result.is_identity()
        assert w.chain_length == n
        # w is the closed-form root element
        gamma = squares_maximizer(B)[1]
        prod = B.one()
        for i, g in enumerate(gamma):
            prod = prod * B.gen(i) ** (2 * g)
        assert w.extras["w"][0, 1] == prod * w.chain[-1].matrix[0, 1]
    with pytest.raises(NoWitness):
        sl2_class_witness(A("p=2;e=1"))


def test_squares_maximizer_matches_ideal_iteration():
    for text in ["p=2;e=1", "p=2;e=2", "p=2;e=3", "p=2;e=4", "p=2;e=1,1",
                 "p=2;e=2,1", "p=2;e=2,2", "p=2;e=3,1", "p=2;e=1,1,1"]:
        B = A(text)
        ell, gamma, delta = squares_maximizer(B)
        assert ell == B.unusual_class_invariant()
        if ell >= 2:
            # the maximizer monomial is nonzero
            mono = tuple(2 * g + d for g, d in zip(gamma, delta))
            assert all(m <= q - 1 for m, q in zip(mono, B.qs))
            assert sum(gamma) == ell - 2


# ---------------------------------------------------------------------------
# certificates
# ---------------------------------------------------------------------------


def test_certificates_close_both_bounds_at_desk_scale():
    fibres = [
        F("GL2@p=2;e=1"), F("GL2@p=2;e=2"), F("GL2@p=2;e=1,1"), F("GL3@p=2;e=1"),
        F("PGL2@p=2;e=1"), F("PGL2@p=2;e=2"), F("PGL2@p=2;e=3"),
        F("SL2@p=2;e=1"), F("SL2@p=2;e=1,1"), F("SL2@p=2;e=2"), F("SL2@p=2;e=3"),
        F("SL2@p=3;e=1"), F("SL2@p=3;e=2"), F("GL2@p=3;e=1"), F("PGL2@p=3;e=1"),
        F("T1@p=2;e=2"), F("GL2@p=2;e=2,2"), F("SL2@p=2;e=2,2"),
    ]
    for f in fibres:
        cert = certify_class(f)
        assert cert.proved, f
        assert cert.lower == cert.upper == cert.ell


def test_certificate_json_shape():
    cert = certify_class(F("SL2@p=2;e=1,1"))
    data = cert.to_json_dict()
    for key in ("kind", "ext", "ell", "unusual", "commutative", "upper", "lower", "proved", "witness"):
        assert key in data
    assert data["witness"]["chain_length"] == 2


def test_report_serialization_keys():
    report = predict_class([F("SL2@p=2;e=1,1", phi=True), F("GL2@p=2;e=2")])
    data = report.to_json_dict()
    assert set(data) == {"fibres", "N", "witness", "bounds", "conjectural"}
    assert data["N"] == 3
    assert {f["kind"] for f in data["fibres"]} == {"SL2", "GL2"}


# ---------------------------------------------------------------------------
# exponent bounds and order witnesses
# ---------------------------------------------------------------------------


def test_exponent_bound_from_nilpotency():
    assert exponent_bound_from_nilpotency(A("p=2;e=2")) == 2  # n = 4
    assert exponent_bound_from_nilpotency(A("p=2;e=1")) == 1  # n = 2
    assert exponent_bound_from_nilpotency(A("p=3;e=1")) == 1  # n = 3


def test_exponent_bound_from_rank():
    assert exponent_bound_from_rank(ExtensionSpec.parse("p=2;e=1"), 2) == 2
    assert exponent_bound_from_rank(ExtensionSpec.parse("p=2;e=1"), 1) == 0
    assert exponent_bound_from_rank(ExtensionSpec.parse("p=2;e=2"), 2) == 4
    with pytest.raises(UsageError):
        exponent_bound_from_rank(ExtensionSpec.parse("p=2;e=1"), 0)


def _order_of_one_plus(B, x, n):
    g = UnipotentElement(
        GroupTag.gl(n),
        AlgebraMatrix(B, [[(B.one() if i == j else B.zero()) + x[i, j] for j in range(n)] for i in range(n)]),
    )
    return g.p_power_order()


def test_superdiagonal_order_witness_examples():
    for text, expected in [("p=2;e=1", 1), ("p=2;e=2", 2), ("p=3;e=1", 1)]:
        B = A(text)
        n = B.nilpotency_index()
        x = superdiagonal_order_witness(B)
        assert x.n == n
        # the (1, n) entry of x^(n-1) is the nonzero top monomial
        power = x
        for _ in range(n - 2):
            power = power * x
        assert not power[0, n - 1].is_zero()
        assert _order_of_one_plus(B, x, n) == expected
        assert expected == exponent_bound_from_nilpotency(B)
    with pytest.raises(UsageError):
        superdiagonal_order_witness(A("p=2;e=2"), n=3)


def test_imprimitive_borel_witness():
    B = A("p=2;e=1,1")
    w = imprimitive_borel_witness(B)
    sq = w * w
    assert sq.matrix[0, 1] == B.gen(1) * B.gen(0)
    assert not sq.is_identity()
    assert w.p_power_order() == 2

    C = A("p=2;e=2,1")
    w = imprimitive_borel_witness(C)
    four = w * w * w * w
    assert four.matrix[0, 1] == C.gen(1) * C.gen(0) ** 3
    assert not four.is_identity()
    assert w.p_power_order() == 3

    with pytest.raises(NoWitness):
        imprimitive_borel_witness(A("p=2;e=1"))


def test_borel_exponent_conjecture_values():
    rec = borel_exponent_conjecture("GL2", ExtensionSpec.parse("p=2;e=1"))
    assert rec["r_q"] == 0 and rec["levi_s"] == 0 and rec["predicted_exponent"] == 1
    assert rec["conjectural"] is True
    rec = borel_exponent_conjecture("GL2", ExtensionSpec.parse("p=2;e=1,1"))
    assert rec["r_q"] == 1 and rec["predicted_exponent"] == 1
    rec = borel_exponent_conjecture("SL2", ExtensionSpec.parse("p=3;e=1"))
    assert rec["predicted_exponent"] == 1
    with pytest.raises(UsageError):
        borel_exponent_conjecture("GL3", ExtensionSpec.parse("p=2;e=1"))


def _extensions_up_to_degree(p, cap):
    out = []
    def rec(prefix, deg):
        if prefix:
            out.append(tuple(prefix))
        e = 1
        while deg * p**e <= cap:
            rec(prefix + [e], deg * p**e)
            e += 1
    rec([], 1)
    return out


def test_certificates_close_for_every_supported_kind_up_to_degree_64():
    kinds = ["T1", "SL2", "GL2", "GL3", "PGL2", "SL2^2*T1"]
    for p in (2, 3):
        for exps in _extensions_up_to_degree(p, 2**6):
            if len(exps) > 3:
                continue
            ext = ExtensionSpec(p, exps)
            for kind in kinds:
                cert = certify_class(FibreSpec(FibreKind.parse(kind), ext))
                assert cert.proved, (kind, str(ext))
                assert cert.lower == cert.upper == cert.ell
