"""Class and exponent calculators with explicit matrix certificates.

For each reductive fibre kind the nilpotency class of the geometric unipotent
radical of the Weil restriction is an ideal-theoretic invariant of the
truncated algebra: the nilpotency index minus one in the generic case, and
the squares-filtration invariant for products of SL2's with a torus in
characteristic 2 ("unusual" fibres).  Both directions are certified at desk
scale: an ideal computation for the upper bound and an explicit iterated
commutator of matrices for the lower bound.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

from .algebra import ExtensionSpec, TruncatedAlgebra
from .errors import HypothesisNotSatisfied, InternalError, NoWitness, UsageError
from .field import CoefficientField
from .matgroup import AlgebraMatrix, GroupTag, UnipotentElement, commutator

_KIND_RE = re.compile(r"^(T(\d+)|SL2(?:\^(\d+)\*T(\d+))?|GL(\d+)|PGL2)$")


@dataclass(frozen=True)
class FibreKind:
    """Reductive fibre shape: torus, SL2^r x torus, GL(n), or PGL2."""

    family: str  # torus | sl2_torus | gl | pgl2
    r: int = 1  # number of SL2 factors (sl2_torus)
    torus_rank: int = 0
    n: int = 2  # GL size

    @classmethod
    def torus(cls, rank: int) -> "FibreKind":
        if rank < 1:
            raise UsageError("torus rank must be >= 1")
        return cls("torus", torus_rank=rank)

    @classmethod
    def sl2_torus(cls, r: int = 1, torus_rank: int = 0) -> "FibreKind":
        if r < 1:
            raise UsageError("SL2^r x torus wants r >= 1")
        return cls("sl2_torus", r=r, torus_rank=torus_rank)

    @classmethod
    def gl(cls, n: int) -> "FibreKind":
        if n < 2:
            raise UsageError("GL(n) wants n >= 2")
        return cls("gl", n=n)

    @classmethod
    def pgl2(cls) -> "FibreKind":
        return cls("pgl2")

    @classmethod
    def parse(cls, text: str) -> "FibreKind":
        m = _KIND_RE.match(text.strip())
        if not m:
            raise UsageError(
                f"bad fibre kind {text!r}; expected T<rank>, SL2, SL2^r*T<s>, GL<n> or PGL2"
            )
        if m.group(2):
            return cls.torus(int(m.group(2)))
        if m.group(5):
            return cls.gl(int(m.group(5)))
        if m.group(0) == "PGL2":
            return cls.pgl2()
        r = int(m.group(3)) if m.group(3) else 1
        s = int(m.group(4)) if m.group(4) else 0
        return cls.sl2_torus(r, s)

    @property
    def is_commutative(self) -> bool:
        return self.family == "torus"

    def __str__(self):
        if self.family == "torus":
            return f"T{self.torus_rank}"
        if self.family == "gl":
            return f"GL{self.n}"
        if self.family == "pgl2":
            return "PGL2"
        if self.r == 1 and self.torus_rank == 0:
            return "SL2"
        return f"SL2^{self.r}*T{self.torus_rank}"


@dataclass(frozen=True)
class FibreSpec:
    """One reductive fibre together with its extension and the hypothesis flag
    for unusual fibres (whether the central map is injective on the relevant
    subgroup of the torus)."""

    kind: FibreKind
    extension: ExtensionSpec
    phi_injective_on_center: bool = False

    @classmethod
    def parse(cls, text: str, phi_injective: bool = False) -> "FibreSpec":
        if "@" not in text:
            raise UsageError(f"bad fibre spec {text!r}; expected <KIND>@p=<p>;e=<e1,...>")
        kind_text, ext_text = text.split("@", 1)
        return cls(FibreKind.parse(kind_text), ExtensionSpec.parse(ext_text), phi_injective)

    def __str__(self):
        return f"{self.kind}@{self.extension}"


def is_unusual(fibre: FibreSpec) -> bool:
    """p = 2 and the fibre is a direct product of SL2's with a torus."""
    return fibre.extension.p == 2 and fibre.kind.family == "sl2_torus"


def _algebra(fibre: FibreSpec, coeff: CoefficientField | None) -> TruncatedAlgebra:
    return TruncatedAlgebra(fibre.extension, coeff)


def fibre_class(fibre: FibreSpec, coeff: CoefficientField | None = None) -> int:
    """The class contribution of one fibre: 1 for commutative fibres, the
    squares-filtration invariant for unusual fibres (hypothesis flag required),
    nilpotency index minus one otherwise."""
    if fibre.kind.is_commutative:
        return 1
    A = _algebra(fibre, coeff)
    if is_unusual(fibre):
        if not fibre.phi_injective_on_center:
            raise HypothesisNotSatisfied(
                f"unusual fibre {fibre} without the injectivity hypothesis; "
                "the class is not determined (pass --phi-injective to assert it)"
            )
        return A.unusual_class_invariant()
    return A.nilpotency_index() - 1


def class_upper_bound(fibre: FibreSpec, coeff: CoefficientField | None = None) -> int:
    """Ideal-theoretic upper bound for the class of the fibre's radical."""
    if fibre.kind.is_commutative:
        return 1
    A = _algebra(fibre, coeff)
    if is_unusual(fibre):
        return A.unusual_class_invariant()
    return A.nilpotency_index() - 1


def upper_bound_source(fibre: FibreSpec) -> str:
    if fibre.kind.is_commutative:
        return "abelian"
    return "squares-filtration" if is_unusual(fibre) else "nilpotency-filtration"


# -- witness machinery -------------------------------------------------------------


def top_monomial_multiset(A: TruncatedAlgebra) -> list[int]:
    """Generator indices realizing the highest nonzero monomial: index i
    repeated q_i - 1 times.  The product of the corresponding generators is
    the top monomial, which is nonzero by construction."""
    out = []
    for i, q in enumerate(A.qs):
        out.extend([i] * (q - 1))
    return out


def squares_maximizer(A: TruncatedAlgebra) -> tuple[int, tuple[int, ...], tuple[int, ...]]:
    """Closed-form route to the unusual class invariant, plus a maximizer.

    Feasible data: delta a sum of two unit vectors with componentwise
    2*gamma_i + delta_i <= q_i - 1.  If no delta is feasible the invariant is 1
    (the square of the maximal ideal vanishes); otherwise it equals
    2 + max(sum gamma_i), and the maximizer selects the witness monomials.
    """
    qs = A.qs
    r = A.r
    best = None
    for a in range(r):
        for b in range(a, r):
            delta = [0] * r
            delta[a] += 1
            delta[b] += 1
            if any(d > q - 1 for d, q in zip(delta, qs)):
                continue
            gamma = tuple((q - 1 - d) // 2 for q, d in zip(qs, delta))
            if best is None or sum(gamma) > sum(best[0]):
                best = (gamma, tuple(delta))
    if best is None:
        return 1, (0,) * r, (0,) * r
    gamma, delta = best
    return 2 + sum(gamma), gamma, delta


@dataclass(frozen=True)
class ClassWitness:
    """An iterated commutator certificate: chain of group elements whose
    left-nested commutator is nontrivial, so the class is at least the chain
    length."""

    kind: str
    chain: tuple[UnipotentElement, ...]
    result: UnipotentElement
    extras: dict = field(default_factory=dict)

    @property
    def chain_length(self) -> int:
        return len(self.chain)

    def to_json_dict(self) -> dict:
        data = {
            "kind": self.kind,
            "chain": [g.to_text() for g in self.chain],
            "result": self.result.to_text(),
            "chain_length": self.chain_length,
        }
        data.update({k: (v.to_text() if hasattr(v, "to_text") else str(v)) for k, v in self.extras.items()})
        return data


def _nested_commutator(chain):
    acc = chain[-1]
    for g in reversed(chain[:-1]):
        acc = commutator(g, acc)
    return acc


def _embed_entries(A, n, block_entries):
    """n x n unipotent matrix carrying a 2x2 block in the top-left corner."""
    one, zero = A.one(), A.zero()
    rows = [[one if i == j else zero for j in range(n)] for i in range(n)]
    for (i, j), e in block_entries.items():
        rows[i][j] = e if i != j else one + e
    return AlgebraMatrix(A, rows)


def gl2_class_witness(A: TruncatedAlgebra, size: int = 2, tag: GroupTag | None = None) -> ClassWitness:
    """Chain z = (1, m; 0, 1), y_i = (1 + m_i, 0; 0, 1) whose iterated
    commutator is (1, m*m_1*...*m_{n-2}; 0, 1) with the top monomial in the
    corner; chain length n - 1 certifies class >= n - 1."""
    n = A.nilpotency_index()
    if n < 2:
        raise NoWitness("trivial radical: no commutator witness")
    if tag is None:
        tag = GroupTag.gl(size)
    multiset = top_monomial_multiset(A)
    m = A.gen(multiset[0])
    ys_gens = [A.gen(i) for i in multiset[1:]]
    z = UnipotentElement(tag, _embed_entries(A, size, {(0, 1): m}), validate=False)
    ys = [
        UnipotentElement(tag, _embed_entries(A, size, {(0, 0): mi}), validate=False)
        for mi in ys_gens
    ]
    chain = tuple(ys + [z])
    result = _nested_commutator(chain) if len(chain) > 1 else z
    if result.is_identity():
        raise InternalError("witness commutator collapsed; contradicts minimality of n")
    return ClassWitness("gl2-chain", chain, result)


def sl2_odd_class_witness(A: TruncatedAlgebra) -> ClassWitness:
    """SL2 chain for odd p: torus conjugation multiplies the root entry by
    m_i * (2 + m_i), a unit multiple of m_i, so the top monomial survives."""
    if A.p == 2:
        raise UsageError("use the characteristic-2 witness for p = 2")
    n = A.nilpotency_index()
    if n < 2:
        raise NoWitness("trivial radical: no commutator witness")
    tag = GroupTag.sl2()
    multiset = top_monomial_multiset(A)
    m = A.gen(multiset[0])
    one = A.one()
    z = UnipotentElement(
        tag, AlgebraMatrix(A, [[one, m], [A.zero(), one]]), validate=False
    )
    ys = []
    for i in multiset[1:]:
        t = one + A.gen(i)
        ys.append(
            UnipotentElement(
                tag, AlgebraMatrix(A, [[t, A.zero()], [A.zero(), t.inverse()]]), validate=False
            )
        )
    chain = tuple(ys + [z])
    result = _nested_commutator(chain) if len(chain) > 1 else z
    if result.is_identity():
        raise InternalError("witness commutator collapsed; contradicts minimality of n")
    return ClassWitness("sl2-odd-chain", chain, result)


def sl2_class_witness(A: TruncatedAlgebra) -> ClassWitness:
    """Characteristic-2 SL2 witness.

    With n the squares-filtration invariant and monomials chosen by the
    maximizer, w = [y_1, [..., [y_{n-2}, z]]] = (1, m_1^2...m_{n-2}^2 m; 0, 1)
    and [z', w] has diagonal exactly (1 + pi, 1 + pi) for the nonzero product
    pi = m_1^2...m_{n-2}^2 m m'; chain length n certifies class >= n.
    """
    if A.p != 2:
        raise UsageError("this witness is specific to p = 2")
    n, gamma, delta = squares_maximizer(A)
    if n != A.unusual_class_invariant():
        raise InternalError("maximizer disagrees with the iterated ideal computation")
    if n < 2:
        raise NoWitness("abelian radical: class 1, no commutator witness")
    tag = GroupTag.sl2()
    one, zero = A.one(), A.zero()
    pair = [i for i, d in enumerate(delta) for _ in range(d)]
    m, m_prime = A.gen(pair[0]), A.gen(pair[1])
    ys = []
    for i, g in enumerate(gamma):
        for _ in range(g):
            t = one + A.gen(i)
            ys.append(
                UnipotentElement(
                    tag, AlgebraMatrix(A, [[t, zero], [zero, t.inverse()]]), validate=False
                )
            )
    z = UnipotentElement(tag, AlgebraMatrix(A, [[one, m], [zero, one]]), validate=False)
    z_prime = UnipotentElement(tag, AlgebraMatrix(A, [[one, zero], [m_prime, one]]), validate=False)
    w = _nested_commutator(tuple(ys + [z])) if ys else z
    final = commutator(z_prime, w)
    pi = w.matrix[0, 1] * m_prime
    if pi.is_zero() or final.is_identity():
        raise InternalError("witness product vanished; contradicts minimality of n")
    return ClassWitness(
        "sl2-squares-chain",
        tuple([z_prime] + ys + [z]),
        final,
        extras={"w": w.matrix, "pi": pi},
    )


def _abelian_witness(A: TruncatedAlgebra, tag: GroupTag) -> ClassWitness:
    """A nontrivial element: chain of length 1 certifies class >= 1."""
    if tag.family == "torus":
        entries = {(0, 0): A.gen(0)}
    else:
        entries = {(0, 1): A.gen(0)}
    g = UnipotentElement(tag, _embed_entries(A, tag.size, entries), validate=False)
    return ClassWitness("nontrivial-element", (g,), g)


@dataclass(frozen=True)
class FibreCertificate:
    fibre: FibreSpec
    commutative: bool
    unusual: bool
    ell: int
    upper: int
    lower: int
    proved: bool
    witness: ClassWitness
    source: str

    def to_json_dict(self) -> dict:
        return {
            "kind": str(self.fibre.kind),
            "ext": str(self.fibre.extension),
            "commutative": self.commutative,
            "unusual": self.unusual,
            "ell": self.ell,
            "upper": self.upper,
            "lower": self.lower,
            "proved": self.proved,
            "source": self.source,
            "witness": self.witness.to_json_dict(),
        }


def certify_class(fibre: FibreSpec, coeff: CoefficientField | None = None) -> FibreCertificate:
    """Two-sided class certificate for the pure Weil restriction of the fibre:
    ideal-theoretic upper bound plus an explicit commutator lower bound.  Does
    not need the injectivity flag (that hypothesis concerns only predictions
    for the modified groups of the standard construction)."""
    A = _algebra(fibre, coeff)
    kind = fibre.kind
    unusual = is_unusual(fibre)
    upper = class_upper_bound(fibre, coeff)
    if kind.is_commutative:
        witness = _abelian_witness(A, GroupTag.torus(max(kind.torus_rank, 1)))
        ell = 1
    elif unusual:
        ell = A.unusual_class_invariant()
        if ell == 1:
            witness = _abelian_witness(A, GroupTag.sl2())
        else:
            witness = sl2_class_witness(A)
    else:
        ell = A.nilpotency_index() - 1
        if kind.family == "sl2_torus":
            witness = sl2_odd_class_witness(A)
        elif kind.family == "pgl2":
            witness = gl2_class_witness(A, size=2, tag=GroupTag.pgl2())
        else:
            witness = gl2_class_witness(A, size=kind.n, tag=GroupTag.gl(kind.n))
    lower = witness.chain_length
    return FibreCertificate(
        fibre=fibre,
        commutative=kind.is_commutative,
        unusual=unusual,
        ell=ell,
        upper=upper,
        lower=lower,
        proved=(lower == upper == ell),
        witness=witness,
        source=upper_bound_source(fibre),
    )


# -- exponent bounds ------------------------------------------------------------------


def exponent_bound_from_nilpotency(A: TruncatedAlgebra) -> int:
    """Minimal s with p^s >= nilpotency index; then (I+M)^(p^s) = I + M^(p^s)
    and every entry of M^(p^s) is a homogeneous polynomial of vanishing degree."""
    n = A.nilpotency_index()
    s = 0
    while A.p**s < n:
        s += 1
    return s


def exponent_bound_from_rank(spec: ExtensionSpec, r: int) -> int:
    """Minimal s with p^s >= r^2 (p^e - 1), e the extension exponent.  The
    literal value; for r = 1 the attained torus exponent e is reported
    separately by callers."""
    if r < 1:
        raise UsageError("matrix size must be >= 1")
    target = r * r * (spec.p**spec.extension_exponent - 1)
    s = 0
    while spec.p**s < target:
        s += 1
    return s


def superdiagonal_order_witness(A: TruncatedAlgebra, n: int | None = None) -> AlgebraMatrix:
    """Strictly upper superdiagonal n x n matrix (n = nilpotency index) carrying
    the top-monomial multiset; its (1, n) power entry is nonzero, so I + x has
    p-power order exactly the minimal p^s >= n."""
    want = A.nilpotency_index()
    if n is None:
        n = want
    if n != want:
        raise UsageError(f"superdiagonal witness wants n = nilpotency index = {want}")
    gens = [A.gen(i) for i in top_monomial_multiset(A)]
    zero = A.zero()
    rows = [[zero] * n for _ in range(n)]
    for k, g in enumerate(gens):
        rows[k][k + 1] = g
    return AlgebraMatrix(A, rows)


def imprimitive_borel_witness(A: TruncatedAlgebra) -> UnipotentElement:
    """(1 + x_i, x_j; 0, 1) with e_i maximal and j != i; its p^e-th power is
    (1, x_j * x_i^(p^e - 1); 0, 1) != 1, so the p-power order is e + 1."""
    spec = A.spec
    if spec.is_primitive:
        raise NoWitness("primitive extension: the corner image is trivial, exponent is e")
    e = spec.extension_exponent
    i = spec.exponents.index(e)
    j = next(k for k in range(spec.r) if k != i)
    one, zero = A.one(), A.zero()
    mat = AlgebraMatrix(A, [[one + A.gen(i), A.gen(j)], [zero, one]])
    return UnipotentElement(GroupTag.borel2(), mat, validate=False)


def borel_exponent_conjecture(kind_name: str, spec: ExtensionSpec) -> dict:
    """CONJECTURAL Borel-radical exponent prediction from the open question:
    with h = 2 for GL2/SL2, r_q = r - 1 for modular presentations, s the max of
    ceil(log_p(h_L - 1)) over small-rank Levi factors (0 here), the predicted
    exponent is max(e + s, ceil(log_p(h - 1))).  Never asserted."""
    if kind_name not in ("GL2", "SL2"):
        raise UsageError(f"unsupported group kind {kind_name!r} for the conjecture data")
    h = 2
    r_q = spec.r - 1
    s = 0  # every Levi factor in rank <= r_q has Coxeter number <= 2, and ceil(log_p(1)) = 0
    tail = max(0, math.ceil(math.log(h - 1, spec.p))) if h > 1 else 0
    predicted = max(spec.extension_exponent + s, tail)
    return {
        "kind": kind_name,
        "coxeter_number": h,
        "r_q": r_q,
        "levi_s": s,
        "predicted_exponent": predicted,
        "conjectural": True,
    }


# -- aggregate prediction ----------------------------------------------------------------


@dataclass(frozen=True)
class InvariantReport:
    fibres: tuple[FibreCertificate, ...]
    n_value: int

    def to_json_dict(self) -> dict:
        fibre_dicts = [c.to_json_dict() for c in self.fibres]
        top = max(self.fibres, key=lambda c: c.ell)
        bounds = {}
        conjectural = {}
        for cert in self.fibres:
            A = TruncatedAlgebra(cert.fibre.extension)
            key = str(cert.fibre)
            entry = {
                "class_upper": cert.upper,
                "class_lower_witnessed": cert.lower,
                "exponent_nilpotency": exponent_bound_from_nilpotency(A),
            }
            rank = _matrix_rank_for_bounds(cert.fibre.kind)
            if rank is not None:
                entry["exponent_rank"] = exponent_bound_from_rank(cert.fibre.extension, rank)
            if cert.fibre.kind.family == "torus":
                entry["torus_exponent"] = cert.fibre.extension.extension_exponent
            bounds[key] = entry
            if cert.fibre.kind.family == "gl" and cert.fibre.kind.n == 2:
                conjectural[key] = borel_exponent_conjecture("GL2", cert.fibre.extension)
            elif cert.fibre.kind.family == "sl2_torus":
                conjectural[key] = borel_exponent_conjecture("SL2", cert.fibre.extension)
        return {
            "fibres": fibre_dicts,
            "N": self.n_value,
            "witness": top.witness.to_json_dict(),
            "bounds": bounds,
            "conjectural": conjectural,
        }


def _matrix_rank_for_bounds(kind: FibreKind) -> int | None:
    if kind.family == "gl":
        return kind.n
    if kind.family in ("sl2_torus", "pgl2"):
        return 2
    if kind.family == "torus":
        return 1
    return None


def predict_class(fibres, coeff: CoefficientField | None = None) -> InvariantReport:
    """N = max over fibres of the per-fibre class number.  Refuses when every
    fibre is commutative or when an unusual fibre lacks the hypothesis flag."""
    fibres = list(fibres)
    if not fibres:
        raise UsageError("predict wants at least one fibre")
    if all(f.kind.is_commutative for f in fibres):
        raise HypothesisNotSatisfied("non-commutative hypothesis: every fibre is commutative")
    certs = []
    for f in fibres:
        ell = fibre_class(f, coeff)  # raises for unusual fibres without the flag
        cert = certify_class(f, coeff)
        if cert.ell != ell:
            raise InternalError("certificate disagrees with the class calculator")
        certs.append(cert)
    return InvariantReport(tuple(certs), max(c.ell for c in certs))
