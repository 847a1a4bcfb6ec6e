"""Matrix groups over a truncated algebra.

The groups of interest are the kernels of reduction modulo the maximal ideal:
for GL(n) these are all matrices I + M with entries of M in m; SL2 adds the
exact determinant-1 constraint, PGL2 works with canonical representatives
modulo unit scalars, Torus(rank) is the diagonal case, and Borel2 is the
2x2 upper-triangular model (diagonal in 1 + m, corner in m).
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass

from .algebra import AlgebraElement, TruncatedAlgebra
from .errors import (
    BudgetExceeded,
    InternalError,
    MismatchedAlgebras,
    UnsupportedCharacteristic,
    UsageError,
)

_TAG_RE = re.compile(r"^(GL(\d+)|SL2|PGL2|T(\d+)|Borel2)$")


@dataclass(frozen=True)
class GroupTag:
    """Which matrix group the unipotent kernel belongs to."""

    family: str  # gl | sl2 | pgl2 | torus | borel2
    size: int  # matrix size (= rank for torus)

    @classmethod
    def gl(cls, n: int) -> "GroupTag":
        if n < 2:
            raise UsageError("GL(n) wants n >= 2")
        return cls("gl", n)

    @classmethod
    def sl2(cls) -> "GroupTag":
        return cls("sl2", 2)

    @classmethod
    def pgl2(cls) -> "GroupTag":
        return cls("pgl2", 2)

    @classmethod
    def torus(cls, rank: int) -> "GroupTag":
        if rank < 1:
            raise UsageError("torus rank must be >= 1")
        return cls("torus", rank)

    @classmethod
    def borel2(cls) -> "GroupTag":
        return cls("borel2", 2)

    @classmethod
    def parse(cls, text: str) -> "GroupTag":
        m = _TAG_RE.match(text.strip())
        if not m:
            raise UsageError(f"bad group tag {text!r}; expected GL<n>, SL2, PGL2, T<rank> or Borel2")
        if m.group(2):
            return cls.gl(int(m.group(2)))
        if m.group(3):
            return cls.torus(int(m.group(3)))
        return {"SL2": cls.sl2, "PGL2": cls.pgl2, "Borel2": cls.borel2}[m.group(1)]()

    def __str__(self):
        if self.family == "gl":
            return f"GL{self.size}"
        if self.family == "torus":
            return f"T{self.size}"
        return {"sl2": "SL2", "pgl2": "PGL2", "borel2": "Borel2"}[self.family]


class AlgebraMatrix:
    """Square matrix with entries in one truncated algebra."""

    __slots__ = ("algebra", "n", "rows")

    def __init__(self, algebra: TruncatedAlgebra, rows):
        rows = tuple(tuple(r) for r in rows)
        n = len(rows)
        if any(len(r) != n for r in rows):
            raise UsageError("matrix must be square")
        for row in rows:
            for e in row:
                if not isinstance(e, AlgebraElement) or e.algebra != algebra:
                    raise MismatchedAlgebras("all entries must share one algebra")
        object.__setattr__(self, "algebra", algebra)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "rows", rows)

    def __setattr__(self, name, value):
        raise AttributeError("AlgebraMatrix is immutable")

    @classmethod
    def identity(cls, algebra: TruncatedAlgebra, n: int) -> "AlgebraMatrix":
        one, zero = algebra.one(), algebra.zero()
        return cls(algebra, [[one if i == j else zero for j in range(n)] for i in range(n)])

    def __getitem__(self, ij):
        i, j = ij
        return self.rows[i][j]

    def __mul__(self, other: "AlgebraMatrix") -> "AlgebraMatrix":
        if not isinstance(other, AlgebraMatrix):
            raise UsageError("can only multiply by another AlgebraMatrix")
        if self.algebra != other.algebra or self.n != other.n:
            raise MismatchedAlgebras("matrix shapes/algebras differ")
        n = self.n
        rows = []
        for i in range(n):
            row = []
            for j in range(n):
                acc = self.rows[i][0] * other.rows[0][j]
                for k in range(1, n):
                    acc = acc + self.rows[i][k] * other.rows[k][j]
                row.append(acc)
            rows.append(row)
        return AlgebraMatrix(self.algebra, rows)

    def scalar_mul(self, c: AlgebraElement) -> "AlgebraMatrix":
        return AlgebraMatrix(self.algebra, [[c * e for e in row] for row in self.rows])

    def transpose(self) -> "AlgebraMatrix":
        return AlgebraMatrix(self.algebra, list(zip(*self.rows)))

    def det(self) -> AlgebraElement:
        """Exact determinant by signed permutation expansion."""
        A = self.algebra
        total = A.zero()
        for perm in itertools.permutations(range(self.n)):
            prod = A.one()
            for i, j in enumerate(perm):
                prod = prod * self.rows[i][j]
            if _perm_sign(perm) < 0:
                prod = -prod
            total = total + prod
        return total

    def inverse(self) -> "AlgebraMatrix":
        """Adjugate route for n <= 3, unit-pivot elimination otherwise."""
        if self.n <= 3:
            d = self.det()
            if not d.is_unit():
                raise UsageError("matrix is not invertible (determinant not a unit)")
            dinv = d.inverse()
            n = self.n
            cof = []
            for i in range(n):
                row = []
                for j in range(n):
                    minor = [
                        [self.rows[a][b] for b in range(n) if b != j]
                        for a in range(n)
                        if a != i
                    ]
                    m = AlgebraMatrix(self.algebra, minor) if n > 1 else None
                    mdet = m.det() if m is not None else self.algebra.one()
                    if (i + j) % 2:
                        mdet = -mdet
                    row.append(mdet * dinv)
                cof.append(row)
            return AlgebraMatrix(self.algebra, cof).transpose()
        return self._inverse_elimination()

    def _inverse_elimination(self) -> "AlgebraMatrix":
        A = self.algebra
        n = self.n
        work = [list(row) for row in self.rows]
        inv = [list(r) for r in AlgebraMatrix.identity(A, n).rows]
        for col in range(n):
            pivot = next((r for r in range(col, n) if work[r][col].is_unit()), None)
            if pivot is None:
                raise UsageError("matrix is not invertible (no unit pivot)")
            work[col], work[pivot] = work[pivot], work[col]
            inv[col], inv[pivot] = inv[pivot], inv[col]
            pinv = work[col][col].inverse()
            work[col] = [pinv * e for e in work[col]]
            inv[col] = [pinv * e for e in inv[col]]
            for r in range(n):
                if r == col or work[r][col].is_zero():
                    continue
                f = work[r][col]
                work[r] = [a - f * b for a, b in zip(work[r], work[col])]
                inv[r] = [a - f * b for a, b in zip(inv[r], inv[col])]
        return AlgebraMatrix(A, inv)

    def reduce_mod_degree(self, i: int) -> "AlgebraMatrix":
        return AlgebraMatrix(
            self.algebra, [[e.reduce_mod_degree(i) for e in row] for row in self.rows]
        )

    def is_identity(self) -> bool:
        one, zero = self.algebra.one(), self.algebra.zero()
        return all(
            self.rows[i][j] == (one if i == j else zero)
            for i in range(self.n)
            for j in range(self.n)
        )

    def to_text(self) -> str:
        return ";".join(",".join(str(e) for e in row) for row in self.rows)

    @classmethod
    def from_text(cls, algebra: TruncatedAlgebra, text: str) -> "AlgebraMatrix":
        rows = [
            [algebra.parse_element(tok) for tok in row.split(",")]
            for row in text.strip().split(";")
        ]
        return cls(algebra, rows)

    def to_json_dict(self) -> dict:
        return {"n": self.n, "entries": [[str(e) for e in row] for row in self.rows]}

    @classmethod
    def from_json_dict(cls, algebra: TruncatedAlgebra, data: dict) -> "AlgebraMatrix":
        rows = [[algebra.parse_element(tok) for tok in row] for row in data["entries"]]
        mat = cls(algebra, rows)
        if mat.n != data.get("n", mat.n):
            raise UsageError("matrix size mismatch in JSON")
        return mat

    def __eq__(self, other):
        return (
            isinstance(other, AlgebraMatrix)
            and self.algebra == other.algebra
            and self.rows == other.rows
        )

    def __hash__(self):
        return hash((self.n, self.rows))

    def __repr__(self):
        return f"AlgebraMatrix({self.to_text()})"


def _perm_sign(perm) -> int:
    sign = 1
    seen = [False] * len(perm)
    for i in range(len(perm)):
        if seen[i]:
            continue
        length = 0
        j = i
        while not seen[j]:
            seen[j] = True
            j = perm[j]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


class UnipotentElement:
    """A point of the reduction-kernel group for the given tag.

    PGL2 elements are stored by their canonical representative: the unique
    scalar multiple whose first unit entry (always the (0,0) entry here)
    equals 1 exactly.
    """

    __slots__ = ("tag", "matrix")

    def __init__(self, tag: GroupTag, matrix: AlgebraMatrix, validate: bool = True):
        if tag.family == "pgl2":
            matrix = _canonicalize_pgl2(matrix)
        object.__setattr__(self, "tag", tag)
        object.__setattr__(self, "matrix", matrix)
        if validate:
            self._validate()

    def __setattr__(self, name, value):
        raise AttributeError("UnipotentElement is immutable")

    @property
    def algebra(self) -> TruncatedAlgebra:
        return self.matrix.algebra

    def _validate(self):
        tag, mat = self.tag, self.matrix
        if mat.n != tag.size:
            raise UsageError(f"matrix size {mat.n} does not match tag {tag}")
        if not mat.reduce_mod_degree(1).is_identity():
            raise UsageError("reduction modulo the maximal ideal must be the identity")
        if tag.family == "sl2" and mat.det() != mat.algebra.one():
            raise UsageError("SL2 elements must have determinant exactly 1")
        if tag.family == "torus":
            zero = mat.algebra.zero()
            if any(mat[i, j] != zero for i in range(mat.n) for j in range(mat.n) if i != j):
                raise UsageError("torus elements are diagonal")
        if tag.family == "borel2" and not mat[1, 0].is_zero():
            raise UsageError("Borel elements are upper triangular")

    @classmethod
    def identity(cls, tag: GroupTag, algebra: TruncatedAlgebra) -> "UnipotentElement":
        return cls(tag, AlgebraMatrix.identity(algebra, tag.size), validate=False)

    def __mul__(self, other: "UnipotentElement") -> "UnipotentElement":
        if self.tag != other.tag:
            raise UsageError("group tags differ")
        return UnipotentElement(self.tag, self.matrix * other.matrix, validate=False)

    def inverse(self) -> "UnipotentElement":
        return UnipotentElement(self.tag, self.matrix.inverse(), validate=False)

    def __invert__(self):
        return self.inverse()

    def conjugate(self, by: "UnipotentElement") -> "UnipotentElement":
        return by * self * by.inverse()

    def is_identity(self) -> bool:
        return self.matrix.is_identity()

    def reduce_mod_power(self, i: int) -> AlgebraMatrix:
        """Entries reduced modulo m^i."""
        self._check_level(i)
        return self.matrix.reduce_mod_degree(i)

    def _check_level(self, i: int):
        if not 1 <= i <= self.algebra.nilpotency_index():
            raise UsageError(
                f"filtration level {i} out of range 1..{self.algebra.nilpotency_index()}"
            )

    def filtration_member(self, i: int) -> bool:
        """Whether the element lies in the i-th reduction kernel (trivial modulo
        m^i).  PGL2 canonical representatives make the identity test literal."""
        return self.reduce_mod_power(i).is_identity()

    def sl2_filtration_member(self, r: int) -> bool:
        """Membership in the characteristic-2 SL2 filtration: diagonal-minus-one
        entries in J_r, off-diagonal entries in I_r."""
        if self.tag.family != "sl2":
            raise UsageError("the squares filtration is only defined for SL2 elements")
        A = self.algebra
        if A.p != 2:
            raise UnsupportedCharacteristic("the squares filtration is only defined for p = 2")
        i_r, j_r = A.sl2_filtration_ideals(r)
        one = A.one()
        return (
            (self.matrix[0, 0] - one).in_ideal(j_r)
            and (self.matrix[1, 1] - one).in_ideal(j_r)
            and self.matrix[0, 1].in_ideal(i_r)
            and self.matrix[1, 0].in_ideal(i_r)
        )

    def p_power_order(self) -> int:
        """Minimal s >= 0 with g^(p^s) trivial; terminates because the
        entries-minus-identity are nilpotent."""
        p = self.algebra.p
        g = self
        s = 0
        cap = self.algebra.nilpotency_index().bit_length() + self.algebra.spec.extension_exponent + 4
        while not g.is_identity():
            h = g
            for _ in range(p - 1):
                h = h * g
            g = h
            s += 1
            if s > cap:
                raise InternalError("p-power order failed to terminate")
        return s

    def to_text(self) -> str:
        return self.matrix.to_text()

    def to_json_dict(self) -> dict:
        return self.matrix.to_json_dict()

    def __eq__(self, other):
        return (
            isinstance(other, UnipotentElement)
            and self.tag == other.tag
            and self.matrix == other.matrix
        )

    def __hash__(self):
        return hash((self.tag, self.matrix))

    def __repr__(self):
        return f"UnipotentElement({self.tag}, {self.matrix.to_text()})"


def _canonicalize_pgl2(matrix: AlgebraMatrix) -> AlgebraMatrix:
    """Scale by a unit so the first unit entry (row-major) becomes exactly 1."""
    for i in range(matrix.n):
        for j in range(matrix.n):
            if matrix[i, j].is_unit():
                return matrix.scalar_mul(matrix[i, j].inverse())
    raise UsageError("matrix has no unit entry; not a valid representative")


def multiply(g: UnipotentElement, h: UnipotentElement) -> UnipotentElement:
    return g * h


def invert(g: UnipotentElement) -> UnipotentElement:
    return g.inverse()


def commutator(g: UnipotentElement, h: UnipotentElement) -> UnipotentElement:
    """[g, h] = g h g^-1 h^-1."""
    return g * h * g.inverse() * h.inverse()


# -- enumeration -------------------------------------------------------------------


def free_entry_positions(tag: GroupTag) -> list[tuple[int, int]]:
    """Matrix positions whose maximal-ideal part is a free coordinate."""
    if tag.family == "gl":
        return [(i, j) for i in range(tag.size) for j in range(tag.size)]
    if tag.family == "sl2":
        return [(0, 0), (0, 1), (1, 0)]  # (1,1) is solved from det = 1
    if tag.family == "pgl2":
        return [(0, 1), (1, 0), (1, 1)]  # canonical representative has (0,0) = 1
    if tag.family == "borel2":
        return [(0, 0), (0, 1), (1, 1)]
    if tag.family == "torus":
        return [(i, i) for i in range(tag.size)]
    raise UsageError(f"unknown tag {tag}")


def maximal_ideal_coords(algebra: TruncatedAlgebra) -> list[int]:
    """Folded coordinates spanning the maximal ideal."""
    d = algebra.coeff.d
    return [m * d + t for m in range(1, algebra.dim) for t in range(d)]


def unipotent_count(tag: GroupTag, algebra: TruncatedAlgebra) -> int:
    free = len(free_entry_positions(tag))
    return algebra.p ** (len(maximal_ideal_coords(algebra)) * free)


def element_from_index(tag: GroupTag, algebra: TruncatedAlgebra, index: int) -> UnipotentElement:
    """Deterministic index -> group point bijection (shared with the batch engine)."""
    import numpy as np

    mcoords = maximal_ideal_coords(algebra)
    positions = free_entry_positions(tag)
    p = algebra.p
    entries = {}
    for pos in positions:
        vec = np.zeros(algebra.D, dtype=np.int64)
        for c in mcoords:
            vec[c] = index % p
            index //= p
        entries[pos] = algebra.element(vec)
    return _assemble(tag, algebra, entries)


def _assemble(tag: GroupTag, algebra: TruncatedAlgebra, entries: dict) -> UnipotentElement:
    one, zero = algebra.one(), algebra.zero()
    n = tag.size
    if tag.family == "gl":
        rows = [[(one if i == j else zero) + entries[(i, j)] for j in range(n)] for i in range(n)]
    elif tag.family == "sl2":
        m1, m2, m3 = entries[(0, 0)], entries[(0, 1)], entries[(1, 0)]
        a = one + m1
        d = (one + m2 * m3) * a.inverse()
        rows = [[a, m2], [m3, d]]
    elif tag.family == "pgl2":
        rows = [[one, entries[(0, 1)]], [entries[(1, 0)], one + entries[(1, 1)]]]
    elif tag.family == "borel2":
        rows = [[one + entries[(0, 0)], entries[(0, 1)]], [zero, one + entries[(1, 1)]]]
    elif tag.family == "torus":
        rows = [
            [(one + entries[(i, i)]) if i == j else zero for j in range(n)] for i in range(n)
        ]
    else:
        raise UsageError(f"unknown tag {tag}")
    return UnipotentElement(tag, AlgebraMatrix(algebra, rows), validate=False)


def enumerate_unipotents(
    tag: GroupTag,
    algebra: TruncatedAlgebra,
    budget: int | None = None,
    index_range: tuple[int, int] | None = None,
):
    """Exhaustive, duplicate-free stream of the group's points over the finite
    coefficient field, in index order; restartable and partitionable by index
    range.  Refuses (with the exact count) when the requested range exceeds
    the budget."""
    from .experiments import default_budget

    count = unipotent_count(tag, algebra)
    if index_range is None:
        start, stop = 0, count
    else:
        start, stop = index_range
        if not 0 <= start <= stop <= count:
            raise UsageError(f"index range {index_range} out of bounds for count {count}")
    limit = default_budget() if budget is None else budget
    if stop - start > limit:
        raise BudgetExceeded(count, limit)
    for idx in range(start, stop):
        yield element_from_index(tag, algebra, idx)


# -- random sampling ----------------------------------------------------------------


def random_unipotent(tag: GroupTag, algebra: TruncatedAlgebra, rng, level: int = 1):
    """Random group point congruent to the identity modulo m^level."""
    entries = {
        pos: algebra.random_element(rng, min_degree=level)
        for pos in free_entry_positions(tag)
    }
    return _assemble(tag, algebra, entries)


def random_sl2_filtration_element(algebra: TruncatedAlgebra, r: int, rng) -> UnipotentElement:
    """Random SL2 point in the r-th squares-filtration subgroup."""
    i_r, j_r = algebra.sl2_filtration_ideals(r)
    m1 = algebra.random_in_ideal(j_r, rng)
    m2 = algebra.random_in_ideal(i_r, rng)
    m3 = algebra.random_in_ideal(i_r, rng)
    g = _assemble(GroupTag.sl2(), algebra, {(0, 0): m1, (0, 1): m2, (1, 0): m3})
    if not g.sl2_filtration_member(r):
        raise InternalError("sampled element left the filtration subgroup")
    return g
