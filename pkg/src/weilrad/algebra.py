"""Exact arithmetic in truncated multivariate polynomial algebras.

A modular purely inseparable extension presentation (prime p, exponent vector
e_1..e_r, q_i = p^{e_i}) determines the local ring

    F[x_1..x_r] / (x_1^{q_1}, ..., x_r^{q_r})

over a finite coefficient field F.  Its maximal ideal m = (x_1..x_r) is
nilpotent; the numerical invariants computed here (nilpotency index of m,
products and powers of monomial ideals, the squares-ideal filtration in
characteristic 2) drive every class and exponent calculation downstream.

Elements are stored as coefficient vectors over the prime field, with the
coefficient-field structure folded into the basis (monomial, field-basis)
pairs so that multiplication is a single exact integer scatter.
"""

from __future__ import annotations

import itertools
import re

import numpy as np

from .errors import InternalError, MismatchedAlgebras, UnsupportedCharacteristic, UsageError
from .field import CoefficientField, is_prime

_EXT_RE = re.compile(r"^p=(\d+);e=([\d,]+)$")


class ExtensionSpec:
    """Presentation of a modular purely inseparable extension: prime p and
    exponents e_1..e_r, so the i-th generator has p^{e_i}-th power in the base."""

    __slots__ = ("p", "exponents")

    def __init__(self, p: int, exponents):
        exponents = tuple(int(e) for e in exponents)
        if not is_prime(p):
            raise UsageError(f"p={p} is not prime")
        if not exponents or any(e < 1 for e in exponents):
            raise UsageError("exponent vector must be nonempty with entries >= 1")
        self.p = p
        self.exponents = exponents

    @property
    def r(self) -> int:
        return len(self.exponents)

    @property
    def qs(self) -> tuple[int, ...]:
        return tuple(self.p**e for e in self.exponents)

    @property
    def degree(self) -> int:
        deg = 1
        for q in self.qs:
            deg *= q
        return deg

    @property
    def extension_exponent(self) -> int:
        return max(self.exponents)

    @property
    def is_primitive(self) -> bool:
        return self.r == 1

    @classmethod
    def parse(cls, text: str) -> "ExtensionSpec":
        m = _EXT_RE.match(text.strip())
        if not m:
            raise UsageError(f"bad extension spec {text!r}; expected p=<prime>;e=<e1,e2,...>")
        return cls(int(m.group(1)), [int(t) for t in m.group(2).split(",")])

    def __str__(self):
        return f"p={self.p};e={','.join(str(e) for e in self.exponents)}"

    def __repr__(self):
        return f"ExtensionSpec({self.p}, {self.exponents})"

    def __eq__(self, other):
        return (
            isinstance(other, ExtensionSpec)
            and (self.p, self.exponents) == (other.p, other.exponents)
        )

    def __hash__(self):
        return hash((self.p, self.exponents))


class TruncatedAlgebra:
    """F[x_1..x_r]/(x_i^{q_i}) over a finite coefficient field F."""

    def __init__(self, spec: ExtensionSpec, coeff: CoefficientField | None = None):
        if coeff is None:
            coeff = CoefficientField(spec.p)
        if coeff.p != spec.p:
            raise UsageError(
                f"coefficient field characteristic {coeff.p} differs from spec p={spec.p}"
            )
        self.spec = spec
        self.coeff = coeff
        self.p = spec.p
        self.qs = spec.qs
        self.r = spec.r
        self.monomials = tuple(itertools.product(*[range(q) for q in self.qs]))
        self.dim = len(self.monomials)
        self.mono_index = {m: i for i, m in enumerate(self.monomials)}
        self.D = self.dim * coeff.d
        self.mono_degree = np.array([sum(m) for m in self.monomials], dtype=np.int64)
        # degree of every folded coordinate (monomial block of d field coords)
        self.coord_degree = np.repeat(self.mono_degree, coeff.d)
        self._nilpotency_index = None
        self._pairs = None

    # -- structure ------------------------------------------------------------

    def _pair_table(self):
        """Flat (I, J, K, C) arrays: coord_I * coord_J contributes C at coord_K."""
        if self._pairs is None:
            d = self.coeff.d
            I, J, K, C = [], [], [], []
            for i, a in enumerate(self.monomials):
                for j, b in enumerate(self.monomials):
                    s = tuple(x + y for x, y in zip(a, b))
                    if any(x >= q for x, q in zip(s, self.qs)):
                        continue
                    k = self.mono_index[s]
                    for t in range(d):
                        for u in range(d):
                            for v, c in enumerate(self.coeff.basis_mul(t, u)):
                                if c:
                                    I.append(i * d + t)
                                    J.append(j * d + u)
                                    K.append(k * d + v)
                                    C.append(c)
            self._pairs = tuple(np.array(a, dtype=np.int64) for a in (I, J, K, C))
        return self._pairs

    def nilpotency_index(self) -> int:
        """Minimal n >= 1 with m^n = 0; closed form 1 + sum(q_i - 1), cross-checked
        against iterated ideal powers."""
        if self._nilpotency_index is None:
            n = 1 + sum(q - 1 for q in self.qs)
            power = self.maximal_ideal()
            count = 1
            while not power.is_zero():
                power = power.product(self.maximal_ideal())
                count += 1
                if count > n + 1:
                    break
            if count != n:
                raise InternalError(f"nilpotency index mismatch: closed form {n}, iterated {count}")
            self._nilpotency_index = n
        return self._nilpotency_index

    def maximal_ideal(self) -> "MonomialIdeal":
        gens = []
        for i in range(self.r):
            mono = [0] * self.r
            mono[i] = 1
            gens.append(tuple(mono))
        return MonomialIdeal(self, gens)

    def squares_ideal(self) -> "MonomialIdeal":
        """The ideal generated by squares of maximal-ideal elements; only defined
        for p = 2, where squaring is additive and the generators are the x_i^2."""
        if self.p != 2:
            raise UnsupportedCharacteristic("squares ideal is only defined for p = 2")
        gens = []
        for i in range(self.r):
            mono = [0] * self.r
            mono[i] = 2
            gens.append(tuple(mono))
        return MonomialIdeal(self, gens)

    def ideal_power(self, k: int) -> "MonomialIdeal":
        if k < 0:
            raise UsageError("ideal power wants k >= 0")
        if k == 0:
            return MonomialIdeal(self, [tuple([0] * self.r)])
        return self.maximal_ideal().power(k)

    def unusual_class_invariant(self) -> int:
        """Minimal n >= 1 such that (squares ideal)^{n-1} * m^2 = 0 (p = 2)."""
        sq = self.squares_ideal()
        current = self.maximal_ideal().power(2)
        n = 1
        cap = self.nilpotency_index() + 1
        while not current.is_zero():
            current = sq.product(current)
            n += 1
            if n > cap:
                raise InternalError("squares filtration failed to terminate")
        return n

    def sl2_filtration_ideals(self, r: int) -> tuple["MonomialIdeal", "MonomialIdeal"]:
        """The pair (I_r, J_r) of the characteristic-2 filtration: I_0 = J_0 = m,
        I_r = (sq)^r * m and J_r = (sq)^{r-1} * m^2 for r >= 1."""
        if self.p != 2:
            raise UnsupportedCharacteristic("the squares filtration is only defined for p = 2")
        if r < 0:
            raise UsageError("filtration index wants r >= 0")
        m = self.maximal_ideal()
        if r == 0:
            return m, m
        sq_r = self.squares_ideal().power(r)
        sq_r1 = self.squares_ideal().power(r - 1)
        return sq_r.product(m), sq_r1.product(m.power(2))

    # -- element constructors ---------------------------------------------------

    def _coord(self, mono: tuple[int, ...], t: int = 0) -> int:
        return self.mono_index[mono] * self.coeff.d + t

    def element(self, vec: np.ndarray) -> "AlgebraElement":
        return AlgebraElement(self, vec)

    def zero(self) -> "AlgebraElement":
        return self.element(np.zeros(self.D, dtype=np.int64))

    def one(self) -> "AlgebraElement":
        vec = np.zeros(self.D, dtype=np.int64)
        vec[0] = 1
        return self.element(vec)

    def gen(self, i: int) -> "AlgebraElement":
        """The i-th nilpotent generator x_{i+1}."""
        if not 0 <= i < self.r:
            raise UsageError(f"generator index {i} out of range")
        mono = [0] * self.r
        mono[i] = 1
        return self.monomial_element(tuple(mono))

    def gens(self) -> list["AlgebraElement"]:
        return [self.gen(i) for i in range(self.r)]

    def monomial_element(self, mono: tuple[int, ...], coeff: int = 1) -> "AlgebraElement":
        if mono not in self.mono_index:
            raise UsageError(f"monomial {mono} not in the basis")
        vec = np.zeros(self.D, dtype=np.int64)
        for t, c in enumerate(self.coeff.digits(coeff % self.coeff.order)):
            vec[self._coord(mono, t)] = c
        return self.element(vec)

    def from_coeff_dict(self, coeffs: dict) -> "AlgebraElement":
        vec = np.zeros(self.D, dtype=np.int64)
        for mono, c in coeffs.items():
            mono = tuple(mono)
            if mono not in self.mono_index:
                raise UsageError(f"monomial {mono} not in the basis")
            for t, digit in enumerate(self.coeff.digits(c % self.coeff.order)):
                vec[self._coord(mono, t)] = digit
        return self.element(vec)

    def random_element(self, rng, min_degree: int = 0, constant: int | None = None):
        vec = np.zeros(self.D, dtype=np.int64)
        for i, deg in enumerate(self.mono_degree):
            if deg < min_degree and not (deg == 0 and constant is not None):
                continue
            for t in range(self.coeff.d):
                vec[i * self.coeff.d + t] = rng.randrange(self.p)
        if constant is not None:
            for t, digit in enumerate(self.coeff.digits(constant % self.coeff.order)):
                vec[t] = digit
        return self.element(vec)

    def random_in_ideal(self, ideal: "MonomialIdeal", rng) -> "AlgebraElement":
        """sum over ideal generators of (generator * random element)."""
        total = self.zero()
        for mono in sorted(ideal.gens):
            total = total + self.monomial_element(mono) * self.random_element(rng)
        return total

    # -- text --------------------------------------------------------------------

    def _print_order(self):
        return sorted(range(self.dim), key=lambda i: (int(self.mono_degree[i]),
                                                      tuple(-a for a in self.monomials[i])))

    def monomial_str(self, mono: tuple[int, ...]) -> str:
        parts = []
        for i, a in enumerate(mono):
            if a == 0:
                continue
            parts.append(f"x{i + 1}" if a == 1 else f"x{i + 1}^{a}")
        return "*".join(parts) if parts else "1"

    def parse_element(self, text: str) -> "AlgebraElement":
        text = text.strip()
        if text == "0":
            return self.zero()
        vec = np.zeros(self.D, dtype=np.int64)
        for term in _split_plus(text):
            coeff = self.coeff.one
            mono = [0] * self.r
            for factor in _split_star(term):
                factor = factor.strip()
                if factor.startswith("x"):
                    m = re.match(r"^x(\d+)(?:\^(\d+))?$", factor)
                    if not m:
                        raise UsageError(f"bad monomial factor {factor!r}")
                    idx = int(m.group(1)) - 1
                    exp = int(m.group(2) or 1)
                    if not 0 <= idx < self.r:
                        raise UsageError(f"generator x{idx + 1} out of range")
                    mono[idx] += exp
                else:
                    coeff = self.coeff.mul(coeff, self.coeff.parse_elem(factor))
            mono = tuple(mono)
            if any(a >= q for a, q in zip(mono, self.qs)):
                continue
            for t, digit in enumerate(self.coeff.digits(coeff)):
                c = self._coord(mono, t)
                vec[c] = (vec[c] + digit) % self.p
        return self.element(vec)

    # -- identity ------------------------------------------------------------------

    def __eq__(self, other):
        return (
            isinstance(other, TruncatedAlgebra)
            and self.spec == other.spec
            and self.coeff == other.coeff
        )

    def __hash__(self):
        return hash((self.spec, self.coeff))

    def __repr__(self):
        return f"TruncatedAlgebra({self.spec!r}, {self.coeff.name})"


def _split_plus(text: str) -> list[str]:
    """Split on '+' at paren depth 0."""
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "+" and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    parts.append("".join(cur))
    return [p.strip() for p in parts if p.strip()]


def _split_star(text: str) -> list[str]:
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "*" and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    parts.append("".join(cur))
    return [p for p in parts if p.strip()]


class AlgebraElement:
    """Immutable element of a TruncatedAlgebra."""

    __slots__ = ("algebra", "vec", "_key")

    def __init__(self, algebra: TruncatedAlgebra, vec: np.ndarray):
        vec = np.asarray(vec, dtype=np.int64) % algebra.p
        vec.flags.writeable = False
        object.__setattr__(self, "algebra", algebra)
        object.__setattr__(self, "vec", vec)
        object.__setattr__(self, "_key", vec.tobytes())

    def __setattr__(self, name, value):
        raise AttributeError("AlgebraElement is immutable")

    def _check(self, other):
        if not isinstance(other, AlgebraElement):
            raise UsageError(f"cannot combine AlgebraElement with {type(other).__name__}")
        if self.algebra != other.algebra:
            raise MismatchedAlgebras("elements live in different algebras")

    def __add__(self, other):
        self._check(other)
        return AlgebraElement(self.algebra, self.vec + other.vec)

    def __sub__(self, other):
        self._check(other)
        return AlgebraElement(self.algebra, self.vec - other.vec)

    def __neg__(self):
        return AlgebraElement(self.algebra, -self.vec)

    def __mul__(self, other):
        self._check(other)
        A = self.algebra
        I, J, K, C = A._pair_table()
        out = np.zeros(A.D, dtype=np.int64)
        np.add.at(out, K, self.vec[I] * other.vec[J] * C)
        return AlgebraElement(A, out)

    def scalar_mul(self, c: int) -> "AlgebraElement":
        """Multiply by a coefficient-field element (encoded as an integer)."""
        F = self.algebra.coeff
        d = F.d
        if d == 1:
            return AlgebraElement(self.algebra, self.vec * (c % F.p))
        L = np.zeros((d, d), dtype=np.int64)
        for u, cu in enumerate(F.digits(c % F.order)):
            if cu:
                for t in range(d):
                    for v, s in enumerate(F.basis_mul(t, u)):
                        L[v, t] = (L[v, t] + cu * s) % F.p
        blocks = self.vec.reshape(self.algebra.dim, d)
        return AlgebraElement(self.algebra, (blocks @ L.T).reshape(-1))

    def __pow__(self, k: int):
        if k < 0:
            return self.inverse() ** (-k)
        out = self.algebra.one()
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def inverse(self) -> "AlgebraElement":
        """Exact inverse of a unit via the truncated geometric series: since the
        maximal-ideal part is nilpotent, the series has nilpotency_index terms."""
        c0 = self.constant_term()
        if c0 == 0:
            raise UsageError("element is not a unit (zero constant term)")
        F = self.algebra.coeff
        u = self.scalar_mul(F.inv(c0))
        m = u - self.algebra.one()
        acc = self.algebra.one()
        for _ in range(self.algebra.nilpotency_index() - 1):
            acc = self.algebra.one() - m * acc
        return acc.scalar_mul(F.inv(c0))

    # -- predicates ------------------------------------------------------------

    def is_zero(self) -> bool:
        return not self.vec.any()

    def constant_term(self) -> int:
        F = self.algebra.coeff
        return F.from_digits(self.vec[: F.d])

    def is_unit(self) -> bool:
        return self.constant_term() != 0

    def in_maximal_ideal(self) -> bool:
        return self.constant_term() == 0

    def is_nilpotent(self) -> bool:
        return self.in_maximal_ideal()

    def in_ideal(self, ideal: "MonomialIdeal") -> bool:
        """Monomial-ideal membership: every monomial of the support must be
        divisible by some generator."""
        if ideal.algebra != self.algebra:
            raise MismatchedAlgebras("ideal lives in a different algebra")
        for mono in self.support():
            if not ideal.contains_monomial(mono):
                return False
        return True

    def support(self) -> list[tuple[int, ...]]:
        d = self.algebra.coeff.d
        blocks = self.vec.reshape(self.algebra.dim, d)
        return [self.algebra.monomials[i] for i in np.nonzero(blocks.any(axis=1))[0]]

    def coefficient(self, mono) -> int:
        A = self.algebra
        i = A.mono_index[tuple(mono)]
        return A.coeff.from_digits(self.vec[i * A.coeff.d : (i + 1) * A.coeff.d])

    def coefficients(self) -> dict:
        return {m: self.coefficient(m) for m in self.support()}

    def reduce_mod_degree(self, i: int) -> "AlgebraElement":
        """Drop all monomials of total degree >= i (reduction modulo m^i)."""
        vec = np.where(self.algebra.coord_degree >= i, 0, self.vec)
        return AlgebraElement(self.algebra, vec)

    # -- text --------------------------------------------------------------------

    def __str__(self):
        A = self.algebra
        F = A.coeff
        terms = []
        for i in A._print_order():
            c = F.from_digits(self.vec[i * F.d : (i + 1) * F.d])
            if c == 0:
                continue
            mono = A.monomials[i]
            mstr = A.monomial_str(mono)
            cstr = F.elem_str(c)
            if "+" in cstr:
                cstr = f"({cstr})"
            if mstr == "1":
                terms.append(cstr)
            elif c == F.one:
                terms.append(mstr)
            else:
                terms.append(f"{cstr}*{mstr}")
        return " + ".join(terms) if terms else "0"

    def __repr__(self):
        return f"<{self} in {self.algebra.spec}/{self.algebra.coeff.name}>"

    def __eq__(self, other):
        return (
            isinstance(other, AlgebraElement)
            and self.algebra == other.algebra
            and self._key == other._key
        )

    def __hash__(self):
        return hash(self._key)


class MonomialIdeal:
    """A monomial ideal given by a reduced generating set of basis monomials.
    The empty generating set is the zero ideal."""

    __slots__ = ("algebra", "gens")

    def __init__(self, algebra: TruncatedAlgebra, monomials):
        reduced = _reduce_monomials(algebra, monomials)
        object.__setattr__(self, "algebra", algebra)
        object.__setattr__(self, "gens", reduced)

    def __setattr__(self, name, value):
        raise AttributeError("MonomialIdeal is immutable")

    @classmethod
    def zero(cls, algebra: TruncatedAlgebra) -> "MonomialIdeal":
        return cls(algebra, [])

    def is_zero(self) -> bool:
        return not self.gens

    def product(self, other: "MonomialIdeal") -> "MonomialIdeal":
        if self.algebra != other.algebra:
            raise MismatchedAlgebras("ideals live in different algebras")
        sums = []
        for a in self.gens:
            for b in other.gens:
                sums.append(tuple(x + y for x, y in zip(a, b)))
        return MonomialIdeal(self.algebra, sums)

    def power(self, k: int) -> "MonomialIdeal":
        if k < 0:
            raise UsageError("ideal power wants k >= 0")
        out = MonomialIdeal(self.algebra, [tuple([0] * self.algebra.r)])
        for _ in range(k):
            out = out.product(self)
        return out

    def contains_monomial(self, mono) -> bool:
        mono = tuple(mono)
        return any(all(g <= m for g, m in zip(gen, mono)) for gen in self.gens)

    def contains_element(self, elem: AlgebraElement) -> bool:
        return elem.in_ideal(self)

    def is_subideal_of(self, other: "MonomialIdeal") -> bool:
        if self.algebra != other.algebra:
            raise MismatchedAlgebras("ideals live in different algebras")
        return all(other.contains_monomial(g) for g in self.gens)

    def monomials(self) -> list[tuple[int, ...]]:
        """All basis monomials in the ideal."""
        return [m for m in self.algebra.monomials if self.contains_monomial(m)]

    def __eq__(self, other):
        return (
            isinstance(other, MonomialIdeal)
            and self.algebra == other.algebra
            and self.gens == other.gens
        )

    def __hash__(self):
        return hash((self.algebra, self.gens))

    def __repr__(self):
        if self.is_zero():
            return "MonomialIdeal(0)"
        inner = ", ".join(self.algebra.monomial_str(g) for g in sorted(self.gens))
        return f"MonomialIdeal({inner})"


def _reduce_monomials(algebra: TruncatedAlgebra, monomials) -> frozenset:
    # drop monomials that are zero after truncation, then divisibility-reduce
    alive = []
    for mono in monomials:
        mono = tuple(int(a) for a in mono)
        if len(mono) != algebra.r or any(a < 0 for a in mono):
            raise UsageError(f"bad monomial {mono}")
        if any(a >= q for a, q in zip(mono, algebra.qs)):
            continue
        alive.append(mono)
    reduced = []
    for mono in sorted(set(alive), key=lambda m: (sum(m), m)):
        if not any(all(g <= a for g, a in zip(prev, mono)) for prev in reduced):
            reduced.append(mono)
    return frozenset(reduced)


# -- operation-style aliases ------------------------------------------------------


def add(a: AlgebraElement, b: AlgebraElement) -> AlgebraElement:
    return a + b


def mul(a: AlgebraElement, b: AlgebraElement) -> AlgebraElement:
    return a * b


def pow_(a: AlgebraElement, k: int) -> AlgebraElement:
    return a**k


def nilpotency_index(algebra: TruncatedAlgebra) -> int:
    return algebra.nilpotency_index()


def squares_ideal(algebra: TruncatedAlgebra) -> MonomialIdeal:
    return algebra.squares_ideal()


def ideal_product(a: MonomialIdeal, b: MonomialIdeal) -> MonomialIdeal:
    return a.product(b)


def unusual_class_invariant(algebra: TruncatedAlgebra) -> int:
    return algebra.unusual_class_invariant()


def sl2_filtration_ideals(algebra: TruncatedAlgebra, r: int):
    return algebra.sl2_filtration_ideals(r)
