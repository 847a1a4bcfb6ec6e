"""Small finite fields F_{p^d} with exact table-backed arithmetic.

Elements are encoded as integers 0 <= a < p^d whose base-p digits are the
coordinates on the power basis 1, g, ..., g^{d-1}, where g is a root of the
deterministic defining polynomial.  These fields only ever appear at desk
scale (|F| <= a few hundred), so full multiplication tables are affordable.
"""

from __future__ import annotations

import itertools
from functools import lru_cache

from .errors import UsageError

_TABLE_CAP = 512


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    f = 2
    while f * f <= n:
        if n % f == 0:
            return False
        f += 1
    return True


def _poly_trim(c: tuple[int, ...]) -> tuple[int, ...]:
    i = len(c)
    while i > 0 and c[i - 1] == 0:
        i -= 1
    return c[:i]


def _poly_mul(a, b, p):
    out = [0] * (len(a) + len(b) - 1) if a and b else []
    for i, ai in enumerate(a):
        if ai:
            for j, bj in enumerate(b):
                out[i + j] = (out[i + j] + ai * bj) % p
    return _poly_trim(tuple(out))


def _poly_mod(a, m, p):
    # m is monic
    a = list(a)
    dm = len(m) - 1
    while len(a) > dm:
        lead = a[-1]
        if lead:
            shift = len(a) - 1 - dm
            for i in range(dm + 1):
                a[shift + i] = (a[shift + i] - lead * m[i]) % p
        a.pop()
    return _poly_trim(tuple(a))


@lru_cache(maxsize=None)
def _find_irreducible(p: int, d: int) -> tuple[int, ...]:
    """Smallest monic irreducible of degree d over F_p, by coefficient encoding."""
    divisors = []
    for k in range(1, d // 2 + 1):
        for coeffs in itertools.product(range(p), repeat=k):
            divisors.append(_poly_trim(coeffs + (1,)))
    for coeffs in itertools.product(range(p), repeat=d):
        cand = coeffs + (1,)
        if all(_poly_mod(cand, q, p) for q in divisors):
            return cand
    raise UsageError(f"no irreducible polynomial of degree {d} over F_{p}")


class CoefficientField:
    """The finite field F_{p^d}."""

    def __init__(self, p: int, d: int = 1, modulus: tuple[int, ...] | None = None):
        if not is_prime(p):
            raise UsageError(f"characteristic {p} is not prime")
        if d < 1:
            raise UsageError("field degree must be >= 1")
        self.p = p
        self.d = d
        self.order = p**d
        if d == 1:
            self.modulus = None
        else:
            self.modulus = tuple(modulus) if modulus is not None else _find_irreducible(p, d)
            if len(self.modulus) != d + 1 or self.modulus[-1] != 1:
                raise UsageError("defining polynomial must be monic of degree d")
        self.zero = 0
        self.one = 1
        self._mul_table = None
        self._inv_table = None
        if self.order <= _TABLE_CAP:
            self._build_tables()

    # -- encoding -----------------------------------------------------------

    def digits(self, a: int) -> tuple[int, ...]:
        out = []
        for _ in range(self.d):
            out.append(a % self.p)
            a //= self.p
        return tuple(out)

    def from_digits(self, digits) -> int:
        a = 0
        for c in reversed(list(digits)):
            a = a * self.p + (c % self.p)
        return a

    def elements(self):
        return range(self.order)

    def units(self):
        return range(1, self.order)

    # -- arithmetic ----------------------------------------------------------

    def _build_tables(self):
        n = self.order
        self._mul_table = [[0] * n for _ in range(n)]
        for a in range(n):
            for b in range(a, n):
                v = self._mul_raw(a, b)
                self._mul_table[a][b] = v
                self._mul_table[b][a] = v
        self._inv_table = [0] * n
        for a in range(1, n):
            row = self._mul_table[a]
            self._inv_table[a] = row.index(1)

    def _mul_raw(self, a: int, b: int) -> int:
        if self.d == 1:
            return (a * b) % self.p
        prod = _poly_mul(self.digits(a), self.digits(b), self.p)
        return self.from_digits(_poly_mod(prod, self.modulus, self.p) + (0,) * self.d)

    def add(self, a: int, b: int) -> int:
        if self.d == 1:
            return (a + b) % self.p
        da, db = self.digits(a), self.digits(b)
        return self.from_digits((x + y) % self.p for x, y in zip(da, db))

    def neg(self, a: int) -> int:
        if self.d == 1:
            return (-a) % self.p
        return self.from_digits((-x) % self.p for x in self.digits(a))

    def sub(self, a: int, b: int) -> int:
        return self.add(a, self.neg(b))

    def mul(self, a: int, b: int) -> int:
        if self._mul_table is not None:
            return self._mul_table[a][b]
        return self._mul_raw(a, b)

    def inv(self, a: int) -> int:
        if a == 0:
            raise UsageError("zero is not invertible")
        if self._inv_table is not None:
            return self._inv_table[a]
        return self.pow(a, self.order - 2)

    def pow(self, a: int, k: int) -> int:
        if k < 0:
            return self.pow(self.inv(a), -k)
        out, base = 1, a
        while k:
            if k & 1:
                out = self.mul(out, base)
            base = self.mul(base, base)
            k >>= 1
        return out

    def frobenius(self, a: int) -> int:
        return self.pow(a, self.p)

    def basis_mul(self, t: int, u: int) -> tuple[int, ...]:
        """Digits of g^t * g^u; the structure constants of the power basis."""
        return self.digits(self.mul(self.p**t if self.d > 1 else 1, self.p**u if self.d > 1 else 1))

    # -- text ------------------------------------------------------------------

    def elem_str(self, a: int) -> str:
        if self.d == 1:
            return str(a)
        terms = []
        for t in range(self.d - 1, -1, -1):
            c = self.digits(a)[t]
            if c == 0:
                continue
            if t == 0:
                terms.append(str(c))
            else:
                gpow = "g" if t == 1 else f"g^{t}"
                terms.append(gpow if c == 1 else f"{c}*{gpow}")
        return "+".join(terms) if terms else "0"

    def parse_elem(self, s: str) -> int:
        s = s.strip()
        if s.startswith("(") and s.endswith(")"):
            s = s[1:-1]
        total = 0
        for term in s.split("+"):
            term = term.strip()
            if not term:
                raise UsageError(f"bad field element {s!r}")
            if "g" not in term:
                total = self.add(total, int(term) % self.order if self.d == 1 else int(term) % self.p)
                continue
            coeff = 1
            if "*" in term:
                cs, term = term.split("*", 1)
                coeff = int(cs)
            t = 1
            if "^" in term:
                term, ts = term.split("^", 1)
                t = int(ts)
            if term != "g" or t >= self.d:
                raise UsageError(f"bad field element term {term!r}")
            total = self.add(total, self.from_digits([0] * t + [coeff] + [0] * (self.d - t - 1)))
        return total

    # -- identity ---------------------------------------------------------------

    @property
    def name(self) -> str:
        return f"F{self.order}"

    @classmethod
    def from_name(cls, name: str) -> "CoefficientField":
        name = name.strip()
        if not name.startswith("F"):
            raise UsageError(f"bad field name {name!r}; expected e.g. F2, F4, F9")
        try:
            n = int(name[1:])
        except ValueError as exc:
            raise UsageError(f"bad field name {name!r}") from exc
        if n < 2:
            raise UsageError(f"bad field order {n}")
        p = 2
        while p <= n:
            if n % p == 0:
                d = 0
                m = n
                while m % p == 0:
                    m //= p
                    d += 1
                if m != 1:
                    raise UsageError(f"{n} is not a prime power")
                return cls(p, d)
            p += 1
        raise UsageError(f"{n} is not a prime power")

    def __eq__(self, other):
        return (
            isinstance(other, CoefficientField)
            and (self.p, self.d, self.modulus) == (other.p, other.d, other.modulus)
        )

    def __hash__(self):
        return hash((self.p, self.d, self.modulus))

    def __repr__(self):
        return f"CoefficientField({self.p}, {self.d})"
