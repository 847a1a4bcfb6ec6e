"""Vectorized batch kernels for enumeration-scale work.

Group points are carried as uint8 coefficient arrays of shape
(N, size, size, D), where D is the prime-field dimension of the algebra with
the coefficient field folded in.  Multiplication contracts against the dense
structure tensor of the algebra through two BLAS matmul stages; every
intermediate integer stays far below the float32 exact range (2^24), so the
arithmetic is exact.
"""

from __future__ import annotations

import numpy as np

from .algebra import TruncatedAlgebra
from .errors import InternalError, UsageError
from .matgroup import (
    AlgebraMatrix,
    GroupTag,
    UnipotentElement,
    free_entry_positions,
    maximal_ideal_coords,
    unipotent_count,
)

_TENSOR_CAP = 192  # dense (D, D, D) float32 tensor stays < ~30 MB


class BatchEngine:
    def __init__(self, algebra: TruncatedAlgebra, tag: GroupTag):
        if algebra.D > _TENSOR_CAP:
            raise UsageError(
                f"algebra dimension {algebra.D} too large for the batch engine"
            )
        self.algebra = algebra
        self.tag = tag
        self.p = algebra.p
        self.size = tag.size
        self.D = algebra.D
        I, J, K, C = algebra._pair_table()
        S = np.zeros((self.D, self.D, self.D), dtype=np.float32)
        np.add.at(S, (I, J, K), C.astype(np.float32))
        # staged tables: S1[i, (j,k)] for element products, S2[(i,j), k]
        self.S1 = np.ascontiguousarray(S.reshape(self.D, self.D * self.D))
        self.S2 = np.ascontiguousarray(S.reshape(self.D * self.D, self.D))
        one = np.zeros(self.D, dtype=np.uint8)
        one[0] = 1
        self.one_vec = one
        eye = np.zeros((self.size, self.size, self.D), dtype=np.uint8)
        for i in range(self.size):
            eye[i, i] = one
        self.identity_row = eye
        self.mcoords = np.array(maximal_ideal_coords(algebra), dtype=np.int64)
        self.positions = free_entry_positions(tag)

    # -- element kernels ----------------------------------------------------------

    def elem_mul(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        n = a.shape[0]
        u = np.matmul(a.astype(np.float32), self.S1).reshape(n, self.D, self.D)
        out = np.matmul(b.astype(np.float32)[:, None, :], u)[:, 0, :]
        return (out % self.p).astype(np.uint8)

    def unit_inv(self, u: np.ndarray) -> np.ndarray:
        """Batched inverse of units with constant part exactly 1."""
        d = self.algebra.coeff.d
        if (u[:, 0] != 1).any() or (d > 1 and u[:, 1:d].any()):
            raise InternalError("batched inversion expects constant part 1")
        m = u.copy()
        m[:, 0] = 0
        one = np.broadcast_to(self.one_vec, u.shape)
        acc = one.copy()
        for _ in range(self.algebra.nilpotency_index() - 1):
            acc = (one.astype(np.int64) - self.elem_mul(m, acc).astype(np.int64)) % self.p
            acc = acc.astype(np.uint8)
        return acc

    # -- matrix kernels -------------------------------------------------------------

    def _matmul(self, Xf: np.ndarray, Yp: np.ndarray) -> np.ndarray:
        """Xf: (N, s, s, D) float32; Yp: (N, s, s*D) or (s, s*D) float32.

        Stage 1 contracts the inner matrix index c in T[n, aD+i, bD+j] =
        sum_c X[n,a,c,i] Y[n,c,b,j]; stage 2 contracts (i, j) against the
        structure tensor.  Both stages are plain matmuls.
        """
        n, s, D = Xf.shape[0], self.size, self.D
        Xp = np.ascontiguousarray(Xf.transpose(0, 1, 3, 2)).reshape(n, s * D, s)
        T = np.matmul(Xp, Yp)
        T = np.ascontiguousarray(
            T.reshape(n, s, D, s, D).transpose(0, 1, 3, 2, 4)
        ).reshape(n * s * s, D * D)
        out = np.matmul(T, self.S2) % self.p
        return out.reshape(n, s, s, D).astype(np.uint8)

    def mul(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        Yp = Y.astype(np.float32).reshape(Y.shape[0], self.size, self.size * self.D)
        out = self._matmul(X.astype(np.float32), Yp)
        if self.tag.family == "pgl2":
            out = self.canon_pgl2(out)
        return out

    def mul_single(self, X: np.ndarray, g: np.ndarray) -> np.ndarray:
        gp = g.astype(np.float32).reshape(self.size, self.size * self.D)
        out = self._matmul(X.astype(np.float32), gp)
        if self.tag.family == "pgl2":
            out = self.canon_pgl2(out)
        return out

    def pow_p(self, X: np.ndarray) -> np.ndarray:
        out = self.mul(X, X)
        for _ in range(self.p - 2):
            out = self.mul(out, X)
        return out

    def canon_pgl2(self, X: np.ndarray) -> np.ndarray:
        uinv = self.unit_inv(X[:, 0, 0, :])
        out = np.empty_like(X)
        for i in range(self.size):
            for j in range(self.size):
                out[:, i, j, :] = self.elem_mul(X[:, i, j, :], uinv)
        return out

    def is_identity(self, X: np.ndarray) -> np.ndarray:
        return (X == self.identity_row).all(axis=(1, 2, 3))

    def keys(self, X: np.ndarray) -> list[bytes]:
        flat = np.ascontiguousarray(X.astype(np.uint8)).reshape(X.shape[0], -1)
        return [row.tobytes() for row in flat]

    def orders(self, X: np.ndarray, cap: int = 64) -> np.ndarray:
        """p-power order exponents for every row."""
        n = X.shape[0]
        out = np.zeros(n, dtype=np.int64)
        cur = X.copy()
        alive = ~self.is_identity(cur)
        s = 0
        while alive.any():
            s += 1
            if s > cap:
                raise InternalError("batched p-power order failed to terminate")
            sub = self.pow_p(cur[alive])
            cur[alive] = sub
            done = self.is_identity(sub)
            idx = np.nonzero(alive)[0]
            out[idx[done]] = s
            alive[idx[done]] = False
        return out

    # -- conversions -----------------------------------------------------------------

    def from_unipotent(self, g: UnipotentElement) -> np.ndarray:
        if g.algebra != self.algebra or g.tag != self.tag:
            raise UsageError("element does not belong to this engine")
        out = np.zeros((self.size, self.size, self.D), dtype=np.uint8)
        for i in range(self.size):
            for j in range(self.size):
                out[i, j] = g.matrix[i, j].vec.astype(np.uint8)
        return out

    def to_unipotent(self, row: np.ndarray) -> UnipotentElement:
        A = self.algebra
        rows = [
            [A.element(row[i, j].astype(np.int64)) for j in range(self.size)]
            for i in range(self.size)
        ]
        return UnipotentElement(self.tag, AlgebraMatrix(A, rows), validate=False)

    # -- enumeration ------------------------------------------------------------------

    def _digit_count(self) -> int:
        return len(self.positions) * len(self.mcoords)

    def decode_digits(self, digits: np.ndarray) -> np.ndarray:
        """(N, free*DM) base-p digits -> (N, size, size, D) group points."""
        n = digits.shape[0]
        dm = len(self.mcoords)
        X = np.tile(self.identity_row, (n, 1, 1, 1))
        entry = {}
        for e, pos in enumerate(self.positions):
            entry[pos] = digits[:, e * dm : (e + 1) * dm].astype(np.uint8)
        fam = self.tag.family
        if fam in ("gl", "torus", "borel2"):
            for pos, block in entry.items():
                X[:, pos[0], pos[1], self.mcoords] = block
        elif fam == "pgl2":
            X[:, 0, 1, self.mcoords] = entry[(0, 1)]
            X[:, 1, 0, self.mcoords] = entry[(1, 0)]
            X[:, 1, 1, self.mcoords] = entry[(1, 1)]
        elif fam == "sl2":
            X[:, 0, 0, self.mcoords] = entry[(0, 0)]
            X[:, 0, 1, self.mcoords] = entry[(0, 1)]
            X[:, 1, 0, self.mcoords] = entry[(1, 0)]
            m2m3 = self.elem_mul(X[:, 0, 1, :], X[:, 1, 0, :])
            top = m2m3.astype(np.int64)
            top[:, 0] = (top[:, 0] + 1) % self.p  # 1 + m2*m3
            ainv = self.unit_inv(X[:, 0, 0, :])
            X[:, 1, 1, :] = self.elem_mul(top.astype(np.uint8), ainv)
        else:
            raise UsageError(f"unknown tag {self.tag}")
        return X

    def decode_range(self, start: int, stop: int) -> np.ndarray:
        k = self._digit_count()
        idx = np.arange(start, stop, dtype=np.int64)
        powers = self.p ** np.arange(k, dtype=np.int64)
        digits = (idx[:, None] // powers[None, :]) % self.p
        return self.decode_digits(digits)

    def decode_index_list(self, indices) -> np.ndarray:
        k = self._digit_count()
        digits = np.zeros((len(indices), k), dtype=np.int64)
        for row, idx in enumerate(indices):
            for c in range(k):
                digits[row, c] = idx % self.p
                idx //= self.p
        return self.decode_digits(digits)

    def count(self) -> int:
        return unipotent_count(self.tag, self.algebra)
