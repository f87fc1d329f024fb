"""Square banded matrices in LAPACK ``ab`` layout with a reusable LU.

Entry ``A[i, j]`` lives at ``ab[bw + i - j, j]`` for ``|i - j| <= bw``. The
storage dtype is preserved through the arithmetic helpers so assembled
operators may be kept in extended precision; factorizations are always
computed in float64 by LAPACK (``dgbtrf``/``dgbtrs``).
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import lapack

from cgsbp import _kernels


class SingularMatrixError(np.linalg.LinAlgError):
    pass


class BandedMatrix:
    __slots__ = ("ab", "bw")

    def __init__(self, ab: np.ndarray, bw: int):
        ab = np.asarray(ab)
        if ab.ndim != 2 or ab.shape[0] != 2 * bw + 1:
            raise ValueError(f"banded storage must have {2 * bw + 1} rows, got shape {ab.shape}")
        self.ab = ab
        self.bw = bw

    @classmethod
    def zeros(cls, n: int, bw: int, dtype=np.float64) -> "BandedMatrix":
        return cls(np.zeros((2 * bw + 1, n), dtype=dtype), bw)

    @classmethod
    def from_dense(cls, A: np.ndarray, bw: int) -> "BandedMatrix":
        A = np.asarray(A)
        n = A.shape[0]
        out = cls.zeros(n, bw, dtype=A.dtype)
        for k in range(-bw, bw + 1):
            d = np.diagonal(A, offset=k)
            # A[i, i + k] sits in row bw - k, column i + k
            if k >= 0:
                out.ab[bw - k, k:] = d
            else:
                out.ab[bw - k, : n + k] = d
        if np.any(np.triu(A, bw + 1)) or np.any(np.tril(A, -bw - 1)):
            raise ValueError("matrix has entries outside the requested bandwidth")
        return out

    @classmethod
    def from_diagonal(cls, d: np.ndarray, bw: int) -> "BandedMatrix":
        out = cls.zeros(len(d), bw, dtype=np.asarray(d).dtype)
        out.ab[bw] = d
        return out

    @classmethod
    def from_blocks(cls, blocks: np.ndarray, p: int, n: int | None = None) -> "BandedMatrix":
        """Scatter-add element blocks ``(n_e, p+1, p+1)`` sharing end nodes."""
        blocks = np.asarray(blocks)
        n_e = blocks.shape[0]
        if blocks.shape[1:] != (p + 1, p + 1):
            raise ValueError(f"element blocks must be {(p + 1, p + 1)}, got {blocks.shape[1:]}")
        if n is None:
            n = n_e * p + 1
        elif n != n_e * p + 1:
            raise ValueError(f"{n_e} elements of order {p} need {n_e * p + 1} nodes, got {n}")
        out = cls.zeros(n, p, dtype=blocks.dtype)
        _kernels.scatter_blocks(out.ab, blocks, p, p)
        return out

    @property
    def n(self) -> int:
        return self.ab.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n, self.n)

    @property
    def dtype(self):
        return self.ab.dtype

    def copy(self) -> "BandedMatrix":
        return BandedMatrix(self.ab.copy(), self.bw)

    def astype(self, dtype) -> "BandedMatrix":
        return BandedMatrix(self.ab.astype(dtype), self.bw)

    def _aligned(self, other: "BandedMatrix") -> tuple[np.ndarray, np.ndarray, int]:
        if other.n != self.n:
            raise ValueError(f"dimension mismatch: {self.n} vs {other.n}")
        bw = max(self.bw, other.bw)
        return self.widen(bw).ab, other.widen(bw).ab, bw

    def widen(self, bw: int) -> "BandedMatrix":
        if bw == self.bw:
            return self
        if bw < self.bw:
            raise ValueError("cannot narrow a banded matrix")
        ab = np.zeros((2 * bw + 1, self.n), dtype=self.dtype)
        ab[bw - self.bw : bw + self.bw + 1] = self.ab
        return BandedMatrix(ab, bw)

    def __add__(self, other):
        if isinstance(other, BandedMatrix):
            a, b, bw = self._aligned(other)
            return BandedMatrix(a + b, bw)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, BandedMatrix):
            a, b, bw = self._aligned(other)
            return BandedMatrix(a - b, bw)
        return NotImplemented

    def __neg__(self):
        return BandedMatrix(-self.ab, self.bw)

    def __mul__(self, scalar):
        if np.ndim(scalar) != 0:
            return NotImplemented
        return BandedMatrix(self.ab * scalar, self.bw)

    __rmul__ = __mul__

    def __matmul__(self, x):
        return self.matvec(x)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x)
        n, bw = self.n, self.bw
        y = np.zeros(n, dtype=np.result_type(self.ab, x))
        for k in range(-bw, bw + 1):
            # superdiagonal k: y[i] += A[i, i + k] x[i + k]
            row = self.ab[bw - k]
            if k >= 0:
                y[: n - k] += row[k:] * x[k:]
            else:
                y[-k:] += row[: n + k] * x[: n + k]
        return y

    @property
    def T(self) -> "BandedMatrix":
        out = BandedMatrix.zeros(self.n, self.bw, dtype=self.dtype)
        n, bw = self.n, self.bw
        for k in range(-bw, bw + 1):
            # A^T superdiagonal k equals A subdiagonal -k
            src = self.ab[bw + k]
            if k >= 0:
                out.ab[bw - k, k:] = src[: n - k]
            else:
                out.ab[bw - k, : n + k] = src[-k:]
        return out

    def diagonal(self) -> np.ndarray:
        return self.ab[self.bw].copy()

    def add_diagonal(self, d) -> "BandedMatrix":
        out = self.copy()
        out.ab[self.bw] += d
        return out

    def scale_rows(self, s: np.ndarray) -> "BandedMatrix":
        """``diag(s) @ A``."""
        n, bw = self.n, self.bw
        ab = np.zeros_like(self.ab, dtype=np.result_type(self.ab, s))
        j = np.arange(n)
        for r in range(2 * bw + 1):
            i = j + r - bw
            ok = (i >= 0) & (i < n)
            ab[r, ok] = self.ab[r, ok] * s[i[ok]]
        return BandedMatrix(ab, bw)

    def scale_cols(self, s: np.ndarray) -> "BandedMatrix":
        """``A @ diag(s)``."""
        return BandedMatrix(self.ab * np.asarray(s)[None, :], self.bw)

    def __getitem__(self, idx):
        i, j = idx
        if abs(i - j) > self.bw:
            return self.ab.dtype.type(0)
        return self.ab[self.bw + i - j, j]

    def add_entry(self, i: int, j: int, value) -> None:
        if abs(i - j) > self.bw:
            raise IndexError(f"entry ({i}, {j}) outside bandwidth {self.bw}")
        self.ab[self.bw + i - j, j] += value

    def row(self, i: int) -> np.ndarray:
        out = np.zeros(self.n, dtype=self.dtype)
        lo, hi = max(0, i - self.bw), min(self.n, i + self.bw + 1)
        for j in range(lo, hi):
            out[j] = self.ab[self.bw + i - j, j]
        return out

    def toarray(self) -> np.ndarray:
        A = np.zeros(self.shape, dtype=self.dtype)
        n, bw = self.n, self.bw
        for k in range(-bw, bw + 1):
            row = self.ab[bw - k]
            idx = np.arange(max(0, -k), min(n, n - k))
            A[idx, idx + k] = row[idx + k]
        return A

    def lu(self) -> "BandedLU":
        return BandedLU(self)

    def solve(self, b: np.ndarray) -> np.ndarray:
        return self.lu().solve(b)


class BandedLU:
    """LU factorization with partial pivoting (LAPACK ``dgbtrf``), reusable."""

    def __init__(self, A: BandedMatrix):
        bw = A.bw
        work = np.zeros((3 * bw + 1, A.n), dtype=np.float64)
        work[bw:] = A.ab
        lu, piv, info = lapack.dgbtrf(work, bw, bw)
        if info > 0:
            raise SingularMatrixError(f"banded matrix is singular (zero pivot at row {info - 1})")
        if info < 0:
            raise ValueError(f"dgbtrf: illegal argument {-info}")
        self.bw = bw
        self.n = A.n
        self._lu = lu
        self._piv = piv

    def solve(self, b: np.ndarray) -> np.ndarray:
        b = np.asarray(b, dtype=np.float64)
        x, info = lapack.dgbtrs(self._lu, self.bw, self.bw, b.reshape(self.n, -1), self._piv)
        if info != 0:
            raise ValueError(f"dgbtrs failed with info={info}")
        return x.reshape(b.shape)
