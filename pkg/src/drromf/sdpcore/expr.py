"""Affine matrix expressions over structured matrix variables.

An :class:`Affine` holds a constant matrix plus one sparse coefficient block
per variable; entry ``(i, j)`` of the expression sits at row ``i * cols + j``
of every coefficient block (row-major vectorisation).
"""

from __future__ import annotations

import itertools
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

_ids = itertools.count()

STRUCTURES = ("free", "symmetric", "block_lower")


class Variable:
    """A matrix decision variable whose free scalars follow its structure tag.

    ``free`` exposes every entry, ``symmetric`` the lower triangle, and
    ``block_lower`` only the entries of blocks ``(i, j)`` with ``j <= i`` for
    the given ``(row_block, col_block)`` partition.
    """

    def __init__(self, name: str, shape: tuple[int, int], structure: str = "free",
                 blocks: tuple[int, int] | None = None):
        if structure not in STRUCTURES:
            raise ValueError(f"unknown structure {structure!r}")
        rows, cols = shape
        if structure == "symmetric" and rows != cols:
            raise ValueError("symmetric variable must be square")
        if structure == "block_lower":
            if blocks is None:
                raise ValueError("block_lower variable needs block sizes")
            rb, cb = blocks
            if rows % rb or cols % cb or rows // rb != cols // cb:
                raise ValueError(f"shape {shape} incompatible with blocks {blocks}")
        self.id = next(_ids)
        self.name = name
        self.shape = (int(rows), int(cols))
        self.structure = structure
        self.blocks = tuple(blocks) if blocks is not None else None
        self.basis = self._build_basis()
        self.size = self.basis.shape[1]

    def _build_basis(self) -> sp.csr_matrix:
        rows, cols = self.shape
        r_idx, c_idx, k_idx = [], [], []
        k = 0
        if self.structure == "free":
            for i in range(rows):
                for j in range(cols):
                    r_idx.append(i * cols + j)
                    k_idx.append(k)
                    k += 1
        elif self.structure == "symmetric":
            for i in range(rows):
                for j in range(i + 1):
                    r_idx.append(i * cols + j)
                    k_idx.append(k)
                    if i != j:
                        r_idx.append(j * cols + i)
                        k_idx.append(k)
                    k += 1
        else:
            rb, cb = self.blocks
            for i in range(rows):
                for j in range(cols):
                    if j // cb <= i // rb:
                        r_idx.append(i * cols + j)
                        k_idx.append(k)
                        k += 1
        data = np.ones(len(r_idx))
        return sp.csr_matrix((data, (r_idx, k_idx)), shape=(rows * cols, k))

    @property
    def expr(self) -> "Affine":
        return Affine(np.zeros(self.shape), {self.id: self.basis}, {self.id: self})

    def unpack(self, values: np.ndarray) -> np.ndarray:
        """Map a vector of free scalars to the full matrix value."""
        return (self.basis @ np.asarray(values, dtype=float)).reshape(self.shape)

    def __repr__(self) -> str:
        return f"Variable({self.name!r}, {self.shape}, {self.structure})"


def _as_affine(x) -> "Affine":
    if isinstance(x, Affine):
        return x
    if isinstance(x, Variable):
        return x.expr
    arr = np.atleast_2d(np.asarray(x, dtype=float))
    return Affine(arr, {}, {})


class Affine:
    """``const + sum_v coef_v @ vec(v)``, reshaped to ``shape``."""

    __array_priority__ = 1000

    def __init__(self, const: np.ndarray, terms: dict[int, sp.spmatrix],
                 variables: dict[int, Variable]):
        self.const = np.asarray(const, dtype=float)
        self.terms = {k: sp.csr_matrix(v) for k, v in terms.items()}
        self.variables = variables

    @property
    def shape(self) -> tuple[int, int]:
        return self.const.shape

    def _combine(self, other: "Affine", sign: float) -> "Affine":
        if self.shape != other.shape:
            raise ValueError(f"shape mismatch {self.shape} vs {other.shape}")
        terms = dict(self.terms)
        for k, v in other.terms.items():
            terms[k] = terms[k] + sign * v if k in terms else sign * v
        return Affine(self.const + sign * other.const, terms,
                      {**self.variables, **other.variables})

    def __add__(self, other):
        return self._combine(_as_affine(other), 1.0)

    __radd__ = __add__

    def __sub__(self, other):
        return self._combine(_as_affine(other), -1.0)

    def __rsub__(self, other):
        return _as_affine(other)._combine(self, -1.0)

    def __neg__(self):
        return self * -1.0

    def __mul__(self, scalar: float) -> "Affine":
        s = float(scalar)
        return Affine(self.const * s, {k: v * s for k, v in self.terms.items()}, self.variables)

    __rmul__ = __mul__

    def __rmatmul__(self, left) -> "Affine":
        left = np.atleast_2d(np.asarray(left, dtype=float))
        rows, cols = self.shape
        if left.shape[1] != rows:
            raise ValueError(f"cannot multiply {left.shape} @ {self.shape}")
        op = sp.kron(sp.csr_matrix(left), sp.identity(cols, format="csr"), format="csr")
        return Affine(left @ self.const, {k: op @ v for k, v in self.terms.items()},
                      self.variables)

    def __matmul__(self, right) -> "Affine":
        if isinstance(right, (Affine, Variable)):
            raise TypeError("product of two affine expressions is not affine")
        right = np.atleast_2d(np.asarray(right, dtype=float))
        rows, cols = self.shape
        if right.shape[0] != cols:
            raise ValueError(f"cannot multiply {self.shape} @ {right.shape}")
        op = sp.kron(sp.identity(rows, format="csr"), sp.csr_matrix(right.T), format="csr")
        return Affine(self.const @ right, {k: op @ v for k, v in self.terms.items()},
                      self.variables)

    @property
    def T(self) -> "Affine":
        rows, cols = self.shape
        perm = np.arange(rows * cols).reshape(rows, cols).T.ravel()
        return Affine(self.const.T, {k: v[perm] for k, v in self.terms.items()},
                      self.variables)

    def trace(self) -> "Affine":
        rows, cols = self.shape
        if rows != cols:
            raise ValueError("trace of non-square expression")
        diag = np.arange(rows) * (cols + 1)
        sel = sp.csr_matrix((np.ones(rows), (np.zeros(rows, dtype=int), diag)),
                            shape=(1, rows * cols))
        return Affine(np.array([[np.trace(self.const)]]),
                      {k: sel @ v for k, v in self.terms.items()}, self.variables)

    def kron_scalar(self, matrix) -> "Affine":
        """Scalar (1x1) expression times a constant matrix."""
        if self.shape != (1, 1):
            raise ValueError("kron_scalar needs a 1x1 expression")
        m = np.atleast_2d(np.asarray(matrix, dtype=float))
        col = sp.csr_matrix(m.reshape(-1, 1))
        return Affine(self.const[0, 0] * m, {k: col @ v for k, v in self.terms.items()},
                      self.variables)

    def value(self, assignment: dict[str, np.ndarray]) -> np.ndarray:
        """Evaluate given full-matrix values keyed by variable name."""
        out = self.const.copy().ravel()
        for k, coef in self.terms.items():
            var = self.variables[k]
            full = np.asarray(assignment[var.name], dtype=float).ravel()
            # coef acts on free scalars; recover them via the basis pseudo-inverse
            free = _free_from_full(var, full)
            out = out + coef @ free
        return out.reshape(self.shape)

    def is_symmetric(self, tol: float = 1e-12) -> bool:
        rows, cols = self.shape
        if rows != cols:
            return False
        if not np.allclose(self.const, self.const.T, atol=tol, rtol=0.0):
            return False
        perm = np.arange(rows * cols).reshape(rows, cols).T.ravel()
        for v in self.terms.values():
            diff = v - v[perm]
            if diff.nnz and np.abs(diff.data).max() > tol:
                return False
        return True

    def __repr__(self) -> str:
        names = ", ".join(self.variables[k].name for k in self.terms)
        return f"Affine(shape={self.shape}, vars=[{names}])"


def _free_from_full(var: Variable, full: np.ndarray) -> np.ndarray:
    # each free scalar owns at least one entry; the first one carries its value
    basis = var.basis.tocsc()
    return np.array([full[basis.indices[basis.indptr[k]]] for k in range(var.size)])


def bmat(grid: Sequence[Sequence]) -> Affine:
    """Assemble a block matrix; ``None`` entries are zero blocks."""
    n_br, n_bc = len(grid), len(grid[0])
    row_sizes = [None] * n_br
    col_sizes = [None] * n_bc
    cells = [[None if g is None else _as_affine(g) for g in row] for row in grid]
    for i, row in enumerate(cells):
        if len(row) != n_bc:
            raise ValueError("ragged block grid")
        for j, c in enumerate(row):
            if c is None:
                continue
            r, cc = c.shape
            if row_sizes[i] not in (None, r) or col_sizes[j] not in (None, cc):
                raise ValueError(f"block ({i},{j}) has inconsistent shape {c.shape}")
            row_sizes[i], col_sizes[j] = r, cc
    if None in row_sizes or None in col_sizes:
        raise ValueError("every block row and column needs at least one sized block")
    roff = np.concatenate([[0], np.cumsum(row_sizes)])
    coff = np.concatenate([[0], np.cumsum(col_sizes)])
    R, Cn = int(roff[-1]), int(coff[-1])
    const = np.zeros((R, Cn))
    pieces: dict[int, list] = {}
    variables: dict[int, Variable] = {}
    for i, row in enumerate(cells):
        for j, c in enumerate(row):
            if c is None:
                continue
            r, cc = c.shape
            const[roff[i]:roff[i + 1], coff[j]:coff[j + 1]] = c.const
            ii, jj = np.meshgrid(np.arange(r), np.arange(cc), indexing="ij")
            target = ((ii + roff[i]) * Cn + (jj + coff[j])).ravel()
            variables.update(c.variables)
            for k, v in c.terms.items():
                coo = v.tocoo()
                pieces.setdefault(k, []).append((target[coo.row], coo.col, coo.data, v.shape[1]))
    terms = {}
    for k, plist in pieces.items():
        rows = np.concatenate([p[0] for p in plist])
        cols = np.concatenate([p[1] for p in plist])
        data = np.concatenate([p[2] for p in plist])
        terms[k] = sp.csr_matrix((data, (rows, cols)), shape=(R * Cn, plist[0][3]))
    return Affine(const, terms, variables)


def constant(x) -> Affine:
    return _as_affine(x)


def hstack(items: Iterable) -> Affine:
    return bmat([list(items)])


def vstack(items: Iterable) -> Affine:
    return bmat([[it] for it in items])
