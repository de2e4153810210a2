"""Solver-agnostic semidefinite programs and their standard form.

Standard (LMI) form used throughout::

    minimize    c @ x + c0
    subject to  F_j(x) = F_j0 + sum_k x_k F_jk  >= 0   (PSD, one per block j)
                a_i @ x = b_i                          (equality rows)

``x`` stacks the free scalars of every registered variable in registration
order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .expr import Affine, Variable


class SdpError(Exception):
    """Raised for malformed programs."""


@dataclass
class PsdBlock:
    """One PSD constraint in standard form.

    ``const`` is the dense ``d x d`` constant; ``coef`` is ``(d*d, nvars)``
    sparse with row-major vectorisation.
    """

    name: str
    size: int
    const: np.ndarray
    coef: sp.csr_matrix

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        m = self.const + (self.coef @ x).reshape(self.size, self.size)
        return 0.5 * (m + m.T)


@dataclass
class StandardForm:
    c: np.ndarray
    c0: float
    blocks: list[PsdBlock]
    eq_A: sp.csr_matrix
    eq_b: np.ndarray
    var_names: list[str] = field(default_factory=list)

    @property
    def nvars(self) -> int:
        return self.c.shape[0]

    def min_eigenvalues(self, x: np.ndarray) -> list[float]:
        return [float(np.linalg.eigvalsh(b.evaluate(x))[0]) if b.size else 0.0
                for b in self.blocks]

    def max_violation(self, x: np.ndarray) -> float:
        viol = [max(0.0, -e) for e in self.min_eigenvalues(x)]
        if self.eq_A.shape[0]:
            viol.append(float(np.abs(self.eq_A @ x - self.eq_b).max()))
        return max(viol, default=0.0)


class SemidefiniteProgram:
    """Linear objective, affine PSD constraints, affine equalities.

    Examples
    --------
    >>> sdp = SemidefiniteProgram()
    >>> t = sdp.scalar("t")
    >>> sdp.minimize(t)
    >>> sdp.add_psd(bmat([[t, 1.0], [1.0, t]]))  # doctest: +SKIP
    """

    def __init__(self, name: str = "sdp"):
        self.name = name
        self.variables: list[Variable] = []
        self.objective: Affine | None = None
        self.psd: list[tuple[str, Affine]] = []
        self.equalities: list[tuple[str, Affine]] = []

    def _register(self, var: Variable) -> Affine:
        if any(v.name == var.name for v in self.variables):
            raise SdpError(f"duplicate variable name {var.name!r}")
        self.variables.append(var)
        return var.expr

    def scalar(self, name: str) -> Affine:
        return self._register(Variable(name, (1, 1)))

    def matrix(self, name: str, shape: tuple[int, int], structure: str = "free",
               blocks: tuple[int, int] | None = None) -> Affine:
        return self._register(Variable(name, shape, structure, blocks))

    def variable(self, name: str) -> Variable:
        for v in self.variables:
            if v.name == name:
                return v
        raise KeyError(name)

    def minimize(self, expr: Affine | float) -> None:
        expr = expr if isinstance(expr, Affine) else Affine(np.array([[float(expr)]]), {}, {})
        if expr.shape != (1, 1):
            raise SdpError(f"objective must be scalar, got shape {expr.shape}")
        self._check_owned(expr)
        self.objective = expr

    def add_psd(self, expr: Affine, name: str | None = None, tol: float = 1e-12) -> None:
        if not expr.is_symmetric(tol):
            raise SdpError(f"PSD constraint {name or len(self.psd)} is not symmetric")
        self._check_owned(expr)
        self.psd.append((name or f"psd{len(self.psd)}", expr))

    def add_eq(self, expr: Affine, name: str | None = None) -> None:
        self._check_owned(expr)
        self.equalities.append((name or f"eq{len(self.equalities)}", expr))

    def _check_owned(self, expr: Affine) -> None:
        ids = {v.id for v in self.variables}
        stray = [expr.variables[k].name for k in expr.terms if k not in ids]
        if stray:
            raise SdpError(f"expression uses unregistered variables {stray}")

    def _offsets(self) -> dict[int, int]:
        off, out = 0, {}
        for v in self.variables:
            out[v.id] = off
            off += v.size
        return out

    def _stack(self, expr: Affine, offsets: dict[int, int], nvars: int) -> sp.csr_matrix:
        rows = expr.shape[0] * expr.shape[1]
        parts = []
        for v in self.variables:
            coef = expr.terms.get(v.id)
            parts.append(coef if coef is not None else sp.csr_matrix((rows, v.size)))
        if not parts:
            return sp.csr_matrix((rows, 0))
        return sp.hstack(parts, format="csr")

    def standard_form(self) -> StandardForm:
        offsets = self._offsets()
        nvars = sum(v.size for v in self.variables)
        if self.objective is None:
            c, c0 = np.zeros(nvars), 0.0
        else:
            c = np.asarray(self._stack(self.objective, offsets, nvars).todense()).ravel()
            c0 = float(self.objective.const[0, 0])
        blocks = [PsdBlock(name, e.shape[0], e.const.copy(), self._stack(e, offsets, nvars))
                  for name, e in self.psd]
        if self.equalities:
            eq_A = sp.vstack([self._stack(e, offsets, nvars) for _, e in self.equalities],
                             format="csr")
            eq_b = -np.concatenate([e.const.ravel() for _, e in self.equalities])
        else:
            eq_A, eq_b = sp.csr_matrix((0, nvars)), np.zeros(0)
        names = [f"{v.name}[{k}]" for v in self.variables for k in range(v.size)]
        return StandardForm(c, c0, blocks, eq_A, eq_b, names)

    def assignment(self, x: np.ndarray) -> dict[str, np.ndarray]:
        """Split a standard-form vector into full matrix values."""
        out, off = {}, 0
        for v in self.variables:
            vals = v.unpack(x[off:off + v.size])
            out[v.name] = vals[0, 0] if v.shape == (1, 1) else vals
            off += v.size
        return out

    def dimensions(self) -> dict:
        return {
            "nvars": sum(v.size for v in self.variables),
            "psd_blocks": [e.shape[0] for _, e in self.psd],
            "equalities": sum(e.shape[0] * e.shape[1] for _, e in self.equalities),
        }
