"""Text export of a :class:`StandardForm` in SDPA sparse format.

File layout (lines starting with ``"`` or ``*`` are comments)::

    "free-text title
    *offset <c0>                 objective constant (optional, default 0)
    *equalities <k>              last block is an LP block of 2k equality rows
    <m>                          number of scalar variables
    <nblocks>
    <s1> <s2> ...                block sizes; negative size = diagonal (LP) block
    <c1> <c2> ... <cm>           objective vector
    <mat> <blk> <i> <j> <value>  one line per upper-triangular nonzero, 1-based

The program read from such a file is

    minimize  c'x + c0   s.t.   sum_k x_k F_k - F_0 >= 0   (per block)

which is the SDPA dual form.  Our blocks ``C_j + sum_k x_k A_jk >= 0``
therefore export ``F_0 = -C_j`` and ``F_k = A_jk``.  An equality
``a'x = b`` is written as the LP pair ``a'x - b >= 0`` and ``-a'x + b >= 0``.
Values use 17 significant digits, so an export/parse round trip is exact.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .program import PsdBlock, SemidefiniteProgram, StandardForm


def _fmt(v: float) -> str:
    return f"{float(v):.17g}"


def export_standard_form(prog: SemidefiniteProgram | StandardForm, title: str = "") -> str:
    sf = prog.standard_form() if isinstance(prog, SemidefiniteProgram) else prog
    m = sf.nvars
    blocks = [b for b in sf.blocks if b.size > 0]
    n_eq = sf.eq_A.shape[0]
    sizes = [b.size for b in blocks] + ([-2 * n_eq] if n_eq else [])
    lines = [f'"{title or "standard form"}', f"*offset {_fmt(sf.c0)}"]
    if n_eq:
        lines.append(f"*equalities {n_eq}")
    lines += [str(m), str(len(sizes)), " ".join(str(s) for s in sizes),
              " ".join(_fmt(v) for v in sf.c)]
    entries = []
    for bno, blk in enumerate(blocks, start=1):
        d = blk.size
        C = blk.const
        iu, ju = np.triu_indices(d)
        for i, j in zip(*np.nonzero(np.triu(C))):
            entries.append((0, bno, i + 1, j + 1, -C[i, j]))
        coef = blk.coef.tocsc()
        for k in range(m):
            col = coef.getcol(k).tocoo()
            for flat, v in zip(col.row, col.data):
                i, j = divmod(int(flat), d)
                if i <= j and v != 0.0:
                    entries.append((k + 1, bno, i + 1, j + 1, v))
    if n_eq:
        bno = len(blocks) + 1
        A = sf.eq_A.tocoo()
        for r, k, v in zip(A.row, A.col, A.data):
            entries.append((int(k) + 1, bno, 2 * r + 1, 2 * r + 1, v))
            entries.append((int(k) + 1, bno, 2 * r + 2, 2 * r + 2, -v))
        for r, b in enumerate(sf.eq_b):
            if b != 0.0:
                entries.append((0, bno, 2 * r + 1, 2 * r + 1, b))
                entries.append((0, bno, 2 * r + 2, 2 * r + 2, -b))
    entries.sort()
    lines += [f"{a} {b} {i} {j} {_fmt(v)}" for a, b, i, j, v in entries]
    return "\n".join(lines) + "\n"


def parse_standard_form(text: str) -> StandardForm:
    c0, n_eq = 0.0, 0
    data: list[str] = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("*"):
            key, _, val = line[1:].partition(" ")
            if key == "offset":
                c0 = float(val)
            elif key == "equalities":
                n_eq = int(val)
            continue
        if line.startswith('"'):
            continue
        data.append(line.replace(",", " ").replace("{", " ").replace("}", " "))
    if not data:
        raise ValueError("empty standard-form description")
    m = int(data[0])
    nblocks = int(data[1])
    pos = 2
    sizes: list[int] = []
    if nblocks:
        sizes = [int(s) for s in data[pos].split()]
        pos += 1
    c = np.zeros(m)
    if m:
        c = np.array([float(s) for s in data[pos].split()])
        pos += 1
    if len(sizes) != nblocks or c.shape[0] != m:
        raise ValueError("header does not match declared dimensions")
    dims = [abs(s) for s in sizes]
    consts = [np.zeros((d, d)) for d in dims]
    trip: list[tuple[list, list, list]] = [([], [], []) for _ in dims]
    for line in data[pos:]:
        a, b, i, j, v = line.split()
        a, b, i, j, v = int(a), int(b) - 1, int(i) - 1, int(j) - 1, float(v)
        d = dims[b]
        if a == 0:
            consts[b][i, j] = -v
            consts[b][j, i] = -v
        else:
            rows, cols, vals = trip[b]
            rows.append(i * d + j)
            cols.append(a - 1)
            vals.append(v)
            if i != j:
                rows.append(j * d + i)
                cols.append(a - 1)
                vals.append(v)
    blocks = []
    eq_A, eq_b = sp.csr_matrix((0, m)), np.zeros(0)
    for bno, d in enumerate(dims):
        rows, cols, vals = trip[bno]
        coef = sp.csr_matrix((vals, (rows, cols)), shape=(d * d, m))
        if n_eq and bno == len(dims) - 1:
            diag = np.arange(0, d, 2) * (d + 1)
            eq_A = coef[diag]
            eq_b = -np.diag(consts[bno])[0::2]
            continue
        blocks.append(PsdBlock(f"block{bno + 1}", d, consts[bno], coef))
    return StandardForm(c, c0, blocks, sp.csr_matrix(eq_A), np.asarray(eq_b, dtype=float))


def write_standard_form(prog: SemidefiniteProgram | StandardForm, path: str | Path,
                        title: str = "") -> Path:
    path = Path(path)
    path.write_text(export_standard_form(prog, title))
    return path


def read_standard_form(path: str | Path) -> StandardForm:
    return parse_standard_form(Path(path).read_text())
