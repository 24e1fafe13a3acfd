"""Linear-objective programs with equality rows and affine PSD constraints.

Problem shape::

    maximize    c^T z
    subject to  A z = b
                F_k(z) = F_k0 + sum_i z_i F_ki  is PSD   for every block k

Blocks are stored sparsely as lower-triangle triplets.  The text dump format
is line oriented::

    conic-program 1
    vars <N>
    objective <nnz>
    <index> <value>                      (nnz lines)
    rows <m>
    row <name> <rhs> <nnz>
    <index> <value>                      (nnz lines)
    block <name> <dim> <nnz> <nconst>
    <i> <j> <index> <value>              (nnz lines, i >= j)
    <i> <j> <value>                      (nconst lines of the constant term)
    end

Values are written with 17 significant digits so a dump reloads exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp


class ProgramError(ValueError):
    pass


@dataclass
class PSDBlock:
    name: str
    dim: int
    rows: np.ndarray
    cols: np.ndarray
    var: np.ndarray
    coef: np.ndarray
    constant: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=np.int64)
        self.cols = np.asarray(self.cols, dtype=np.int64)
        self.var = np.asarray(self.var, dtype=np.int64)
        self.coef = np.asarray(self.coef, dtype=float)
        if not (len(self.rows) == len(self.cols) == len(self.var) == len(self.coef)):
            raise ProgramError(f"block {self.name}: triplet arrays differ in length")
        if len(self.rows) and (np.any(self.rows < self.cols) or self.rows.max() >= self.dim):
            raise ProgramError(f"block {self.name}: entries must be lower-triangle and within dim")
        if self.constant is not None:
            C = np.asarray(self.constant, dtype=float)
            if C.shape != (self.dim, self.dim) or not np.array_equal(C, C.T):
                raise ProgramError(f"block {self.name}: constant must be symmetric {self.dim}x{self.dim}")
            self.constant = C

    def evaluate(self, z: np.ndarray) -> np.ndarray:
        M = np.zeros((self.dim, self.dim)) if self.constant is None else self.constant.copy()
        L = np.zeros((self.dim, self.dim))
        np.add.at(L, (self.rows, self.cols), self.coef * np.asarray(z)[self.var])
        M += L + np.tril(L, -1).T
        return M

    def adjoint(self, Z: np.ndarray, n_vars: int) -> np.ndarray:
        """``(<F_i, Z>)_i`` for the linear part."""
        w = np.where(self.rows == self.cols, 1.0, 2.0)
        out = np.zeros(n_vars)
        np.add.at(out, self.var, w * self.coef * Z[self.rows, self.cols])
        return out

    def dense_coefficients(self) -> tuple[np.ndarray, np.ndarray]:
        """Used variables and the stacked symmetric coefficient matrices ``F_i``."""
        used, inv = np.unique(self.var, return_inverse=True)
        F = np.zeros((len(used), self.dim, self.dim))
        np.add.at(F, (inv, self.rows, self.cols), self.coef)
        off = self.rows != self.cols
        np.add.at(F, (inv[off], self.cols[off], self.rows[off]), self.coef[off])
        return used, F


@dataclass
class ConicProgram:
    n_vars: int
    objective: np.ndarray
    A: sp.csr_matrix
    b: np.ndarray
    blocks: list[PSDBlock]
    row_names: list[str] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        self.A = sp.csr_matrix(self.A, dtype=float)
        if self.objective.shape != (self.n_vars,):
            raise ProgramError("objective length differs from the variable count")
        if self.A.shape != (len(self.b), self.n_vars):
            raise ProgramError(f"A has shape {self.A.shape}, expected ({len(self.b)}, {self.n_vars})")
        if not self.row_names:
            self.row_names = [f"row{i}" for i in range(len(self.b))]
        for blk in self.blocks:
            if len(blk.var) and (blk.var.min() < 0 or blk.var.max() >= self.n_vars):
                raise ProgramError(f"block {blk.name} references a variable out of range")

    @property
    def n_rows(self) -> int:
        return len(self.b)


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def dump_program(program: ConicProgram, path: str | Path) -> None:
    lines = ["conic-program 1", f"vars {program.n_vars}"]
    nz = np.nonzero(program.objective)[0]
    lines.append(f"objective {len(nz)}")
    lines += [f"{i} {_fmt(program.objective[i])}" for i in nz]
    A = program.A.tocsr()
    lines.append(f"rows {program.n_rows}")
    for r in range(program.n_rows):
        lo, hi = A.indptr[r], A.indptr[r + 1]
        name = program.row_names[r].replace(" ", "_")
        lines.append(f"row {name} {_fmt(program.b[r])} {hi - lo}")
        lines += [f"{A.indices[k]} {_fmt(A.data[k])}" for k in range(lo, hi)]
    for blk in program.blocks:
        const = []
        if blk.constant is not None:
            ii, jj = np.nonzero(np.tril(blk.constant))
            const = [f"{i} {j} {_fmt(blk.constant[i, j])}" for i, j in zip(ii, jj)]
        lines.append(f"block {blk.name.replace(' ', '_')} {blk.dim} {len(blk.var)} {len(const)}")
        lines += [
            f"{i} {j} {v} {_fmt(c)}" for i, j, v, c in zip(blk.rows, blk.cols, blk.var, blk.coef)
        ]
        lines += const
    lines.append("end")
    Path(path).write_text("\n".join(lines) + "\n")


def load_program(path: str | Path) -> ConicProgram:
    tokens = Path(path).read_text().split("\n")
    it = iter(line.split() for line in tokens if line.strip())

    def expect(word):
        parts = next(it)
        if parts[0] != word:
            raise ProgramError(f"expected {word!r}, got {parts[0]!r}")
        return parts

    head = next(it)
    if head[:2] != ["conic-program", "1"]:
        raise ProgramError("not a conic program dump")
    n = int(expect("vars")[1])
    c = np.zeros(n)
    for _ in range(int(expect("objective")[1])):
        i, v = next(it)
        c[int(i)] = float(v)
    m = int(expect("rows")[1])
    names, b, ri, ci, vals = [], [], [], [], []
    for r in range(m):
        _, name, rhs, nnz = expect("row")
        names.append(name)
        b.append(float(rhs))
        for _ in range(int(nnz)):
            i, v = next(it)
            ri.append(r)
            ci.append(int(i))
            vals.append(float(v))
    A = sp.csr_matrix((vals, (ri, ci)), shape=(m, n))
    blocks = []
    for parts in it:
        if parts[0] == "end":
            break
        if parts[0] != "block":
            raise ProgramError(f"unexpected record {parts[0]!r}")
        _, name, dim, nnz, nconst = parts
        dim = int(dim)
        trip = [next(it) for _ in range(int(nnz))]
        const = None
        if int(nconst):
            const = np.zeros((dim, dim))
            for _ in range(int(nconst)):
                i, j, v = next(it)
                const[int(i), int(j)] = const[int(j), int(i)] = float(v)
        blocks.append(
            PSDBlock(
                name,
                dim,
                [int(t[0]) for t in trip],
                [int(t[1]) for t in trip],
                [int(t[2]) for t in trip],
                [float(t[3]) for t in trip],
                const,
            )
        )
    return ConicProgram(n, c, A, np.array(b), blocks, names)
