"""Atom-exchange symmetry and the block structure it induces on the Liouvillian."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from .errors import SpaceMismatchError, SymmetryError
from .fcs import build_tilted, unvec
from .hilbert import ATOMIC_LEVELS, HilbertSpace, Operator, commutator
from .model import LindbladModel

_SWAP_SIGN = {"00": 1.0, "s": 1.0, "a": -1.0, "11": 1.0}


@dataclass(frozen=True)
class SymmetryOp:
    U: Operator
    eigenvalues: tuple[tuple[float, int], ...]

    def projector(self, eigenvalue: float) -> Operator:
        """Orthogonal projector onto the eigenspace of ``eigenvalue``."""
        vals, vecs = _eigenbasis(self.U)
        sel = vecs[:, np.isclose(vals, eigenvalue, atol=1e-9)]
        return Operator(sel @ sel.conj().T, self.U.space_id)


def _eigenbasis(U: Operator):
    # unitary, hence normal: the Schur form is diagonal
    T, Z = la.schur(U.elements, output="complex")
    return np.diag(T), Z


def _spectrum_table(U: Operator, decimals: int = 9):
    vals, _ = _eigenbasis(U)
    table: dict[complex, int] = {}
    for v in np.round(vals, decimals):
        key = complex(v)
        table[key] = table.get(key, 0) + 1
    out = []
    for key, mult in sorted(table.items(), key=lambda kv: (-kv[0].real, kv[0].imag)):
        out.append((key.real if key.imag == 0 else key, mult))
    return tuple(out)


def build_swap(space: HilbertSpace) -> SymmetryOp:
    """Exchange of the two atoms: +1 on |00>, |s>, |11>, -1 on |a>, identity on photons."""
    diag = np.array([_SWAP_SIGN[ATOMIC_LEVELS[b[0]]] for b in space.basis], dtype=complex)
    U = Operator(np.diag(diag), space.space_id)
    return SymmetryOp(U, _spectrum_table(U))


def symmetry_from_unitary(U: Operator, atol: float = 1e-12) -> SymmetryOp:
    """Wrap an arbitrary user unitary for the commutation check."""
    M = U.elements
    if not np.allclose(M @ M.conj().T, np.eye(M.shape[0]), rtol=0, atol=atol):
        raise ValueError("operator is not unitary")
    return SymmetryOp(U, _spectrum_table(U))


@dataclass(frozen=True)
class SymmetryReport:
    norms: tuple[tuple[str, float], ...]
    tol: float

    @property
    def verdict(self) -> bool:
        return all(n < self.tol for _, n in self.norms)

    def as_dict(self) -> dict:
        return {"tol": self.tol, "verdict": self.verdict, "norms": dict(self.norms)}


def check_strong_symmetry(m: LindbladModel, sym: SymmetryOp, tol: float = 1e-12) -> SymmetryReport:
    """Frobenius norms of [U, H] and [U, L_k] for every channel."""
    if sym.U.space_id != m.space.space_id:
        raise SpaceMismatchError("symmetry operator and model act on different spaces")
    norms = [("H", commutator(sym.U, m.H).norm())]
    norms += [(c.label, commutator(sym.U, c.op).norm()) for c in m.channels]
    return SymmetryReport(tuple(norms), tol)


@dataclass(frozen=True)
class SectorBlock:
    label: tuple[int, int]
    matrix: np.ndarray
    basis: np.ndarray  # columns map block coordinates to vec(rho)
    abscissa: float
    steady_state: np.ndarray | None = None

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def sector_decompose(m: LindbladModel, sym: SymmetryOp, tol: float = 1e-12) -> list[SectorBlock]:
    """Restrict W_0 to the operator subspaces P_a rho P_b.

    Blocks are ordered (+,+), (+,-), (-,+), (-,-).  Diagonal blocks also carry
    their own steady state.
    """
    report = check_strong_symmetry(m, sym, tol)
    if not report.verdict:
        bad = {k: v for k, v in report.norms if v >= tol}
        raise SymmetryError(f"model is not strongly symmetric; violating commutators: {bad}", bad)
    vals, vecs = _eigenbasis(sym.U)
    labels = sorted({int(round(v.real)) for v in vals}, reverse=True)
    bases = {lab: vecs[:, np.isclose(vals, lab, atol=1e-9)] for lab in labels}
    W = build_tilted(m, 0.0).dense()
    blocks = []
    for a in labels:
        for b in labels:
            # vec(V_a X V_b^+) = (conj(V_b) kron V_a) vec(X)
            B = np.kron(bases[b].conj(), bases[a])
            Wab = B.conj().T @ W @ B
            ev = la.eigvals(Wab)
            rho = _sector_steady_state(Wab, bases[a]) if a == b else None
            blocks.append(SectorBlock((a, b), Wab, B, float(ev.real.max()), rho))
    return blocks


def _sector_steady_state(Wab: np.ndarray, V: np.ndarray) -> np.ndarray:
    """Long-time limit of the maximally mixed state of the sector."""
    vals, left, right = la.eig(Wab, left=True, right=True)
    null = np.abs(vals) <= max(1e-8 * np.linalg.norm(Wab, 2), np.abs(vals).min())
    R, Lh = right[:, null], left[:, null]
    k = V.shape[1]
    x0 = np.eye(k).reshape(-1, order="F") / k
    x = R @ np.linalg.solve(Lh.conj().T @ R, Lh.conj().T @ x0)
    rho = V @ unvec(x, k) @ V.conj().T
    rho = 0.5 * (rho + rho.conj().T)
    return rho / np.trace(rho).real
