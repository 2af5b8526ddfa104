"""Truncated Hilbert space of the atom pair and the three cavity modes.

Basis states are tuples ``(atom, n_l, n_2, n_r)``.  The atomic index refers to
the fixed ordering ``ATOMIC_LEVELS = ("00", "s", "a", "11")`` where
``s``/``a`` are the symmetric/antisymmetric single-excitation Bell states.
States are enumerated lexicographically with the atomic index outermost.
"""
from __future__ import annotations

import hashlib
import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, SpaceMismatchError

ATOMIC_LEVELS = ("00", "s", "a", "11")
MODES = ("l", "2", "r")


@dataclass(frozen=True)
class ModeSpec:
    """Truncation of the photon sector.

    ``cavity_cutoffs`` bounds the photon number of each mode (l, 2, r),
    ``global_cap`` bounds the total photon number (``None`` for no cap).
    """

    cavity_cutoffs: tuple[int, int, int] = (1, 1, 1)
    global_cap: int | None = 1
    atomic_levels: tuple[str, ...] = field(default=ATOMIC_LEVELS, init=False)

    def __post_init__(self):
        cutoffs = tuple(int(c) for c in self.cavity_cutoffs)
        if len(cutoffs) != len(MODES):
            raise ConfigurationError(f"need {len(MODES)} cavity cutoffs, got {len(cutoffs)}")
        if any(c < 1 for c in cutoffs):
            raise ConfigurationError(f"cavity cutoffs must be >= 1, got {cutoffs}")
        object.__setattr__(self, "cavity_cutoffs", cutoffs)
        if self.global_cap is not None:
            cap = int(self.global_cap)
            if cap < 0:
                raise ConfigurationError("global_cap must be >= 0")
            if cap > sum(cutoffs):
                raise ConfigurationError(
                    f"global_cap {cap} exceeds the sum of cavity cutoffs {sum(cutoffs)}"
                )
            object.__setattr__(self, "global_cap", cap)

    def allows(self, photons) -> bool:
        if any(n < 0 or n > c for n, c in zip(photons, self.cavity_cutoffs)):
            return False
        return self.global_cap is None or sum(photons) <= self.global_cap


@dataclass(frozen=True, eq=False)
class HilbertSpace:
    spec: ModeSpec
    basis: tuple[tuple[int, int, int, int], ...]
    index: dict
    space_id: str

    @property
    def dim(self) -> int:
        return len(self.basis)

    @property
    def photon_states(self) -> tuple[tuple[int, int, int], ...]:
        """Retained photon configurations (identical for every atomic level)."""
        return tuple(b[1:] for b in self.basis if b[0] == 0)

    @property
    def photon_dim(self) -> int:
        return len(self.photon_states)

    def state_index(self, atom: str | int, photons=(0, 0, 0)) -> int:
        a = atomic_index(atom)
        key = (a, *(int(n) for n in photons))
        try:
            return self.index[key]
        except KeyError:
            raise ConfigurationError(f"state {key} is not in the truncated basis") from None

    def ket(self, atom: str | int, photons=(0, 0, 0)) -> np.ndarray:
        v = np.zeros(self.dim, dtype=complex)
        v[self.state_index(atom, photons)] = 1.0
        return v

    def identity(self) -> "Operator":
        return Operator(np.eye(self.dim, dtype=complex), self.space_id)

    def zero(self) -> "Operator":
        return Operator(np.zeros((self.dim, self.dim), dtype=complex), self.space_id)

    def __eq__(self, other):
        return isinstance(other, HilbertSpace) and self.space_id == other.space_id

    def __hash__(self):
        return hash(self.space_id)


def atomic_index(label: str | int) -> int:
    if isinstance(label, (int, np.integer)) and 0 <= label < len(ATOMIC_LEVELS):
        return int(label)
    try:
        return ATOMIC_LEVELS.index(str(label))
    except ValueError:
        raise ConfigurationError(
            f"unknown atomic label {label!r}; expected one of {ATOMIC_LEVELS}"
        ) from None


def mode_index(mode: str | int) -> int:
    key = str(mode)
    if key not in MODES:
        raise ConfigurationError(f"unknown cavity mode {mode!r}; expected one of {MODES}")
    return MODES.index(key)


def build_space(spec: ModeSpec | None = None) -> HilbertSpace:
    """Enumerate the retained basis for ``spec``."""
    spec = spec or ModeSpec()
    ranges = [range(c + 1) for c in spec.cavity_cutoffs]
    photons = [p for p in itertools.product(*ranges) if spec.allows(p)]
    basis = tuple((a, *p) for a in range(len(ATOMIC_LEVELS)) for p in photons)
    index = {b: i for i, b in enumerate(basis)}
    tag = f"{spec.cavity_cutoffs}|{spec.global_cap}|{ATOMIC_LEVELS}"
    space_id = hashlib.sha1(tag.encode()).hexdigest()[:12]
    return HilbertSpace(spec=spec, basis=basis, index=index, space_id=space_id)


class Operator:
    """Dense matrix tied to the Hilbert space it acts on.

    The underlying array is read-only; arithmetic returns new operators and
    refuses to mix operators from different spaces.
    """

    __slots__ = ("elements", "space_id")
    __array_priority__ = 100

    def __init__(self, elements, space_id: str):
        arr = np.array(elements, dtype=complex)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValueError(f"operator must be square, got shape {arr.shape}")
        arr.setflags(write=False)
        self.elements = arr
        self.space_id = space_id

    @property
    def shape(self):
        return self.elements.shape

    @property
    def dim(self) -> int:
        return self.elements.shape[0]

    def dag(self) -> "Operator":
        return Operator(self.elements.conj().T, self.space_id)

    def _check(self, other: "Operator"):
        if not isinstance(other, Operator):
            return NotImplemented
        if other.space_id != self.space_id:
            raise SpaceMismatchError(
                f"operators act on different spaces ({self.space_id} vs {other.space_id})"
            )
        return other.elements

    def __add__(self, other):
        m = self._check(other)
        if m is NotImplemented:
            return m
        return Operator(self.elements + m, self.space_id)

    def __sub__(self, other):
        m = self._check(other)
        if m is NotImplemented:
            return m
        return Operator(self.elements - m, self.space_id)

    def __matmul__(self, other):
        m = self._check(other)
        if m is NotImplemented:
            return m
        return Operator(self.elements @ m, self.space_id)

    def __mul__(self, scalar):
        if isinstance(scalar, Operator):
            raise TypeError("use @ for operator products")
        return Operator(self.elements * scalar, self.space_id)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return Operator(self.elements / scalar, self.space_id)

    def __neg__(self):
        return Operator(-self.elements, self.space_id)

    def __repr__(self):
        return f"Operator(dim={self.dim}, space_id={self.space_id!r})"

    def norm(self) -> float:
        """Frobenius norm."""
        return float(np.linalg.norm(self.elements))

    def is_hermitian(self, atol: float = 1e-12) -> bool:
        return bool(np.allclose(self.elements, self.elements.conj().T, rtol=0, atol=atol))


def annihilator(space: HilbertSpace, mode: str | int) -> Operator:
    """Truncated ladder operator of ``mode`` (untruncated ``a`` projected on the basis)."""
    m = mode_index(mode)
    out = np.zeros((space.dim, space.dim), dtype=complex)
    for col, state in enumerate(space.basis):
        n = state[1 + m]
        if n == 0:
            continue
        target = list(state)
        target[1 + m] -= 1
        row = space.index.get(tuple(target))
        if row is not None:
            out[row, col] = np.sqrt(n)
    return Operator(out, space.space_id)


def creator(space: HilbertSpace, mode: str | int) -> Operator:
    return annihilator(space, mode).dag()


def number(space: HilbertSpace, mode: str | int) -> Operator:
    a = annihilator(space, mode)
    return a.dag() @ a


def atomic_transition(space: HilbertSpace, i: str | int, j: str | int) -> Operator:
    """``|i><j|`` on the atom pair, identity on the photons."""
    ii, jj = atomic_index(i), atomic_index(j)
    out = np.zeros((space.dim, space.dim), dtype=complex)
    for col, state in enumerate(space.basis):
        if state[0] == jj:
            out[space.index[(ii, *state[1:])], col] = 1.0
    return Operator(out, space.space_id)


def commutator(a: Operator, b: Operator) -> Operator:
    return a @ b - b @ a
