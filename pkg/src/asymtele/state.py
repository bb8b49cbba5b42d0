"""Dimension-aware pure and mixed state engine.

States live on a register of subsystem dimensions. Amplitudes are stored
row-major over the register, first subsystem most significant, so a
``(2, 2, 4)`` register and a ``(4, 4)`` register share one flat layout.
All values are immutable once built.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

DIM_CAP = 4096
NORM_TOL = 1e-10
UNITARY_TOL = 1e-10
# Projections whose probability falls below this are treated as dead branches.
ZERO_PROB = 1e-20


class StateError(ValueError):
    """Raised for malformed states, registers or operator arguments."""


class _EmptyBranch:
    """Marker for a projection outcome with zero probability."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "EMPTY_BRANCH"

    def __bool__(self):
        return False


EMPTY_BRANCH = _EmptyBranch()


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class DimRegister:
    dims: tuple[int, ...]
    labels: Optional[tuple[str, ...]] = None
    cap: int = DIM_CAP

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        object.__setattr__(self, "dims", dims)
        if not dims:
            raise StateError("register needs at least one subsystem")
        if any(d < 2 for d in dims):
            raise StateError(f"subsystem dimensions must be >= 2, got {dims}")
        if math.prod(dims) > self.cap:
            raise StateError(
                f"total dimension {math.prod(dims)} exceeds cap {self.cap}"
            )
        if self.labels is not None:
            labels = tuple(self.labels)
            if len(labels) != len(dims):
                raise StateError("one label per subsystem required")
            object.__setattr__(self, "labels", labels)

    @property
    def total(self) -> int:
        return math.prod(self.dims)

    def __len__(self):
        return len(self.dims)

    def index_of(self, label: str) -> int:
        if self.labels is None or label not in self.labels:
            raise StateError(f"no subsystem labelled {label!r}")
        return self.labels.index(label)

    def sub(self, indices: Sequence[int]) -> "DimRegister":
        labels = None if self.labels is None else tuple(self.labels[i] for i in indices)
        return DimRegister(tuple(self.dims[i] for i in indices), labels, self.cap)

    def concat(self, other: "DimRegister") -> "DimRegister":
        if self.labels is not None and other.labels is not None:
            labels = self.labels + other.labels
        else:
            labels = None
        return DimRegister(self.dims + other.dims, labels, max(self.cap, other.cap))


def as_register(register) -> DimRegister:
    if isinstance(register, DimRegister):
        return register
    if isinstance(register, int):
        return DimRegister((register,))
    return DimRegister(tuple(register))


@dataclass(frozen=True, eq=False)
class PureState:
    """Normalized ket on a register.

    ``normalization`` records the factor applied to the raw amplitudes when
    the state was built with :func:`ket_from_amplitudes`.
    """

    register: DimRegister
    amps: np.ndarray
    normalization: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "register", as_register(self.register))
        amps = _frozen(np.ravel(self.amps))
        if amps.shape != (self.register.total,):
            raise StateError(
                f"expected {self.register.total} amplitudes, got {amps.shape[0]}"
            )
        if abs(np.linalg.norm(amps) - 1.0) > NORM_TOL:
            raise StateError(f"state norm {np.linalg.norm(amps)!r} is not 1")
        object.__setattr__(self, "amps", amps)

    @property
    def dims(self) -> tuple[int, ...]:
        return self.register.dims

    def tensor_view(self) -> np.ndarray:
        return self.amps.reshape(self.dims)

    def projector(self) -> np.ndarray:
        return np.outer(self.amps, self.amps.conj())

    def to_mixed(self) -> "MixedState":
        return MixedState(self.register, self.projector())

    def inner(self, other: "PureState") -> complex:
        if self.dims != other.dims:
            raise StateError(f"register mismatch {self.dims} vs {other.dims}")
        return complex(np.vdot(self.amps, other.amps))

    def equals(self, other: "PureState", atol: float = 1e-12) -> bool:
        return self.dims == other.dims and bool(
            np.allclose(self.amps, other.amps, rtol=0, atol=atol)
        )

    def equals_up_to_phase(self, other: "PureState", atol: float = 1e-12) -> bool:
        if self.dims != other.dims:
            return False
        overlap = np.vdot(other.amps, self.amps)
        if abs(overlap) < 1e-15:
            return False
        phase = overlap / abs(overlap)
        return bool(np.allclose(self.amps, phase * other.amps, rtol=0, atol=atol))


@dataclass(frozen=True, eq=False)
class MixedState:
    register: DimRegister
    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "register", as_register(self.register))
        m = _frozen(self.matrix)
        d = self.register.total
        if m.shape != (d, d):
            raise StateError(f"expected {d}x{d} density matrix, got {m.shape}")
        if not np.allclose(m, m.conj().T, rtol=0, atol=NORM_TOL):
            raise StateError("density matrix is not Hermitian")
        if abs(np.trace(m).real - 1.0) > NORM_TOL:
            raise StateError(f"density matrix trace {np.trace(m).real!r} is not 1")
        if np.linalg.eigvalsh(m).min() < -NORM_TOL:
            raise StateError("density matrix has negative eigenvalues")
        object.__setattr__(self, "matrix", m)

    @property
    def dims(self) -> tuple[int, ...]:
        return self.register.dims

    @classmethod
    def maximally_mixed(cls, register) -> "MixedState":
        register = as_register(register)
        return cls(register, np.eye(register.total) / register.total)


@dataclass(frozen=True, eq=False)
class UnitaryOp:
    matrix: np.ndarray
    name: str = field(default="U", compare=False)

    def __post_init__(self):
        m = _frozen(self.matrix)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise StateError(f"unitary must be square, got shape {m.shape}")
        if not np.allclose(m.conj().T @ m, np.eye(m.shape[0]), rtol=0, atol=UNITARY_TOL):
            raise StateError(f"{self.name} is not unitary")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __matmul__(self, other: "UnitaryOp") -> "UnitaryOp":
        return UnitaryOp(self.matrix @ other.matrix, f"{self.name}*{other.name}")

    def dagger(self) -> "UnitaryOp":
        return UnitaryOp(self.matrix.conj().T, f"{self.name}^dag")


def ket_from_amplitudes(amps, register) -> PureState:
    register = as_register(register)
    amps = np.asarray(amps, dtype=complex).ravel()
    if amps.shape[0] != register.total:
        raise StateError(f"expected {register.total} amplitudes, got {amps.shape[0]}")
    norm = np.linalg.norm(amps)
    if norm == 0:
        raise StateError("cannot normalize the zero vector")
    return PureState(register, amps / norm, normalization=float(1.0 / norm))


def basis_state(index: Sequence[int] | int, register) -> PureState:
    """Computational basis ket; ``index`` is a flat index or a digit tuple."""
    register = as_register(register)
    flat = index if isinstance(index, (int, np.integer)) else int(
        np.ravel_multi_index(tuple(index), register.dims)
    )
    amps = np.zeros(register.total, dtype=complex)
    amps[flat] = 1.0
    return PureState(register, amps)


def tensor(a: PureState, b: PureState, *more: PureState) -> PureState:
    register = a.register.concat(b.register)
    out = PureState(register, np.kron(a.amps, b.amps))
    for c in more:
        out = tensor(out, c)
    return out


def _check_targets(dims: Sequence[int], targets: Sequence[int]) -> list[int]:
    targets = [int(t) for t in targets]
    if len(set(targets)) != len(targets):
        raise StateError(f"repeated target in {targets}")
    for t in targets:
        if not 0 <= t < len(dims):
            raise StateError(f"target {t} out of range for {len(dims)} subsystems")
    return targets


def _split_front(tensor_: np.ndarray, dims, targets):
    """Move ``targets`` axes first and flatten to (target_dim, rest_dim)."""
    rest = [i for i in range(len(dims)) if i not in targets]
    moved = np.transpose(tensor_, targets + rest)
    dt = math.prod(dims[t] for t in targets)
    return moved.reshape(dt, -1), rest


def apply_unitary(state: PureState, u: UnitaryOp, targets: Sequence[int]) -> PureState:
    """Apply ``u`` to the listed subsystems (first target most significant)."""
    dims = state.dims
    targets = _check_targets(dims, targets)
    if math.prod(dims[t] for t in targets) != u.dim:
        raise StateError(
            f"unitary of dim {u.dim} does not fit targets with dims "
            f"{[dims[t] for t in targets]}"
        )
    flat, rest = _split_front(state.tensor_view(), dims, targets)
    new = (u.matrix @ flat).reshape([dims[t] for t in targets] + [dims[i] for i in rest])
    order = targets + rest
    out = np.transpose(new, np.argsort(order))
    return PureState(state.register, out.ravel())


def apply_operator(amps: np.ndarray, dims: Sequence[int], matrix: np.ndarray,
                   targets: Sequence[int]) -> np.ndarray:
    """Apply any matrix to targets of a raw (unnormalized) amplitude vector."""
    dims = tuple(dims)
    targets = _check_targets(dims, targets)
    flat, rest = _split_front(np.asarray(amps).reshape(dims), dims, targets)
    new = (np.asarray(matrix) @ flat).reshape(
        [dims[t] for t in targets] + [dims[i] for i in rest]
    )
    return np.transpose(new, np.argsort(targets + rest)).ravel()


def project(state: PureState, projector_state: PureState, targets: Sequence[int]):
    """Project ``targets`` onto ``projector_state``.

    Returns ``(probability, collapsed)``. ``collapsed`` is the renormalized
    state of the remaining subsystems, ``None`` when nothing remains, or
    :data:`EMPTY_BRANCH` when the probability vanishes.
    """
    dims = state.dims
    targets = _check_targets(dims, targets)
    tdims = tuple(dims[t] for t in targets)
    if tdims != projector_state.dims:
        raise StateError(f"projector dims {projector_state.dims} do not match targets {tdims}")
    flat, rest = _split_front(state.tensor_view(), dims, targets)
    remainder = projector_state.amps.conj() @ flat
    prob = float(np.vdot(remainder, remainder).real)
    if prob < ZERO_PROB:
        return 0.0, EMPTY_BRANCH
    if not rest:
        return prob, None
    return prob, PureState(state.register.sub(rest), remainder / math.sqrt(prob))


def project_mixed(rho: MixedState, projector_state: PureState, targets: Sequence[int]):
    """Mixed-state analogue of :func:`project`."""
    dims = rho.dims
    targets = _check_targets(dims, targets)
    tdims = tuple(dims[t] for t in targets)
    if tdims != projector_state.dims:
        raise StateError(f"projector dims {projector_state.dims} do not match targets {tdims}")
    n = len(dims)
    rest = [i for i in range(n) if i not in targets]
    t = rho.matrix.reshape(dims + dims)
    t = np.transpose(t, targets + rest + [n + i for i in targets] + [n + i for i in rest])
    dt = projector_state.register.total
    dr = math.prod(dims[i] for i in rest) if rest else 1
    t = t.reshape(dt, dr, dt, dr)
    v = projector_state.amps
    reduced = np.einsum("a,aibj,b->ij", v.conj(), t, v)
    prob = float(np.trace(reduced).real)
    if prob < ZERO_PROB:
        return 0.0, EMPTY_BRANCH
    if not rest:
        return prob, None
    reduced = reduced / prob
    reduced = (reduced + reduced.conj().T) / 2
    return prob, MixedState(rho.register.sub(rest), reduced)


def partial_trace(rho: MixedState, keep: Sequence[int]) -> MixedState:
    """Reduced state on ``keep``, in the order given."""
    dims = rho.dims
    keep = _check_targets(dims, keep)
    if not keep:
        raise StateError("keep must name at least one subsystem")
    n = len(dims)
    letters = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"
    if 2 * n > len(letters):
        raise StateError("too many subsystems for partial trace")
    row = list(letters[:n])
    col = [letters[n + i] if i in keep else row[i] for i in range(n)]
    out = [row[i] for i in keep] + [col[i] for i in keep]
    spec = "".join(row) + "".join(col) + "->" + "".join(out)
    reduced = np.einsum(spec, rho.matrix.reshape(dims + dims))
    dk = math.prod(dims[i] for i in keep)
    return MixedState(rho.register.sub(keep), reduced.reshape(dk, dk))


def fidelity_pure(psi: PureState, rho: MixedState | PureState) -> float:
    """Overlap <psi|rho|psi>, clamped to [0, 1]."""
    if isinstance(rho, PureState):
        rho = rho.to_mixed()
    if psi.dims != rho.dims:
        raise StateError(f"register mismatch {psi.dims} vs {rho.dims}")
    f = float(np.vdot(psi.amps, rho.matrix @ psi.amps).real)
    if f < -NORM_TOL or f > 1 + NORM_TOL:
        raise StateError(f"fidelity {f!r} outside [0, 1]")
    return min(1.0, max(0.0, f))


def _legal_regroup(old: Sequence[int], new: Sequence[int]) -> bool:
    old_edges = [1] + list(np.cumprod(old, dtype=np.int64))
    new_edges = [1] + list(np.cumprod(new, dtype=np.int64))
    old_set = set(int(e) for e in old_edges)
    for lo, hi in zip(new_edges[:-1], new_edges[1:]):
        lo, hi = int(lo), int(hi)
        if lo in old_set and hi in old_set:
            continue
        # otherwise the new subsystem must sit inside one old subsystem
        inside = any(
            a <= lo and hi <= b and lo % a == 0 and b % hi == 0
            for a, b in zip(old_edges[:-1], old_edges[1:])
        )
        if not inside:
            return False
    return True


def regroup(state: PureState | MixedState, new_register):
    """Merge or split adjacent subsystems; amplitudes are untouched."""
    new_register = as_register(new_register)
    if new_register.total != state.register.total:
        raise StateError(
            f"dimension product mismatch {state.register.total} vs {new_register.total}"
        )
    if not _legal_regroup(state.dims, new_register.dims):
        raise StateError(
            f"regroup {state.dims} -> {new_register.dims} crosses subsystem "
            "boundaries (non-adjacent merge)"
        )
    if isinstance(state, MixedState):
        return MixedState(new_register, state.matrix)
    return PureState(new_register, state.amps, state.normalization)


def permute(state: PureState, order: Sequence[int]) -> PureState:
    """Reorder subsystems; ``order[k]`` is the old index placed at position k."""
    order = _check_targets(state.dims, order)
    if len(order) != len(state.dims):
        raise StateError("permutation must list every subsystem once")
    amps = np.transpose(state.tensor_view(), order).ravel()
    return PureState(state.register.sub(order), amps)
