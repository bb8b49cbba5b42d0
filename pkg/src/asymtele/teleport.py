"""Teleportation between two qubits and one ququart over the (2, 2, 4) resource.

Register conventions used throughout:

* forward joint state: ``(c1, c2, a1, a2, b)`` with dims ``(2, 2, 2, 2, 4)``;
  Bell measurements act on ``(c1, a1)`` and ``(c2, a2)``.
* reverse joint state: ``(q, a1, a2, b)`` with dims ``(4, 2, 2, 4)``; the
  generalized Bell measurement acts on ``(q, b)``.

Two-qubit states and ququart states are compared through
``|x>|y> <-> |2x + y>``.
"""

from __future__ import annotations

import enum
import itertools
import threading
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .state import (
    DimRegister,
    PureState,
    StateError,
    UnitaryOp,
    apply_unitary,
    fidelity_pure,
    ket_from_amplitudes,
    project,
    regroup,
    tensor,
)

SQRT2 = np.sqrt(2.0)

FORWARD_REGISTER = DimRegister((2, 2, 2, 2, 4), ("c1", "c2", "a1", "a2", "b"))
REVERSE_REGISTER = DimRegister((4, 2, 2, 4), ("q", "a1", "a2", "b"))


class BellKind(enum.Enum):
    PhiPlus = "Phi+"
    PhiMinus = "Phi-"
    PsiPlus = "Psi+"
    PsiMinus = "Psi-"

    def __str__(self):
        return self.value


_BELL_AMPS = {
    BellKind.PhiPlus: (1, 0, 0, 1),
    BellKind.PhiMinus: (1, 0, 0, -1),
    BellKind.PsiPlus: (0, 1, 1, 0),
    BellKind.PsiMinus: (0, 1, -1, 0),
}


class BellOutcomePair(NamedTuple):
    first: BellKind
    second: BellKind

    @property
    def label(self) -> str:
        return f"{self.first},{self.second}"

    @classmethod
    def parse(cls, text: str) -> "BellOutcomePair":
        a, b = (s.strip() for s in text.split(","))
        return cls(BellKind(a), BellKind(b))


ALL_OUTCOMES: tuple[BellOutcomePair, ...] = tuple(
    BellOutcomePair(a, b) for a, b in itertools.product(BellKind, BellKind)
)


class QuquartBellOutcome(NamedTuple):
    m: int  # phase index
    n: int  # shift index

    @property
    def label(self) -> str:
        return f"B{self.m}{self.n}"


ALL_QUQUART_OUTCOMES: tuple[QuquartBellOutcome, ...] = tuple(
    QuquartBellOutcome(m, n) for m in range(4) for n in range(4)
)


class TeleportRecord(NamedTuple):
    outcome: object
    probability: float
    corrected: bool


@dataclass(frozen=True)
class Branch:
    outcome: BellOutcomePair
    probability: float
    state: PureState  # conditional ququart state on b
    conditional_map: np.ndarray  # unitary taking (alpha..delta) to ``state``


def make_224_state() -> PureState:
    amps = np.zeros(16, dtype=complex)
    for a1, a2 in itertools.product(range(2), range(2)):
        amps[np.ravel_multi_index((a1, a2, 2 * a1 + a2), (2, 2, 4))] = 0.5
    return PureState(DimRegister((2, 2, 4), ("a1", "a2", "b")), amps)


def make_44_state() -> PureState:
    amps = np.zeros(16, dtype=complex)
    amps[[0, 5, 10, 15]] = 0.5
    return PureState(DimRegister((4, 4), ("a", "b")), amps)


def bell_state(kind: BellKind) -> PureState:
    return PureState(DimRegister((2, 2)), np.array(_BELL_AMPS[kind]) / SQRT2)


def _bell_matrix(kind: BellKind) -> np.ndarray:
    """Bell amplitudes as a 2x2 array indexed [c, a]."""
    return np.array(_BELL_AMPS[kind], dtype=complex).reshape(2, 2) / SQRT2


def conditional_map(outcome: BellOutcomePair) -> np.ndarray:
    """Closed-form branch map on (alpha, beta, gamma, delta).

    Contracting <B|_{c,a} with |psi>_c and the resource's (a, b) correlation
    leaves sqrt(2) * B^dagger acting on the input index, once per qubit pair.
    """
    m1 = SQRT2 * _bell_matrix(outcome.first).conj().T
    m2 = SQRT2 * _bell_matrix(outcome.second).conj().T
    return np.kron(m1, m2)


def _as_two_qubit(state: PureState) -> PureState:
    if state.dims == (2, 2):
        return state
    if state.dims == (4,):
        return regroup(state, (2, 2))
    raise StateError(f"expected a two-qubit or ququart state, got dims {state.dims}")


def _as_ququart(state: PureState) -> PureState:
    if state.dims == (4,):
        return state
    if state.dims == (2, 2):
        return regroup(state, (4,))
    raise StateError(f"expected a ququart or two-qubit state, got dims {state.dims}")


def joint_forward_state(state: PureState) -> PureState:
    """Input on (c1, c2) composed with the resource on (a1, a2, b)."""
    state = _as_two_qubit(state)
    joint = tensor(state, make_224_state())
    return PureState(FORWARD_REGISTER, joint.amps)


def project_branch(joint: PureState, outcome: BellOutcomePair):
    """Bell-project (c1, a1) and (c2, a2) of the forward joint state."""
    pair = tensor(bell_state(outcome.first), bell_state(outcome.second))
    # projector ordering (c1, a1, c2, a2)
    return project(joint, pair, [0, 2, 1, 3])


def expand_joint(state: PureState) -> dict[BellOutcomePair, Branch]:
    """16-branch decomposition of input (x) resource, from the closed form."""
    state = _as_two_qubit(state)
    table = {}
    for outcome in ALL_OUTCOMES:
        m = conditional_map(outcome)
        amps = m @ state.amps
        table[outcome] = Branch(
            outcome=outcome,
            probability=float(np.vdot(amps, amps).real) / 16.0,
            state=PureState(DimRegister((4,), ("b",)), amps),
            conditional_map=m,
        )
    return table


def _signed_permutation(m: np.ndarray) -> np.ndarray:
    out = np.round(m.real)
    if not np.allclose(m, out, atol=1e-12) or not np.all(
        np.abs(out).sum(axis=0) == 1
    ) or not np.all(np.abs(out).sum(axis=1) == 1):
        raise StateError("correction is not a signed permutation")
    return out


_table_lock = threading.Lock()
_tables: dict[str, dict] = {}


def _cached_table(name, build):
    table = _tables.get(name)
    if table is None:
        with _table_lock:
            table = _tables.get(name)
            if table is None:
                table = _tables[name] = build()
    return table


def _build_forward_corrections() -> dict[BellOutcomePair, UnitaryOp]:
    table = {}
    for outcome in ALL_OUTCOMES:
        inv = np.linalg.inv(conditional_map(outcome))
        table[outcome] = UnitaryOp(_signed_permutation(inv), f"corr[{outcome.label}]")
    return table


def correction_unitary(outcome: BellOutcomePair) -> UnitaryOp:
    return _cached_table("forward", _build_forward_corrections)[outcome]


def teleport_forward(
    state: PureState,
    mode: str = "deterministic",
    seed: Optional[int] = None,
    outcome: Optional[BellOutcomePair] = None,
):
    """Run the forward protocol by explicit projection of the 64-dim joint state.

    ``mode="deterministic"`` samples a Bell outcome (or uses ``outcome`` when
    given) and applies the correction on b. ``mode="postselect"`` keeps only
    ``outcome`` (default Phi+, Phi+) and applies no correction.
    Returns ``(ququart_state, TeleportRecord)``.
    """
    joint = joint_forward_state(state)
    if mode == "postselect":
        outcome = outcome or BellOutcomePair(BellKind.PhiPlus, BellKind.PhiPlus)
        prob, b = project_branch(joint, outcome)
        return b, TeleportRecord(outcome, prob, False)
    if mode != "deterministic":
        raise ValueError(f"unknown mode {mode!r}")
    if outcome is None:
        probs = [project_branch(joint, o)[0] for o in ALL_OUTCOMES]
        rng = np.random.default_rng(seed)
        outcome = ALL_OUTCOMES[rng.choice(len(ALL_OUTCOMES), p=np.array(probs) / sum(probs))]
    prob, b = project_branch(joint, outcome)
    out = apply_unitary(b, correction_unitary(outcome), [0])
    return out, TeleportRecord(outcome, prob, True)


def generalized_bell_state(m: int, n: int) -> PureState:
    amps = np.zeros(16, dtype=complex)
    for k in range(4):
        amps[4 * k + (k + n) % 4] = 1j ** ((k * m) % 4) / 2
    return PureState(DimRegister((4, 4)), amps)


def generalized_bell_basis() -> tuple[PureState, ...]:
    """The 16 states B_mn ordered as ``ALL_QUQUART_OUTCOMES``."""
    return tuple(generalized_bell_state(o.m, o.n) for o in ALL_QUQUART_OUTCOMES)


def joint_reverse_state(state: PureState) -> PureState:
    state = _as_ququart(state)
    joint = tensor(state, make_224_state())
    return PureState(REVERSE_REGISTER, joint.amps)


def project_reverse_branch(joint: PureState, outcome: QuquartBellOutcome):
    return project(joint, generalized_bell_state(*outcome), [0, 3])


def _build_reverse_corrections() -> dict[QuquartBellOutcome, UnitaryOp]:
    # brute force: push each ququart basis input through the projection
    table = {}
    for outcome in ALL_QUQUART_OUTCOMES:
        cols = []
        for k in range(4):
            e = np.zeros(4, dtype=complex)
            e[k] = 1
            joint = joint_reverse_state(PureState(DimRegister((4,)), e))
            prob, rest = project_reverse_branch(joint, outcome)
            cols.append(rest.amps * np.sqrt(prob) * 4)
        inv = np.linalg.inv(np.column_stack(cols))
        inv[np.abs(inv) < 1e-13] = 0
        table[outcome] = UnitaryOp(inv, f"rcorr[{outcome.label}]")
    return table


def reverse_correction_unitary(outcome: QuquartBellOutcome) -> UnitaryOp:
    return _cached_table("reverse", _build_reverse_corrections)[outcome]


def teleport_reverse(
    state: PureState,
    seed: Optional[int] = None,
    outcome: Optional[QuquartBellOutcome] = None,
):
    """Teleport a ququart onto (a1, a2). Returns ``(two_qubit_state, record)``."""
    joint = joint_reverse_state(state)
    if outcome is None:
        probs = np.array([project_reverse_branch(joint, o)[0] for o in ALL_QUQUART_OUTCOMES])
        rng = np.random.default_rng(seed)
        outcome = ALL_QUQUART_OUTCOMES[rng.choice(16, p=probs / probs.sum())]
    prob, rest = project_reverse_branch(joint, outcome)
    out = apply_unitary(rest, reverse_correction_unitary(outcome), [0, 1])
    return out, TeleportRecord(outcome, prob, True)


def teleport_fidelity(output: PureState, target: PureState) -> float:
    """Fidelity after mapping both states onto one ququart."""
    return fidelity_pure(_as_ququart(target), _as_ququart(output).to_mixed())


def classical_bounds() -> tuple[float, float]:
    """(measure-and-resend estimation limit, qutrit-ququart overlap limit)."""
    return 2 / 5, 3 / 4


def random_state(dims, rng: np.random.Generator) -> PureState:
    dims = tuple(dims)
    d = int(np.prod(dims))
    return ket_from_amplitudes(rng.normal(size=d) + 1j * rng.normal(size=d), dims)
