"""Polarization/path encoding and the optical preparation pipeline.

A photon carrying a ququart is written as two effective qubits
``(pol, path)`` with ``H=0, V=1`` and ``u=0, l=1``; the ququart index is
``2*pol + path`` so ``Hu, Hl, Vu, Vl -> 0, 1, 2, 3``.

Jones conventions (basis H, V)::

    HWP(t) = [[cos 2t, sin 2t], [sin 2t, -cos 2t]]
    QWP(t) = R(t) diag(1, i) R(-t),  R(t) = [[cos t, -sin t], [sin t, cos t]]
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import minimize

from .state import (
    EMPTY_BRANCH,
    ZERO_PROB,
    DimRegister,
    PureState,
    StateError,
    UnitaryOp,
    apply_operator,
    apply_unitary,
    basis_state,
    permute,
    project,
    regroup,
    tensor,
)
from .teleport import BellKind, bell_state, make_224_state

H, V = 0, 1
U_PATH, L_PATH = 0, 1
DEFAULT_CNOT_SUCCESS = 1 / 9

QUBIT_ENCODING = {"H": 0, "V": 1}
QUQUART_ENCODING = {"Hu": 0, "Hl": 1, "Vu": 2, "Vl": 3}


@dataclass(frozen=True)
class EncodingMap:
    photon: str
    logical_dim: int

    @property
    def basis(self) -> dict[str, int]:
        return dict(QUBIT_ENCODING if self.logical_dim == 2 else QUQUART_ENCODING)

    def __post_init__(self):
        if self.logical_dim not in (2, 4):
            raise StateError("photons carry a qubit (2) or a ququart (4)")

    def index(self, label: str) -> int:
        return self.basis[label]

    def label(self, index: int) -> str:
        return {v: k for k, v in self.basis.items()}[index]


PREP_ENCODING = (EncodingMap("a1", 2), EncodingMap("a2", 2), EncodingMap("b", 4))


def _rot(t: float) -> np.ndarray:
    c, s = math.cos(t), math.sin(t)
    return np.array([[c, -s], [s, c]])


def hwp(theta: float) -> UnitaryOp:
    c, s = math.cos(2 * theta), math.sin(2 * theta)
    return UnitaryOp(np.array([[c, s], [s, -c]]), f"HWP({theta:.6g})")


def qwp(theta: float) -> UnitaryOp:
    m = _rot(theta) @ np.diag([1, 1j]) @ _rot(-theta)
    return UnitaryOp(m, f"QWP({theta:.6g})")


CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)


def beam_displacer() -> UnitaryOp:
    """Ideal BD on (pol, path): H stays, V shifts to the other path."""
    return UnitaryOp(CNOT, "BD")


def path_conditioned(u: UnitaryOp, path: int) -> UnitaryOp:
    """Block operator on (pol, path) applying ``u`` to pol only on ``path``."""
    m = np.zeros((4, 4), dtype=complex)
    for p in (0, 1):
        block = u.matrix if p == path else np.eye(2)
        for i in (0, 1):
            for j in (0, 1):
                m[2 * i + p, 2 * j + p] = block[i, j]
    return UnitaryOp(m, f"{u.name}@path{path}")


def dof_converter() -> UnitaryOp:
    """BD followed by a 45 deg HWP on the lower path, acting on (pol, path).

    With the path starting in ``u`` this maps ``|H,u> -> |H,u>`` and
    ``|V,u> -> |H,l>``.
    """
    return path_conditioned(hwp(math.pi / 4), L_PATH) @ beam_displacer()


def dof_converter_expand(pol_state: PureState) -> PureState:
    if pol_state.dims != (2,):
        raise StateError("DoF converter takes a single polarization qubit")
    start = tensor(pol_state, basis_state(U_PATH, 2))
    out = apply_unitary(start, dof_converter(), [0, 1])
    return PureState(DimRegister((2, 2), ("pol", "path")), out.amps)


def dof_converter_collapse(photon_state: PureState) -> PureState:
    """Inverse of :func:`dof_converter_expand` on its image."""
    if photon_state.dims != (2, 2):
        raise StateError("expected a (pol, path) photon state")
    back = apply_unitary(photon_state, dof_converter().dagger(), [0, 1])
    prob, pol = project(back, basis_state(U_PATH, 2), [1])
    if abs(prob - 1) > 1e-10:
        raise StateError("state is not in the image of the DoF converter")
    return pol


def cnot_on(state: PureState, control: int, target: int, condition=None) -> PureState:
    """Ideal polarization CNOT (control V flips target).

    ``condition=(subsystem, value)`` restricts the gate to one path of a
    photon, giving a block-controlled three-qubit operator.
    """
    if state.dims[control] != 2 or state.dims[target] != 2:
        raise StateError("CNOT acts on polarization qubits only")
    if condition is None:
        return apply_unitary(state, UnitaryOp(CNOT, "CNOT"), [control, target])
    sub, value = condition
    if state.dims[sub] != 2:
        raise StateError("condition subsystem must be a path qubit")
    m = np.eye(8, dtype=complex)
    off = 4 * value
    m[off:off + 4, off:off + 4] = CNOT
    return apply_unitary(state, UnitaryOp(m, "cCNOT"), [sub, control, target])


def ppbs_cnot(state: PureState, control: int, target: int,
              success_prob: float = DEFAULT_CNOT_SUCCESS, condition=None):
    """PPBS-based CNOT: ideal unitary plus a success-probability factor.

    Returns ``(state, success_prob)``; the factor never touches the state.
    """
    if not 0 < success_prob <= 1:
        raise StateError("success_prob must be in (0, 1]")
    return cnot_on(state, control, target, condition), success_prob


def wave_plate_stack(hwp_theta: float, qwp_theta: float) -> UnitaryOp:
    """HWP first, then QWP."""
    return qwp(qwp_theta) @ hwp(hwp_theta)


def prepare_input_qubits(hwp3: float, qwp3: float, hwp4: float, qwp4: float) -> PureState:
    hh = basis_state(0, (2, 2))
    u = np.kron(wave_plate_stack(hwp3, qwp3).matrix, wave_plate_stack(hwp4, qwp4).matrix)
    return PureState(DimRegister((2, 2), ("a1", "a2")), u @ hh.amps)


# (hwp3, qwp3, hwp4, qwp4) preparing the three teleported states exactly.
# QWP at 45 deg leaves the diagonal state untouched, QWP at 90 deg leaves V
# untouched and QWP at 0 turns the diagonal state into (H + iV)/sqrt2.
INPUT_ANGLES = {
    "phi1": (math.pi / 8, math.pi / 4, math.pi / 4, math.pi / 2),
    "phi2": (math.pi / 8, math.pi / 4, math.pi / 8, math.pi / 4),
    "phi3": (math.pi / 8, math.pi / 4, math.pi / 8, 0.0),
}


def reference_input_state(name: str) -> PureState:
    s = 1 / math.sqrt(2)
    amps = {
        "phi1": (0, s, 0, s),
        "phi2": (0.5, 0.5, 0.5, 0.5),
        "phi3": (0.5, 0.5j, 0.5, 0.5j),
    }[name]
    return PureState(DimRegister((2, 2), ("a1", "a2")), amps)


def find_waveplate_angles(target: PureState) -> tuple[float, float]:
    """(hwp, qwp) angles preparing a single-qubit ``target`` from |H>, up to phase."""
    if target.dims != (2,):
        raise StateError("waveplates prepare single-qubit states")

    def loss(x):
        out = wave_plate_stack(*x).matrix[:, 0]
        return 1 - abs(np.vdot(target.amps, out)) ** 2

    best = None
    for h0 in np.linspace(0, math.pi / 2, 4, endpoint=False):
        for q0 in np.linspace(0, math.pi, 4, endpoint=False):
            res = minimize(loss, [h0, q0], method="Nelder-Mead",
                           options={"xatol": 1e-12, "fatol": 1e-15, "maxiter": 4000})
            if best is None or res.fun < best.fun:
                best = res
    return float(best.x[0]), float(best.x[1])


def pol_path_bell() -> PureState:
    """(|H,u> + |V,l>)/sqrt2 on one photon."""
    return bell_state(BellKind.PhiPlus)


def bell_projection_pol_path(state: PureState, targets: Sequence[int] = (0, 1)):
    return project(state, pol_path_bell(), list(targets))


@dataclass(frozen=True)
class DetectionPattern:
    """Subspace projector built from ``(targets, basis_vectors)`` factors."""

    factors: tuple = ()

    @classmethod
    def single(cls, targets, vectors):
        return cls(((tuple(targets), tuple(np.asarray(v, dtype=complex) for v in vectors)),))


def postselect_coincidence(state: PureState, pattern: DetectionPattern):
    """Project onto ``pattern``; the state keeps its full register.

    Returns ``(probability, conditioned_state)`` or ``(0.0, EMPTY_BRANCH)``.
    """
    amps = state.amps
    for targets, vectors in pattern.factors:
        vs = np.array(vectors)
        amps = apply_operator(amps, state.dims, vs.T @ vs.conj(), targets)
    prob = float(np.vdot(amps, amps).real)
    if prob < ZERO_PROB:
        return 0.0, EMPTY_BRANCH
    return prob, PureState(state.register, amps / math.sqrt(prob))


# ---------------------------------------------------------------------------
# Preparation pipeline


@dataclass(frozen=True)
class OpticalElement:
    kind: str  # hwp | qwp | bd | pbs | ppbs_cnot | dof_converter | trigger
    targets: tuple[str, ...]
    theta: float = 0.0
    success_prob: float = DEFAULT_CNOT_SUCCESS
    condition: Optional[tuple[str, int]] = None
    project_onto: Optional[str] = None  # trigger: "H", "V", "D" or "A"

    KINDS = ("hwp", "qwp", "bd", "pbs", "ppbs_cnot", "dof_converter", "trigger")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise StateError(f"unknown optical element {self.kind!r}")
        if not math.isfinite(self.theta):
            raise StateError("waveplate angle must be finite")
        if not 0 < self.success_prob <= 1:
            raise StateError("success_prob must be in (0, 1]")
        object.__setattr__(self, "targets", tuple(self.targets))

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "targets": list(self.targets)}
        if self.kind in ("hwp", "qwp"):
            d["theta"] = self.theta
        if self.kind == "ppbs_cnot":
            d["success_prob"] = self.success_prob
        if self.condition is not None:
            d["condition"] = [self.condition[0], self.condition[1]]
        if self.project_onto is not None:
            d["project_onto"] = self.project_onto
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "OpticalElement":
        d = dict(d)
        allowed = {"kind", "targets", "theta", "success_prob", "condition", "project_onto"}
        unknown = set(d) - allowed
        if unknown:
            raise StateError(f"unknown optical element keys {sorted(unknown)}")
        if "condition" in d and d["condition"] is not None:
            label, value = d["condition"]
            d["condition"] = (str(label), int(value))
        targets = d.pop("targets", ())
        if isinstance(targets, str):
            targets = (targets,)
        return cls(targets=tuple(targets), **d)


_TRIGGER_STATES = {
    "H": np.array([1, 0]),
    "V": np.array([0, 1]),
    "D": np.array([1, 1]) / math.sqrt(2),
    "A": np.array([1, -1]) / math.sqrt(2),
}


@dataclass(frozen=True)
class PipelineResult:
    state: PureState
    success_prob: float
    factors: tuple[float, ...]


@dataclass(frozen=True)
class SetupPipeline:
    """Ordered optical elements over a labelled register of qubits.

    ``output`` names the labels kept at the end, in order; the register
    used at the end must match ``output_dims``.
    """

    initial: PureState
    elements: tuple[OpticalElement, ...]
    output: tuple[str, ...]
    output_dims: tuple[int, ...]
    output_labels: Optional[tuple[str, ...]] = None
    factors: tuple[float, ...] = field(default=())

    def run(self) -> PipelineResult:
        state = self.initial
        factors: list[float] = []
        for el in self.elements:
            state, factor = self._apply(state, el)
            if factor is not None:
                factors.append(factor)
        labels = state.register.labels
        if set(self.output) != set(labels) or len(self.output) != len(labels):
            raise StateError(f"declared output {self.output} does not match register {labels}")
        state = permute(state, [labels.index(x) for x in self.output])
        if int(np.prod(state.dims)) != int(np.prod(self.output_dims)):
            raise StateError("declared output dims do not match the constructed state")
        state = regroup(state, DimRegister(self.output_dims, self.output_labels))
        success = 1.0
        for f in factors:
            success *= f
        return PipelineResult(state, success, tuple(factors))

    @staticmethod
    def _apply(state: PureState, el: OpticalElement):
        reg = state.register
        idx = [reg.index_of(t) for t in el.targets]
        if el.kind in ("hwp", "qwp"):
            u = hwp(el.theta) if el.kind == "hwp" else qwp(el.theta)
            if el.condition is None:
                return apply_unitary(state, u, idx), None
            path = reg.index_of(el.condition[0])
            return apply_unitary(state, path_conditioned(u, el.condition[1]),
                                 [idx[0], path]), None
        if el.kind == "bd":
            return apply_unitary(state, beam_displacer(), idx), None
        if el.kind == "dof_converter":
            return apply_unitary(state, dof_converter(), idx), None
        if el.kind == "ppbs_cnot":
            cond = None
            if el.condition is not None:
                cond = (reg.index_of(el.condition[0]), el.condition[1])
            out, p = ppbs_cnot(state, idx[0], idx[1], el.success_prob, cond)
            return out, p
        if el.kind in ("trigger", "pbs"):
            onto = el.project_onto or "H"
            if onto not in _TRIGGER_STATES:
                raise StateError(f"unknown projection {onto!r}")
            prob, rest = project(state, PureState((2,), _TRIGGER_STATES[onto]), idx)
            if rest is EMPTY_BRANCH or rest is None:
                raise StateError("trigger projection leaves no state")
            return rest, prob
        raise StateError(f"unhandled element {el.kind}")

    def with_elements(self, elements: Sequence[OpticalElement]) -> "SetupPipeline":
        return SetupPipeline(self.initial, tuple(elements), self.output,
                             self.output_dims, self.output_labels)


PREP_LABELS = ("a1p", "a1", "b_pol", "b_path", "a2")


def prep_initial_state() -> PureState:
    """|Phi+>_{a1',a1} (x) |Phi+>_{b,a2}, with b's path qubit in u."""
    phi = bell_state(BellKind.PhiPlus)
    s = tensor(phi, phi, basis_state(U_PATH, 2))
    # built as (a1p, a1, b_pol, a2, b_path); move b_path next to b_pol
    s = PureState(DimRegister((2,) * 5, ("a1p", "a1", "b_pol", "a2", "b_path")), s.amps)
    return permute(s, [0, 1, 2, 4, 3])


def prep_elements(success_prob: float = DEFAULT_CNOT_SUCCESS) -> tuple[OpticalElement, ...]:
    return (
        OpticalElement("dof_converter", ("b_pol", "b_path")),
        OpticalElement("ppbs_cnot", ("a1p", "b_pol"), success_prob=success_prob,
                       condition=("b_path", U_PATH)),
        OpticalElement("ppbs_cnot", ("a1", "b_pol"), success_prob=success_prob,
                       condition=("b_path", L_PATH)),
        OpticalElement("trigger", ("a1p",), project_onto="D"),
    )


def prep_pipeline(success_prob: float = DEFAULT_CNOT_SUCCESS) -> SetupPipeline:
    return SetupPipeline(
        initial=prep_initial_state(),
        elements=prep_elements(success_prob),
        output=("a1", "a2", "b_pol", "b_path"),
        output_dims=(2, 2, 4),
        output_labels=("a1", "a2", "b"),
    )


def physical_target() -> PureState:
    """Physical-basis target: (HH Hu + HV Hl + VH Vu + VV Vl)/2 on (a1, a2, b)."""
    amps = np.zeros(16, dtype=complex)
    terms = [("H", "H", "Hu"), ("H", "V", "Hl"), ("V", "H", "Vu"), ("V", "V", "Vl")]
    for p1, p2, pb in terms:
        flat = np.ravel_multi_index(
            (QUBIT_ENCODING[p1], QUBIT_ENCODING[p2], QUQUART_ENCODING[pb]), (2, 2, 4)
        )
        amps[flat] = 0.5
    return PureState(DimRegister((2, 2, 4), ("a1", "a2", "b")), amps)


def simulate_preparation(pipeline: Optional[SetupPipeline] = None):
    """Run the preparation setup; returns ``(state on (a1, a2, b), success_prob)``."""
    result = (pipeline or prep_pipeline()).run()
    return result.state, result.success_prob


def relabel_to_logical(state: PureState) -> PureState:
    """Physical (a1, a2, b) state to logical amplitudes; the encoding is the identity map."""
    return PureState(make_224_state().register, state.amps)


TELEPORT_LABELS = ("a1_pol", "a1_path", "a2_pol", "a2_path", "b")


def teleport_setup_state(resource: PureState, angles: Sequence[float]) -> PureState:
    """Expand a1, a2 through DoF converters and set their polarizations.

    Returns the joint state on ``(a1_pol, a1_path, a2_pol, a2_path, b)``.
    """
    if resource.dims != (2, 2, 4):
        raise StateError("expected a (2, 2, 4) resource")
    hwp3, qwp3, hwp4, qwp4 = angles
    # (a1, a2, b) -> (a1_pol, a1_path, a2_pol, a2_path, b) with both paths in u
    u = basis_state(U_PATH, 2)
    s = tensor(resource, u, u)
    s = PureState(DimRegister((2, 2, 4, 2, 2), ("a1_pol", "a2_pol", "b", "a1_path", "a2_path")), s.amps)
    s = permute(s, [0, 3, 1, 4, 2])
    s = apply_unitary(s, dof_converter(), [0, 1])
    s = apply_unitary(s, dof_converter(), [2, 3])
    s = apply_unitary(s, wave_plate_stack(hwp3, qwp3), [0])
    s = apply_unitary(s, wave_plate_stack(hwp4, qwp4), [2])
    return PureState(DimRegister((2, 2, 2, 2, 4), TELEPORT_LABELS), s.amps)


def teleport_via_optics(angles: Sequence[float], resource: Optional[PureState] = None):
    """Post-selected teleportation through the optical elements.

    Returns ``(b_state, probability)`` where probability is the double
    pol-path Bell projection success.
    """
    resource = resource or relabel_to_logical(simulate_preparation()[0])
    joint = teleport_setup_state(resource, angles)
    p1, rest = bell_projection_pol_path(joint, (0, 1))
    p2, b = bell_projection_pol_path(rest, (0, 1))
    return b, p1 * p2
