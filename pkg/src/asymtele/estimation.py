"""Local Pauli measurements, fidelity witnesses and counting statistics.

Every photon is read out as effective qubits: a1, a2 as polarization qubits
and b as (pol, path). A measurement setting assigns one of X, Y, Z to each
effective qubit; an outcome is a bit string with bit 0 meaning eigenvalue +1
(first effective qubit most significant).

The fidelity with a pure target is linear in the outcome frequencies,

    F = (1/2^n) sum_S <t|S|t> <S>,

so a witness compiles into a constant plus one weight per (setting, outcome).
Correlators containing identities are averaged over every setting that
measures them.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Optional, Sequence

import numpy as np

from .state import (
    EMPTY_BRANCH,
    DimRegister,
    MixedState,
    PureState,
    StateError,
    fidelity_pure,
    project_mixed,
    regroup,
)
from .teleport import (
    BellKind,
    BellOutcomePair,
    bell_state,
    classical_bounds,
    conditional_map,
    make_224_state,
)

PAULIS = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}
_HAD = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
# rotations taking each Pauli eigenbasis to the computational basis
_TO_Z = {
    "X": _HAD,
    "Y": _HAD @ np.diag([1, -1j]),
    "Z": np.eye(2, dtype=complex),
}

EFFECTIVE_224 = ("a1", "a2", "b_pol", "b_path")
WINDOW = (-0.25, 1.25)

_SAMPLE_STREAM = 0
_BOOTSTRAP_STREAM = 1


def sub_rng(seed: int, *keys: int) -> np.random.Generator:
    """Independent generator for (seed, keys...), order-free by construction."""
    if seed < 0:
        raise ValueError("seeds must be non-negative")
    return np.random.default_rng([seed, *keys])


@dataclass(frozen=True)
class MeasurementSetting:
    bases: tuple[str, ...]

    def __post_init__(self):
        bases = tuple(self.bases)
        if not bases or any(b not in "XYZ" or len(b) != 1 for b in bases):
            raise ValueError(f"bad measurement setting {bases!r}")
        object.__setattr__(self, "bases", bases)

    @property
    def label(self) -> str:
        return "".join(self.bases)

    @classmethod
    def parse(cls, label: str) -> "MeasurementSetting":
        return cls(tuple(label))

    def __len__(self):
        return len(self.bases)


def outcome_labels(n: int) -> list[str]:
    return ["".join("+-"[b] for b in bits) for bits in itertools.product((0, 1), repeat=n)]


@dataclass(frozen=True, eq=False)
class CountsRecord:
    setting: MeasurementSetting
    counts: np.ndarray
    total: int = -1

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.shape != (2 ** len(self.setting),):
            raise ValueError(f"expected {2 ** len(self.setting)} outcome counts")
        if np.any(counts < 0):
            raise ValueError("counts must be non-negative")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)
        total = int(counts.sum())
        if self.total != -1 and self.total != total:
            raise ValueError(f"counts sum to {total}, not {self.total}")
        object.__setattr__(self, "total", total)

    def frequencies(self) -> np.ndarray:
        if self.total <= 0:
            raise ValueError(f"setting {self.setting.label} has zero total counts")
        return self.counts / self.total

    def scaled(self, factor: int) -> "CountsRecord":
        return CountsRecord(self.setting, self.counts * factor)

    def to_row(self) -> dict:
        row = {"setting": self.setting.label}
        for lab, c in zip(outcome_labels(len(self.setting)), self.counts):
            row[lab] = int(c)
        row["total"] = self.total
        return row

    @classmethod
    def from_row(cls, row: dict) -> "CountsRecord":
        setting = MeasurementSetting.parse(str(row["setting"]))
        counts = [int(row[lab]) for lab in outcome_labels(len(setting))]
        return cls(setting, counts, int(row["total"]))


@dataclass(frozen=True, eq=False)
class ExactRecord:
    """Outcome probabilities standing in for counts (infinite statistics)."""

    setting: MeasurementSetting
    probs: np.ndarray

    def frequencies(self) -> np.ndarray:
        return np.asarray(self.probs, dtype=float)


@dataclass(frozen=True)
class FidelityEstimate:
    value: float
    std_error: float = 0.0
    method: str = "exact"
    raw: float = float("nan")
    in_window: bool = True

    @classmethod
    def from_raw(cls, raw: float, std_error: float = 0.0, method: str = "exact"):
        raw = float(raw)
        return cls(
            value=min(1.0, max(0.0, raw)),
            std_error=float(std_error),
            method=method,
            raw=raw,
            in_window=WINDOW[0] <= raw <= WINDOW[1],
        )


@dataclass(frozen=True)
class NoiseModel:
    """White-noise weight ``p`` of the ideal state (1 is noiseless)."""

    p: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"white-noise weight {self.p} outside [0, 1]")

    def apply(self, psi: PureState) -> MixedState:
        return white_noise(psi, self.p)


def white_noise(psi: PureState, p: float) -> MixedState:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"white-noise weight {p} outside [0, 1]")
    d = psi.register.total
    return MixedState(psi.register, p * psi.projector() + (1 - p) * np.eye(d) / d)


def _as_qubits(rho: MixedState) -> MixedState:
    n = int(round(math.log2(rho.register.total)))
    if 2 ** n != rho.register.total:
        raise StateError(f"register {rho.dims} is not made of effective qubits")
    return regroup(rho, (2,) * n)


def outcome_probabilities(rho: MixedState | PureState, setting: MeasurementSetting) -> np.ndarray:
    """Joint +/-1 outcome probabilities of a local Pauli setting."""
    if isinstance(rho, PureState):
        rho = rho.to_mixed()
    rho = _as_qubits(rho)
    if len(rho.dims) != len(setting):
        raise StateError(
            f"setting {setting.label} has {len(setting)} qubits, state has {len(rho.dims)}"
        )
    u = np.array([[1]], dtype=complex)
    for b in setting.bases:
        u = np.kron(u, _TO_Z[b])
    probs = np.real(np.einsum("ij,jk,ik->i", u, rho.matrix, u.conj()))
    probs = np.clip(probs, 0.0, None)
    return probs / probs.sum()


def _parity_signs(mask: Sequence[bool]) -> np.ndarray:
    n = len(mask)
    signs = np.ones(2 ** n)
    for idx, bits in enumerate(itertools.product((0, 1), repeat=n)):
        if sum(b for b, m in zip(bits, mask) if m) % 2:
            signs[idx] = -1
    return signs


@dataclass(frozen=True, eq=False)
class PauliFidelityWitness:
    """Fidelity with ``target`` from local Pauli settings."""

    n_qubits: int
    settings: tuple[MeasurementSetting, ...]
    coefficients: dict = field(repr=False)
    constant: float = 0.0
    weights: np.ndarray = field(default=None, repr=False)

    @classmethod
    def for_state(cls, target: PureState, settings: Optional[Sequence[MeasurementSetting]] = None,
                  tol: float = 1e-12) -> "PauliFidelityWitness":
        n = int(round(math.log2(target.register.total)))
        if 2 ** n != target.register.total:
            raise StateError("target must live on effective qubits")
        amps = target.amps
        coeffs = {}
        for string in itertools.product("IXYZ", repeat=n):
            op = np.array([[1]], dtype=complex)
            for s in string:
                op = np.kron(op, PAULIS[s])
            c = float(np.vdot(amps, op @ amps).real) / 2 ** n
            if abs(c) > tol:
                coeffs["".join(string)] = c
        if settings is None:
            settings = cls._covering_settings(coeffs, n)
        settings = tuple(settings)
        constant = coeffs.get("I" * n, 0.0)
        weights = np.zeros((len(settings), 2 ** n))
        for string, c in coeffs.items():
            if string == "I" * n:
                continue
            compatible = [
                k for k, st in enumerate(settings)
                if all(s == "I" or s == b for s, b in zip(string, st.bases))
            ]
            if not compatible:
                raise StateError(f"no setting measures correlator {string}")
            signs = _parity_signs([s != "I" for s in string])
            for k in compatible:
                weights[k] += c * signs / len(compatible)
        weights.setflags(write=False)
        return cls(n, settings, coeffs, constant, weights)

    @staticmethod
    def _covering_settings(coeffs: dict, n: int) -> list[MeasurementSetting]:
        chosen: list[str] = []
        for string in sorted(coeffs):
            if "I" not in string and string not in chosen:
                chosen.append(string)
        for string in sorted(coeffs):
            if string == "I" * n:
                continue
            covered = any(all(s == "I" or s == b for s, b in zip(string, c)) for c in chosen)
            if not covered:
                chosen.append(string.replace("I", "Z"))
        if "Z" * n not in chosen:
            chosen.insert(0, "Z" * n)
        return [MeasurementSetting(tuple(c)) for c in chosen]

    def evaluate(self, freqs: np.ndarray) -> np.ndarray:
        """Witness value for frequency arrays of shape (..., n_settings, 2**n)."""
        return self.constant + np.einsum("...ko,ko->...", freqs, self.weights)

    def frequencies(self, records) -> np.ndarray:
        by_label = {r.setting.label: r for r in records}
        missing = [s.label for s in self.settings if s.label not in by_label]
        if missing:
            raise ValueError(f"missing records for settings {missing}")
        return np.stack([by_label[s.label].frequencies() for s in self.settings])

    def counts(self, records) -> np.ndarray:
        by_label = {r.setting.label: r for r in records}
        missing = [s.label for s in self.settings if s.label not in by_label]
        if missing:
            raise ValueError(f"missing records for settings {missing}")
        return np.stack([by_label[s.label].counts for s in self.settings])

    def exact_records(self, rho: MixedState) -> list[ExactRecord]:
        return [ExactRecord(s, outcome_probabilities(rho, s)) for s in self.settings]

    def estimate(self, records, bootstrap_iters: int = 0, seed: int = 0) -> FidelityEstimate:
        raw = float(self.evaluate(self.frequencies(records)))
        if bootstrap_iters:
            err = poisson_bootstrap(records, bootstrap_iters, seed, witness=self)
            return FidelityEstimate.from_raw(raw, err, "bootstrap")
        return FidelityEstimate.from_raw(raw)


def nine_settings() -> tuple[MeasurementSetting, ...]:
    """(A, B, A, B) on (a1, a2, b_pol, b_path) for A, B in X, Y, Z."""
    return tuple(MeasurementSetting((a, b, a, b)) for a in "XYZ" for b in "XYZ")


@lru_cache(maxsize=None)
def witness_224() -> PauliFidelityWitness:
    target = regroup(make_224_state(), DimRegister((2, 2, 2, 2), EFFECTIVE_224))
    return PauliFidelityWitness.for_state(target, nine_settings())


def fidelity_witness_224(records, bootstrap_iters: int = 0, seed: int = 0) -> FidelityEstimate:
    """(2, 2, 4) fidelity from one record per nine-setting basis."""
    return witness_224().estimate(records, bootstrap_iters, seed)


def sample_counts(probs, total: int, seed: int, setting: Optional[MeasurementSetting] = None,
                  rng: Optional[np.random.Generator] = None) -> CountsRecord:
    probs = np.asarray(probs, dtype=float)
    n = int(round(math.log2(len(probs))))
    if 2 ** n != len(probs):
        raise ValueError("need 2**n outcome probabilities")
    if np.any(probs < -1e-12) or abs(probs.sum() - 1) > 1e-9:
        raise ValueError("probabilities must be non-negative and sum to 1")
    if total < 0:
        raise ValueError("total must be non-negative")
    probs = np.clip(probs, 0, None)
    probs = probs / probs.sum()
    rng = rng if rng is not None else np.random.default_rng(seed)
    counts = rng.multinomial(int(total), probs)
    return CountsRecord(setting or MeasurementSetting(("Z",) * n), counts)


def sample_records(witness: PauliFidelityWitness, rho: MixedState, total: int,
                   seed: int) -> list[CountsRecord]:
    """Counts for each witness setting, one derived stream per setting."""
    return [
        sample_counts(outcome_probabilities(rho, s), total, seed, s,
                      rng=sub_rng(seed, _SAMPLE_STREAM, k))
        for k, s in enumerate(witness.settings)
    ]


def poisson_bootstrap(records, iterations: int, seed: int,
                      witness: Optional[PauliFidelityWitness] = None) -> float:
    """Spread of the estimator when every count is redrawn as Poisson(observed)."""
    if iterations < 100:
        raise ValueError("bootstrap needs at least 100 iterations")
    witness = witness or witness_224()
    counts = witness.counts(records)
    values = np.empty(iterations)
    for i in range(iterations):
        rng = sub_rng(seed, _BOOTSTRAP_STREAM, i)
        draw = rng.poisson(counts)
        totals = draw.sum(axis=1)
        while np.any(totals == 0):
            # a setting with no events carries no frequency; redraw it
            draw = rng.poisson(counts)
            totals = draw.sum(axis=1)
        values[i] = witness.evaluate(draw / totals[:, None])
    return float(np.std(values, ddof=1))


def expected_counts(rate_hz: float, duration_s: float) -> int:
    """Coincidences in ``duration_s``, rounded half up to an integer."""
    if rate_hz <= 0 or duration_s <= 0:
        raise ValueError("rate and duration must be positive")
    return int(math.floor(rate_hz * duration_s + 0.5))


def noise_for_fidelity(target: float, dim: int = 16) -> float:
    """White-noise weight giving resource fidelity ``target``."""
    return (target - 1 / dim) / (1 - 1 / dim)


def estimate_resource_fidelity(p: float, total: int, seed: int,
                               bootstrap_iters: int = 0):
    """Sample the nine settings on the white-noise resource and estimate F."""
    rho = white_noise(make_224_state(), p)
    records = sample_records(witness_224(), rho, total, seed)
    return fidelity_witness_224(records, bootstrap_iters, seed), records


# ---------------------------------------------------------------------------
# Teleportation fidelity


PHI_PLUS_PAIR = BellOutcomePair(BellKind.PhiPlus, BellKind.PhiPlus)


def noisy_teleport_output(state: PureState, resource: MixedState,
                          outcome: BellOutcomePair = PHI_PLUS_PAIR):
    """Post-selected b state from input (x) noisy resource; returns (rho_b, prob)."""
    if state.dims == (4,):
        state = regroup(state, (2, 2))
    joint = np.kron(state.projector(), resource.matrix)
    rho = MixedState((2, 2, 2, 2, 4), joint)
    pair = PureState((2, 2, 2, 2), np.kron(bell_state(outcome.first).amps,
                                           bell_state(outcome.second).amps))
    prob, rho_b = project_mixed(rho, pair, [0, 2, 1, 3])
    if rho_b is EMPTY_BRANCH:
        raise StateError("post-selected outcome has zero probability")
    return rho_b, prob


@dataclass(frozen=True)
class TeleportReport:
    input_amps: np.ndarray
    noise: NoiseModel
    outcome: BellOutcomePair
    success_prob: float
    exact_fidelity: float
    estimate: FidelityEstimate
    records: tuple[CountsRecord, ...]
    exact_probs: dict
    above_estimation_limit: bool
    above_ququart_limit: bool


def teleport_fidelity_report(state: PureState, noise: NoiseModel, total_counts: int,
                             seed: int, bootstrap_iters: int = 1000,
                             outcome: BellOutcomePair = PHI_PLUS_PAIR) -> TeleportReport:
    """Post-selected teleportation on a white-noise resource, read out on b."""
    if state.dims == (4,):
        state = regroup(state, (2, 2))
    resource = noise.apply(make_224_state())
    rho_b, prob = noisy_teleport_output(state, resource, outcome)
    target = PureState((4,), conditional_map(outcome) @ state.amps)
    exact = fidelity_pure(target, rho_b)
    qubit_target = regroup(target, DimRegister((2, 2), ("b_pol", "b_path")))
    witness = PauliFidelityWitness.for_state(qubit_target)
    rho_q = regroup(rho_b, (2, 2))
    records = sample_records(witness, rho_q, total_counts, seed)
    if total_counts > 0:
        est = witness.estimate(records, bootstrap_iters, seed)
    else:
        est = witness.estimate(witness.exact_records(rho_q))
    lo, hi = classical_bounds()
    return TeleportReport(
        input_amps=state.amps,
        noise=noise,
        outcome=outcome,
        success_prob=prob,
        exact_fidelity=exact,
        estimate=est,
        records=tuple(records),
        exact_probs={s.label: outcome_probabilities(rho_q, s) for s in witness.settings},
        above_estimation_limit=est.value > lo,
        above_ququart_limit=est.value > hi,
    )
