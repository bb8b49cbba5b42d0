import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from asymtele.photonics import (
    DEFAULT_CNOT_SUCCESS,
    PREP_ENCODING,
    INPUT_ANGLES,
    DetectionPattern,
    OpticalElement,
    SetupPipeline,
    beam_displacer,
    bell_projection_pol_path,
    cnot_on,
    dof_converter,
    dof_converter_collapse,
    dof_converter_expand,
    physical_target,
    prep_pipeline,
    find_waveplate_angles,
    hwp,
    reference_input_state,
    path_conditioned,
    pol_path_bell,
    postselect_coincidence,
    ppbs_cnot,
    prepare_input_qubits,
    qwp,
    relabel_to_logical,
    simulate_preparation,
    teleport_setup_state,
    teleport_via_optics,
    wave_plate_stack,
)
from asymtele.state import (
    EMPTY_BRANCH,
    DimRegister,
    PureState,
    StateError,
    basis_state,
    fidelity_pure,
    partial_trace,
    permute,
    regroup,
    tensor,
)
from asymtele.teleport import make_224_state, random_state

angles = st.floats(min_value=-10, max_value=10, allow_nan=False)
H = basis_state(0, 2)
VV = basis_state(1, 2)
PLUS = PureState((2,), [1 / math.sqrt(2), 1 / math.sqrt(2)])


class TestWaveplates:
    def test_hwp(self):
        np.testing.assert_allclose(hwp(0).matrix, np.diag([1, -1]), atol=1e-15)
        np.testing.assert_allclose(hwp(math.pi / 8).matrix @ H.amps, PLUS.amps, atol=1e-15)
        np.testing.assert_allclose(hwp(math.pi / 4).matrix, [[0, 1], [1, 0]], atol=1e-15)

    def test_qwp(self):
        np.testing.assert_allclose(qwp(0).matrix, np.diag([1, 1j]), atol=1e-15)
        out = qwp(math.pi / 4).matrix @ H.amps
        assert abs(out[0]) ** 2 == pytest.approx(0.5)
        assert abs(out[0] * out[1].conj() - out[0].conj() * out[1]) > 0.9  # circular

    @given(angles)
    def test_unitary(self, theta):
        for u in (hwp(theta), qwp(theta), path_conditioned(hwp(theta), 1)):
            np.testing.assert_allclose(u.matrix.conj().T @ u.matrix, np.eye(u.dim), atol=1e-10)

    def test_find_angles(self):
        target = PureState((2,), [0.6, 0.8j])
        h, q = find_waveplate_angles(target)
        out = PureState((2,), wave_plate_stack(h, q).matrix[:, 0])
        assert abs(out.inner(target)) ** 2 == pytest.approx(1, abs=1e-9)


class TestConverter:
    def test_h_to_hu(self):
        assert dof_converter_expand(H).equals(basis_state((0, 0), (2, 2)))

    def test_v_to_hl(self):
        assert dof_converter_expand(VV).equals(basis_state((0, 1), (2, 2)))

    @given(st.integers(0, 2**32 - 1))
    def test_isometry(self, seed):
        s = random_state((2,), np.random.default_rng(seed))
        out = dof_converter_expand(s)
        assert abs(np.linalg.norm(out.amps) - 1) < 1e-12
        assert dof_converter_collapse(out).equals_up_to_phase(s)
        assert dof_converter_collapse(out).equals(s, atol=1e-12)

    def test_collapse_rejects_outside_image(self):
        with pytest.raises(StateError):
            dof_converter_collapse(basis_state((1, 1), (2, 2)))

    def test_physical_target_maps_to_logical(self):
        # converting both a1 and a2 leaves their polarizations at H
        target = np.zeros((2, 2, 2, 2, 4), dtype=complex)
        for p1 in (0, 1):
            for p2 in (0, 1):
                target[0, p1, 0, p2, 2 * p1 + p2] = 0.5
        joint = teleport_setup_state(make_224_state(), (0, 0, 0, 0))
        # no polarization waveplate: angles 0 give HWP(0)=diag(1,-1) and QWP(0)=diag(1,i);
        # both act trivially on |H>
        assert joint.equals(PureState(joint.register, target.ravel()))

    def test_beam_displacer(self):
        assert np.array_equal(beam_displacer().matrix @ [0, 0, 1, 0], [0, 0, 0, 1])
        assert dof_converter().dim == 4


class TestCnot:
    def test_truth_table(self):
        vh = basis_state((1, 0), (2, 2))
        assert cnot_on(vh, 0, 1).equals(basis_state((1, 1), (2, 2)))
        hh = basis_state((0, 0), (2, 2))
        assert cnot_on(hh, 0, 1).equals(hh)

    def test_success_accumulates(self):
        vh = basis_state((1, 0), (2, 2))
        s, p1 = ppbs_cnot(vh, 0, 1)
        s, p2 = ppbs_cnot(s, 0, 1)
        assert p1 * p2 == DEFAULT_CNOT_SUCCESS ** 2 == (1 / 9) ** 2
        assert s.equals(vh)

    def test_non_qubit(self):
        with pytest.raises(StateError):
            cnot_on(basis_state(0, (4, 2)), 0, 1)

    def test_conditioned(self):
        # condition on subsystem 2 being 1: only then flip
        s = basis_state((1, 0, 0), (2, 2, 2))
        assert cnot_on(s, 0, 1, condition=(2, 1)).equals(s)
        s1 = basis_state((1, 0, 1), (2, 2, 2))
        assert cnot_on(s1, 0, 1, condition=(2, 1)).equals(basis_state((1, 1, 1), (2, 2, 2)))


class TestInputPreparation:
    @pytest.mark.parametrize("name", ["phi1", "phi2", "phi3"])
    def test_reference_states(self, name):
        assert prepare_input_qubits(*INPUT_ANGLES[name]).equals(reference_input_state(name), atol=1e-14)

    def test_phi1_amplitudes(self):
        np.testing.assert_allclose(reference_input_state("phi1").amps, [0, 2**-0.5, 0, 2**-0.5])


class TestBellProjection:
    def test_bell_input(self):
        assert bell_projection_pol_path(pol_path_bell())[0] == pytest.approx(1)

    def test_orthogonal(self):
        prob, rest = bell_projection_pol_path(basis_state((0, 1), (2, 2)))
        assert prob == 0 and rest is EMPTY_BRANCH

    @pytest.mark.parametrize("name", ["phi1", "phi2", "phi3"])
    def test_optical_teleport(self, name):
        b, prob = teleport_via_optics(INPUT_ANGLES[name])
        assert b.equals(PureState((4,), reference_input_state(name).amps), atol=1e-10)
        assert prob == pytest.approx(1 / 16, abs=1e-12)

    def test_single_projection_quarter(self):
        joint = teleport_setup_state(make_224_state(), INPUT_ANGLES["phi2"])
        assert bell_projection_pol_path(joint, (0, 1))[0] == pytest.approx(0.25)


class TestPostselect:
    def test_full_space(self, rng):
        s = random_state((2, 2), rng)
        prob, out = postselect_coincidence(s, DetectionPattern.single([0, 1], np.eye(4)))
        assert prob == pytest.approx(1) and out.equals(s)

    def test_orthogonal(self):
        prob, out = postselect_coincidence(basis_state(0, 2), DetectionPattern.single([0], [[0, 1]]))
        assert prob == 0 and out is EMPTY_BRANCH

    def test_matches_bell_projection(self):
        joint = teleport_setup_state(make_224_state(), INPUT_ANGLES["phi3"])
        bell = pol_path_bell().amps
        pattern = DetectionPattern(((( 0, 1), (bell,)), ((2, 3), (bell,))))
        prob, cond = postselect_coincidence(joint, pattern)
        b, p_ref = teleport_via_optics(INPUT_ANGLES["phi3"])
        assert prob == pytest.approx(p_ref, abs=1e-12)
        expected = tensor(pol_path_bell(), pol_path_bell(), b)
        assert cond.equals(PureState(cond.register, expected.amps), atol=1e-12)


class TestFig2:
    def test_physical_target(self):
        state, success = simulate_preparation()
        assert state.equals_up_to_phase(physical_target(), atol=1e-10)
        assert fidelity_pure(physical_target(), state.to_mixed()) == pytest.approx(1, abs=1e-10)
        assert success == pytest.approx(DEFAULT_CNOT_SUCCESS ** 2 * 0.5)

    def test_logical_relabel(self):
        state, _ = simulate_preparation()
        assert relabel_to_logical(state).equals_up_to_phase(make_224_state(), atol=1e-10)
        assert PREP_ENCODING[2].index("Vu") == 2 and PREP_ENCODING[0].label(1) == "V"

    def test_b_maximally_mixed(self):
        state, _ = simulate_preparation()
        np.testing.assert_allclose(partial_trace(state.to_mixed(), [2]).matrix, np.eye(4) / 4, atol=1e-12)

    def test_success_product(self):
        res = prep_pipeline(success_prob=0.3).run()
        manual = 1.0
        for f in res.factors:
            manual *= f
        assert res.success_prob == manual
        assert res.factors[:2] == (0.3, 0.3)

    def test_element_round_trip(self):
        for el in prep_pipeline().elements:
            assert OpticalElement.from_dict(el.to_dict()) == el

    def test_declared_output_mismatch(self):
        p = prep_pipeline()
        bad = SetupPipeline(p.initial, p.elements, ("a1", "a2", "b_pol"), (2, 2, 2))
        with pytest.raises(StateError):
            bad.run()

    def test_missing_cnot_breaks_target(self):
        p = prep_pipeline()
        state, _ = simulate_preparation(p.with_elements(p.elements[:2] + p.elements[3:]))
        assert fidelity_pure(physical_target(), state.to_mixed()) < 0.9

    def test_bad_element(self):
        with pytest.raises(StateError):
            OpticalElement("laser", ("a1",))
        with pytest.raises(StateError):
            OpticalElement("ppbs_cnot", ("a1", "b"), success_prob=0)
        with pytest.raises(StateError):
            OpticalElement.from_dict({"kind": "hwp", "targets": ["a1"], "angle": 1})
