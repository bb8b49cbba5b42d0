import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from asymtele.estimation import (
    CountsRecord,
    ExactRecord,
    FidelityEstimate,
    MeasurementSetting,
    NoiseModel,
    PauliFidelityWitness,
    estimate_resource_fidelity,
    expected_counts,
    fidelity_witness_224,
    noise_for_fidelity,
    noisy_teleport_output,
    nine_settings,
    outcome_labels,
    outcome_probabilities,
    poisson_bootstrap,
    sample_counts,
    sample_records,
    teleport_fidelity_report,
    white_noise,
    witness_224,
)
from asymtele.photonics import reference_input_state
from asymtele.state import MixedState, PureState, fidelity_pure, regroup
from asymtele.teleport import make_224_state, random_state
from conftest import random_density

PSI = make_224_state()


def exact_records(rho):
    return witness_224().exact_records(rho)


class TestSettings:
    def test_nine(self):
        s = nine_settings()
        assert len(s) == 9 and len({x.label for x in s}) == 9
        assert MeasurementSetting(("Z",) * 4) in s
        assert all(x.bases[0] == x.bases[2] and x.bases[1] == x.bases[3] for x in s)

    def test_covering_reproduces_nine(self):
        w = PauliFidelityWitness.for_state(regroup(PSI, (2, 2, 2, 2)))
        assert {s.label for s in w.settings} == {s.label for s in nine_settings()}

    def test_bad_setting(self):
        with pytest.raises(ValueError):
            MeasurementSetting(("X", "I"))


class TestProbabilities:
    def test_ideal_zzzz(self):
        probs = outcome_probabilities(PSI.to_mixed(), MeasurementSetting(tuple("ZZZZ")))
        labels = outcome_labels(4)
        expected = {"++++", "+-+-", "-+-+", "----"}
        for lab, p in zip(labels, probs):
            assert p == pytest.approx(0.25 if lab in expected else 0, abs=1e-15)

    def test_ideal_xxxx(self):
        # Phi+ pairs are +1 eigenstates of XX: only even parity on (a1,b_pol) and (a2,b_path)
        probs = outcome_probabilities(PSI.to_mixed(), MeasurementSetting(tuple("XXXX")))
        assert probs[[0, 5, 10, 15]].sum() == pytest.approx(1)

    def test_mixed(self):
        probs = outcome_probabilities(MixedState.maximally_mixed((2, 2, 4)), nine_settings()[4])
        np.testing.assert_allclose(probs, 1 / 16, atol=1e-15)

    def test_random(self, rng):
        rho = MixedState((2, 2, 4), random_density(rng, 16))
        for s in nine_settings():
            p = outcome_probabilities(rho, s)
            assert np.all(p >= 0) and abs(p.sum() - 1) < 1e-12

    def test_mismatch(self):
        with pytest.raises(ValueError):
            outcome_probabilities(PSI.to_mixed(), MeasurementSetting(("Z", "Z")))


class TestWitness:
    def test_ideal(self):
        assert fidelity_witness_224(exact_records(PSI.to_mixed())).value == pytest.approx(1, abs=1e-12)

    @pytest.mark.parametrize("p", [0.0, 0.25, noise_for_fidelity(0.72), 1.0])
    def test_white_noise(self, p):
        f = fidelity_witness_224(exact_records(white_noise(PSI, p)))
        assert f.raw == pytest.approx(p + (1 - p) / 16, abs=1e-10)

    def test_random_matches_direct(self, rng):
        for _ in range(100):
            rho = MixedState((2, 2, 4), random_density(rng, 16, rank=rng.integers(1, 17)))
            est = fidelity_witness_224(exact_records(rho))
            assert abs(est.raw - fidelity_pure(PSI, rho)) < 1e-10

    def test_noise_for_fidelity(self):
        p = noise_for_fidelity(0.72)
        assert p == pytest.approx(0.7013333333333333)
        assert p + (1 - p) / 16 == pytest.approx(0.72, abs=1e-15)

    def test_monotone(self):
        ps = np.linspace(0, 1, 21)
        vals = [fidelity_witness_224(exact_records(white_noise(PSI, p))).raw for p in ps]
        assert np.all(np.diff(vals) > 0)

    def test_missing_setting(self):
        recs = exact_records(PSI.to_mixed())[:-1]
        with pytest.raises(ValueError):
            fidelity_witness_224(recs)

    def test_zero_total(self):
        recs = [CountsRecord(s, np.zeros(16, dtype=int)) for s in nine_settings()]
        with pytest.raises(ValueError):
            fidelity_witness_224(recs)

    def test_window_flag(self):
        assert not FidelityEstimate.from_raw(1.3).in_window
        assert FidelityEstimate.from_raw(1.1).value == 1.0

    @pytest.mark.parametrize("name", ["phi1", "phi2", "phi3"])
    def test_two_qubit_target(self, name, rng):
        target = regroup(reference_input_state(name), (2, 2))
        w = PauliFidelityWitness.for_state(target)
        assert "ZZ" in {s.label for s in w.settings}
        rho = MixedState((2, 2), random_density(rng, 4))
        assert w.estimate(w.exact_records(rho)).raw == pytest.approx(fidelity_pure(target, rho), abs=1e-12)

    def test_entangled_target(self, rng):
        target = random_state((2, 2), rng)
        w = PauliFidelityWitness.for_state(target)
        rho = MixedState((2, 2), random_density(rng, 4))
        assert w.estimate(w.exact_records(rho)).raw == pytest.approx(fidelity_pure(target, rho), abs=1e-12)


class TestSampling:
    def test_zero_total(self):
        rec = sample_counts(np.full(16, 1 / 16), 0, seed=1)
        assert rec.total == 0 and not rec.counts.any()

    def test_deterministic_outcome(self):
        probs = np.zeros(16)
        probs[0] = 1
        assert sample_counts(probs, 100, seed=3).counts[0] == 100

    def test_ideal_zzzz_large(self):
        probs = outcome_probabilities(PSI.to_mixed(), MeasurementSetting(tuple("ZZZZ")))
        rec = sample_counts(probs, 10**6, seed=11)
        sigma = np.sqrt(10**6 * 0.25 * 0.75)
        for i in (0, 5, 10, 15):
            assert abs(rec.counts[i] - 250_000) < 5 * sigma
        assert rec.total == 10**6

    def test_seeded(self):
        p = np.full(16, 1 / 16)
        assert np.array_equal(sample_counts(p, 500, 4).counts, sample_counts(p, 500, 4).counts)

    def test_invalid(self):
        with pytest.raises(ValueError):
            sample_counts(np.full(16, 0.1), 10, 0)
        with pytest.raises(ValueError):
            sample_counts(np.full(16, 1 / 16), -1, 0)

    def test_row_round_trip(self):
        rec = sample_counts(np.full(16, 1 / 16), 77, 2, nine_settings()[3])
        row = rec.to_row()
        assert row["setting"] == "YXYX" and row["total"] == 77 and len(row) == 18
        back = CountsRecord.from_row(row)
        assert back.setting == rec.setting and np.array_equal(back.counts, rec.counts)

    def test_counts_total_checked(self):
        with pytest.raises(ValueError):
            CountsRecord(nine_settings()[0], np.ones(16, dtype=int), total=3)


class TestBootstrap:
    def _records(self, p, total, seed):
        return sample_records(witness_224(), white_noise(PSI, p), total, seed)

    def test_deterministic(self):
        recs = self._records(0.7, 1830, 1)
        assert poisson_bootstrap(recs, 200, 9) == poisson_bootstrap(recs, 200, 9)

    def test_ideal_zero(self):
        recs = self._records(1.0, 10**5, 2)
        assert poisson_bootstrap(recs, 200, 1) < 1e-12

    def test_scale_law(self):
        recs = self._records(0.7, 1830, 5)
        big = [r.scaled(4) for r in recs]
        ratio = poisson_bootstrap(big, 1000, 5) / poisson_bootstrap(recs, 1000, 5)
        assert ratio == pytest.approx(0.5, rel=0.15)

    def test_iterations_floor(self):
        with pytest.raises(ValueError):
            poisson_bootstrap(self._records(0.7, 100, 0), 50, 0)

    def test_matches_sampling_spread(self):
        p = noise_for_fidelity(0.72)
        spread = np.std([estimate_resource_fidelity(p, 1830, s)[0].raw for s in range(200)])
        boot = poisson_bootstrap(self._records(p, 1830, 1), 1000, 1)
        assert boot == pytest.approx(spread, rel=0.25)

    def test_consistency(self):
        p = 0.6
        exact = p + (1 - p) / 16
        mean_err = []
        for total in (10**3, 10**4, 10**5, 10**6):
            errs, hits = [], 0
            for seed in range(100):
                est, _ = estimate_resource_fidelity(p, total, seed, bootstrap_iters=100)
                errs.append(abs(est.raw - exact))
                hits += abs(est.raw - exact) <= 5 * est.std_error
            assert hits >= 95
            mean_err.append(np.mean(errs))
        assert np.all(np.diff(mean_err) < 0)


class TestNoiseAndCounts:
    def test_white_noise_limits(self):
        np.testing.assert_allclose(white_noise(PSI, 1).matrix, PSI.projector(), atol=1e-15)
        np.testing.assert_allclose(white_noise(PSI, 0).matrix, np.eye(16) / 16, atol=1e-15)

    @given(st.floats(0, 1))
    def test_white_noise_fidelity(self, p):
        psi = make_224_state()
        assert fidelity_pure(psi, white_noise(psi, p)) == pytest.approx(p + (1 - p) / 16, abs=1e-12)

    def test_range(self):
        with pytest.raises(ValueError):
            white_noise(PSI, 1.2)
        with pytest.raises(ValueError):
            NoiseModel(-0.1)

    def test_expected_counts(self):
        assert expected_counts(0.183, 10_000) == 1830
        assert expected_counts(1, 60) == 60
        assert expected_counts(0.183, 1) == 0
        assert expected_counts(0.5, 1) == 1
        with pytest.raises(ValueError):
            expected_counts(0, 10)


class TestTeleportReport:
    def test_noisy_output_law(self):
        for p in (0.0, 0.4, 1.0):
            rho_b, prob = noisy_teleport_output(reference_input_state("phi2"), white_noise(PSI, p))
            target = PureState((4,), reference_input_state("phi2").amps)
            assert prob == pytest.approx(1 / 16)
            assert fidelity_pure(target, rho_b) == pytest.approx(p + (1 - p) / 4, abs=1e-12)

    @pytest.mark.parametrize("name", ["phi1", "phi2", "phi3"])
    def test_ideal(self, name):
        rep = teleport_fidelity_report(reference_input_state(name), NoiseModel(1.0), 5000, 3, 200)
        assert rep.exact_fidelity == pytest.approx(1, abs=1e-12)
        assert rep.estimate.value == pytest.approx(1, abs=1e-9)
        assert rep.above_estimation_limit and rep.above_ququart_limit
        assert "ZZ" in rep.exact_probs

    def test_noisy(self):
        rep = teleport_fidelity_report(reference_input_state("phi3"), NoiseModel(0.3), 10**5, 1, 200)
        assert rep.exact_fidelity == pytest.approx(0.475)
        assert abs(rep.estimate.value - 0.475) < 5 * rep.estimate.std_error + 1e-3
        assert rep.above_estimation_limit and not rep.above_ququart_limit

    def test_exact_mode(self):
        rep = teleport_fidelity_report(reference_input_state("phi1"), NoiseModel(0.5), 0, 0)
        assert rep.estimate.raw == pytest.approx(0.625, abs=1e-12)
