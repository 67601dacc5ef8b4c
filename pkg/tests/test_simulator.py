"""Sample sources, the labeling operator, and the measurement engine."""

import itertools

import numpy as np
import pytest

from qfl.compatibility import Cover
from qfl.operators import maximally_mixed, partial_trace_label, validate_povm
from qfl.pauli import (
    DegreeSet,
    FourierTable,
    PauliString,
    classical_embedding,
    fourier_coefficient,
    pauli_matrix,
    synthesize,
)
from qfl.simulator import (
    LabeledSample,
    RandomStreams,
    draw_sample,
    draw_samples,
    estimation_observable,
    group_samples,
    labeling_operator,
    load_source,
    make_classical_source,
    make_custom_source,
    make_noisy_source,
    make_realizable_source,
    matrix_from_text,
    matrix_to_text,
    measure,
    measure_batch,
    measure_batch_groups,
    save_matrix,
)

from conftest import joint_state, make_bell_source, make_parity_source, random_density

P = PauliString.from_digits


def joint_probabilities(sample_state, label, batch):
    """Dense oracle: enumerate the fine-grained product effects for a batch."""
    e = np.zeros((2, 2), dtype=complex)
    e[label, label] = 1.0
    joint = np.kron(sample_state, e)
    probs = {}
    for w in itertools.product((1, -1), repeat=len(batch)):
        g = np.eye(joint.shape[0], dtype=complex)
        for choice, s in zip(w, batch):
            plus, minus = estimation_observable(s)
            g = g @ (plus if choice == 1 else minus)
        probs[w] = float(np.trace(g @ joint).real)
    return probs


class TestLabelingOperator:
    def test_d1_matrix(self):
        assert np.array_equal(labeling_operator(1), np.diag([-1.0 + 0j, 1, -1, 1]))

    def test_squares_to_identity(self):
        f = labeling_operator(2)
        assert np.abs(f @ f - np.eye(8)).max() == 0.0

    def test_phase_action_on_labeled_states(self):
        rng = np.random.default_rng(0)
        f = labeling_operator(2)
        rho = random_density(rng, 4)
        for y in (0, 1):
            e = np.zeros((2, 2), dtype=complex)
            e[y, y] = 1.0
            block = np.kron(rho, e)
            want = -((-1) ** y) * block
            assert np.abs(f @ block - want).max() <= 1e-12


class TestRealizableSource:
    def test_sigma_z(self):
        source = make_realizable_source(pauli_matrix(P("3")))
        # +1 eigenspace of Z is |0>, which carries label 1
        assert np.abs(source.rho1 - np.diag([1.0, 0.0])).max() <= 1e-12
        assert abs(source.p1 - 0.5) <= 1e-12
        assert abs(source.exact_coefficient(P("3")) - 1.0) <= 1e-12
        assert source.maximally_mixed and not source.degenerate

    def test_parity_embedding_coefficients(self):
        source = make_realizable_source(classical_embedding([0, 1, 1, 0]))
        # direct oracle: the labeling operator is the embedding itself
        for s in (P("33"), P("30"), P("03"), P("11")):
            want = fourier_coefficient(classical_embedding([0, 1, 1, 0]), s)
            assert abs(source.exact_coefficient(s) - want) <= 1e-12
        assert abs(source.exact_coefficient(P("33")) + 1.0) <= 1e-12

    def test_identity_is_degenerate(self):
        source = make_realizable_source(np.eye(4))
        assert source.degenerate
        assert source.p0 == 0.0

    def test_rejects_non_sign_operator(self):
        with pytest.raises(ValueError, match=r"\+-1 operator"):
            make_realizable_source(np.diag([2.0, -1.0]))

    def test_marginal_maximally_mixed(self):
        rng = np.random.default_rng(1)
        from qfl.operators import sign_operator

        from conftest import random_hermitian

        source = make_realizable_source(sign_operator(random_hermitian(rng, 8)))
        mix = source.p0 * source.rho0 + source.p1 * source.rho1
        assert np.abs(mix - maximally_mixed(3)).max() <= 1e-8


class TestNoisySource:
    def test_zero_noise_identical(self):
        base = make_realizable_source(pauli_matrix(P("3")))
        noisy = make_noisy_source(pauli_matrix(P("3")), 0.0)
        assert noisy.flip_rate == 0.0
        assert np.array_equal(base.labeling_xop, noisy.labeling_xop)

    def test_quarter_noise_shrinks_coefficient(self):
        source = make_noisy_source(pauli_matrix(P("3")), 0.25)
        assert abs(source.exact_coefficient(P("3")) - 0.5) <= 1e-12

    def test_true_operator_loss_equals_flip_rate(self):
        # oracle: evaluate 1/2 - 1/2 tr((G x I) F_Y rho_XY) on the dense joint state
        from qfl.learner import exact_loss

        g = pauli_matrix(P("3"))
        source = make_noisy_source(g, 0.1)
        dense = 0.5 - 0.5 * np.trace(
            np.kron(g, np.eye(2)) @ labeling_operator(1) @ joint_state(source)
        ).real
        assert abs(exact_loss(g, source) - dense) <= 1e-12
        assert abs(exact_loss(g, source) - 0.1) <= 1e-12

    def test_eta_range(self):
        with pytest.raises(ValueError, match="eta"):
            make_noisy_source(pauli_matrix(P("3")), 0.5)


class TestClassicalAndCustom:
    def test_classical_states_are_basis_mixtures(self):
        source = make_classical_source("0110")
        assert np.abs(source.rho0 - np.diag(np.diag(source.rho0))).max() <= 1e-12
        assert np.abs(source.rho1 - np.diag([0.0, 0.5, 0.5, 0.0])).max() <= 1e-12

    def test_bell_custom_source(self, bell_source):
        assert bell_source.maximally_mixed
        assert abs(bell_source.exact_coefficient(P("22")) - 0.5) <= 1e-12
        assert abs(bell_source.exact_coefficient(P("11")) + 0.5) <= 1e-12
        marginal = partial_trace_label(joint_state(bell_source))
        assert np.abs(marginal - maximally_mixed(2)).max() <= 1e-12

    def test_indistinguishable_states_carry_no_signal(self):
        rho = maximally_mixed(2)
        source = make_custom_source(0.3, rho, rho)
        for s in (P("11"), P("30"), P("23")):
            assert abs(source.exact_coefficient(s)) <= 1e-12
        assert abs(source.exact_coefficient(P("00")) - (source.p1 - source.p0)) <= 1e-12

    def test_all_zero_labels(self):
        source = make_custom_source(1.0, maximally_mixed(1), maximally_mixed(1))
        assert source.degenerate

    def test_invalid_density_rejected(self):
        with pytest.raises(ValueError, match="density"):
            make_custom_source(0.5, np.diag([1.5, -0.5]), maximally_mixed(1))


class TestDrawing:
    def test_reproducible(self):
        source = make_classical_source("0110")
        streams = RandomStreams(99)
        gen_a = streams.generator(5)
        gen_b = streams.generator(5)
        a = [draw_sample(source, gen_a).label for _ in range(20)]
        b = [draw_sample(source, gen_b).label for _ in range(20)]
        assert a == b
        bulk1 = [s.label for s in draw_samples(source, 50, streams.generator(6))]
        bulk2 = [s.label for s in draw_samples(source, 50, streams.generator(6))]
        assert bulk1 == bulk2

    def test_label_frequency(self):
        source = make_classical_source("0001")  # p1 = 1/4
        streams = RandomStreams(3)
        labels = np.array([s.label for s in draw_samples(source, 100_000, streams.generator(0))])
        sigma = np.sqrt(0.25 * 0.75 / 100_000)
        assert abs(labels.mean() - 0.25) <= 3 * sigma

    def test_degenerate_labels(self):
        source = make_custom_source(1.0, maximally_mixed(1), maximally_mixed(1))
        streams = RandomStreams(4)
        labels = {draw_sample(source, streams.generator(0)).label for _ in range(20)}
        assert labels == {0}

    def test_noisy_flip_statistics(self):
        source = make_noisy_source(pauli_matrix(P("3")), 0.2)
        streams = RandomStreams(8)
        samples = draw_samples(source, 100_000, streams.generator(0))
        # states record the pre-flip label; recover it via the diagonal
        flips = 0
        for s in samples:
            pre = 1 if s.state[0, 0].real > 0.5 else 0
            flips += int(pre != s.label)
        rate = flips / len(samples)
        assert abs(rate - 0.2) <= 3 * np.sqrt(0.2 * 0.8 / 100_000)


class TestEstimationObservable:
    def test_zero_string_projects_label_parity(self):
        plus, minus = estimation_observable(P("0"))
        f = labeling_operator(1)
        assert np.abs(plus - (np.eye(4) + f) / 2).max() <= 1e-12
        assert np.abs(minus - (np.eye(4) - f) / 2).max() <= 1e-12

    def test_effects_are_projective_povm(self):
        rng = np.random.default_rng(10)
        for _ in range(10):
            d = int(rng.integers(1, 4))
            s = PauliString(tuple(int(v) for v in rng.integers(0, 4, size=d)))
            plus, minus = estimation_observable(s)
            assert validate_povm([plus, minus]) == []
            assert np.abs(plus @ plus - plus).max() <= 1e-8

    def test_mean_recovers_coefficient(self, bell_source):
        plus, minus = estimation_observable(P("22"))
        mean = np.trace((plus - minus) @ joint_state(bell_source)).real
        assert abs(mean - 0.5) <= 1e-12


class TestMeasure:
    def test_deterministic_outcome(self):
        state = np.diag([1.0, 0.0]).astype(complex)
        povm = [np.diag([1.0, 0.0]).astype(complex), np.diag([0.0, 1.0]).astype(complex)]
        streams = RandomStreams(1)
        rng = streams.generator(0)
        for _ in range(10):
            outcome, post = measure(state, povm, rng)
            assert outcome == 0
            assert np.abs(post - state).max() <= 1e-12

    def test_unbiased_coin(self):
        povm = [np.diag([1.0, 0.0]).astype(complex), np.diag([0.0, 1.0]).astype(complex)]
        rng = RandomStreams(2).generator(0)
        outcomes = [measure(maximally_mixed(1), povm, rng)[0] for _ in range(100_000)]
        assert abs(np.mean(outcomes) - 0.5) <= 3 * np.sqrt(0.25 / 100_000)

    def test_post_state_in_effect_range(self):
        rng = np.random.default_rng(11)
        state = random_density(rng, 4)
        from qfl.operators import sign_operator

        from conftest import random_hermitian

        g = sign_operator(random_hermitian(rng, 4))
        povm = [(np.eye(4) + g) / 2, (np.eye(4) - g) / 2]
        outcome, post = measure(state, povm, RandomStreams(3).generator(0))
        eff = povm[outcome]
        assert np.abs(eff @ post @ eff - post).max() <= 1e-8

    def test_negative_probability_is_error(self):
        broken = [-np.eye(2, dtype=complex), 2 * np.eye(2, dtype=complex)]
        with pytest.raises(ValueError, match="probability"):
            measure(maximally_mixed(1), broken, RandomStreams(4).generator(0))


class TestMeasureBatch:
    def test_single_string_matches_measure(self):
        source = make_bell_source()
        sample = LabeledSample(0, source.rho0)
        batch = DegreeSet.of(2, [P("30")])
        plus, minus = estimation_observable(P("30"))
        joint = np.kron(sample.state, np.diag([1.0, 0.0]).astype(complex))
        # identical uniform stream drives identical outcomes
        for seed in range(5):
            w = measure_batch(sample, batch, RandomStreams(seed).generator(0))[0]
            outcome, _ = measure(joint, [plus, minus], RandomStreams(seed).generator(0))
            assert (w == 1) == (outcome == 0)

    def test_rejects_non_commuting_batch(self):
        sample = LabeledSample(0, maximally_mixed(1))
        with pytest.raises(ValueError, match="commute"):
            measure_batch(sample, DegreeSet.of(1, [P("1"), P("2")]), RandomStreams(0).generator(0))

    def test_joint_law_matches_enumeration(self):
        source = make_bell_source()
        sample = LabeledSample(1, source.rho1)
        batch = DegreeSet.of(2, [P("03"), P("30")])
        expected = joint_probabilities(sample.state, 1, batch)
        n = 40_000
        uniforms = RandomStreams(12).generator(0).random((n, 2))
        outcomes = measure_batch_groups(
            [(sample.state, 1.0, np.arange(n))], batch, uniforms
        )
        for w, p in expected.items():
            freq = np.mean((outcomes[:, 0] == w[0]) & (outcomes[:, 1] == w[1]))
            assert abs(freq - p) <= 4 * np.sqrt(max(p * (1 - p), 1e-4) / n)

    def test_three_string_joint_law(self):
        rng = np.random.default_rng(13)
        state = random_density(rng, 4)
        sample = LabeledSample(0, state)
        batch = DegreeSet.of(2, [P("30"), P("03"), P("33")])
        expected = joint_probabilities(state, 0, batch)
        n = 60_000
        uniforms = RandomStreams(14).generator(0).random((n, 3))
        outcomes = measure_batch_groups([(state, -1.0, np.arange(n))], batch, uniforms)
        for w, p in expected.items():
            freq = np.mean(
                (outcomes[:, 0] == w[0]) & (outcomes[:, 1] == w[1]) & (outcomes[:, 2] == w[2])
            )
            assert abs(freq - p) <= 4 * np.sqrt(max(p * (1 - p), 1e-4) / n)

    def test_grouped_equals_per_sample(self):
        source = make_bell_source()
        batch = DegreeSet.of(2, [P("30"), P("03")])
        n = 500
        uniforms = RandomStreams(15).generator(0).random((n, 2))
        grouped = measure_batch_groups(
            [(source.rho0, -1.0, np.arange(n))], batch, uniforms
        )
        singles = np.empty_like(grouped)
        for i in range(n):
            singles[i] = measure_batch_groups(
                [(source.rho0, -1.0, np.array([0]))], batch, uniforms[i : i + 1]
            )[0]
        assert np.array_equal(grouped, singles)

    def test_transcript_determinism(self):
        source = make_parity_source(3, (0, 2))
        sample = LabeledSample(1, source.rho1)
        batch = DegreeSet.of(3, [P("300"), P("003"), P("303")])
        a = measure_batch(sample, batch, RandomStreams(16).generator(2))
        b = measure_batch(sample, batch, RandomStreams(16).generator(2))
        assert np.array_equal(a, b)

    def test_group_samples_by_identity_and_label(self):
        source = make_bell_source()
        streams = RandomStreams(17)
        samples = draw_samples(source, 40, streams.generator(0))
        groups = group_samples(samples)
        assert sum(len(g[2]) for g in groups) == 40
        assert len(groups) <= 2


class TestSourceFiles:
    def test_matrix_round_trip(self):
        rng = np.random.default_rng(18)
        m = random_density(rng, 4)
        assert np.array_equal(matrix_from_text(matrix_to_text(m)), m)

    def test_custom_source_file(self, tmp_path, bell_source):
        save_matrix(tmp_path / "r0.mat", bell_source.rho0)
        save_matrix(tmp_path / "r1.mat", bell_source.rho1)
        (tmp_path / "bell.src").write_text(
            "kind = custom\nd = 2\np0 = 0.5\nrho0 = r0.mat\nrho1 = r1.mat\n"
        )
        source = load_source(tmp_path / "bell.src")
        assert source.kind == "custom"
        assert abs(source.exact_coefficient(P("22")) - 0.5) <= 1e-12

    def test_classical_source_file(self, tmp_path):
        (tmp_path / "f.src").write_text("kind = classical\nd = 2\ntruth_table = 0110\n")
        source = load_source(tmp_path / "f.src")
        assert source.kind == "classical"
        assert abs(source.exact_coefficient(P("33")) + 1.0) <= 1e-12

    def test_realizable_and_noisy_source_files(self, tmp_path):
        table = FourierTable(1, {P("3"): 1.0})
        table.save(tmp_path / "z.ftab")
        (tmp_path / "r.src").write_text("kind = realizable\nd = 1\nftab = z.ftab\n")
        (tmp_path / "n.src").write_text("kind = noisy\nd = 1\nftab = z.ftab\neta = 0.25\n")
        realizable = load_source(tmp_path / "r.src")
        noisy = load_source(tmp_path / "n.src")
        assert abs(realizable.exact_coefficient(P("3")) - 1.0) <= 1e-12
        assert abs(noisy.exact_coefficient(P("3")) - 0.5) <= 1e-12

    def test_unknown_kind(self, tmp_path):
        (tmp_path / "bad.src").write_text("kind = wat\nd = 1\n")
        with pytest.raises(ValueError, match="kind"):
            load_source(tmp_path / "bad.src")

    def test_dimension_mismatch(self, tmp_path):
        (tmp_path / "bad.src").write_text("kind = classical\nd = 3\ntruth_table = 0110\n")
        with pytest.raises(ValueError, match="length"):
            load_source(tmp_path / "bad.src")
