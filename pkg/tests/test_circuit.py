import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qgcn_ris.circuit import (CircuitParams, act_qubit, apply_layer, gates_per_layer,
                              n_trainable, phase_qubit, prepare_initial, run_circuit)
from qgcn_ris.config import NoiseModel, SystemConfig, TrainConfig
from qgcn_ris.graph import build_graph, partition
from qgcn_ris.qsim import RY, RZ, expectation_z, expectation_z_all, single_qubit_matrix

SYS = SystemConfig.build(n_elements=4)
EXACT = TrainConfig(shots=None)


def block_of(n, k=2):
    g = build_graph(np.arange(n) * SYS.d_min, SYS.w_decay, k)
    return partition(g, max(n, 1))[0]


def random_params(rng, L, block):
    return CircuitParams(rng.uniform(-2, 2, (L, block.size)), rng.uniform(-2, 2, (L, block.size)),
                         rng.uniform(-2, 2, (L, block.size)), rng.uniform(-2, 2, (L, len(block.edges))))


class TestPrep:
    def test_single_element_is_one_plus(self):
        s = prepare_initial(block_of(1))
        # qubit 0 (activation) = 1, qubit 1 (phase) = |+>: indices 1 and 3
        np.testing.assert_allclose(s.amplitudes, [0, 2 ** -0.5, 0, 2 ** -0.5], atol=1e-15)

    def test_phase_z_zero_and_activation_one(self):
        b = block_of(4)
        s = prepare_initial(b)
        np.testing.assert_allclose(expectation_z_all(s, [phase_qubit(i) for i in range(4)]), 0,
                                   atol=1e-14)
        np.testing.assert_allclose(expectation_z_all(s, [act_qubit(i) for i in range(4)]), -1)

    def test_empty_block(self):
        with pytest.raises(ValueError):
            prepare_initial(block_of(1).__class__(0, (), (), np.zeros(0), np.zeros(0)))


class TestLayer:
    def test_zero_params_identity(self):
        b = block_of(3)
        s = prepare_initial(b)
        before = s.amplitudes.copy()
        apply_layer(s, 0, b, CircuitParams.zeros(1, 3, len(b.edges)))
        np.testing.assert_allclose(s.amplitudes, before, atol=1e-15)

    def test_first_layer_spacing_drive_vanishes(self, rng):
        # mu_i = 0 right after prep, so beta only acts through the local Ry(beta) on activation
        b = block_of(3)
        p = CircuitParams.zeros(1, 3, len(b.edges))
        p.beta[:] = rng.uniform(-1, 1, (1, 3))
        s = apply_layer(prepare_initial(b), 0, b, p)
        za = expectation_z_all(s, [act_qubit(i) for i in range(3)])
        # Ry(beta)|1>: <Z> = -cos(beta)
        np.testing.assert_allclose(za, -np.cos(p.beta[0]), atol=1e-12)

    def test_single_element_matches_dense_oracle(self):
        b = block_of(1)
        p = CircuitParams.zeros(1, 1, 0)
        p.alpha[0, 0] = np.pi
        p.gamma[0, 0] = 0.4
        s = apply_layer(prepare_initial(b), 0, b, p)
        plus = np.array([1, 1]) / np.sqrt(2)
        phase = single_qubit_matrix(RZ(0.4)) @ single_qubit_matrix(RY(np.pi)) @ plus
        act = np.array([0, 1])
        np.testing.assert_allclose(s.amplitudes, np.kron(phase, act), atol=1e-14)
        assert expectation_z(s, 1) == pytest.approx(0.0, abs=1e-14)

    def test_layer_index_checked(self):
        b = block_of(2)
        with pytest.raises(ValueError):
            apply_layer(prepare_initial(b), 2, b, CircuitParams.zeros(2, 2, 1))

    @settings(max_examples=25, deadline=None)
    @given(st.integers(1, 5), st.integers(1, 3), st.integers(0, 10 ** 6))
    def test_norm_preserved(self, n, L, seed):
        rng = np.random.default_rng(seed)
        b = block_of(n)
        p = random_params(rng, L, b)
        s = prepare_initial(b)
        for l in range(L):
            apply_layer(s, l, b, p)
        assert abs(s.norm() - 1) < 1e-10


class TestRun:
    @pytest.mark.parametrize("L", [0, 1, 2, 3])
    def test_zero_params_decode_all_on_zero_phase(self, L):
        b = block_of(4)
        d = run_circuit(b, CircuitParams.zeros(L, 4, len(b.edges)), SYS, EXACT)
        np.testing.assert_array_equal(d.activation, 1)
        np.testing.assert_allclose(d.phases, 0.0, atol=1e-12)

    def test_phase_decode_minus_half_is_pi(self):
        # |+> then Ry(pi/6): <Z> = -sin(pi/6) = -0.5 -> phi = wrap(-pi) = pi
        b = block_of(1)
        p = CircuitParams.zeros(1, 1, 0)
        p.alpha[0, 0] = np.pi / 6
        d = run_circuit(b, p, SYS, EXACT)
        assert d.raw_z_phase[0] == pytest.approx(-0.5)
        assert d.phases[0] == pytest.approx(np.pi)

    def test_seeded_shots_deterministic(self, rng):
        b = block_of(3)
        p = random_params(rng, 2, b)
        tc = TrainConfig(shots=256, noise=NoiseModel())
        d1 = run_circuit(b, p, SYS, tc, np.random.default_rng(4))
        d2 = run_circuit(b, p, SYS, tc, np.random.default_rng(4))
        np.testing.assert_array_equal(d1.mean_activation, d2.mean_activation)
        np.testing.assert_array_equal(d1.phases, d2.phases)

    def test_zero_noise_equals_noiseless(self, rng):
        b = block_of(3)
        p = random_params(rng, 2, b)
        a = run_circuit(b, p, SYS, TrainConfig(shots=None, noise=NoiseModel(0, 0, 0)),
                        np.random.default_rng(0))
        c = run_circuit(b, p, SYS, EXACT)
        np.testing.assert_allclose(a.raw_z_phase, c.raw_z_phase, atol=1e-14)

    def test_shots_converge_to_exact(self, rng):
        b = block_of(2)
        p = random_params(rng, 2, b)
        exact = run_circuit(b, p, SYS, EXACT)
        d = run_circuit(b, p, SYS, TrainConfig(shots=200_000), np.random.default_rng(1))
        np.testing.assert_allclose(d.raw_z_phase, exact.raw_z_phase, atol=0.01)

    def test_majority_vote(self, rng):
        b = block_of(3)
        p = random_params(rng, 1, b)
        d = run_circuit(b, p, SYS, TrainConfig(shots=501), np.random.default_rng(3))
        np.testing.assert_array_equal(d.activation, (d.mean_activation >= 0.5).astype(int))
        assert np.all((d.mean_activation >= 0) & (d.mean_activation <= 1))

    def test_needs_rng_for_shots(self):
        b = block_of(1)
        with pytest.raises(ValueError):
            run_circuit(b, CircuitParams.zeros(1, 1, 0), SYS, TrainConfig(shots=10))

    def test_algorithm1_form_differs(self, rng):
        b = block_of(3)
        p = random_params(rng, 2, b)
        d1 = run_circuit(b, p, SYS, EXACT)
        d2 = run_circuit(b, p, SYS, TrainConfig(shots=None, circuit_form="algorithm1"))
        assert not np.allclose(d1.raw_z_phase, d2.raw_z_phase)

    def test_weights_refresh_between_layers(self, rng):
        b = block_of(3)
        p = random_params(rng, 2, b)
        d = run_circuit(b, p, SYS, EXACT)
        np.testing.assert_allclose(d.layer_weights[0], b.weights)
        assert not np.allclose(d.layer_weights[1], b.weights)

    def test_scheduled_noise_matches_live_injection(self):
        # pre-drawn error schedules vs a per-gate coin flip, heavy noise to expose differences
        b = block_of(2)
        p = random_params(np.random.default_rng(8), 1, b)
        noise = NoiseModel(0.15, 0.25, 0.0)
        tc = TrainConfig(shots=None, noise=noise, trajectories=6000)
        fast = run_circuit(b, p, SYS, tc, np.random.default_rng(0))
        rng = np.random.default_rng(1)
        za, zp = [], []
        for _ in range(6000):
            s = apply_layer(prepare_initial(b, noise, rng), 0, b, p, noise=noise, rng=rng)
            za.append(expectation_z_all(s, [0, 2]))
            zp.append(expectation_z_all(s, [1, 3]))
        np.testing.assert_allclose(fast.raw_z_phase, np.mean(zp, axis=0), atol=0.03)
        np.testing.assert_allclose(1 - 2 * fast.mean_activation, np.mean(za, axis=0), atol=0.03)


class TestCounting:
    @pytest.mark.parametrize("n", range(2, 9))
    def test_gates_per_layer_affine(self, n):
        b = block_of(n)
        counts = []
        run_circuit(b, CircuitParams.zeros(2, n, len(b.edges)), SYS, EXACT, counts=counts)
        assert counts[1] == counts[2] == gates_per_layer(b) == len(b.edges) + 4 * n

    def test_param_count(self):
        b = block_of(5)
        assert n_trainable(b, 2) == 3 * 2 * 5 + 2 * len(b.edges)
        assert n_trainable(b, 2, freeze_edges=True) == 30
        p = CircuitParams.zeros(2, 5, len(b.edges), freeze_edges=True)
        assert p.n_trainable == 30
        assert p.with_vector(np.arange(30.0)).edge_thetas.shape == (2, len(b.edges))

    def test_vector_round_trip(self, rng):
        b = block_of(4)
        p = random_params(rng, 2, b)
        q = p.with_vector(p.to_vector())
        for name in ("alpha", "beta", "gamma", "edge_thetas"):
            np.testing.assert_array_equal(getattr(p, name), getattr(q, name))
        assert p.locate(3 * 8) == ("edge", 0, 0)
        assert p.locate(9) == ("beta", 0, 1)
        with pytest.raises(ValueError):
            p.with_vector(np.zeros(3))

    def test_initial_ranges(self, rng):
        p = CircuitParams.initial(2, 6, 7, rng)
        assert np.all(np.abs(p.alpha) <= 0.1) and np.all(np.abs(p.gamma) <= 0.1)
        assert np.all((p.beta >= 0) & (p.beta <= 0.1))
        np.testing.assert_array_equal(p.edge_thetas, 1.0)
