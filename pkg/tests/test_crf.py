import math
import time

import numpy as np
import pytest
import torch

import oracles
from tcca.crf import (
    CrfHead,
    FORBIDDEN_SCORE,
    TransitionMatrix,
    crf_log_partition,
    crf_marginals,
    crf_nll,
    crf_score,
    exp_normalized,
    forbidden_mask,
    init_transitions_precomputed,
    init_transitions_random,
    row_argmax_agreement,
    transition_counts,
    truncate_at_eos,
    viterbi_decode,
)


def zero_matrix(num_classes: int) -> np.ndarray:
    return np.zeros((num_classes + 3, num_classes + 3))


def random_case(rng, max_k=6, max_labels=5):
    k = int(rng.integers(1, max_k + 1))
    n_labels = int(rng.integers(1, max_labels + 1))
    c = n_labels - 1
    emissions = rng.normal(size=(k, n_labels)) * 2
    matrix = rng.normal(size=(c + 3, c + 3))
    omega = float(rng.uniform(0, 2))
    return emissions, matrix, omega


class TestScore:
    def test_single_position(self):
        emissions = np.array([[2.0, 0.0]])
        assert crf_score(emissions, [0], zero_matrix(1), omega=1.0) == pytest.approx(2.0)

    def test_omega_zero_ignores_transitions(self):
        rng = np.random.default_rng(0)
        emissions, matrix, _ = random_case(rng, max_k=5, max_labels=4)
        path = rng.integers(0, emissions.shape[1], size=emissions.shape[0])
        expected = emissions[np.arange(len(path)), path].sum()
        assert crf_score(emissions, path, matrix, omega=0.0) == pytest.approx(expected)

    def test_matches_independent_reevaluation(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            emissions, matrix, omega = random_case(rng)
            path = rng.integers(0, emissions.shape[1], size=emissions.shape[0])
            expected = oracles.path_score(emissions, matrix, list(path), omega)
            assert crf_score(emissions, path, matrix, omega) == pytest.approx(expected, abs=1e-12)

    def test_invalid_label_rejected(self):
        with pytest.raises(ValueError, match="invalid label"):
            crf_score(np.zeros((2, 3)), [0, 3], zero_matrix(2), omega=1.0)


class TestLogPartition:
    def test_two_label_closed_form(self):
        emissions = np.zeros((1, 2))
        assert crf_log_partition(emissions, zero_matrix(1), omega=1.0) == pytest.approx(
            math.log(2.0)
        )

    def test_omega_zero_factorizes(self):
        rng = np.random.default_rng(2)
        emissions, matrix, _ = random_case(rng)
        expected = sum(
            math.log(np.exp(row - row.max()).sum()) + row.max() for row in emissions
        )
        assert crf_log_partition(emissions, matrix, omega=0.0) == pytest.approx(expected)

    def test_matches_enumeration(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            emissions, matrix, omega = random_case(rng)
            expected = oracles.log_partition(emissions, matrix, omega)
            assert crf_log_partition(emissions, matrix, omega) == pytest.approx(expected, abs=1e-6)

    def test_path_probabilities_normalize(self):
        rng = np.random.default_rng(4)
        emissions, matrix, omega = random_case(rng, max_k=4, max_labels=4)
        log_z = crf_log_partition(emissions, matrix, omega)
        _, scores = oracles.all_path_scores(emissions, matrix, omega)
        assert np.exp(scores - log_z).sum() == pytest.approx(1.0, abs=1e-6)


class TestNll:
    def test_single_possible_path(self):
        emissions = np.array([[1.3], [0.2]])  # C = 0: EOS-only label space
        assert crf_nll(emissions, [0, 0], zero_matrix(0), omega=1.0) == pytest.approx(0.0)

    def test_margin_monotonicity(self):
        rng = np.random.default_rng(5)
        emissions, matrix, omega = random_case(rng, max_k=4, max_labels=4)
        k, n_labels = emissions.shape
        path = rng.integers(0, n_labels, size=k)
        onehot = np.zeros_like(emissions)
        onehot[np.arange(k), path] = 1.0
        values = [crf_nll(emissions + s * onehot, path, matrix, omega) for s in (0, 1, 2, 4)]
        assert all(a > b for a, b in zip(values, values[1:]))

    def test_matches_enumeration(self):
        rng = np.random.default_rng(6)
        for _ in range(100):
            emissions, matrix, omega = random_case(rng)
            path = rng.integers(0, emissions.shape[1], size=emissions.shape[0])
            expected = oracles.log_partition(emissions, matrix, omega) - oracles.path_score(
                emissions, matrix, list(path), omega
            )
            assert crf_nll(emissions, path, matrix, omega) == pytest.approx(expected, abs=1e-6)
            assert crf_nll(emissions, path, matrix, omega) >= -1e-9


class TestViterbi:
    def test_omega_zero_is_per_position_argmax(self):
        rng = np.random.default_rng(7)
        emissions, matrix, _ = random_case(rng)
        path, _ = viterbi_decode(emissions, matrix, omega=0.0)
        assert np.array_equal(path, emissions.argmax(axis=1))

    def test_hand_tie_break(self):
        # two equally scoring paths [0,0] and [1,1]; lower labels win
        emissions = np.array([[1.0, 0.0], [0.0, 1.0]])
        matrix = zero_matrix(1)
        matrix[0, 1] = -10.0
        path, score = viterbi_decode(emissions, matrix, omega=1.0)
        assert list(path) == [0, 0]
        assert score == pytest.approx(1.0)

    def test_matches_brute_force(self):
        rng = np.random.default_rng(8)
        for _ in range(300):
            emissions, matrix, omega = random_case(rng)
            path, score = viterbi_decode(emissions, matrix, omega)
            best, best_score, unique = oracles.best_path(emissions, matrix, omega)
            assert score == pytest.approx(best_score, abs=1e-9)
            if unique:
                assert np.array_equal(path, best)

    def test_position_constant_shift_invariance(self):
        rng = np.random.default_rng(9)
        emissions, matrix, omega = random_case(rng, max_k=5, max_labels=4)
        path, score = viterbi_decode(emissions, matrix, omega)
        shifted = emissions.copy()
        shifted[0] += 7.5
        path2, score2 = viterbi_decode(shifted, matrix, omega)
        assert np.array_equal(path, path2)
        assert score2 == pytest.approx(score + 7.5, abs=1e-9)

    def test_quadratic_label_scaling(self):
        # run time should grow ~4x when the label count doubles; measured in
        # each backend's cache-resident window
        from tcca.crf.kernels import KERNEL_BACKEND

        rng = np.random.default_rng(10)
        k = 32

        def per_call(n_labels: int) -> float:
            emissions = rng.normal(size=(k, n_labels))
            matrix = rng.normal(size=(n_labels + 2, n_labels + 2))
            best = math.inf
            for _ in range(6):
                t0 = time.perf_counter()
                for _ in range(8):
                    viterbi_decode(emissions, matrix, omega=1.0)
                best = min(best, (time.perf_counter() - t0) / 8)
            return best

        small, large = (256, 512) if KERNEL_BACKEND == "compiled" else (192, 384)
        per_call(64)  # warm up allocator and code paths
        ratio = per_call(large) / per_call(small)
        assert 3.0 <= ratio <= 5.0, f"scaling ratio {ratio:.2f} outside [3, 5]"


class TestTruncateAtEos:
    def test_interior(self):
        assert truncate_at_eos([0, 1, 3, 2], num_classes=3) == [0, 1]

    def test_leading(self):
        assert truncate_at_eos([3, 0, 1], num_classes=3) == []

    def test_absent(self):
        assert truncate_at_eos([0, 1, 2], num_classes=3) == [0, 1, 2]


class TestInitPrecomputed:
    def test_branching_counts(self):
        m = init_transitions_precomputed([[0, 1, 2], [0, 2, 1]], num_classes=3)
        # two observed transitions out of action 0, one to each successor
        expected = (1 + 1) / (2 + 4)
        assert math.exp(m.m[0, 1]) == pytest.approx(expected)
        assert math.exp(m.m[0, 2]) == pytest.approx(expected)

    def test_single_sequence(self):
        m = init_transitions_precomputed([[0, 1]], num_classes=2)
        assert math.exp(m.m[0, 1]) == pytest.approx((1 + 1) / (1 + 3))
        assert math.exp(m.m[1, 2]) == pytest.approx((1 + 1) / (1 + 3))  # 1 -> EOS

    def test_rows_normalize(self):
        rng = np.random.default_rng(11)
        corpus = []
        for _ in range(30):
            seq = [int(rng.integers(0, 5))]
            for _ in range(int(rng.integers(1, 8))):
                nxt = int(rng.integers(0, 5))
                if nxt != seq[-1]:
                    seq.append(nxt)
            corpus.append(seq)
        m = init_transitions_precomputed(corpus, num_classes=5)
        sums = np.exp(m.m[:7, :6]).sum(axis=1)  # rows over actions+EOS columns
        np.testing.assert_allclose(sums[:6], 1.0, atol=1e-9)
        np.testing.assert_allclose(np.exp(m.m[6, :6]).sum(), 1.0, atol=1e-9)  # START row

    def test_empty_corpus_rejected(self):
        with pytest.raises(ValueError, match="empty transition corpus"):
            init_transitions_precomputed([], num_classes=3)


class TestInitRandom:
    def test_deterministic_and_bounded(self):
        a = init_transitions_random(5, num_classes=4)
        b = init_transitions_random(5, num_classes=4)
        assert np.array_equal(a.m, b.m)
        learnable = ~forbidden_mask(4)
        assert np.abs(a.m[learnable]).max() <= 0.1

    def test_seeds_differ(self):
        a = init_transitions_random(5, num_classes=4)
        b = init_transitions_random(6, num_classes=4)
        assert not np.array_equal(a.m, b.m)

    def test_boundary_entries_pinned(self):
        m = init_transitions_random(1, num_classes=3)
        assert (m.m[:, m.start] == FORBIDDEN_SCORE).all()
        assert (m.m[m.end, :] == FORBIDDEN_SCORE).all()


class TestTransitionHelpers:
    def test_exp_normalized_rows(self):
        m = init_transitions_random(0, num_classes=3).m
        p = exp_normalized(m)
        np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-12)

    def test_counts_and_agreement(self):
        corpus = [[0, 1, 2], [0, 1], [2, 0]]
        counts = transition_counts(corpus, num_classes=3)
        assert counts.tolist() == [3, 2, 2]
        reference = np.array([[0, 1, 0], [0, 0, 1], [1, 0, 0]], dtype=float)
        learned = np.zeros((6, 6))
        learned[0, 1] = 1.0
        learned[1, 2] = 1.0
        learned[2, 1] = 1.0  # wrong row
        agree, rows = row_argmax_agreement(learned, reference, counts, min_count=2)
        assert rows == 3
        assert agree == pytest.approx(2 / 3)


class TestCrfHead:
    def make_head(self, c=3, omega=0.8, seed=0):
        return CrfHead(c, omega=omega, init=init_transitions_random(seed, c))

    def test_nll_matches_function_api(self):
        rng = np.random.default_rng(12)
        head = self.make_head()
        emissions = torch.tensor(rng.normal(size=(4, 4)))
        path = torch.tensor([0, 1, 3, 3])
        expected = crf_nll(
            emissions.numpy(), path.numpy(), head.matrix().detach().numpy(), head.omega
        )
        assert float(head.nll(emissions, path)) == pytest.approx(expected, abs=1e-12)

    def test_gradients_match_finite_differences(self):
        torch.manual_seed(0)
        head = self.make_head()
        emissions = torch.randn(4, 4, dtype=torch.float64, requires_grad=True)
        path = torch.tensor([2, 0, 3, 3])

        def loss_fn():
            return head.nll(emissions, path)

        loss = loss_fn()
        loss.backward()
        eps = 1e-6
        worst = 0.0
        for tensor, grad in ((emissions, emissions.grad), (head.weight, head.weight.grad)):
            flat, gflat = tensor.data.view(-1), grad.view(-1)
            for i in range(flat.numel()):
                original = flat[i].item()
                flat[i] = original + eps
                f_plus = float(loss_fn().detach())
                flat[i] = original - eps
                f_minus = float(loss_fn().detach())
                flat[i] = original
                numeric = (f_plus - f_minus) / (2 * eps)
                analytic = float(gflat[i])
                worst = max(
                    worst, abs(analytic - numeric) / max(1.0, abs(analytic) + abs(numeric))
                )
        assert worst < 1e-4

    def test_pinned_entries_receive_no_gradient(self):
        head = self.make_head()
        emissions = torch.randn(3, 4, dtype=torch.float64)
        head.nll(emissions, torch.tensor([0, 1, 3])).backward()
        grad = head.weight.grad
        mask = torch.as_tensor(forbidden_mask(3))
        assert (grad[mask] == 0).all()

    def test_decode_matches_viterbi(self):
        rng = np.random.default_rng(13)
        head = self.make_head()
        emissions = torch.tensor(rng.normal(size=(5, 4)))
        path, score = head.decode(emissions)
        expected_path, expected_score = viterbi_decode(
            emissions.numpy(), head.matrix().detach().numpy(), head.omega
        )
        assert np.array_equal(path, expected_path)
        assert score == pytest.approx(expected_score)

    def test_matrix_shape_validation(self):
        with pytest.raises(ValueError, match="does not match class count"):
            CrfHead(4, omega=1.0, init=init_transitions_random(0, 3))
        with pytest.raises(ValueError):
            TransitionMatrix(np.zeros((4, 5)), num_classes=2)
