import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from polyqrom import opqnn, qsim, recon
from polyqrom.opqnn import Family, OpqnnModel
from polyqrom.projection import EstimatorConfig, hadamard_sigma

from conftest import random_state


@settings(max_examples=40, deadline=None)
@given(n=st.integers(1, 6), seed=st.integers(0, 2**31), real=st.booleans())
def test_amplitude_encoding_prepares_the_state(n, seed, real):
    v = random_state(np.random.default_rng(seed), 2**n, real=real) * 3.0
    out = qsim.run(recon.amplitude_encode(v), qsim.new_basis_state(n, 0))
    assert np.max(np.abs(out - v / 3.0)) <= 1e-12


def test_amplitude_encoding_pads_and_rejects():
    out = qsim.run(recon.amplitude_encode([0, 1, 1], 2), qsim.new_basis_state(2, 0))
    np.testing.assert_allclose(out, [0, 1, 1, 0] / np.sqrt(2), atol=1e-15)
    with pytest.raises(ValueError):
        recon.amplitude_encode(np.zeros(4))
    with pytest.raises(ValueError):
        recon.amplitude_encode(np.ones(5), 2)


@pytest.mark.parametrize("family", list(Family))
def test_lcu_success_probability(family, rng):
    model = OpqnnModel.create(family, 2, init="random", seed=6)
    x = rng.normal(size=5) + 1j * rng.normal(size=5)
    state, p = recon.lcu_reconstruct(model, x)
    A = opqnn.basis_matrix(model, 5)
    assert p == pytest.approx(np.linalg.norm(A @ x) ** 2 / np.sum(np.abs(x)) ** 2, abs=1e-12)
    assert np.linalg.norm(state) == pytest.approx(1.0, abs=1e-12)


def test_lcu_circuit_layout():
    model = OpqnnModel.create("qft", 1)
    plan = recon.lcu_plan(model, [1.0, -2.0, 0.5])
    assert plan.k == 2 and plan.phases[1] == pytest.approx(np.pi)
    circ = recon.lcu_circuit(model, plan)
    assert circ.n_qubits == 2 + model.layout.total_qubits
    assert {b[0] for b in circ.blocks} >= {"U_x", "U_0", "U_1", "U_2", "U_x^dg"}
    with pytest.raises(ValueError):
        recon.lcu_plan(model, [0.0, 0.0])


def test_degenerate_reconstruction():
    A = np.array([[1.0, 1.0], [0.0, 0.0]], dtype=complex)
    with pytest.raises(recon.DegenerateReconstructionError):
        recon.direct_reconstruct(A, [1.0, -1.0])


def test_swap_test_requires_unit_norm():
    a = np.array([1, 0], dtype=complex)
    with pytest.raises(ValueError, match="normalized"):
        recon.swap_test(a, 0.5 * a)
    with pytest.raises(ValueError):
        recon.swap_test(a, np.ones(4) / 2)


def test_sampled_swap_test_within_four_sigma(rng):
    a, b = random_state(rng, 8), random_state(rng, 8)
    exact = recon.swap_test(a, b)
    hits = 0
    for s in range(200):
        rep = recon.swap_test(a, b, EstimatorConfig("sampled", 100_000, s))
        # F = 2 P(0) - 1 is an affine image of a binomial frequency
        sigma = 2 * np.sqrt(exact.p0 * (1 - exact.p0) / 1e5)
        hits += abs(rep.fidelity - exact.fidelity) <= 4 * sigma
        assert rep.mode == "sampled" and rep.shots == 100_000
    assert hits / 200 >= 0.99
    assert hadamard_sigma(0.0, 1.0, 100) == pytest.approx(0.1)


@pytest.mark.parametrize("family", list(Family))
def test_loss_paths_agree(family, rng):
    model = OpqnnModel.create(family, 2, init="random", seed=8)
    psi = random_state(rng, model.layout.dim)
    x = rng.normal(size=4) + 1j * rng.normal(size=4)
    lcu = recon.reconstruction_loss(psi, model, x, method="lcu")
    direct = recon.reconstruction_loss(psi, model, x, method="direct")
    assert lcu == pytest.approx(direct, abs=1e-10)
    assert -1e-12 <= lcu <= 1 + 1e-12


def test_batch_fidelities_flag_vanishing_columns():
    A = np.array([[1, 0], [0, 1], [0, 0], [0, 0]], dtype=complex)
    S = np.array([[1, 0, 0, 0], [0, 0, 1, 0]], dtype=complex).T
    F = recon.batch_fidelities(A, S, 1e-6)
    assert F[0] == pytest.approx(1.0) and np.isnan(F[1])


def test_grid_helpers():
    A = np.eye(4, dtype=complex)[:, :2]
    np.testing.assert_allclose(recon.reconstruct_grid(A, [0.6, 0.8], 2.0, (2, 2)), [[1.2, 1.6], [0, 0]])
    assert recon.mse(np.ones((2, 2)), np.zeros((2, 2))) == 1.0
    with pytest.raises(ValueError):
        recon.mse(np.ones(3), np.ones(4))


# ---------------------------------------------------------------------------
# invariants


@settings(max_examples=30, deadline=None)
@given(family=st.sampled_from(list(Family)), seed=st.integers(0, 2**31), m=st.integers(1, 8))
def test_lcu_equals_normalized_combination(family, seed, m):
    rng = np.random.default_rng(seed)
    model = OpqnnModel.create(family, 2, init="random", seed=seed)
    x = rng.normal(size=m) + 1j * rng.normal(size=m)
    state, _ = recon.lcu_reconstruct(model, x)
    ref = recon.direct_reconstruct(opqnn.basis_matrix(model, m), x)
    assert np.max(np.abs(state - ref)) <= 1e-10


@settings(max_examples=30, deadline=None)
@given(n=st.integers(1, 10), seed=st.integers(0, 2**31))
def test_swap_test_identity(n, seed):
    rng = np.random.default_rng(seed)
    a, b = random_state(rng, 2**n), random_state(rng, 2**n)
    rep = recon.swap_test(a, b)
    assert abs(rep.fidelity - abs(np.vdot(a, b)) ** 2) <= 1e-12
    assert abs(rep.fidelity - (2 * rep.p0 - 1)) <= 1e-12
    assert -1e-12 <= rep.fidelity <= 1 + 1e-12


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_fidelity_monotone_for_canonical_bases(seed):
    psi = random_state(np.random.default_rng(seed), 64, real=True)
    for family in ("qft", "qdct"):
        model = OpqnnModel.create(family, 3)
        F = [recon.batch_fidelities(opqnn.basis_matrix(model, m), psi, 0.0) for m in range(1, 65)]
        assert np.all(np.diff(F) >= -1e-12)
        assert F[-1] == pytest.approx(1.0, abs=1e-10)
