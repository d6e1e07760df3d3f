"""Small worked examples per module, each against a closed form or an
independent dense computation."""
import json

import numpy as np
import pytest

from polyqrom import baseline, classify, cli, opqnn, projection, qsim, recon, train
from polyqrom.classify import FcLayer
from polyqrom.opqnn import OpqnnModel
from polyqrom.qsim import CLOSED, OPEN, Circuit
from polyqrom.validation import dct_basis, dft_matrix, qft_reference

from conftest import random_state

S2 = 1 / np.sqrt(2)
CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]])


# ---------------------------------------------------------------------------
# simulator


@pytest.mark.parametrize("n, i, expected", [(1, 0, [1, 0]), (2, 3, [0, 0, 0, 1]), (3, 5, np.eye(8)[5])])
def test_basis_states(n, i, expected):
    np.testing.assert_array_equal(qsim.new_basis_state(n, i), expected)


@pytest.mark.parametrize("controls, start, end", [
    ([(0, CLOSED)], 0b10, 0b11),
    ([(0, OPEN)], 0b01, 0b00),  # open control on q0 = 0 flips q1
    ([(0, OPEN)], 0b10, 0b10),
])
def test_controlled_x(controls, start, end):
    out = qsim.run(Circuit(2).add(qsim.X, 1, controls), qsim.new_basis_state(2, start))
    np.testing.assert_array_equal(out, qsim.new_basis_state(2, end))


def test_open_control_flips_target_when_control_is_zero():
    # X on q0, open-controlled by q1: |01> has q1 = 1 (no flip), |00> -> |10>
    c = Circuit(2).add(qsim.X, 0, [(1, OPEN)])
    np.testing.assert_array_equal(qsim.run(c, qsim.new_basis_state(2, 0b01)), qsim.new_basis_state(2, 0b01))
    np.testing.assert_array_equal(qsim.run(c, qsim.new_basis_state(2, 0b00)), qsim.new_basis_state(2, 0b10))


def test_hadamard_identity_and_empty_circuit(rng):
    np.testing.assert_allclose(qsim.run(Circuit(1).add(qsim.H, 0), [1, 0]), [S2, S2], atol=1e-15)
    np.testing.assert_allclose(qsim.run(Circuit(1).add(qsim.H, 0).add(qsim.H, 0), [1, 0]), [1, 0], atol=1e-12)
    psi = random_state(rng, 8)
    np.testing.assert_array_equal(qsim.run(Circuit(3), psi), psi)


@pytest.mark.parametrize("n", [1, 3, 5])
def test_qft_of_zero_state_is_uniform(n):
    out = qsim.run(OpqnnModel.create("qft", n, axes=1).circuit(), qsim.new_basis_state(n, 0))
    np.testing.assert_allclose(out, 2 ** (-n / 2), atol=1e-12)


def test_projection_examples():
    kept, p = qsim.project_qubit(np.array([S2, S2]), 0, 0)
    np.testing.assert_allclose(kept, [S2, 0]) and np.testing.assert_allclose(p, 0.5)
    kept, p = qsim.project_qubit(np.array([0, 1.0]), 0, 0)
    assert p == 0 and not kept.any()


def test_canonical_qdct_keeps_the_zero_input_in_the_ancilla_zero_sector():
    model = OpqnnModel.create("qdct", 3, axes=1)
    out = qsim.run(model.circuit(), qsim.new_basis_state(4, 0))
    _, p = qsim.project_qubit(out, 0, 0)
    assert p == pytest.approx(np.linalg.norm(dct_basis(8)[:, 0]) ** 2, abs=1e-12)


def test_inner_products():
    zero, one = np.array([1, 0], complex), np.array([0, 1], complex)
    assert qsim.inner_sesquilinear(zero, zero) == 1 and qsim.inner_sesquilinear(zero, one) == 0
    assert qsim.inner_sesquilinear(qsim.H @ zero, zero) == pytest.approx(S2)
    assert qsim.inner_bilinear(1j * zero, 1j * zero) == -1
    assert qsim.inner_sesquilinear(1j * zero, 1j * zero) == 1
    with pytest.raises(ValueError):
        qsim.inner_bilinear(zero, np.ones(4))


def test_bilinear_products_of_qft_columns():
    F = qsim.circuit_unitary(opqnn.build_qft_layer(3, opqnn.canonical_qft_params(3)))
    ref = dft_matrix(8)[[0, 4, 2, 6, 1, 5, 3, 7], :]
    assert qsim.inner_bilinear(F[:, 1], F[:, 5]) == pytest.approx((ref.T @ ref)[1, 5], abs=1e-12)


def test_conjugation_examples():
    t = 0.9
    rz = Circuit(1).add(qsim.rz(t), 0)
    np.testing.assert_allclose(qsim.circuit_unitary(qsim.conjugate_circuit(rz)), qsim.rz(-t), atol=1e-12)
    h = Circuit(1).add(qsim.H, 0)
    np.testing.assert_allclose(qsim.circuit_unitary(qsim.conjugate_circuit(h)), qsim.H, atol=1e-15)
    # the conjugated QFT layer is the inverse DFT in the same bit-reversed row order
    qft = opqnn.build_qft_layer(3, opqnn.canonical_qft_params(3))
    np.testing.assert_allclose(qsim.circuit_unitary(qsim.conjugate_circuit(qft)), qft_reference(3).conj(), atol=1e-12)


def test_unitary_examples(rng):
    np.testing.assert_allclose(qsim.circuit_unitary(Circuit(1).add(qsim.H, 0)), qsim.H)
    np.testing.assert_array_equal(qsim.circuit_unitary(Circuit(2).add(qsim.X, 1, [(0, CLOSED)])), CNOT)
    U = Circuit(2).add(qsim.ry(0.3), 0).add(qsim.X, 1, [(0, CLOSED)])
    V = Circuit(2).add(qsim.rz(1.1), 1).add(qsim.H, 0)
    both = Circuit(2, U.gates + V.gates)
    np.testing.assert_allclose(qsim.circuit_unitary(both), qsim.circuit_unitary(V) @ qsim.circuit_unitary(U),
                               atol=1e-12)


# ---------------------------------------------------------------------------
# circuit families


def test_one_qubit_qft_is_hadamard():
    assert opqnn.qft_param_count(1) == 0
    np.testing.assert_allclose(qsim.circuit_unitary(opqnn.build_qft_layer(1, [])), qsim.H, atol=1e-15)


@pytest.mark.parametrize("n, angles", [(2, [np.pi / 2]), (3, [np.pi / 2, np.pi / 4, np.pi / 2])])
def test_canonical_angles(n, angles):
    np.testing.assert_allclose(opqnn.canonical_qft_params(n), angles)


def test_zero_angle_qft_layer_is_hadamards():
    U = qsim.circuit_unitary(opqnn.build_qft_layer(3, np.zeros(3)))
    np.testing.assert_allclose(U, np.kron(qsim.H, np.kron(qsim.H, qsim.H)), atol=1e-12)


def test_n6_qft_column():
    U = qsim.circuit_unitary(opqnn.build_qft_layer(6, opqnn.canonical_qft_params(6)))
    assert np.max(np.abs(U[:, 1] - qft_reference(6)[:, 1])) <= 1e-10


def test_one_qubit_qdct_column():
    model = OpqnnModel.create("qdct", 1, axes=1)
    col = opqnn.basis_column(model, 0)
    col = col / np.linalg.norm(col)
    assert np.max(np.abs(col * np.sign(col[0].real) - dct_basis(2)[:, 0])) <= 1e-8


def test_qdct_full_circuit_unitary_for_any_angles(rng):
    U = qsim.circuit_unitary(opqnn.build_qdct_layer(3, rng.uniform(0, 2 * np.pi, 6)))
    assert np.max(np.abs(U.conj().T @ U - np.eye(16))) <= 1e-12
    assert np.max(np.abs(U[:8, :8].conj().T @ U[:8, :8] - np.eye(8))) > 1e-3


def test_ansatz_examples(rng):
    np.testing.assert_allclose(qsim.circuit_unitary(opqnn.build_ansatz(4, 1, np.zeros(16))), np.eye(16), atol=1e-15)
    U = qsim.circuit_unitary(opqnn.build_ansatz(4, 1, rng.uniform(0, 2 * np.pi, 16)))
    assert np.max(np.abs(U.conj().T @ U - np.eye(16))) <= 1e-12
    assert opqnn.ansatz_param_count(4, 2) == 2 * opqnn.ansatz_param_count(4, 1)


def test_basis_column_examples(rng):
    model = OpqnnModel.create("qft", 2, axes=1, init="random", seed=3)
    U = qsim.circuit_unitary(model.circuit())
    np.testing.assert_allclose(opqnn.basis_column(model, 2), U[:, 2], atol=1e-14)
    qdct = OpqnnModel.create("qdct", 3, axes=1)
    assert np.linalg.norm(opqnn.basis_column(qdct, 0)) == pytest.approx(np.linalg.norm(dct_basis(8)[:, 0]))


def test_two_axis_qft_column_is_kronecker_of_fourier_columns():
    model = OpqnnModel.create("qft", 2)
    F = dft_matrix(4)
    for r, c in [(0, 0), (1, 3), (2, 1)]:
        np.testing.assert_allclose(opqnn.basis_column(model, r * 4 + c), np.kron(F[:, r], F[:, c]), atol=1e-12)


def test_basis_matrix_examples():
    model = OpqnnModel.create("qft", 2)
    np.testing.assert_allclose(opqnn.basis_matrix(model, 16, "natural"), np.kron(dft_matrix(4), dft_matrix(4)),
                               atol=1e-12)
    one_axis = OpqnnModel.create("qft", 3, axes=1)
    np.testing.assert_allclose(opqnn.basis_matrix(one_axis, 8, "natural"), dft_matrix(8), atol=1e-12)
    np.testing.assert_allclose(opqnn.basis_matrix(model, 1)[:, 0], opqnn.basis_column(model, 0), atol=1e-15)
    assert opqnn.diagonal_pairs(3, 4) == [(0, 0), (0, 1), (1, 0)]


# ---------------------------------------------------------------------------
# projection


def test_hadamard_test_examples():
    zero = Circuit(1)
    plus = Circuit(1).add(qsim.H, 0)
    assert projection.hadamard_test(zero, zero) == pytest.approx(1.0, abs=1e-12)
    assert projection.hadamard_test(zero, plus) == pytest.approx(S2, abs=1e-12)


def test_qdct_columns_real_part():
    model = OpqnnModel.create("qdct", 2, axes=1)
    A = opqnn.basis_matrix(model, 2)
    G = projection.estimate_gram(model, 2)
    assert G[0, 1].real == pytest.approx(qsim.inner_bilinear(A[:, 0], A[:, 1]).real, abs=1e-12)


@pytest.mark.parametrize("m", [1, 3, 6])
def test_canonical_qft_gram(m):
    model = OpqnnModel.create("qft", 2)
    A = opqnn.basis_matrix(model, m)
    G = projection.estimate_gram(model, m)
    np.testing.assert_allclose(G, A.T @ A, atol=1e-12)
    np.testing.assert_allclose(projection.estimate_gram(model, m, cfg=projection.EstimatorConfig(sesquilinear=True)),
                               np.eye(m), atol=1e-12)
    if m == 1:
        assert G.shape == (1, 1) and G[0, 0] == pytest.approx(qsim.inner_bilinear(A[:, 0], A[:, 0]))


def test_canonical_qdct_gram_is_diagonal():
    model = OpqnnModel.create("qdct", 2)
    G = projection.estimate_gram(model, 4)
    A = opqnn.basis_matrix(model, 4)
    np.testing.assert_allclose(G, np.diag(np.linalg.norm(A, axis=0) ** 2), atol=1e-8)


def test_cross_vector_examples(rng):
    qft = OpqnnModel.create("qft", 2)
    uniform = np.full(16, 0.25, dtype=complex)
    b = projection.estimate_cross(qft, recon.amplitude_encode(uniform), 4)
    np.testing.assert_allclose(b, opqnn.basis_matrix(qft, 4).T @ uniform, atol=1e-12)

    qdct = OpqnnModel.create("qdct", 2)
    A = opqnn.basis_matrix(qdct, 4)
    b0 = projection.estimate_cross(qdct, recon.amplitude_encode(A[:, 0] / np.linalg.norm(A[:, 0])), 4)
    np.testing.assert_allclose(b0, [np.linalg.norm(A[:, 0]), 0, 0, 0], atol=1e-12)

    psi = random_state(rng, 16, real=True)
    C = np.kron(dct_basis(4), dct_basis(4))[:, opqnn.enumerate_indices(qdct.layout, 4)]
    b = projection.estimate_cross(qdct, recon.amplitude_encode(psi), 4)
    norms = np.linalg.norm(A, axis=0)
    signs = np.sign(np.einsum("ij,ij->j", C, A.real))
    np.testing.assert_allclose(b.real, signs * norms * (C.T @ psi.real), atol=1e-12)


def test_cross_equals_gram_for_the_first_column():
    model = OpqnnModel.create("ansatz", 2, init="random", seed=5)
    a0 = opqnn.basis_column(model, 0)
    b = projection.estimate_cross(model, recon.amplitude_encode(a0), 1)
    assert b[0] == pytest.approx(projection.estimate_gram(model, 1)[0, 0], abs=1e-12)


@pytest.mark.parametrize("lam, scale", [(0.0, 1.0), (1.0, 0.5)])
def test_identity_system(lam, scale, rng):
    b = rng.normal(size=5) + 1j * rng.normal(size=5)
    np.testing.assert_allclose(projection.tikhonov_solve(np.eye(5), b, lam), scale * b, atol=1e-15)


def test_six_by_six_complex_symmetric(rng):
    M = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
    G = M @ M.T + 6 * np.eye(6)
    b = rng.normal(size=6) + 1j * rng.normal(size=6)
    # independent oracle: real 12x12 block form of the complex system
    K = G + 1e-6 * np.eye(6)
    big = np.block([[K.real, -K.imag], [K.imag, K.real]])
    sol = np.linalg.inv(big) @ np.concatenate([b.real, b.imag])
    np.testing.assert_allclose(projection.tikhonov_solve(G, b, 1e-6), sol[:6] + 1j * sol[6:], atol=1e-10)


# ---------------------------------------------------------------------------
# reconstruction


@pytest.mark.parametrize("v, state", [((1, 0), [1, 0]), ((1, 1), [S2, S2])])
def test_small_encodings(v, state):
    np.testing.assert_allclose(qsim.run(recon.amplitude_encode(v), [1, 0]), state, atol=1e-12)


def test_random_complex_encoding(rng):
    v = rng.normal(size=8) + 1j * rng.normal(size=8)
    out = qsim.run(recon.amplitude_encode(v), qsim.new_basis_state(3, 0))
    assert np.max(np.abs(out - v / np.linalg.norm(v))) <= 1e-10


def test_lcu_examples(rng):
    model = OpqnnModel.create("qdct", 2, init="random", seed=1)
    A = opqnn.basis_matrix(model, 4)
    state, p = recon.lcu_reconstruct(model, [1.0])
    np.testing.assert_allclose(state, A[:, 0] / np.linalg.norm(A[:, 0]), atol=1e-10)
    assert p == pytest.approx(np.linalg.norm(A[:, 0]) ** 2, abs=1e-12)
    state, _ = recon.lcu_reconstruct(model, np.eye(4)[2])
    np.testing.assert_allclose(state, A[:, 2] / np.linalg.norm(A[:, 2]), atol=1e-10)

    canonical = OpqnnModel.create("qdct", 2)
    field = np.outer(np.linspace(1, 2, 4), np.linspace(0.5, 1, 4)).ravel()
    psi = field / np.linalg.norm(field)
    x = projection.project(canonical, psi, 4, lam=1e-6).x
    state, _ = recon.lcu_reconstruct(canonical, x)
    assert np.max(np.abs(state - recon.direct_reconstruct(opqnn.basis_matrix(canonical, 4), x))) <= 1e-10


def test_swap_examples(rng):
    a = random_state(rng, 4)
    assert recon.swap_test(a, a).fidelity == pytest.approx(1.0, abs=1e-12)
    b = np.array([0, 1, 0, 0], complex)
    c = np.array([1, 0, 0, 0], complex)
    rep = recon.swap_test(b, c)
    assert rep.p0 == pytest.approx(0.5) and rep.fidelity == pytest.approx(0.0, abs=1e-12)


def test_loss_examples(rng):
    model = OpqnnModel.create("qdct", 2)
    A = opqnn.basis_matrix(model, 16, "natural")
    psi = A[:, [0, 5]] @ np.array([0.6, 0.8])
    psi = psi / np.linalg.norm(psi)
    x = projection.project(model, psi, 16, "natural", lam=0.0).x
    assert recon.reconstruction_loss(psi, model, x, "natural") <= 1e-10
    anything = random_state(rng, 16)
    x = projection.project(model, anything, 16, lam=0.0, sesquilinear=True).x
    assert recon.reconstruction_loss(anything, model, x) <= 1e-8


def test_loss_does_not_grow_with_order():
    model = OpqnnModel.create("qdct", 4)
    field = np.exp(-((np.arange(16)[:, None] - 7) ** 2 + (np.arange(16)[None, :] - 9) ** 2) / 20.0).ravel()
    psi = field / np.linalg.norm(field)
    loss = {m: recon.reconstruction_loss(psi, model, projection.project(model, psi, m).x, method="direct")
            for m in (4, 8)}
    assert loss[8] <= loss[4]


def test_mse_examples(rng):
    g = rng.normal(size=(4, 4))
    assert recon.mse(g, g) == 0
    assert recon.mse(g + 0.3, g) == pytest.approx(0.09)
    h = rng.normal(size=(4, 4))
    diff = (g - h).ravel()
    mean = sum(diff) / diff.size
    two_pass = sum((d - mean) ** 2 for d in diff) / diff.size + mean**2
    assert recon.mse(g, h) == pytest.approx(two_pass, abs=1e-12)


# ---------------------------------------------------------------------------
# training


def test_gradient_examples():
    assert train.finite_diff_grad(lambda t: t[0] ** 2, [1.0])[0] == pytest.approx(2.0, abs=1e-6)
    assert np.all(train.finite_diff_grad(lambda t: 3.0, [0.2, 0.4]) == 0)


@pytest.mark.parametrize("epoch, lr", [(0, 0.001), (25, 0.0001), (74, 0.00001)])
def test_schedule_examples(epoch, lr):
    assert train.lr_at(epoch, train.TrainConfig()) == lr


def test_adam_examples():
    state = train.AdamState.zeros(3)
    theta = np.array([0.1, 0.2, 0.3])
    same, _ = train.adam_step(state, theta, np.zeros(3), 0.1)
    np.testing.assert_array_equal(same, theta)
    moved, _ = train.adam_step(train.AdamState.zeros(3), theta, np.array([5.0, -0.01, 300.0]), 0.1)
    np.testing.assert_allclose(np.abs(moved - theta), 0.1, rtol=1e-5)

    theta, state = np.array([1.0]), train.AdamState.zeros(1)
    for _ in range(100):
        theta, state = train.adam_step(state, theta, 2 * theta, 0.1)
    assert abs(theta[0]) < 0.05


def test_already_optimal_start_stays_optimal():
    model = OpqnnModel.create("qdct", 2)
    A = opqnn.basis_matrix(model, 3)
    rng = np.random.default_rng(0)
    states = A.real @ rng.normal(size=(3, 6))
    states = states / np.linalg.norm(states, axis=0)
    _, hist = train.train_reconstruction(model, states[:, :4], states[:, 4:], train.TrainConfig(m=3))
    assert hist.initial_train_loss <= 1e-8
    assert hist.train_loss[-1] <= 1e-8 and 1 - hist.final_test_metric <= 1e-8
    # At the optimum the gradient is round-off, yet Adam rescales it to steps near lr
    # once it exceeds eps_hat. The loss wanders to about 1.7e-8 in the first epochs
    # and settles as the rate decays.
    assert np.max(hist.train_loss) <= 1e-7


# ---------------------------------------------------------------------------
# classification


def test_fc_examples():
    fc = FcLayer(np.zeros((3, 4)), np.array([1.0, 0, 0, 0]))
    assert np.all(classify.fc_forward(fc, np.random.default_rng(0).normal(size=(5, 3)))[2] == 0)
    eye = FcLayer(np.eye(4), np.zeros(4))
    feats = np.array([[0.1, 0.9, 0.3, 0.2], [2.0, -1.0, 0.0, 0.5]])
    np.testing.assert_array_equal(classify.fc_forward(eye, feats)[2], [1, 0])
    probs = classify.fc_forward(FcLayer.create(6, 4, seed=2, scale=1.0), np.ones(6))[1]
    assert abs(probs.sum() - 1) <= 1e-12


def test_loss_and_accuracy_examples():
    assert classify.cross_entropy(np.eye(4)[[1, 3]], [1, 3]) == pytest.approx(0.0, abs=1e-12)
    assert classify.cross_entropy(np.full((2, 4), 0.25), [0, 2]) == pytest.approx(np.log(4))
    assert classify.accuracy(np.r_[np.zeros(9), 1], np.zeros(10)) == 0.9
    assert FcLayer.create(8, 4).n_params == 36


def test_separable_toy_reaches_full_train_accuracy():
    rng = np.random.default_rng(4)
    X = np.r_[rng.normal(-2, 0.5, size=(20, 2)), rng.normal(2, 0.5, size=(20, 2))]
    y = np.r_[np.zeros(20, int), np.ones(20, int)]
    fc = FcLayer.create(2, 2, seed=0)
    w, state = fc.flat(), train.AdamState.zeros(6)
    for _ in range(200):
        _, gW, gb = classify.fc_grad(fc.from_flat(w), X, y)
        w, state = train.adam_step(state, w, np.r_[gW.ravel(), gb], 0.05)
    assert classify.accuracy(classify.fc_forward(fc.from_flat(w), X)[2], y) == 1.0
    # scalar logistic regression on the same data also separates it
    z = X @ np.array([1.0, 1.0])
    assert np.all((z > 0) == (y == 1))


def test_single_class_loss_decreases_monotonically():
    X = np.random.default_rng(1).normal(size=(12, 3))
    y = np.zeros(12, int)
    fc = FcLayer.create(3, 4, seed=0)
    w, state, losses = fc.flat(), train.AdamState.zeros(16), []
    for _ in range(1000):
        loss, gW, gb = classify.fc_grad(fc.from_flat(w), X, y)
        losses.append(loss)
        w, state = train.adam_step(state, w, np.r_[gW.ravel(), gb], 0.1)
    assert np.all(np.diff(losses) < 0) and losses[-1] <= 1e-3


def test_feature_examples():
    model = OpqnnModel.create("qdct", 2)
    A = opqnn.basis_matrix(model, 4)
    xi0 = A[:, 0] / np.linalg.norm(A[:, 0])
    feats = classify.batch_features(model, xi0[:, None], 4, lam=0.0)[0]
    np.testing.assert_allclose(feats, [1 / np.linalg.norm(A[:, 0]), 0, 0, 0], atol=1e-12)

    big = OpqnnModel.create("qdct", 4)
    field = np.sin(np.linspace(0, 2, 16))[:, None] * np.cos(np.linspace(0, 1, 16))[None, :] + 0.5
    psi = (field / np.linalg.norm(field)).ravel()
    feats = classify.batch_features(big, psi[:, None].astype(complex), 8, lam=0.0)[0]
    idx = opqnn.enumerate_indices(big.layout, 8)
    C = np.kron(dct_basis(16), dct_basis(16))[:, idx]
    Ab = opqnn.basis_matrix(big, 8).real
    signs = np.sign(np.einsum("ij,ij->j", C, Ab))
    np.testing.assert_allclose(feats, signs * (C.T @ psi) / np.linalg.norm(Ab, axis=0), atol=1e-10)


# ---------------------------------------------------------------------------
# Chebyshev baseline


def test_chebyshev_columns():
    B = baseline.cheb_basis(8, 8, 3)
    np.testing.assert_array_equal(B.columns[:, 0], 1.0)
    np.testing.assert_allclose(B.columns[:, 1], np.tile(baseline.cell_centres(8), 8), atol=1e-15)
    # degree pair (2, 0): T_2 along rows
    B2 = baseline.cheb_basis(8, 8, 6)
    x = baseline.cell_centres(8)
    np.testing.assert_allclose(B2.columns[:, 5], np.repeat(2 * x**2 - 1, 8), atol=1e-14)


def test_chebyshev_fit_examples():
    assert baseline.cheb_fit(np.full((8, 8), 3.0), 1, lam=0.0)[1] == pytest.approx(1.0, abs=1e-12)
    x = baseline.cell_centres(8)[:, None]
    y = baseline.cell_centres(8)[None, :]
    bilinear = 1 + 2 * x - y + 0.5 * x * y
    _, fid = baseline.cheb_fit(bilinear, 5, lam=0.0)
    assert fid == pytest.approx(1.0, abs=1e-8)
    bump = np.exp(-(x**2 + y**2) * 3)
    assert baseline.cheb_fit(bump, 18, lam=0.0)[1] >= baseline.cheb_fit(bump, 2, lam=0.0)[1]


# ---------------------------------------------------------------------------
# command line


def test_chebyshev_reconstruct_of_polynomial_field(tmp_path):
    from polyqrom import data

    x = baseline.cell_centres(8)[:, None]
    y = baseline.cell_centres(8)[None, :]
    for t in range(4):
        field = data.FlowField(2 + x + (t + 1) * y + x * y, "synthetic-poly", "bc0", "u", t)
        data.save_grid(field, data.dataset_path(tmp_path / "d", field))
    out = tmp_path / "out"
    argv = ["reconstruct", "--data", str(tmp_path / "d"), "--family", "chebyshev", "--m", "5",
            "--lam", "0", "--out", str(out)]
    assert cli.main(argv) == 0
    metrics = json.loads((out / "metrics.json").read_text())
    assert metrics["test_fidelity"] == pytest.approx(1.0, abs=1e-8)
