# coding: utf-8

# # Circuits that are also transforms
#
# A QFT layer with every controlled-phase angle set to pi / 2**k is exactly the
# discrete Fourier transform, up to a reordering of the output rows. Let the angles
# drift and the same circuit becomes a trainable, slightly-off Fourier basis.
# This script builds both circuit families and checks them against numpy.

import numpy as np

from polyqrom import opqnn, qsim
from polyqrom.opqnn import OpqnnModel
from polyqrom.validation import dct_basis, dft_matrix

np.set_printoptions(precision=3, suppress=True, linewidth=110)


# ## The QFT layer
#
# Three qubits, three angles. The layer on its own leaves the outputs in
# bit-reversed order, so we compare against the DFT with its rows permuted.

n = 3
theta = opqnn.canonical_qft_params(n)
print("canonical angles:", theta)

U = qsim.circuit_unitary(opqnn.build_qft_layer(n, theta))
rev = [int(format(i, f"0{n}b")[::-1], 2) for i in range(2**n)]
print("max error vs permuted DFT:", np.abs(U - dft_matrix(2**n)[rev, :]).max())


# A model of the "qft" family appends the swap network, so its columns line up
# with the DFT directly. One axis here, the second axis comes later.

model = OpqnnModel.create("qft", n, axes=1)
A = opqnn.basis_matrix(model, 2**n, "natural")
print("qft model vs DFT:", np.abs(A - dft_matrix(2**n)).max())


# ## Nudging the angles
#
# Move each angle a little and the columns stay orthonormal (it is still a
# unitary), but they are no longer Fourier modes.

nudged = model.with_params(theta + 0.1)
B = opqnn.basis_matrix(nudged, 2**n, "natural")
print("still unitary:", np.allclose(B.conj().T @ B, np.eye(2**n)))
print("distance from the DFT:", np.abs(B - dft_matrix(2**n)).max())


# ## The QDCT layer
#
# The cosine family uses one ancilla. Keeping only the ancilla-zero outcome turns
# the unitary into the DCT-II matrix when the angles are canonical.

qdct = OpqnnModel.create("qdct", n, axes=1)
print("qdct parameters:", qdct.n_params, "(n(n+1)/2 =", n * (n + 1) // 2, ")")
C = opqnn.basis_matrix(qdct, 2**n, "natural").real
signs = np.sign(np.sum(C * dct_basis(2**n), axis=0))
print("max error vs DCT-II:", np.abs(C * signs - dct_basis(2**n)).max())
print("column norms:", np.linalg.norm(C, axis=0))


# With random angles the post-selected block stops being unitary and the
# columns lose weight to the discarded ancilla-one branch.

rough = OpqnnModel.create("qdct", n, axes=1, init="random", seed=4)
print("random-angle column norms:", np.linalg.norm(opqnn.basis_matrix(rough, 2**n, "natural"), axis=0))


# ## Two axes
#
# Grids are encoded row-major, so a 2-D basis is a Kronecker product of two
# one-axis bases on separate registers.

grid_model = OpqnnModel.create("qft", 2)
col = opqnn.basis_column(grid_model, 1 * 4 + 2)
print("column (1, 2) is kron(F[:,1], F[:,2]):",
      np.allclose(col, np.kron(dft_matrix(4)[:, 1], dft_matrix(4)[:, 2])))
