# coding: utf-8

# # Overlaps from measurement statistics
#
# A quantum computer never hands us an amplitude. What it gives is the probability
# of an ancilla reading 0 or 1. The Hadamard test turns an inner product into such
# a probability, and the projection coefficients follow from a small linear solve.

import numpy as np

from polyqrom import data, opqnn, projection, qsim, recon
from polyqrom.opqnn import OpqnnModel
from polyqrom.projection import EstimatorConfig


# ## One overlap
#
# <0|H|0> is 1/sqrt(2). The real-part circuit reads it off as P(0) - P(1).

zero = qsim.Circuit(1)
plus = qsim.Circuit(1).add(qsim.H, 0)
print("exact:", projection.hadamard_test(zero, plus))
for shots in (100, 10_000, 1_000_000):
    est = projection.hadamard_test(zero, plus, cfg=EstimatorConfig("sampled", shots, seed=1))
    print(f"{shots:>9} shots: {est.real:.5f}  (1 sigma = {projection.hadamard_sigma(est.real, 1.0, shots):.5f})")


# ## A whole Gram matrix
#
# For a flow field on a 4x4 grid we project onto the first m basis columns of a
# cosine model. The Gram matrix needs m(m+1)/2 circuits, the cross vector m more.

field = data.synth("cavity_vortex", 4, 4)
sample = data.encode(field)
model = OpqnnModel.create("qdct", 2)
m = 5

exact = projection.project(model, sample.state, m, sesquilinear=True)
print("\nGram diagonal:", np.round(exact.gram.diagonal().real, 6))
print("coefficients:", np.round(exact.x.real, 4))


# Sampling adds noise to every entry. Tikhonov regularization keeps the solve
# stable when the noisy Gram matrix is close to singular.

prep = recon.amplitude_encode(sample.state)
sampled = EstimatorConfig("sampled", 20_000, seed=7, sesquilinear=True)
G = projection.estimate_gram(model, m, cfg=sampled)
b = projection.estimate_cross(model, prep, m, cfg=sampled)
x_noisy = projection.tikhonov_solve(G, b, 1e-3)
print("sampled coefficients:", np.round(x_noisy.real, 4))
for label, x in (("exact", exact.x), ("sampled", x_noisy)):
    loss = recon.reconstruction_loss(sample.state, model, x, method="direct")
    print(f"{label:>8} reconstruction loss: {loss:.3e}")


# ## Why the ancilla matters
#
# The cosine columns live inside the ancilla-zero sector. Their squared norm is
# the post-selection probability, which the Gram matrix records on its diagonal.

A = opqnn.basis_matrix(model, m)
print("\nnorms^2:", np.round(np.linalg.norm(A, axis=0) ** 2, 6))
