# coding: utf-8

# # Reconstructing a flow field
#
# We take one snapshot of a synthetic lid-driven cavity, keep only m coefficients,
# and rebuild the grid. The fidelity tells how much of the normalized field the
# truncated basis captures, and it can only grow as m grows.

import numpy as np

from polyqrom import baseline, data, opqnn, projection, recon
from polyqrom.opqnn import OpqnnModel

field = data.synth("cavity_vortex", 16, 16, t=3, component="u")
sample = data.encode(field)
print("grid", field.values.shape, "norm", round(sample.norm, 4))


# ## Fidelity against the number of kept modes

models = {fam: OpqnnModel.create(fam, 4) for fam in ("qft", "qdct")}
print("\n m   qft      qdct     chebyshev")
for m in (2, 4, 8, 12, 18):
    row = []
    for model in models.values():
        A = opqnn.basis_matrix(model, m)
        row.append(recon.batch_fidelities(A, sample.state[:, None], 1e-6)[0])
    row.append(baseline.cheb_fit(field, m)[1])
    print(f"{m:>2}  " + "  ".join(f"{f:.5f}" for f in row))


# ## Rebuilding the grid
#
# Multiply the coefficients back onto the columns and restore the norm. The
# truncation error shows up as a small MSE on the physical values.

model = models["qdct"]
m = 12
A = opqnn.basis_matrix(model, m)
x = projection.project(model, sample.state, m, sesquilinear=True).x
grid = recon.reconstruct_grid(A, x, sample.norm, field.values.shape)
print("\nmse at m=12:", recon.mse(grid, field.values))


# ## The same state as a circuit
#
# The linear combination of unitaries prepares A x / |A x| directly, succeeding
# with probability |A x|^2 / (sum |x|)^2. A swap test then compares it with the
# encoded data.

state, p_success = recon.lcu_reconstruct(model, x)
report = recon.swap_test(sample.state, state)
print("LCU success probability:", round(p_success, 4))
print("swap-test fidelity:", round(report.fidelity, 6), "from P(0) =", round(report.p0, 6))
