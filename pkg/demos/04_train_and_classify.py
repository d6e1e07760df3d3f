# coding: utf-8

# # Training the angles, then using them as features
#
# Part one trains a Fourier circuit to reconstruct wake snapshots. Part two freezes
# the circuit idea into a feature extractor and trains a small softmax layer to tell
# four synthetic flows apart. Epoch counts are kept low so this runs in seconds.

import numpy as np

from polyqrom import classify, data, experiments, train
from polyqrom.opqnn import OpqnnModel
from polyqrom.train import TrainConfig


# ## Reconstruction training
#
# The loss is the mean of 1 - F over the training snapshots. Gradients come from
# central finite differences, the optimizer is Adam, and the rate decays by ten
# every few epochs.

fields = data.synth_dataset(["cylinder_wake"], 8, 8, range(6), ("u",))
train_set, test_set = experiments.split_dataset(fields, "comprehensive", 0.8, seed=0, flow_type="cylinder")
cfg = TrainConfig(epochs=12, decay_period_epochs=4, base_lr=0.05, m=6)

model = OpqnnModel.create("qft", 3, init="random", seed=2)
trained, hist = train.train_reconstruction(model, experiments.states_of(train_set),
                                           experiments.states_of(test_set), cfg)
print(f"train loss {hist.initial_train_loss:.4f} -> {hist.train_loss[-1]:.4f}")
print(f"test fidelity {hist.initial_test_metric:.4f} -> {hist.final_test_metric:.4f}")
print("lr by epoch:", [f"{r.lr:g}" for r in hist.records])


# ## Classification
#
# Each snapshot becomes the real and imaginary parts of its first m projection
# coefficients. With m = 6 on a 16x16 grid that is 12 features, 12 circuit angles
# and a 12 x 4 softmax layer: 64 parameters in all.

samples, labels, types = experiments.classification_dataset(16, 16, range(4))
print("\nclasses:", types, "samples:", len(samples))
report, _ = experiments.classification_run("qft", samples, labels, TrainConfig(epochs=15), m=6)
print(f"accuracy {report.accuracy:.3f} with {report.parameter_budget} parameters")
print("per-class precision:", np.round(report.per_class_precision, 3))


# The Chebyshev baseline uses the same features and head, minus the circuit.

cheb, _ = experiments.classification_run("chebyshev", samples, labels, TrainConfig(epochs=15), m=6)
print(f"chebyshev accuracy {cheb.accuracy:.3f} with {cheb.parameter_budget} parameters")
print(classify.reports_to_csv([report, cheb], wall_time=False))
