#!/usr/bin/env python3
"""Walk through the sequence model: forward pass, training, gradient check.

The model is a single-layer LSTM with a linear head, stored as two flat
parameter vectors. This script trains it on one synthetic vehicle and then
verifies the hand-written backpropagation against finite differences.
"""

import numpy as np

from fedsim.data import BBox, make_windows, synth_trajectories
from fedsim.nn import (
    Dims,
    ParamSet,
    TrainBatch,
    backward,
    batch_objective,
    forward,
    init_params,
    mse_loss,
)
from fedsim.training import evaluate_rmse, train_local

rng = np.random.default_rng(0)
dims = Dims(n_in=2, n_hidden=16, n_out=2)
model = init_params(dims, rng)
print(f"model dims {dims}: {dims.lstm_size} recurrent + {dims.fc_size} head parameters")

# one vehicle, normalized into the unit square, 6-step windows
traj = synth_trajectories(seed=1, n_vehicles=1, points_each=200, kind="sinusoid")[0]
bbox = BBox.from_points(traj.coords)
inputs, targets = make_windows(bbox.normalize(traj.coords), seq_len=6)
split = int(0.8 * inputs.shape[0])
print(f"{inputs.shape[0]} windows -> {split} train / {inputs.shape[0] - split} holdout")

preds, hidden = forward(model, TrainBatch(inputs[:split], targets[:split]))
print(f"before training: loss {mse_loss(preds, targets[:split]):.5f}")

model = train_local(
    model, inputs[:split], targets[:split], epochs=400, eta=0.05, batch_size=16, rng=rng
)
print(f"after 400 epochs: holdout RMSE {evaluate_rmse(model, inputs[split:], targets[split:]):.5f}")
last_step = inputs[split:, -1, :]
persistence = float(np.sqrt(np.mean((last_step - targets[split:]) ** 2)))
print(f"persistence baseline (predict the last seen point): {persistence:.5f}")

# gradient check on a small instance: analytic BPTT vs central differences
small = Dims(2, 6, 2)
check_model = init_params(small, rng)
check_batch = TrainBatch(rng.normal(size=(4, 4, 2)), rng.normal(size=(4, 2)))
analytic = backward(check_model, check_batch).flat()
flat = check_model.flat()
numeric = np.zeros_like(flat)
for k in range(flat.size):
    bumped = flat.copy()
    bumped[k] += 1e-5
    hi = batch_objective(ParamSet.from_flat(bumped, small), check_batch)
    bumped[k] -= 2e-5
    lo = batch_objective(ParamSet.from_flat(bumped, small), check_batch)
    numeric[k] = (hi - lo) / 2e-5
rel = np.max(np.abs(analytic - numeric) / np.maximum(1.0, np.abs(numeric)))
print(f"gradient check over {flat.size} parameters: max relative error {rel:.2e}")
