"""Tape autodiff, CTC and permutation-invariant CTC on tiny arrays.

Run with ``python3 demos/01_autodiff_and_ctc.py``; finishes in a second.
"""

import numpy as np

from sidecar_mtl import tensor as T
from sidecar_mtl.objectives import ctc_brute_force, ctc_loss, pit_ctc
from sidecar_mtl.tensor import Tape, Tensor, grad_check

rng = np.random.default_rng(0)

# ---- gradients come from a tape of recorded ops
w = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
x = Tensor(rng.normal(size=(2, 3)))
with Tape() as tape:
    y = T.sum_(T.mul(T.sigmoid(T.matmul(x, w)), 2.0))
tape.backward(y)
print("loss", float(y.data))
print("d loss / d w\n", np.round(w.grad, 4))
print("finite-difference relative error", grad_check(lambda w: T.sum_(T.mul(T.sigmoid(T.matmul(x, w)), 2.0)), [w]))

# ---- CTC: forward-backward against explicit path enumeration
logits = rng.normal(size=(5, 3)) * 2
log_probs = logits - np.log(np.exp(logits).sum(axis=1, keepdims=True))
target = [1, 1]  # a repeat needs a blank in between, so T >= 3
print("\nctc", float(ctc_loss(Tensor(log_probs), target).data))
print("brute force", ctc_brute_force(log_probs, target))

# ---- PIT: streams are emitted in swapped order; the permutation undoes it
targets = [[1, 2], [2, 1]]
streams = np.full((2, 6, 3), -4.0)
for s, seq in enumerate(targets[::-1]):
    frames = [0, seq[0], seq[0], 0, seq[1], 0]
    streams[s, np.arange(6), frames] = 0.0
streams -= np.log(np.exp(streams).sum(axis=-1, keepdims=True))
loss, perm = pit_ctc(Tensor(streams), targets)
print("\npit loss", round(float(loss.data), 4), "perm", perm, "(perm[s] = stream scored against target s)")
