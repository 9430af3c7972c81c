"""Pretrain a single-talker backbone, freeze it, then train a Sidecar.

A short version of the acceptance protocol.  Pass ``--full`` for the
2000/3000-step run (about 15 minutes on one core); the default is a quick
pass that shows every stage but will not reach the acceptance error rates.
"""

import argparse
import time

from sidecar_mtl.backbone import Backbone, freeze
from sidecar_mtl.evaluate import evaluate
from sidecar_mtl.mixer import make_corpus
from sidecar_mtl.sidecar import MultiTalkerModel, Sidecar, SidecarConfig
from sidecar_mtl.train import OptimConfig, pretrain_single_talker, token_error_rate, train_sidecar

parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
parser.add_argument("--full", action="store_true", help="use the acceptance step counts")
args = parser.parse_args()
pre_steps, sc_steps = (2000, 3000) if args.full else (300, 300)

singles = make_corpus("single", 1000, seed=1)
mixtures = make_corpus("left-aligned", 500, seed=3)
heldout = make_corpus("left-aligned", 20, seed=4)
print("example mixture:", mixtures[0].speaker_ids, mixtures[0].transcripts, f"{mixtures[0].n_frames} frames")

t0 = time.time()
backbone = Backbone(seed=0)
_, losses = pretrain_single_talker(backbone, singles, OptimConfig(lr=2e-3, steps=pre_steps))
ter = token_error_rate(backbone, make_corpus("single", 100, seed=2))
print(f"pretrain: {pre_steps} steps, final loss {losses[-1]:.3f}, held-out TER {ter:.1%} ({time.time() - t0:.0f} s)")

freeze(backbone)
frozen_hash = backbone.parameter_hash()
model = MultiTalkerModel(backbone, Sidecar(SidecarConfig.toy(), seed=0))


def progress(step, row):
    if step % 100 == 0:
        print(f"  step {step:5d}  ctc {row['ctc']:8.3f}  diar {row['diar']:.4f}")


t0 = time.time()
train_sidecar(model, mixtures, lam=0.01, config=OptimConfig(lr=2e-3, steps=sc_steps), callback=progress)
print(f"sidecar: {sc_steps} steps in {time.time() - t0:.0f} s; backbone unchanged: "
      f"{backbone.parameter_hash() == frozen_hash}")

res = evaluate(model, heldout)
print(f"held-out permuted TER {res['wer'].wer:.1%}, DER {res['der'].der:.1%}")
row = res["per_utterance"][0]
print("first item:", row["id"], "perm", row["perm"], f"TER {row['wer']:.1%}")
