"""End-to-end at small scale: generate a dataset with the FEM oracle,
train the message-passing surrogate and the dense baseline, and compare
them with the tolerance-based metrics.

Uses a small case count so the whole script runs in under a minute; the
package defaults (500 cases, 100 epochs) behave the same way, just better.
"""

from framelab.dataset import DatasetConfig, generate_dataset, split_dataset
from framelab.evaluate import ZONE_PROFILE, emit_case_table, emit_report, evaluate
from framelab.frame import LoadCase, build_reference_frame
from framelab.train import TrainConfig, train

frame = build_reference_frame()

config = DatasetConfig(n_cases=150, seed=0)
records = generate_dataset(frame, config)
n_linear = sum(r.regime == "linear" for r in records)
print("dataset: %d cases (%d linear / %d nonlinear by FEM label)"
      % (len(records), n_linear, len(records) - n_linear))

train_recs, test_recs = split_dataset(records, 0.85, seed=0)
print("split: %d train / %d test" % (len(train_recs), len(test_recs)))

train_config = TrainConfig(seed=0, max_epochs=60)
print("\ntraining surrogate (edge-conditioned message passing)...")
gnn, stats, hist = train("gnn", frame, train_recs, test_recs, train_config)
print("  best test loss %.3e at epoch %d" % (hist.best_test_loss, hist.best_epoch))

print("training dense baseline (forces -> responses)...")
nn, _, hist_nn = train("nn", frame, train_recs, test_recs, train_config)
print("  best test loss %.3e at epoch %d" % (hist_nn.best_test_loss, hist_nn.best_epoch))

for name, model in (("surrogate", gnn), ("baseline", nn)):
    report = evaluate(model, stats, frame, test_recs, ZONE_PROFILE, dataset_name="testing")
    print("\n%s:" % name)
    print(emit_report(report, "text"))

print("surrogate predictions vs FEM for one held-out-style case:")
print(emit_case_table(gnn, stats, frame, LoadCase(200e3, 150e3)))
