"""Generate solved samples, learn commitments, then solve reduced models.

Small sizes keep the run under a minute. ``ucreduce run`` executes the full
experiment from the bundled config.
"""
from ucreduce import (LrConfig, NoiseParams, ProcedureId, generate_dataset, load_bundled,
                      run_procedure, shuffle_split, train_ensemble, tune_threshold)
from ucreduce.lr import threshold_accuracies

system = load_bundled()
dataset = generate_dataset(system, 30, NoiseParams(0.03, 0.05, master_seed=7))
dataset = shuffle_split(dataset, 0.8, seed=7)
print(f"{len(dataset)} samples, {len(dataset.train)} train / {len(dataset.test)} test")

ensemble = train_ensemble(dataset.train, LrConfig(C=0.03), dataset.system_hash)
threshold = tune_threshold(ensemble, dataset.train)
ensemble = ensemble.with_threshold(threshold)
test_acc = threshold_accuracies(ensemble, dataset.test, [threshold])[threshold]
print(f"threshold {threshold:.2f}, test accuracy {test_acc:.4f}")

for sample in dataset.test[:3]:
    prediction = ensemble.predict(sample.demand)
    b1 = run_procedure(ProcedureId.B1, system, sample.demand)
    line = [f"sample {sample.sample_id}: B1 {b1.objective:.1f} ({b1.nodes_explored} nodes)"]
    for proc in (ProcedureId.B2, ProcedureId.P1, ProcedureId.P2):
        out = run_procedure(proc, system, sample.demand, prediction)
        obj = "infeasible" if not out.feasible else f"{out.objective:.1f}"
        line.append(f"{proc.value} {obj} ({out.n_fixed_u} fixed)")
    print("  ".join(line))
