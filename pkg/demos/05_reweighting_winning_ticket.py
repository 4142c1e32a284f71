"""Pruning down to the teacher's size without losing accuracy.

A converged 6-node student is pruned to k_n = 2 = M nodes with the DPP on
its overlap kernel, which keeps one specialist per teacher node.  Least
squares on probe activations then refits the two surviving second-layer
weights to reproduce the full student's output.  The reweighted subnetwork
matches the unpruned error scale even though it has a third of the nodes:
the overparameterized student contains a small equally-good subnetwork, and
diverse sampling plus reweighting finds it.

Run:  python demos/05_reweighting_winning_ticket.py
"""

import numpy as np

from prunelab import analytics, harness, pruning, theory

cfg = harness.panel_config(harness.ExperimentConfig(), 0.0)
state = harness.prepare_round(cfg, 0)
student, teacher = state.student, state.teacher

unpruned = analytics.ge_from_outputs(state.acts_test @ student.v, state.y_test)
print(f"unpruned student ({cfg.K} nodes): GE = {unpruned.value:.4f}")

rng = np.random.default_rng(11)
probe_rng = np.random.default_rng(12)
probes = probe_rng.standard_normal((10_000, cfg.N))

mask = pruning.prune_dpp_node(state.kernel, cfg.M, rng)
plain = pruning.apply_mask(student, mask)
rw = pruning.reweight_node(student, mask, probes)

ge_plain = analytics.ge_monte_carlo(plain, teacher, 80_000, np.random.default_rng(13))
ge_rw = analytics.ge_monte_carlo(rw, teacher, 80_000, np.random.default_rng(13))
p = theory.TheoryParams(M=cfg.M, Z=cfg.Z, v_star=cfg.v_star, k_n=cfg.M)

print(f"\nDPP mask keeps nodes {mask.kept} of {cfg.K}")
print(f"pruned, no reweighting: GE = {ge_plain.value:.4f}   closed form {theory.ge_dpp_node(p):.4f}")
print(f"pruned + least squares: GE = {ge_rw.value:.4f}   closed form {theory.ge_dpp_node_reweighted(p):.4f}")
print(f"surviving second layer: {np.round(rw.v, 3)}  (teacher weight {cfg.v_star})")

# random node pruning usually cannot do this: with probability about 0.4 the
# two survivors explain the same teacher node and reweighting cannot recover
rand_ge = []
for _ in range(100):
    m = pruning.prune_random_node(cfg.K, cfg.M, rng)
    net = pruning.reweight_node(student, m, probes)
    rand_ge.append(analytics.ge_monte_carlo(net, teacher, 5_000, np.random.default_rng(14)).value)
print(f"\nreweighted random masks, mean GE over 100 draws: {np.mean(rand_ge):.3f}")
