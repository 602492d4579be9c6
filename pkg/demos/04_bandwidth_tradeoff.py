# The bandwidth tradeoff between the two secure backends.
#
# Secret sharing moves many small ring elements in both directions (masked
# openings, triples, share uploads); encryption moves few but fat ciphertexts
# one way and pays in compute.  One epoch of each backend is measured, then
# re-priced across bandwidths under the store-and-forward model: sharing wins
# on fast links, encryption catches up as the link degrades.
#
# 512-bit demo keys keep this script fast; the acceptance suite runs the same
# sweep at the 2048-bit production key size.

from spnn.harness import bandwidth_sweep

config = {
    "dataset": {"kind": "synthetic", "rows": 1280, "d_a": 32, "d_b": 32, "seed": 5},
    "train_fraction": 0.8,
    "train": {"d_a": 32, "d_b": 32, "layer_dims": [64, 2, 8, 1],
              "activations": ["sigmoid", "sigmoid"], "learning_rate": 0.05,
              "batch_size": 256, "epochs": 1, "seed": 9, "paillier_bits": 512},
}

report = bandwidth_sweep(config, [100e3, 500e3, 1e6, 10e6, 100e6])

for mode, m in report["measured"].items():
    print(f"{mode}: {m['bytes']:>9,} bytes/epoch, {m['frames']} frames, "
          f"{m['compute_seconds']:.2f}s compute")

print(f"\n{'bandwidth':>12} {'sharing':>10} {'encryption':>11}")
for bw, ss_t, he_t in zip(report["bandwidths"], report["epoch_seconds"]["ss"],
                          report["epoch_seconds"]["he"]):
    marker = "  <- encryption faster" if he_t < ss_t else ""
    print(f"{bw/1e3:>9,.0f} K {ss_t:>9.2f}s {he_t:>10.2f}s{marker}")

crossover = report["crossover_bandwidth_bps"]
if crossover:
    print(f"\nepoch-time curves cross near {crossover/1e3:,.0f} Kbps")
