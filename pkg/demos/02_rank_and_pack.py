"""Exemplar ranking and budget packing: the quantity side of the tradeoff.

Ranks one class by distance to its feature mean, then packs the ranking
prefix into a fixed byte budget at several qualities.  Lower quality
means smaller blobs, so more of the ranking fits.
"""

import numpy as np

from replaypack import (
    SampleRecord,
    SyntheticBackend,
    FeatureMatrix,
    quantity_curve,
    rank_by_mean_of_feature,
)

rng = np.random.default_rng(4)

# 30 samples around a common center; the most typical ones rank first
center = rng.standard_normal(8) * 3.0
values = center[:, None] + rng.standard_normal((8, 30))
ids = [f"bird-{j:02d}" for j in range(30)]
features = FeatureMatrix(values.astype(np.float32), ids)

ranking = rank_by_mean_of_feature(features, "bird")
print("closest five to the class mean:")
for sample_id, dist in list(zip(ranking.ranked_ids, ranking.distances))[:5]:
    print(f"  {sample_id}  distance {dist:.3f}")

# every sample is nominally 1000 bytes; the budget holds 6 originals
samples = {
    s: SampleRecord(s, "bird", 0, f"payloads/{s}.bin", 1000) for s in ids
}
budget_bytes = 6 * 1000
backend = SyntheticBackend()

print(f"\nbudget {budget_bytes} bytes, modeled size scales with quality:")
print("quality  stored  bytes  rate")
for result in quantity_curve(
    ranking, (10, 25, 50, 75, 90, 100), budget_bytes, backend, samples
):
    print(
        f"  q={result.quality:<4}  {result.n_q_mb:>4}  {result.bytes_used:>6}"
        f"  {result.compression_rate:.2f}x"
    )

# the stored set at any quality is a prefix of the same ranking, so a
# harsher quality never changes WHICH samples come first, only how many
low = quantity_curve(ranking, (10,), budget_bytes, backend, samples)[0]
high = quantity_curve(ranking, (90,), budget_bytes, backend, samples)[0]
print(f"\nq=90 set is a prefix of the q=10 set: "
      f"{low.selected_ids[: high.n_q_mb] == high.selected_ids}")
