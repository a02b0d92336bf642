"""Feature-space volumes: the quality side of the tradeoff.

The volume of a subset is sqrt(det(M^T M)) over its unit-normalized
feature columns.  Distortion drags the volume away from the original's,
in either direction, so the ratio of compressed to original volume is
the fidelity diagnostic and 1.0 is the ideal.
"""

import numpy as np

from replaypack import FeatureMatrix, log_volume, normalize_columns, volume_ratio

# two unit columns at a right angle span the largest possible area (1.0);
# correlation shrinks it
orthonormal = FeatureMatrix(np.eye(2), ["a", "b"])
correlated = FeatureMatrix(np.array([[1.0, 0.6], [0.0, 0.8]]), ["a", "b"])
print(f"log volume, orthogonal pair: {log_volume(orthonormal):+.6f}")
print(f"log volume, dot-0.6 pair:    {log_volume(correlated):+.6f}")

report = volume_ratio(orthonormal, correlated)
print(f"volume ratio orthogonal/correlated: {report.ratio:.4f}\n")

# now a realistic sweep: one class of 24 samples in 32 dimensions,
# degraded by growing per-sample displacements
rng = np.random.default_rng(9)
original = rng.standard_normal((32, 24))
displacement = rng.standard_normal((32, 24))
ids = [f"s{j:02d}" for j in range(24)]

print("displacement scale -> volume ratio")
for scale in (0.0, 0.1, 0.5, 1.0, 2.0, 4.0):
    degraded = original + scale * displacement
    report = volume_ratio(
        normalize_columns(FeatureMatrix(degraded, ids)),
        normalize_columns(FeatureMatrix(original.copy(), ids)),
    )
    flag = "inside |ratio-1| < 0.5" if abs(report.ratio - 1) < 0.5 else "outside"
    print(f"  {scale:>4.1f}  {report.ratio:>8.4f}   {flag}")

print("\nzero displacement gives a ratio of exactly 1; growing displacement")
print("drags the packed subset's geometry out of the feasibility band.")
