"""
Mining snippet masks from a frozen backbone
===========================================

A miner backbone is trained on sub-sampled features, so that stretched
(slow) instances play back at roughly normal pace. Its per-snippet
activations are then normalised, smoothed and thresholded into a 0/1 mask
at the original frame rate.
"""

import numpy as np
from dataclasses import replace

from smen.mining import MiningConfig, generate_mask, smooth_activations, smoothing_exponent
from smen.pipeline import default_config, train_miner
from smen.synthgen import SynthConfig, generate

# The smoothing step on its own: a two-snippet track with mean 0.5 and
# population std 0.3 has coefficient of variation 0.6, so alpha = 1 - 0.3 * 0.6.
m = np.array([0.2, 0.8])
print("alpha =", smoothing_exponent(m, 0.3))
print("smoothed =", smooth_activations(m, 0.3))

# A small corpus and a short miner run.
corpus = generate(SynthConfig(num_videos=16, seed=1))
cfg = default_config(seed=1)
cfg = replace(cfg, miner_train=replace(cfg.miner_train, iterations=200))
miner, curve = train_miner(corpus, cfg, seed=1)
print(f"miner loss {curve[0]:.3f} -> {curve[-1]:.3f}")


def ground_truth_row(video):
    row = np.full(video.features.T, ".")
    for g in video.gts:
        s = round(g.start_sec / video.features.snippet_seconds)
        e = round(g.end_sec / video.features.snippet_seconds)
        row[s:e] = "S" if g.slow_motion else "n"
    return "".join(row)


# Compare masks with the planted instances: "n" normal pace, "S" slow motion.
for video in corpus[:4]:
    mask = generate_mask(miner, video.features, MiningConfig())
    print(video.video_id)
    print("  truth", ground_truth_row(video))
    print("  mask ", mask.to_bitstring())

# Turning smoothing off usually keeps fewer snippets, since x ** alpha >= x.
for smooth in (True, False):
    kept = [generate_mask(miner, v.features, MiningConfig(smooth_enabled=smooth)).bits.mean() for v in corpus]
    print(f"smoothing {'on ' if smooth else 'off'}: {np.mean(kept):.2f} of snippets kept")
