"""From per-frame class scores to detections and mAP.

Synthetic score sequences peak around each bounce. Soft suppression turns
them into scored detections. Evaluation then matches the detections to
ground truth at several frame tolerances.

Run: python3 demos/02_spotting_and_eval.py
"""

import numpy as np

from roispot import EvalConfig, NmsConfig, NmsMode, evaluate, extract_detections
from roispot.core import ScoreSequence
from roispot.spotting import aggregate_clips, clip_starts, soft_nms_1d, hard_nms_1d
from roispot.synth import SynthConfig, gen_scene, ideal_scores

print("hand example, scores [0.9, 0.8, 0.1], window 1")
print("  soft:", [(d.frame, round(d.score, 3)) for d in soft_nms_1d([0.9, 0.8, 0.1], 1)])
print("  hard:", [(d.frame, round(d.score, 3)) for d in hard_nms_1d([0.9, 0.8, 0.1], 1)])

_, truth = gen_scene(SynthConfig(frames=120, trajectory="bounce", velocity=(0.3, 0.7), start=(6.5, 3.0)))
print(f"\nground truth: {len(truth.events)} events at {[e.frame for e in truth.events]}")

# Score long videos clip by clip with 50% overlap, then average back.
scores = ideal_scores(truth.events, 120, spread=1.5).data
rng = np.random.default_rng(0)
clips = []
for s in clip_starts(120, 32):
    noisy = np.clip(scores[s:s + 32] + rng.normal(0, 0.05, scores[s:s + 32].shape), 0, 1)
    clips.append((s, noisy / noisy.sum(axis=1, keepdims=True)))
merged = ScoreSequence(aggregate_clips(clips, 120).data, probabilities=True)

for mode in (NmsMode.SOFT, NmsMode.HARD):
    dets = extract_detections(merged, NmsConfig(window=2, mode=mode), video=truth.events.video)
    reports = evaluate([dets], [truth.events], EvalConfig(tolerances=(0, 1, 2)))
    maps = ", ".join(f"mAP@{r.delta}={r.mAP:.3f}" for r in reports)
    print(f"{mode.value:>4}: {len(dets)} detections; {maps}")
