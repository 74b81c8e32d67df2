"""Compute cost of a low-resolution pass plus RoI crops.

Cost is taken to scale with the number of pixels processed. The reference
model costs 23.13 GFLOPs per clip at 224x224. A second branch that sees only
112x112 RoIs handles a quarter of those pixels, so it adds about 5.8 GFLOPs.

Run: python3 demos/03_cost_model.py
"""

from roispot import cost_ratio, gflops_estimate

BASE = (224, 224)
BASE_GFLOPS = 23.13

for roi in [(96, 96), (112, 112), (168, 168), (224, 224)]:
    extra = gflops_estimate([roi], BASE, BASE_GFLOPS)
    total = gflops_estimate([BASE, roi], BASE, BASE_GFLOPS)
    print(f"RoI {roi[0]}x{roi[1]}: branch ratio {cost_ratio([roi], BASE):.4f}, "
          f"+{extra:.2f} GFLOPs, total {total:.2f}")

# Relative to processing the full 448x448 frame instead:
ratio = cost_ratio([(224, 224), (112, 112)], (448, 448))
print(f"\n224x224 view + 112x112 RoI vs 448x448 frame: {ratio} of the pixels")
