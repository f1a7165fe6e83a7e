"""Build one occluded training sample and look at what the fitter will see.

Run:  python3 demos/occlusion_synthesis.py [OUT_DIR]

A second body is placed in front of the target so that 30-50% of the target
is hidden. The script saves the unoccluded render, the occluder, the
composite and a heatmap preview, and lists which keypoints stay visible.
"""

import sys
from pathlib import Path

import numpy as np

from occbody.body_model import COCO_KEYPOINTS, make_test_body
from occbody.dataset import ParameterPool
from occbody.renderer import RasterSettings, render_silhouette, save_silhouette_png
from occbody.synth import SynthConfig, encode_heatmaps, generate_sample, occluded_fraction, stack_input

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out")
out.mkdir(parents=True, exist_ok=True)

model = make_test_body()
pool = ParameterPool.random(model, 50, seed=1)
cfg = SynthConfig(image_size=(256, 256), occlusion_probability=1.0, overlap_range=(0.3, 0.5),
                  box_probability=0.5)
sample = generate_sample(model, pool, cfg, seed=7)

full = render_silhouette(sample.gt_vertices, sample.gt_camera, RasterSettings(cfg.image_size),
                         faces=model.faces)
save_silhouette_png(out / "target_full.png", full)
save_silhouette_png(out / "occluder.png", sample.occluder)
save_silhouette_png(out / "composite.png", sample.silhouette)
print(f"hidden fraction of the target: {occluded_fraction(full, sample.silhouette):.2f}")
print(f"boxes: {sample.boxes}")

kps = sample.keypoints
for name, (x, y), v in zip(COCO_KEYPOINTS, kps.xy, kps.visibility):
    print(f"  {name:15s} ({x:6.1f}, {y:6.1f})  {'visible' if v else 'hidden'}")

heat = encode_heatmaps(kps, cfg.image_size, cfg.heatmap_sigma)
net_input = stack_input(sample.silhouette, heat)
print(f"network input tensor: {net_input.shape}; hidden keypoints have empty channels: "
      f"{all(not heat[i].any() for i in np.flatnonzero(kps.visibility == 0))}")
save_silhouette_png(out / "heatmaps_max.png", heat.max(axis=0))
print(f"images in {out}/")
