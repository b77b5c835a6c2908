"""An RGB image that no camera took.

Bands 3, 2 and 1 (red, green, blue) are pulled back into the reference
band's frame and stacked. The objects line up, so a person can label the
composite once and the labels are pushed back into every band.
"""

import sys
from pathlib import Path

import numpy as np

from multilens import BandAssignment, Displacement, RegistryEntry, TransformRegistry
from multilens import back_transfer_labels, compose_rgb, match_and_score
from multilens.raster import save_rgb_png
from multilens.synth import make_scene

out = Path(sys.argv[1] if len(sys.argv) > 1 else "fake_rgb.png")
rng = np.random.default_rng(4)
offsets = {
    "5": Displacement(0, 0),
    "1": Displacement(-52.0, 47.0),
    "2": Displacement(53.9, 46.1),
    "3": Displacement(52.9, -23.4),
}
scene = make_scene(rng, 640, 480, offsets)

registry = TransformRegistry()
for band, d in offsets.items():
    if band != "5":
        registry.put("5", band, "bb", RegistryEntry(d, 1.0))

assign = BandAssignment.from_registry(registry, "5", "bb")
rgb = compose_rgb([scene.images[b] for b, _ in assign.channels], assign)
save_rgb_png(rgb, out)
print(f"wrote {out} ({rgb.shape[1]}x{rgb.shape[0]})")

# black borders: the parts of the reference view that a lens never saw
for name, ch in zip("RGB", np.moveaxis(rgb, -1, 0)):
    print(f"{name}: {np.mean(ch == 0):.1%} of pixels outside that lens's view")

# labels drawn on the composite live in the reference frame
drawn = scene.boxes["5"]
per_band = back_transfer_labels(drawn, registry, offsets, "5", "bb")
for band, labels in per_band.items():
    print(f"band {band}: IoU {100 * match_and_score(labels, scene.boxes[band]).mean_iou:.2f}%")
