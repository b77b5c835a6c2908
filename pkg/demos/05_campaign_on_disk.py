"""The whole loop through files, the way the command line runs it.

synth writes a dataset (PNG bands, LabelMe annotations, a manifest);
calibrate fills the transform registry; transfer writes per-band LabelMe
files; evaluate scores them. Equivalent shell session:

    multilens synth --out ds --seed 5
    multilens calibrate --manifest ds/manifest.json --registry ds/registry.json --both-kinds
    multilens transfer --manifest ds/manifest.json --registry ds/registry.json --out ds/pred
    multilens evaluate --pred ds/pred --gt ds/annotations/bb --pattern 'eval*__band*.json'
"""

import json
import sys
import tempfile
from pathlib import Path

from multilens.cli import main

root = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp(prefix="multilens-"))
ds = root / "ds"
manifest, registry = ds / "manifest.json", ds / "registry.json"

steps = [
    ["synth", "--out", str(ds), "--seed", "5"],
    ["calibrate", "--manifest", str(manifest), "--registry", str(registry), "--both-kinds",
     "--timing-repeats", "1"],
    ["transfer", "--manifest", str(manifest), "--registry", str(registry), "--out",
     str(ds / "pred"), "--json"],
    ["evaluate", "--pred", str(ds / "pred"), "--gt", str(ds / "annotations" / "bb"),
     "--pattern", "eval*__band*.json"],
]
for argv in steps:
    print(f"\n$ multilens {' '.join(argv)}")
    code = main(argv)
    if code:
        sys.exit(code)

entries = json.loads(registry.read_text())["entries"]
key = next(iter(entries))
print(f"\nregistry entry {key}: {json.dumps(entries[key], indent=1)}")
sample = sorted((ds / "pred").glob("eval000__band1.json"))[0]
shape = json.loads(sample.read_text())["shapes"][0]
print(f"{sample.name}, first shape: {shape['label']} {shape['shape_type']} {shape['points']}")
