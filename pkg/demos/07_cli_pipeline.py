# %% [markdown]
# Batch pipeline through the command line entry point
#
# Same as running `handgeom synth ...` etc. from a shell. Every step writes a
# manifest with the config hash, seed and input digests.

# %%
import json
import tempfile
from pathlib import Path

from handgeom.cli import main

work = Path(tempfile.mkdtemp())
a = str(work / "hands.jsonl")

main(["synth", "--count", "50", "--seed", "7", "--out", a])
main(["stats", a, "--out", str(work / "stats.json")])
main(["eval", a, a, "--out", str(work / "eval.json")])
main(["heatmap", a, "--scale", "0.2", "--out", str(work / "heatmaps")])

manifest = json.loads((work / "stats.json.manifest.json").read_text())
print(manifest["config_sha256"][:16], manifest["inputs"])
