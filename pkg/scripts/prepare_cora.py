"""Convert the Cora parquet files shipped in the ``graphdatascience`` wheel.

Usage::

    pip download --no-deps graphdatascience==2.1 -d /tmp/gds
    python scripts/prepare_cora.py /tmp/gds/graphdatascience-2.1-py3-none-any.whl data/cora

Writes the canonical dataset layout (meta.json, edges.tsv, features.tsv,
labels.tsv).  Edges keep the citation direction of ``cora.cites``
(cited -> citing, as in the LINQS distribution).  Requires pandas + pyarrow.
"""
import io
import json
import sys
import zipfile
from pathlib import Path

import numpy as np
import pandas as pd

NODES = "graphdatascience/resources/cora/cora_nodes.parquet.gzip"
RELS = "graphdatascience/resources/cora/cora_rels.parquet.gzip"


def main(wheel, out):
    with zipfile.ZipFile(wheel) as z:
        nodes = pd.read_parquet(io.BytesIO(z.read(NODES)))
        rels = pd.read_parquet(io.BytesIO(z.read(RELS)))
    nodes = nodes.sort_values("nodeId").reset_index(drop=True)
    ids = {pid: i for i, pid in enumerate(nodes["nodeId"])}
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "edges.tsv", "w") as fh:
        for s, t in zip(rels["sourceNodeId"], rels["targetNodeId"]):
            fh.write(f"{ids[s]}\t{ids[t]}\n")
    with open(out / "labels.tsv", "w") as fh:
        for i, c in enumerate(nodes["subject"]):
            fh.write(f"{i}\t{int(c)}\n")
    feats = np.stack(nodes["features"].to_numpy())
    with open(out / "features.tsv", "w") as fh:
        for r, c in zip(*np.nonzero(feats)):
            fh.write(f"{r}\t{c}\t{float(feats[r, c])!r}\n")
    meta = {"name": "cora", "directed": True, "num_classes": 7,
            "num_nodes": len(nodes), "num_features": int(feats.shape[1])}
    (out / "meta.json").write_text(json.dumps(meta, indent=2) + "\n")


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])
