"""Writes a dense float32 block as FMX1 plus its registry sidecar, the way an
external exporter would, and a plain-text dump of the dense values.

usage: write_fmx.py OUT.fmx ROWS COLS SEED
"""
import json
import struct
import sys

import numpy as np


def write_fmx(path, dense):
    rows, cols = dense.shape
    row_ptr = [0]
    col_idx = []
    values = []
    for r in range(rows):
        nz = np.flatnonzero(dense[r])
        col_idx.extend(int(c) for c in nz)
        values.extend(dense[r, nz].tolist())
        row_ptr.append(len(values))
    with open(path, "wb") as f:
        f.write(b"FMX1")
        f.write(struct.pack("<I", 1))
        f.write(struct.pack("<QQQ", rows, cols, len(values)))
        f.write(np.asarray(row_ptr, dtype="<u8").tobytes())
        f.write(np.asarray(col_idx, dtype="<u4").tobytes())
        f.write(np.asarray(values, dtype="<f4").tobytes())


def main():
    out, rows, cols, seed = sys.argv[1], int(sys.argv[2]), int(sys.argv[3]), int(sys.argv[4])
    rng = np.random.default_rng(seed)
    dense = rng.standard_normal((rows, cols)).astype(np.float32)
    dense[rng.random((rows, cols)) < 0.3] = 0.0
    write_fmx(out, dense)
    stem = out[: -len(".fmx")] if out.endswith(".fmx") else out
    registry = {
        "schema_version": 1,
        "n_cols": cols,
        "features": [{"index": j, "name": f"embedding_{j}", "category": "embedding"} for j in range(cols)],
    }
    with open(stem + ".registry.json", "w") as f:
        json.dump(registry, f)
    with open(stem + ".dense.txt", "w") as f:
        f.write(f"{rows} {cols}\n")
        for r in range(rows):
            f.write(" ".join(float(v).hex() for v in dense[r]) + "\n")


if __name__ == "__main__":
    main()
