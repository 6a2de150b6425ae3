#!/usr/bin/env python3
"""Precompute the fine-grid reference lattice used by the zero-forcing
convergence table. Safe to rerun: a valid cache is returned immediately.

    GHEAT2D_CACHE_DIR=.cache python3 scripts/build_reference.py
"""

import sys
import time

from gheat2d.bench import reference_solution


def main() -> int:
    t0 = time.time()
    last = {"pct": -1}

    def progress(q, total):
        pct = (100 * q) // total
        if pct != last["pct"]:
            last["pct"] = pct
            print(f"{pct:3d}%  level {q}/{total}  {time.time() - t0:7.1f}s", flush=True)

    ref = reference_solution(progress=progress)
    print(f"done in {time.time() - t0:.1f}s; lattice shape {ref.values.shape}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
