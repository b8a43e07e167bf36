"""Run the fine-grid OU noise oracle at full size and freeze the results.

Usage: python scripts/freeze_ou_oracle.py [out.json]

Takes roughly 20 minutes per (lambda, h) pair on one core.
"""

import json
import sys
import time

from rclmc.oracles import ou_noise_path_oracle

CASES = [(1.0, 0.1), (4.0, 0.05)]
N_SUBSTEPS = 100_000
N_PATHS = 1_000_000


def main():
    out = sys.argv[1] if len(sys.argv) > 1 else "tests/data/ou_noise_oracle.json"
    results = []
    for i, (lam, h) in enumerate(CASES):
        t0 = time.time()

        def progress(done, total):
            if done % 100_000 == 0:
                print(f"lam={lam} h={h}: {done}/{total} paths "
                      f"({time.time() - t0:.0f}s)", file=sys.stderr, flush=True)

        est = ou_noise_path_oracle(lam, h, N_SUBSTEPS, N_PATHS, seed=1000 + i,
                                   progress=progress)
        results.append({"lam": lam, "h": h, "n_substeps": N_SUBSTEPS,
                        "seed": 1000 + i, "seconds": round(time.time() - t0, 1),
                        **est})
    with open(out, "w") as fh:
        json.dump({"cases": results}, fh, indent=2)
        fh.write("\n")


if __name__ == "__main__":
    main()
