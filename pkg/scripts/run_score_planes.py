#!/usr/bin/env python3
"""Per-iteration output data planes of MSD-IS and the MF+SIC reference on one trial.

    python scripts/run_score_planes.py --config configs/desk.yaml --eta results/desk/eta.json --snr 10

Saves ``planes.json`` and ``planes.npz`` (one (iterations, ny, nx) array per
detector) and prints a coarse text rendering of each plane, with ``#`` on
positive cells, ``T`` at the truth and ``X`` at each estimate.  Plotting is
left to the reader's tool of choice.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from msdis.cli import main as cli_main


def render(plane, xs, ys, truth, estimates):
    rows = []
    for iy in range(len(ys) - 1, -1, -1):
        line = ""
        for ix in range(len(xs)):
            here = (xs[ix], ys[iy])
            if any(np.allclose(here, t) for t in estimates):
                ch = "X"
            elif any(np.allclose(here, t) for t in truth):
                ch = "T"
            elif np.isnan(plane[iy, ix]):
                ch = " "
            else:
                ch = "#" if plane[iy, ix] > 0 else "."
            line += ch
        rows.append(line)
    return "\n".join(rows)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--config", default="configs/desk.yaml")
    ap.add_argument("--eta", required=True)
    ap.add_argument("--out", default="results/planes")
    ap.add_argument("--trial", type=int, default=0)
    ap.add_argument("--snr", type=float, default=None)
    args = ap.parse_args(argv)

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    cmd = ["scoremap", "--config", args.config, "--eta", args.eta, "--out", str(out), "--trial", str(args.trial)]
    if args.snr is not None:
        cmd += ["--snr", str(args.snr)]
    rc = cli_main(cmd)
    if rc:
        return rc
    meta = json.loads(out.with_suffix(".json").read_text())
    planes = np.load(out.with_suffix(".npz"))
    for det in ("msdis", "jdl-sic"):
        stack = planes[det.replace("-", "_")]
        ests = meta[det]["estimates"]
        for k, plane in enumerate(stack):
            print(f"\n{det} iteration {k + 1} (max score {np.nanmax(plane):.2f})")
            print(render(plane, meta["grid_x"], meta["grid_y"], meta["truth"], ests[:k]))
        print(f"{det}: estimates {ests}, termination {meta[det]['termination']}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
