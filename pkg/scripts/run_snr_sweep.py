#!/usr/bin/env python3
"""Calibrate, then sweep P_d and RMSE of the first target versus its SNR for all three receivers.

    python scripts/run_snr_sweep.py --config configs/desk.yaml --out results/desk

Writes ``eta.json`` plus one CSV and one JSON-lines file per detector into
``--out`` and prints a side-by-side table.  An existing ``eta.json`` is reused.
"""

import argparse
import csv
import sys
from pathlib import Path

from msdis.cli import main as cli_main


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--config", default="configs/desk.yaml")
    ap.add_argument("--out", default="results/desk")
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--snr", type=float, nargs="*", help="override the configured sweep")
    args = ap.parse_args(argv)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    eta = out / "eta.json"
    if not eta.exists():
        rc = cli_main(["calibrate", "--config", args.config, "--out", str(eta)])
        if rc:
            return rc
    cmd = ["sweep", "--config", args.config, "--eta", str(eta), "--out", str(out), "--threads", str(args.threads)]
    if args.snr:
        cmd += ["--snr", *map(str, args.snr)]
    rc = cli_main(cmd)
    if rc:
        return rc

    tables = {}
    for path in sorted(out.glob("*.csv")):
        with open(path) as fh:
            tables[path.stem] = list(csv.DictReader(fh))
    names = list(tables)
    print("\nsnr_db  " + "  ".join(f"{n:>18s}" for n in names) + "   (P_d / RMSE m)")
    for i, row in enumerate(tables[names[0]] if names else []):
        cells = [f"{float(tables[n][i]['pd']):.3f} / {float(tables[n][i]['rmse_m']):6.2f}" for n in names]
        print(f"{float(row['snr_db']):6.2f}  " + "  ".join(f"{c:>18s}" for c in cells))
    return 0


if __name__ == "__main__":
    sys.exit(main())
