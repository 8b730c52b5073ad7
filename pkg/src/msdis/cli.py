"""Command line entry point: ``msdis {calibrate,detect,sweep,scoremap}``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .baselines import calibrate_mf_threshold
from .calibration import CalibrationResult, calibrate_eta
from .config import ConfigError, load_config
from .harness import DETECTORS, ExperimentSpec, capture_score_maps, run_detector, run_sweep, scene_targets, \
    write_metrics_csv, write_records
from .subspace import SingularCovarianceError

EXIT_USAGE = 2
EXIT_NUMERICAL = 3

log = logging.getLogger("msdis")


class UsageError(Exception):
    pass


def _load_eta(path) -> CalibrationResult:
    if path is None:
        raise UsageError("--eta is required")
    try:
        return CalibrationResult.from_json(path)
    except (OSError, ValueError, TypeError) as exc:
        raise UsageError(f"cannot read eta file {path}: {exc}") from exc


def cmd_calibrate(args) -> int:
    cfg = load_config(args.config)
    seed = cfg.seed if args.seed is None else args.seed
    model = cfg.build_model()
    c = cfg.calibration
    res = calibrate_eta(model, c.target_pfa, c.trials, seed)
    thr, achieved, _ = calibrate_mf_threshold(model, c.target_pfa, c.trials, seed)
    res = dataclasses.replace(res, mf_threshold=thr, mf_achieved_pfa=achieved)
    res.to_json(args.out)
    print(f"eta={res.eta:.6g} achieved P_fa={res.achieved_pfa:.4f} (target {res.target_pfa}); "
          f"MF threshold={thr:.6g} achieved P_fa={achieved:.4f}")
    return 0


def cmd_detect(args) -> int:
    cfg = load_config(args.config)
    cal = _load_eta(args.eta)
    spec = ExperimentSpec.from_config(cfg, cal, args.detector, seed=args.seed)
    targets = scene_targets(spec, args.trial, args.snr)
    report = run_detector(spec, targets, args.trial, record_maps=args.maps, detector=args.detector)
    out = report.to_dict()
    out["truth"] = [{"x": float(t.location[0]), "y": float(t.location[1]), "snr_db": t.snr_db}
                    for t in (targets[:1] if args.detector == "glrt-cd" else targets)]
    with open(args.out, "w") as fh:
        json.dump(out, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if args.maps:
        np.save(Path(args.out).with_suffix(".maps.npy"), np.array(report.score_maps))
    print(f"{args.detector}: {len(report.targets)} target(s), termination={report.termination}")
    return 0


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    cal = _load_eta(args.eta)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    model = cfg.build_model()
    for det in args.detector or cfg.experiment.detectors:
        if det not in DETECTORS:
            raise UsageError(f"unknown detector {det!r}")
        spec = ExperimentSpec.from_config(cfg, cal, det, seed=args.seed, model=model)
        if args.snr:
            spec.snr_sweep = list(args.snr)
        rows, records = run_sweep(spec, threads=args.threads)
        write_metrics_csv(out / f"{det}.csv", rows)
        write_records(out / f"{det}.jsonl", records)
        for r in rows:
            print(f"{det:8s} snr={r.snr_db:6.2f} pd={r.pd:.3f}±{r.pd_halfwidth:.3f} rmse={r.rmse_m:.2f} m")
    return 0


def cmd_scoremap(args) -> int:
    cfg = load_config(args.config)
    cal = _load_eta(args.eta)
    spec = ExperimentSpec.from_config(cfg, cal, "msdis", seed=args.seed)
    res = capture_score_maps(spec, args.trial, args.snr, tuple(args.detector or ("msdis", "jdl-sic")))
    payload = {"grid_x": res["grid_x"], "grid_y": res["grid_y"], "truth": res["truth"]}
    arrays = {}
    for det, d in res["detectors"].items():
        payload[det] = {"estimates": d["estimates"], "termination": d["termination"], "iterations": len(d["maps"])}
        arrays[det.replace("-", "_")] = np.array(d["maps"])
    out = Path(args.out)
    with open(out.with_suffix(".json"), "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    np.savez(out.with_suffix(".npz"), **arrays)
    print(f"wrote {out.with_suffix('.json')} and {out.with_suffix('.npz')}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="msdis", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, eta=True):
        p.add_argument("--config", required=True)
        p.add_argument("--seed", type=int, default=None, help="master seed (default: from config)")
        p.add_argument("--out", required=True)
        p.add_argument("--threads", type=int, default=1)
        if eta:
            p.add_argument("--eta", help="calibration JSON written by `calibrate`")

    p = sub.add_parser("calibrate", help="calibrate eta and the MF threshold")
    common(p, eta=False)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("detect", help="run one detector on one synthesised trial")
    common(p)
    p.add_argument("--detector", default="msdis")
    p.add_argument("--trial", type=int, default=0)
    p.add_argument("--snr", type=float, default=None, help="SNR of the first target (dB)")
    p.add_argument("--maps", action="store_true", help="also save per-iteration score maps")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("sweep", help="P_d / RMSE versus SNR of the first target")
    common(p)
    p.add_argument("--detector", action="append", help="repeatable; default from config")
    p.add_argument("--snr", type=float, nargs="*", help="override experiment.snr_sweep")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("scoremap", help="per-iteration output data planes of one trial")
    common(p)
    p.add_argument("--detector", action="append")
    p.add_argument("--trial", type=int, default=0)
    p.add_argument("--snr", type=float, default=None)
    p.set_defaults(func=cmd_scoremap)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if getattr(args, "detector", None) and isinstance(args.detector, str) and args.detector not in DETECTORS:
        print(f"error: unknown detector {args.detector!r}; choose from {', '.join(DETECTORS)}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    # LinAlgError subclasses ValueError, so it must be caught first
    except (SingularCovarianceError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ConfigError, UsageError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
