"""Command-line surface: synth | decompose | detect | evaluate | sweep.

Exit codes: 0 success, 1 usage error, 2 data error, 3 non-convergence
under --strict. Failed run directories are flagged with a FAILED file.
"""

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .detection import components_to_boxes, match_and_score, resolve_threshold, segment
from .errors import (
    DataFormatError,
    DegenerateInputError,
    ElsdError,
    GeometryError,
    InvalidInputError,
    InvalidParameterError,
    ProxStalledError,
    ScenarioError,
)
from .io import (
    RunManifest,
    format_report,
    load_frames,
    load_matrix,
    read_dets_csv,
    read_gt_csv,
    save_matrix,
    write_dets_csv,
    write_frames,
    write_gt_csv,
    write_history_csv,
    write_metrics_csv,
    write_summary_csv,
)
from .linalg import FrameMatrix
from .solver import ELSD, LSD, SolverConfig, solve
from .structured import build_grid_groups
from .synth import SynthScenario, generate

_USAGE_ERRORS = (InvalidParameterError,)
_DATA_ERRORS = (DataFormatError, InvalidInputError, GeometryError,
                ScenarioError, DegenerateInputError, ProxStalledError)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        sys.exit(1)


class NotConverged(ElsdError):
    pass


def _parse_grid(spec, integer=False):
    """Grid spec: ``a:b:k`` (k geometric points from a to b) or a comma list."""
    try:
        if ":" in spec:
            a, b, k = spec.split(":")
            values = np.geomspace(float(a), float(b), int(k))
        else:
            values = np.array([float(v) for v in spec.split(",")])
    except ValueError as exc:
        raise InvalidParameterError(f"bad grid spec {spec!r}: {exc}") from exc
    if integer:
        return [int(round(v)) for v in values]
    return [float(v) for v in values]


def _solver_config(args):
    return SolverConfig(
        lambda1=args.lambda1,
        lambda2=args.lambda2,
        mu0=args.mu0,
        rho=args.rho,
        tau=args.tau,
        max_iters=args.max_iters,
        mode=args.mode,
        prox_tol=args.prox_tol,
    )


def _add_solver_flags(sp):
    sp.add_argument("--lambda1", type=float, default=None,
                    help="structured-sparsity weight (default 1/sqrt(p))")
    sp.add_argument("--lambda2", type=float, default=None,
                    help="residual weight (default 15*lambda1)")
    sp.add_argument("--mode", choices=[ELSD, LSD], default=ELSD)
    sp.add_argument("--tau", type=float, default=1e-7,
                    help="relative stop tolerance")
    sp.add_argument("--mu0", type=float, default=None,
                    help="initial penalty (default 1.25/||D||_2)")
    sp.add_argument("--rho", type=float, default=1.5, help="penalty growth")
    sp.add_argument("--max-iters", type=int, default=500, dest="max_iters")
    sp.add_argument("--prox-tol", type=float, default=1e-9, dest="prox_tol")
    sp.add_argument("--batch", type=int, default=0,
                    help="batch length (0 = all frames in one batch)")
    sp.add_argument("--window", type=int, default=3,
                    help="sliding-window size for the group construction")


def build_parser():
    parser = _Parser(prog="elsd", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("synth", help="generate a synthetic scenario")
    sp.add_argument("--scenario", required=True, help="scenario JSON file")
    sp.add_argument("--out", required=True, help="output directory")
    sp.add_argument("--bits", type=int, choices=[8, 16], default=16,
                    help="frame bit depth")

    sp = sub.add_parser("decompose", help="run the decomposition")
    sp.add_argument("--in", dest="indir", required=True,
                    help="frame directory or raw matrix file")
    sp.add_argument("--out", required=True, help="output directory")
    _add_solver_flags(sp)
    sp.add_argument("--strict", action="store_true",
                    help="exit 3 when any batch does not converge")

    sp = sub.add_parser("detect", help="segment a foreground and emit boxes")
    sp.add_argument("--in", dest="indir", required=True,
                    help="decompose output directory")
    sp.add_argument("--theta", default="mad",
                    help="segmentation threshold: a number or 'mad'")
    sp.add_argument("--min-area", type=int, default=2, dest="min_area")
    sp.add_argument("--out", required=True, help="detections CSV")

    sp = sub.add_parser("evaluate", help="score detections against ground truth")
    sp.add_argument("--dets", required=True)
    sp.add_argument("--gt", required=True)
    sp.add_argument("--iou", type=float, default=0.3)
    sp.add_argument("--sweep", default=None,
                    help="a:b:step IoU threshold sweep")
    sp.add_argument("--out", default=None, help="metrics CSV")

    sp = sub.add_parser("sweep", help="parameter study: decompose+detect+evaluate"
                                      " per grid point")
    sp.add_argument("--param", choices=["lambda2", "batch"], required=True)
    sp.add_argument("--grid", required=True,
                    help="a:b:k geometric spec or comma list")
    sp.add_argument("--in", dest="indir", required=True)
    sp.add_argument("--gt", default=None,
                    help="ground-truth CSV (default <in>/gt.csv)")
    sp.add_argument("--out", required=True)
    sp.add_argument("--iou", type=float, default=0.3)
    sp.add_argument("--theta", default="mad")
    sp.add_argument("--min-area", type=int, default=2, dest="min_area")
    _add_solver_flags(sp)
    return parser


def _load_input(indir):
    """Frames for decompose: prefer an exact D.mat, else PGM frames."""
    indir = Path(indir)
    if indir.is_file():
        return load_frames(indir), str(indir)
    if (indir / "D.mat").exists():
        return load_frames(indir / "D.mat"), str(indir / "D.mat")
    frames_dir = indir / "frames" if (indir / "frames").is_dir() else indir
    return load_frames(frames_dir), str(frames_dir)


def _decompose(fm, args, out, argv):
    t0 = time.perf_counter()
    cfg = _solver_config(args)
    gs = build_grid_groups(fm.height, fm.width, window=args.window)
    batch = args.batch if args.batch and args.batch > 0 else fm.n_frames
    results = []
    for start in range(0, fm.n_frames, batch):
        piece = FrameMatrix(fm.data[:, start:start + batch], fm.height, fm.width)
        results.append(solve(piece, gs, cfg))
    solve_time = time.perf_counter() - t0

    out.mkdir(parents=True, exist_ok=True)
    geometry = (fm.height, fm.width)
    B = np.hstack([r.B for r in results])
    S = np.hstack([r.S for r in results])
    E = np.hstack([r.E for r in results])
    save_matrix(out / "B.mat", B, geometry)
    save_matrix(out / "S.mat", S, geometry)
    save_matrix(out / "E.mat", E, geometry)
    write_history_csv(out / "history.csv", results)

    resolved = cfg.resolve(FrameMatrix(fm.data[:, :batch], fm.height, fm.width))
    manifest = RunManifest(
        command=argv,
        version=__version__,
        config={k: getattr(resolved, k) for k in
                ("lambda1", "lambda2", "mu0", "rho", "mu_bar", "tau",
                 "max_iters", "mode", "prox_tol")} | {"batch": batch,
                                                      "window": args.window},
        input={"path": getattr(args, "indir", ""), "frames": fm.n_frames,
               "height": fm.height, "width": fm.width,
               "normalization": "intensities in [0,1]"},
        timings={"solve": solve_time},
        outputs={"B": "B.mat", "S": "S.mat", "E": "E.mat",
                 "history": "history.csv"},
        results={
            "batches": [r.summary() for r in results],
            "rank_B": max(r.rank_B for r in results),
            "converged": all(r.converged for r in results),
            "mean_abs_E": float(np.abs(E).mean()),
        },
    )
    manifest.write(out)
    return results, manifest


def _cmd_synth(args, argv):
    scenario = SynthScenario.from_json(Path(args.scenario).read_text())
    out = Path(args.out)
    t0 = time.perf_counter()
    res = generate(scenario)
    out.mkdir(parents=True, exist_ok=True)
    geometry = (scenario.height, scenario.width)
    write_frames(out / "frames", res.d, maxval=255 if args.bits == 8 else 65535)
    write_gt_csv(out / "gt.csv", res.boxes)
    save_matrix(out / "D.mat", res.d.data, geometry)
    save_matrix(out / "B_true.mat", res.background, geometry)
    save_matrix(out / "S_true.mat", res.foreground, geometry)
    save_matrix(out / "E_true.mat", res.residual, geometry)
    RunManifest(
        command=argv,
        version=__version__,
        config=json.loads(scenario.to_json()),
        input={"scenario": str(args.scenario)},
        timings={"generate": time.perf_counter() - t0},
        outputs={"frames": "frames", "gt": "gt.csv", "D": "D.mat",
                 "B_true": "B_true.mat", "S_true": "S_true.mat",
                 "E_true": "E_true.mat"},
        results={"clip_delta": res.clip_delta,
                 "n_boxes": sum(len(f) for f in res.boxes)},
    ).write(out)
    print(f"wrote scenario to {out} ({scenario.n_frames} frames, "
          f"clip_delta={res.clip_delta:g})")
    return 0


def _cmd_decompose(args, argv):
    fm, source = _load_input(args.indir)
    out = Path(args.out)
    results, manifest = _decompose(fm, args, out, argv)
    ok = manifest.results["converged"]
    for b, r in enumerate(results):
        print(f"batch {b}: iterations={r.iterations} rank_B={r.rank_B} "
              f"stop={r.final_stop:.3e} converged={r.converged}")
    if not ok and args.strict:
        raise NotConverged("one or more batches did not converge")
    return 0


def _cmd_detect(args, argv):
    indir = Path(args.indir)
    manifest = RunManifest.read(indir)
    height = manifest.input["height"]
    width = manifest.input["width"]
    S = load_matrix(indir / "S.mat")
    policy = args.theta if args.theta == "mad" else float(args.theta)
    theta = resolve_threshold(S, policy)
    dets = [
        components_to_boxes(
            segment(S[:, i], (height, width), theta),
            min_area=args.min_area,
            values=S[:, i],
        )
        for i in range(S.shape[1])
    ]
    write_dets_csv(args.out, dets)
    print(f"theta={theta:g}: {sum(len(d) for d in dets)} detections over "
          f"{len(dets)} frames -> {args.out}")
    return 0


def _cmd_evaluate(args, argv):
    dets = read_dets_csv(args.dets)
    gt = read_gt_csv(args.gt)
    n = max(len(dets), len(gt))
    dets += [[] for _ in range(n - len(dets))]
    gt += [[] for _ in range(n - len(gt))]
    if args.sweep:
        try:
            a, b, step = (float(v) for v in args.sweep.split(":"))
        except ValueError as exc:
            raise InvalidParameterError(
                f"bad sweep spec {args.sweep!r} (want a:b:step)") from exc
        thresholds = list(np.arange(a, b + step / 2, step))
    else:
        thresholds = [args.iou]
    reports = [match_and_score(dets, gt, t) for t in thresholds]
    for r in reports:
        print(format_report(r))
    if args.out:
        write_metrics_csv(args.out, reports)
    return 0


def _cmd_sweep(args, argv):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    gt_path = Path(args.gt) if args.gt else Path(args.indir) / "gt.csv"
    gt = read_gt_csv(gt_path)
    fm, source = _load_input(args.indir)
    values = _parse_grid(args.grid, integer=(args.param == "batch"))

    rows = []
    t0 = time.perf_counter()
    for i, value in enumerate(values):
        point_args = argparse.Namespace(**vars(args))
        if args.param == "lambda2":
            point_args.lambda2 = value
        else:
            point_args.batch = value
        point_dir = out / f"point_{i:02d}"
        results, manifest = _decompose(fm, point_args, point_dir, argv)
        S = load_matrix(point_dir / "S.mat")
        policy = args.theta if args.theta == "mad" else float(args.theta)
        theta = resolve_threshold(S, policy)
        dets = [
            components_to_boxes(segment(S[:, f], (fm.height, fm.width), theta),
                                min_area=args.min_area, values=S[:, f])
            for f in range(S.shape[1])
        ]
        write_dets_csv(point_dir / "dets.csv", dets)
        n = max(len(dets), len(gt))
        rep = match_and_score(dets + [[] for _ in range(n - len(dets))],
                              gt + [[] for _ in range(n - len(gt))],
                              args.iou, rank_B=manifest.results["rank_B"])
        rows.append({
            "param": args.param,
            "value": value,
            "iterations": sum(r.iterations for r in results),
            "converged": manifest.results["converged"],
            "rank_b": manifest.results["rank_B"],
            "mean_abs_e": manifest.results["mean_abs_E"],
            "tp": rep.tp, "fn": rep.fn, "fp": rep.fp,
            "recall": rep.recall, "precision": rep.precision, "f1": rep.f1,
        })
        print(f"{args.param}={value:g}: rank_B={rows[-1]['rank_b']} "
              f"mean|E|={rows[-1]['mean_abs_e']:.5f} f1={rep.f1:.4f}")

    write_summary_csv(out / "summary.csv", rows)
    RunManifest(
        command=argv,
        version=__version__,
        config={"param": args.param, "grid": args.grid, "iou": args.iou,
                "theta": args.theta, "min_area": args.min_area},
        input={"path": args.indir, "gt": str(gt_path), "frames": fm.n_frames,
               "height": fm.height, "width": fm.width,
               "normalization": "intensities in [0,1]"},
        timings={"total": time.perf_counter() - t0},
        outputs={"summary": "summary.csv"},
        results={"points": len(rows)},
    ).write(out)
    return 0


_COMMANDS = {
    "synth": _cmd_synth,
    "decompose": _cmd_decompose,
    "detect": _cmd_detect,
    "evaluate": _cmd_evaluate,
    "sweep": _cmd_sweep,
}


def _flag_failure(args, exc):
    outdir = getattr(args, "out", None)
    if outdir and Path(outdir).is_dir():
        (Path(outdir) / "FAILED").write_text(f"{type(exc).__name__}: {exc}\n")


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args, ["elsd", *argv])
    except NotConverged as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except _USAGE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except _DATA_ERRORS as exc:
        _flag_failure(args, exc)
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
