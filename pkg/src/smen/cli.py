"""Command-line front end: corpus synthesis, training, masks, inference,
evaluation, CAS plots and the gradient check.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 numeric failure (including a failed gradient check).
"""

import argparse
from concurrent.futures import ProcessPoolExecutor
import logging
import os
import sys

from . import config as cfgmod
from . import dataio, gradcheck, localizer, pipeline
from .backbone import load_params, save_params
from .metrics import BAND_SETS, BANDS, map_bands, report_csv, report_table, slow_subset_filter, to_detections
from .mining import generate_mask, smooth_track
from .proposals import postprocess
from .svgplot import cas_svg
from .synthgen import generate
from .tensorseq import FormatError, InvalidInput
from .trainer import NumericFailure, write_curve

log = logging.getLogger("smen")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
MINER_FILE = "miner.prm"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _run_config(args):
    return cfgmod.load(args.config, args.set or (), seed=args.seed)


def _snapshot(run_dir, cfg):
    os.makedirs(run_dir, exist_ok=True)
    with open(os.path.join(run_dir, "config.txt"), "w") as f:
        f.write(cfgmod.dumps(cfg))


def _pool_map(fn, items, jobs):
    """Map in input order; a pool only when more than one job is requested."""
    if jobs <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _mask_job(item):
    params, video, mining_cfg, want_track = item
    mask = generate_mask(params, video.features, mining_cfg)
    track = smooth_track(params, video.features, mining_cfg) if want_track else None
    return video.video_id, mask, track


def _infer_job(item):
    state, video, mode, pp_cfg = item
    cas, attn = localizer.infer_combo(state, video.features, mode)
    return to_detections(postprocess(cas, attn, pp_cfg, video.video_id), video.features.snippet_seconds)


def _load_miner(path):
    return load_params(os.path.join(path, MINER_FILE) if os.path.isdir(path) else path)


def cmd_synth(args):
    cfg = _run_config(args)
    for split in ("train", "test"):
        videos = generate(cfg.synth, split)
        dataio.write_corpus(os.path.join(args.out, split), videos, cfg.synth.num_classes)
        log.info("wrote %d %s videos", len(videos), split)
    _snapshot(args.out, cfg)
    print(f"corpus written to {args.out}/train and {args.out}/test")


def cmd_train_miner(args):
    cfg = _run_config(args)
    videos, _ = dataio.read_corpus(args.corpus)
    params, curve = pipeline.train_miner(videos, cfg.pipeline, cfg.pipeline.miner_train.seed)
    _snapshot(args.out, cfg)
    save_params(os.path.join(args.out, MINER_FILE), params)
    write_curve(os.path.join(args.out, "loss_curve.csv"), curve)
    print(f"miner trained for {len(curve)} iterations, final loss {curve[-1] if curve else float('nan'):.4f}")


def cmd_gen_masks(args):
    cfg = _run_config(args)
    params = _load_miner(args.miner)
    videos, _ = dataio.read_corpus(args.corpus)
    items = [(params, v, cfg.pipeline.mining, bool(args.tracks)) for v in videos]
    results = _pool_map(_mask_job, items, args.jobs)
    dataio.write_masks(args.out, {vid: mask for vid, mask, _ in results})
    if args.tracks:
        dataio.write_track_csv(args.tracks, {vid: track for vid, _, track in results})
    kept = sum(int(m.bits.sum()) for _, m, _ in results)
    total = sum(len(m) for _, m, _ in results)
    print(f"masks for {len(results)} videos, {kept}/{total} snippets kept")


def cmd_train_loc(args):
    if args.beta is not None:
        args.set = list(args.set or ()) + [f"loss.beta={args.beta}"]
    cfg = _run_config(args)
    videos, _ = dataio.read_corpus(args.corpus)
    masks = dataio.read_masks(args.masks)
    missing = [v.video_id for v in videos if v.video_id not in masks]
    if missing:
        raise dataio.DataError(f"{args.masks}: no mask for video {missing[0]}")
    state, curve = pipeline.train_two_branch(videos, masks, cfg.pipeline, cfg.pipeline.loc_train.seed)
    _snapshot(args.out, cfg)
    localizer.save_state(args.out, state)
    write_curve(os.path.join(args.out, "loss_curve.csv"), curve)
    print(f"localizer trained for {len(curve)} iterations, final loss {curve[-1] if curve else float('nan'):.4f}")


def cmd_infer(args):
    cfg = _run_config(args)
    state = localizer.load_state(args.loc)
    videos, _ = dataio.read_corpus(args.corpus)
    items = [(state, v, args.mode, cfg.pipeline.postprocess) for v in videos]
    dets = [d for batch in _pool_map(_infer_job, items, args.jobs) for d in batch]
    dataio.write_proposals(args.out, dets)
    print(f"{len(dets)} proposals for {len(videos)} videos written to {args.out}")


def cmd_eval(args):
    dets = dataio.read_proposals(args.props)
    _, gts = dataio.read_annotations(args.ann)
    if args.slow_only:
        gts = slow_subset_filter(gts)
    grids = {name: BANDS[name] for name in BAND_SETS[args.band]}
    report = map_bands(dets, gts, grids)
    if args.csv:
        with open(args.csv, "w") as f:
            f.write(report_csv(report))
    subset = "slow-motion ground truth" if args.slow_only else "all ground truth"
    print(f"{len(dets)} proposals, {len(gts)} segments ({subset})")
    sys.stdout.write(report_table(report))


def cmd_plot_cas(args):
    state = localizer.load_state(args.loc)
    videos, _ = dataio.read_corpus(args.corpus)
    match = [v for v in videos if v.video_id == args.video]
    if not match:
        raise dataio.DataError(f"video {args.video} not in corpus {args.corpus}")
    video = match[0]
    cas, _ = localizer.infer_combo(state, video.features, args.mode)
    mask = None
    if args.masks:
        masks = dataio.read_masks(args.masks)
        if video.video_id in masks:
            mask = masks[video.video_id].bits
    sec = video.features.snippet_seconds
    spans = [(round(g.start_sec / sec), round(g.end_sec / sec), g.class_id) for g in video.gts]
    with open(args.out, "w") as f:
        f.write(cas_svg(cas, mask, spans, title=f"{video.video_id} ({args.mode})"))
    print(f"wrote {args.out}")


def cmd_gradcheck(args):
    result = gradcheck.run(seed=args.seed, n_cases=args.cases)
    status = "PASS" if result.passed else "FAIL"
    print(f"{status}: {result.cases} cases, {result.entries} entries, worst relative error "
          f"{result.worst_rel_error:.3g} at {result.worst_where or '-'}")
    return EXIT_OK if result.passed else EXIT_NUMERIC


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--config", help="key=value configuration file")
    common.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one configuration key")
    common.add_argument("--seed", type=int, default=0, help="base seed for corpus and training defaults")
    common.add_argument("--jobs", type=int, default=1, help="worker processes for per-video stages")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="smen", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", parents=[common], help="write a synthetic train/test corpus")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train-miner", parents=[common], help="train the mining backbone on sub-sampled features")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train_miner)

    p = sub.add_parser("gen-masks", parents=[common], help="write per-video snippet masks")
    p.add_argument("--miner", required=True, help="miner run directory or parameter file")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--tracks", help="also write the smoothed activation tracks as CSV")
    p.set_defaults(func=cmd_gen_masks)

    p = sub.add_parser("train-loc", parents=[common], help="train the two-branch localizer")
    p.add_argument("--corpus", required=True)
    p.add_argument("--masks", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--beta", type=float, help="weight of the masked branch's feature-separation loss")
    p.set_defaults(func=cmd_train_loc)

    p = sub.add_parser("infer", parents=[common], help="write scored proposals for a corpus")
    p.add_argument("--loc", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mode", choices=localizer.MODES, default="full")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("eval", parents=[common], help="mAP report for a proposal file")
    p.add_argument("--props", required=True)
    p.add_argument("--ann", required=True)
    p.add_argument("--slow-only", action="store_true")
    p.add_argument("--band", choices=sorted(BAND_SETS), default="thumos")
    p.add_argument("--csv", help="also write the report as CSV")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("plot-cas", parents=[common], help="SVG chart of one video's activation sequence")
    p.add_argument("--loc", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--video", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--masks")
    p.add_argument("--mode", choices=localizer.MODES, default="full")
    p.set_defaults(func=cmd_plot_cas)

    p = sub.add_parser("gradcheck", parents=[common], help="finite-difference check of the analytic gradients")
    p.add_argument("--cases", type=int, default=20)
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        if args.jobs < 1:
            raise UsageError("--jobs must be at least 1")
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        code = args.func(args)
        return EXIT_OK if code is None else code
    except (UsageError, cfgmod.ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericFailure as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (dataio.DataError, FormatError, InvalidInput, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
