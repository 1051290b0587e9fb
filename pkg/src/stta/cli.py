"""Command-line interface: ``stta {gen,sketch,assemble,approx,bench,plotdata}``."""

from __future__ import annotations

import argparse
import sys

from . import io
from .assemble import SttaConfig, assemble, stta_sketch
from .bench import config as cfg
from .bench.runner import (
    OversamplingRule,
    build_tensor,
    emit_csv,
    emit_plot_data,
    read_csv,
    run_experiment,
    summarize,
)
from .formats import (
    CPTensor,
    MaterializationError,
    SumTensor,
    TTTensor,
    TuckerTensor,
    clip_ranks,
    rel_error,
    to_dense,
)

SKETCH_KEYS = ("rank", "oversampling", "oversample_side", "left_ranks", "right_ranks", "seed", "drm_kind",
               "lstsq_rtol", "workers", "cap")


def _add_sketch_options(p):
    p.add_argument("--config", help="key = value file; flags below override its entries")
    p.add_argument("--rank", help="target rank, scalar or comma tuple (clipped at the borders)")
    p.add_argument("--oversampling", help="rule for the larger side, e.g. 2r or r+5")
    p.add_argument("--oversample-side", choices=("left", "right"))
    p.add_argument("--left-ranks", help="explicit left DRM ranks (overrides --rank)")
    p.add_argument("--right-ranks", help="explicit right DRM ranks (overrides --rank)")
    p.add_argument("--seed", help="decimal or 0x-hex unsigned 64-bit seed")
    p.add_argument("--drm-kind", choices=("gaussian", "tt"))
    p.add_argument("--lstsq-rtol", help="relative singular value cutoff in the least-squares solves")
    p.add_argument("--workers", help="threads used for sums of tensors")
    p.add_argument("--cap", help="materialization cap in entries")


def _merged(args, keys):
    kv = cfg.load_kv(args.config) if getattr(args, "config", None) else {}
    for key in keys:
        value = getattr(args, key, None)
        if value is not None:
            kv[key] = value
    return kv


def _sketch_config(kv, dims) -> SttaConfig:
    seed = cfg.parse_seed(kv.get("seed", 0))
    kind = kv.get("drm_kind", "gaussian")
    rtol = float(kv["lstsq_rtol"]) if "lstsq_rtol" in kv else None
    d = len(dims)

    def tup(v):
        r = cfg.parse_rank(v)
        return (r,) * (d - 1) if isinstance(r, int) else r

    if "left_ranks" in kv or "right_ranks" in kv:
        if not ("left_ranks" in kv and "right_ranks" in kv):
            raise ValueError("give both left_ranks and right_ranks")
        left, right = tup(kv["left_ranks"]), tup(kv["right_ranks"])
    else:
        if "rank" not in kv:
            raise ValueError("no ranks configured; set rank or left_ranks/right_ranks")
        target = clip_ranks(dims, cfg.parse_rank(kv["rank"]))
        big = OversamplingRule.parse(kv.get("oversampling", "2r"))(target)
        left, right = (big, target) if kv.get("oversample_side", "left") == "left" else (target, big)
    extra = {} if rtol is None else {"lstsq_rtol": rtol}
    return SttaConfig(left, right, seed=seed, drm_kind=kind, **extra)


def _load_inputs(paths):
    items = [io.load(p) for p in paths]
    for it in items:
        if isinstance(it, io.SketchPack):
            raise ValueError("expected tensor files, got a sketch")
    return items[0] if len(items) == 1 else SumTensor(tuple(items))


def _opt_int(kv, key):
    return int(kv[key]) if key in kv else None


def cmd_sketch(args):
    kv = _merged(args, SKETCH_KEYS)
    t = _load_inputs(args.inputs)
    config = _sketch_config(kv, tuple(t.shape))
    pack = stta_sketch(t, config, workers=_opt_int(kv, "workers"), cap=_opt_int(kv, "cap"))
    if args.add:
        pack = io.load(args.add) + pack
    io.save_sketch(pack, args.output)
    print(f"sketch: left ranks {pack.left_ranks}, right ranks {pack.right_ranks} -> {args.output}")


def cmd_assemble(args):
    pack = io.load(args.sketch)
    if not isinstance(pack, io.SketchPack):
        raise ValueError(f"{args.sketch} is not a sketch file")
    rtol = float(args.lstsq_rtol) if args.lstsq_rtol is not None else None
    tt = assemble(pack, rtol=rtol)
    io.save_tt(tt, args.output)
    print(f"assembled TT with ranks {tt.ranks} -> {args.output}")


def _report_error(t, tt, cap):
    try:
        e_in = rel_error(t, tt, "input", cap)
        e_ap = rel_error(t, tt, "approx", cap)
        print(f"relative error: {e_in:.6e} (input norm), {e_ap:.6e} (approximation norm)")
    except MaterializationError as exc:
        print(f"relative error not computed: {exc}")


def cmd_approx(args):
    kv = _merged(args, SKETCH_KEYS)
    t = _load_inputs(args.inputs)
    config = _sketch_config(kv, tuple(t.shape))
    cap = _opt_int(kv, "cap")
    pack = stta_sketch(t, config, workers=_opt_int(kv, "workers"), cap=cap)
    tt = assemble(pack, config)
    io.save_tt(tt, args.output)
    print(f"approximation with TT ranks {tt.ranks} -> {args.output}")
    if not args.no_error:
        _report_error(t, tt, cap)


def _print_summary(records):
    rows = summarize(records)
    if not rows:
        return
    print(f"{'method':<10} {'drm':<9} {'rank':<8} {'overs.':<7} {'median':>11} {'p20':>11} {'p80':>11} {'ms':>9}")
    for s in rows:
        print(f"{s.method:<10} {s.drm_kind or '-':<9} {s.rank:<8} {s.oversampling or '-':<7} "
              f"{s.median:11.3e} {s.p20:11.3e} {s.p80:11.3e} {s.median_time_ms:9.2f}")
    failed = [r for r in records if r.error]
    if failed:
        print(f"{len(failed)} rows failed; first: {failed[0].method} rank {failed[0].rank}: {failed[0].error}")


def cmd_bench(args):
    overrides = {}
    if args.trials is not None:
        overrides["trials"] = str(args.trials)
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.preset:
        specs = cfg.preset_specs(args.preset, full_size=args.full_size, **overrides)
    elif args.spec:
        kv = cfg.load_kv(args.spec)
        kv.update(overrides)
        specs = [cfg.spec_from_kv(kv)]
    else:
        raise ValueError("give a spec file or --preset")
    records = []
    for spec in specs:
        records.extend(run_experiment(spec, workers=args.workers))
    emit_csv(records, args.output)
    print(f"{len(records)} records -> {args.output}")
    if args.plot_data:
        emit_plot_data(summarize(records), args.plot_data)
    _print_summary(records)


def cmd_plotdata(args):
    emit_plot_data(summarize(read_csv(args.csv), args.column), args.output)


def cmd_gen(args):
    params = {}
    for item in args.param or []:
        key, _, value = item.partition("=")
        params[key.strip()] = value.strip()
    seed = cfg.parse_seed(args.seed) if args.seed is not None else 0
    t = build_tensor(args.recipe, params, seed)
    if isinstance(t, (CPTensor, TuckerTensor)):
        t = to_dense(t)
    if isinstance(t, SumTensor):
        paths = []
        for k, m in enumerate(t.members):
            path = f"{args.output}.{k}"
            io.save(m, path)
            paths.append(path)
        print(f"sum of {len(paths)} members -> {' '.join(paths)}")
        return
    io.save(t, args.output)
    extra = f" ranks {t.ranks}" if isinstance(t, TTTensor) else ""
    print(f"{args.recipe} tensor of shape {tuple(t.shape)}{extra} -> {args.output}")


def build_parser():
    p = argparse.ArgumentParser(prog="stta", description="Streaming tensor-train approximation by two-sided sketching.")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="write a test tensor")
    g.add_argument("recipe", choices=("hilbert", "sqrt-sum", "decaying-tt", "tt-plus-sparse", "sum-of-tt",
                                      "random-cp"))
    g.add_argument("-o", "--output", required=True)
    g.add_argument("--param", action="append", metavar="KEY=VALUE", help="recipe parameter (d, n, r, ...)")
    g.add_argument("--seed")
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("sketch", help="sketch one tensor, or the sum of several")
    s.add_argument("inputs", nargs="+")
    s.add_argument("-o", "--output", required=True)
    s.add_argument("--add", metavar="SKETCH", help="accumulate onto an existing sketch taken with the same DRMs")
    _add_sketch_options(s)
    s.set_defaults(func=cmd_sketch)

    a = sub.add_parser("assemble", help="build the TT from a sketch file")
    a.add_argument("sketch")
    a.add_argument("-o", "--output", required=True)
    a.add_argument("--lstsq-rtol")
    a.set_defaults(func=cmd_assemble)

    x = sub.add_parser("approx", help="sketch and assemble in one step")
    x.add_argument("inputs", nargs="+")
    x.add_argument("-o", "--output", required=True)
    x.add_argument("--no-error", action="store_true", help="skip the relative error report")
    _add_sketch_options(x)
    x.set_defaults(func=cmd_approx)

    b = sub.add_parser("bench", help="run an experiment and write CSV")
    b.add_argument("spec", nargs="?", help="experiment spec file (key = value)")
    b.add_argument("--preset", choices=cfg.PRESET_NAMES)
    b.add_argument("-o", "--output", required=True)
    b.add_argument("--trials", type=int)
    b.add_argument("--seed")
    b.add_argument("--workers", type=int)
    b.add_argument("--full-size", action="store_true", help="use the large timing configuration")
    b.add_argument("--plot-data", metavar="PATH", help="also write gnuplot column data")
    b.set_defaults(func=cmd_bench)

    pd = sub.add_parser("plotdata", help="turn a CSV into gnuplot column data")
    pd.add_argument("csv")
    pd.add_argument("-o", "--output", required=True)
    pd.add_argument("--column", default="rel_error_input_norm",
                    choices=("rel_error_input_norm", "rel_error_approx_norm"))
    pd.set_defaults(func=cmd_plotdata)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (ValueError, OSError, TypeError) as exc:
        print(f"stta {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
