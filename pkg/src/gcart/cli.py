"""Command-line entry point.

Subcommands: train, eval, apply, flops, gradcheck, aggregate. All
configuration comes from explicit flags; results are self-describing JSON
with the fully resolved config echoed in.
"""

import os

# Bit-exact seed reproducibility requires single-threaded math, so the CLI
# process pins the BLAS pools before numpy is first imported.
for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
             "NUMEXPR_NUM_THREADS"):
    os.environ[_var] = "1"

import argparse
import json
import sys
from dataclasses import asdict

import numpy as np

from gcart import data, evalreport, fdcheck, hypernet, trainer
from gcart.classical import apply_classical
from gcart.corruptions import KINDS, CorruptionSpec
from gcart.trainer import Model, TrainConfig, parse_enhancer

DEFAULT_SEEDS = (42, 43, 44)


def _add_enhancer_flags(p):
    p.add_argument("--enhancer", default="gcart",
                   help="none|gcart|he|clahe|gamma:<g>")
    p.add_argument("--clahe-tiles", type=int, default=4)
    p.add_argument("--clahe-clip", type=float, default=2.0)


def _build_parser():
    ap = argparse.ArgumentParser(prog="gcart")
    sub = ap.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train enhancer + classifier, one run per seed")
    t.add_argument("--data", required=True, help="directory with CIFAR-10 binary batches")
    t.add_argument("--out", required=True, help="output directory for reports/checkpoints")
    t.add_argument("--seed", type=int, default=None, help="single seed")
    t.add_argument("--seeds", default=None, help="comma-separated seeds (default 42,43,44)")
    t.add_argument("--epochs", type=int, default=5)
    t.add_argument("--batch-size", type=int, default=128)
    t.add_argument("--subset", type=int, default=2000, help="training subset size")
    t.add_argument("--eval-subset", type=int, default=1000)
    t.add_argument("--subset-seed", type=int, default=0,
                   help="seed for subset sampling (shared across runs)")
    t.add_argument("--lr0", type=float, default=1e-3)
    t.add_argument("--lambda", dest="lambda_mono", type=float, default=10.0)
    t.add_argument("--no-augment", action="store_true")
    t.add_argument("--hist-bins", type=int, default=16)
    t.add_argument("--hist-gamma", type=float, default=0.01)
    t.add_argument("--mono-grid", type=int, default=32)
    t.add_argument("--head-hidden", type=int, default=128)
    _add_enhancer_flags(t)

    e = sub.add_parser("eval", help="evaluate a checkpoint over the corruption sweep")
    e.add_argument("--data", required=True)
    e.add_argument("--checkpoint", required=True,
                   help="checkpoint prefix (expects <prefix>.head.json etc.)")
    e.add_argument("--subset", type=int, default=None)
    e.add_argument("--subset-seed", type=int, default=0)
    e.add_argument("--corruption", choices=KINDS, default=None)
    e.add_argument("--severity", type=int, default=None)
    e.add_argument("--out", default=None, help="write the JSON report here")
    _add_enhancer_flags(e)

    a = sub.add_parser("apply", help="enhance a PPM image")
    a.add_argument("input")
    a.add_argument("output")
    a.add_argument("--checkpoint", default=None,
                   help="hypernet checkpoint JSON (gcart; default: fresh init)")
    a.add_argument("--corruption", choices=KINDS, default=None,
                   help="corrupt before enhancing")
    a.add_argument("--severity", type=int, default=3)
    _add_enhancer_flags(a)

    f = sub.add_parser("flops", help="operation-count report")
    f.add_argument("--module", required=True, choices=("gcart", "he", "gamma"))
    f.add_argument("--h", type=int, default=32)
    f.add_argument("--w", type=int, default=32)

    g = sub.add_parser("gradcheck", help="finite-difference gradient suite")
    g.add_argument("--seed", type=int, default=0)

    ag = sub.add_parser("aggregate", help="summarize per-seed reports")
    ag.add_argument("--dir", required=True, help="directory holding seed*.json")
    ag.add_argument("--out", default=None, help="summary path (default <dir>/summary.json)")
    ag.add_argument("--csv", default=None, help="also write a CSV table here")
    return ap


def _run_config(args, seed: int) -> tuple[TrainConfig, dict]:
    cfg = TrainConfig(
        seed=seed, epochs=args.epochs, batch_size=args.batch_size, lr0=args.lr0,
        lambda_mono=args.lambda_mono, enhancer=args.enhancer,
        augment=not args.no_augment, hist_bins=args.hist_bins,
        hist_gamma=args.hist_gamma, mono_grid=args.mono_grid,
        head_hidden=args.head_hidden, clahe_tiles=args.clahe_tiles,
        clahe_clip=args.clahe_clip)
    cfg.validate()
    echo = asdict(cfg)
    echo.update({"data": args.data, "subset": args.subset,
                 "eval_subset": args.eval_subset, "subset_seed": args.subset_seed})
    return cfg, echo


def _cmd_train(args) -> int:
    if args.seeds:
        seeds = [int(s) for s in args.seeds.split(",")]
    elif args.seed is not None:
        seeds = [args.seed]
    else:
        seeds = list(DEFAULT_SEEDS)
    train_x, train_y = data.load_cifar10(args.data, subset=args.subset,
                                         seed=args.subset_seed, split="train")
    eval_x, eval_y = data.load_cifar10(args.data, subset=args.eval_subset,
                                       seed=args.subset_seed, split="test")
    os.makedirs(args.out, exist_ok=True)
    for seed in seeds:
        cfg, echo = _run_config(args, seed)
        result = trainer.train(cfg, train_x, train_y, eval_x, eval_y)
        clean = evalreport.evaluate(result.model, eval_x, eval_y, None)
        sweep = evalreport.corruption_sweep(result.model, eval_x, eval_y)
        report = evalreport.build_report(seed, echo, clean, sweep, result.log)
        evalreport.write_json(os.path.join(args.out, f"seed{seed}.json"), report)
        trainer.save_head(os.path.join(args.out, f"seed{seed}.head.json"),
                          result.model.head)
        if result.model.hyper is not None:
            hypernet.save_checkpoint(
                os.path.join(args.out, f"seed{seed}.hypernet.json"), result.model.hyper)
        print(f"seed {seed}: clean {clean:.2f}%  "
              + "  ".join(f"{k} {sweep[k]['mean']:.2f}%" for k in sweep))
    return 0


def _load_model(args) -> Model:
    kind, spec = parse_enhancer(args.enhancer, args.clahe_tiles, args.clahe_clip)
    head = trainer.load_head(args.checkpoint + ".head.json")
    hyper = None
    if kind == "gcart":
        hyper = hypernet.load_checkpoint(args.checkpoint + ".hypernet.json")
    return Model(kind, head, hyper=hyper, classical_spec=spec)


def _cmd_eval(args) -> int:
    model = _load_model(args)
    images, labels = data.load_cifar10(args.data, subset=args.subset,
                                       seed=args.subset_seed, split="test")
    if args.corruption:
        if args.severity is None:
            raise SystemExit("--severity is required with --corruption")
        spec = CorruptionSpec(args.corruption, args.severity)
        acc = evalreport.evaluate(model, images, labels, spec)
        print(f"{args.corruption} severity {args.severity}: {acc:.4f}%")
        return 0
    clean = evalreport.evaluate(model, images, labels, None)
    sweep = evalreport.corruption_sweep(model, images, labels)
    doc = {"clean_acc": clean, "corruptions": sweep, "enhancer": args.enhancer}
    if args.out:
        evalreport.write_json(args.out, doc)
    print(json.dumps(doc, indent=2, sort_keys=True))
    return 0


def _cmd_apply(args) -> int:
    image = data.read_ppm(args.input)
    if args.corruption:
        from gcart.corruptions import apply_corruption

        image = apply_corruption(image, CorruptionSpec(args.corruption, args.severity))
    kind, spec = parse_enhancer(args.enhancer, args.clahe_tiles, args.clahe_clip)
    if kind == "none":
        out = image
    elif kind == "gcart":
        if args.checkpoint:
            hyper = hypernet.load_checkpoint(args.checkpoint)
        else:
            hyper = hypernet.init_weights(
                np.random.Generator(np.random.PCG64(np.random.SeedSequence([0, 1]))))
        out = trainer.gcart_enhance(image, hyper)
    else:
        out = apply_classical(image, spec)
    data.write_ppm(args.output, out)
    return 0


def _cmd_flops(args) -> int:
    report = evalreport.count_flops(args.module, args.h, args.w)
    print(f"module: {report.module}")
    print(f"params: {report.params}")
    print(f"param_prediction_flops: {report.param_prediction_flops}")
    print(f"pixel_flops: {report.pixel_flops}")
    print(f"total: {report.total}")
    for name, ref in evalreport.REFERENCE_FLOPS.items():
        print(f"# reference {name}: params {ref['params']}, total {ref['total']}")
    return 0


def _cmd_gradcheck(args) -> int:
    return 0 if fdcheck.run_all(args.seed) else 1


def _cmd_aggregate(args) -> int:
    import glob

    paths = sorted(glob.glob(os.path.join(args.dir, "seed*.json")))
    paths = [p for p in paths if not p.endswith((".head.json", ".hypernet.json"))]
    if not paths:
        raise SystemExit(f"no seed*.json reports under {args.dir}")
    reports = []
    for p in paths:
        with open(p) as f:
            reports.append(json.load(f))
    summary = evalreport.aggregate(reports)
    out = args.out or os.path.join(args.dir, "summary.json")
    evalreport.write_json(out, summary)
    if args.csv:
        with open(args.csv, "w") as f:
            f.write(evalreport.summary_csv(summary))
    print(f"aggregated {len(reports)} seeds -> {out}")
    return 0


_COMMANDS = {
    "train": _cmd_train,
    "eval": _cmd_eval,
    "apply": _cmd_apply,
    "flops": _cmd_flops,
    "gradcheck": _cmd_gradcheck,
    "aggregate": _cmd_aggregate,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    return _COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
