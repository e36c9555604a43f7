"""Command line: generate synthetic datasets, train, run inference, benchmark,
and check device constraints.

Exit codes: 0 success, 1 validation/processing failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import bench as bench_mod
from . import deploy, synth, training
from .bench import RunConfig
from .decode import decode, score
from .events import DatasetBundle, SensorGeometry, accumulate, load_dataset, sample_roi
from .network import QUANTIZED_RELU, build_profile, load_model, save_model

USAGE_ERROR = 2
FAILURE = 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="snnball", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a synthetic labeled dataset")
    g.add_argument("--trajectories", type=int, default=100)
    g.add_argument("--windows", type=int, default=40, help="windows per trajectory")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.add_argument("--edge-prob", type=float, default=1.0)
    g.add_argument("--background-rate", type=float, default=0.0)
    g.add_argument("--jitter", type=int, default=16)
    g.add_argument("--width", type=int, default=1280)
    g.add_argument("--height", type=int, default=720)
    g.add_argument("--speed", type=float, default=400.0)
    g.add_argument("--ratios", default="0.89,0.055,0.055")

    t = sub.add_parser("train", help="train a profile on a dataset bundle")
    t.add_argument("--profile", default=None, help="sinabs_like | metatf_like | lava_like")
    t.add_argument("--data", required=True)
    t.add_argument("--out", required=True, help="model file to write")
    t.add_argument("--config", default=None, help="flat key-value training config file")
    t.add_argument("--seed", type=int, default=None)
    t.add_argument("--epochs", type=int, default=None)
    t.add_argument("--lr", type=float, default=None)
    t.add_argument("--batch", type=int, default=None)
    t.add_argument("--lambda-synops", type=float, default=None, dest="lambda_synops")
    t.add_argument("--lambda-weightmax", type=float, default=None, dest="lambda_weightmax")
    t.add_argument("--gamma", type=float, default=None, help="surrogate width")
    t.add_argument("--history", default=None, help="loss history CSV (default <out>.history.csv)")

    i = sub.add_parser("infer", help="run detection over a dataset bundle")
    i.add_argument("--model", required=True)
    i.add_argument("--data", required=True)
    i.add_argument("--out", required=True, help="detections CSV to write")

    b = sub.add_parser("bench", help="latency / error benchmark")
    b.add_argument("--model", required=True)
    b.add_argument("--data", required=True)
    b.add_argument("--profile", default=None, help="assert the model matches this profile")
    b.add_argument("--runs", type=int, default=10)
    b.add_argument("--out", default=None, help="summary CSV (per-run CSV at <out>.runs.csv)")

    c = sub.add_parser("check", help="validate a model against a device profile")
    c.add_argument("--profile-file", required=True, help="built-in name or profile file path")
    c.add_argument("--model", required=True)
    c.add_argument("--check-weights", action="store_true",
                   help="also require weights on the profile's quantization grid")
    return p


def _run_config(args) -> RunConfig:
    paths = {}
    for key in ("data", "model", "config", "out"):
        if getattr(args, key, None) is not None:
            paths[key] = getattr(args, key)
    pf = getattr(args, "profile_file", None)
    if pf is not None and pf not in deploy.BUILTIN_PROFILES:
        paths["profile_file"] = pf
    cfg = RunConfig(
        command=args.command,
        paths=paths,
        seed=getattr(args, "seed", 0) or 0,
        runs=getattr(args, "runs", 10) or 10,
    )
    cfg.require_read_paths()
    return cfg


def cmd_gen(args) -> int:
    geometry = SensorGeometry(args.width, args.height)
    ratios = tuple(float(r) for r in args.ratios.split(","))
    sims = synth.random_sims(
        args.trajectories, geometry, args.seed, windows=args.windows, speed=args.speed
    )
    noise = synth.NoiseModel(
        edge_event_prob=args.edge_prob, background_rate=args.background_rate
    )
    bundles = synth.make_dataset(
        sims, noise, ratios, args.seed, windows=args.windows, roi_jitter=args.jitter
    )
    for bundle, split in zip(bundles, ("train", "val", "test")):
        out = os.path.join(args.out, split)
        bundle.save(out)
        print(f"{split}: {len(bundle.labels)} samples, {bundle.events.shape[0]} events -> {out}")
    return 0


def cmd_train(args) -> int:
    _run_config(args)
    if args.config is not None:
        config = training.read_train_config(args.config)
        profile = args.profile or config.profile
    else:
        if args.profile is None:
            print("train: --profile or --config required", file=sys.stderr)
            return USAGE_ERROR
        profile = args.profile
        config = training.TrainConfig.for_profile(profile)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.epochs is not None:
        overrides["epochs"] = args.epochs
    if args.lr is not None:
        overrides["learning_rate"] = args.lr
    if args.batch is not None:
        overrides["batch_size"] = args.batch
    if args.lambda_synops is not None:
        overrides["lambda_synops"] = args.lambda_synops
    if args.lambda_weightmax is not None:
        overrides["lambda_weightmax"] = args.lambda_weightmax
    if args.gamma is not None:
        overrides["gamma"] = args.gamma
    if overrides or profile != config.profile:
        config = training.TrainConfig.for_profile(
            profile,
            **{
                **{k: getattr(config, k) for k in (
                    "learning_rate", "batch_size", "epochs", "lambda_synops",
                    "lambda_weightmax", "gamma", "seed", "weight_bits", "dtype",
                )},
                **overrides,
            },
        )
    spec = build_profile(profile)
    samples = load_dataset(args.data)
    trainer = (
        training.train_qat
        if any(l.activation == QUANTIZED_RELU for l in spec.layers)
        else training.train_bptt
    )
    print(f"training {profile} on {len(samples)} samples "
          f"(lr={config.learning_rate}, batch={config.batch_size}, epochs={config.epochs})")
    weights, history = trainer(spec, samples, config)
    save_model(args.out, spec, weights)
    history_path = args.history or args.out + ".history.csv"
    training.write_history_csv(history, history_path)
    print(f"model -> {args.out}")
    print(f"loss history -> {history_path}")
    if history:
        print(f"final mse {history[-1].mse:.6f}, total {history[-1].total:.6f}")
        if len(history) >= 2 and history[-1].mse >= 0.99 * history[0].mse:
            print(
                "note: loss barely moved; spiking stacks can stay silent at "
                "cold start when regularizers are on. Try --lambda-synops 0 "
                "--lambda-weightmax 0 and/or a larger --lr."
            )
    return 0


def cmd_infer(args) -> int:
    _run_config(args)
    spec, weights = load_model(args.model)
    bundle = DatasetBundle.load(args.data)
    from .network import SpikingNet
    import torch

    net = SpikingNet(spec)
    net.load_weights(weights)
    net.eval()
    dets = []
    truths = []
    with open(args.out, "w") as fh, torch.no_grad():
        for i, (t0, cx, cy) in enumerate(bundle.labels):
            roi = sample_roi(bundle.meta, (cx, cy), i)
            frame = accumulate(bundle.events, roi, (t0, t0 + bundle.meta.window_us))
            rates = net.run(frame.bits).rates[0].cpu().double().numpy()
            det = decode(rates, roi)
            gx, gy = det.global_xy
            fh.write(f"{t0},{gx},{gy},{det.confidence[0]!r},{det.confidence[1]!r}\n")
            dets.append(det)
            truths.append((cx, cy))
    stats = score(dets, truths)
    print(f"{len(dets)} detections -> {args.out}")
    print(f"error: {stats.mean:.3f} +- {stats.stddev:.3f} px (euclidean, population std)")
    return 0


def cmd_bench(args) -> int:
    _run_config(args)
    spec, weights = load_model(args.model)
    if args.profile is not None and spec.profile_name != args.profile:
        print(f"model profile {spec.profile_name} != requested {args.profile}", file=sys.stderr)
        return FAILURE
    bundle = DatasetBundle.load(args.data)
    report, records = bench_mod.bench(spec, weights, bundle, runs=args.runs)
    print(bench_mod.format_table(report))
    print()
    print(bench_mod.BENCH_CSV_HEADER)
    print(bench_mod.report_csv(report))
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(bench_mod.BENCH_CSV_HEADER + "\n")
            fh.write(bench_mod.report_csv(report) + "\n")
        bench_mod.write_runs_csv(records, args.out + ".runs.csv")
        print(f"\nreports -> {args.out}, {args.out}.runs.csv")
    return 0


def cmd_check(args) -> int:
    _run_config(args)
    profile = deploy.load_profile(args.profile_file)
    spec, weights = load_model(args.model)
    report = deploy.validate(spec, profile, weights=weights if args.check_weights else None)
    if report.passed:
        print(f"{spec.profile_name} fits {profile.name}")
        return 0
    for v in report.violations:
        print(f"layer {v.layer}: {v.constraint}: {v.detail}")
    print(f"{len(report.violations)} violation(s)")
    return FAILURE


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else 0
    handler = {
        "gen": cmd_gen,
        "train": cmd_train,
        "infer": cmd_infer,
        "bench": cmd_bench,
        "check": cmd_check,
    }[args.command]
    try:
        return handler(args)
    except FileNotFoundError as exc:
        print(f"snnball {args.command}: missing path: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except (ValueError, RuntimeError) as exc:
        print(f"snnball {args.command}: {exc}", file=sys.stderr)
        return FAILURE


if __name__ == "__main__":
    sys.exit(main())
