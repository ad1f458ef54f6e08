"""Command-line interface: simulate, train, denoise, stats, serve."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .perf import tune_malloc


def _cmd_simulate(args) -> int:
    from . import ctsim, data

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dose = ctsim.DoseParams(i0=args.i0, dose_factor=args.dose_factor)
    records = []
    for k in range(args.phantoms):
        spec = ctsim.default_body_spec(args.size, region=args.region)
        for s in range(args.slices_per_phantom):
            phantom_seed = args.seed * 10_000 + k * 100 + s
            phantom = ctsim.make_phantom(spec, seed=phantom_seed)
            ld, nd = ctsim.simulate_pair(phantom, n_views=args.views, dose=dose,
                                         seed=phantom_seed)
            ld_name, nd_name = f"p{k:03d}_s{s:02d}_ld.png", f"p{k:03d}_s{s:02d}_nd.png"
            data.write_hu_png(out / ld_name, ld)
            data.write_hu_png(out / nd_name, nd)
            records.append(data.SliceRecord(ldct=ld_name, ndct=nd_name,
                                            region=args.region, seed=k))
        print(f"phantom {k + 1}/{args.phantoms} done", file=sys.stderr)
    manifest = data.DatasetManifest(
        slices=records,
        params={"i0": args.i0, "dose_factor": args.dose_factor, "views": args.views,
                "size": args.size, "seed": args.seed})
    data.save_manifest(manifest, out)
    print(f"wrote {len(records)} slice pairs to {out}")
    return 0


def _cmd_train(args) -> int:
    from . import data
    from .losses import LossWeights
    from .train import TrainConfig, train

    overrides = {}
    if args.config:
        overrides = json.loads(Path(args.config).read_text())
    data_keys = {"train_patches": overrides.pop("train_patches", 128_000),
                 "val_patches": overrides.pop("val_patches", 64_000),
                 "train_fraction": overrides.pop("train_fraction", 0.5)}
    if "weights" in overrides:
        overrides["weights"] = LossWeights(**overrides["weights"])
    cfg = TrainConfig(**overrides)

    manifest = data.load_manifest(args.data)
    tr_m, va_m = data.split(manifest, data_keys["train_fraction"], seed=cfg.seed)
    tr_pairs = data.load_pairs(tr_m, args.data)
    va_pairs = data.load_pairs(va_m, args.data)
    tr = data.extract_patches(tr_pairs, cfg.window, data_keys["train_patches"],
                              size=cfg.patch, seed=cfg.seed)
    va = data.extract_patches(va_pairs, cfg.window, data_keys["val_patches"],
                              size=cfg.patch, seed=cfg.seed + 1)
    report = train(cfg, tr, va, args.out, resume_from=args.resume)
    last = report.val_mse[-1]["mse"] if report.val_mse else {}
    print(f"training complete; final validation MSE per depth: {last}")
    print(f"artifacts in {args.out}")
    return 0


def _cmd_denoise(args) -> int:
    from . import data, infer
    from .checkpoint import load_checkpoint

    if args.depth < 1:
        print(f"error: --depth must be >= 1, got {args.depth}", file=sys.stderr)
        return 2
    ckpt = load_checkpoint(args.ckpt)
    gen = infer.load_generator(ckpt)
    hu = data.read_hu_png(args.input)
    seq = infer.progressive_infer(gen, hu, args.depth, args.window,
                                  trained_depth=ckpt.train_depth,
                                  checkpoint_id=Path(args.ckpt).name,
                                  source_id=str(args.input))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for d, img in enumerate(seq.images, start=1):
        (out / f"depth_{d}.png").write_bytes(infer.to_display_png_bytes(img))
    if seq.extrapolated_depths:
        print(f"note: depths {seq.extrapolated_depths} exceed the trained depth "
              f"{ckpt.train_depth}", file=sys.stderr)
    print(f"wrote {len(seq.images)} depth images to {out}")
    return 0


def _cmd_stats(args) -> int:
    from . import stats as st

    records = st.load_ratings_jsonl(args.ratings)
    report = st.build_report(records, family_a=args.family_a, family_b=args.family_b)
    text = json.dumps(report, indent=2)
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote report to {args.out}")
    else:
        print(text)
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .server import create_app

    app = create_app(checkpoint_path=args.ckpt, data_dir=args.data_dir)
    if args.ui:
        from fastapi.staticfiles import StaticFiles
        app.mount("/", StaticFiles(directory=args.ui, html=True), name="ui")
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="progct",
                                description="progressive low-dose CT denoising toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="generate a paired LDCT/NDCT dataset")
    sim.add_argument("--out", required=True)
    sim.add_argument("--phantoms", type=int, default=10)
    sim.add_argument("--slices-per-phantom", type=int, default=2)
    sim.add_argument("--size", type=int, default=256)
    sim.add_argument("--views", type=int, default=360)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--region", choices=["abdomen", "chest"], default="abdomen")
    sim.add_argument("--i0", type=float, default=1e5)
    sim.add_argument("--dose-factor", type=float, default=0.25)
    sim.set_defaults(fn=_cmd_simulate)

    tr = sub.add_parser("train", help="train the progressive denoiser")
    tr.add_argument("--data", required=True, help="dataset directory with manifest.json")
    tr.add_argument("--out", required=True)
    tr.add_argument("--config", help="JSON file of TrainConfig overrides")
    tr.add_argument("--resume", help="checkpoint to resume from")
    tr.set_defaults(fn=_cmd_train)

    dn = sub.add_parser("denoise", help="run progressive inference on one slice")
    dn.add_argument("--ckpt", required=True)
    dn.add_argument("--input", required=True, help="16-bit PNG slice (raw = HU + 1024)")
    dn.add_argument("--depth", type=int, required=True)
    dn.add_argument("--window", choices=["abdomen", "chest"], default="abdomen")
    dn.add_argument("--out", required=True)
    dn.set_defaults(fn=_cmd_denoise)

    st = sub.add_parser("stats", help="reader-study report from a ratings JSONL file")
    st.add_argument("--ratings", required=True)
    st.add_argument("--out")
    st.add_argument("--family-a", default="DL")
    st.add_argument("--family-b", default="IR")
    st.set_defaults(fn=_cmd_stats)

    sv = sub.add_parser("serve", help="run the inference/rating HTTP service")
    sv.add_argument("--ckpt", required=True)
    sv.add_argument("--host", default="127.0.0.1")
    sv.add_argument("--port", type=int, default=8000)
    sv.add_argument("--data-dir", default=None)
    sv.add_argument("--ui", help="directory of static frontend files to mount at /")
    sv.set_defaults(fn=_cmd_serve)
    return p


def main(argv=None) -> int:
    tune_malloc()
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ValueError, OSError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
