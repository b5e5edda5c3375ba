"""Command-line entry point: ``pnpda <subcommand> ...``.

Every subcommand writes a ``<output>.manifest.json`` next to its output.
Passing that manifest back as ``--config`` reruns with the identical
resolved config.
"""

import argparse
import logging
import os
import sys

from ..flowmatch import load_checkpoint, save_checkpoint
from . import pipelines as P
from .config import config_hash, load_config
from .io import load_dataset, manifest, save_dataset, save_observations, save_trajectory, write_manifest
from .testbeds import SYSTEMS

log = logging.getLogger("pnpda")


def _common(p, system=True):
    if system:
        p.add_argument("--system", choices=SYSTEMS, help="testbed (default: the config's testbed)")
    p.add_argument("--config", help="JSON config or run manifest merged over the testbed defaults")
    p.add_argument("--full", action="store_true", help="apply the config's full-scale preset")
    p.add_argument("--seed", type=int, help="override the base seed")


def _runs(p):
    p.add_argument("--runs", type=int, help="number of independent runs (default: eval.n_runs)")
    p.add_argument("--workers", type=int, default=1, help="worker processes for independent runs")


def build_parser():
    ap = argparse.ArgumentParser(prog="pnpda", description="Plug-and-play data assimilation experiments")
    ap.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="nature run and its training observations")
    _common(p)
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("pairs", help="background/analysis training pairs from cyclic ensemble DA")
    _common(p)
    p.add_argument("--out", required=True, help="dataset container path")

    p = sub.add_parser("train", help="fit the flow-matching prior on a pair dataset")
    _common(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--log-every", type=int, default=50, help="epochs between progress lines (0: quiet)")

    p = sub.add_parser("assimilate", help="cyclic DA benchmark of one method")
    _common(p)
    _runs(p)
    p.add_argument("--method", required=True, choices=P.METHODS)
    p.add_argument("--checkpoint", help="trained prior (required for pnpda)")
    p.add_argument("--out", required=True, help="records CSV path")

    p = sub.add_parser("sweep", help="observation density or noise sweep")
    _common(p)
    _runs(p)
    p.add_argument("--axis", required=True, choices=P.AXES + ("obs_count",))
    p.add_argument("--values", nargs="+", type=float, help="axis values (default: the config's sweep grid)")
    p.add_argument("--methods", nargs="+", default=["3dvar", "pnpda"], choices=P.METHODS)
    p.add_argument("--checkpoint")
    p.add_argument("--out", required=True)

    p = sub.add_parser("ablate", help="PnP-DA iteration count or step-exponent ablation")
    _common(p)
    _runs(p)
    p.add_argument("--axis", required=True, choices=P.ABLATION_AXES)
    p.add_argument("--values", nargs="+", type=float, help="grid (default: the config's ablation grid)")
    p.add_argument("--no-baseline", action="store_true", help="skip the 3D-Var rows")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    return ap


def _config(args, system=None):
    over = {"seed": args.seed} if args.seed is not None else None
    return load_config(system or getattr(args, "system", None), args.config, over, full=args.full)


def _load_net(path, cfg):
    if path is None:
        raise SystemExit("pnpda needs --checkpoint")
    net, header = load_checkpoint(path)
    if header.get("testbed") and header["testbed"] != cfg["testbed"]:
        raise SystemExit(f"checkpoint is for {header['testbed']!r}, config is {cfg['testbed']!r}")
    return net


def _write_results(table, out, cfg, args):
    table.write_csv(out)
    stem, _ = os.path.splitext(out)
    agg = stem + ".aggregate.csv"
    table.write_aggregate_csv(agg)
    write_manifest(out + ".manifest.json", manifest(cfg, args.command, _argdict(args), [out, agg]))
    print(table.summary())


def _argdict(args):
    return {k: v for k, v in vars(args).items() if k not in ("log_level",)}


def cmd_generate(args):
    cfg = _config(args)
    os.makedirs(args.out, exist_ok=True)
    traj, obs = P.generate_nature_run(cfg)
    h = config_hash(cfg)
    tpath = os.path.join(args.out, "truth.bin")
    opath = os.path.join(args.out, "obs.bin")
    save_trajectory(tpath, traj, cfg["testbed"], float(cfg["dt"]), int(cfg["seed"]), h)
    save_observations(opath, obs, cfg["testbed"], float(cfg["dt"]), int(cfg["seed"]), h)
    write_manifest(os.path.join(args.out, "manifest.json"), manifest(cfg, "generate", _argdict(args), [tpath, opath]))
    log.info("wrote %d states and %d observation times to %s", len(traj), len(obs), args.out)


def cmd_pairs(args):
    cfg = _config(args)
    ds = P.generate_training_pairs(cfg)
    save_dataset(args.out, ds, config_hash(cfg))
    write_manifest(args.out + ".manifest.json", manifest(cfg, "pairs", _argdict(args), [args.out]))


def cmd_train(args):
    ds, header = load_dataset(args.dataset)
    cfg = _config(args, args.system or header.get("testbed") or None)
    if ds.dim != P.Testbed(cfg).dim:
        raise SystemExit(f"dataset dim {ds.dim} does not match testbed {cfg['testbed']}")
    net, history = P.train_prior(cfg, ds, log_every=args.log_every)
    best = min(history, key=lambda e: e["val_loss"])
    save_checkpoint(
        args.out, net, testbed=cfg["testbed"], beta=float(cfg["train"]["beta"]), seed=int(cfg["seed"]),
        extra={"config_hash": config_hash(cfg), "dataset_config_hash": header.get("config_hash"),
               "epochs": len(history), "best_epoch": best["epoch"], "best_val_loss": best["val_loss"]},
    )
    write_manifest(args.out + ".manifest.json", manifest(cfg, "train", _argdict(args), [args.out]))
    log.info("trained %d epochs, best val loss %.4f at epoch %d", len(history), best["val_loss"], best["epoch"])


def cmd_assimilate(args):
    cfg = _config(args)
    net = _load_net(args.checkpoint, cfg) if args.method == "pnpda" else None
    table = P.benchmark(cfg, [args.method], net=net, n_runs=args.runs, workers=args.workers)
    _write_results(table, args.out, cfg, args)


def cmd_sweep(args):
    cfg = _config(args)
    values = args.values if args.values else cfg.get("sweep", {}).get(args.axis)
    if not values:
        raise SystemExit(f"no values given and no sweep.{args.axis} grid in the config")
    if args.axis == "obs_count":
        values = [int(v) for v in values]
    net = _load_net(args.checkpoint, cfg) if "pnpda" in args.methods else None
    table = P.sweep(cfg, args.axis, values, args.methods, net=net, n_runs=args.runs, workers=args.workers)
    _write_results(table, args.out, cfg, args)


def cmd_ablate(args):
    cfg = _config(args)
    values = args.values if args.values else cfg.get("ablate", {}).get(args.axis)
    if not values:
        raise SystemExit(f"no values given and no ablate.{args.axis} grid in the config")
    net = _load_net(args.checkpoint, cfg)
    table = P.ablate(cfg, args.axis, values, net, n_runs=args.runs, workers=args.workers,
                     baseline=not args.no_baseline)
    _write_results(table, args.out, cfg, args)


COMMANDS = {
    "generate": cmd_generate,
    "pairs": cmd_pairs,
    "train": cmd_train,
    "assimilate": cmd_assimilate,
    "sweep": cmd_sweep,
    "ablate": cmd_ablate,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level, format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except ValueError as exc:
        log.error("%s", exc)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
