"""Command-line front end: run, accountant, landscape, partition."""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

from . import config as cfgmod
from . import data as datamod
from . import engine, models, probes
from .accountant import calibrate_sigma, compose_and_convert
from .errors import ConfigError, CsvFormatError, NumericError
from .numerics import load_checkpoint, save_checkpoint, stream

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

# Dedicated stream tags for probe randomness (sample choice, directions).
_TAG_LANDSCAPE_SAMPLE = 7001
_TAG_LANDSCAPE_DIRS = 7002

# Shorthand --set keys accepted next to full section.key paths.
_SET_ALIASES = {
    "algo": "algorithm.variant",
    "rho": "algorithm.rho",
    "beta": "algorithm.beta",
    "sigma": "dp.sigma",
    "eta": "federation.eta",
    "rounds": "federation.rounds",
    "alpha": "partition.alpha",
}


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_metrics_csv(path, metrics) -> None:
    cols = ["round", "train_loss", "test_acc", "grad_norm", "mean_preclip_norm",
            "median_preclip_norm", "clip_C", "epsilon"]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(cols) + "\n")
        for m in metrics:
            fh.write(",".join([
                str(m.round), _fmt(m.train_loss), _fmt(m.test_acc),
                _fmt(m.grad_norm), _fmt(m.mean_preclip_norm),
                _fmt(m.median_preclip_norm), _fmt(m.clip_c), _fmt(m.epsilon),
            ]) + "\n")


def write_norms_csv(path, norm_trace) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("round,client,preclip_norm\n")
        for rnd, entries in enumerate(norm_trace, start=1):
            for client, norm in entries:
                fh.write(f"{rnd},{client},{_fmt(norm)}\n")


def write_landscape_csv(path, grid: probes.LandscapeGrid) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("," + ",".join(_fmt(float(b)) for b in grid.b_offsets) + "\n")
        for i, a in enumerate(grid.a_offsets):
            row = [_fmt(float(a))] + [_fmt(float(v)) for v in grid.losses[i]]
            fh.write(",".join(row) + "\n")


def _expand_sets(pairs):
    out = []
    for pair in pairs or []:
        key, _, value = pair.partition("=")
        key = _SET_ALIASES.get(key.strip(), key.strip())
        out.append(f"{key}={value}")
    return out


def _prepare_run_dir(path, force: bool) -> None:
    if os.path.isdir(path) and os.listdir(path) and not force:
        raise ConfigError(f"output directory {path!r} is not empty (use --force)")
    os.makedirs(path, exist_ok=True)


def cmd_run(args) -> int:
    doc = cfgmod.load_toml(args.config) if args.config else {}
    resolved = cfgmod.resolve(doc, overrides=_expand_sets(args.set),
                              profile=args.profile)
    cfg = cfgmod.build_run_config(resolved)
    probe_settings = cfgmod.build_probe_settings(resolved)
    _prepare_run_dir(args.out, args.force)

    result = engine.run(cfg)

    with open(os.path.join(args.out, "config.resolved"), "w", encoding="utf-8") as fh:
        fh.write(cfgmod.to_toml(resolved))
    write_metrics_csv(os.path.join(args.out, "metrics.csv"), result.metrics)
    write_norms_csv(os.path.join(args.out, "norms.csv"), result.norm_trace)
    save_checkpoint(os.path.join(args.out, "checkpoint.fpgn"), result.x_final)

    if probe_settings.landscape:
        _, test = cfg.source.load(cfg.seed_data)
        sample = probes.eval_sample(test, stream(cfg.seed_data, _TAG_LANDSCAPE_SAMPLE),
                                    probe_settings.sample)
        grid = probes.landscape_slice(
            cfg.model, result.x_final, sample,
            probes.GridSpec(probe_settings.lim, probe_settings.resolution),
            stream(cfg.seed_train, _TAG_LANDSCAPE_DIRS))
        write_landscape_csv(os.path.join(args.out, "landscape.csv"), grid)

    final = result.metrics[-1]
    summary = {
        "final": {
            "round": final.round,
            "train_loss": final.train_loss,
            "test_acc": final.test_acc,
            "grad_norm": final.grad_norm,
            "epsilon": "unbounded" if math.isinf(final.epsilon) else final.epsilon,
        },
        "ledger": result.ledger.snapshot(),
        "config": resolved,
    }
    with open(os.path.join(args.out, "summary.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"run complete: round {final.round}, test_acc {final.test_acc:.4f}, "
          f"wrote {args.out}")
    return EXIT_OK


def cmd_accountant(args) -> int:
    if args.q is not None:
        q = args.q
    elif args.n is not None and args.s is not None:
        q = args.s / args.n
    else:
        raise ConfigError("need --q or both --n and --s", field="q")
    if not 0 < q <= 1:
        raise ConfigError("q must lie in (0, 1]", field="q")

    if args.calibrate:
        if args.target_eps is None:
            raise ConfigError("--calibrate needs --target-eps", field="target-eps")
        sigma = calibrate_sigma(args.target_eps, q, args.rounds, args.delta)
        result = compose_and_convert(q, sigma, args.delta, args.rounds)
        payload = {"sigma": sigma, "target_epsilon": args.target_eps}
    else:
        sigma = args.sigma
        result = compose_and_convert(q, sigma, args.delta, args.rounds)
        payload = {"sigma": sigma}

    payload.update({
        "q": q,
        "rounds": args.rounds,
        "delta": args.delta,
        "epsilon": "unbounded" if math.isinf(result.epsilon) else result.epsilon,
        "alpha_star": None if math.isnan(result.alpha_star) else result.alpha_star,
        "epsilon_bar": "unbounded" if math.isinf(result.epsilon_bar) else result.epsilon_bar,
        "caveats": ["fixed-size client sampling accounted as Poisson with q=S/N"],
    })
    print(json.dumps(payload, sort_keys=True))
    return EXIT_OK


def _dataset_from_args(args) -> datamod.Dataset:
    if args.csv:
        schema = datamod.CsvSchema(n_cls=args.n_cls, n_in=args.n_in,
                                   has_header=args.has_header)
        return datamod.ingest_csv(args.csv, schema)
    return datamod.synth_clusters(args.n_cls, args.n_in, args.per_class,
                                  args.spread, args.data_seed)


def cmd_landscape(args) -> int:
    x = load_checkpoint(args.checkpoint)
    model = models.Model(kind=args.model_kind, n_in=args.n_in, n_cls=args.n_cls,
                         hidden=args.hidden if args.model_kind == models.MLP else None,
                         activation=args.activation)
    if model.dim != x.shape[0]:
        raise ConfigError(
            f"checkpoint has {x.shape[0]} params but model expects {model.dim}")
    ds = _dataset_from_args(args)
    sample = probes.eval_sample(ds, stream(args.data_seed, _TAG_LANDSCAPE_SAMPLE),
                                args.sample)
    grid = probes.landscape_slice(model, x, sample,
                                  probes.GridSpec(args.lim, args.resolution),
                                  stream(args.seed, _TAG_LANDSCAPE_DIRS))
    write_landscape_csv(args.out, grid)
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_partition(args) -> int:
    ds = _dataset_from_args(args)
    part = datamod.dirichlet_partition(ds, args.n_clients, args.alpha, args.seed,
                                       min_client_size=args.min_size)
    text = part.to_json()
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
        print(f"wrote {args.out}")
    else:
        print(text)
    return EXIT_OK


def _add_dataset_args(p):
    p.add_argument("--csv", help="dataset CSV (label,f1,...,f_nin)")
    p.add_argument("--has-header", action="store_true")
    p.add_argument("--n-cls", type=int, default=10)
    p.add_argument("--n-in", type=int, default=32)
    p.add_argument("--per-class", type=int, default=200)
    p.add_argument("--spread", type=float, default=0.3)
    p.add_argument("--data-seed", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fedpgn",
        description="Desk-scale lab for differentially private federated learning")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a training run")
    p_run.add_argument("--config", help="TOML config file")
    p_run.add_argument("--profile", choices=sorted(cfgmod.PROFILES),
                       help="named preset applied under the config file")
    p_run.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config key (section.key or shorthand)")
    p_run.add_argument("--out", required=True, help="run directory to create")
    p_run.add_argument("--force", action="store_true",
                       help="allow writing into a non-empty directory")
    p_run.set_defaults(func=cmd_run)

    p_acc = sub.add_parser("accountant", help="privacy budget queries")
    p_acc.add_argument("--q", type=float, help="per-round sampling ratio")
    p_acc.add_argument("--n", type=int, help="total clients (with --s)")
    p_acc.add_argument("--s", type=int, help="sampled clients (with --n)")
    p_acc.add_argument("--sigma", type=float, default=0.8)
    p_acc.add_argument("--rounds", type=int, default=300)
    p_acc.add_argument("--delta", type=float, default=1 / 500)
    p_acc.add_argument("--calibrate", action="store_true",
                       help="solve for sigma instead of epsilon")
    p_acc.add_argument("--target-eps", type=float)
    p_acc.set_defaults(func=cmd_accountant)

    p_land = sub.add_parser("landscape", help="loss surface around a checkpoint")
    p_land.add_argument("--checkpoint", required=True)
    p_land.add_argument("--model-kind", default=models.SOFTMAX,
                        choices=[models.SOFTMAX, models.MLP])
    p_land.add_argument("--hidden", type=int, default=16)
    p_land.add_argument("--activation", default="tanh", choices=["tanh", "relu"])
    _add_dataset_args(p_land)
    p_land.add_argument("--lim", type=float, default=1.0)
    p_land.add_argument("--resolution", type=int, default=41)
    p_land.add_argument("--sample", type=int, default=512)
    p_land.add_argument("--seed", type=int, default=3)
    p_land.add_argument("--out", default="landscape.csv")
    p_land.set_defaults(func=cmd_landscape)

    p_part = sub.add_parser("partition", help="non-IID client split as JSON")
    _add_dataset_args(p_part)
    p_part.add_argument("--n-clients", type=int, required=True)
    p_part.add_argument("--alpha", type=float, required=True)
    p_part.add_argument("--seed", type=int, default=2)
    p_part.add_argument("--min-size", type=int, default=10)
    p_part.add_argument("--out")
    p_part.set_defaults(func=cmd_partition)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, CsvFormatError) as exc:
        field = getattr(exc, "field", None)
        where = f" (field: {field})" if field else ""
        print(f"error: {exc}{where}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
