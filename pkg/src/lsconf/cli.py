"""``lsconf`` command line: sysinfo, nmin, gen, train, compare.

Exit codes: 0 success, 1 usage/config error, 2 capacity error, 3 divergence.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import statistics
import sys
from pathlib import Path

from . import _kernels
from .assignment import CapacityError, IntegrityError, TableParseError, assign, load_table, save_table
from .nn_core import ConfigError, save_checkpoint
from .training import RunMetrics, TrainConfig, epochs_to_accuracy, normalize_curve, train
from .vector_systems import (DEFAULT_BRUTEFORCE_CAP, ConstructionError, build_system, separation_verdict,
                             mcs_bruteforce, mcs_literal, mcs_approx, n_min, parse_label,
                             validate_label)

EXIT_OK, EXIT_USAGE, EXIT_CAPACITY, EXIT_DIVERGED = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _fmt(x, digits=4):
    if x is None:
        return "undefined"
    return f"{x:.{digits}f}"


def cmd_sysinfo(args) -> int:
    label = parse_label(args.label)
    report = validate_label(label, args.n)
    if not report and not args.allow_invalid:
        print(f"rule violation: {report.message}", file=sys.stderr)
        return EXIT_USAGE
    system = build_system(label, args.n, allow_invalid=args.allow_invalid)
    print(f"system: {system.system_id}")
    print(f"label: {label.display_name}")
    print(f"n: {system.n}")
    print(f"n_vects: {system.n_vects}")
    print(f"base_vector: ({', '.join(str(c) for c in system.base_vector)})")
    print(f"vector_norm: {system.vector_norm:.12g}")
    print(f"mcs_analytic: {_fmt(system.mcs)}")
    if label.permutohedron:
        print(f"mcs_approx_1_minus_1_over_n: {_fmt(mcs_approx(label, args.n))}")
    if system.n_vects <= args.cap:
        print(f"mcs_bruteforce: {_fmt(mcs_bruteforce(system, args.cap), 12)}")
        print(f"min_abs_cossim_literal: {_fmt(mcs_literal(system, args.cap), 12)}")
    else:
        print(f"mcs_bruteforce: skipped (n_vects > cap {args.cap})")
        print(f"min_abs_cossim_literal: skipped (n_vects > cap {args.cap})")
    print(f"separation_range_0.5<=mcs<0.9: {separation_verdict(system.mcs)}")
    if not report:
        print(f"warning: {report.message}")
    return EXIT_OK


def cmd_nmin(args) -> int:
    if args.classes < 1:
        print("--classes must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    print(n_min(parse_label(args.label), args.classes))
    return EXIT_OK


def cmd_gen(args) -> int:
    system = build_system(args.label, args.n)
    table = assign(system, args.classes, args.strategy, args.seed, project=args.project)
    checksum = save_table(table, args.out)
    print(f"wrote {args.classes} rows to {args.out}")
    print(f"checksum: fnv1a64:{checksum:016x}")
    return EXIT_OK


def _load_config(path, overrides: dict) -> TrainConfig:
    try:
        with open(path, encoding="utf-8") as f:
            data = json.load(f)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    cfg = TrainConfig.from_dict(data)
    kw = {k: v for k, v in overrides.items() if v is not None}
    return cfg.with_overrides(**kw) if kw else cfg


def cmd_train(args) -> int:
    cfg = _load_config(args.config, {"epochs": args.epochs, "seed": args.seed})
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    print(f"config_hash: {cfg.config_hash()}")
    print(f"n: {cfg.resolved_n()}  backend: {_kernels.BACKEND}")
    result = train(cfg)
    result.metrics.write_csv(out / "metrics.csv")
    save_checkpoint(result.model, out / "model.ckpt")
    (out / "config.json").write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")
    last = result.metrics.rows[-1]
    print(f"epochs: {len(result.metrics.rows)}  final loss: {last.loss:.6g}  accuracy: {last.accuracy:.4f}")
    if result.metrics.diverged:
        print(f"diverged at epoch {last.epoch}", file=sys.stderr)
        return EXIT_DIVERGED
    return EXIT_OK


def _seeded(cfg: TrainConfig, seed: int) -> TrainConfig:
    import dataclasses
    return cfg.with_overrides(seed=seed, assign_seed=seed,
                              dataset=dataclasses.replace(cfg.dataset, seed=seed))


def _run_cached(cfg: TrainConfig, workdir: Path | None) -> RunMetrics:
    if workdir is not None:
        path = workdir / f"{cfg.config_hash()}.csv"
        if path.exists():
            return RunMetrics.read_csv(path)
    metrics = train(cfg).metrics
    if workdir is not None:
        metrics.write_csv(path)
    return metrics


def compare_runs(named_runs: dict[str, list[RunMetrics]], threshold: float):
    """Per-name epochs-to-threshold (per run and median) and median normalized curves.

    Runs that never reach the threshold count as +inf in the median.
    """
    summary = {}
    curves = {}
    for name, runs in named_runs.items():
        hits = [epochs_to_accuracy(m, threshold) for m in runs]
        vals = [math.inf if h is None else h for h in hits]
        summary[name] = {
            "per_run": hits,
            "median": statistics.median(vals),
            "diverged": sum(m.diverged for m in runs),
        }
        norm = [normalize_curve(m) for m in runs]
        length = max(len(m.rows) for m in norm)
        loss_col, acc_col = [], []
        for e in range(length):
            ls = [m.rows[e].loss for m in norm if e < len(m.rows)]
            ac = [m.rows[e].accuracy for m in norm if e < len(m.rows)]
            loss_col.append(statistics.median(ls))
            acc_col.append(statistics.median(ac))
        curves[name] = (loss_col, acc_col)
    return summary, curves


def _fmt_epochs(v):
    return "NA" if v is None or v == math.inf else (str(int(v)) if float(v).is_integer() else f"{v:g}")


def cmd_compare(args) -> int:
    if len(args.configs) < 2:
        print("compare needs at least two configs", file=sys.stderr)
        return EXIT_USAGE
    workdir = Path(args.workdir) if args.workdir else None
    if workdir:
        workdir.mkdir(parents=True, exist_ok=True)
    named: dict[str, list[RunMetrics]] = {}
    for k, path in enumerate(args.configs):
        p = Path(path)
        name = f"{k}:{p.stem}"
        if not p.exists():
            print(f"missing run artifact: {path}", file=sys.stderr)
            return EXIT_USAGE
        if p.suffix == ".csv":
            named[name] = [RunMetrics.read_csv(p)]
            continue
        cfg = _load_config(p, {"epochs": args.epochs})
        print(f"{name} config_hash: {cfg.config_hash()}")
        named[name] = [_run_cached(_seeded(cfg, args.seed + i), workdir) for i in range(args.seeds)]
    summary, curves = compare_runs(named, args.threshold)

    print(f"threshold: {args.threshold}")
    print("config,median_epochs,per_run,diverged_runs")
    for name, s in summary.items():
        print(f"{name},{_fmt_epochs(s['median'])},{' '.join(_fmt_epochs(h) for h in s['per_run'])},{s['diverged']}")
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["config", "threshold", "median_epochs", "per_run", "diverged_runs"])
            for name, s in summary.items():
                w.writerow([name, args.threshold, _fmt_epochs(s["median"]),
                            " ".join(_fmt_epochs(h) for h in s["per_run"]), s["diverged"]])
    if args.curves:
        length = max(len(c[0]) for c in curves.values())
        with open(args.curves, "w", encoding="utf-8", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            header = ["epoch"]
            for name in curves:
                header += [f"{name}:loss_norm", f"{name}:accuracy"]
            w.writerow(header)
            for e in range(length):
                row = [e + 1]
                for loss_col, acc_col in curves.values():
                    if e < len(loss_col):
                        row += [f"{loss_col[e]:.9g}", f"{acc_col[e]:.9g}"]
                    else:
                        row += ["", ""]
                w.writerow(row)
    return EXIT_OK


def cmd_verify(args) -> int:
    table = load_table(args.path, verify=True)
    print(f"ok: {table.n_classes} rows, checksum fnv1a64:{table.checksum():016x}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="lsconf", description="Permutation vector systems as fixed latent targets.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("sysinfo", help="counts, norm and separation of a vector system")
    s.add_argument("--label", required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--cap", type=int, default=DEFAULT_BRUTEFORCE_CAP,
                   help="largest system scanned pair by pair")
    s.add_argument("--allow-invalid", action="store_true")
    s.set_defaults(func=cmd_sysinfo)

    s = sub.add_parser("nmin", help="smallest dimension holding --classes vectors")
    s.add_argument("--label", required=True)
    s.add_argument("--classes", type=int, required=True)
    s.set_defaults(func=cmd_nmin)

    s = sub.add_parser("gen", help="write a class assignment table")
    s.add_argument("--label", required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--classes", type=int, required=True)
    s.add_argument("--strategy", choices=("sequential", "shuffled"), default="sequential")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--project", action="store_true", help="drop to n-1 coordinates (zero-sum systems)")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_gen)

    s = sub.add_parser("verify", help="check an assignment table against its header")
    s.add_argument("path")
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("train", help="train one configuration")
    s.add_argument("--config", required=True)
    s.add_argument("--out-dir", default="run")
    s.add_argument("--epochs", type=int)
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("compare", help="epochs-to-accuracy across configurations")
    s.add_argument("--configs", nargs="+", required=True,
                   help="JSON configs (run over --seeds) or metrics CSVs")
    s.add_argument("--threshold", type=float, default=0.9)
    s.add_argument("--seeds", type=int, default=5)
    s.add_argument("--seed", type=int, default=0, help="first seed")
    s.add_argument("--epochs", type=int)
    s.add_argument("--workdir", help="cache directory for per-run metrics")
    s.add_argument("--out", help="summary CSV")
    s.add_argument("--curves", help="median normalized curves CSV")
    s.set_defaults(func=cmd_compare)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CapacityError as exc:
        print(f"capacity error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except (ConfigError, ConstructionError, TableParseError, IntegrityError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
