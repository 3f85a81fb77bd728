"""Command-line entry point wiring generation, yield estimation, training,
evaluation, prediction, and pushover-curve emission.

Every run prints its resolved configuration so results can be reproduced;
output files are never overwritten unless --force is given. The
FRAMELAB_SEED environment variable overrides --seed when set.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from .dataset import (
    DatasetConfig,
    DatasetError,
    generate_dataset,
    load_dataset,
    save_dataset,
    split_dataset,
)
from .evaluate import (
    PROFILES,
    EvaluateError,
    emit_case_table,
    emit_report,
    evaluate,
)
from .fem import FemError, solve_nonlinear
from .frame import LoadCase, build_reference_frame
from .models import ModelError
from .portal import increment_scan, portal_yield
from .train import (
    TrainConfig,
    TrainError,
    load_checkpoint,
    save_checkpoint,
    train,
)

logger = logging.getLogger(__name__)


def _resolve_seed(args: argparse.Namespace) -> int:
    env = os.environ.get("FRAMELAB_SEED")
    if env is not None:
        return int(env)
    return args.seed


def _out_path(args: argparse.Namespace, path: str) -> str:
    if os.path.isabs(path):
        return path
    return os.path.join(args.out_dir, path)


def _check_overwrite(args: argparse.Namespace, path: str) -> None:
    if os.path.exists(path) and not args.force:
        raise FileExistsError(f"{path} exists; pass --force to overwrite")


def _print_config(name: str, args: argparse.Namespace) -> None:
    skip = {"func"}
    resolved = {k: v for k, v in sorted(vars(args).items()) if k not in skip}
    print(f"[{name}] resolved config: {resolved}")


def _cmd_generate(args: argparse.Namespace) -> int:
    seed = _resolve_seed(args)
    args.seed = seed
    _print_config("generate", args)
    out = _out_path(args, args.out)
    _check_overwrite(args, out)
    frame = build_reference_frame()
    config = DatasetConfig(n_cases=args.cases, linear_fraction=args.mix, seed=seed)
    records = generate_dataset(frame, config)
    save_dataset(records, out)
    n_linear = sum(r.regime == "linear" for r in records)
    print(f"wrote {len(records)} cases ({n_linear} linear / {len(records) - n_linear} nonlinear) to {out}")
    return 0


def _cmd_yield_estimate(args: argparse.Namespace) -> int:
    _print_config("yield-estimate", args)
    frame = build_reference_frame()
    estimate = portal_yield(frame, args.fy, elastic_fraction=args.elastic_fraction)
    print(f"beam yield moment M_y = {estimate.beam_yield_moment:.4e} N·m")
    print(f"story shear at yield V_y = {estimate.story_shear_yield:.4e} N")
    print(f"elastic bound ({args.elastic_fraction:.2f}·V_y) = {estimate.elastic_bound:.4e} N")
    rows = increment_scan(frame, args.fmax, args.steps, estimate)
    print(f"{'step':>4} {'factor':>8} {'f_top=f_mid':>12} {'V1/V_y':>8} {'V2/V_y':>8}  flag")
    for row in rows:
        mark = "  <- first yield" if row.flagged else ""
        print(
            f"{row.step:>4} {row.load_factor:>8.3f} {row.force:>12.4g} "
            f"{row.ratio_story1:>8.3f} {row.ratio_story2:>8.3f}{mark}"
        )
    if args.csv:
        out = _out_path(args, args.csv)
        _check_overwrite(args, out)
        with open(out, "w", encoding="utf-8") as fh:
            fh.write("step,load_factor,force_n,ratio_story1,ratio_story2,flagged\n")
            for row in rows:
                fh.write(
                    f"{row.step},{row.load_factor!r},{row.force!r},"
                    f"{row.ratio_story1!r},{row.ratio_story2!r},{int(row.flagged)}\n"
                )
        print(f"wrote scan table to {out}")
    return 0


def _cmd_train(args: argparse.Namespace) -> int:
    seed = _resolve_seed(args)
    args.seed = seed
    _print_config("train", args)
    out = _out_path(args, args.out)
    _check_overwrite(args, out)
    frame = build_reference_frame()
    records = load_dataset(args.data)
    train_recs, test_recs = split_dataset(records, args.split, seed=seed)
    config = TrainConfig(
        learning_rate=args.lr,
        batch_size=args.batch,
        max_epochs=args.epochs,
        lam=getattr(args, "lambda"),
        seed=seed,
    )
    model, stats, history = train(args.model, frame, train_recs, test_recs, config)
    save_checkpoint(out, model, stats, config)
    print(
        f"trained {args.model} on {len(train_recs)} cases "
        f"({len(test_recs)} held out); best test loss "
        f"{history.best_test_loss:.4e} at epoch {history.best_epoch}; wrote {out}"
    )
    return 0


def _cmd_evaluate(args: argparse.Namespace) -> int:
    _print_config("evaluate", args)
    frame = build_reference_frame()
    model, stats, config = load_checkpoint(args.ckpt)
    records = load_dataset(args.data)
    train_recs, test_recs = split_dataset(records, args.split, seed=config.seed)
    profile = PROFILES[args.profile]
    reports = [
        evaluate(model, stats, frame, test_recs, profile, dataset_name="testing"),
        evaluate(model, stats, frame, train_recs, profile, dataset_name="training"),
    ]
    for report in reports:
        print(emit_report(report, "text"))
    if args.csv:
        out = _out_path(args, args.csv)
        _check_overwrite(args, out)
        csv_lines = emit_report(reports[0], "csv").splitlines()
        csv_lines += emit_report(reports[1], "csv").splitlines()[1:]
        with open(out, "w", encoding="utf-8") as fh:
            fh.write("\n".join(csv_lines) + "\n")
        print(f"wrote report to {out}")
    return 0


def _cmd_predict(args: argparse.Namespace) -> int:
    _print_config("predict", args)
    frame = build_reference_frame()
    model, stats, _ = load_checkpoint(args.ckpt)
    print(emit_case_table(model, stats, frame, LoadCase(args.fmid, args.ftop)))
    return 0


def _cmd_curves(args: argparse.Namespace) -> int:
    _print_config("curves", args)
    out = _out_path(args, args.out)
    _check_overwrite(args, out)
    frame = build_reference_frame()
    loads = LoadCase(args.fmid, args.ftop)
    _, _, curve = solve_nonlinear(frame, loads, n_steps=args.steps)
    node_ids = curve.points[0].response.node_ids
    header = ["load_factor", "v1", "v2"]
    for nid in node_ids:
        header += [f"ux_mm_node{nid}", f"uy_mm_node{nid}", f"rz_deg_node{nid}"]
    with open(out, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for pt in curve.points:
            row = [repr(pt.load_factor), repr(pt.v1), repr(pt.v2)]
            for nid in node_ids:
                row += [repr(float(v)) for v in pt.response.row(nid)]
            fh.write(",".join(row) + "\n")
    print(f"wrote pushover curve ({len(curve.points)} points) to {out}")

    if args.svg:
        svg_path = _out_path(args, args.svg)
        _check_overwrite(args, svg_path)
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        total = loads.f_mid + loads.f_top
        forces = [pt.load_factor * total for pt in curve.points]
        fig, ax = plt.subplots(figsize=(7, 5))
        for nid in node_ids:
            ax.plot(forces, [pt.response.ux(nid) for pt in curve.points], label=f"node {nid}")
        ax.set_xlabel("applied horizontal force (N)")
        ax.set_ylabel("u_x (mm)")
        ax.legend()
        ax.grid(alpha=0.3)
        fig.tight_layout()
        fig.savefig(svg_path, format="svg")
        plt.close(fig)
        print(f"wrote chart to {svg_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="framelab",
        description="Two-story frame FEM bench and displacement surrogate.",
    )
    parser.add_argument("--out-dir", default=".", help="directory for relative output paths")
    parser.add_argument("--log-level", default="WARNING",
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    parser.add_argument("--force", action="store_true", help="overwrite existing outputs")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="sample load cases and solve them with the FEM oracle")
    p.add_argument("--cases", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mix", type=float, default=0.6, help="fraction drawn from the linear range")
    p.add_argument("--out", required=True, help="output dataset path (JSON Lines)")
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("yield-estimate", help="Portal-Method yield screen and load scan")
    p.add_argument("--fy", type=float, default=2.35e8, help="steel yield strength (Pa)")
    p.add_argument("--fmax", type=float, default=8.0e5)
    p.add_argument("--steps", type=int, default=12)
    p.add_argument("--elastic-fraction", type=float, default=0.6)
    p.add_argument("--csv", default=None, help="also write the scan table as CSV")
    p.set_defaults(func=_cmd_yield_estimate)

    p = sub.add_parser("train", help="train the surrogate or the dense baseline")
    p.add_argument("--model", choices=["gnn", "nn"], required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--lambda", type=float, default=1.0, help="fixed-node penalty weight")
    p.add_argument("--split", type=float, default=0.85)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="checkpoint output path")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("evaluate", help="tolerance-based accuracy report")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--profile", choices=sorted(PROFILES), default="zone")
    p.add_argument("--split", type=float, default=0.85,
                   help="split fraction used at training time")
    p.add_argument("--csv", default=None)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("predict", help="predict one load case and compare with the FEM")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--fmid", type=float, required=True)
    p.add_argument("--ftop", type=float, required=True)
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("curves", help="emit a pushover curve as CSV (and optional SVG)")
    p.add_argument("--fmid", type=float, required=True)
    p.add_argument("--ftop", type=float, required=True)
    p.add_argument("--steps", type=int, default=20)
    p.add_argument("--out", required=True)
    p.add_argument("--svg", default=None)
    p.set_defaults(func=_cmd_curves)
    return parser


def run(argv: list[str]) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level))
    try:
        return args.func(args)
    except (DatasetError, EvaluateError, FemError, ModelError, TrainError,
            FileExistsError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
